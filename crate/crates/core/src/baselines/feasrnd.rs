use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::simenv::{Planner, World};

/// Uniform choice among feasible tasks; the depot only when nothing else is
/// feasible.
pub fn feasrnd_action(world: &World, robot: usize, rng: &mut impl Rng) -> usize {
    let mask = world.feasible_mask(robot);
    let tasks: Vec<usize> = (1..mask.len()).filter(|&i| mask[i]).collect();
    if tasks.is_empty() {
        0
    } else {
        tasks[rng.random_range(0..tasks.len())]
    }
}

pub struct FeasRnd {
    rng: ChaCha8Rng,
}

impl FeasRnd {
    pub fn new(seed: u64) -> Self {
        FeasRnd { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Planner for FeasRnd {
    fn name(&self) -> &str {
        "feasrnd"
    }

    fn decide(&mut self, world: &World, robot: usize) -> Result<usize, crate::Error> {
        Ok(feasrnd_action(world, robot, &mut self.rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Arena, FleetSpec, Point, Scenario, TaskSpec};
    use std::sync::Arc;

    fn scenario(tasks: Vec<(f64, f64, f64)>) -> Arc<Scenario> {
        Arc::new(Scenario {
            seed: 0,
            arena: Arena { width: 1.0, height: 1.0 },
            depot: Point::new(0.5, 0.5),
            fleet: FleetSpec { robots: 1, ..FleetSpec::default() },
            tasks: tasks
                .into_iter()
                .enumerate()
                .map(|(i, (x, y, deadline))| TaskSpec { id: i + 1, x, y, deadline, demand: 2.0 })
                .collect(),
        })
    }

    #[test]
    fn single_feasible_task_is_chosen() {
        let w = World::reset(scenario(vec![(0.6, 0.5, 300.0)]), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(feasrnd_action(&w, 0, &mut rng), 1);
        }
    }

    #[test]
    fn no_feasible_task_goes_to_depot() {
        let mut s = (*scenario(vec![(0.6, 0.5, 300.0)])).clone();
        s.fleet.range = 0.1;
        let w = World::reset(Arc::new(s), 0);
        assert_eq!(feasrnd_action(&w, 0, &mut ChaCha8Rng::seed_from_u64(1)), 0);
    }

    #[test]
    fn uniform_over_three_tasks() {
        let w = World::reset(scenario(vec![(0.6, 0.5, 300.0), (0.4, 0.5, 300.0), (0.5, 0.6, 300.0)]), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 4];
        let trials = 30_000;
        for _ in 0..trials {
            counts[feasrnd_action(&w, 0, &mut rng)] += 1;
        }
        assert_eq!(counts[0], 0);
        for &c in &counts[1..] {
            assert!((c as f64 / trials as f64 - 1.0 / 3.0).abs() < 0.02);
        }
    }
}
