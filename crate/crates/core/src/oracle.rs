//! Brute-force references for tiny instances: exhaustive grid search over
//! the power box and seeded restart points for the local solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::phy::{PowerAllocation, SecrecyProblem};
use crate::scalar::Scalar;

/// Largest `K * M` the exhaustive search accepts.
pub const MAX_GRID_VARIABLES: usize = 5;

/// `n` evenly spaced values from `lo` to `hi`, both included.
pub fn linspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * T::of(i as f64) / T::of((n - 1) as f64)
                }
            })
            .collect(),
    }
}

/// Best allocation on the full tensor grid with `points` values per power,
/// including the floor and `p_max`.
pub fn grid_search<T: Scalar>(prob: &SecrecyProblem<T>, points: usize) -> Result<(PowerAllocation<T>, T)> {
    let (pairs, blocks) = (prob.pairs(), prob.blocks());
    let n = pairs * blocks;
    if n > MAX_GRID_VARIABLES {
        return Err(Error::Config(format!(
            "grid search needs K*M <= {MAX_GRID_VARIABLES} (got {n})"
        )));
    }
    if points < 2 {
        return Err(Error::Config(format!("grid search needs at least 2 points per power (got {points})")));
    }
    let axis = linspace(prob.floor(), prob.p_max(), points);
    let mut idx = vec![0usize; n];
    let mut p = PowerAllocation::uniform(pairs, blocks, axis[0]);
    let mut best = (p.clone(), T::neg_infinity());
    loop {
        for (slot, &i) in idx.iter().enumerate() {
            p.grid_mut().as_mut_slice()[slot] = axis[i];
        }
        let r = prob.objective(&p);
        if r > best.1 {
            best = (p.clone(), r);
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == n {
                return Ok(best);
            }
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// `count` starting points: the uniform `p_max / 2` allocation first, then
/// seeded uniform draws inside the box.
pub fn restart_points<T: Scalar>(
    pairs: usize,
    blocks: usize,
    floor: T,
    p_max: T,
    count: usize,
    seed: u64,
) -> Vec<PowerAllocation<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            if i == 0 {
                PowerAllocation::uniform(pairs, blocks, p_max / T::of(2.0))
            } else {
                PowerAllocation::from_grid(Grid::from_fn(pairs, blocks, |_, _| {
                    let u = T::of(rng.random::<f64>());
                    floor + (p_max - floor) * u
                }))
            }
        })
        .collect()
}
