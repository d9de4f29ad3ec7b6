//! Parallel surface sweeps.
//!
//! Cells are evaluated on a rayon pool and collected in grid order, and each
//! Monte Carlo cell draws from its own stream keyed by the cell index, so
//! the output does not depend on the thread count.

use paired_equiv_core::evaluation::{PowerGrid, SizeGrid};
use paired_equiv_core::{mc_estimate_stream, DecisionMap, McEstimate, NullParams, SurfaceGrid};
use rayon::prelude::*;

/// Optional Monte Carlo cross-check attached to every cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub trials: u64,
    pub seed: u64,
}

pub struct Sweep {
    pub surface: SurfaceGrid,
    pub monte_carlo: Option<Vec<Option<McEstimate>>>,
}

pub fn pool(threads: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()?)
}

fn monte_carlo_cells(
    map: &DecisionMap,
    params: &[Option<(f64, f64)>],
    mc: MonteCarlo,
) -> anyhow::Result<Vec<Option<McEstimate>>> {
    params
        .par_iter()
        .enumerate()
        .map(|(idx, p)| {
            p.map(|(p10, p01)| mc_estimate_stream(map, p10, p01, mc.trials, mc.seed, idx as u64))
                .transpose()
                .map_err(anyhow::Error::from)
        })
        .collect()
}

pub fn size_sweep(
    pool: &rayon::ThreadPool,
    map: &DecisionMap,
    grid: &SizeGrid,
    mc: Option<MonteCarlo>,
) -> anyhow::Result<Sweep> {
    grid.validate()?;
    pool.install(|| {
        let rho = grid.rho_axis();
        let canonical: Vec<Option<f64>> = grid
            .canonical_cells()
            .into_par_iter()
            .map(|(i, j)| grid.evaluate(map, rho[i], j))
            .collect();
        let surface = grid.assemble(map, &canonical);
        let monte_carlo = match mc {
            Some(mc) => {
                let params: Vec<Option<(f64, f64)>> = surface
                    .cells()
                    .map(|(rho, pi, v)| {
                        v.and(NullParams::new(pi, rho).ok()).map(|p| {
                            let d = p.discordant_prob();
                            (d, d)
                        })
                    })
                    .collect();
                Some(monte_carlo_cells(map, &params, mc)?)
            }
            None => None,
        };
        Ok(Sweep {
            surface,
            monte_carlo,
        })
    })
}

pub fn power_sweep(
    pool: &rayon::ThreadPool,
    map: &DecisionMap,
    grid: &PowerGrid,
    mc: Option<MonteCarlo>,
) -> anyhow::Result<Sweep> {
    grid.validate()?;
    pool.install(|| {
        let (a1, a2) = (grid.p10_axis(), grid.p01_axis());
        let cells: Vec<(f64, f64)> = a1
            .iter()
            .flat_map(|&p10| a2.iter().map(move |&p01| (p10, p01)))
            .collect();
        let values: Vec<Option<f64>> = cells
            .par_iter()
            .map(|&(p10, p01)| PowerGrid::evaluate(map, p10, p01))
            .collect();
        let surface = grid.assemble(map, values);
        let monte_carlo = match mc {
            Some(mc) => {
                let params: Vec<Option<(f64, f64)>> = cells
                    .iter()
                    .zip(&surface.values)
                    .map(|(&c, v)| v.map(|_| c))
                    .collect();
                Some(monte_carlo_cells(map, &params, mc)?)
            }
            None => None,
        };
        Ok(Sweep {
            surface,
            monte_carlo,
        })
    })
}
