//! Exact operating characteristics of the two tests.
//!
//! A [`DecisionMap`] records the decision of a test at every point of the
//! discordant sample space `{(x10, x01) : x10 + x01 <= n}`. The rejection
//! probability at `(p10, p01)` is then summed over the rejected cells with
//! the factorization `N10 ~ B(n, p10)`, `N01 | N10 = k ~ B(n - k, q01)`,
//! `q01 = p01 / (1 - p10)`.

use alloc::vec::Vec;
use libm::{atan2, sqrt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::check_alpha;
use crate::hypothesis::{margin_bounds_for_total, mcnemar_critical_value, mcnemar_rejects, Method};
use crate::model::{AltParams, NullParams};
use crate::numerics::{pmf_window, BinomialSpec};
use crate::{Error, Result};

/// Binomial terms below this are dropped from the exact sums. Each row has
/// at most `n + 1` of them, so the truncation error stays far below 1e-20.
const PMF_CUTOFF: f64 = 1e-30;

/// Rejection indicator over the whole sample space for one test.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMap {
    pub n: u32,
    pub alpha: f64,
    pub method: Method,
    offsets: Vec<usize>,
    reject: Vec<bool>,
}

impl DecisionMap {
    fn index(&self, x10: u32, x01: u32) -> Option<usize> {
        if u64::from(x10) + u64::from(x01) > u64::from(self.n) {
            return None;
        }
        Some(self.offsets[x10 as usize] + x01 as usize)
    }

    /// `None` outside the sample space.
    pub fn get(&self, x10: u32, x01: u32) -> Option<bool> {
        self.index(x10, x01).map(|i| self.reject[i])
    }

    pub fn is_rejected(&self, x10: u32, x01: u32) -> bool {
        self.get(x10, x01).unwrap_or(false)
    }

    pub fn is_accepted(&self, x10: u32, x01: u32) -> bool {
        self.get(x10, x01) == Some(false)
    }

    /// Rejection flags for fixed `x10`, indexed by `x01`.
    pub fn row(&self, x10: u32) -> &[bool] {
        let start = self.offsets[x10 as usize];
        &self.reject[start..start + (self.n - x10) as usize + 1]
    }

    /// Every point of the sample space with its rejection flag.
    pub fn points(&self) -> impl Iterator<Item = (u32, u32, bool)> + '_ {
        (0..=self.n).flat_map(move |x10| {
            self.row(x10)
                .iter()
                .enumerate()
                .map(move |(x01, &r)| (x10, x01 as u32, r))
        })
    }

    pub fn rejected_count(&self) -> usize {
        self.reject.iter().filter(|&&r| r).count()
    }

    pub fn len(&self) -> usize {
        self.reject.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reject.is_empty()
    }
}

pub fn decision_map(n: u32, alpha: f64, method: Method) -> Result<DecisionMap> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::Domain("decision map needs n >= 1"));
    }
    let rows = n as usize + 1;
    let mut offsets = Vec::with_capacity(rows);
    let mut total = 0usize;
    for x10 in 0..rows {
        offsets.push(total);
        total += rows - x10;
    }
    let mut reject = alloc::vec![false; total];

    match method {
        Method::McNemar => {
            let critical = mcnemar_critical_value(alpha)?;
            for x10 in 0..=n {
                let start = offsets[x10 as usize];
                for x01 in 0..=(n - x10) {
                    reject[start + x01 as usize] = mcnemar_rejects(x10, x01, critical);
                }
            }
        }
        Method::Margin => {
            // bounds depend on the counts only through s = x10 + x01
            let bounds: Vec<_> = (0..=n)
                .map(|s| margin_bounds_for_total(n, s, alpha))
                .collect();
            for x10 in 0..=n {
                let start = offsets[x10 as usize];
                for x01 in 0..=(n - x10) {
                    reject[start + x01 as usize] = bounds[(x10 + x01) as usize].rejects(x10, x01);
                }
            }
        }
    }
    Ok(DecisionMap {
        n,
        alpha,
        method,
        offsets,
        reject,
    })
}

/// `P((N10, N01) in R)` at discordant probabilities `(p10, p01)`.
fn rejection_probability(map: &DecisionMap, p10: f64, p01: f64) -> f64 {
    let q01 = if p10 >= 1.0 {
        0.0
    } else {
        (p01 / (1.0 - p10)).clamp(0.0, 1.0)
    };
    let (start, outer) = pmf_window(BinomialSpec { n: map.n, p: p10 }, PMF_CUTOFF);
    let mut total = 0.0;
    for (i, &weight) in outer.iter().enumerate() {
        let x10 = start + i as u32;
        let row = map.row(x10);
        if !row.iter().any(|&r| r) {
            continue;
        }
        let (inner_start, inner) = pmf_window(
            BinomialSpec {
                n: map.n - x10,
                p: q01,
            },
            PMF_CUTOFF,
        );
        let rejected: f64 = inner
            .iter()
            .zip(&row[inner_start as usize..])
            .filter(|(_, &r)| r)
            .map(|(p, _)| p)
            .sum();
        total += weight * rejected;
    }
    total.clamp(0.0, 1.0)
}

/// Probability of a type I error at a null parameter point.
pub fn exact_size(map: &DecisionMap, p: &NullParams) -> f64 {
    let d = p.discordant_prob();
    rejection_probability(map, d, d)
}

/// Rejection probability at `(p10, p01)`.
pub fn exact_power(map: &DecisionMap, a: &AltParams) -> f64 {
    rejection_probability(map, a.p10, a.p01)
}

/// Accepted points on the edge of the acceptance region: at least one
/// 4-neighbour is rejected or falls outside the sample space. Ordered by
/// angle around the centroid of the acceptance region.
pub fn region_boundary(map: &DecisionMap) -> Vec<(u32, u32)> {
    let n = i64::from(map.n);
    let accepted = |a: i64, b: i64| -> bool {
        a >= 0 && b >= 0 && a + b <= n && map.is_accepted(a as u32, b as u32)
    };
    let mut points = Vec::new();
    let (mut sum_a, mut sum_b, mut count) = (0.0, 0.0, 0usize);
    for (x10, x01, rejected) in map.points() {
        if rejected {
            continue;
        }
        sum_a += f64::from(x10);
        sum_b += f64::from(x01);
        count += 1;
        let (a, b) = (i64::from(x10), i64::from(x01));
        let on_edge = [(a - 1, b), (a + 1, b), (a, b - 1), (a, b + 1)]
            .iter()
            .any(|&(u, v)| !accepted(u, v));
        if on_edge {
            points.push((x10, x01));
        }
    }
    if count == 0 {
        return points;
    }
    let (ca, cb) = (sum_a / count as f64, sum_b / count as f64);
    let mut keyed: Vec<(f64, (u32, u32))> = points
        .into_iter()
        .map(|(a, b)| (atan2(f64::from(b) - cb, f64::from(a) - ca), (a, b)))
        .collect();
    keyed.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    keyed.into_iter().map(|(_, p)| p).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Monte Carlo rejection rate at `(p10, p01)`, drawing `N10` and then
/// `N01 | N10` from their binomial laws.
pub fn mc_estimate(
    map: &DecisionMap,
    p10: f64,
    p01: f64,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    mc_estimate_stream(map, p10, p01, trials, seed, 0)
}

/// As [`mc_estimate`], on an independent ChaCha stream. Sweeps use the cell
/// index as `stream` so results do not depend on evaluation order.
pub fn mc_estimate_stream(
    map: &DecisionMap,
    p10: f64,
    p01: f64,
    trials: u64,
    seed: u64,
    stream: u64,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one trial"));
    }
    let params = AltParams::new(p10, p01)?;
    let q01 = params.conditional_p01();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let n = u64::from(map.n);
    let outer = Binomial::new(n, params.p10).map_err(|_| Error::Domain("invalid binomial law"))?;
    let mut inner: Vec<Binomial> = Vec::with_capacity(map.n as usize + 1);
    for m in 0..=n {
        inner.push(Binomial::new(m, q01).map_err(|_| Error::Domain("invalid binomial law"))?);
    }
    let mut rejected = 0u64;
    for _ in 0..trials {
        let x10 = outer.sample(&mut rng);
        let x01 = inner[(n - x10) as usize].sample(&mut rng);
        if map.is_rejected(x10 as u32, x01 as u32) {
            rejected += 1;
        }
    }
    let estimate = rejected as f64 / trials as f64;
    Ok(McEstimate {
        estimate,
        stderr: sqrt(estimate * (1.0 - estimate) / trials as f64),
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    Size,
    Power,
}

impl SurfaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SurfaceKind::Size => "size",
            SurfaceKind::Power => "power",
        }
    }

    pub fn axis_names(&self) -> (&'static str, &'static str) {
        match self {
            SurfaceKind::Size => ("rho", "pi"),
            SurfaceKind::Power => ("p10", "p01"),
        }
    }
}

/// Values over a rectangular grid, `None` where the cell lies outside the
/// parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub kind: SurfaceKind,
    pub n: u32,
    pub alpha: f64,
    pub method: Method,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Row-major: `values[i * axis2.len() + j]` is the cell `(axis1[i], axis2[j])`.
    pub values: Vec<Option<f64>>,
}

impl SurfaceGrid {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.axis2.len() + j]
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, Option<f64>)> + '_ {
        self.axis1.iter().enumerate().flat_map(move |(i, &a)| {
            self.axis2
                .iter()
                .enumerate()
                .map(move |(j, &b)| (a, b, self.get(i, j)))
        })
    }
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..steps)
            .map(|k| {
                if k + 1 == steps {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (steps - 1) as f64
                }
            })
            .collect(),
    }
}

/// Grid over the null space: `rho` from `rho_min` to `rho_max` inclusive,
/// `pi` at `pi_steps` equispaced interior points of (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeGrid {
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_steps: usize,
    pub pi_steps: usize,
}

impl Default for SizeGrid {
    fn default() -> Self {
        Self {
            rho_min: -0.99,
            rho_max: 0.99,
            rho_steps: 100,
            pi_steps: 99,
        }
    }
}

impl SizeGrid {
    pub fn validate(&self) -> Result<()> {
        let inside = |r: f64| r.is_finite() && r > -1.0 && r < 1.0;
        if !inside(self.rho_min) || !inside(self.rho_max) || self.rho_min > self.rho_max {
            return Err(Error::Domain("rho grid must lie inside (-1, 1)"));
        }
        if self.rho_steps == 0 || self.pi_steps == 0 {
            return Err(Error::Domain("grid needs at least one step per axis"));
        }
        Ok(())
    }

    pub fn rho_axis(&self) -> Vec<f64> {
        linspace(self.rho_min, self.rho_max, self.rho_steps)
    }

    pub fn pi_axis(&self) -> Vec<f64> {
        (1..=self.pi_steps).map(|j| self.pi_at(j - 1)).collect()
    }

    fn pi_at(&self, j: usize) -> f64 {
        (j + 1) as f64 / (self.pi_steps + 1) as f64
    }

    fn mirror(&self, j: usize) -> usize {
        self.pi_steps - 1 - j
    }

    /// Cells that need evaluating: size depends on `pi` only through
    /// `pi (1 - pi)`, so each mirrored pair is computed once at `pi <= 1/2`.
    pub fn canonical_cells(&self) -> Vec<(usize, usize)> {
        let half: Vec<usize> = (0..self.pi_steps)
            .filter(|&j| j <= self.mirror(j))
            .collect();
        (0..self.rho_steps)
            .flat_map(|i| half.iter().map(move |&j| (i, j)))
            .collect()
    }

    /// Exact size at correlation `rho` and pi index `j`, `None` outside the
    /// null space.
    pub fn evaluate(&self, map: &DecisionMap, rho: f64, j: usize) -> Option<f64> {
        let pi = self.pi_at(j.min(self.mirror(j)));
        NullParams::new(pi, rho).ok().map(|p| exact_size(map, &p))
    }

    /// Builds the surface from values of [`Self::canonical_cells`], in order.
    pub fn assemble(&self, map: &DecisionMap, canonical: &[Option<f64>]) -> SurfaceGrid {
        let cells = self.canonical_cells();
        debug_assert_eq!(cells.len(), canonical.len());
        let mut values = alloc::vec![None; self.rho_steps * self.pi_steps];
        for (&(i, j), &v) in cells.iter().zip(canonical) {
            values[i * self.pi_steps + j] = v;
            values[i * self.pi_steps + self.mirror(j)] = v;
        }
        SurfaceGrid {
            kind: SurfaceKind::Size,
            n: map.n,
            alpha: map.alpha,
            method: map.method,
            axis1: self.rho_axis(),
            axis2: self.pi_axis(),
            values,
        }
    }
}

/// Grid over discordant probabilities; cells with `p10 + p01 >= 1` are empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerGrid {
    pub p10_min: f64,
    pub p10_max: f64,
    pub p01_min: f64,
    pub p01_max: f64,
    pub steps: usize,
}

impl Default for PowerGrid {
    fn default() -> Self {
        Self {
            p10_min: 0.005,
            p10_max: 0.745,
            p01_min: 0.005,
            p01_max: 0.745,
            steps: 99,
        }
    }
}

impl PowerGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = |lo: f64, hi: f64| {
            lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 1.0
        };
        if !ok(self.p10_min, self.p10_max) || !ok(self.p01_min, self.p01_max) {
            return Err(Error::Domain(
                "power grid ranges must be ordered within [0, 1]",
            ));
        }
        if self.steps == 0 {
            return Err(Error::Domain("grid needs at least one step per axis"));
        }
        Ok(())
    }

    pub fn p10_axis(&self) -> Vec<f64> {
        linspace(self.p10_min, self.p10_max, self.steps)
    }

    pub fn p01_axis(&self) -> Vec<f64> {
        linspace(self.p01_min, self.p01_max, self.steps)
    }

    pub fn evaluate(map: &DecisionMap, p10: f64, p01: f64) -> Option<f64> {
        AltParams::new(p10, p01).ok().map(|a| exact_power(map, &a))
    }

    pub fn assemble(&self, map: &DecisionMap, values: Vec<Option<f64>>) -> SurfaceGrid {
        debug_assert_eq!(values.len(), self.steps * self.steps);
        SurfaceGrid {
            kind: SurfaceKind::Power,
            n: map.n,
            alpha: map.alpha,
            method: map.method,
            axis1: self.p10_axis(),
            axis2: self.p01_axis(),
            values,
        }
    }
}

/// Exact size over a `(rho, pi)` grid, evaluated serially.
pub fn size_surface(map: &DecisionMap, grid: &SizeGrid) -> Result<SurfaceGrid> {
    grid.validate()?;
    let rho = grid.rho_axis();
    let values: Vec<Option<f64>> = grid
        .canonical_cells()
        .into_iter()
        .map(|(i, j)| grid.evaluate(map, rho[i], j))
        .collect();
    Ok(grid.assemble(map, &values))
}

/// Exact power over a `(p10, p01)` grid, evaluated serially.
pub fn power_surface(map: &DecisionMap, grid: &PowerGrid) -> Result<SurfaceGrid> {
    grid.validate()?;
    let (a1, a2) = (grid.p10_axis(), grid.p01_axis());
    let values = a1
        .iter()
        .flat_map(|&p10| {
            a2.iter()
                .map(move |&p01| PowerGrid::evaluate(map, p10, p01))
        })
        .collect();
    Ok(grid.assemble(map, values))
}
