//! Population dynamics for the recursive distributional equations of the
//! root resolvents.
//!
//! Four pools approximate the laws of `h⁻, h̄⁻, h⁺, h̄⁺` at a fixed spectral
//! parameter `η`; `h̄` is the resolvent of the tree with the root's shift
//! edge removed. With `ψ(x) = -(η + x)^{-1}` one sweep applies
//!
//! * `h̄⁺ ← ψ(Σ_k ζ_k² h⁻_k)` with `ζ` Poisson-Dirichlet,
//! * `h̄⁻ ← ψ(Σ_k (ξ_k/(ξ_k+S_k))² ψ(|z|² h̄⁻_0 + Σ_j (ξ^{(k)}_j/(ξ_k+S_k))² h⁻_j))`,
//!   where `S_k` is the sum of the points `ξ^{(k)}`,
//! * `h^± ← ψ(-1/h̄^± + |z|² h̄^∓)` with independent draws.
//!
//! Every series keeps a fixed number of leading terms. The rest is replaced
//! by its conditional mean: `E Σ_{i>K} ξ_i²` given the `K`-th arrival, times
//! the pool mean of the resolvents it multiplies.
//!
//! A sweep is bulk synchronous. New pools are built from a frozen snapshot in
//! fixed-size chunks, and each chunk has its own derived stream, so results do
//! not depend on the number of worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::heavy_tail::{fill_ppp, stable_inverse_square_mean, TailIndex};
use crate::measure::{EstimateMeta, EstimateMethod, McValue, RootMeasureEstimate};
use crate::seed::{derive_seed, Stream};

const CHUNK: usize = 64;

/// Smallest pool accepted by [`init_population`].
pub const MIN_POOL: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdeConfig {
    pub pool_size: usize,
    pub burn_in: usize,
    pub averaging: usize,
    /// Leading terms of the outer series (children of the root).
    pub outer_terms: usize,
    /// Leading terms of the inner series (grandchildren).
    pub inner_terms: usize,
}

impl Default for RdeConfig {
    fn default() -> Self {
        RdeConfig {
            pool_size: 2000,
            burn_in: 50,
            averaging: 20,
            outer_terms: 32,
            inner_terms: 32,
        }
    }
}

impl RdeConfig {
    fn validate(&self) -> Result<()> {
        if self.pool_size < MIN_POOL {
            return Err(Error::domain("pool_size", format!("must be at least {MIN_POOL}")));
        }
        if self.outer_terms == 0 || self.inner_terms == 0 {
            return Err(Error::domain("series truncation", "must be at least 1"));
        }
        if self.averaging == 0 {
            return Err(Error::domain("averaging", "at least one averaging sweep is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationState {
    pub eta: Complex64,
    pub z: Complex64,
    pub alpha: f64,
    pub seed: u64,
    pub h_minus: Vec<Complex64>,
    pub hbar_minus: Vec<Complex64>,
    pub h_plus: Vec<Complex64>,
    pub hbar_plus: Vec<Complex64>,
    pub sweep_count: usize,
}

fn check_eta(eta: Complex64) -> Result<()> {
    if !(eta.im > 0.0) || !eta.re.is_finite() {
        return Err(Error::domain("eta", format!("{eta} is not in the open upper half plane")));
    }
    Ok(())
}

/// All pools at the leaf value `-1/η`.
pub fn init_population(eta: Complex64, z: Complex64, alpha: f64, pool_size: usize, seed: u64) -> Result<PopulationState> {
    check_eta(eta)?;
    TailIndex::new(alpha)?;
    if pool_size < MIN_POOL {
        return Err(Error::domain("pool_size", format!("must be at least {MIN_POOL}")));
    }
    let leaf = -eta.inv();
    Ok(PopulationState {
        eta,
        z,
        alpha,
        seed,
        h_minus: vec![leaf; pool_size],
        hbar_minus: vec![leaf; pool_size],
        h_plus: vec![leaf; pool_size],
        hbar_plus: vec![leaf; pool_size],
        sweep_count: 0,
    })
}

/// Pools filled with `-1/(η + t)`, `t` uniform on `[-4, 4]`: valid
/// resolvent values away from the leaf value.
pub fn init_population_random(eta: Complex64, z: Complex64, alpha: f64, pool_size: usize, seed: u64) -> Result<PopulationState> {
    let mut s = init_population(eta, z, alpha, pool_size, seed)?;
    let mut rng = Stream::seed_from_u64(derive_seed(seed, ["rde".into(), "random-init".into()]));
    for pool in [&mut s.h_minus, &mut s.hbar_minus, &mut s.h_plus, &mut s.hbar_plus] {
        for v in pool.iter_mut() {
            let t = rng.random_range(-4.0..4.0);
            *v = -(eta + t).inv();
        }
    }
    Ok(s)
}

fn mean(v: &[Complex64]) -> Complex64 {
    v.iter().sum::<Complex64>() / v.len() as f64
}

#[inline]
fn psi(eta: Complex64, x: Complex64) -> Complex64 {
    -(eta + x).inv()
}

struct Frozen<'a> {
    idx: TailIndex,
    eta: Complex64,
    z2: f64,
    s_inv2: f64,
    h_minus: &'a [Complex64],
    hbar_minus: &'a [Complex64],
    mean_h_minus: Complex64,
    mean_h_plus: Complex64,
    cfg: &'a RdeConfig,
}

impl Frozen<'_> {
    #[inline]
    fn pick<'p, R: Rng>(&self, pool: &'p [Complex64], rng: &mut R) -> Complex64 {
        pool[rng.random_range(0..pool.len())]
    }

    fn hbar_plus<R: Rng>(&self, rng: &mut R, buf: &mut Vec<f64>) -> Complex64 {
        buf.resize(self.cfg.outer_terms, 0.0);
        let last = fill_ppp(&self.idx, rng, buf);
        let s = buf.iter().sum::<f64>() + self.idx.tail_mean(last);
        let mut acc = Complex64::new(0.0, 0.0);
        for &x in buf.iter() {
            let w = x / s;
            acc += self.pick(self.h_minus, rng) * (w * w);
        }
        acc += self.mean_h_minus * (self.idx.tail_square_mean(last) / (s * s));
        psi(self.eta, acc)
    }

    fn hbar_minus<R: Rng>(&self, rng: &mut R, outer: &mut Vec<f64>, inner: &mut Vec<f64>) -> Complex64 {
        outer.resize(self.cfg.outer_terms, 0.0);
        inner.resize(self.cfg.inner_terms, 0.0);
        let last = fill_ppp(&self.idx, rng, outer);
        let mut acc = Complex64::new(0.0, 0.0);
        for &xk in outer.iter() {
            let li = fill_ppp(&self.idx, rng, inner);
            let sk = inner.iter().sum::<f64>() + self.idx.tail_mean(li);
            let d = xk + sk;
            let mut child = self.pick(self.hbar_minus, rng) * self.z2;
            for &xj in inner.iter() {
                let w = xj / d;
                child += self.pick(self.h_minus, rng) * (w * w);
            }
            child += self.mean_h_minus * (self.idx.tail_square_mean(li) / (d * d));
            let w = xk / d;
            acc += psi(self.eta, child) * (w * w);
        }
        acc += self.mean_h_plus * (self.idx.tail_square_mean(last) * self.s_inv2);
        psi(self.eta, acc)
    }
}

fn chunked<F>(len: usize, seed: u64, sweep: usize, tag: &str, f: F) -> Vec<Complex64>
where
    F: Fn(&mut Stream, usize) -> Vec<Complex64> + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let parts: Vec<Vec<Complex64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = Stream::seed_from_u64(derive_seed(seed, ["rde".into(), sweep.into(), tag.into(), c.into()]));
            let count = CHUNK.min(len - c * CHUNK);
            f(&mut rng, count)
        })
        .collect();
    parts.concat()
}

fn check_pool(pool: &[Complex64], eta: Complex64, name: &'static str) -> Result<()> {
    let bound = 1.0 / eta.im * (1.0 + 1e-9);
    for (i, v) in pool.iter().enumerate() {
        if !(v.im > 0.0) || v.norm() > bound || !v.is_finite() {
            return Err(Error::NumericalFault {
                context: name,
                detail: format!("sample {i} = {v} left the resolvent range at eta = {eta}"),
                dump: None,
            });
        }
    }
    Ok(())
}

/// One synchronized update of all four pools.
pub fn sweep(state: &PopulationState, cfg: &RdeConfig) -> Result<PopulationState> {
    cfg.validate()?;
    let p = state.h_minus.len();
    let idx = TailIndex::new(state.alpha)?;
    let z2 = state.z.norm_sqr();
    let frozen = Frozen {
        idx,
        eta: state.eta,
        z2,
        s_inv2: stable_inverse_square_mean(state.alpha)?,
        h_minus: &state.h_minus,
        hbar_minus: &state.hbar_minus,
        mean_h_minus: mean(&state.h_minus),
        mean_h_plus: mean(&state.h_plus),
        cfg,
    };
    let k = state.sweep_count;
    let hbar_plus = chunked(p, state.seed, k, "hbar+", |rng, count| {
        let mut buf = Vec::new();
        (0..count).map(|_| frozen.hbar_plus(rng, &mut buf)).collect()
    });
    let hbar_minus = chunked(p, state.seed, k, "hbar-", |rng, count| {
        let (mut o, mut i) = (Vec::new(), Vec::new());
        (0..count).map(|_| frozen.hbar_minus(rng, &mut o, &mut i)).collect()
    });
    let (h_plus, h_minus) = if z2 == 0.0 {
        (hbar_plus.clone(), hbar_minus.clone())
    } else {
        let combine = |own: &[Complex64], other: &[Complex64], tag: &str| {
            chunked(p, state.seed, k, tag, |rng, count| {
                (0..count)
                    .map(|_| {
                        let a = own[rng.random_range(0..p)];
                        let b = other[rng.random_range(0..p)];
                        -(-a.inv() + b * z2).inv()
                    })
                    .collect()
            })
        };
        (combine(&hbar_plus, &hbar_minus, "h+"), combine(&hbar_minus, &hbar_plus, "h-"))
    };
    for (pool, name) in [
        (&hbar_plus, "hbar+ pool"),
        (&hbar_minus, "hbar- pool"),
        (&h_plus, "h+ pool"),
        (&h_minus, "h- pool"),
    ] {
        check_pool(pool, state.eta, name)?;
    }
    Ok(PopulationState {
        eta: state.eta,
        z: state.z,
        alpha: state.alpha,
        seed: state.seed,
        h_minus,
        hbar_minus,
        h_plus,
        hbar_plus,
        sweep_count: k + 1,
    })
}

/// Summary of one sweep kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub mean_h_minus: Complex64,
    pub mean_h_plus: Complex64,
    pub mean_hbar_minus: Complex64,
    pub mean_hbar_plus: Complex64,
    /// Root-mean-square deviation of the `h⁻` pool from its mean.
    pub spread_h_minus: f64,
    /// Sorted projections of the `h⁻` pool on the slicing directions.
    #[serde(skip)]
    pub projections: Vec<Vec<f64>>,
}

const SLICES: usize = 16;

impl SweepRecord {
    pub fn of(state: &PopulationState) -> Self {
        let m = mean(&state.h_minus);
        let spread = (state.h_minus.iter().map(|v| (v - m).norm_sqr()).sum::<f64>() / state.h_minus.len() as f64).sqrt();
        let projections = (0..SLICES)
            .map(|s| {
                let th = std::f64::consts::PI * s as f64 / SLICES as f64;
                let (c, si) = (th.cos(), th.sin());
                let mut p: Vec<f64> = state.h_minus.iter().map(|v| v.re * c + v.im * si).collect();
                p.sort_by(f64::total_cmp);
                p
            })
            .collect();
        SweepRecord {
            sweep: state.sweep_count,
            mean_h_minus: m,
            mean_h_plus: mean(&state.h_plus),
            mean_hbar_minus: mean(&state.hbar_minus),
            mean_hbar_plus: mean(&state.hbar_plus),
            spread_h_minus: spread,
            projections,
        }
    }
}

/// Sliced Wasserstein-1 distance between two equal-size pools, averaged over
/// fixed directions; a lower bound for the planar distance.
pub fn sliced_w1(a: &SweepRecord, b: &SweepRecord) -> f64 {
    let mut total = 0.0;
    for (pa, pb) in a.projections.iter().zip(&b.projections) {
        let m = pa.len().min(pb.len());
        total += pa.iter().zip(pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / m as f64;
    }
    total / a.projections.len().max(1) as f64
}

pub fn sliced_w1_pools(a: &[Complex64], b: &[Complex64]) -> f64 {
    let proj = |v: &[Complex64], th: f64| {
        let mut p: Vec<f64> = v.iter().map(|z| z.re * th.cos() + z.im * th.sin()).collect();
        p.sort_by(f64::total_cmp);
        p
    };
    let mut total = 0.0;
    for s in 0..SLICES {
        let th = std::f64::consts::PI * s as f64 / SLICES as f64;
        let (pa, pb) = (proj(a, th), proj(b, th));
        let m = pa.len().min(pb.len());
        total += pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / m as f64;
    }
    total / SLICES as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub mean_trajectory: Vec<Complex64>,
    pub w1: Vec<f64>,
    pub floor: f64,
    /// The last quarter of the smoothed distance sequence stays below twice
    /// its floor.
    pub stationary: bool,
    /// Final distance below `5/√P`.
    pub within_tolerance: bool,
}

pub fn convergence_diagnostics(history: &[SweepRecord]) -> Result<ConvergenceReport> {
    if history.len() < 2 {
        return Err(Error::domain("history", "at least two recorded sweeps are required"));
    }
    let w1: Vec<f64> = history.windows(2).map(|w| sliced_w1(&w[0], &w[1])).collect();
    // Moving average over a few sweeps so the floor is a noise level, not a noise extreme.
    let win = w1.len().min(8);
    let smooth: Vec<f64> = w1.windows(win).map(|w| w.iter().sum::<f64>() / win as f64).collect();
    let floor = smooth.iter().copied().fold(f64::INFINITY, f64::min);
    let tail = (smooth.len() / 4).max(1);
    let stationary = smooth[smooth.len() - tail..].iter().all(|&d| d <= 2.0 * floor);
    let last = history.last().expect("non-empty");
    let p = last.projections.first().map_or(1, Vec::len) as f64;
    let within_tolerance = *w1.last().expect("non-empty") <= 5.0 / p.sqrt();
    Ok(ConvergenceReport {
        mean_trajectory: history.iter().map(|r| r.mean_h_minus).collect(),
        w1,
        floor,
        stationary,
        within_tolerance,
    })
}

/// Outcome of solving at one spectral parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSolution {
    pub eta: Complex64,
    /// Averaged `½ mean(h⁺) + ½ mean(h⁻)`.
    pub transform: Complex64,
    pub transform_se: Complex64,
    pub mean_h_minus: McValue,
    pub drift: f64,
    pub drift_tolerance: f64,
    pub final_state: PopulationState,
}

impl PointSolution {
    pub fn converged(&self) -> bool {
        self.drift <= self.drift_tolerance
    }
}

fn batch_se(v: &[f64]) -> f64 {
    McValue::from_samples(v).se
}

/// Burn in, then average pool means over the averaging sweeps.
pub fn solve_point(mut state: PopulationState, cfg: &RdeConfig) -> Result<PointSolution> {
    for _ in 0..cfg.burn_in {
        state = sweep(&state, cfg)?;
    }
    let mut mix_re = Vec::with_capacity(cfg.averaging);
    let mut mix_im = Vec::with_capacity(cfg.averaging);
    let mut hm_im = Vec::with_capacity(cfg.averaging);
    let mut spread = 0.0;
    for _ in 0..cfg.averaging {
        state = sweep(&state, cfg)?;
        let m = 0.5 * (mean(&state.h_plus) + mean(&state.h_minus));
        mix_re.push(m.re);
        mix_im.push(m.im);
        let r = SweepRecord::of(&state);
        hm_im.push(r.mean_h_minus.im);
        spread += r.spread_h_minus / cfg.averaging as f64;
    }
    let half = cfg.averaging / 2;
    let drift = if half == 0 {
        0.0
    } else {
        let a = hm_im[..half].iter().sum::<f64>() / half as f64;
        let b = hm_im[half..].iter().sum::<f64>() / (cfg.averaging - half) as f64;
        (a - b).abs()
    };
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(PointSolution {
        eta: state.eta,
        transform: Complex64::new(avg(&mix_re), avg(&mix_im)),
        transform_se: Complex64::new(batch_se(&mix_re), batch_se(&mix_im)),
        mean_h_minus: McValue::from_samples(&hm_im),
        drift,
        drift_tolerance: 5.0 * spread / (cfg.pool_size as f64).sqrt(),
        final_state: state,
    })
}

/// Seed of grid point `g` in [`stieltjes_density`].
pub fn grid_seed(seed: u64, g: usize) -> u64 {
    derive_seed(seed, ["rde".into(), "grid".into(), g.into()])
}

/// Density of the limiting symmetrized singular value law from the RDE.
pub fn stieltjes_density(
    alpha: f64,
    z: Complex64,
    grid: &[f64],
    eta_eps: f64,
    cfg: &RdeConfig,
    seed: u64,
) -> Result<(RootMeasureEstimate, Vec<PointSolution>)> {
    cfg.validate()?;
    if !(eta_eps > 0.0) {
        return Err(Error::domain("eta_eps", "smoothing must be positive"));
    }
    if grid.len() < 2 {
        return Err(Error::domain("grid", "need at least two points"));
    }
    let pi = std::f64::consts::PI;
    let sols: Vec<PointSolution> = grid
        .par_iter()
        .enumerate()
        .map(|(g, &x)| {
            let s = init_population(
                Complex64::new(x, eta_eps),
                z,
                alpha,
                cfg.pool_size,
                grid_seed(seed, g),
            )?;
            let mut sol = solve_point(s, cfg)?;
            sol.final_state.h_minus.shrink_to_fit();
            Ok(sol)
        })
        .collect::<Result<_>>()?;
    let density = sols.iter().map(|s| s.transform.im / pi).collect();
    let standard_error = sols.iter().map(|s| s.transform_se.im / pi).collect();
    let est = RootMeasureEstimate {
        method: EstimateMethod::Rde,
        grid: grid.to_vec(),
        density,
        standard_error,
        eta_eps,
        trials: cfg.averaging,
        moments: vec![],
        meta: EstimateMeta {
            alpha,
            z: [z.re, z.im],
            seed,
            b: None,
            h: None,
            pool_size: Some(cfg.pool_size),
            sweeps: Some(cfg.burn_in + cfg.averaging),
            series_terms: cfg.outer_terms,
        },
    };
    Ok((est, sols))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualInitReport {
    pub leaf: McValue,
    pub random: McValue,
    pub combined_se: f64,
    pub agree: bool,
}

/// Run from the leaf and from a random initialization and compare the
/// averaged `Im mean(h⁻)`.
pub fn dual_initialization(alpha: f64, z: Complex64, eta: Complex64, cfg: &RdeConfig, seed: u64) -> Result<DualInitReport> {
    let a = solve_point(init_population(eta, z, alpha, cfg.pool_size, derive_seed(seed, ["leaf".into()]))?, cfg)?;
    let b = solve_point(init_population_random(eta, z, alpha, cfg.pool_size, derive_seed(seed, ["random".into()]))?, cfg)?;
    let combined_se = (a.mean_h_minus.se.powi(2) + b.mean_h_minus.se.powi(2)).sqrt();
    Ok(DualInitReport {
        leaf: a.mean_h_minus,
        random: b.mean_h_minus,
        combined_se,
        agree: (a.mean_h_minus.mean - b.mean_h_minus.mean).abs() <= 3.0 * combined_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_init() {
        let s = init_population(Complex64::new(0.0, 2.0), Complex64::new(0.0, 0.0), 0.5, 100, 1).unwrap();
        assert!(s.h_minus.iter().all(|v| (*v - Complex64::new(0.0, 0.5)).norm() < 1e-15));
        assert!(init_population(Complex64::new(0.0, 2.0), Complex64::new(0.0, 0.0), 0.5, 99, 1).is_err());
        assert!(init_population(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 0.5, 100, 1).is_err());
    }

    #[test]
    fn identical_histories_have_zero_distance() {
        let s = init_population_random(Complex64::new(0.3, 1.0), Complex64::new(0.0, 0.0), 0.5, 128, 4).unwrap();
        let r = SweepRecord::of(&s);
        let d = convergence_diagnostics(&[r.clone(), r.clone(), r]).unwrap();
        assert!(d.w1.iter().all(|&x| x == 0.0));
    }
}
