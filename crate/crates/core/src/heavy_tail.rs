//! Heavy-tailed weights and the point processes built from them.
//!
//! A [`TailLaw`] describes the entry law of the weight matrix. The limiting
//! objects are the Poisson point process with intensity `αt^{-α-1}` on
//! `(0, ∞)`, its (one-sided α-stable) sum `S`, the normalized vector
//! `ζ = ξ/S` and the sequence `ω_i = ξ_i/(ξ_i + q)`.
//!
//! Infinite series are truncated after `N` points. The unseen tail of
//! `Σ ξ_i` is replaced by its conditional mean given the last arrival, which
//! is `α/(1-α) · x_N^{1-1/α}`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Default number of retained points for every truncated series.
pub const DEFAULT_TRUNCATION: usize = 2000;

/// A validated tail index `α ∈ (0, 1)` with its cached exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIndex {
    alpha: f64,
    inv: f64,
    int_inv: Option<i32>,
}

impl TailIndex {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain("alpha", format!("{alpha} is not in (0, 1)")));
        }
        let inv = 1.0 / alpha;
        let r = inv.round();
        let int_inv = ((inv - r).abs() < 1e-12 && r <= 32.0).then_some(r as i32);
        Ok(TailIndex { alpha, inv, int_inv })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `x^{-1/α}`.
    #[inline]
    pub fn inv_pow(&self, x: f64) -> f64 {
        match self.int_inv {
            Some(k) => 1.0 / x.powi(k),
            None => x.powf(-self.inv),
        }
    }

    /// Conditional mean of `Σ_{i>N} ξ_i` given the `N`-th arrival `x`.
    #[inline]
    pub fn tail_mean(&self, x: f64) -> f64 {
        let a = self.alpha;
        a / (1.0 - a) * x * self.inv_pow(x)
    }

    /// Conditional mean of `Σ_{i>N} ξ_i²` given the `N`-th arrival `x`.
    #[inline]
    pub fn tail_square_mean(&self, x: f64) -> f64 {
        let p = self.inv_pow(x);
        x * p * p / (2.0 * self.inv - 1.0)
    }
}

/// `γ(α) = 1/(Γ(1+α)Γ(1-α))`.
pub fn gamma_constant(alpha: f64) -> Result<f64> {
    TailIndex::new(alpha)?;
    Ok(1.0 / (gamma(1.0 + alpha) * gamma(1.0 - alpha)))
}

/// `q(α) = (Γ(1+α)Γ(1-α))^{1/α} = γ^{-1/α}`.
pub fn q_constant(alpha: f64) -> Result<f64> {
    TailIndex::new(alpha)?;
    Ok((gamma(1.0 + alpha) * gamma(1.0 - alpha)).powf(1.0 / alpha))
}

/// Laplace transform `E exp(-θS) = exp(-Γ(1-α)θ^α)` of the stable sum.
pub fn stable_laplace(alpha: f64, theta: f64) -> Result<f64> {
    TailIndex::new(alpha)?;
    if theta < 0.0 {
        return Err(Error::domain("theta", "must be non-negative"));
    }
    Ok((-gamma(1.0 - alpha) * theta.powf(alpha)).exp())
}

/// `E[S^{-2}] = Γ(2/α) / (α Γ(1-α)^{2/α})`.
pub fn stable_inverse_square_mean(alpha: f64) -> Result<f64> {
    TailIndex::new(alpha)?;
    let c = gamma(1.0 - alpha);
    Ok(gamma(2.0 / alpha) / (alpha * c.powf(2.0 / alpha)))
}

/// Quantile-style map from a uniform on `(0, 1]` to a weight.
pub type QuantileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How weights are produced from uniforms.
#[derive(Clone)]
pub enum Recipe {
    /// `x = U^{-1/α}`, so `t^α P(x ≥ t) = 1` for `t ≥ 1`.
    InversePower,
    /// User-supplied map; the caller vouches for the declared tail constant.
    Custom { name: String, quantile: QuantileFn },
}

impl fmt::Debug for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recipe::InversePower => f.write_str("InversePower"),
            Recipe::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Entry law of the weight matrix.
#[derive(Debug, Clone)]
pub struct TailLaw {
    index: TailIndex,
    c: f64,
    recipe: Recipe,
}

impl TailLaw {
    pub fn inverse_power(alpha: f64) -> Result<Self> {
        Ok(TailLaw {
            index: TailIndex::new(alpha)?,
            c: 1.0,
            recipe: Recipe::InversePower,
        })
    }

    pub fn custom(alpha: f64, c: f64, name: impl Into<String>, quantile: QuantileFn) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain("c", format!("{c} is not a positive tail constant")));
        }
        Ok(TailLaw {
            index: TailIndex::new(alpha)?,
            c,
            recipe: Recipe::Custom {
                name: name.into(),
                quantile,
            },
        })
    }

    pub fn alpha(&self) -> f64 {
        self.index.alpha
    }

    pub fn index(&self) -> TailIndex {
        self.index
    }

    pub fn tail_constant(&self) -> f64 {
        self.c
    }

    pub fn recipe(&self) -> &Recipe {
        &self.recipe
    }

    pub fn recipe_name(&self) -> &str {
        match &self.recipe {
            Recipe::InversePower => "inverse-power",
            Recipe::Custom { name, .. } => name,
        }
    }

    /// Weight obtained from a uniform `u ∈ (0, 1]`.
    #[inline]
    pub fn from_uniform(&self, u: f64) -> f64 {
        match &self.recipe {
            Recipe::InversePower => self.index.inv_pow(u),
            Recipe::Custom { quantile, .. } => quantile(u),
        }
    }

    /// Scaling sequence `a_n = (c n)^{1/α}`.
    pub fn scale(&self, n: usize) -> f64 {
        (self.c * n as f64).powf(1.0 / self.index.alpha)
    }
}

/// Uniform on `(0, 1]`.
#[inline]
pub fn uniform_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// I.i.d. draws from `law`.
pub fn sample_heavy<R: Rng + ?Sized>(law: &TailLaw, count: usize, rng: &mut R) -> Vec<f64> {
    (0..count)
        .map(|_| law.from_uniform(uniform_open_closed(rng)))
        .collect()
}

/// The first `N` points of a PPP(α), ranked.
#[derive(Debug, Clone, PartialEq)]
pub struct PppSample {
    pub index: TailIndex,
    pub arrival_times: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PppSample {
    /// Build from given unit-Poisson arrivals.
    pub fn from_arrivals(alpha: f64, arrival_times: Vec<f64>) -> Result<Self> {
        let index = TailIndex::new(alpha)?;
        if arrival_times.is_empty() {
            return Err(Error::Empty("arrival times"));
        }
        if arrival_times[0] <= 0.0 || arrival_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("arrival_times", "must be positive and strictly increasing"));
        }
        let xi = arrival_times.iter().map(|&x| index.inv_pow(x)).collect();
        Ok(PppSample {
            index,
            arrival_times,
            xi,
        })
    }

    pub fn truncation(&self) -> usize {
        self.xi.len()
    }

    pub fn partial_sum(&self) -> f64 {
        self.xi.iter().sum()
    }

    /// Conditional mean of the discarded part of the sum.
    pub fn tail_mean(&self) -> f64 {
        self.index.tail_mean(*self.arrival_times.last().expect("non-empty"))
    }

    /// Truncated sum plus the analytic tail compensation.
    pub fn compensated_sum(&self) -> f64 {
        self.partial_sum() + self.tail_mean()
    }
}

pub fn sample_ppp<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Result<PppSample> {
    if n == 0 {
        return Err(Error::domain("N", "truncation must be at least 1"));
    }
    let index = TailIndex::new(alpha)?;
    let mut arrival_times = Vec::with_capacity(n);
    let mut t = 0.0;
    for _ in 0..n {
        let e: f64 = Exp1.sample(rng);
        t += e;
        arrival_times.push(t);
    }
    let xi = arrival_times.iter().map(|&x| index.inv_pow(x)).collect();
    Ok(PppSample {
        index,
        arrival_times,
        xi,
    })
}

/// Fill `out` with the leading points of a PPP and return the last arrival.
///
/// Allocation-free variant of [`sample_ppp`] used in hot loops; it consumes
/// the stream identically.
#[inline]
pub fn fill_ppp<R: Rng + ?Sized>(index: &TailIndex, rng: &mut R, out: &mut [f64]) -> f64 {
    let mut t = 0.0;
    for slot in out.iter_mut() {
        let e: f64 = Exp1.sample(rng);
        t += e;
        *slot = index.inv_pow(t);
    }
    t
}

/// A draw of the one-sided stable sum `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSum {
    pub s: f64,
    pub alpha: f64,
}

/// Exact one-sided stable draw with `E exp(-θS) = exp(-θ^α)`.
///
/// Kanter's representation: for `U` uniform on `(0, π)` and `E ~ Exp(1)`,
/// `sin(αU)/sin(U)^{1/α} · (sin((1-α)U)/E)^{(1-α)/α}`.
#[inline]
pub fn standard_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = loop {
        let v = rng.random::<f64>();
        if v > 0.0 {
            break std::f64::consts::PI * v;
        }
    };
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

/// Sampler of `S` with `E exp(-θS) = exp(-Γ(1-α)θ^α)`.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    alpha: f64,
    factor: f64,
}

impl StableSampler {
    pub fn new(alpha: f64) -> Result<Self> {
        TailIndex::new(alpha)?;
        Ok(StableSampler {
            alpha,
            factor: gamma(1.0 - alpha).powf(1.0 / alpha),
        })
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.factor * standard_stable(self.alpha, rng)
    }
}

pub fn sample_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<StableSum> {
    let s = StableSampler::new(alpha)?.draw(rng);
    Ok(StableSum { s, alpha })
}

/// Leading part of a Poisson-Dirichlet vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PdVector {
    pub zeta: Vec<f64>,
    pub remainder_mass: f64,
}

pub fn sample_pd<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Result<PdVector> {
    let ppp = sample_ppp(alpha, n, rng)?;
    let tail = ppp.tail_mean();
    let s = ppp.partial_sum() + tail;
    Ok(PdVector {
        zeta: ppp.xi.iter().map(|x| x / s).collect(),
        remainder_mass: tail / s,
    })
}

/// Ranked `ω_i = ξ_i/(ξ_i + q)`.
pub fn sample_omega<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let q = q_constant(alpha)?;
    let ppp = sample_ppp(alpha, n, rng)?;
    Ok(ppp.xi.iter().map(|x| x / (x + q)).collect())
}
