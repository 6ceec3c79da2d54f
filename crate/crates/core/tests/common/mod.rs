#![allow(dead_code)]

use hml_core::seed::Stream;
use rand::SeedableRng;

pub fn rng(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `∫_0^∞ g(t) dt` through `t = e^s`, `s ∈ [lo, hi]`.
pub fn half_line(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    simpson(|s| {
        let t = s.exp();
        g(t) * t
    }, lo, hi, 200_000)
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Upper regularized incomplete gamma `Q(k, y)` for integer `k`.
pub fn gamma_q_int(k: u32, y: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..k {
        term *= y / i as f64;
        sum += term;
    }
    (-y).exp() * sum
}

/// `Γ(1+α)Γ(1-α)` by the reflection formula.
pub fn reflection_product(alpha: f64) -> f64 {
    let pa = std::f64::consts::PI * alpha;
    pa / pa.sin()
}
