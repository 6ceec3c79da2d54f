//! Truncated Poisson weighted infinite trees and their root resolvents.
//!
//! Vertices come in two types. A *row* vertex spreads unit mass over its
//! children in proportion to its own point process, `ζ̂_j = ξ_j/(ξ_in + S)`,
//! where `ξ_in` is the point on its parent edge and `S` the sum of its own
//! points. A *column* vertex emits `ω̂_j = ξ_j/(ξ_j + S_j)`, with `S_j` the sum
//! of the child's own points. `T̂₊` has a row root and `T̂₋` a column root; the
//! ranked variants reorder column children by decreasing `ω̂`.
//!
//! With a shift `z`, every vertex except the root of an attached copy gets
//! one more child through an edge of weight `-z` (row) or `-z̄` (column). That
//! child roots a copy of the tree of opposite type without its own shift
//! edge. Shift children have child index 0 and are stored as ordinary nodes.
//!
//! Every vertex draws its randomness from a stream keyed by its address, so
//! increasing the breadth or the depth only adds vertices.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::heavy_tail::{fill_ppp, q_constant, TailIndex, DEFAULT_TRUNCATION};
use crate::linalg::{ComplexMatrix, SpectralBackend};
use crate::measure::{EstimateMeta, EstimateMethod, McValue, RootMeasureEstimate};
use crate::seed::{child_key, derive_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum TreeVariant {
    T0,
    HatPlus,
    HatMinus,
    RankedPlus,
    RankedMinus,
}

impl TreeVariant {
    fn root_role(self) -> Role {
        match self {
            TreeVariant::T0 | TreeVariant::HatPlus | TreeVariant::RankedPlus => Role::Row,
            TreeVariant::HatMinus | TreeVariant::RankedMinus => Role::Column,
        }
    }

    fn ranked(self) -> bool {
        matches!(self, TreeVariant::RankedPlus | TreeVariant::RankedMinus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Row,
    Column,
}

impl Role {
    fn flip(self) -> Role {
        match self {
            Role::Row => Role::Column,
            Role::Column => Role::Row,
        }
    }
}

/// Truncation parameters of a tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeBudget {
    /// Children kept per vertex.
    pub breadth: usize,
    /// Depth of the deepest vertices; they are leaves.
    pub depth: usize,
    /// A vertex whose path weight `Π|u|²` from the root falls below this is
    /// kept as a leaf.
    pub prune_tol: f64,
    /// Points drawn per row vertex to form its sum `S`.
    pub series_terms: usize,
    /// Candidates ranked per column vertex in ranked variants; 0 means `4b`.
    pub ranking_pool: usize,
    /// Hard cap on the number of vertices.
    pub max_nodes: usize,
}

impl Default for TreeBudget {
    fn default() -> Self {
        TreeBudget {
            breadth: 100,
            depth: 6,
            prune_tol: 1e-4,
            series_terms: DEFAULT_TRUNCATION,
            ranking_pool: 0,
            max_nodes: 2_000_000,
        }
    }
}

impl TreeBudget {
    pub fn new(breadth: usize, depth: usize) -> Self {
        TreeBudget {
            breadth,
            depth,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.breadth == 0 {
            return Err(Error::domain("b", "breadth must be at least 1"));
        }
        if self.depth == 0 {
            return Err(Error::domain("h", "depth must be at least 1"));
        }
        if self.series_terms == 0 {
            return Err(Error::domain("N", "series truncation must be at least 1"));
        }
        if !(self.prune_tol >= 0.0) {
            return Err(Error::domain("prune_tol", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub parent: Option<u32>,
    /// Rank among siblings starting at 1; 0 marks a shift edge.
    pub child_index: u32,
    pub depth: u32,
    pub role: Role,
    /// Operator entry `T(parent, self)`.
    pub weight: Complex64,
    /// Point of the parent's process carried by the parent edge (0 at roots
    /// of copies and for shift edges).
    pub xi_in: f64,
    /// Sum `S` of the vertex's own process (row vertices of ζ̂/ω̂ trees).
    pub row_sum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncatedTreeOperator {
    pub variant: TreeVariant,
    pub alpha: f64,
    pub budget: TreeBudget,
    pub z: Option<Complex64>,
    pub key: u64,
    /// Vertices in depth-first preorder; index 0 is the root.
    pub nodes: Vec<TreeNode>,
}

struct Builder {
    idx: TailIndex,
    variant: TreeVariant,
    budget: TreeBudget,
    z: Option<Complex64>,
    nodes: Vec<TreeNode>,
    scratch: Vec<f64>,
}

/// Leading points of a vertex's own process and their compensated sum.
struct Own {
    xi: Vec<f64>,
    sum: f64,
}

impl Builder {
    fn ppp_top(&mut self, key: u64, keep: usize, with_sum: bool) -> Own {
        let mut rng = Stream::seed_from_u64(key);
        if with_sum {
            let n = self.budget.series_terms.max(keep);
            self.scratch.resize(n, 0.0);
            let last = fill_ppp(&self.idx, &mut rng, &mut self.scratch);
            let sum = self.scratch.iter().sum::<f64>() + self.idx.tail_mean(last);
            Own {
                xi: self.scratch[..keep].to_vec(),
                sum,
            }
        } else {
            let mut xi = vec![0.0; keep];
            fill_ppp(&self.idx, &mut rng, &mut xi);
            Own { xi, sum: f64::NAN }
        }
    }

    fn push(&mut self, node: TreeNode) -> Result<usize> {
        if self.nodes.len() >= self.budget.max_nodes {
            return Err(Error::Capacity(format!(
                "tree exceeds {} vertices; raise prune_tol or lower b/h",
                self.budget.max_nodes
            )));
        }
        self.nodes.push(node);
        Ok(self.nodes.len() - 1)
    }

    fn t0(&self) -> bool {
        self.variant == TreeVariant::T0
    }

    fn expands(&self, depth: usize, path: f64) -> bool {
        depth < self.budget.depth && path >= self.budget.prune_tol
    }

    /// Own points needed to grow the children of a vertex.
    fn own_for(&mut self, role: Role, key: u64) -> Own {
        let b = self.budget.breadth;
        if self.t0() {
            return self.ppp_top(key, b, false);
        }
        match role {
            Role::Row => self.ppp_top(key, b, true),
            Role::Column => {
                let keep = if self.variant.ranked() {
                    match self.budget.ranking_pool {
                        0 => 4 * b,
                        c => c.max(b),
                    }
                } else {
                    b
                };
                self.ppp_top(key, keep, false)
            }
        }
    }

    fn grow(&mut self, id: usize, key: u64, own: Own, path: f64, copy_root: bool) -> Result<()> {
        let depth = self.nodes[id].depth as usize;
        if depth >= self.budget.depth {
            return Ok(());
        }
        let role = self.nodes[id].role;
        let cd = depth + 1;
        let child_role = role.flip();
        if self.t0() || role == Role::Row {
            let denom = if self.t0() { 1.0 } else { self.nodes[id].xi_in + own.sum };
            for (j, &x) in own.xi.iter().enumerate() {
                let w = x / denom;
                let ck = child_key(key, j as u64 + 1);
                let cid = self.push(TreeNode {
                    parent: Some(id as u32),
                    child_index: j as u32 + 1,
                    depth: cd as u32,
                    role: child_role,
                    weight: Complex64::new(w, 0.0),
                    xi_in: x,
                    row_sum: f64::NAN,
                })?;
                let cp = path * w * w;
                if self.expands(cd, cp) {
                    let cown = self.own_for(child_role, ck);
                    self.grow(cid, ck, cown, cp, false)?;
                }
            }
        } else {
            let mut kids: Vec<(usize, f64, Own)> = own
                .xi
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    let ck = child_key(key, j as u64 + 1);
                    let cown = self.ppp_top(ck, self.budget.breadth, true);
                    (j, x, cown)
                })
                .collect();
            if self.variant.ranked() {
                kids.sort_by(|a, b| {
                    let wa = a.1 / (a.1 + a.2.sum);
                    let wb = b.1 / (b.1 + b.2.sum);
                    wb.total_cmp(&wa).then(a.0.cmp(&b.0))
                });
                kids.truncate(self.budget.breadth);
            }
            for (rank, (j, x, cown)) in kids.into_iter().enumerate() {
                let w = x / (x + cown.sum);
                let ck = child_key(key, j as u64 + 1);
                let cid = self.push(TreeNode {
                    parent: Some(id as u32),
                    child_index: rank as u32 + 1,
                    depth: cd as u32,
                    role: child_role,
                    weight: Complex64::new(w, 0.0),
                    xi_in: x,
                    row_sum: cown.sum,
                })?;
                let cp = path * w * w;
                if self.expands(cd, cp) {
                    self.grow(cid, ck, cown, cp, false)?;
                }
            }
        }
        if let (Some(z), false) = (self.z, copy_root) {
            let w = match role {
                Role::Row => -z,
                Role::Column => -z.conj(),
            };
            let ck = child_key(key, 0);
            let cown = self.own_for(child_role, ck);
            let cid = self.push(TreeNode {
                parent: Some(id as u32),
                child_index: 0,
                depth: cd as u32,
                role: child_role,
                weight: w,
                xi_in: 0.0,
                row_sum: cown.sum,
            })?;
            let cp = path * w.norm_sqr();
            if self.expands(cd, cp) {
                self.grow(cid, ck, cown, cp, true)?;
            }
        }
        Ok(())
    }
}

/// Build a truncated tree whose randomness is keyed by `key`.
pub fn build_tree_keyed(
    alpha: f64,
    variant: TreeVariant,
    budget: TreeBudget,
    z: Option<Complex64>,
    key: u64,
) -> Result<TruncatedTreeOperator> {
    budget.validate()?;
    let idx = TailIndex::new(alpha)?;
    let z = z.filter(|z| z.norm_sqr() > 0.0);
    let mut b = Builder {
        idx,
        variant,
        budget,
        z,
        nodes: Vec::new(),
        scratch: Vec::new(),
    };
    let role = variant.root_role();
    let own = b.own_for(role, key);
    b.push(TreeNode {
        parent: None,
        child_index: 0,
        depth: 0,
        role,
        weight: Complex64::new(0.0, 0.0),
        xi_in: 0.0,
        row_sum: own.sum,
    })?;
    b.grow(0, key, own, 1.0, false)?;
    Ok(TruncatedTreeOperator {
        variant,
        alpha,
        budget,
        z,
        key,
        nodes: b.nodes,
    })
}

pub fn build_tree<R: Rng + ?Sized>(
    alpha: f64,
    variant: TreeVariant,
    budget: TreeBudget,
    z: Option<Complex64>,
    rng: &mut R,
) -> Result<TruncatedTreeOperator> {
    build_tree_keyed(alpha, variant, budget, z, rng.random())
}

impl TruncatedTreeOperator {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Address of a vertex as the sequence of child indices from the root.
    pub fn address(&self, mut id: usize) -> Vec<u32> {
        let mut out = Vec::new();
        while let Some(p) = self.nodes[id].parent {
            out.push(self.nodes[id].child_index);
            id = p as usize;
        }
        out.reverse();
        out
    }

    pub fn children(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .skip(id + 1)
            .filter(move |(_, n)| n.parent == Some(id as u32))
            .map(|(k, _)| k)
    }

    /// Largest deviation from `ζ̂_j = (1 - ω̂_in) ξ_j / S` over the children of
    /// row vertices reached through a column edge.
    pub fn consistency_residual(&self) -> f64 {
        if self.variant == TreeVariant::T0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for c in &self.nodes {
            let Some(p) = c.parent else { continue };
            let k = &self.nodes[p as usize];
            if c.child_index == 0 || k.role != Role::Row || k.parent.is_none() || k.child_index == 0 {
                continue;
            }
            let omega = k.weight.re;
            let want = (1.0 - omega) * c.xi_in / k.row_sum;
            worst = worst.max((c.weight.re - want).abs());
        }
        worst
    }

    /// Dense Hermitian matrix of the operator, vertices in storage order.
    pub fn dense_operator(&self) -> ComplexMatrix {
        let n = self.nodes.len();
        let mut a = ComplexMatrix::zeros(n, n);
        for (c, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                a.set(p as usize, c, node.weight);
                a.set(c, p as usize, node.weight.conj());
            }
        }
        a
    }

    /// `⟨δ_root, T^{2j} δ_root⟩` for `j = 1..=k`.
    pub fn root_moments(&self, k: usize) -> Vec<f64> {
        let n = self.nodes.len();
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[0] = Complex64::new(1.0, 0.0);
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            v = self.apply(&v);
            out.push(v.iter().map(|x| x.norm_sqr()).sum());
            v = self.apply(&v);
        }
        out
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        for (c, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                let p = p as usize;
                out[p] += node.weight * v[c];
                out[c] += node.weight.conj() * v[p];
            }
        }
        out
    }
}

fn check_eta(eta: Complex64) -> Result<()> {
    if !(eta.im > 0.0) || !eta.re.is_finite() {
        return Err(Error::domain("eta", format!("{eta} is not in the open upper half plane")));
    }
    Ok(())
}

/// Reusable buffers for bottom-up resolvent sweeps.
#[derive(Debug, Default)]
pub struct ResolventWorkspace {
    acc: Vec<Complex64>,
    w2: Vec<f64>,
}

impl ResolventWorkspace {
    fn prepare(&mut self, tree: &TruncatedTreeOperator) {
        self.w2.clear();
        self.w2.extend(tree.nodes.iter().map(|n| n.weight.norm_sqr()));
        self.acc.resize(tree.nodes.len(), Complex64::new(0.0, 0.0));
    }

    fn sweep(&mut self, tree: &TruncatedTreeOperator, eta: Complex64) -> Complex64 {
        self.acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        for c in (1..tree.nodes.len()).rev() {
            let r = -(eta + self.acc[c]).inv();
            let p = tree.nodes[c].parent.expect("non-root") as usize;
            self.acc[p] += r * self.w2[c];
        }
        -(eta + self.acc[0]).inv()
    }
}

/// `⟨δ_root, (T - η)^{-1} δ_root⟩` by the bottom-up recursion, leaves `-1/η`.
pub fn root_resolvent(tree: &TruncatedTreeOperator, eta: Complex64) -> Result<Complex64> {
    check_eta(eta)?;
    let mut ws = ResolventWorkspace::default();
    ws.prepare(tree);
    Ok(ws.sweep(tree, eta))
}

pub fn root_resolvents(tree: &TruncatedTreeOperator, etas: &[Complex64]) -> Result<Vec<Complex64>> {
    etas.iter().try_for_each(|&e| check_eta(e))?;
    let mut ws = ResolventWorkspace::default();
    ws.prepare(tree);
    Ok(etas.iter().map(|&e| ws.sweep(tree, e)).collect())
}

/// Root resolvent by a dense linear solve; an oracle for the recursion.
pub fn dense_root_resolvent(
    tree: &TruncatedTreeOperator,
    eta: Complex64,
    backend: &dyn SpectralBackend,
) -> Result<Complex64> {
    check_eta(eta)?;
    let mut a = tree.dense_operator();
    for i in 0..a.rows() {
        a.set(i, i, a.get(i, i) - eta);
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); a.rows()];
    rhs[0] = Complex64::new(1.0, 0.0);
    Ok(backend.solve(&a, &rhs)?[0])
}

/// Seed of trial `t` in [`expected_limit_measure`].
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    derive_seed(seed, ["pwit".into(), "trial".into(), t.into()])
}

struct TrialOutput {
    density: Vec<f64>,
    m2: f64,
    m4: f64,
}

/// Density of the limiting symmetrized singular value law from trees.
///
/// Each trial builds one `T̂₊(z)` and one `T̂₋(z)` and contributes
/// `½(Im R₊ + Im R₋)/π` at every `x + iε`.
pub fn expected_limit_measure(
    alpha: f64,
    z: Complex64,
    trials: usize,
    budget: TreeBudget,
    grid: &[f64],
    eta_eps: f64,
    seed: u64,
) -> Result<RootMeasureEstimate> {
    if trials == 0 {
        return Err(Error::domain("trials", "at least one trial is required"));
    }
    if !(eta_eps > 0.0) {
        return Err(Error::domain("eta_eps", "smoothing must be positive"));
    }
    if grid.len() < 2 {
        return Err(Error::domain("grid", "need at least two points"));
    }
    budget.validate()?;
    TailIndex::new(alpha)?;
    let etas: Vec<Complex64> = grid.iter().map(|&x| Complex64::new(x, eta_eps)).collect();
    let pi = std::f64::consts::PI;
    let outs: Vec<TrialOutput> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<TrialOutput> {
            let tseed = trial_seed(seed, t);
            let plus = build_tree_keyed(alpha, TreeVariant::HatPlus, budget, Some(z), derive_seed(tseed, ["plus".into()]))?;
            let minus = build_tree_keyed(alpha, TreeVariant::HatMinus, budget, Some(z), derive_seed(tseed, ["minus".into()]))?;
            let rp = root_resolvents(&plus, &etas)?;
            let rm = root_resolvents(&minus, &etas)?;
            let density = rp.iter().zip(&rm).map(|(a, b)| 0.5 * (a.im + b.im) / pi).collect();
            let mp = plus.root_moments(2);
            let mm = minus.root_moments(2);
            Ok(TrialOutput {
                density,
                m2: 0.5 * (mp[0] + mm[0]),
                m4: 0.5 * (mp[1] + mm[1]),
            })
        })
        .collect::<Result<_>>()?;
    let g = grid.len();
    let mut density = vec![0.0; g];
    let mut sq = vec![0.0; g];
    for o in &outs {
        for k in 0..g {
            density[k] += o.density[k];
            sq[k] += o.density[k] * o.density[k];
        }
    }
    let m = trials as f64;
    let mut se = vec![f64::NAN; g];
    for k in 0..g {
        density[k] /= m;
        if trials > 1 {
            let var = (sq[k] / m - density[k] * density[k]).max(0.0) * m / (m - 1.0);
            se[k] = (var / m).sqrt();
        }
    }
    let m2: Vec<f64> = outs.iter().map(|o| o.m2).collect();
    let m4: Vec<f64> = outs.iter().map(|o| o.m4).collect();
    Ok(RootMeasureEstimate {
        method: EstimateMethod::Pwit,
        grid: grid.to_vec(),
        density,
        standard_error: se,
        eta_eps,
        trials,
        moments: vec![(2, McValue::from_samples(&m2)), (4, McValue::from_samples(&m4))],
        meta: EstimateMeta {
            alpha,
            z: [z.re, z.im],
            seed,
            b: Some(budget.breadth),
            h: Some(budget.depth),
            pool_size: None,
            sweeps: None,
            series_terms: budget.series_terms,
        },
    })
}

/// Catalan number `binom(2k, k)/(k + 1)`.
pub fn catalan(k: u32) -> u64 {
    let mut c: u64 = 1;
    for i in 0..k as u64 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentBound {
    pub k: u32,
    /// Estimate of `C(z, k) = E[(|z|² + max(1, Ψ))^k]`, `Ψ = Σ ω_j²`.
    pub c_estimate: McValue,
    pub catalan: u64,
    /// `4^k C(z, k)`.
    pub coarse_bound: f64,
    /// `catalan(k) C(z, k)`.
    pub path_bound: f64,
}

pub fn moment_bound_c(
    alpha: f64,
    z: Complex64,
    k: u32,
    trials: usize,
    series_terms: usize,
    seed: u64,
) -> Result<MomentBound> {
    if k == 0 {
        return Err(Error::domain("k", "moment order must be at least 1"));
    }
    if trials == 0 || series_terms == 0 {
        return Err(Error::domain("trials", "trials and series_terms must be positive"));
    }
    let idx = TailIndex::new(alpha)?;
    let q = q_constant(alpha)?;
    let z2 = z.norm_sqr();
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = Stream::seed_from_u64(derive_seed(seed, ["moment-bound".into(), t.into()]));
            let mut xi = vec![0.0; series_terms];
            fill_ppp(&idx, &mut rng, &mut xi);
            let psi: f64 = xi.iter().map(|x| (x / (x + q)).powi(2)).sum();
            (z2 + psi.max(1.0)).powi(k as i32)
        })
        .collect();
    let c = McValue::from_samples(&samples);
    let cat = catalan(k);
    Ok(MomentBound {
        k,
        c_estimate: c,
        catalan: cat,
        coarse_bound: 4f64.powi(k as i32) * c.mean,
        path_bound: cat as f64 * c.mean,
    })
}
