//! Unfolding a weight matrix into a finite tree-indexed network.
//!
//! Starting from row `i0`, generation 1 takes the `b` largest entries of that
//! row (its diagonal entry excluded). Generation `m` takes, for every vertex
//! of generation `m - 1` in order, the `b` largest entries of the matching
//! column (`m` even) or row (`m` odd), skipping every row, respectively
//! column, revealed so far. The root's own index counts as revealed on both
//! sides. Ties go to the smaller index. The minus map is the plus map of the
//! transpose.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{WeightAccess, WeightField};
use crate::error::{Error, Result};
use crate::heavy_tail::TailLaw;
use crate::pwit::{build_tree_keyed, TreeBudget, TreeVariant};
use crate::seed::derive_seed;
use crate::spectra::{kolmogorov_distance, median};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Plus,
    Minus,
}

struct Transposed<'a, W: ?Sized>(&'a W);

impl<W: WeightAccess + ?Sized> WeightAccess for Transposed<'_, W> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        self.0.weight(j, i)
    }
}

/// Vertex maps of an unfolding. Vertices are listed generation by
/// generation; `addresses[k]` is the child-index string of vertex `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnfoldMap {
    pub direction: Direction,
    pub n: usize,
    pub i0: usize,
    pub b: usize,
    pub h: usize,
    pub addresses: Vec<Vec<u32>>,
    pub parents: Vec<Option<usize>>,
    /// Matrix index of each vertex.
    pub phi: Vec<usize>,
    /// Index into the `2n` vertices of the bipartite graph: rows `0..n`,
    /// columns `n..2n`.
    pub psi: Vec<usize>,
}

impl UnfoldMap {
    pub fn vertex(&self, address: &[u32]) -> Option<usize> {
        self.addresses.iter().position(|a| a == address)
    }

    pub fn phi_at(&self, address: &[u32]) -> Option<usize> {
        self.vertex(address).map(|k| self.phi[k])
    }

    /// True when vertex `k` stands for a row.
    pub fn is_row(&self, k: usize) -> bool {
        self.psi[k] < self.n
    }
}

fn top_b(
    len: usize,
    b: usize,
    excluded: impl Fn(usize) -> bool,
    value: impl Fn(usize) -> f64,
) -> Result<Vec<usize>> {
    let mut cand: Vec<(usize, f64)> = (0..len).filter(|&j| !excluded(j)).map(|j| (j, value(j))).collect();
    if cand.len() < b {
        return Err(Error::Capacity(format!(
            "only {} candidates remain for {b} children; n is too small for this (b, h)",
            cand.len()
        )));
    }
    let cmp = |a: &(usize, f64), c: &(usize, f64)| c.1.total_cmp(&a.1).then(a.0.cmp(&c.0));
    if cand.len() > b {
        cand.select_nth_unstable_by(b - 1, cmp);
        cand.truncate(b);
    }
    cand.sort_by(cmp);
    Ok(cand.into_iter().map(|(j, _)| j).collect())
}

fn unfold_plus<W: WeightAccess + ?Sized>(x: &W, i0: usize, b: usize, h: usize) -> Result<(Vec<Vec<u32>>, Vec<Option<usize>>, Vec<usize>)> {
    let n = x.dim();
    let mut addresses = vec![Vec::new()];
    let mut parents = vec![None];
    let mut phi = vec![i0];
    let mut rows_seen = vec![false; n];
    let mut cols_seen = vec![false; n];
    rows_seen[i0] = true;
    cols_seen[i0] = true;
    let mut frontier = vec![0usize];
    for m in 1..=h {
        let mut next = Vec::with_capacity(frontier.len() * b);
        for &v in &frontier {
            let idx = phi[v];
            let picks = if m % 2 == 1 {
                top_b(n, b, |j| cols_seen[j], |j| x.weight(idx, j))?
            } else {
                top_b(n, b, |j| rows_seen[j], |j| x.weight(j, idx))?
            };
            for (r, p) in picks.into_iter().enumerate() {
                if m % 2 == 1 {
                    cols_seen[p] = true;
                } else {
                    rows_seen[p] = true;
                }
                let mut a = addresses[v].clone();
                a.push(r as u32 + 1);
                addresses.push(a);
                parents.push(Some(v));
                phi.push(p);
                next.push(phi.len() - 1);
            }
        }
        frontier = next;
    }
    Ok((addresses, parents, phi))
}

pub fn unfold<W: WeightAccess + ?Sized>(x: &W, i0: usize, b: usize, h: usize, direction: Direction) -> Result<UnfoldMap> {
    let n = x.dim();
    if i0 >= n {
        return Err(Error::domain("i0", format!("{i0} is not an index of a {n}x{n} matrix")));
    }
    if b == 0 {
        return Err(Error::domain("b", "breadth must be at least 1"));
    }
    let (addresses, parents, phi) = match direction {
        Direction::Plus => unfold_plus(x, i0, b, h)?,
        Direction::Minus => unfold_plus(&Transposed(x), i0, b, h)?,
    };
    let psi = addresses
        .iter()
        .zip(&phi)
        .map(|(a, &p)| {
            let even = a.len() % 2 == 0;
            match (direction, even) {
                (Direction::Plus, true) | (Direction::Minus, false) => p,
                _ => p + n,
            }
        })
        .collect();
    Ok(UnfoldMap {
        direction,
        n,
        i0,
        b,
        h,
        addresses,
        parents,
        phi,
        psi,
    })
}

/// Which bipartite matrix supplies the network weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkScaling {
    /// `a_n^{-1} [[0, X], [Xᵀ, 0]]`.
    AnInverse(f64),
    /// `[[0, M], [Mᵀ, 0]]` with `M` the row normalization of `X`.
    RowNormalized,
    /// `[[0, X], [Xᵀ, 0]]` unscaled.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    /// True for parent-child pairs of the tree, false for bended edges.
    pub tree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkWeights {
    pub scaling: NetworkScaling,
    pub addresses: Vec<Vec<u32>>,
    pub edges: Vec<NetworkEdge>,
}

impl NetworkWeights {
    /// Weight between two vertices; symmetric, 0 when absent.
    pub fn weight(&self, a: &[u32], b: &[u32]) -> f64 {
        let (Some(u), Some(v)) = (
            self.addresses.iter().position(|x| x == a),
            self.addresses.iter().position(|x| x == b),
        ) else {
            return 0.0;
        };
        let (u, v) = (u.min(v), u.max(v));
        self.edges
            .iter()
            .find(|e| e.u == u && e.v == v)
            .map_or(0.0, |e| e.weight)
    }

    pub fn bended(&self) -> impl Iterator<Item = &NetworkEdge> {
        self.edges.iter().filter(|e| !e.tree)
    }
}

pub fn network_weights<W: WeightAccess + ?Sized>(x: &W, map: &UnfoldMap, scaling: NetworkScaling) -> Result<NetworkWeights> {
    let n = x.dim();
    if n != map.n {
        return Err(Error::Dimension(format!("map built for n = {}, matrix has n = {n}", map.n)));
    }
    let mut rho: HashMap<usize, f64> = HashMap::new();
    if scaling == NetworkScaling::RowNormalized {
        for &p in &map.psi {
            if p < n {
                rho.entry(p).or_insert_with(|| x.row_sum(p));
            }
        }
    }
    let entry = |r: usize, c: usize| -> f64 {
        match scaling {
            NetworkScaling::Raw => x.weight(r, c),
            NetworkScaling::AnInverse(a) => x.weight(r, c) / a,
            NetworkScaling::RowNormalized => {
                let s = rho[&r];
                if s == 0.0 {
                    f64::from(u8::from(r == c))
                } else {
                    x.weight(r, c) / s
                }
            }
        }
    };
    let k = map.psi.len();
    let mut edges = Vec::new();
    for u in 0..k {
        for v in u + 1..k {
            let (pu, pv) = (map.psi[u], map.psi[v]);
            let w = match (pu < n, pv < n) {
                (true, false) => entry(pu, pv - n),
                (false, true) => entry(pv, pu - n),
                _ => continue,
            };
            let tree = map.parents[v] == Some(u) || map.parents[u] == Some(v);
            edges.push(NetworkEdge { u, v, weight: w, tree });
        }
    }
    Ok(NetworkWeights {
        scaling,
        addresses: map.addresses.clone(),
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalTarget {
    /// Scaled weights `a_n^{-1} X` against the tree `T₀`.
    AToT0,
    /// Row-normalized weights against the ranked tree `T₊`.
    BToHatT,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub statistic: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalConvergenceReport {
    pub alpha: f64,
    pub which: LocalTarget,
    pub b: usize,
    pub h: usize,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl LocalConvergenceReport {
    pub fn value(&self, n: usize, statistic: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.statistic == statistic)
            .map(|r| r.value)
    }
}

/// Compare root and second-generation network edges with their tree
/// counterparts, and track the largest bended edge.
///
/// The network side uses the edges `(∅, 1)` and `(1, 11)`; the tree side
/// uses the same edges of independently sampled trees.
#[allow(clippy::too_many_arguments)]
pub fn local_convergence_report(
    alpha: f64,
    n_list: &[usize],
    b: usize,
    h: usize,
    trials: usize,
    which: LocalTarget,
    series_terms: usize,
    seed: u64,
) -> Result<LocalConvergenceReport> {
    if trials == 0 {
        return Err(Error::domain("trials", "at least one trial is required"));
    }
    if b == 0 || h < 2 {
        return Err(Error::domain("h", "the report needs b >= 1 and h >= 2"));
    }
    let law = TailLaw::inverse_power(alpha)?;
    let variant = match which {
        LocalTarget::AToT0 => TreeVariant::T0,
        LocalTarget::BToHatT => TreeVariant::RankedPlus,
    };
    let budget = TreeBudget {
        breadth: b,
        depth: 2,
        prune_tol: 0.0,
        series_terms,
        ..Default::default()
    };
    let tree_side: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let tree = build_tree_keyed(alpha, variant, budget, None, derive_seed(seed, ["local".into(), "tree".into(), t.into()]))?;
            let first = tree.children(0).next().expect("breadth >= 1");
            let second = tree.children(first).next().expect("depth >= 2");
            Ok((tree.nodes[first].weight.re, tree.nodes[second].weight.re))
        })
        .collect::<Result<_>>()?;
    let (tree_root, tree_second): (Vec<f64>, Vec<f64>) = tree_side.into_iter().unzip();
    let mut rows = Vec::new();
    for &n in n_list {
        let net: Vec<(f64, f64, f64)> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<(f64, f64, f64)> {
                let fseed = derive_seed(seed, ["local".into(), "matrix".into(), n.into(), t.into()]);
                let field = WeightField::new(n, law.clone(), fseed)?;
                let map = unfold(&field, 0, b, h, Direction::Plus)?;
                let scaling = match which {
                    LocalTarget::AToT0 => NetworkScaling::AnInverse(law.scale(n)),
                    LocalTarget::BToHatT => NetworkScaling::RowNormalized,
                };
                let w = network_weights(&field, &map, scaling)?;
                let bended = w.bended().map(|e| e.weight.abs()).fold(0.0, f64::max);
                Ok((w.weight(&[], &[1]), w.weight(&[1], &[1, 1]), bended))
            })
            .collect::<Result<_>>()?;
        let root: Vec<f64> = net.iter().map(|r| r.0).collect();
        let second: Vec<f64> = net.iter().map(|r| r.1).collect();
        let bended: Vec<f64> = net.iter().map(|r| r.2).collect();
        rows.push(ReportRow {
            n,
            statistic: "ks_root_top_edge".into(),
            value: kolmogorov_distance(&root, &tree_root)?,
        });
        rows.push(ReportRow {
            n,
            statistic: "ks_second_generation_edge".into(),
            value: kolmogorov_distance(&second, &tree_second)?,
        });
        rows.push(ReportRow {
            n,
            statistic: "median_max_bended_edge".into(),
            value: median(&bended)?,
        });
    }
    Ok(LocalConvergenceReport {
        alpha,
        which,
        b,
        h,
        trials,
        seed,
        rows,
    })
}

/// The 5×5 weight fixture of the worked unfolding example.
pub fn example_fixture() -> crate::linalg::RealMatrix {
    crate::linalg::RealMatrix::from_rows(&[
        vec![0.1, 3.2, 2.1, 4.0, 0.2],
        vec![0.0, 1.2, 3.3, 3.4, 1.7],
        vec![0.4, 10.3, 0.1, 2.0, 3.0],
        vec![0.2, 3.1, 1.67, 5.0, 11.0],
        vec![8.0, 4.7, 1.2, 1.98, 2.0],
    ])
    .expect("fixture is square")
}
