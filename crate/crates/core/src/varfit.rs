//! Grid minimiser of the unit-velocity / orthogonality functional.
//!
//! The functional is
//! `total = w_A Σ_n w_n Σ_i (⟨∇y_i, P⟩ − 1)² + w_B Σ_n w_n Σ_{i<j} ⟨∇y_i, ∇y_j⟩²`
//! with trapezoid node weights `w_n`, central differences in the interior and
//! one-sided second order differences on the boundary.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynsys::VectorField;
use crate::error::{Error, Result};
use crate::numeric::{dot, lagrange_weights, BandedSpd};

/// Name of the seeded generator used for initialisation.
pub const PRNG_NAME: &str = "ChaCha8Rng";

/// `N` coordinate functions sampled on a regular grid. Node index is row-major with
/// the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

impl GridField {
    pub fn zeros(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>, fields: usize) -> Result<GridField> {
        validate_grid(&lo, &hi, &shape)?;
        let n = shape.iter().product();
        Ok(GridField {
            lo,
            hi,
            shape,
            values: vec![vec![0.0; n]; fields],
        })
    }

    /// Samples closed-form functions at the nodes.
    pub fn from_fn<F>(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>, fields: usize, f: F) -> Result<GridField>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let mut g = GridField::zeros(lo, hi, shape, fields)?;
        for node in 0..g.node_count() {
            let x = g.node_coords(node);
            for (i, v) in f(&x).into_iter().enumerate().take(fields) {
                g.values[i][node] = v;
            }
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn fields(&self) -> usize {
        self.values.len()
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn spacing(&self) -> Vec<f64> {
        spacing(&self.lo, &self.hi, &self.shape)
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.shape)
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        multi_index(&self.shape, node)
    }

    pub fn node_coords(&self, node: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(d, &k)| self.lo[d] + k as f64 * h[d])
            .collect()
    }

    /// Whether the node is away from every face of the box.
    pub fn is_interior(&self, node: usize) -> bool {
        self.multi_index(node)
            .iter()
            .zip(&self.shape)
            .all(|(&k, &s)| k > 0 && k + 1 < s)
    }

    /// Finite-difference gradients `∇y_i` at every node, indexed `[i][node][d]`.
    pub fn gradients(&self) -> Vec<Vec<Vec<f64>>> {
        let st = Stencil::new(&self.shape, &self.spacing());
        self.values
            .iter()
            .map(|y| (0..self.node_count()).map(|n| st.gradient(y, n)).collect())
            .collect()
    }

    /// Evaluates the fields on another grid over the same box by tensor cubic interpolation.
    pub fn resample(&self, shape: &[usize]) -> Result<GridField> {
        let mut out = GridField::zeros(self.lo.clone(), self.hi.clone(), shape.to_vec(), self.fields())?;
        let strides = self.strides();
        let strides = &strides;
        for node in 0..out.node_count() {
            let x = out.node_coords(node);
            let per_axis: Vec<Vec<(usize, f64)>> = (0..self.dim())
                .map(|d| lagrange_weights(self.lo[d], self.hi[d], self.shape[d], x[d]))
                .collect();
            let mut combos: Vec<(usize, f64)> = vec![(0, 1.0)];
            for (d, ws) in per_axis.iter().enumerate() {
                combos = combos
                    .iter()
                    .flat_map(|&(idx, w)| ws.iter().map(move |&(k, wk)| (idx + k * strides[d], w * wk)))
                    .collect();
            }
            for (i, y) in self.values.iter().enumerate() {
                out.values[i][node] = combos.iter().map(|&(k, w)| w * y[k]).sum();
            }
        }
        Ok(out)
    }
}

fn validate_grid(lo: &[f64], hi: &[f64], shape: &[usize]) -> Result<()> {
    if lo.len() != hi.len() || lo.len() != shape.len() || shape.is_empty() {
        return Err(Error::Config("grid: lo, hi and shape must have the same length".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
        return Err(Error::Config("grid: bounds must satisfy lo < hi".into()));
    }
    if shape.iter().any(|&s| s < 3) {
        return Err(Error::Config("grid: at least 3 nodes per axis are required".into()));
    }
    Ok(())
}

fn spacing(lo: &[f64], hi: &[f64], shape: &[usize]) -> Vec<f64> {
    (0..shape.len())
        .map(|d| (hi[d] - lo[d]) / (shape[d] - 1) as f64)
        .collect()
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

fn multi_index(shape: &[usize], mut node: usize) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for d in (0..shape.len()).rev() {
        idx[d] = node % shape[d];
        node /= shape[d];
    }
    idx
}

/// Three-point difference weights for every node and axis.
#[derive(Debug, Clone)]
struct Stencil {
    dim: usize,
    entries: Vec<[(usize, f64); 3]>,
}

impl Stencil {
    fn new(shape: &[usize], h: &[f64]) -> Stencil {
        let dim = shape.len();
        let st = strides(shape);
        let nodes: usize = shape.iter().product();
        let mut entries = Vec::with_capacity(nodes * dim);
        for node in 0..nodes {
            let idx = multi_index(shape, node);
            for d in 0..dim {
                let s = st[d];
                let c = 1.0 / (2.0 * h[d]);
                let e = if idx[d] == 0 {
                    [(node, -3.0 * c), (node + s, 4.0 * c), (node + 2 * s, -c)]
                } else if idx[d] + 1 == shape[d] {
                    [(node, 3.0 * c), (node - s, -4.0 * c), (node - 2 * s, c)]
                } else {
                    [(node - s, -c), (node + s, c), (node, 0.0)]
                };
                entries.push(e);
            }
        }
        Stencil { dim, entries }
    }

    #[inline]
    fn axis(&self, node: usize, d: usize) -> &[(usize, f64); 3] {
        &self.entries[node * self.dim + d]
    }

    fn gradient(&self, y: &[f64], node: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|d| self.axis(node, d).iter().map(|&(k, c)| c * y[k]).sum())
            .collect()
    }

    /// Nodes touched by the gradient at `node` with their per-axis coefficients.
    fn support(&self, node: usize) -> Vec<(usize, Vec<f64>)> {
        let mut out: Vec<(usize, Vec<f64>)> = Vec::with_capacity(1 + 2 * self.dim);
        for d in 0..self.dim {
            for &(k, c) in self.axis(node, d) {
                if c == 0.0 {
                    continue;
                }
                match out.iter_mut().find(|(q, _)| *q == k) {
                    Some((_, coef)) => coef[d] += c,
                    None => {
                        let mut coef = vec![0.0; self.dim];
                        coef[d] = c;
                        out.push((k, coef));
                    }
                }
            }
        }
        out.sort_by_key(|(q, _)| *q);
        out
    }
}

/// Components of the discretised functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub a: f64,
    pub b: f64,
    pub total: f64,
}

/// Functional on a fixed grid with the velocity sampled at the nodes.
#[derive(Debug, Clone)]
pub struct Functional {
    lo: Vec<f64>,
    hi: Vec<f64>,
    shape: Vec<usize>,
    n: usize,
    stencil: Stencil,
    /// `P(x_node)` flattened as `node * N + d`.
    velocity: Vec<f64>,
    weights: Vec<f64>,
    weight_a: f64,
    weight_b: f64,
}

impl Functional {
    pub fn new(field: &VectorField, lo: &[f64], hi: &[f64], shape: &[usize], weight_a: f64, weight_b: f64) -> Result<Functional> {
        validate_grid(lo, hi, shape)?;
        let n = field.dim();
        if shape.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: shape.len(),
            });
        }
        if !(weight_a >= 0.0) || !(weight_b >= 0.0) {
            return Err(Error::Config("weights must be non-negative".into()));
        }
        let h = spacing(lo, hi, shape);
        let cell: f64 = h.iter().product();
        let nodes: usize = shape.iter().product();
        let mut velocity = Vec::with_capacity(nodes * n);
        let mut weights = Vec::with_capacity(nodes);
        for node in 0..nodes {
            let idx = multi_index(shape, node);
            let x: Vec<f64> = (0..n).map(|d| lo[d] + idx[d] as f64 * h[d]).collect();
            velocity.extend(field.eval(&x)?);
            let w = idx
                .iter()
                .zip(shape)
                .map(|(&k, &s)| if k == 0 || k + 1 == s { 0.5 } else { 1.0 })
                .product::<f64>();
            weights.push(w * cell);
        }
        Ok(Functional {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            shape: shape.to_vec(),
            n,
            stencil: Stencil::new(shape, &h),
            velocity,
            weights,
            weight_a,
            weight_b,
        })
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    fn check(&self, y: &GridField) -> Result<()> {
        if y.shape != self.shape || y.fields() != self.n {
            return Err(Error::Dimension {
                expected: self.nodes() * self.n,
                got: y.node_count() * y.fields(),
            });
        }
        Ok(())
    }

    fn p(&self, node: usize) -> &[f64] {
        &self.velocity[node * self.n..(node + 1) * self.n]
    }

    /// `∇y_i` at `node` for all `i`.
    fn node_gradients(&self, y: &GridField, node: usize) -> Vec<Vec<f64>> {
        y.values.iter().map(|v| self.stencil.gradient(v, node)).collect()
    }

    pub fn loss(&self, y: &GridField) -> Result<Loss> {
        self.check(y)?;
        let (mut a, mut b) = (0.0, 0.0);
        for node in 0..self.nodes() {
            let g = self.node_gradients(y, node);
            let p = self.p(node);
            let w = self.weights[node];
            let mut an = 0.0;
            let mut bn = 0.0;
            for i in 0..self.n {
                an += (dot(&g[i], p) - 1.0).powi(2);
                for j in i + 1..self.n {
                    bn += dot(&g[i], &g[j]).powi(2);
                }
            }
            if !an.is_finite() || !bn.is_finite() {
                return Err(Error::Divergence { iteration: 0, node });
            }
            a += w * an;
            b += w * bn;
        }
        Ok(Loss {
            a,
            b,
            total: self.weight_a * a + self.weight_b * b,
        })
    }

    /// Exact gradient of `total` with respect to every node value, `[i][node]`.
    pub fn gradient(&self, y: &GridField) -> Result<Vec<Vec<f64>>> {
        self.check(y)?;
        let n = self.n;
        let mut out = vec![vec![0.0; self.nodes()]; n];
        for node in 0..self.nodes() {
            let g = self.node_gradients(y, node);
            let p = self.p(node);
            let w = self.weights[node];
            // dL/d(∇y_i) at this node
            let mut dg = vec![vec![0.0; n]; n];
            for i in 0..n {
                let e = 2.0 * self.weight_a * w * (dot(&g[i], p) - 1.0);
                for d in 0..n {
                    dg[i][d] += e * p[d];
                }
                for j in i + 1..n {
                    let q = 2.0 * self.weight_b * w * dot(&g[i], &g[j]);
                    for d in 0..n {
                        dg[i][d] += q * g[j][d];
                        dg[j][d] += q * g[i][d];
                    }
                }
            }
            if dg.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { iteration: 0, node });
            }
            for d in 0..n {
                for &(k, c) in self.stencil.axis(node, d) {
                    for i in 0..n {
                        out[i][k] += c * dg[i][d];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Gauss–Newton normal matrix `JᵀJ` and `Jᵀr` over unknowns `u = node·N + i`,
    /// with the corner node pinned.
    fn normal_equations(&self, y: &GridField) -> (BandedSpd, Vec<f64>) {
        let n = self.n;
        let unknowns = self.nodes() * n;
        let span: usize = strides(&self.shape).iter().map(|s| 2 * s).sum();
        let bw = (span + 1) * n;
        let mut h = BandedSpd::zeros(unknowns, bw.min(unknowns.saturating_sub(1)));
        let mut rhs = vec![0.0; unknowns];
        let pinned = |u: usize| u < n;
        let mut row: Vec<(usize, f64)> = Vec::new();
        let add_row = |row: &[(usize, f64)], r: f64, h: &mut BandedSpd, rhs: &mut [f64]| {
            for (a, &(ua, va)) in row.iter().enumerate() {
                if pinned(ua) {
                    continue;
                }
                rhs[ua] += va * r;
                for &(ub, vb) in &row[..=a] {
                    if pinned(ub) {
                        continue;
                    }
                    h.add_lower(ua, ub, va * vb);
                }
            }
        };
        for node in 0..self.nodes() {
            let g = self.node_gradients(y, node);
            let p = self.p(node);
            let w = self.weights[node];
            let support = self.stencil.support(node);
            let sa = (self.weight_a * w).sqrt();
            let sb = (self.weight_b * w).sqrt();
            for i in 0..n {
                row.clear();
                for (q, coef) in &support {
                    row.push((q * n + i, sa * dot(coef, p)));
                }
                add_row(&row, sa * (dot(&g[i], p) - 1.0), &mut h, &mut rhs);
            }
            if sb == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in i + 1..n {
                    row.clear();
                    for (q, coef) in &support {
                        // unknowns interleave i < j for the same node, so this keeps the row sorted
                        row.push((q * n + i, sb * dot(coef, &g[j])));
                        row.push((q * n + j, sb * dot(coef, &g[i])));
                    }
                    add_row(&row, sb * dot(&g[i], &g[j]), &mut h, &mut rhs);
                }
            }
        }
        for u in 0..n {
            h.add_lower(u, u, 1.0);
            rhs[u] = 0.0;
        }
        (h, rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Damped Gauss–Newton on a coarse-to-fine sequence of grids.
    LevenbergMarquardt,
    /// First-order descent with momentum and backtracking.
    Momentum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Init {
    RandomAffine,
    Supplied { field: GridField },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub optimizer: Optimizer,
    pub step_size: f64,
    pub momentum: f64,
    /// Iteration cap per grid level.
    pub iterations: usize,
    pub weight_a: f64,
    pub weight_b: f64,
    pub seed: u64,
    pub init: Init,
    /// Smallest per-axis node count of the coarse-to-fine sequence.
    pub coarsest: usize,
    /// Relative loss decrease below which a level stops.
    pub ftol: f64,
    pub target_a: f64,
    pub target_b: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            optimizer: Optimizer::LevenbergMarquardt,
            step_size: 1e-3,
            momentum: 0.9,
            iterations: 5000,
            weight_a: 1.0,
            weight_b: 1.0,
            seed: 0,
            init: Init::RandomAffine,
            coarsest: 8,
            ftol: 1e-9,
            target_a: 1e-2,
            target_b: 1e-2,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::Config("step_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.weight_a >= 0.0) || !(self.weight_b >= 0.0) {
            return Err(Error::Config("weights must be non-negative".into()));
        }
        if self.coarsest < 3 {
            return Err(Error::Config("coarsest level needs at least 3 nodes per axis".into()));
        }
        Ok(())
    }
}

/// Loss value on the grid.
pub fn loss(fields: &GridField, vf: &VectorField, cfg: &FitConfig) -> Result<Loss> {
    Functional::new(vf, &fields.lo, &fields.hi, &fields.shape, cfg.weight_a, cfg.weight_b)?.loss(fields)
}

/// Exact gradient of the discretised functional, `[i][node]`.
pub fn loss_gradient(fields: &GridField, vf: &VectorField, cfg: &FitConfig) -> Result<Vec<Vec<f64>>> {
    Functional::new(vf, &fields.lo, &fields.hi, &fields.shape, cfg.weight_a, cfg.weight_b)?.gradient(fields)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub shape: Vec<usize>,
    pub iterations: usize,
    pub loss_history: Vec<f64>,
}

/// Residual statistics of a fitted field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Node mean of `(⟨∇y_i, P⟩ − 1)²`, one entry per coordinate.
    pub mean_unit_residual: Vec<f64>,
    /// Node mean of `⟨∇y_i, ∇y_j⟩²` over all pairs.
    pub mean_orthogonality: f64,
    /// Node mean of `|⟨∇y_i, ∇y_j⟩|` over all pairs.
    pub mean_abs_orthogonality: f64,
    /// Largest `⟨∇y_i, ∇y_j⟩² / (|∇y_i|² |∇y_j|²)` over nodes and pairs.
    pub max_alignment: f64,
    pub worst_node: Vec<f64>,
    /// Share of the weighted loss carried by the worst tenth of the nodes.
    pub top_decile_share: f64,
    pub targets_met: bool,
    /// Set when gradients become nearly parallel somewhere on the grid.
    pub degenerate: bool,
}

/// Gradients with `max_alignment` above this value are reported as degenerate.
pub const ALIGNMENT_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub field: GridField,
    /// Loss after every iteration on the finest grid.
    pub loss_history: Vec<f64>,
    pub levels: Vec<LevelSummary>,
    pub iterations: usize,
    pub final_loss: Loss,
    pub diagnostics: Diagnostics,
    /// Targets missed or gradients degenerate.
    pub flagged: bool,
}

pub fn diagnostics(fun: &Functional, y: &GridField, cfg: &FitConfig) -> Diagnostics {
    let n = fun.n;
    let nodes = fun.nodes();
    let mut mean_a = vec![0.0; n];
    let (mut mean_b, mut mean_abs_b) = (0.0, 0.0);
    let mut max_alignment: f64 = 0.0;
    let mut worst = 0;
    let mut node_loss = Vec::with_capacity(nodes);
    let pairs = (n * (n - 1) / 2).max(1) as f64;
    for node in 0..nodes {
        let g = fun.node_gradients(y, node);
        let p = fun.p(node);
        let mut local = 0.0;
        for i in 0..n {
            let r = (dot(&g[i], p) - 1.0).powi(2);
            mean_a[i] += r;
            local += cfg.weight_a * r;
            for j in i + 1..n {
                let q = dot(&g[i], &g[j]);
                mean_b += q * q;
                mean_abs_b += q.abs();
                local += cfg.weight_b * q * q;
                let al = q * q / (dot(&g[i], &g[i]) * dot(&g[j], &g[j]));
                let al = if al.is_finite() { al } else { 1.0 };
                if al > max_alignment {
                    max_alignment = al;
                    worst = node;
                }
            }
        }
        node_loss.push(local * fun.weights[node]);
    }
    mean_a.iter_mut().for_each(|v| *v /= nodes as f64);
    mean_b /= nodes as f64 * pairs;
    mean_abs_b /= nodes as f64 * pairs;
    let total: f64 = node_loss.iter().sum();
    node_loss.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = node_loss[..(nodes / 10).max(1)].iter().sum();
    let targets_met = mean_a.iter().all(|a| *a <= cfg.target_a) && mean_b <= cfg.target_b;
    Diagnostics {
        mean_unit_residual: mean_a,
        mean_orthogonality: mean_b,
        mean_abs_orthogonality: mean_abs_b,
        max_alignment,
        worst_node: y.node_coords(worst),
        top_decile_share: if total > 0.0 { top / total } else { 0.0 },
        targets_met,
        degenerate: max_alignment > ALIGNMENT_LIMIT,
    }
}

fn level_shapes(shape: &[usize], coarsest: usize) -> Vec<Vec<usize>> {
    let mut levels = vec![shape.to_vec()];
    loop {
        let last = levels.last().expect("non-empty");
        if last.iter().any(|&s| s / 2 < coarsest) {
            break;
        }
        let next: Vec<usize> = last.iter().map(|&s| s.div_ceil(2)).collect();
        levels.push(next);
    }
    levels.reverse();
    levels
}

fn random_affine(vf: &VectorField, lo: &[f64], hi: &[f64], shape: &[usize], seed: u64) -> Result<GridField> {
    let n = vf.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let len = dot(&v, &v).sqrt();
        if len > 1e-8 {
            basis.push(v.iter().map(|x| x / len).collect());
        }
    }
    let mut g = GridField::zeros(lo.to_vec(), hi.to_vec(), shape.to_vec(), n)?;
    let mut speeds: Vec<Vec<f64>> = vec![Vec::with_capacity(g.node_count()); n];
    for node in 0..g.node_count() {
        let x = g.node_coords(node);
        let p = vf.eval(&x)?;
        for (i, w) in basis.iter().enumerate() {
            speeds[i].push(dot(w, &p));
        }
    }
    for (i, w) in basis.iter().enumerate() {
        let mut s = speeds[i].clone();
        s.sort_by(f64::total_cmp);
        let median = s[s.len() / 2];
        let scale = if median.abs() > 1e-12 { 1.0 / median } else { 1.0 };
        for node in 0..g.node_count() {
            let x = g.node_coords(node);
            let shifted: Vec<f64> = x.iter().zip(lo).map(|(a, b)| a - b).collect();
            g.values[i][node] = scale * dot(w, &shifted);
        }
    }
    Ok(g)
}

fn pin(y: &mut GridField) {
    for v in &mut y.values {
        let c = v[0];
        v.iter_mut().for_each(|x| *x -= c);
    }
}

fn add_flat(y: &GridField, step: &[f64]) -> GridField {
    let n = y.fields();
    let mut out = y.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        for (node, x) in v.iter_mut().enumerate() {
            *x += step[node * n + i];
        }
    }
    out
}

fn lm_level(fun: &Functional, mut y: GridField, cfg: &FitConfig) -> Result<(GridField, Vec<f64>)> {
    let mut current = fun.loss(&y)?.total;
    let mut history = Vec::new();
    let mut lambda = 1e-3;
    for _ in 0..cfg.iterations {
        let (h, g) = fun.normal_equations(&y);
        let diag = h.diagonal();
        let floor = 1e-12 * diag.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let mut accepted = None;
        for _ in 0..30 {
            let mut m = h.clone();
            let damp: Vec<f64> = diag
                .iter()
                .enumerate()
                .map(|(u, d)| if u < fun.n { 0.0 } else { lambda * d.max(floor) })
                .collect();
            m.add_diagonal(&damp);
            if m.factor() {
                let step: Vec<f64> = m.solve_factored(&g).iter().map(|v| -v).collect();
                let trial = add_flat(&y, &step);
                if let Ok(l) = fun.loss(&trial) {
                    if l.total < current {
                        lambda = (lambda / 3.0).max(1e-12);
                        accepted = Some((trial, l.total));
                        break;
                    }
                }
            }
            lambda *= 4.0;
        }
        let Some((trial, value)) = accepted else { break };
        let decrease = current - value;
        y = trial;
        current = value;
        history.push(current);
        if decrease <= cfg.ftol * current || current == 0.0 {
            break;
        }
    }
    Ok((y, history))
}

fn momentum_level(fun: &Functional, mut y: GridField, cfg: &FitConfig) -> Result<(GridField, Vec<f64>)> {
    let mut current = fun.loss(&y)?.total;
    let mut history = Vec::new();
    let mut step = cfg.step_size;
    let n = y.fields();
    let mut velocity = vec![vec![0.0; y.node_count()]; n];
    for _ in 0..cfg.iterations {
        let mut grad = fun.gradient(&y)?;
        for g in &mut grad {
            g[0] = 0.0;
        }
        let mut accepted = None;
        for _ in 0..=30 {
            let mut trial = y.clone();
            let mut v_new = velocity.clone();
            for i in 0..n {
                for k in 0..trial.node_count() {
                    v_new[i][k] = cfg.momentum * velocity[i][k] - step * grad[i][k];
                    trial.values[i][k] += v_new[i][k];
                }
            }
            match fun.loss(&trial) {
                Ok(l) if l.total <= current => {
                    accepted = Some((trial, v_new, l.total));
                    break;
                }
                _ => {
                    step *= 0.5;
                    velocity.iter_mut().flatten().for_each(|v| *v = 0.0);
                }
            }
        }
        let Some((trial, v_new, value)) = accepted else { break };
        y = trial;
        velocity = v_new;
        current = value;
        history.push(current);
    }
    Ok((y, history))
}

/// Minimises the functional on `shape` nodes over `[lo, hi]`.
pub fn fit(vf: &VectorField, lo: &[f64], hi: &[f64], shape: &[usize], cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    validate_grid(lo, hi, shape)?;
    if shape.len() != vf.dim() {
        return Err(Error::Dimension {
            expected: vf.dim(),
            got: shape.len(),
        });
    }
    let shapes = match (&cfg.init, cfg.optimizer) {
        (Init::RandomAffine, Optimizer::LevenbergMarquardt) => level_shapes(shape, cfg.coarsest),
        _ => vec![shape.to_vec()],
    };
    let mut y = match &cfg.init {
        Init::RandomAffine => random_affine(vf, lo, hi, &shapes[0], cfg.seed)?,
        Init::Supplied { field } => {
            if field.fields() != vf.dim() || field.lo != lo || field.hi != hi {
                return Err(Error::Config("supplied initial field does not match the grid box".into()));
            }
            field.resample(&shapes[0])?
        }
    };
    pin(&mut y);
    let mut levels = Vec::new();
    let mut total_iterations = 0;
    let mut fun = None;
    for (k, s) in shapes.iter().enumerate() {
        if k > 0 {
            y = y.resample(s)?;
            pin(&mut y);
        }
        let f = Functional::new(vf, lo, hi, s, cfg.weight_a, cfg.weight_b)?;
        let (next, history) = match cfg.optimizer {
            Optimizer::LevenbergMarquardt => lm_level(&f, y, cfg)?,
            Optimizer::Momentum => momentum_level(&f, y, cfg)?,
        };
        y = next;
        total_iterations += history.len();
        levels.push(LevelSummary {
            shape: s.clone(),
            iterations: history.len(),
            loss_history: history,
        });
        fun = Some(f);
    }
    let fun = fun.expect("at least one level");
    let final_loss = fun.loss(&y)?;
    let diagnostics = diagnostics(&fun, &y, cfg);
    let flagged = !diagnostics.targets_met || diagnostics.degenerate;
    let loss_history = levels.last().map(|l| l.loss_history.clone()).unwrap_or_default();
    Ok(FitResult {
        field: y,
        loss_history,
        levels,
        iterations: total_iterations,
        final_loss,
        diagnostics,
        flagged,
    })
}

/// Largest relative error between `loss_gradient` projected on random unit directions and a
/// central difference of the loss along them.
pub fn gradient_check(fields: &GridField, vf: &VectorField, cfg: &FitConfig, directions: usize, seed: u64) -> Result<f64> {
    let fun = Functional::new(vf, &fields.lo, &fields.hi, &fields.shape, cfg.weight_a, cfg.weight_b)?;
    let grad = fun.gradient(fields)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let mut d: Vec<Vec<f64>> = grad
            .iter()
            .map(|g| g.iter().map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let len = d.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        d.iter_mut().flatten().for_each(|v| *v /= len);
        let analytic: f64 = grad.iter().flatten().zip(d.iter().flatten()).map(|(g, v)| g * v).sum();
        let eps = 1e-4 * (1.0 + fields.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())));
        let shifted = |sign: f64| -> Result<f64> {
            let mut y = fields.clone();
            for (yi, di) in y.values.iter_mut().zip(&d) {
                yi.iter_mut().zip(di).for_each(|(a, b)| *a += sign * eps * b);
            }
            Ok(fun.loss(&y)?.total)
        };
        let numeric = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * eps);
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-300));
    }
    Ok(worst)
}

/// A seeded random field on the grid, used to probe the functional away from any optimum.
pub fn random_field(lo: &[f64], hi: &[f64], shape: &[usize], fields: usize, seed: u64) -> Result<GridField> {
    let mut g = GridField::zeros(lo.to_vec(), hi.to_vec(), shape.to_vec(), fields)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for y in &mut g.values {
        y.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
    }
    Ok(g)
}

/// Recombines unit-velocity coordinates into flowbox order: `z_i = (y_i − y_N)/2` for
/// `i < N` and `z_N = Σ_j y_j / N`.
pub fn rotate_to_flowbox(fields: &GridField) -> GridField {
    let n = fields.fields();
    if n < 2 {
        return fields.clone();
    }
    let mut out = fields.clone();
    let last = &fields.values[n - 1];
    for i in 0..n - 1 {
        out.values[i] = fields.values[i]
            .iter()
            .zip(last)
            .map(|(a, b)| 0.5 * (a - b))
            .collect();
    }
    out.values[n - 1] = (0..fields.node_count())
        .map(|k| fields.values.iter().map(|v| v[k]).sum::<f64>() / n as f64)
        .collect();
    out
}

/// Applies the flowbox recombination to one vector of coordinate rates.
pub fn rotate_rates(rates: &[f64]) -> Vec<f64> {
    let n = rates.len();
    if n < 2 {
        return rates.to_vec();
    }
    let mut out: Vec<f64> = (0..n - 1).map(|i| 0.5 * (rates[i] - rates[n - 1])).collect();
    out.push(rates.iter().sum::<f64>() / n as f64);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::builtin;

    fn translation() -> VectorField {
        builtin("translation").unwrap().with_domain(crate::dynsys::DomainBox::cube(2, -20.0, 20.0))
    }

    #[test]
    fn constant_fields() {
        let vf = builtin("linear-ar").unwrap();
        let g = GridField::from_fn(vec![4.0, 1.0], vec![6.0, 3.0], vec![9, 7], 2, |_| vec![3.0, -1.0]).unwrap();
        let l = loss(&g, &vf, &FitConfig::default()).unwrap();
        assert!((l.a - 2.0 * 4.0).abs() < 1e-12, "{l:?}");
        assert_eq!(l.b, 0.0);
    }

    #[test]
    fn parallel_unit_coordinates() {
        let vf = translation();
        let g = GridField::from_fn(vec![0.0, 0.0], vec![2.0, 1.5], vec![5, 6], 2, |x| vec![x[0], x[0]]).unwrap();
        let l = loss(&g, &vf, &FitConfig::default()).unwrap();
        assert!(l.a.abs() < 1e-24);
        assert!((l.b - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_velocity_gradient_vanishes_for_a() {
        let vf = VectorField::from_fn("zero", 2, |_, out| out.fill(0.0));
        let g = GridField::zeros(vec![0.0, 0.0], vec![1.0, 1.0], vec![4, 4], 2).unwrap();
        let cfg = FitConfig {
            weight_b: 0.0,
            ..Default::default()
        };
        let grad = loss_gradient(&g, &vf, &cfg).unwrap();
        assert!(grad.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn stencils_are_exact_for_quadratics() {
        let g = GridField::from_fn(vec![0.0, -1.0], vec![1.0, 2.0], vec![5, 4], 1, |x| vec![x[0] * x[0] + 3.0 * x[0] * x[1] - x[1] * x[1]])
            .unwrap();
        let grads = g.gradients();
        for node in 0..g.node_count() {
            let x = g.node_coords(node);
            let exact = [2.0 * x[0] + 3.0 * x[1], 3.0 * x[0] - 2.0 * x[1]];
            for d in 0..2 {
                assert!((grads[0][node][d] - exact[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let vf = builtin("limit-cycle").unwrap();
        let g = GridField::from_fn(vec![0.2, 0.1], vec![1.0, 0.9], vec![6, 5], 2, |x| {
            vec![(x[0] * 1.3).sin() + x[1], x[0] * x[1] - 0.4 * x[1]]
        })
        .unwrap();
        let cfg = FitConfig::default();
        let grad = loss_gradient(&g, &vf, &cfg).unwrap();
        for (i, node) in [(0, 0), (1, 7), (0, 29), (1, 14)] {
            let eps = 1e-6;
            let mut p = g.clone();
            p.values[i][node] += eps;
            let mut m = g.clone();
            m.values[i][node] -= eps;
            let fd = (loss(&p, &vf, &cfg).unwrap().total - loss(&m, &vf, &cfg).unwrap().total) / (2.0 * eps);
            assert!((fd - grad[i][node]).abs() <= 1e-6 * fd.abs().max(1e-3), "{fd} {}", grad[i][node]);
        }
    }

    #[test]
    fn normal_equations_match_gradient() {
        let vf = builtin("linear-ar").unwrap();
        let g = GridField::from_fn(vec![4.0, 1.0], vec![6.0, 3.0], vec![5, 4], 2, |x| vec![0.1 * x[0] + 0.02 * x[1] * x[1], 0.05 * x[0] - 0.1 * x[1]])
            .unwrap();
        let fun = Functional::new(&vf, &g.lo, &g.hi, &g.shape, 1.0, 1.0).unwrap();
        let (_, jtr) = fun.normal_equations(&g);
        let grad = fun.gradient(&g).unwrap();
        for node in 1..g.node_count() {
            for i in 0..2 {
                let a = 2.0 * jtr[node * 2 + i];
                assert!((a - grad[i][node]).abs() < 1e-10 * grad[i][node].abs().max(1.0));
            }
        }
    }

    #[test]
    fn rotation_rates() {
        assert_eq!(rotate_rates(&[1.0, 1.0]), vec![0.0, 1.0]);
        assert_eq!(rotate_rates(&[1.0, 1.0, 1.0]), vec![0.0, 0.0, 1.0]);
        assert_eq!(rotate_rates(&[2.0]), vec![2.0]);
        let g = GridField::from_fn(vec![0.0, 0.0], vec![1.0, 1.0], vec![3, 3], 2, |x| vec![x[0] + 1.0, x[1]]).unwrap();
        let z = rotate_to_flowbox(&g);
        let x = g.node_coords(4);
        assert!((z.values[0][4] - 0.5 * (x[0] + 1.0 - x[1])).abs() < 1e-15);
        assert!((z.values[1][4] - 0.5 * (x[0] + 1.0 + x[1])).abs() < 1e-15);
    }

    #[test]
    fn translation_fit_separates_gradients() {
        let vf = translation();
        let init = GridField::from_fn(vec![0.0, 0.0], vec![1.0, 1.0], vec![9, 9], 2, |x| {
            vec![x[0] + 0.1 * x[1], x[0] - 0.1 * x[1]]
        })
        .unwrap();
        let cfg = FitConfig {
            init: Init::Supplied { field: init },
            iterations: 50,
            ..Default::default()
        };
        let r = fit(&vf, &[0.0, 0.0], &[1.0, 1.0], &[9, 9], &cfg).unwrap();
        assert!(r.final_loss.a < 1e-6 && r.final_loss.b < 1e-6, "{:?}", r.final_loss);
        assert!(r.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn level_sequence() {
        assert_eq!(level_shapes(&[64, 64], 8), vec![vec![8, 8], vec![16, 16], vec![32, 32], vec![64, 64]]);
        assert_eq!(level_shapes(&[10, 12], 8), vec![vec![10, 12]]);
    }

    #[test]
    fn resample_reproduces_cubics() {
        let f = |x: &[f64]| vec![x[0].powi(3) - 2.0 * x[0] * x[1] + x[1] * x[1]];
        let g = GridField::from_fn(vec![-1.0, 0.0], vec![1.0, 2.0], vec![7, 9], 1, f).unwrap();
        let fine = g.resample(&[13, 11]).unwrap();
        for node in 0..fine.node_count() {
            let x = fine.node_coords(node);
            assert!((fine.values[0][node] - f(&x)[0]).abs() < 1e-12);
        }
    }
}
