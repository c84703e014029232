//! Finite differences on the masked grid, the log-det barrier and the
//! discrete penalized energy.
//!
//! All second derivatives use the 9-point stencil
//!
//! ```text
//! a11 = (u[E] - 2u + u[W]) / h^2
//! a22 = (u[N] - 2u + u[S]) / h^2
//! a12 = (u[NE] - u[NW] - u[SE] + u[SW]) / (4 h^2)
//! ```
//!
//! which is exact on quadratics. Every energy is a sum of per-node terms with
//! weight `h^2`, and gradients are the exact derivatives of those sums.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::geometry::{min_eigenvalue, Grid, Mask, Point};
use crate::linalg::CsrMatrix;
use crate::model::{Lagrangian, PenaltyG};

/// Node values bound to a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(
                "values",
                format!("expected {} nodes, got {}", grid.len(), values.len()),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> f64) -> Self {
        let values = grid.sample(f);
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Largest `|self - other|` over `mask`.
    pub fn max_abs_diff(&self, other: &ScalarField, mask: &Mask) -> f64 {
        mask.indices()
            .map(|k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_over(&self, mask: &Mask) -> f64 {
        mask.indices().map(|k| self.values[k]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_over(&self, mask: &Mask) -> f64 {
        mask.indices().map(|k| self.values[k]).fold(f64::INFINITY, f64::min)
    }
}

/// Symmetric 2x2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub a11: f64,
    pub a22: f64,
    pub a12: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        a11: 1.0,
        a22: 1.0,
        a12: 0.0,
    };

    pub fn new(a11: f64, a22: f64, a12: f64) -> Self {
        Self { a11, a22, a12 }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn cofactor(&self) -> Sym2 {
        Sym2::new(self.a22, self.a11, -self.a12)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(self.a11, self.a22, self.a12)
    }

    /// Frobenius product `A : B`.
    pub fn contract(&self, other: &Sym2) -> f64 {
        self.a11 * other.a11 + self.a22 * other.a22 + 2.0 * self.a12 * other.a12
    }

    pub fn mul(&self, other: &Sym2) -> [[f64; 2]; 2] {
        [
            [
                self.a11 * other.a11 + self.a12 * other.a12,
                self.a11 * other.a12 + self.a12 * other.a22,
            ],
            [
                self.a12 * other.a11 + self.a22 * other.a12,
                self.a12 * other.a12 + self.a22 * other.a22,
            ],
        ]
    }

    fn is_positive_definite(&self) -> bool {
        self.a11 > 0.0 && self.det() > 0.0
    }
}

/// Discrete Hessians at the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    nodes: Vec<usize>,
    /// Indexed like the grid; entries off `nodes` are zero.
    entries: Vec<Sym2>,
}

impl HessianField {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn at(&self, k: usize) -> Sym2 {
        self.entries[k]
    }

    pub fn det(&self, k: usize) -> f64 {
        self.entries[k].det()
    }

    pub fn cofactor(&self, k: usize) -> Sym2 {
        self.entries[k].cofactor()
    }

    pub fn min_det(&self) -> f64 {
        self.nodes
            .iter()
            .map(|&k| self.entries[k].det())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.nodes
            .iter()
            .map(|&k| self.entries[k].min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }

    /// First node (in grid order) outside the positive definite cone.
    pub fn first_violation(&self) -> Option<Error> {
        self.nodes.iter().find_map(|&k| {
            let a = self.entries[k];
            (!a.is_positive_definite()).then(|| Error::OutOfDomain {
                node: k,
                det: a.det(),
                trace: a.trace(),
            })
        })
    }
}

/// The nine stencil offsets with their `(a11, a22, a12)` coefficients, unscaled.
pub(crate) fn hessian_stencil(n: usize) -> [(isize, [f64; 3]); 9] {
    let n = n as isize;
    [
        (0, [-2.0, -2.0, 0.0]),
        (1, [1.0, 0.0, 0.0]),
        (-1, [1.0, 0.0, 0.0]),
        (n, [0.0, 1.0, 0.0]),
        (-n, [0.0, 1.0, 0.0]),
        (n + 1, [0.0, 0.0, 0.25]),
        (n - 1, [0.0, 0.0, -0.25]),
        (-n + 1, [0.0, 0.0, -0.25]),
        (-n - 1, [0.0, 0.0, 0.25]),
    ]
}

fn offset(k: usize, d: isize) -> usize {
    (k as isize + d) as usize
}

fn hessian_at(u: &[f64], k: usize, n: usize, inv_h2: f64) -> Sym2 {
    let (e, w, no, s) = (u[k + 1], u[k - 1], u[k + n], u[k - n]);
    let c = u[k];
    Sym2::new(
        (e - 2.0 * c + w) * inv_h2,
        (no - 2.0 * c + s) * inv_h2,
        (u[k + n + 1] - u[k + n - 1] - u[k - n + 1] + u[k - n - 1]) * 0.25 * inv_h2,
    )
}

fn hessian_values(grid: &Grid, u: &[f64], nodes: Vec<usize>) -> HessianField {
    let n = grid.n_per_axis();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut entries = vec![Sym2::default(); grid.len()];
    for &k in &nodes {
        entries[k] = hessian_at(u, k, n, inv_h2);
    }
    HessianField { nodes, entries }
}

/// `D^2_h u` at every interior node.
pub fn hessian_h(u: &ScalarField) -> HessianField {
    let grid = u.grid();
    hessian_values(grid, &u.values, grid.mask_interior().indices().collect())
}

fn central_gradient(u: &[f64], k: usize, n: usize, h: f64) -> [f64; 2] {
    let s = 0.5 / h;
    [(u[k + 1] - u[k - 1]) * s, (u[k + n] - u[k - n]) * s]
}

/// `D_h u`: central differences where both neighbors lie inside the domain,
/// one-sided otherwise, zero outside the domain.
pub fn gradient_h(u: &ScalarField) -> Vec<[f64; 2]> {
    let grid = u.grid();
    let n = grid.n_per_axis();
    let h = grid.spacing();
    let inside = grid.mask_inside();
    let v = &u.values;
    let mut out = vec![[0.0, 0.0]; grid.len()];
    for k in inside.indices() {
        let (i, j) = grid.ij(k);
        let axis = |step: usize, lo_ok: bool, hi_ok: bool| -> f64 {
            let lo = lo_ok && inside.get(k - step);
            let hi = hi_ok && inside.get(k + step);
            match (lo, hi) {
                (true, true) => (v[k + step] - v[k - step]) / (2.0 * h),
                (false, true) => (v[k + step] - v[k]) / h,
                (true, false) => (v[k] - v[k - step]) / h,
                (false, false) => 0.0,
            }
        };
        out[k] = [axis(1, i > 0, i + 1 < n), axis(n, j > 0, j + 1 < n)];
    }
    out
}

/// Value, gradient and second variation of `-weight * sum w log det D^2_h u`
/// over a node set.
#[derive(Debug, Clone)]
pub struct BarrierEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    nodes: Vec<usize>,
    /// Per node the symmetric 3x3 Hessian in `(a11, a22, a12)`, packed as
    /// `[m11, m22, m33, m12, m13, m23]`, already scaled.
    local: Vec<[f64; 6]>,
    stencil: [(isize, [f64; 3]); 9],
    inv_h2: f64,
}

impl BarrierEval {
    /// `out += B v` where `B` is the barrier Hessian.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (&k, m) in self.nodes.iter().zip(&self.local) {
            let mut s = [0.0; 3];
            for &(d, c) in &self.stencil {
                let x = v[offset(k, d)];
                s[0] += c[0] * x;
                s[1] += c[1] * x;
                s[2] += c[2] * x;
            }
            for sc in &mut s {
                *sc *= self.inv_h2;
            }
            let t = [
                m[0] * s[0] + m[3] * s[1] + m[4] * s[2],
                m[3] * s[0] + m[1] * s[1] + m[5] * s[2],
                m[4] * s[0] + m[5] * s[1] + m[2] * s[2],
            ];
            for &(d, c) in &self.stencil {
                out[offset(k, d)] += self.inv_h2 * (c[0] * t[0] + c[1] * t[1] + c[2] * t[2]);
            }
        }
    }

    /// Diagonal of the barrier Hessian.
    pub fn diagonal(&self, out: &mut [f64]) {
        for (&k, m) in self.nodes.iter().zip(&self.local) {
            for &(d, c) in &self.stencil {
                let c = [c[0] * self.inv_h2, c[1] * self.inv_h2, c[2] * self.inv_h2];
                let q = m[0] * c[0] * c[0]
                    + m[1] * c[1] * c[1]
                    + m[2] * c[2] * c[2]
                    + 2.0 * (m[3] * c[0] * c[1] + m[4] * c[0] * c[2] + m[5] * c[1] * c[2]);
                out[offset(k, d)] += q;
            }
        }
    }
}

fn barrier_on(grid: &Grid, u: &[f64], nodes: &[usize], weight: f64) -> Result<BarrierEval> {
    let n = grid.n_per_axis();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let stencil = hessian_stencil(n);
    let mut value = 0.0;
    let mut gradient = vec![0.0; grid.len()];
    let mut local = Vec::with_capacity(nodes.len());
    for &k in nodes {
        let a = hessian_at(u, k, n, inv_h2);
        if !a.is_positive_definite() {
            return Err(Error::OutOfDomain {
                node: k,
                det: a.det(),
                trace: a.trace(),
            });
        }
        let det = a.det();
        let s = weight * grid.weight(k);
        value -= s * det.ln();
        // d(-log det)/d(a11, a22, a12)
        let g = [-a.a22 / det, -a.a11 / det, 2.0 * a.a12 / det];
        for &(d, c) in &stencil {
            gradient[offset(k, d)] += s * inv_h2 * (c[0] * g[0] + c[1] * g[1] + c[2] * g[2]);
        }
        let dd = [a.a22, a.a11, -2.0 * a.a12];
        let d2 = det * det;
        local.push([
            s * dd[0] * dd[0] / d2,
            s * dd[1] * dd[1] / d2,
            s * (dd[2] * dd[2] / d2 + 2.0 / det),
            s * (dd[0] * dd[1] / d2 - 1.0 / det),
            s * dd[0] * dd[2] / d2,
            s * dd[1] * dd[2] / d2,
        ]);
    }
    Ok(BarrierEval {
        value,
        gradient,
        nodes: nodes.to_vec(),
        local,
        stencil,
        inv_h2,
    })
}

/// `-eps * sum_{interior} h^2 log det D^2_h u` with gradient and Hessian action.
pub fn barrier(u: &ScalarField, eps: f64) -> Result<BarrierEval> {
    let grid = u.grid();
    let nodes: Vec<usize> = grid.mask_interior().indices().collect();
    barrier_on(grid, &u.values, &nodes, eps)
}

/// The three parts of the discrete energy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub lagrangian_term: f64,
    pub penalty_term: f64,
    pub barrier_term: f64,
    pub total: f64,
}

/// A discrete energy
/// `sum_{L} w F(x, u, D_h u) + a sum_{P} w G(u - target) - b sum_{B} w log det D^2_h u`,
/// minimized over the free nodes with every other node held fixed.
#[derive(Debug, Clone)]
pub struct DiscreteEnergy {
    grid: Arc<Grid>,
    model: Arc<dyn Lagrangian>,
    pen: Arc<PenaltyG>,
    target: Vec<f64>,
    penalty_weight: f64,
    barrier_weight: f64,
    lagrangian_nodes: Vec<usize>,
    penalty_nodes: Vec<usize>,
    barrier_nodes: Vec<usize>,
    free: Vec<usize>,
}

impl DiscreteEnergy {
    /// The penalized functional at `eps`: `F` over the inner nodes, `G / eps`
    /// over the interior nodes outside the inner region, barrier weight `eps`
    /// over all interior nodes, which are also the free nodes.
    pub fn penalized(
        model: Arc<dyn Lagrangian>,
        pen: Arc<PenaltyG>,
        phi_eps: &ScalarField,
        eps: f64,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid("eps", format!("must be positive, got {eps}")));
        }
        let grid = Arc::clone(phi_eps.grid());
        Ok(Self {
            lagrangian_nodes: grid.mask_inner().indices().collect(),
            penalty_nodes: grid.mask_outer_free().indices().collect(),
            barrier_nodes: grid.mask_interior().indices().collect(),
            free: grid.mask_interior().indices().collect(),
            target: phi_eps.values.clone(),
            penalty_weight: 1.0 / eps,
            barrier_weight: eps,
            model,
            pen,
            grid,
        })
    }

    /// `F` over the inner nodes plus `mu` times the barrier on the inner
    /// nodes, which are the only free nodes.
    pub fn constrained(grid: Arc<Grid>, model: Arc<dyn Lagrangian>, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid("mu", format!("must be positive, got {mu}")));
        }
        let inner: Vec<usize> = grid.mask_inner().indices().collect();
        let pen = Arc::new(crate::model::build_penalty(&crate::model::GrowthEnvelope::zeros())?);
        Ok(Self {
            lagrangian_nodes: inner.clone(),
            penalty_nodes: Vec::new(),
            barrier_nodes: inner.clone(),
            free: inner,
            target: vec![0.0; grid.len()],
            penalty_weight: 0.0,
            barrier_weight: mu,
            model,
            pen,
            grid,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn barrier_nodes(&self) -> &[usize] {
        &self.barrier_nodes
    }

    pub fn penalty_nodes(&self) -> &[usize] {
        &self.penalty_nodes
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn model(&self) -> &Arc<dyn Lagrangian> {
        &self.model
    }

    pub fn penalty(&self) -> &Arc<PenaltyG> {
        &self.pen
    }

    /// Checks the barrier domain without evaluating anything else.
    pub fn check_domain(&self, u: &[f64]) -> Result<()> {
        let n = self.grid.n_per_axis();
        let inv_h2 = 1.0 / (self.grid.spacing() * self.grid.spacing());
        for &k in &self.barrier_nodes {
            let a = hessian_at(u, k, n, inv_h2);
            if !a.is_positive_definite() {
                return Err(Error::OutOfDomain {
                    node: k,
                    det: a.det(),
                    trace: a.trace(),
                });
            }
        }
        Ok(())
    }

    pub fn min_det(&self, u: &[f64]) -> f64 {
        hessian_values(&self.grid, u, self.barrier_nodes.clone()).min_det()
    }

    pub fn lagrangian_value(&self, u: &[f64]) -> f64 {
        let n = self.grid.n_per_axis();
        let h = self.grid.spacing();
        self.lagrangian_nodes
            .iter()
            .map(|&k| {
                let p = central_gradient(u, k, n, h);
                self.grid.weight(k) * self.model.value(self.grid.coord(k), u[k], p)
            })
            .sum()
    }

    pub fn penalty_value(&self, u: &[f64]) -> f64 {
        self.penalty_weight
            * self
                .penalty_nodes
                .iter()
                .map(|&k| self.grid.weight(k) * self.pen.g(u[k] - self.target[k]))
                .sum::<f64>()
    }

    pub fn barrier_value(&self, u: &[f64]) -> Result<f64> {
        Ok(barrier_on(&self.grid, u, &self.barrier_nodes, self.barrier_weight)?.value)
    }

    pub fn value(&self, u: &[f64]) -> Result<EnergyBreakdown> {
        let barrier_term = self.barrier_value(u)?;
        let lagrangian_term = self.lagrangian_value(u);
        let penalty_term = self.penalty_value(u);
        Ok(EnergyBreakdown {
            lagrangian_term,
            penalty_term,
            barrier_term,
            total: lagrangian_term + penalty_term + barrier_term,
        })
    }

    /// Sum of the absolute per-node contributions, a scale for roundoff.
    pub fn magnitude(&self, u: &[f64]) -> f64 {
        let n = self.grid.n_per_axis();
        let h = self.grid.spacing();
        let inv_h2 = 1.0 / (h * h);
        let mut m = 0.0;
        for &k in &self.lagrangian_nodes {
            let p = central_gradient(u, k, n, h);
            m += (self.grid.weight(k) * self.model.value(self.grid.coord(k), u[k], p)).abs();
        }
        for &k in &self.penalty_nodes {
            m += (self.penalty_weight * self.grid.weight(k) * self.pen.g(u[k] - self.target[k])).abs();
        }
        for &k in &self.barrier_nodes {
            let d = hessian_at(u, k, n, inv_h2).det();
            m += (self.barrier_weight * self.grid.weight(k) * d.ln()).abs();
        }
        m
    }

    pub fn lagrangian_gradient(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.n_per_axis();
        let h = self.grid.spacing();
        let s = 0.5 / h;
        let mut g = vec![0.0; self.grid.len()];
        for &k in &self.lagrangian_nodes {
            let x = self.grid.coord(k);
            let p = central_gradient(u, k, n, h);
            let w = self.grid.weight(k);
            let fp = self.model.d_p(x, u[k], p);
            g[k] += w * self.model.d_z(x, u[k], p);
            g[k + 1] += w * s * fp[0];
            g[k - 1] -= w * s * fp[0];
            g[k + n] += w * s * fp[1];
            g[k - n] -= w * s * fp[1];
        }
        g
    }

    pub fn penalty_gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.grid.len()];
        for &k in &self.penalty_nodes {
            g[k] += self.penalty_weight * self.grid.weight(k) * self.pen.g1(u[k] - self.target[k]);
        }
        g
    }

    pub fn barrier_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(barrier_on(&self.grid, u, &self.barrier_nodes, self.barrier_weight)?.gradient)
    }

    /// Gradient of the total over all nodes, including fixed ones.
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.barrier_gradient(u)?;
        for (a, b) in g.iter_mut().zip(self.lagrangian_gradient(u)) {
            *a += b;
        }
        for &k in &self.penalty_nodes {
            g[k] += self.penalty_weight * self.grid.weight(k) * self.pen.g1(u[k] - self.target[k]);
        }
        Ok(g)
    }

    /// Hessian of the total: the barrier part as an operator, the rest
    /// assembled.
    pub fn hessian(&self, u: &[f64]) -> Result<EnergyHessian> {
        let barrier = barrier_on(&self.grid, u, &self.barrier_nodes, self.barrier_weight)?;
        let n = self.grid.n_per_axis();
        let h = self.grid.spacing();
        let s = 0.5 / h;
        let mut trip = Vec::with_capacity(25 * self.lagrangian_nodes.len() + self.penalty_nodes.len());
        for &k in &self.lagrangian_nodes {
            let x = self.grid.coord(k);
            let p = central_gradient(u, k, n, h);
            let w = self.grid.weight(k);
            let fzz = self.model.d_zz(x, u[k], p);
            let fpz = self.model.d_pz(x, u[k], p);
            let fpp = self.model.d_pp(x, u[k], p);
            // (z, p0, p1) as linear maps of nodal values
            let rows: [&[(usize, f64)]; 3] = [
                &[(k, 1.0)],
                &[(k + 1, s), (k - 1, -s)],
                &[(k + n, s), (k - n, -s)],
            ];
            let m = [
                [fzz, fpz[0], fpz[1]],
                [fpz[0], fpp[0][0], fpp[0][1]],
                [fpz[1], fpp[1][0], fpp[1][1]],
            ];
            for a in 0..3 {
                for b in 0..3 {
                    if m[a][b] == 0.0 {
                        continue;
                    }
                    for &(ia, ca) in rows[a] {
                        for &(ib, cb) in rows[b] {
                            trip.push((ia, ib, w * m[a][b] * ca * cb));
                        }
                    }
                }
            }
        }
        for &k in &self.penalty_nodes {
            let v = self.penalty_weight * self.grid.weight(k) * self.pen.g2(u[k] - self.target[k]);
            trip.push((k, k, v));
        }
        Ok(EnergyHessian {
            assembled: CsrMatrix::from_triplets(self.grid.len(), trip),
            barrier,
        })
    }

    /// `sum_{P} w (u - target)^4`.
    pub fn penalty_quartic(&self, u: &[f64]) -> f64 {
        self.penalty_nodes
            .iter()
            .map(|&k| self.grid.weight(k) * (u[k] - self.target[k]).powi(4))
            .sum()
    }

    /// `(a / 2) sum_{P} w G'(d) d` with `d = u - target`.
    pub fn keyest_monitor(&self, u: &[f64]) -> f64 {
        0.5 * self.penalty_weight
            * self
                .penalty_nodes
                .iter()
                .map(|&k| {
                    let d = u[k] - self.target[k];
                    self.grid.weight(k) * self.pen.g1(d) * d
                })
                .sum::<f64>()
    }
}

/// Second derivative of a [`DiscreteEnergy`] at a point.
#[derive(Debug, Clone)]
pub struct EnergyHessian {
    pub assembled: CsrMatrix,
    pub barrier: BarrierEval,
}

impl EnergyHessian {
    /// `out += H v` over all nodes.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.assembled.mul_add(v, out);
        self.barrier.apply(v, out);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = self.assembled.diagonal();
        self.barrier.diagonal(&mut d);
        d
    }
}

/// Value and full gradient of the penalized energy at `eps`.
pub fn assemble_jeps(
    u: &ScalarField,
    model: Arc<dyn Lagrangian>,
    pen: Arc<PenaltyG>,
    phi_eps: &ScalarField,
    eps: f64,
) -> Result<(EnergyBreakdown, Vec<f64>)> {
    let energy = DiscreteEnergy::penalized(model, pen, phi_eps, eps)?;
    Ok((energy.value(&u.values)?, energy.gradient(&u.values)?))
}

/// `sum_{inner} h^2 F(x, u, D_h u)`.
pub fn plain_j(u: &ScalarField, model: &dyn Lagrangian) -> f64 {
    let grid = u.grid();
    let n = grid.n_per_axis();
    let h = grid.spacing();
    grid.mask_inner()
        .indices()
        .map(|k| {
            let p = central_gradient(&u.values, k, n, h);
            grid.weight(k) * model.value(grid.coord(k), u.values[k], p)
        })
        .sum()
}
