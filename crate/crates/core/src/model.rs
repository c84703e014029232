//! Lagrangians with their partial derivatives, growth envelopes, and the
//! penalty pair `(H, G)` built from the envelopes.
//!
//! For a Lagrangian `F(x, z, p)` whose derivatives are bounded by envelope
//! products `f_k(|z|) g_k(|p|)`, the penalty uses
//!
//! ```text
//! H(t) = t (1 + f0(t) g0(t) + f2(t) g2(t) + t f3(t) g3(t))
//! G(x) = int_0^{x^2} H(t) dt
//! ```
//!
//! which is even, convex and quartic at the origin.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::geometry::Point;
use crate::quadrature;

/// Regularization of `|p|` in the Rochet-Chone derivatives when `q < 2`.
pub const RC_REGULARIZATION: f64 = 1e-8;

/// Absolute tolerance of the quadrature-evaluated `G`.
pub const G_QUAD_ABS_TOL: f64 = 1e-12;
/// Relative tolerance guard for large `G` values.
pub const G_QUAD_REL_TOL: f64 = 1e-14;

/// One term `coef * t^power * exp(exp_sq * t^2)` of an envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub power: f64,
    pub exp_sq: f64,
}

impl Term {
    pub const fn new(coef: f64, power: f64, exp_sq: f64) -> Self {
        Self {
            coef,
            power,
            exp_sq,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let mut v = self.coef * t.powf(self.power);
        if self.exp_sq != 0.0 {
            v *= (self.exp_sq * t * t).exp();
        }
        v
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let poly = if self.power == 0.0 {
            0.0
        } else {
            self.power * t.powf(self.power - 1.0)
        };
        if self.exp_sq == 0.0 {
            return self.coef * poly;
        }
        let e = (self.exp_sq * t * t).exp();
        self.coef * (poly + 2.0 * self.exp_sq * t.powf(self.power + 1.0)) * e
    }

    fn times(&self, other: &Term) -> Term {
        Term::new(
            self.coef * other.coef,
            self.power + other.power,
            self.exp_sq + other.exp_sq,
        )
    }
}

/// A smooth, convex, nondecreasing function `[0, inf) -> [0, inf)` written
/// as a sum of [`Term`]s with nonnegative coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Envelope {
    terms: Vec<Term>,
}

impl Envelope {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if !(t.coef >= 0.0 && t.coef.is_finite()) {
                return Err(invalid("envelope", "coefficients must be finite and >= 0"));
            }
            // t^a with 0 < a < 1 is concave
            if !(t.power == 0.0 || t.power >= 1.0) {
                return Err(invalid("envelope", "powers must be 0 or >= 1"));
            }
            if !(t.exp_sq >= 0.0) {
                return Err(invalid("envelope", "exponential rates must be >= 0"));
            }
        }
        Ok(Self {
            terms: terms.into_iter().filter(|t| t.coef != 0.0).collect(),
        })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(&[c])
    }

    /// `sum_k coeffs[k] t^k`; coefficients must be nonnegative.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| Term::new(c, k as f64, 0.0))
            .collect();
        Self::new(terms).expect("polynomial envelope with negative coefficient")
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn value(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.value(t)).sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.derivative(t)).sum()
    }

    pub fn times(&self, other: &Envelope) -> Envelope {
        let terms = self
            .terms
            .iter()
            .flat_map(|a| other.terms.iter().map(move |b| a.times(b)))
            .collect();
        Envelope { terms }
    }

    /// Multiplies by `t^k`.
    fn shifted(&self, k: f64) -> Envelope {
        Envelope {
            terms: self
                .terms
                .iter()
                .map(|t| Term::new(t.coef, t.power + k, t.exp_sq))
                .collect(),
        }
    }

    pub fn has_exponential(&self) -> bool {
        self.terms.iter().any(|t| t.exp_sq != 0.0)
    }
}

/// Growth envelopes `f_k, g_k` for `k = 0..=3`.
///
/// `f[1], g[1]` bound the Hessian in `p`; they are kept for auditing only.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEnvelope {
    pub f: [Envelope; 4],
    pub g: [Envelope; 4],
}

impl GrowthEnvelope {
    pub fn product(&self, k: usize, z_abs: f64, p_abs: f64) -> f64 {
        self.f[k].value(z_abs) * self.g[k].value(p_abs)
    }

    /// All envelopes identically one.
    pub fn ones() -> Self {
        let one = Envelope::constant(1.0);
        Self {
            f: [one.clone(), one.clone(), one.clone(), one.clone()],
            g: [one.clone(), one.clone(), one.clone(), one],
        }
    }

    pub fn zeros() -> Self {
        let z = Envelope::zero();
        Self {
            f: [z.clone(), z.clone(), z.clone(), z.clone()],
            g: [z.clone(), z.clone(), z.clone(), z],
        }
    }
}

/// Smooth Lagrangian `F(x, z, p)` convex in `(z, p)`, with the partial
/// derivatives needed by the discrete energy and the Euler-Lagrange residual.
pub trait Lagrangian: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn value(&self, x: Point, z: f64, p: [f64; 2]) -> f64;
    fn d_z(&self, x: Point, z: f64, p: [f64; 2]) -> f64;
    fn d_zz(&self, x: Point, z: f64, p: [f64; 2]) -> f64;
    fn d_p(&self, x: Point, z: f64, p: [f64; 2]) -> [f64; 2];
    fn d_pp(&self, x: Point, z: f64, p: [f64; 2]) -> [[f64; 2]; 2];
    fn d_pz(&self, x: Point, z: f64, p: [f64; 2]) -> [f64; 2];
    /// `sum_i d^2 F / (d p_i d x_i)`.
    fn d_px_trace(&self, x: Point, z: f64, p: [f64; 2]) -> f64;
    fn envelope(&self) -> &GrowthEnvelope;
}

/// Weight function `gamma(x) >= 0` of the Rochet-Chone model.
#[derive(Debug, Clone, PartialEq)]
pub enum Gamma {
    Constant(f64),
    Table(BilinearTable),
}

impl Gamma {
    pub fn value(&self, x: Point) -> f64 {
        match self {
            Gamma::Constant(c) => *c,
            Gamma::Table(t) => t.value(x),
        }
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        match self {
            Gamma::Constant(_) => [0.0, 0.0],
            Gamma::Table(t) => t.gradient(x),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Gamma::Constant(c) => *c,
            Gamma::Table(t) => t.values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Upper bound on `|D gamma|`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Gamma::Constant(_) => 0.0,
            Gamma::Table(t) => t.lipschitz(),
        }
    }
}

/// Values on a regular grid, bilinearly interpolated and clamped outside.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearTable {
    origin: Point,
    spacing: [f64; 2],
    shape: [usize; 2],
    /// Row-major, `values[j * shape[0] + i]`.
    values: Vec<f64>,
}

impl BilinearTable {
    pub fn new(origin: Point, spacing: [f64; 2], shape: [usize; 2], values: Vec<f64>) -> Result<Self> {
        if shape[0] < 2 || shape[1] < 2 {
            return Err(invalid("gamma_table", "needs at least 2x2 values"));
        }
        if values.len() != shape[0] * shape[1] {
            return Err(invalid(
                "gamma_table",
                format!("expected {} values, got {}", shape[0] * shape[1], values.len()),
            ));
        }
        if !(spacing[0] > 0.0 && spacing[1] > 0.0) {
            return Err(invalid("gamma_table", "spacing must be positive"));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("gamma_table", "values must be finite and >= 0"));
        }
        Ok(Self {
            origin,
            spacing,
            shape,
            values,
        })
    }

    fn locate(&self, x: Point, axis: usize) -> (usize, f64) {
        let cells = (self.shape[axis] - 1) as f64;
        let s = ((x[axis] - self.origin[axis]) / self.spacing[axis]).clamp(0.0, cells);
        let i = (s.floor() as usize).min(self.shape[axis] - 2);
        (i, s - i as f64)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.shape[0] + i]
    }

    pub fn value(&self, x: Point) -> f64 {
        let (i, s) = self.locate(x, 0);
        let (j, t) = self.locate(x, 1);
        (1.0 - s) * (1.0 - t) * self.at(i, j)
            + s * (1.0 - t) * self.at(i + 1, j)
            + (1.0 - s) * t * self.at(i, j + 1)
            + s * t * self.at(i + 1, j + 1)
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        let inside = |axis: usize| {
            let s = (x[axis] - self.origin[axis]) / self.spacing[axis];
            s > 0.0 && s < (self.shape[axis] - 1) as f64
        };
        let (i, s) = self.locate(x, 0);
        let (j, t) = self.locate(x, 1);
        let (a, b, c, d) = (
            self.at(i, j),
            self.at(i + 1, j),
            self.at(i, j + 1),
            self.at(i + 1, j + 1),
        );
        let gx = if inside(0) {
            ((1.0 - t) * (b - a) + t * (d - c)) / self.spacing[0]
        } else {
            0.0
        };
        let gy = if inside(1) {
            ((1.0 - s) * (c - a) + s * (d - b)) / self.spacing[1]
        } else {
            0.0
        };
        [gx, gy]
    }

    fn lipschitz(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.shape[1] - 1 {
            for i in 0..self.shape[0] - 1 {
                let gx = ((self.at(i + 1, j) - self.at(i, j)).abs())
                    .max((self.at(i + 1, j + 1) - self.at(i, j + 1)).abs())
                    / self.spacing[0];
                let gy = ((self.at(i, j + 1) - self.at(i, j)).abs())
                    .max((self.at(i + 1, j + 1) - self.at(i + 1, j)).abs())
                    / self.spacing[1];
                m = m.max(gx.hypot(gy));
            }
        }
        m
    }
}

/// Rochet-Chone Lagrangian `F = (|p|^q / q - x . p + z) gamma(x)`.
#[derive(Debug, Clone)]
pub struct RochetChone {
    q: f64,
    gamma: Gamma,
    envelope: GrowthEnvelope,
}

/// Builds the Rochet-Chone model; `x_bound` bounds `|x|` over the domain.
pub fn rochet_chone(q: f64, gamma: Gamma, x_bound: f64) -> Result<RochetChone> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(invalid("q", format!("must satisfy q > 1, got {q}")));
    }
    if let Gamma::Constant(c) = gamma {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(invalid("gamma", "must be finite and >= 0"));
        }
    }
    if !(x_bound >= 0.0) {
        return Err(invalid("x_bound", "must be >= 0"));
    }
    let gmax = gamma.max();
    let lip = gamma.lipschitz();
    // |p|^(q-1) is majorized by itself when convex, otherwise by 1 + t.
    let growth = if q >= 2.0 {
        vec![Term::new(1.0, 0.0, 0.0), Term::new(1.0, q - 1.0, 0.0)]
    } else {
        vec![Term::new(2.0, 0.0, 0.0), Term::new(1.0, 1.0, 0.0)]
    };
    let scaled = |scale: f64, extra: f64| {
        let mut terms: Vec<Term> = growth
            .iter()
            .map(|t| Term::new(scale * t.coef, t.power, 0.0))
            .collect();
        terms.push(Term::new(scale * x_bound + extra, 0.0, 0.0));
        Envelope::new(terms)
    };
    let f0 = Envelope::polynomial(&[1.0, 1.0]);
    let g0 = scaled(gmax, 0.0)?;
    let (f1, g1) = if q >= 2.0 {
        let c = gmax * (q - 1.0).max(1.0);
        // t^a <= 1 + t for 0 < a < 1
        let a = q - 2.0;
        let terms = if a == 0.0 || a >= 1.0 {
            vec![Term::new(c, 0.0, 0.0), Term::new(c, a, 0.0)]
        } else {
            vec![Term::new(2.0 * c, 0.0, 0.0), Term::new(c, 1.0, 0.0)]
        };
        (Envelope::constant(1.0), Envelope::new(terms)?)
    } else {
        (
            Envelope::constant(1.0),
            Envelope::constant(gmax * RC_REGULARIZATION.powf(q - 2.0)),
        )
    };
    let f2 = Envelope::constant(1.0);
    let g2 = scaled(lip, 2.0 * gmax)?;
    let envelope = GrowthEnvelope {
        f: [f0, f1, f2, Envelope::zero()],
        g: [g0, g1, g2, Envelope::zero()],
    };
    Ok(RochetChone { q, gamma, envelope })
}

impl RochetChone {
    pub fn q(&self) -> f64 {
        self.q
    }

    /// `|p|` for the derivative callbacks, regularized when `q < 2`.
    fn radius(&self, p: [f64; 2]) -> f64 {
        let r2 = p[0] * p[0] + p[1] * p[1];
        if self.q < 2.0 {
            (r2 + RC_REGULARIZATION * RC_REGULARIZATION).sqrt()
        } else {
            r2.sqrt()
        }
    }

    /// `|p|^(q-2)` with `0^0 = 1`.
    fn scale(&self, p: [f64; 2]) -> f64 {
        self.radius(p).powf(self.q - 2.0)
    }
}

impl Lagrangian for RochetChone {
    fn name(&self) -> &str {
        "rochet_chone"
    }

    fn value(&self, x: Point, z: f64, p: [f64; 2]) -> f64 {
        let r = p[0].hypot(p[1]);
        (r.powf(self.q) / self.q - x[0] * p[0] - x[1] * p[1] + z) * self.gamma.value(x)
    }

    fn d_z(&self, x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        self.gamma.value(x)
    }

    fn d_zz(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }

    fn d_p(&self, x: Point, _z: f64, p: [f64; 2]) -> [f64; 2] {
        let s = self.scale(p);
        let g = self.gamma.value(x);
        [(s * p[0] - x[0]) * g, (s * p[1] - x[1]) * g]
    }

    fn d_pp(&self, x: Point, _z: f64, p: [f64; 2]) -> [[f64; 2]; 2] {
        let g = self.gamma.value(x);
        let r = self.radius(p);
        let s = self.scale(p);
        let (u0, u1) = if r > 0.0 { (p[0] / r, p[1] / r) } else { (0.0, 0.0) };
        let c = (self.q - 2.0) * s;
        [
            [g * (s + c * u0 * u0), g * c * u0 * u1],
            [g * c * u0 * u1, g * (s + c * u1 * u1)],
        ]
    }

    fn d_pz(&self, _x: Point, _z: f64, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn d_px_trace(&self, x: Point, _z: f64, p: [f64; 2]) -> f64 {
        let g = self.gamma.value(x);
        let dg = self.gamma.gradient(x);
        let s = self.scale(p);
        -2.0 * g + (s * p[0] - x[0]) * dg[0] + (s * p[1] - x[1]) * dg[1]
    }

    fn envelope(&self) -> &GrowthEnvelope {
        &self.envelope
    }
}

/// `F = exp(|p|^2)`, a Lagrangian without quadratic growth.
#[derive(Debug, Clone)]
pub struct ExpLagrangian {
    envelope: GrowthEnvelope,
}

pub fn exp_lagrangian() -> ExpLagrangian {
    let exp_poly = |c0: f64, c1: f64, c2: f64| {
        Envelope::new(vec![
            Term::new(c0, 0.0, 1.0),
            Term::new(c1, 1.0, 1.0),
            Term::new(c2, 2.0, 1.0),
        ])
        .expect("valid exp envelope")
    };
    let one = Envelope::constant(1.0);
    let envelope = GrowthEnvelope {
        f: [one.clone(), one, Envelope::zero(), Envelope::zero()],
        g: [
            exp_poly(2.0, 2.0, 0.0),
            exp_poly(2.0, 0.0, 4.0),
            Envelope::zero(),
            Envelope::zero(),
        ],
    };
    ExpLagrangian { envelope }
}

impl Lagrangian for ExpLagrangian {
    fn name(&self) -> &str {
        "exp"
    }

    fn value(&self, _x: Point, _z: f64, p: [f64; 2]) -> f64 {
        (p[0] * p[0] + p[1] * p[1]).exp()
    }

    fn d_z(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }

    fn d_zz(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }

    fn d_p(&self, _x: Point, _z: f64, p: [f64; 2]) -> [f64; 2] {
        let e = (p[0] * p[0] + p[1] * p[1]).exp();
        [2.0 * p[0] * e, 2.0 * p[1] * e]
    }

    fn d_pp(&self, _x: Point, _z: f64, p: [f64; 2]) -> [[f64; 2]; 2] {
        let e = (p[0] * p[0] + p[1] * p[1]).exp();
        [
            [e * (2.0 + 4.0 * p[0] * p[0]), e * 4.0 * p[0] * p[1]],
            [e * 4.0 * p[0] * p[1], e * (2.0 + 4.0 * p[1] * p[1])],
        ]
    }

    fn d_pz(&self, _x: Point, _z: f64, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn d_px_trace(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }

    fn envelope(&self) -> &GrowthEnvelope {
        &self.envelope
    }
}

/// `F = |p|^2 / 2`; with `phi = |x|^2/2` the constrained minimizer is known
/// in closed form.
#[derive(Debug, Clone)]
pub struct QuadraticLagrangian {
    envelope: GrowthEnvelope,
}

pub fn quadratic_lagrangian() -> QuadraticLagrangian {
    let one = Envelope::constant(1.0);
    QuadraticLagrangian {
        envelope: GrowthEnvelope {
            f: [one.clone(), one.clone(), Envelope::zero(), Envelope::zero()],
            g: [
                Envelope::polynomial(&[1.0, 1.0]),
                one,
                Envelope::zero(),
                Envelope::zero(),
            ],
        },
    }
}

impl Lagrangian for QuadraticLagrangian {
    fn name(&self) -> &str {
        "quadratic_test"
    }

    fn value(&self, _x: Point, _z: f64, p: [f64; 2]) -> f64 {
        0.5 * (p[0] * p[0] + p[1] * p[1])
    }

    fn d_z(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }

    fn d_zz(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }

    fn d_p(&self, _x: Point, _z: f64, p: [f64; 2]) -> [f64; 2] {
        p
    }

    fn d_pp(&self, _x: Point, _z: f64, _p: [f64; 2]) -> [[f64; 2]; 2] {
        [[1.0, 0.0], [0.0, 1.0]]
    }

    fn d_pz(&self, _x: Point, _z: f64, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn d_px_trace(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }

    fn envelope(&self) -> &GrowthEnvelope {
        &self.envelope
    }
}

/// `F = 0` with trivial envelopes, so that `H(t) = t`.
#[derive(Debug, Clone)]
pub struct ZeroLagrangian {
    envelope: GrowthEnvelope,
}

impl Default for ZeroLagrangian {
    fn default() -> Self {
        Self {
            envelope: GrowthEnvelope::zeros(),
        }
    }
}

impl Lagrangian for ZeroLagrangian {
    fn name(&self) -> &str {
        "zero"
    }
    fn value(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }
    fn d_z(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }
    fn d_zz(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }
    fn d_p(&self, _x: Point, _z: f64, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn d_pp(&self, _x: Point, _z: f64, _p: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0, 0.0], [0.0, 0.0]]
    }
    fn d_pz(&self, _x: Point, _z: f64, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn d_px_trace(&self, _x: Point, _z: f64, _p: [f64; 2]) -> f64 {
        0.0
    }
    fn envelope(&self) -> &GrowthEnvelope {
        &self.envelope
    }
}

/// The penalty pair `(H, G)`.
#[derive(Debug, Clone)]
pub struct PenaltyG {
    h_terms: Envelope,
    /// `G(x) = sum c |x|^e`, present when `H` has no exponential factor.
    antiderivative: Option<Vec<(f64, f64)>>,
}

/// Builds `(H, G)` from the growth envelopes.
pub fn build_penalty(env: &GrowthEnvelope) -> Result<PenaltyG> {
    let mut terms = vec![Term::new(1.0, 1.0, 0.0)];
    terms.extend_from_slice(env.f[0].times(&env.g[0]).shifted(1.0).terms());
    terms.extend_from_slice(env.f[2].times(&env.g[2]).shifted(1.0).terms());
    terms.extend_from_slice(env.f[3].times(&env.g[3]).shifted(2.0).terms());
    let h_terms = Envelope::new(terms)?;

    let antiderivative = if h_terms.has_exponential() {
        None
    } else {
        Some(
            h_terms
                .terms()
                .iter()
                .map(|t| (t.coef / (t.power + 1.0), 2.0 * (t.power + 1.0)))
                .collect(),
        )
    };
    let pen = PenaltyG {
        h_terms,
        antiderivative,
    };
    for x in [0.25, 0.5, 1.0, 2.0] {
        pen.try_g(x)?;
    }
    Ok(pen)
}

impl PenaltyG {
    pub fn h(&self, t: f64) -> f64 {
        // leading term is exactly t, so H(t) >= t survives rounding
        let mut acc = t;
        for term in &self.h_terms.terms()[1..] {
            acc += term.value(t);
        }
        acc
    }

    pub fn h_prime(&self, t: f64) -> f64 {
        self.h_terms.derivative(t)
    }

    pub fn is_closed_form(&self) -> bool {
        self.antiderivative.is_some()
    }

    /// `G(x)`, failing if the quadrature tolerance cannot be met.
    pub fn try_g(&self, x: f64) -> Result<f64> {
        match &self.antiderivative {
            Some(parts) => {
                let a = x.abs();
                Ok(parts.iter().map(|&(c, e)| c * a.powf(e)).sum())
            }
            None => quadrature::integrate(
                |t| self.h(t),
                0.0,
                x * x,
                G_QUAD_ABS_TOL,
                G_QUAD_REL_TOL,
            )
            .into_result(G_QUAD_ABS_TOL),
        }
    }

    /// `G(x)`; on quadrature failure returns the best available estimate.
    pub fn g(&self, x: f64) -> f64 {
        match self.try_g(x) {
            Ok(v) => v,
            Err(_) => {
                quadrature::integrate(|t| self.h(t), 0.0, x * x, G_QUAD_ABS_TOL, G_QUAD_REL_TOL)
                    .value
            }
        }
    }

    /// `G'(x) = 2 x H(x^2)`.
    pub fn g1(&self, x: f64) -> f64 {
        2.0 * x * self.h(x * x)
    }

    /// `G''(x) = 2 H(x^2) + 4 x^2 H'(x^2)`.
    pub fn g2(&self, x: f64) -> f64 {
        let t = x * x;
        2.0 * self.h(t) + 4.0 * t * self.h_prime(t)
    }

    /// `G'(x)` by a route that does not evaluate `2 x H(x^2)` directly: the
    /// derivative of the closed-form antiderivative, or otherwise
    /// `2x int_0^1 [H(x^2 s) + x^2 s H'(x^2 s)] ds` by quadrature.
    pub fn g1_independent(&self, x: f64) -> Result<f64> {
        match &self.antiderivative {
            Some(parts) => {
                let a = x.abs();
                let d: f64 = parts
                    .iter()
                    .map(|&(c, e)| c * e * a.powf(e - 1.0))
                    .sum();
                Ok(if x == 0.0 { 0.0 } else { d.copysign(x) })
            }
            None => {
                let t = x * x;
                let inner = quadrature::integrate(
                    |s| self.h(t * s) + t * s * self.h_prime(t * s),
                    0.0,
                    1.0,
                    G_QUAD_ABS_TOL,
                    G_QUAD_REL_TOL,
                )
                .into_result(G_QUAD_ABS_TOL)?;
                Ok(2.0 * x * inner)
            }
        }
    }
}

/// Worst-case outcome of the randomized envelope audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeAudit {
    pub samples: usize,
    /// Largest `lhs - bound` over all samples and all three inequalities.
    pub worst_excess: f64,
    pub hessian_psd: bool,
}

impl EnvelopeAudit {
    pub fn passed(&self) -> bool {
        self.worst_excess <= 0.0 && self.hessian_psd
    }
}

/// Samples `(x, z, p)` and checks the growth inequalities with no tolerance:
/// `|F_z| + max_i |F_pi| <= f0 g0`, `|tr F_px| <= f2 g2`,
/// `max_i |F_pz,i| <= f3 g3`, and `F_pp >= 0`.
pub fn audit_envelope(
    model: &dyn Lagrangian,
    x_bound: f64,
    samples: usize,
    seed: u64,
) -> EnvelopeAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = model.envelope();
    let mut worst = f64::NEG_INFINITY;
    let mut psd = true;
    for _ in 0..samples {
        let r = 0.999 * x_bound * rng.gen::<f64>().sqrt();
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let x = [r * th.cos(), r * th.sin()];
        let z = rng.gen_range(-10.0f64..10.0);
        let p = [rng.gen_range(-3.0f64..3.0), rng.gen_range(-3.0f64..3.0)];
        let (za, pa) = (z.abs(), p[0].hypot(p[1]));

        let fp = model.d_p(x, z, p);
        let lhs0 = model.d_z(x, z, p).abs() + fp[0].abs().max(fp[1].abs());
        worst = worst.max(lhs0 - env.product(0, za, pa));
        worst = worst.max(model.d_px_trace(x, z, p).abs() - env.product(2, za, pa));
        let fpz = model.d_pz(x, z, p);
        worst = worst.max(fpz[0].abs().max(fpz[1].abs()) - env.product(3, za, pa));

        let m = model.d_pp(x, z, p);
        if crate::geometry::min_eigenvalue(m[0][0], m[1][1], m[0][1]) < -1e-12 * (1.0 + m[0][0].abs()) {
            psd = false;
        }
    }
    EnvelopeAudit {
        samples,
        worst_excess: worst,
        hessian_psd: psd,
    }
}

/// The models shipped with the library, keyed by name.
pub fn builtin_models() -> Vec<Arc<dyn Lagrangian>> {
    vec![
        Arc::new(quadratic_lagrangian()),
        Arc::new(rochet_chone(2.0, Gamma::Constant(1.0), 1.0).expect("valid")),
        Arc::new(rochet_chone(1.5, Gamma::Constant(1.0), 1.0).expect("valid")),
        Arc::new(rochet_chone(3.0, Gamma::Constant(1.0), 1.0).expect("valid")),
        Arc::new(exp_lagrangian()),
        Arc::new(ZeroLagrangian::default()),
    ]
}
