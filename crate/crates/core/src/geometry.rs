//! Computational domains, the masked Cartesian grid and the lifted boundary data.
//!
//! The outer domain is a disk, which admits the closed-form uniformly convex
//! defining function `rho(x) = (|x - c|^2 - R^2) / (2R)`. The curved boundary
//! is represented by a staircase Dirichlet layer: every node inside the disk
//! that has an 8-neighbor outside of it is pinned to the boundary data.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

/// Minimum number of grid nodes per axis.
pub const MIN_NODES_PER_AXIS: usize = 9;

/// Convex boundary data `phi` together with its first and second derivatives.
pub trait BoundaryData: Send + Sync + fmt::Debug {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> [f64; 2];
    fn hessian(&self, x: Point) -> [[f64; 2]; 2];
}

/// `phi(x) = (a/2)|x|^2 + b . x + c`, convex whenever `a >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticData {
    pub curvature: f64,
    pub slope: [f64; 2],
    pub offset: f64,
}

impl QuadraticData {
    pub fn new(curvature: f64, slope: [f64; 2], offset: f64) -> Self {
        Self {
            curvature,
            slope,
            offset,
        }
    }

    /// `|x|^2 / 2`.
    pub fn half_norm_squared() -> Self {
        Self::new(1.0, [0.0, 0.0], 0.0)
    }
}

impl BoundaryData for QuadraticData {
    fn value(&self, x: Point) -> f64 {
        0.5 * self.curvature * (x[0] * x[0] + x[1] * x[1])
            + self.slope[0] * x[0]
            + self.slope[1] * x[1]
            + self.offset
    }

    fn gradient(&self, x: Point) -> [f64; 2] {
        [
            self.curvature * x[0] + self.slope[0],
            self.curvature * x[1] + self.slope[1],
        ]
    }

    fn hessian(&self, _x: Point) -> [[f64; 2]; 2] {
        [[self.curvature, 0.0], [0.0, self.curvature]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, x: Point) -> bool {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        dx * dx + dy * dy < self.radius * self.radius
    }

    /// Signed distance to the circle, positive inside.
    pub fn depth(&self, x: Point) -> f64 {
        self.radius - (x[0] - self.center[0]).hypot(x[1] - self.center[1])
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }
}

/// Shape of the inner region where the Lagrangian acts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerShape {
    Disk { center: Point, radius: f64 },
    /// Axis-aligned square given by its center and half side length.
    Square { center: Point, half_width: f64 },
}

impl InnerShape {
    pub fn contains(&self, x: Point) -> bool {
        match *self {
            InnerShape::Disk { center, radius } => Disk { center, radius }.contains(x),
            InnerShape::Square { center, half_width } => {
                (x[0] - center[0]).abs() < half_width && (x[1] - center[1]).abs() < half_width
            }
        }
    }

    /// Largest distance from the outer center to a point of the closed shape.
    fn reach_from(&self, c: Point) -> f64 {
        match *self {
            InnerShape::Disk { center, radius } => {
                (center[0] - c[0]).hypot(center[1] - c[1]) + radius
            }
            InnerShape::Square { center, half_width } => {
                let fx = (center[0] - c[0]).abs() + half_width;
                let fy = (center[1] - c[1]).abs() + half_width;
                fx.hypot(fy)
            }
        }
    }
}

/// Outer disk, inner region and convex boundary data.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub outer: Disk,
    pub inner: InnerShape,
    pub boundary: Arc<dyn BoundaryData>,
}

impl DomainSpec {
    pub fn new(outer: Disk, inner: InnerShape, boundary: Arc<dyn BoundaryData>) -> Result<Self> {
        if !(outer.radius > 0.0 && outer.radius.is_finite()) {
            return Err(invalid("outer_radius", "must be positive and finite"));
        }
        match inner {
            InnerShape::Disk { radius, .. } if !(radius > 0.0) => {
                return Err(invalid("inner_radius", "must be positive"))
            }
            InnerShape::Square { half_width, .. } if !(half_width > 0.0) => {
                return Err(invalid("inner_half_width", "must be positive"))
            }
            _ => {}
        }
        let margin = outer.radius - inner.reach_from(outer.center);
        if !(margin > 0.0) {
            return Err(Error::NotContained { margin });
        }
        Ok(Self {
            outer,
            inner,
            boundary,
        })
    }

    /// Unit disk, concentric inner disk of radius `r0`, `phi = |x|^2/2`.
    pub fn unit_disk(r0: f64) -> Result<Self> {
        Self::new(
            Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            InnerShape::Disk {
                center: [0.0, 0.0],
                radius: r0,
            },
            Arc::new(QuadraticData::half_norm_squared()),
        )
    }

    pub fn defining_function(&self) -> DefiningFunction {
        DefiningFunction { disk: self.outer }
    }

    /// `sup` of `phi` over the boundary circle, sampled densely.
    pub fn sup_boundary_phi(&self) -> f64 {
        self.boundary_samples().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sup` of `|phi|` over the boundary circle, sampled densely.
    pub fn sup_boundary_abs_phi(&self) -> f64 {
        self.boundary_samples().map(f64::abs).fold(0.0, f64::max)
    }

    fn boundary_samples(&self) -> impl Iterator<Item = f64> + '_ {
        const SAMPLES: usize = 4096;
        let Disk { center, radius } = self.outer;
        (0..SAMPLES).map(move |k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / SAMPLES as f64;
            self.boundary.value([
                center[0] + radius * theta.cos(),
                center[1] + radius * theta.sin(),
            ])
        })
    }
}

/// Uniformly convex defining function of a disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefiningFunction {
    disk: Disk,
}

impl DefiningFunction {
    pub fn value(&self, x: Point) -> f64 {
        let Disk { center, radius } = self.disk;
        let dx = x[0] - center[0];
        let dy = x[1] - center[1];
        (dx * dx + dy * dy - radius * radius) / (2.0 * radius)
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        let Disk { center, radius } = self.disk;
        [(x[0] - center[0]) / radius, (x[1] - center[1]) / radius]
    }

    /// The Hessian is `I / R` everywhere.
    pub fn hessian_scale(&self) -> f64 {
        1.0 / self.disk.radius
    }
}

/// Node selection over a [`Grid`].
#[derive(Clone, PartialEq, Eq)]
pub struct Mask(Vec<bool>);

impl Mask {
    pub fn from_fn(len: usize, f: impl FnMut(usize) -> bool) -> Self {
        Mask((0..len).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> bool {
        self.0[k]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn none(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    /// Selected node indices in increasing order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k)
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| !a || b)
    }

    pub fn and(&self, other: &Mask) -> Mask {
        Mask(self.0.iter().zip(&other.0).map(|(&a, &b)| a && b).collect())
    }

    pub fn and_not(&self, other: &Mask) -> Mask {
        Mask(self.0.iter().zip(&other.0).map(|(&a, &b)| a && !b).collect())
    }
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mask({} of {})", self.count(), self.len())
    }
}

/// Masked Cartesian discretization of the outer disk.
///
/// Nodes are stored row-major: node `(i, j)` has index `j * n + i` and
/// coordinates `(c0 - R + i h, c1 - R + j h)`.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: DomainSpec,
    n: usize,
    h: f64,
    coords: Vec<Point>,
    inside: Mask,
    interior: Mask,
    boundary: Mask,
    inner: Mask,
    weights: Vec<f64>,
}

impl Grid {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn coord(&self, k: usize) -> Point {
        self.coords[k]
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n, k / self.n)
    }

    /// Nodes strictly inside the outer disk.
    pub fn mask_inside(&self) -> &Mask {
        &self.inside
    }

    /// Nodes inside the disk whose 8 neighbors are all inside.
    pub fn mask_interior(&self) -> &Mask {
        &self.interior
    }

    /// Dirichlet layer: inside nodes that are not interior.
    pub fn mask_boundary(&self) -> &Mask {
        &self.boundary
    }

    /// Nodes of the inner region.
    pub fn mask_inner(&self) -> &Mask {
        &self.inner
    }

    /// Interior nodes outside the inner region.
    pub fn mask_outer_free(&self) -> Mask {
        self.interior.and_not(&self.inner)
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Distance from node `k` to the outer circle (positive inside).
    pub fn depth(&self, k: usize) -> f64 {
        self.spec.outer.depth(self.coords[k])
    }

    /// Smallest distance from an inner node to the outer circle.
    pub fn inner_boundary_distance(&self) -> f64 {
        self.inner
            .indices()
            .map(|k| self.depth(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Samples a function of position at every node.
    pub fn sample(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.coords.iter().map(|&x| f(x)).collect()
    }

    /// The 8 neighbors of an interior or boundary-layer node.
    #[cfg(test)]
    pub(crate) fn neighbors8(&self, k: usize) -> [usize; 8] {
        let n = self.n;
        [
            k - 1,
            k + 1,
            k - n,
            k + n,
            k - n - 1,
            k - n + 1,
            k + n - 1,
            k + n + 1,
        ]
    }
}

/// Builds the masked grid over the bounding box of the outer disk.
pub fn build_grid(spec: &DomainSpec, n_per_axis: usize) -> Result<Grid> {
    if n_per_axis < MIN_NODES_PER_AXIS {
        return Err(invalid(
            "n_per_axis",
            format!("must be at least {MIN_NODES_PER_AXIS}, got {n_per_axis}"),
        ));
    }
    let n = n_per_axis;
    let Disk { center, radius } = spec.outer;
    let h = 2.0 * radius / (n - 1) as f64;
    let origin = [center[0] - radius, center[1] - radius];

    let coords: Vec<Point> = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            [origin[0] + i as f64 * h, origin[1] + j as f64 * h]
        })
        .collect();

    let inside = Mask::from_fn(n * n, |k| spec.outer.contains(coords[k]));
    let interior = Mask::from_fn(n * n, |k| {
        let (i, j) = (k % n, k / n);
        if !inside.get(k) || i == 0 || j == 0 || i == n - 1 || j == n - 1 {
            return false;
        }
        [k - 1, k + 1, k - n, k + n, k - n - 1, k - n + 1, k + n - 1, k + n + 1]
            .iter()
            .all(|&m| inside.get(m))
    });
    let boundary = inside.and_not(&interior);
    let inner = Mask::from_fn(n * n, |k| inside.get(k) && spec.inner.contains(coords[k]));

    if inner.none() {
        return Err(Error::ResolutionTooCoarse(
            "no grid node falls inside the inner region".into(),
        ));
    }
    if !inner.is_subset_of(&interior) {
        return Err(Error::ResolutionTooCoarse(
            "inner region reaches the Dirichlet layer".into(),
        ));
    }

    for k in inside.indices() {
        let hess = spec.boundary.hessian(coords[k]);
        let min_eig = min_eigenvalue(hess[0][0], hess[1][1], hess[0][1]);
        if min_eig < -1e-12 {
            return Err(Error::NonConvexData {
                x: coords[k][0],
                y: coords[k][1],
                min_eig,
            });
        }
    }

    let weights = (0..n * n)
        .map(|k| if inside.get(k) { h * h } else { 0.0 })
        .collect();

    Ok(Grid {
        spec: spec.clone(),
        n,
        h,
        coords,
        inside,
        interior,
        boundary,
        inner,
        weights,
    })
}

/// Smaller eigenvalue of the symmetric matrix `[[a, b], [b, c]]`.
pub fn min_eigenvalue(a: f64, c: f64, b: f64) -> f64 {
    let mean = 0.5 * (a + c);
    let radius = (0.5 * (a - c)).hypot(b);
    mean - radius
}

/// `phi_eps(x) = phi(x) + eps^(1/(3 n^2)) (e^rho(x) - 1)`.
pub fn lifted_boundary(
    spec: &DomainSpec,
    rho: DefiningFunction,
    eps: f64,
    dim: usize,
) -> Result<impl Fn(Point) -> f64 + Send + Sync> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps", format!("must lie in (0, 1), got {eps}")));
    }
    if dim < 2 {
        return Err(invalid("dim", format!("must be at least 2, got {dim}")));
    }
    let lift = lift_amplitude(eps, dim);
    let phi = Arc::clone(&spec.boundary);
    Ok(move |x: Point| phi.value(x) + lift * rho.value(x).exp_m1())
}

/// `eps^(1/(3 n^2))`.
pub fn lift_amplitude(eps: f64, dim: usize) -> f64 {
    eps.powf(1.0 / (3.0 * (dim * dim) as f64))
}

/// Nodes at distance at least `margin` from the outer circle.
pub fn compact_subset_mask(grid: &Grid, margin: f64) -> Result<Mask> {
    if !(margin >= 2.0 * grid.spacing()) {
        return Err(invalid(
            "margin",
            format!(
                "must be at least 2h = {:.4}, got {margin}",
                2.0 * grid.spacing()
            ),
        ));
    }
    // a margin of R or more leaves at most the center, a set with no interior
    if margin >= grid.spec().outer.radius {
        return Err(Error::EmptyMask(format!(
            "margin {margin} reaches the center of the outer disk"
        )));
    }
    let mask = Mask::from_fn(grid.len(), |k| {
        grid.mask_inside().get(k) && grid.depth(k) >= margin
    });
    if mask.none() {
        return Err(Error::EmptyMask(format!("no node at distance >= {margin}")));
    }
    Ok(mask)
}
