//! The parabolic system model and the L2 geometry of its spatial domain.
//!
//! The state obeys
//!
//! ```text
//! x_t = a1 x_z + a2 x_zz + a3 x + k_u b_u(z)^T u(t) + f(z,t)
//! y(t) = ∫ c(z) k_y x(z,t) dz
//! ```
//!
//! on `[α₁, α₂]` with Robin conditions `c x + d x_z = r` at both ends.
//! Spatial functions (actuator/sensor shapes, eigenfunctions, sampled
//! profiles) share the [`SpatialFunction`] trait so one inner product serves
//! all of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Domain {
    pub start: f64,
    pub end: f64,
}

impl From<[f64; 2]> for Domain {
    fn from(v: [f64; 2]) -> Self {
        Domain::new(v[0], v[1])
    }
}

impl From<Domain> for [f64; 2] {
    fn from(d: Domain) -> Self {
        [d.start, d.end]
    }
}

impl Domain {
    pub const fn new(start: f64, end: f64) -> Self {
        Domain { start, end }
    }

    /// `[0, π]`, the rod of the reference experiments.
    pub fn unit_rod() -> Self {
        Domain::new(0.0, std::f64::consts::PI)
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, z: f64) -> bool {
        let slack = 1e-12 * self.length().abs().max(1.0);
        z >= self.start - slack && z <= self.end + slack
    }

    fn same_as(&self, other: &Domain) -> bool {
        let tol = 1e-12 * self.length().abs().max(1.0);
        (self.start - other.start).abs() <= tol && (self.end - other.end).abs() <= tol
    }

    /// `n` equally spaced nodes including both endpoints.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let h = self.length() / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.end
                } else {
                    self.start + h * i as f64
                }
            })
            .collect()
    }
}

/// Robin coefficients `c x + d x_z = r` at the left (1) and right (2) ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub c1: f64,
    pub d1: f64,
    #[serde(default)]
    pub r1: f64,
    pub c2: f64,
    pub d2: f64,
    #[serde(default)]
    pub r2: f64,
}

impl BoundaryConditions {
    pub const fn dirichlet() -> Self {
        BoundaryConditions { c1: 1.0, d1: 0.0, r1: 0.0, c2: 1.0, d2: 0.0, r2: 0.0 }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.r1 == 0.0 && self.r2 == 0.0
    }

    pub fn is_dirichlet(&self) -> bool {
        self.d1 == 0.0 && self.d2 == 0.0
    }
}

/// Anything that can be evaluated as a function of `z`.
pub trait SpatialFunction: Sync {
    fn eval(&self, z: f64) -> f64;

    /// Interval outside of which the function vanishes (`None`: everywhere).
    fn support(&self) -> Option<(f64, f64)> {
        None
    }

    /// Value inside the support, ignoring edge conventions of [`eval`](Self::eval).
    fn eval_in_support(&self, z: f64) -> f64 {
        self.eval(z)
    }

    /// Location of a Dirac point functional, if this is one.
    fn point(&self) -> Option<f64> {
        None
    }

    /// Interval on which the function is defined, if restricted.
    fn domain(&self) -> Option<Domain> {
        None
    }
}

impl<F: Fn(f64) -> f64 + Sync> SpatialFunction for F {
    fn eval(&self, z: f64) -> f64 {
        self(z)
    }
}

/// Piecewise-linear interpolation on a monotone grid. `None` outside it.
pub fn interpolate(grid: &[f64], values: &[f64], z: f64) -> Option<f64> {
    let n = grid.len();
    if n == 0 || values.len() != n {
        return None;
    }
    let (lo, hi) = (grid[0], grid[n - 1]);
    let slack = 1e-12 * (hi - lo).abs().max(1.0);
    if z < lo - slack || z > hi + slack {
        return None;
    }
    if n == 1 {
        return Some(values[0]);
    }
    let z = z.clamp(lo, hi);
    let k = grid.partition_point(|&g| g <= z).clamp(1, n - 1);
    let (z0, z1) = (grid[k - 1], grid[k]);
    let w = if z1 > z0 { (z - z0) / (z1 - z0) } else { 0.0 };
    Some(values[k - 1] * (1.0 - w) + values[k] * w)
}

/// A profile tabulated on a monotone grid, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledProfile {
    pub z: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledProfile {
    pub fn new(z: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if z.len() != values.len() {
            return Err(Error::dim(format!(
                "{} nodes but {} values",
                z.len(),
                values.len()
            )));
        }
        if z.len() < 2 || z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sample grid must be strictly increasing with ≥ 2 nodes"));
        }
        Ok(SampledProfile { z, values })
    }
}

impl SpatialFunction for SampledProfile {
    fn eval(&self, z: f64) -> f64 {
        interpolate(&self.z, &self.values, z).unwrap_or(0.0)
    }

    fn domain(&self) -> Option<Domain> {
        Some(Domain::new(self.z[0], self.z[self.z.len() - 1]))
    }
}

/// Actuator, sensor, initial-profile and source shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapeFunction {
    /// `amplitude · sin(wavenumber · z)`.
    Sine { amplitude: f64, wavenumber: f64 },
    /// `amplitude · (H(z − from) − H(z − to))` with `H(0) = 1`.
    Window {
        from: f64,
        to: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Constant { value: f64 },
    /// Dirac point functional `δ(z − at)`.
    Point { at: f64 },
    Tabulated(SampledProfile),
}

fn one() -> f64 {
    1.0
}

impl ShapeFunction {
    pub fn zero() -> Self {
        ShapeFunction::Constant { value: 0.0 }
    }

    /// `b_f(z) = H(z − from) − H(z − to)`.
    pub fn window(from: f64, to: f64) -> Self {
        ShapeFunction::Window { from, to, amplitude: 1.0 }
    }

    pub fn point(at: f64) -> Self {
        ShapeFunction::Point { at }
    }

    /// Samples on a grid. A point functional samples as zero.
    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&z| self.eval(z)).collect()
    }
}

impl SpatialFunction for ShapeFunction {
    fn eval(&self, z: f64) -> f64 {
        match self {
            ShapeFunction::Sine { amplitude, wavenumber } => amplitude * (wavenumber * z).sin(),
            ShapeFunction::Window { from, to, amplitude } => {
                if z >= *from && z < *to {
                    *amplitude
                } else {
                    0.0
                }
            }
            ShapeFunction::Constant { value } => *value,
            ShapeFunction::Point { .. } => 0.0,
            ShapeFunction::Tabulated(p) => p.eval(z),
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match self {
            ShapeFunction::Window { from, to, .. } => Some((*from, *to)),
            _ => None,
        }
    }

    fn eval_in_support(&self, z: f64) -> f64 {
        match self {
            ShapeFunction::Window { amplitude, .. } => *amplitude,
            other => other.eval(z),
        }
    }

    fn point(&self) -> Option<f64> {
        match self {
            ShapeFunction::Point { at } => Some(*at),
            _ => None,
        }
    }

    fn domain(&self) -> Option<Domain> {
        match self {
            ShapeFunction::Tabulated(p) => p.domain(),
            _ => None,
        }
    }
}

/// Composite Simpson rule on an equispaced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    domain: Domain,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    /// `n` must be odd and at least 3.
    pub fn simpson(domain: Domain, n: usize) -> Result<Self> {
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::Quadrature(format!(
                "composite Simpson needs an odd node count ≥ 3, got {n}"
            )));
        }
        if domain.length().partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Quadrature("empty integration interval".into()));
        }
        let h = domain.length() / (n - 1) as f64;
        let weights = (0..n)
            .map(|i| {
                let c = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Ok(Quadrature { domain, nodes: domain.grid(n), weights })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }

    pub fn integrate_samples(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v.len())?;
        Ok(v.iter().zip(&self.weights).map(|(a, w)| a * w).sum())
    }

    /// `⟨a, b⟩` for two profiles sampled on the quadrature nodes.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_len(a.len())?;
        self.check_len(b.len())?;
        Ok(a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x * y * w).sum())
    }

    pub fn norm(&self, a: &[f64]) -> Result<f64> {
        Ok(self.dot(a, a)?.sqrt())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.nodes.len() {
            return Err(Error::dim(format!(
                "profile has {n} samples, quadrature has {} nodes",
                self.nodes.len()
            )));
        }
        Ok(())
    }

    /// Simpson rule on `[a, b] ⊂ domain` with roughly the same node spacing.
    fn restricted(&self, a: f64, b: f64) -> Quadrature {
        let frac = (b - a) / self.domain.length();
        let mut intervals = ((self.nodes.len() - 1) as f64 * frac).ceil() as usize;
        intervals = intervals.max(2);
        if intervals % 2 == 1 {
            intervals += 1;
        }
        Quadrature::simpson(Domain::new(a, b), intervals + 1).expect("nonempty subinterval")
    }
}

/// `⟨f, g⟩ = ∫ f g dz` over the quadrature domain.
///
/// Point functionals evaluate the other argument at their location; windows
/// are integrated over their support only, so edge jumps cost no accuracy.
pub fn inner_product(
    f: &dyn SpatialFunction,
    g: &dyn SpatialFunction,
    quad: &Quadrature,
) -> Result<f64> {
    let dom = quad.domain();
    for h in [f, g] {
        if let Some(d) = h.domain() {
            if !d.same_as(&dom) {
                return Err(Error::Quadrature(format!(
                    "profile defined on [{}, {}] but quadrature on [{}, {}]",
                    d.start, d.end, dom.start, dom.end
                )));
            }
        }
    }
    match (f.point(), g.point()) {
        (Some(_), Some(_)) => {
            return Err(Error::Quadrature("inner product of two point functionals".into()))
        }
        (Some(z), None) => return point_eval(g, z, dom),
        (None, Some(z)) => return point_eval(f, z, dom),
        (None, None) => {}
    }
    let (mut a, mut b) = (dom.start, dom.end);
    let mut restricted = false;
    for h in [f, g] {
        if let Some((lo, hi)) = h.support() {
            a = a.max(lo);
            b = b.min(hi);
            restricted = true;
        }
    }
    if !restricted {
        return Ok(quad.integrate(|z| f.eval(z) * g.eval(z)));
    }
    if b <= a {
        return Ok(0.0);
    }
    let sub = quad.restricted(a, b);
    Ok(sub.integrate(|z| f.eval_in_support(z) * g.eval_in_support(z)))
}

fn point_eval(h: &dyn SpatialFunction, z: f64, dom: Domain) -> Result<f64> {
    if !dom.contains(z) {
        return Err(Error::Quadrature(format!("point functional at {z} lies outside the domain")));
    }
    Ok(h.eval(z))
}

/// `‖f‖₂ = ⟨f, f⟩^{1/2}`.
pub fn l2_norm_profile(f: &dyn SpatialFunction, quad: &Quadrature) -> Result<f64> {
    if f.point().is_some() {
        return Err(Error::Quadrature("a point functional has no L2 norm".into()));
    }
    Ok(inner_product(f, f, quad)?.max(0.0).sqrt())
}

/// Samples of a scalar field: one row per time stamp, one column per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalField {
    z: Vec<f64>,
    t: Vec<f64>,
    values: Vec<f64>,
}

impl SpatioTemporalField {
    pub fn new(z: Vec<f64>, t: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != z.len() * t.len() {
            return Err(Error::dim(format!(
                "{} values for a {}×{} grid",
                values.len(),
                t.len(),
                z.len()
            )));
        }
        if z.windows(2).any(|w| w[1] <= w[0]) || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("field grids must be strictly increasing"));
        }
        Ok(SpatioTemporalField { z, t, values })
    }

    /// Builds a field row by row from a generator.
    pub fn from_fn<F: FnMut(usize, f64) -> Vec<f64>>(
        z: Vec<f64>,
        t: Vec<f64>,
        mut row: F,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(z.len() * t.len());
        for (k, &tk) in t.iter().enumerate() {
            let r = row(k, tk);
            if r.len() != z.len() {
                return Err(Error::dim(format!("row {k} has {} entries", r.len())));
            }
            values.extend(r);
        }
        SpatioTemporalField::new(z, t, values)
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_times(&self) -> usize {
        self.t.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.z.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.z.len();
        &self.values[k * n..(k + 1) * n]
    }

    /// Checks that the spatial grid spans exactly `domain`.
    pub fn check_domain(&self, domain: Domain) -> Result<()> {
        let n = self.z.len();
        if n == 0 || !Domain::new(self.z[0], self.z[n - 1]).same_as(&domain) {
            return Err(Error::invalid("field grid endpoints differ from the domain"));
        }
        Ok(())
    }

    /// Pointwise difference `self − other` on identical grids.
    pub fn sub(&self, other: &SpatioTemporalField) -> Result<SpatioTemporalField> {
        if self.z != other.z || self.t != other.t {
            return Err(Error::dim("fields live on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(SpatioTemporalField { z: self.z.clone(), t: self.t.clone(), values })
    }
}

/// The system `x_t = a1 x_z + a2 x_zz + a3 x + k_u b_uᵀu + f`, `y = ∫ c k_y x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSystem {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub k_u: f64,
    pub k_y: f64,
    pub actuators: Vec<ShapeFunction>,
    pub sensors: Vec<ShapeFunction>,
    pub domain: Domain,
    pub bc: BoundaryConditions,
    pub x0: ShapeFunction,
}

impl PdeSystem {
    /// The cooled rod `x_t = x_zz + β(b_u u − x) + f` on `[0, π]` with
    /// Dirichlet ends, actuator `√(2/π) sin z` and point thermocouples.
    pub fn heat_rod(beta_u: f64, sensor_positions: &[f64]) -> Self {
        PdeSystem {
            a1: 0.0,
            a2: 1.0,
            a3: -beta_u,
            k_u: beta_u,
            k_y: 1.0,
            actuators: vec![ShapeFunction::Sine {
                amplitude: (2.0 / std::f64::consts::PI).sqrt(),
                wavenumber: 1.0,
            }],
            sensors: sensor_positions.iter().map(|&z| ShapeFunction::point(z)).collect(),
            domain: Domain::unit_rod(),
            bc: BoundaryConditions::dirichlet(),
            x0: ShapeFunction::zero(),
        }
    }

    pub fn with_initial(mut self, x0: ShapeFunction) -> Self {
        self.x0 = x0;
        self
    }

    pub fn n_inputs(&self) -> usize {
        self.actuators.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.sensors.len()
    }

    /// Returns the system unchanged iff every invariant holds; otherwise
    /// reports the first one violated.
    pub fn validate(self) -> Result<Self> {
        let coeffs = [self.a1, self.a2, self.a3, self.k_u, self.k_y];
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite coefficient"));
        }
        if !(self.domain.start < self.domain.end) {
            return Err(Error::invalid(format!(
                "empty domain: α₁ = {} must be below α₂ = {}",
                self.domain.start, self.domain.end
            )));
        }
        if !(self.a2 > 0.0) {
            return Err(Error::invalid(format!("not parabolic: a2 = {} must be positive", self.a2)));
        }
        let bc = &self.bc;
        if bc.c1 == 0.0 && bc.d1 == 0.0 {
            return Err(Error::invalid("degenerate left BC: c1 = d1 = 0"));
        }
        if bc.c2 == 0.0 && bc.d2 == 0.0 {
            return Err(Error::invalid("degenerate right BC: c2 = d2 = 0"));
        }
        if self.actuators.is_empty() {
            return Err(Error::invalid("no actuator shape functions"));
        }
        if self.sensors.is_empty() {
            return Err(Error::invalid("no sensor shape functions"));
        }
        for s in &self.sensors {
            if let Some(z) = s.point() {
                if !self.domain.contains(z) {
                    return Err(Error::invalid(format!("point sensor at {z} outside the domain")));
                }
            }
        }
        if self.actuators.iter().any(|b| b.point().is_some()) {
            return Err(Error::invalid("point actuators are not supported"));
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn phi(j: f64) -> ShapeFunction {
        ShapeFunction::Sine { amplitude: (2.0 / PI).sqrt(), wavenumber: j }
    }

    fn quad() -> Quadrature {
        Quadrature::simpson(Domain::unit_rod(), 201).unwrap()
    }

    #[test]
    fn heat_rod_is_valid() {
        assert!(PdeSystem::heat_rod(2.0, &[PI / 4.0, 3.0 * PI / 4.0]).validate().is_ok());
    }

    #[test]
    fn zero_diffusion_is_not_parabolic() {
        let mut sys = PdeSystem::heat_rod(2.0, &[1.0]);
        sys.a2 = 0.0;
        let err = sys.validate().unwrap_err().to_string();
        assert!(err.contains("not parabolic"), "{err}");
    }

    #[test]
    fn degenerate_left_bc_rejected() {
        let mut sys = PdeSystem::heat_rod(2.0, &[1.0]);
        sys.bc.c1 = 0.0;
        sys.bc.d1 = 0.0;
        let err = sys.validate().unwrap_err().to_string();
        assert!(err.contains("degenerate left BC"), "{err}");
    }

    #[test]
    fn empty_sensor_list_rejected() {
        let sys = PdeSystem::heat_rod(2.0, &[]);
        assert!(sys.validate().is_err());
    }

    #[test]
    fn eigenfunction_inner_products() {
        let q = quad();
        assert!((inner_product(&phi(1.0), &phi(1.0), &q).unwrap() - 1.0).abs() < 1e-6);
        assert!(inner_product(&phi(1.0), &phi(2.0), &q).unwrap().abs() < 1e-6);
    }

    #[test]
    fn window_against_second_mode() {
        let bf = ShapeFunction::window(0.0, PI / 4.0);
        let expected = (2.0 / PI).sqrt() * (1.0 - (PI / 2.0).cos()) / 2.0;
        let got = inner_product(&bf, &phi(2.0), &quad()).unwrap();
        assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
        assert!((expected - 0.39894).abs() < 1e-5);
    }

    #[test]
    fn norms() {
        let q = quad();
        assert!((l2_norm_profile(&phi(1.0), &q).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(l2_norm_profile(&ShapeFunction::zero(), &q).unwrap(), 0.0);
        let bf = ShapeFunction::window(0.0, PI / 4.0);
        let n = l2_norm_profile(&bf, &q).unwrap();
        assert!((n - (PI / 4.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn even_simpson_rejected() {
        assert!(Quadrature::simpson(Domain::unit_rod(), 200).is_err());
        assert!(Quadrature::simpson(Domain::unit_rod(), 1).is_err());
    }

    #[test]
    fn mismatched_domain_rejected() {
        let p = SampledProfile::new(vec![0.0, 1.0, 2.0], vec![1.0; 3]).unwrap();
        assert!(inner_product(&p, &phi(1.0), &quad()).is_err());
    }

    #[test]
    fn point_functional_evaluates_other_side() {
        let v = inner_product(&ShapeFunction::point(PI / 4.0), &phi(2.0), &quad()).unwrap();
        assert!((v - (2.0 / PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn heaviside_convention_on_grid() {
        let bf = ShapeFunction::window(0.0, PI / 4.0);
        assert_eq!(bf.eval(0.0), 1.0);
        assert_eq!(bf.eval(PI / 4.0), 0.0);
    }

    #[test]
    fn interpolation_edges() {
        let g = [0.0, 1.0, 2.0];
        let v = [0.0, 10.0, 20.0];
        assert_eq!(interpolate(&g, &v, 1.5), Some(15.0));
        assert_eq!(interpolate(&g, &v, 2.0), Some(20.0));
        assert_eq!(interpolate(&g, &v, 2.5), None);
    }
}
