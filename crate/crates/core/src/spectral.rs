//! Eigenpairs of the spatial operator `𝒜x = a1 x' + a2 x'' + a3 x` and
//! the slow/fast partition of its spectrum.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pde::{inner_product, Domain, PdeSystem, Quadrature, SampledProfile, SpatialFunction};

/// A unit-norm eigenfunction, either closed-form or tabulated.
#[derive(Debug, Clone, PartialEq)]
pub enum Eigenfunction {
    /// `amplitude · sin(wavenumber · z)`.
    Sine { amplitude: f64, wavenumber: f64 },
    Tabulated(SampledProfile),
}

impl SpatialFunction for Eigenfunction {
    fn eval(&self, z: f64) -> f64 {
        match self {
            Eigenfunction::Sine { amplitude, wavenumber } => amplitude * (wavenumber * z).sin(),
            Eigenfunction::Tabulated(p) => p.eval(z),
        }
    }

    fn domain(&self) -> Option<Domain> {
        match self {
            Eigenfunction::Sine { .. } => None,
            Eigenfunction::Tabulated(p) => p.domain(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub phi: Eigenfunction,
    /// 1-based mode index.
    pub index: usize,
}

/// `λ_j = −j² − β`, `φ_j = √(2/π) sin(jz)` for the Dirichlet rod on `[0, π]`.
pub fn dirichlet_eigenpairs(beta_u: f64, count: usize) -> Result<Vec<EigenPair>> {
    if count == 0 {
        return Err(Error::invalid("at least one eigenpair must be requested"));
    }
    let amplitude = (2.0 / PI).sqrt();
    Ok((1..=count)
        .map(|j| {
            let jf = j as f64;
            EigenPair {
                lambda: -jf * jf - beta_u,
                phi: Eigenfunction::Sine { amplitude, wavenumber: jf },
                index: j,
            }
        })
        .collect())
}

/// Closed-form eigenpairs when `sys` is the canonical rod
/// (`a1 = 0`, `a2 = 1`, homogeneous Dirichlet on `[0, π]`).
pub fn canonical_eigenpairs(sys: &PdeSystem, count: usize) -> Result<Vec<EigenPair>> {
    if !is_canonical_rod(sys) {
        return Err(Error::invalid(
            "closed-form eigenpairs need a1 = 0, a2 = 1 and homogeneous Dirichlet ends on [0, π]",
        ));
    }
    dirichlet_eigenpairs(-sys.a3, count)
}

pub fn is_canonical_rod(sys: &PdeSystem) -> bool {
    let dom = sys.domain;
    sys.a1 == 0.0
        && sys.a2 == 1.0
        && sys.bc.is_dirichlet()
        && sys.bc.is_homogeneous()
        && sys.bc.c1 != 0.0
        && sys.bc.c2 != 0.0
        && dom.start == 0.0
        && (dom.end - PI).abs() < 1e-12
}

/// Eigenpairs from a central-difference discretisation of `𝒜` on
/// `n_nodes` equispaced nodes.
///
/// Eigenvalues are Richardson-extrapolated against the half-resolution grid,
/// which lifts the O(h²) discretisation error to O(h⁴). Eigenvectors are
/// normalised to unit Simpson L2 norm, signed positive just inside the left
/// boundary, and sorted by descending eigenvalue.
pub fn numeric_eigenpairs(sys: &PdeSystem, count: usize, n_nodes: usize) -> Result<Vec<EigenPair>> {
    if !sys.bc.is_homogeneous() {
        return Err(Error::invalid("eigenproblem needs homogeneous boundary conditions"));
    }
    if count == 0 {
        return Err(Error::invalid("at least one eigenpair must be requested"));
    }
    if n_nodes < 9 || n_nodes.is_multiple_of(2) {
        return Err(Error::invalid(format!("eigen grid needs an odd node count ≥ 9, got {n_nodes}")));
    }
    if count > n_nodes / 4 {
        return Err(Error::invalid(format!(
            "{count} modes requested but a {n_nodes}-node grid resolves at most {}",
            n_nodes / 4
        )));
    }
    let fine = discrete_spectrum(sys, n_nodes)?;
    let coarse = discrete_spectrum(sys, n_nodes.div_ceil(2))?;
    let quad = Quadrature::simpson(sys.domain, n_nodes)?;
    let z = quad.nodes().to_vec();

    let mut pairs = Vec::with_capacity(count);
    for j in 0..count {
        let (lam_f, ref v) = fine[j];
        let lam_c = coarse[j].0;
        let lambda = (4.0 * lam_f - lam_c) / 3.0;
        let norm = quad.norm(v)?;
        if !(norm > 0.0) {
            return Err(Error::Numerical("zero eigenvector".into()));
        }
        let mut values: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let peak = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lead = values[1..]
            .iter()
            .copied()
            .find(|x| x.abs() > 1e-8 * peak)
            .unwrap_or(1.0);
        if lead < 0.0 {
            values.iter_mut().for_each(|x| *x = -*x);
        }
        pairs.push(EigenPair {
            lambda,
            phi: Eigenfunction::Tabulated(SampledProfile::new(z.clone(), values)?),
            index: j + 1,
        });
    }
    Ok(pairs)
}

/// Sorted (descending) eigenvalues with eigenvectors on the full grid.
fn discrete_spectrum(sys: &PdeSystem, n: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let h = sys.domain.length() / (n - 1) as f64;
    let lower = sys.a2 / (h * h) - sys.a1 / (2.0 * h);
    let upper = sys.a2 / (h * h) + sys.a1 / (2.0 * h);
    let centre = -2.0 * sys.a2 / (h * h) + sys.a3;
    let bc = sys.bc;

    let first = if bc.d1 == 0.0 { 1 } else { 0 };
    let last = if bc.d2 == 0.0 { n - 2 } else { n - 1 };
    let size = last - first + 1;

    let mut diag = vec![centre; size];
    let mut sup = vec![upper; size.saturating_sub(1)];
    let mut sub = vec![lower; size.saturating_sub(1)];
    if bc.d1 != 0.0 {
        // ghost node x₋₁ = x₁ + 2h(c1/d1)x₀
        diag[0] += lower * 2.0 * h * bc.c1 / bc.d1;
        sup[0] += lower;
    }
    if bc.d2 != 0.0 {
        // ghost node x_{N+1} = x_{N−1} − 2h(c2/d2)x_N
        diag[size - 1] -= upper * 2.0 * h * bc.c2 / bc.d2;
        sub[size - 2] += upper;
    }

    // Diagonal similarity D T D⁻¹ makes T symmetric when sub·sup > 0.
    let mut scale = vec![1.0; size];
    for i in 0..size - 1 {
        let prod = sub[i] * sup[i];
        if !(prod > 0.0) {
            return Err(Error::Numerical(
                "discretised operator is not similar to a symmetric one; complex eigenvalues possible"
                    .into(),
            ));
        }
        scale[i + 1] = scale[i] * (sup[i] / sub[i]).sqrt();
    }
    let mut s = DMatrix::<f64>::zeros(size, size);
    for i in 0..size {
        s[(i, i)] = diag[i];
        if i + 1 < size {
            let off = (sub[i] * sup[i]).sqrt();
            s[(i, i + 1)] = off;
            s[(i + 1, i)] = off;
        }
    }
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    Ok(order
        .into_iter()
        .map(|k| {
            let w = eig.eigenvectors.column(k);
            let mut full = vec![0.0; n];
            for i in 0..size {
                full[first + i] = w[i] / scale[i];
            }
            (eig.eigenvalues[k], full)
        })
        .collect())
}

/// `(⟨profile, φ₁⟩, …, ⟨profile, φ_m⟩)`.
pub fn project_onto_modes(
    profile: &dyn SpatialFunction,
    basis: &[EigenPair],
    quad: &Quadrature,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(basis.len());
    for (i, pair) in basis.iter().enumerate() {
        out[i] = inner_product(profile, &pair.phi, quad)?;
    }
    Ok(out)
}

/// A modal basis tabulated on quadrature nodes, for projecting many sampled
/// profiles cheaply.
#[derive(Debug, Clone)]
pub struct SampledBasis {
    quad: Quadrature,
    phi: Vec<Vec<f64>>,
}

impl SampledBasis {
    pub fn new(basis: &[EigenPair], quad: Quadrature) -> Self {
        let phi = basis
            .iter()
            .map(|p| quad.nodes().iter().map(|&z| p.phi.eval(z)).collect())
            .collect();
        SampledBasis { quad, phi }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    pub fn mode(&self, i: usize) -> &[f64] {
        &self.phi[i]
    }

    pub fn project(&self, samples: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.phi.len());
        for (i, p) in self.phi.iter().enumerate() {
            out[i] = self.quad.dot(samples, p)?;
        }
        Ok(out)
    }

    /// `φᵀ(z) c` on the quadrature nodes.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.quad.len()];
        for (c, p) in coeffs.iter().zip(&self.phi) {
            for (o, v) in out.iter_mut().zip(p) {
                *o += c * v;
            }
        }
        out
    }
}

/// Slow modes, a few retained fast modes, and the gap ratio ε.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPartition {
    pub slow: Vec<EigenPair>,
    pub fast_head: Vec<EigenPair>,
    pub m: usize,
    /// `|Re λ₁| / |Re λ_{m+1}|`.
    pub epsilon: f64,
}

impl SpectrumPartition {
    pub fn slow_eigenvalues(&self) -> Vec<f64> {
        self.slow.iter().map(|p| p.lambda).collect()
    }
}

/// Partition with `k = 2m` retained fast modes (or as many as are available).
pub fn spectral_gap(eigs: &[EigenPair], m: usize) -> Result<SpectrumPartition> {
    spectral_gap_with(eigs, m, 2 * m)
}

pub fn spectral_gap_with(eigs: &[EigenPair], m: usize, k: usize) -> Result<SpectrumPartition> {
    if m == 0 {
        return Err(Error::invalid("slow order m must be positive"));
    }
    if eigs.len() < m + 1 {
        return Err(Error::invalid(format!(
            "{} eigenpairs available, m + 1 = {} needed",
            eigs.len(),
            m + 1
        )));
    }
    if eigs.windows(2).any(|w| w[1].lambda > w[0].lambda) {
        return Err(Error::invalid("eigenvalues must be sorted by descending real part"));
    }
    let next = eigs[m].lambda;
    if !(next < 0.0) {
        return Err(Error::Structure(format!(
            "unstable fast spectrum: Re λ_{} = {next} is not negative",
            m + 1
        )));
    }
    let epsilon = eigs[0].lambda.abs() / next.abs();
    if !(epsilon < 1.0) {
        return Err(Error::Structure(format!("no spectral gap: ε = {epsilon} is not below 1")));
    }
    let end = (m + k).min(eigs.len());
    Ok(SpectrumPartition {
        slow: eigs[..m].to_vec(),
        fast_head: eigs[m..end].to_vec(),
        m,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{ShapeFunction, Domain};

    fn rod() -> PdeSystem {
        PdeSystem::heat_rod(2.0, &[PI / 4.0, 3.0 * PI / 4.0])
    }

    fn quad() -> Quadrature {
        Quadrature::simpson(Domain::unit_rod(), 201).unwrap()
    }

    #[test]
    fn closed_form_eigenvalues() {
        let e = dirichlet_eigenpairs(2.0, 3).unwrap();
        assert_eq!(e.iter().map(|p| p.lambda).collect::<Vec<_>>(), vec![-3.0, -6.0, -11.0]);
        assert_eq!(dirichlet_eigenpairs(0.0, 1).unwrap()[0].lambda, -1.0);
        assert!(dirichlet_eigenpairs(2.0, 0).is_err());
    }

    #[test]
    fn canonical_check_rejects_advection() {
        let mut sys = rod();
        sys.a1 = 0.5;
        assert!(canonical_eigenpairs(&sys, 2).is_err());
        assert!(canonical_eigenpairs(&rod(), 2).is_ok());
    }

    #[test]
    fn numeric_matches_closed_form() {
        let num = numeric_eigenpairs(&rod(), 4, 401).unwrap();
        let exact = dirichlet_eigenpairs(2.0, 4).unwrap();
        for (a, b) in num.iter().zip(&exact) {
            assert!((a.lambda - b.lambda).abs() < 1e-3, "{} vs {}", a.lambda, b.lambda);
            let z = Domain::unit_rod().grid(401);
            let sup = z.iter().map(|&x| (a.phi.eval(x) - b.phi.eval(x)).abs()).fold(0.0, f64::max);
            assert!(sup < 1e-3, "mode {} sup error {sup}", a.index);
        }
    }

    #[test]
    fn numeric_resolution_guard() {
        assert!(numeric_eigenpairs(&rod(), 101, 401).is_err());
    }

    #[test]
    fn numeric_rejects_inhomogeneous_bc() {
        let mut sys = rod();
        sys.bc.r1 = 1.0;
        assert!(numeric_eigenpairs(&sys, 2, 401).is_err());
    }

    #[test]
    fn numeric_neumann_rod() {
        // x'' on [0, π] with x'(0) = x'(π) = 0: λ_j = −(j−1)², φ₁ constant.
        let mut sys = rod();
        sys.a3 = 0.0;
        sys.bc = crate::pde::BoundaryConditions { c1: 0.0, d1: 1.0, r1: 0.0, c2: 0.0, d2: 1.0, r2: 0.0 };
        let e = numeric_eigenpairs(&sys, 3, 401).unwrap();
        assert!(e[0].lambda.abs() < 1e-8);
        assert!((e[1].lambda + 1.0).abs() < 1e-4);
        assert!((e[2].lambda + 4.0).abs() < 1e-4);
        assert!((e[0].phi.eval(1.0) - 1.0 / PI.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn projections() {
        let basis = dirichlet_eigenpairs(2.0, 2).unwrap();
        let q = quad();
        let p = project_onto_modes(&basis[0].phi, &basis, &q).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-8 && p[1].abs() < 1e-8);

        let ku_bu = ShapeFunction::Sine { amplitude: 2.0 * (2.0 / PI).sqrt(), wavenumber: 1.0 };
        let p = project_onto_modes(&ku_bu, &basis, &q).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-8 && p[1].abs() < 1e-8);

        let bf = ShapeFunction::window(0.0, PI / 4.0);
        let p = project_onto_modes(&bf, &basis, &q).unwrap();
        let c = |j: f64| (2.0 / PI).sqrt() * (1.0 - (j * PI / 4.0).cos()) / j;
        assert!((p[0] - c(1.0)).abs() < 1e-8);
        assert!((p[1] - c(2.0)).abs() < 1e-8);
        assert!((p[0] - 0.23369).abs() < 1e-5 && (p[1] - 0.39894).abs() < 1e-5);
    }

    #[test]
    fn gap_ratio() {
        let e = dirichlet_eigenpairs(2.0, 6).unwrap();
        let p = spectral_gap(&e, 2).unwrap();
        assert!((p.epsilon - 3.0 / 11.0).abs() < 1e-15);
        assert!((p.epsilon - 0.273).abs() < 1e-3);
        assert_eq!(p.fast_head.len(), 4);
        assert!((spectral_gap(&e, 1).unwrap().epsilon - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gap_rejects_neutral_fast_mode() {
        let mut e = dirichlet_eigenpairs(2.0, 3).unwrap();
        e[0].lambda = 1.0;
        e[1].lambda = 0.5;
        e[2].lambda = 0.0;
        assert!(spectral_gap(&e, 2).is_err());
    }
}
