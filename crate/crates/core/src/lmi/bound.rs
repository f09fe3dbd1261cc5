use nalgebra::DMatrix;

use super::{assemble_xi, lambda_max, lambda_min, DesignProblem, DesignSolution};
use crate::error::{Error, Result};

/// Disturbance magnitudes entering the ultimate bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    /// Bound on `‖ḟ_s‖²`.
    pub f1: f64,
    /// Bound on `‖f(·,t)‖₂²`.
    pub f2: f64,
    /// `‖y_f‖_peak`.
    pub yf_peak: f64,
    /// `‖ẏ_f‖_peak`.
    pub dyf_peak: f64,
    pub gamma: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltimateBound {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon2: f64,
    pub rho: f64,
    /// `ρ + √f₂`, the bound on the spatial source error.
    pub rho_plus: f64,
}

pub fn ultimate_bound(prob: &DesignProblem, sol: &DesignSolution, b: &BoundParams) -> Result<UltimateBound> {
    for (name, v) in [("f1", b.f1), ("f2", b.f2), ("yf_peak", b.yf_peak), ("dyf_peak", b.dyf_peak)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} = {v} must be finite and nonnegative")));
        }
    }
    let m = prob.m();
    if b.gamma.shape() != (m, m) {
        return Err(Error::dim(format!("Γ is {:?}, expected {m}×{m}", b.gamma.shape())));
    }
    let xi = assemble_xi(prob, sol)?;
    let top = lambda_max(&xi);
    if !(top < 0.0) {
        return Err(Error::invalid(format!("solution is not certified: λ_max(Ξ) = {top:.3e}")));
    }
    let inv = |a: &DMatrix<f64>, name: &str| {
        a.clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::invalid(format!("{name} is not positive definite")))
    };
    let gamma_inv = inv(&b.gamma, "Γ")?;
    let g1_inv = inv(&sol.g1, "G1")?;
    let g2_inv = inv(&sol.g2, "G2")?;
    let s = prob.sigma;

    let alpha = -top / lambda_max(&sol.p).max(lambda_max(&gamma_inv) / s);
    let beta = prob.mu1 / s * b.f1 * lambda_max(&(&gamma_inv * &g1_inv * &gamma_inv));
    let epsilon2 = prob.mu2 / s * lambda_max(&(sol.f.transpose() * &g2_inv * &sol.f)).max(0.0);
    let floor = lambda_min(&sol.p).min(lambda_min(&gamma_inv) / s);
    if !(floor > 0.0) {
        return Err(Error::invalid("P must be positive definite"));
    }
    let rho = (1.0 / floor).sqrt()
        * ((beta / alpha).sqrt()
            + (sol.epsilon1 / alpha).sqrt() * b.yf_peak
            + (epsilon2 / alpha).sqrt() * b.dyf_peak);
    Ok(UltimateBound { alpha, beta, epsilon2, rho, rho_plus: rho + b.f2.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::reference_design;
    use std::f64::consts::PI;

    fn prob() -> DesignProblem {
        let s1 = (1.0 / PI).sqrt();
        let s2 = (2.0 / PI).sqrt();
        DesignProblem::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-3.0, -6.0])),
            DMatrix::from_row_slice(2, 2, &[s1, s2, s1, -s2]),
            1.0,
            1.0,
            1.0,
        )
        .unwrap()
    }

    fn params(f1: f64, yf: f64, dyf: f64) -> BoundParams {
        BoundParams { f1, f2: 0.0, yf_peak: yf, dyf_peak: dyf, gamma: DMatrix::identity(2, 2) * 100.0 }
    }

    #[test]
    fn vanishing_disturbances_give_zero() {
        let b = ultimate_bound(&prob(), &reference_design(), &params(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(b.rho, 0.0);
        assert_eq!(b.rho_plus, 0.0);
        assert!(b.alpha > 0.0);
    }

    #[test]
    fn grows_with_peaks() {
        let base = ultimate_bound(&prob(), &reference_design(), &params(0.1, 0.01, 0.01)).unwrap().rho;
        let y = ultimate_bound(&prob(), &reference_design(), &params(0.1, 0.02, 0.01)).unwrap().rho;
        let d = ultimate_bound(&prob(), &reference_design(), &params(0.1, 0.01, 0.02)).unwrap().rho;
        assert!(y > base && d > base && base.is_finite());
    }

    #[test]
    fn uncertified_solution_rejected() {
        let mut s = reference_design();
        s.epsilon1 = -1.0;
        assert!(ultimate_bound(&prob(), &s, &params(0.0, 0.0, 0.0)).is_err());
    }
}
