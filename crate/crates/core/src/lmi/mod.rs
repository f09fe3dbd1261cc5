//! Observer/estimator gain design: the block LMI `Ξ < 0` with `X = PL`,
//! `P = FC_s`, its verification, an in-repo solver and the ultimate bound.

mod bound;
mod solver;

pub use bound::{ultimate_bound, BoundParams, UltimateBound};
pub use solver::{solve_design, SolverOptions};

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon1Mode {
    Variable,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub a_s: DMatrix<f64>,
    pub c_s: DMatrix<f64>,
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: f64,
    pub epsilon1_mode: Epsilon1Mode,
}

impl DesignProblem {
    pub fn new(a_s: DMatrix<f64>, c_s: DMatrix<f64>, mu1: f64, mu2: f64, sigma: f64) -> Result<Self> {
        let prob = DesignProblem { a_s, c_s, mu1, mu2, sigma, epsilon1_mode: Epsilon1Mode::Variable };
        prob.validate()?;
        Ok(prob)
    }

    pub fn with_epsilon1(mut self, mode: Epsilon1Mode) -> Result<Self> {
        self.epsilon1_mode = mode;
        self.validate()?;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.a_s.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.c_s.nrows()
    }

    /// Shape and sign checks only; rank conditions are the solver's business.
    pub fn validate(&self) -> Result<()> {
        let m = self.a_s.nrows();
        if m == 0 || self.a_s.ncols() != m {
            return Err(Error::dim(format!("A_s must be square and nonempty, got {:?}", self.a_s.shape())));
        }
        if self.c_s.ncols() != m || self.c_s.nrows() == 0 {
            return Err(Error::dim(format!("C_s is {:?} for m = {m}", self.c_s.shape())));
        }
        for (name, v) in [("μ₁", self.mu1), ("μ₂", self.mu2), ("σ", self.sigma)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} = {v} must be positive")));
            }
        }
        if let Epsilon1Mode::Fixed(e) = self.epsilon1_mode {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::invalid(format!("fixed ε₁ = {e} must be positive")));
            }
        }
        if self.a_s.iter().chain(self.c_s.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite entry in A_s or C_s"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSolution {
    pub p: DMatrix<f64>,
    pub g1: DMatrix<f64>,
    pub g2: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub epsilon1: f64,
    pub l: DMatrix<f64>,
    /// `‖P − FC_s‖₂`.
    pub eta: f64,
}

impl DesignSolution {
    /// Completes a candidate with `L = P⁻¹X` and `η = ‖P − FC_s‖₂`.
    pub fn from_candidate(
        p: DMatrix<f64>,
        g1: DMatrix<f64>,
        g2: DMatrix<f64>,
        x: DMatrix<f64>,
        f: DMatrix<f64>,
        epsilon1: f64,
        c_s: &DMatrix<f64>,
    ) -> Result<Self> {
        let chol = p
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("P is not positive definite; L = P⁻¹X undefined".into()))?;
        let l = chol.solve(&x);
        let eta = spectral_norm(&(&p - &f * c_s));
        Ok(DesignSolution { p, g1, g2, x, f, epsilon1, l, eta })
    }

    /// Multiplies every decision variable by `c`; `L` is unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        DesignSolution {
            p: &self.p * c,
            g1: &self.g1 * c,
            g2: &self.g2 * c,
            x: &self.x * c,
            f: &self.f * c,
            epsilon1: self.epsilon1 * c,
            l: self.l.clone(),
            eta: self.eta * c,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&SolutionDoc::from(self)).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: SolutionDoc = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        doc.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read gain file {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

/// A dense matrix stored row-major with its dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixDoc {
    fn from(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        MatrixDoc { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl TryFrom<&MatrixDoc> for DMatrix<f64> {
    type Error = Error;

    fn try_from(d: &MatrixDoc) -> Result<Self> {
        if d.data.len() != d.rows * d.cols {
            return Err(Error::Config(format!(
                "matrix declares {}×{} but lists {} entries",
                d.rows,
                d.cols,
                d.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(d.rows, d.cols, &d.data))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionDoc {
    epsilon1: f64,
    eta: f64,
    #[serde(rename = "P")]
    p: MatrixDoc,
    #[serde(rename = "G1")]
    g1: MatrixDoc,
    #[serde(rename = "G2")]
    g2: MatrixDoc,
    #[serde(rename = "X")]
    x: MatrixDoc,
    #[serde(rename = "F")]
    f: MatrixDoc,
    #[serde(rename = "L")]
    l: MatrixDoc,
}

impl From<&DesignSolution> for SolutionDoc {
    fn from(s: &DesignSolution) -> Self {
        SolutionDoc {
            epsilon1: s.epsilon1,
            eta: s.eta,
            p: (&s.p).into(),
            g1: (&s.g1).into(),
            g2: (&s.g2).into(),
            x: (&s.x).into(),
            f: (&s.f).into(),
            l: (&s.l).into(),
        }
    }
}

impl TryFrom<SolutionDoc> for DesignSolution {
    type Error = Error;

    fn try_from(d: SolutionDoc) -> Result<Self> {
        let sol = DesignSolution {
            p: (&d.p).try_into()?,
            g1: (&d.g1).try_into()?,
            g2: (&d.g2).try_into()?,
            x: (&d.x).try_into()?,
            f: (&d.f).try_into()?,
            epsilon1: d.epsilon1,
            l: (&d.l).try_into()?,
            eta: d.eta,
        };
        let m = sol.p.nrows();
        let p = sol.x.ncols();
        let square = [&sol.p, &sol.g1, &sol.g2].iter().all(|a| a.shape() == (m, m));
        let wide = [&sol.x, &sol.f, &sol.l].iter().all(|a| a.shape() == (m, p));
        if !square || !wide {
            return Err(Error::Config("gain file matrices have inconsistent dimensions".into()));
        }
        Ok(sol)
    }
}

/// The heat-rod design printed with the reference study (four decimals).
///
/// The printed record does not include ε₁; 1 is used, which certifies the
/// printed matrices.
pub fn reference_design() -> DesignSolution {
    let m = |d: &[f64]| DMatrix::from_row_slice(2, 2, d);
    DesignSolution {
        p: m(&[0.1774, 0.0, 0.0, 0.0609]),
        g1: m(&[0.0193, 0.0, 0.0, 0.0102]),
        g2: m(&[0.0193, 0.0, 0.0, 0.0102]),
        x: m(&[-0.1106, -0.1106, -0.1588, 0.1588]),
        f: m(&[0.1572, 0.1572, 0.0382, -0.0382]),
        epsilon1: 1.0,
        l: m(&[-0.6231, -0.6231, -2.6069, 2.6069]),
        eta: 9.4277e-12,
    }
}

pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

pub(crate) fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let s = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub(crate) fn lambda_max(a: &DMatrix<f64>) -> f64 {
    *sym_eigenvalues(a).last().expect("nonempty matrix")
}

pub(crate) fn lambda_min(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a)[0]
}

fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}

/// The symmetric `(2m + n_y)` block matrix
///
/// ```text
/// [ PA+AᵀP−XC−CᵀXᵀ       ·                       · ]
/// [ (XC−PA)/σ     −2P/σ+G₁/(σμ₁)+G₂/(σμ₂)        · ]
/// [ Xᵀ            Fᵀ−Xᵀ/σ                    −ε₁I ]
/// ```
pub fn assemble_xi(prob: &DesignProblem, cand: &DesignSolution) -> Result<DMatrix<f64>> {
    let m = prob.m();
    let p = prob.n_outputs();
    for (name, a) in [("P", &cand.p), ("G1", &cand.g1), ("G2", &cand.g2)] {
        if a.shape() != (m, m) {
            return Err(Error::dim(format!("{name} is {:?}, expected {m}×{m}", a.shape())));
        }
        if asymmetry(a) > 1e-12 {
            return Err(Error::invalid(format!("{name} is not symmetric")));
        }
    }
    for (name, a) in [("X", &cand.x), ("F", &cand.f)] {
        if a.shape() != (m, p) {
            return Err(Error::dim(format!("{name} is {:?}, expected {m}×{p}", a.shape())));
        }
    }
    Ok(xi_unchecked(prob, &cand.p, &cand.g1, &cand.g2, &cand.x, &cand.f, cand.epsilon1))
}

pub(crate) fn xi_unchecked(
    prob: &DesignProblem,
    p: &DMatrix<f64>,
    g1: &DMatrix<f64>,
    g2: &DMatrix<f64>,
    x: &DMatrix<f64>,
    f: &DMatrix<f64>,
    epsilon1: f64,
) -> DMatrix<f64> {
    let m = prob.m();
    let ny = prob.n_outputs();
    let (a, c, s) = (&prob.a_s, &prob.c_s, prob.sigma);
    let pa = p * a;
    let xc = x * c;
    let x11 = &pa + pa.transpose() - &xc - xc.transpose();
    let x21 = (&xc - &pa) / s;
    let x22 = p * (-2.0 / s) + g1 / (s * prob.mu1) + g2 / (s * prob.mu2);
    let x31 = x.transpose();
    let x32 = f.transpose() - x.transpose() / s;

    let n = 2 * m + ny;
    let mut xi = DMatrix::zeros(n, n);
    xi.view_mut((0, 0), (m, m)).copy_from(&x11);
    xi.view_mut((m, 0), (m, m)).copy_from(&x21);
    xi.view_mut((0, m), (m, m)).copy_from(&x21.transpose());
    xi.view_mut((m, m), (m, m)).copy_from(&x22);
    xi.view_mut((2 * m, 0), (ny, m)).copy_from(&x31);
    xi.view_mut((0, 2 * m), (m, ny)).copy_from(&x31.transpose());
    xi.view_mut((2 * m, m), (ny, m)).copy_from(&x32);
    xi.view_mut((m, 2 * m), (m, ny)).copy_from(&x32.transpose());
    for i in 0..ny {
        xi[(2 * m + i, 2 * m + i)] = -epsilon1;
    }
    xi
}

/// Pass thresholds. Negative `neg`/`pd` values act as slack for rounded data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Require `λ_max(Ξ) ≤ −neg`.
    pub neg: f64,
    /// Require `λ_min(P), λ_min(G₁), λ_min(G₂), ε₁ ≥ pd`.
    pub pd: f64,
    /// Require `‖P − FC_s‖₂ ≤ eq`.
    pub eq: f64,
    /// Require `‖X − PL‖₂ ≤ gain`.
    pub gain: f64,
}

impl Tolerances {
    pub fn strict() -> Self {
        Tolerances { neg: 1e-8, pd: 1e-8, eq: 1e-6, gain: 1e-10 }
    }

    /// For matrices printed to four decimals.
    pub fn printed() -> Self {
        Tolerances { neg: -1e-3, pd: -1e-3, eq: 1e-3, gain: 1e-3 }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::strict()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub lambda_max_xi: f64,
    pub lambda_min_p: f64,
    pub lambda_min_g1: f64,
    pub lambda_min_g2: f64,
    pub epsilon1: f64,
    /// `‖P − FC_s‖₂`.
    pub eq_residual: f64,
    /// `‖X − PL‖₂`.
    pub gain_residual: f64,
    pub tolerances: Tolerances,
    pub failures: Vec<String>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl std::fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "lambda_max(Xi) = {:.6e}", self.lambda_max_xi)?;
        writeln!(f, "lambda_min(P)  = {:.6e}", self.lambda_min_p)?;
        writeln!(f, "lambda_min(G1) = {:.6e}", self.lambda_min_g1)?;
        writeln!(f, "lambda_min(G2) = {:.6e}", self.lambda_min_g2)?;
        writeln!(f, "epsilon1       = {:.6e}", self.epsilon1)?;
        writeln!(f, "eta = ||P - F C_s|| = {:.6e}", self.eq_residual)?;
        writeln!(f, "||X - P L||    = {:.6e}", self.gain_residual)?;
        if self.passed() {
            write!(f, "PASS")
        } else {
            write!(f, "FAIL: {}", self.failures.join("; "))
        }
    }
}

/// Evaluates every certificate condition; never fails, reports instead.
pub fn check_solution(prob: &DesignProblem, sol: &DesignSolution, tol: Tolerances) -> CertificateReport {
    let mut failures = Vec::new();
    let nan = f64::NAN;
    let mut report = CertificateReport {
        lambda_max_xi: nan,
        lambda_min_p: nan,
        lambda_min_g1: nan,
        lambda_min_g2: nan,
        epsilon1: sol.epsilon1,
        eq_residual: nan,
        gain_residual: nan,
        tolerances: tol,
        failures: Vec::new(),
    };
    let all_finite = [&sol.p, &sol.g1, &sol.g2, &sol.x, &sol.f, &sol.l]
        .iter()
        .all(|a| a.iter().all(|v| v.is_finite()))
        && sol.epsilon1.is_finite();
    if !all_finite {
        report.failures.push("non-finite entries".into());
        return report;
    }
    match assemble_xi(prob, sol) {
        Ok(xi) => report.lambda_max_xi = lambda_max(&xi),
        Err(e) => {
            report.failures.push(e.to_string());
            return report;
        }
    }
    if sol.l.shape() != sol.x.shape() {
        report.failures.push("L has the wrong shape".into());
        return report;
    }
    report.lambda_min_p = lambda_min(&sol.p);
    report.lambda_min_g1 = lambda_min(&sol.g1);
    report.lambda_min_g2 = lambda_min(&sol.g2);
    report.eq_residual = spectral_norm(&(&sol.p - &sol.f * &prob.c_s));
    report.gain_residual = spectral_norm(&(&sol.x - &sol.p * &sol.l));

    if !(report.lambda_max_xi <= -tol.neg) {
        failures.push(format!("lambda_max(Xi) = {:.3e} not below {:.1e}", report.lambda_max_xi, -tol.neg));
    }
    for (name, v) in [
        ("P", report.lambda_min_p),
        ("G1", report.lambda_min_g1),
        ("G2", report.lambda_min_g2),
        ("epsilon1", sol.epsilon1),
    ] {
        if !(v >= tol.pd) {
            failures.push(format!("{name} not positive definite (min eigenvalue {v:.3e})"));
        }
    }
    if !(report.eq_residual <= tol.eq) {
        failures.push(format!("||P - F C_s|| = {:.3e} exceeds {:.1e}", report.eq_residual, tol.eq));
    }
    if !(report.gain_residual <= tol.gain) {
        failures.push(format!("||X - P L|| = {:.3e} exceeds {:.1e}", report.gain_residual, tol.gain));
    }
    report.failures = failures;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn heat_rod_problem() -> DesignProblem {
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

    fn blank(eps: f64) -> DesignSolution {
        DesignSolution {
            p: DMatrix::zeros(2, 2),
            g1: DMatrix::zeros(2, 2),
            g2: DMatrix::zeros(2, 2),
            x: DMatrix::zeros(2, 2),
            f: DMatrix::zeros(2, 2),
            epsilon1: eps,
            l: DMatrix::zeros(2, 2),
            eta: 0.0,
        }
    }

    #[test]
    fn hand_assembled_blocks() {
        let prob = heat_rod_problem();
        let mut c = blank(1.0);
        c.p = DMatrix::identity(2, 2);
        c.g1 = DMatrix::identity(2, 2);
        c.g2 = DMatrix::identity(2, 2);
        let xi = assemble_xi(&prob, &c).unwrap();
        assert_eq!(xi.view((0, 0), (2, 2)).clone_owned(), DMatrix::from_row_slice(2, 2, &[-6.0, 0.0, 0.0, -12.0]));
        assert_eq!(xi.view((2, 2), (2, 2)).clone_owned(), DMatrix::zeros(2, 2));
        assert!(lambda_max(&xi) >= 0.0);
    }

    #[test]
    fn epsilon_block() {
        let xi = assemble_xi(&heat_rod_problem(), &blank(1.0)).unwrap();
        assert_eq!(xi.view((4, 4), (2, 2)).clone_owned(), -DMatrix::identity(2, 2));
        assert_eq!(xi.view((0, 0), (4, 4)).clone_owned(), DMatrix::zeros(4, 4));
    }

    #[test]
    fn rejects_asymmetric_p() {
        let mut c = blank(1.0);
        c.p = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(assemble_xi(&heat_rod_problem(), &c).is_err());
    }

    #[test]
    fn reference_design_certifies_at_printed_precision() {
        let prob = heat_rod_problem();
        let r = check_solution(&prob, &reference_design(), Tolerances::printed());
        assert!(r.passed(), "{r}");
        assert!(r.lambda_max_xi < 0.0);
        assert!(r.eq_residual < 1e-3);
    }

    #[test]
    fn negative_p_fails() {
        let mut s = reference_design();
        s.p = -DMatrix::identity(2, 2);
        let r = check_solution(&heat_rod_problem(), &s, Tolerances::strict());
        assert!(!r.passed());
        assert!(r.failures.iter().any(|f| f.contains("P not positive definite")));
    }

    #[test]
    fn toml_round_trip() {
        let s = reference_design();
        let back = DesignSolution::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn malformed_pin_file() {
        let mut text = reference_design().to_toml().unwrap();
        text = text.replacen("rows = 2", "rows = 3", 1);
        assert!(DesignSolution::from_toml(&text).is_err());
    }
}
