//! Feasibility search for the design LMI.
//!
//! `F = P C⁺ + W(I − C C⁺)` makes `P = FC_s` hold identically when `C_s`
//! has full column rank. The largest eigenvalue of
//! `diag(Ξ, −P, −G₁, −G₂)` is then minimized over `(P, G₁, G₂, X, W)` with
//! `ε₁` held fixed, through a log-sum-exp smoothing driven towards the exact
//! maximum.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_solution, xi_unchecked, DesignProblem, DesignSolution, Epsilon1Mode, Tolerances};
use crate::error::{Error, Result};
use crate::reduction::numerical_rank;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub seed: u64,
    pub starts: usize,
    /// Required margin `δ` on every constraint.
    pub delta: f64,
    /// Iteration budget per smoothing stage.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { seed: 0, starts: 5, delta: 1e-6, max_iter: 2000 }
    }
}

const SMOOTHING_START: f64 = 1e-2;
const SMOOTHING_FACTOR: f64 = 0.2;
const SMOOTHING_STAGES: usize = 6;
const LBFGS_MEMORY: usize = 8;

struct Lifted {
    m: usize,
    ny: usize,
    basis: Vec<DMatrix<f64>>,
    c_pinv: DMatrix<f64>,
    c_perp: DMatrix<f64>,
    epsilon1: f64,
    /// `M(0)`, flattened column-major.
    base: Vec<f64>,
    /// `M(e_i) − M(0)` per coordinate.
    dirs: Vec<Vec<f64>>,
    size: usize,
}

struct Blocks {
    p: DMatrix<f64>,
    g1: DMatrix<f64>,
    g2: DMatrix<f64>,
    x: DMatrix<f64>,
    f: DMatrix<f64>,
}

fn sym_basis(m: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        for j in i..m {
            let mut e = DMatrix::zeros(m, m);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                e[(i, j)] = s;
                e[(j, i)] = s;
            }
            out.push(e);
        }
    }
    out
}

impl Lifted {
    fn new(prob: &DesignProblem, epsilon1: f64) -> Result<Self> {
        let m = prob.m();
        let ny = prob.n_outputs();
        let c_pinv = prob
            .c_s
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Numerical(format!("pseudo-inverse of C_s: {e}")))?;
        let c_perp = DMatrix::identity(ny, ny) - &prob.c_s * &c_pinv;
        let mut lifted = Lifted {
            m,
            ny,
            basis: sym_basis(m),
            c_pinv,
            c_perp,
            epsilon1,
            base: Vec::new(),
            dirs: Vec::new(),
            size: 5 * m + ny,
        };
        let n = lifted.n_vars();
        let zero = vec![0.0; n];
        lifted.base = lifted.matrix_dense(prob, &zero).as_slice().to_vec();
        lifted.dirs = (0..n)
            .map(|i| {
                let mut e = zero.clone();
                e[i] = 1.0;
                let mi = lifted.matrix_dense(prob, &e);
                mi.iter().zip(&lifted.base).map(|(a, b)| a - b).collect()
            })
            .collect();
        Ok(lifted)
    }

    fn n_sym(&self) -> usize {
        self.basis.len()
    }

    fn n_vars(&self) -> usize {
        3 * self.n_sym() + 2 * self.m * self.ny
    }

    fn unpack(&self, v: &[f64]) -> Blocks {
        let ns = self.n_sym();
        let sym = |off: usize| {
            let mut a = DMatrix::zeros(self.m, self.m);
            for (k, e) in self.basis.iter().enumerate() {
                a += e * v[off + k];
            }
            a
        };
        let p = sym(0);
        let g1 = sym(ns);
        let g2 = sym(2 * ns);
        let o = 3 * ns;
        let mn = self.m * self.ny;
        let x = DMatrix::from_row_slice(self.m, self.ny, &v[o..o + mn]);
        let w = DMatrix::from_row_slice(self.m, self.ny, &v[o + mn..o + 2 * mn]);
        let f = &p * &self.c_pinv + w * &self.c_perp;
        Blocks { p, g1, g2, x, f }
    }

    fn matrix_dense(&self, prob: &DesignProblem, v: &[f64]) -> DMatrix<f64> {
        let b = self.unpack(v);
        let xi = xi_unchecked(prob, &b.p, &b.g1, &b.g2, &b.x, &b.f, self.epsilon1);
        let k = xi.nrows();
        let m = self.m;
        let mut out = DMatrix::zeros(self.size, self.size);
        out.view_mut((0, 0), (k, k)).copy_from(&xi);
        out.view_mut((k, k), (m, m)).copy_from(&(-&b.p));
        out.view_mut((k + m, k + m), (m, m)).copy_from(&(-&b.g1));
        out.view_mut((k + 2 * m, k + 2 * m), (m, m)).copy_from(&(-&b.g2));
        out
    }

    fn matrix(&self, v: &[f64]) -> DMatrix<f64> {
        let mut data = self.base.clone();
        for (vi, d) in v.iter().zip(&self.dirs) {
            if *vi != 0.0 {
                for (a, b) in data.iter_mut().zip(d) {
                    *a += vi * b;
                }
            }
        }
        DMatrix::from_vec(self.size, self.size, data)
    }

    fn lambda_max(&self, v: &[f64]) -> f64 {
        self.matrix(v).symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `μ log Σ exp(λ_i/μ)` and its gradient.
    fn smoothed(&self, v: &[f64], mu: f64) -> (f64, Vec<f64>) {
        let eig = self.matrix(v).symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = eig.eigenvalues.iter().map(|l| ((l - top) / mu).exp()).collect();
        let sum: f64 = w.iter().sum();
        let value = top + mu * sum.ln();
        let weights = DVector::from_iterator(w.len(), w.iter().map(|x| x / sum));
        let q = &eig.eigenvectors;
        let grad_mat = q * DMatrix::from_diagonal(&weights) * q.transpose();
        let g = grad_mat.as_slice();
        let grad = self.dirs.iter().map(|d| d.iter().zip(g).map(|(a, b)| a * b).sum()).collect();
        (value, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with Armijo backtracking.
fn lbfgs<F: Fn(&[f64]) -> (f64, Vec<f64>)>(f: F, x0: Vec<f64>, max_iter: usize) -> Vec<f64> {
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    for it in 0..max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < 1e-12 {
            break;
        }
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = match hist.last() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / gnorm,
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = g.iter().map(|v| -v / gnorm).collect();
            slope = -gnorm;
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-14 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 {
            if hist.len() == LBFGS_MEMORY {
                hist.remove(0);
            }
            hist.push((s, y, 1.0 / sy));
        }
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if it > 10 && improvement.abs() < 1e-15 * fx.abs().max(1.0) {
            break;
        }
    }
    x
}

fn run_start(lifted: &Lifted, seed: u64, index: usize, max_iter: usize) -> (f64, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut v: Vec<f64> = (0..lifted.n_vars()).map(|_| rng.random_range(-0.1..0.1)).collect();
    let mut mu = SMOOTHING_START;
    for _ in 0..SMOOTHING_STAGES {
        v = lbfgs(|u| lifted.smoothed(u, mu), v, max_iter);
        mu *= SMOOTHING_FACTOR;
    }
    (lifted.lambda_max(&v), v)
}

/// Finds `(P, G₁, G₂, X, F, ε₁)` satisfying the design LMI with margin `δ`,
/// `P = FC_s` exactly, and `L = P⁻¹X`. Deterministic for a given seed.
pub fn solve_design(prob: &DesignProblem, opts: &SolverOptions) -> Result<DesignSolution> {
    prob.validate()?;
    let m = prob.m();
    if prob.n_outputs() < m || numerical_rank(&prob.c_s) < m {
        return Err(Error::Infeasible {
            reason: format!(
                "P = F C_s with P nonsingular needs C_s of full column rank {m} (n_y = {}, rank {})",
                prob.n_outputs(),
                numerical_rank(&prob.c_s)
            ),
            best_lambda_max: f64::INFINITY,
        });
    }
    let (epsilon1, scalable) = match prob.epsilon1_mode {
        Epsilon1Mode::Variable => (1.0, true),
        Epsilon1Mode::Fixed(e) => (e, false),
    };
    let lifted = Lifted::new(prob, epsilon1)?;
    let starts = opts.starts.max(1);
    let results: Vec<(f64, Vec<f64>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..starts)
            .map(|i| {
                let lifted = &lifted;
                s.spawn(move || run_start(lifted, opts.seed, i, opts.max_iter))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.0 < results[best].0 {
            best = i;
        }
    }
    let (t, v) = &results[best];
    let t = *t;
    if !(t < 0.0) {
        return Err(Error::Infeasible {
            reason: format!("no strictly feasible point after {starts} starts"),
            best_lambda_max: t,
        });
    }
    let scale = if t > -opts.delta {
        if !scalable {
            return Err(Error::Infeasible {
                reason: format!("margin below δ = {:.1e} with ε₁ fixed", opts.delta),
                best_lambda_max: t,
            });
        }
        2.0 * opts.delta / -t
    } else {
        1.0
    };
    let b = lifted.unpack(v);
    let sol = DesignSolution::from_candidate(b.p, b.g1, b.g2, b.x, b.f, epsilon1, &prob.c_s)?.scaled(scale);
    let sol = DesignSolution::from_candidate(sol.p, sol.g1, sol.g2, sol.x, sol.f, sol.epsilon1, &prob.c_s)?;
    let report = check_solution(prob, &sol, Tolerances::strict());
    if !report.passed() {
        return Err(Error::Infeasible {
            reason: format!("best point fails the strict certificate: {}", report.failures.join("; ")),
            best_lambda_max: report.lambda_max_xi,
        });
    }
    Ok(sol)
}
