use crate::error::{Error, Result};
use crate::pde::{inner_product, Quadrature, SpatioTemporalField};
use crate::simulator::SourceModel;
use crate::spectral::EigenPair;

/// Weight of each sample: the interval it opens. The last sample closes the
/// record and carries no weight, so the weights sum to the horizon.
pub fn time_weights(t: &[f64]) -> Vec<f64> {
    match t.len() {
        0 => Vec::new(),
        1 => vec![1.0],
        n => (0..n).map(|k| if k + 1 < n { t[k + 1] - t[k] } else { 0.0 }).collect(),
    }
}

fn check_grid(field: &SpatioTemporalField, quad: &Quadrature) -> Result<()> {
    if field.n_times() == 0 || field.n_nodes() == 0 {
        return Err(Error::invalid("empty error field"));
    }
    if field.z() != quad.nodes() {
        return Err(Error::Quadrature("error field is not sampled on the quadrature nodes".into()));
    }
    Ok(())
}

/// `‖e(·, t_k)‖₂` for every time stamp.
pub fn error_norms(field: &SpatioTemporalField, quad: &Quadrature) -> Result<Vec<f64>> {
    check_grid(field, quad)?;
    (0..field.n_times())
        .map(|k| quad.norm(field.row(k)))
        .collect()
}

/// `(Σ_k Δt_k ∫ e² dz / (|Ω| Σ_k Δt_k))^{1/2}`.
pub fn rmse(field: &SpatioTemporalField, quad: &Quadrature) -> Result<f64> {
    check_grid(field, quad)?;
    let w = time_weights(field.t());
    let mut num = 0.0;
    for (k, wk) in w.iter().enumerate() {
        if *wk != 0.0 {
            let row = field.row(k);
            num += wk * quad.dot(row, row)?;
        }
    }
    let den: f64 = w.iter().sum::<f64>() * quad.domain().length();
    if !(den > 0.0) {
        return Err(Error::invalid("time grid has zero total weight"));
    }
    Ok((num / den).max(0.0).sqrt())
}

/// RMSE of the best slow-mode reconstruction `φ_sᵀ(z)⟨φ_s, b_f⟩f(t) − f(z,t)`
/// of a separable source; a floor no modal estimator can beat.
///
/// The residual norm `‖φ_sᵀc − b_f‖₂` is evaluated from exact inner products
/// (window supports integrated piecewise), not from the sampled field.
pub fn ideal_rmse(
    phi_s: &[EigenPair],
    source: &SourceModel,
    t_grid: &[f64],
    quad: &Quadrature,
) -> Result<f64> {
    let (shape, time) = match source {
        SourceModel::Separable { shape, time } => (shape, time),
        SourceModel::Zero => return Ok(0.0),
        SourceModel::Modal(_) => {
            return Err(Error::invalid("ideal RMSE is defined for separable sources only"));
        }
    };
    if t_grid.is_empty() {
        return Err(Error::invalid("empty time grid"));
    }
    let c: Vec<f64> = phi_s
        .iter()
        .map(|p| inner_product(shape, &p.phi, quad))
        .collect::<Result<_>>()?;
    let mut residual = inner_product(shape, shape, quad)?;
    for (i, pi) in phi_s.iter().enumerate() {
        residual -= 2.0 * c[i] * c[i];
        for (j, pj) in phi_s.iter().enumerate() {
            residual += c[i] * c[j] * inner_product(&pi.phi, &pj.phi, quad)?;
        }
    }
    let w = time_weights(t_grid);
    let energy: f64 = w.iter().zip(t_grid).map(|(wk, &t)| wk * time.value(t).powi(2)).sum();
    let total: f64 = w.iter().sum();
    Ok((residual.max(0.0) * energy / (total * quad.domain().length())).sqrt())
}

/// First time after `onset` from which `|e|∞ ≤ tol` holds up to `until`.
pub fn settle_time(t: &[f64], err: &[f64], onset: f64, until: f64, tol: f64) -> Option<f64> {
    let mut candidate = None;
    for (&tk, &ek) in t.iter().zip(err) {
        if tk < onset {
            continue;
        }
        if tk > until {
            break;
        }
        if ek <= tol {
            candidate.get_or_insert(tk);
        } else {
            candidate = None;
        }
    }
    candidate.map(|c| c - onset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{Domain, ShapeFunction};
    use crate::simulator::TimeProfile;
    use crate::spectral::dirichlet_eigenpairs;
    use std::f64::consts::PI;

    fn quad() -> Quadrature {
        Quadrature::simpson(Domain::unit_rod(), 201).unwrap()
    }

    fn grid() -> Vec<f64> {
        (0..=8000).map(|k| 80.0 * k as f64 / 8000.0).collect()
    }

    #[test]
    fn zero_field() {
        let q = quad();
        let f = SpatioTemporalField::new(q.nodes().to_vec(), vec![0.0, 1.0], vec![0.0; 402]).unwrap();
        assert_eq!(rmse(&f, &q).unwrap(), 0.0);
    }

    #[test]
    fn first_mode_field() {
        let q = quad();
        let phi = |z: f64| (2.0 / PI).sqrt() * z.sin();
        let f = SpatioTemporalField::from_fn(q.nodes().to_vec(), vec![0.0, 0.5, 1.0], |_, _| {
            q.nodes().iter().map(|&z| phi(z)).collect()
        })
        .unwrap();
        assert!((rmse(&f, &q).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn ideal_rmse_in_span_vanishes() {
        let basis = dirichlet_eigenpairs(2.0, 2).unwrap();
        let src = SourceModel::Separable {
            shape: ShapeFunction::Sine { amplitude: (2.0 / PI).sqrt(), wavenumber: 2.0 },
            time: TimeProfile::Step { onset: 10.0, amplitude: 2.0 },
        };
        assert!(ideal_rmse(&basis, &src, &grid(), &quad()).unwrap() < 1e-7);
    }

    #[test]
    fn ideal_rmse_window_m2() {
        let basis = dirichlet_eigenpairs(2.0, 2).unwrap();
        let got = ideal_rmse(&basis, &SourceModel::heaviside_window(), &grid(), &quad()).unwrap();
        let c = |j: f64| (2.0 / PI).sqrt() * (1.0 - (j * PI / 4.0).cos()) / j;
        let oracle = ((PI / 4.0 - c(1.0).powi(2) - c(2.0).powi(2)) / PI).sqrt() * (4.0 * 70.0 / 80.0f64).sqrt();
        assert!((got - oracle).abs() < 1e-8);
    }

    #[test]
    fn modal_sources_have_no_ideal_rmse() {
        let basis = dirichlet_eigenpairs(2.0, 2).unwrap();
        let src = SourceModel::abrupt(&basis).unwrap();
        assert!(ideal_rmse(&basis, &src, &grid(), &quad()).is_err());
    }

    #[test]
    fn settling() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let e = [0.0, 1.0, 0.01, 0.5, 0.01, 0.0];
        assert_eq!(settle_time(&t, &e, 1.0, 5.0, 0.02), Some(3.0));
        assert_eq!(settle_time(&t, &[1.0; 6], 1.0, 5.0, 0.02), None);
    }
}
