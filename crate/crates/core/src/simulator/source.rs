//! Abnormal source models `f(z,t)`, each a sum of separable terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{ShapeFunction, SpatialFunction};
use crate::spectral::{EigenPair, Eigenfunction};

/// Temporal factor of a separable source term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeProfile {
    /// `0` before `onset`, `amplitude` from `onset` on.
    Step { onset: f64, amplitude: f64 },
    /// `0` before `onset`, `plateau − exp(−rate (t − onset))` from `onset` on.
    Incipient { onset: f64, plateau: f64, rate: f64 },
    Constant { value: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Step { onset, amplitude } => {
                if started(t, onset) {
                    amplitude
                } else {
                    0.0
                }
            }
            TimeProfile::Incipient { onset, plateau, rate } => {
                if started(t, onset) {
                    plateau - (-rate * (t - onset).max(0.0)).exp()
                } else {
                    0.0
                }
            }
            TimeProfile::Constant { value } => value,
        }
    }

    pub fn onset(&self) -> Option<f64> {
        match *self {
            TimeProfile::Step { onset, .. } | TimeProfile::Incipient { onset, .. } => Some(onset),
            TimeProfile::Constant { .. } => None,
        }
    }

    /// Supremum of `|df/dt|` away from the onset jump.
    pub fn max_rate(&self) -> f64 {
        match *self {
            TimeProfile::Incipient { rate, .. } => rate.abs(),
            _ => 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            TimeProfile::Step { onset, amplitude } => onset.is_finite() && amplitude.is_finite(),
            TimeProfile::Incipient { onset, plateau, rate } => {
                onset.is_finite() && plateau.is_finite() && rate.is_finite()
            }
            TimeProfile::Constant { value } => value.is_finite(),
        }
    }
}

// Grid times are computed as k·T/N; a relative slack keeps t = onset on the
// active side regardless of rounding.
fn started(t: f64, onset: f64) -> bool {
    t >= onset - 1e-9 * onset.abs().max(1.0)
}

/// `f(z,t) = φ_mode(z) · time(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalComponent {
    pub mode: usize,
    pub shape: Eigenfunction,
    pub time: TimeProfile,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum SourceModel {
    #[default]
    Zero,
    /// Sum of eigenfunction-shaped components (modal step / incipient).
    Modal(Vec<ModalComponent>),
    /// `f(t) · b_f(z)`, typically with a window `b_f`.
    Separable { shape: ShapeFunction, time: TimeProfile },
}

impl SourceModel {
    /// Binds `(mode, profile)` pairs to eigenfunctions of `basis`.
    pub fn modal(basis: &[EigenPair], parts: &[(usize, TimeProfile)]) -> Result<Self> {
        let mut comps = Vec::with_capacity(parts.len());
        for &(mode, time) in parts {
            let pair = basis
                .iter()
                .find(|p| p.index == mode)
                .ok_or_else(|| Error::invalid(format!("source references unknown mode {mode}")))?;
            comps.push(ModalComponent { mode, shape: pair.phi.clone(), time });
        }
        Ok(SourceModel::Modal(comps))
    }

    /// Abrupt source: `2φ₁` from t = 10 s and `3φ₂` from t = 40 s.
    pub fn abrupt(basis: &[EigenPair]) -> Result<Self> {
        SourceModel::modal(
            basis,
            &[
                (1, TimeProfile::Step { onset: 10.0, amplitude: 2.0 }),
                (2, TimeProfile::Step { onset: 40.0, amplitude: 3.0 }),
            ],
        )
    }

    /// Incipient source: `(2 − e^{−0.01(t−10)})φ₁` and `(3 − e^{−0.02(t−40)})φ₂`.
    pub fn incipient(basis: &[EigenPair]) -> Result<Self> {
        SourceModel::modal(
            basis,
            &[
                (1, TimeProfile::Incipient { onset: 10.0, plateau: 2.0, rate: 0.01 }),
                (2, TimeProfile::Incipient { onset: 40.0, plateau: 3.0, rate: 0.02 }),
            ],
        )
    }

    /// `f(t)(H(z) − H(z − π/4))` with `f = 2` from t = 10 s.
    pub fn heaviside_window() -> Self {
        SourceModel::Separable {
            shape: ShapeFunction::window(0.0, std::f64::consts::FRAC_PI_4),
            time: TimeProfile::Step { onset: 10.0, amplitude: 2.0 },
        }
    }

    /// Separable terms `(shape, time)` whose sum is the source.
    pub fn terms(&self) -> Vec<(&dyn SpatialFunction, &TimeProfile)> {
        match self {
            SourceModel::Zero => Vec::new(),
            SourceModel::Modal(c) => {
                c.iter().map(|c| (&c.shape as &dyn SpatialFunction, &c.time)).collect()
            }
            SourceModel::Separable { shape, time } => vec![(shape as &dyn SpatialFunction, time)],
        }
    }

    pub fn onsets(&self) -> Vec<f64> {
        self.terms().iter().filter_map(|(_, p)| p.onset()).collect()
    }

    /// Checks onsets lie in `[0, horizon]` and parameters are finite.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        for (_, p) in self.terms() {
            if !p.is_finite() {
                return Err(Error::invalid("non-finite source parameter"));
            }
            if let Some(on) = p.onset() {
                if on < 0.0 || on > horizon {
                    return Err(Error::invalid(format!(
                        "onset {on} s outside the horizon [0, {horizon}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `f(·, t)` sampled on `z_grid`.
pub fn eval_source(model: &SourceModel, z_grid: &[f64], t: f64) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::invalid(format!("source evaluated at negative time {t}")));
    }
    let mut out = vec![0.0; z_grid.len()];
    for (shape, time) in model.terms() {
        let a = time.value(t);
        if a == 0.0 {
            continue;
        }
        for (o, &z) in out.iter_mut().zip(z_grid) {
            *o += a * shape.eval(z);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dirichlet_eigenpairs;
    use std::f64::consts::PI;

    #[test]
    fn abrupt_before_and_after_onsets() {
        let basis = dirichlet_eigenpairs(2.0, 2).unwrap();
        let m = SourceModel::abrupt(&basis).unwrap();
        let z: Vec<f64> = (0..11).map(|i| i as f64 * PI / 10.0).collect();
        assert!(eval_source(&m, &z, 5.0).unwrap().iter().all(|&v| v == 0.0));
        let f = eval_source(&m, &z, 50.0).unwrap();
        for (v, &zz) in f.iter().zip(&z) {
            let expect = (2.0 / PI).sqrt() * (2.0 * zz.sin() + 3.0 * (2.0 * zz).sin());
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn incipient_at_onset() {
        let p = TimeProfile::Incipient { onset: 10.0, plateau: 2.0, rate: 0.01 };
        assert_eq!(p.value(10.0), 1.0);
        assert_eq!(p.value(9.99), 0.0);
        assert!((p.value(110.0) - (2.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn onset_is_inclusive_on_the_computed_grid() {
        let p = TimeProfile::Step { onset: 10.0, amplitude: 2.0 };
        let t = 80.0 * 1000.0 / 8000.0;
        assert_eq!(p.value(t), 2.0);
        assert_eq!(p.value(1000.0 * 0.01), 2.0);
    }

    #[test]
    fn window_source() {
        let m = SourceModel::heaviside_window();
        let f = eval_source(&m, &[0.0, 0.5, PI / 4.0, 2.0], 20.0).unwrap();
        assert_eq!(f, vec![2.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn validation() {
        assert!(SourceModel::heaviside_window().validate(80.0).is_ok());
        assert!(SourceModel::heaviside_window().validate(5.0).is_err());
        let bad = SourceModel::Separable {
            shape: ShapeFunction::zero(),
            time: TimeProfile::Step { onset: 1.0, amplitude: f64::NAN },
        };
        assert!(bad.validate(80.0).is_err());
    }

    #[test]
    fn unknown_mode_rejected() {
        let basis = dirichlet_eigenpairs(2.0, 2).unwrap();
        assert!(SourceModel::modal(&basis, &[(3, TimeProfile::Constant { value: 1.0 })]).is_err());
    }
}
