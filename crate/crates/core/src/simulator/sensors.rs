use crate::error::{Error, Result};
use crate::pde::{interpolate, Domain, ShapeFunction, SpatioTemporalField};
use crate::series::TimeSeries;

/// Point (thermocouple-style) sensors strictly inside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorArray {
    positions: Vec<f64>,
}

impl SensorArray {
    pub fn new(positions: Vec<f64>, domain: Domain) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("sensor array is empty"));
        }
        for &z in &positions {
            if !(z > domain.start && z < domain.end) {
                return Err(Error::invalid(format!(
                    "sensor at {z} is not strictly inside ({}, {})",
                    domain.start, domain.end
                )));
            }
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sensor positions must be strictly increasing"));
        }
        Ok(SensorArray { positions })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `c_i(z) = δ(z − z_i)`.
    pub fn shapes(&self) -> Vec<ShapeFunction> {
        self.positions.iter().map(|&z| ShapeFunction::point(z)).collect()
    }
}

/// `z_i = α₁ + i(α₂ − α₁)/(n_y + 1)`, `i = 1..n_y`: uniform and interior.
pub fn place_sensors_uniform(n_y: usize, domain: Domain) -> Result<SensorArray> {
    if n_y == 0 {
        return Err(Error::invalid("at least one sensor is required"));
    }
    let h = domain.length() / (n_y + 1) as f64;
    SensorArray::new((1..=n_y).map(|i| domain.start + h * i as f64).collect(), domain)
}

/// `k_y x(z_i, t)` by linear interpolation, per time stamp.
pub fn sample_outputs(
    x: &SpatioTemporalField,
    sensors: &SensorArray,
    k_y: f64,
) -> Result<TimeSeries> {
    let z = x.z();
    let (lo, hi) = (z[0], z[z.len() - 1]);
    if let Some(&bad) = sensors.positions().iter().find(|&&p| p < lo || p > hi) {
        return Err(Error::invalid(format!("sensor at {bad} outside the grid [{lo}, {hi}]")));
    }
    let mut out = TimeSeries::with_capacity(sensors.len(), x.n_times());
    let mut row = vec![0.0; sensors.len()];
    for (k, &t) in x.t().iter().enumerate() {
        let xs = x.row(k);
        for (r, &p) in row.iter_mut().zip(sensors.positions()) {
            *r = k_y * interpolate(z, xs, p).expect("position checked");
        }
        out.push(t, &row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_interior_layouts() {
        let d = Domain::unit_rod();
        let two = place_sensors_uniform(2, d).unwrap();
        assert!((two.positions()[0] - PI / 3.0).abs() < 1e-15);
        assert!((two.positions()[1] - 2.0 * PI / 3.0).abs() < 1e-15);
        assert!((place_sensors_uniform(1, d).unwrap().positions()[0] - PI / 2.0).abs() < 1e-15);
        let three = place_sensors_uniform(3, d).unwrap();
        for (p, e) in three.positions().iter().zip([PI / 4.0, PI / 2.0, 3.0 * PI / 4.0]) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_boundary_and_unsorted() {
        let d = Domain::unit_rod();
        assert!(SensorArray::new(vec![0.0, 1.0], d).is_err());
        assert!(SensorArray::new(vec![2.0, 1.0], d).is_err());
        assert!(SensorArray::new(vec![1.0, 1.0], d).is_err());
    }

    fn field(profile: impl Fn(f64) -> f64) -> SpatioTemporalField {
        let z = Domain::unit_rod().grid(201);
        let row: Vec<f64> = z.iter().map(|&v| profile(v)).collect();
        SpatioTemporalField::new(z, vec![0.0, 1.0], [row.clone(), row].concat()).unwrap()
    }

    #[test]
    fn second_mode_readings() {
        let phi2 = |z: f64| (2.0 / PI).sqrt() * (2.0 * z).sin();
        let s = SensorArray::new(vec![PI / 4.0, 3.0 * PI / 4.0], Domain::unit_rod()).unwrap();
        let y = sample_outputs(&field(phi2), &s, 1.0).unwrap();
        assert!((y.row(0)[0] - (2.0 / PI).sqrt()).abs() < 1e-12);
        assert!((y.row(1)[1] + (2.0 / PI).sqrt()).abs() < 1e-12);
        assert!((y.row(0)[0] - 0.7979).abs() < 1e-4);
    }

    #[test]
    fn zero_field_reads_zero() {
        let s = place_sensors_uniform(3, Domain::unit_rod()).unwrap();
        let y = sample_outputs(&field(|_| 0.0), &s, 1.0).unwrap();
        assert_eq!(y.peak_norm(), 0.0);
    }

    #[test]
    fn out_of_grid_sensor() {
        let z = vec![0.0, 0.5, 1.0];
        let f = SpatioTemporalField::new(z, vec![0.0], vec![0.0; 3]).unwrap();
        let s = SensorArray::new(vec![2.0], Domain::unit_rod()).unwrap();
        assert!(sample_outputs(&f, &s, 1.0).is_err());
    }
}
