//! Discretized configurations, their 1-jets, velocity, covariant
//! acceleration and the weak metric pairing induced by the mass form.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{covariant_derivative_samples, time_derivative, SpaceChart};
use crate::grid::{d1, d_mixed, BodyGrid};

/// Smallest singular value of `∂κ/∂x` accepted as an embedding.
pub const EMBEDDING_TOLERANCE: f64 = 1e-8;

/// A stationary configuration `φ: B → S`, sampled on the body grid.
/// Values are stored point-major: `values[p * m + i] = φ^i(x_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    grid: BodyGrid,
    dim: usize,
    values: Vec<f64>,
}

impl Configuration {
    pub fn new(chart: &SpaceChart, grid: BodyGrid, values: Vec<f64>) -> Result<Self> {
        let dim = chart.dim();
        if values.len() != grid.len() * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} points in dimension {}",
                values.len(),
                grid.len(),
                dim
            )));
        }
        if grid.dim() > dim {
            return Err(Error::DimensionMismatch(format!(
                "body dimension {} exceeds space dimension {}",
                grid.dim(),
                dim
            )));
        }
        let cfg = Self { grid, dim, values };
        cfg.validate(chart, 0)?;
        Ok(cfg)
    }

    pub fn from_fn<F>(chart: &SpaceChart, grid: BodyGrid, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let values = (0..grid.len()).flat_map(|p| f(&grid.point(p))).collect();
        Self::new(chart, grid, values)
    }

    fn validate(&self, chart: &SpaceChart, slice: usize) -> Result<()> {
        for p in 0..self.grid.len() {
            let y = self.at(p);
            if !chart.contains(y) {
                return Err(Error::OutsideChart { point: y.to_vec() });
            }
        }
        let jet = Jet1Field::from_values(&self.grid, self.dim, &self.values);
        for p in 0..self.grid.len() {
            let sigma = jet.min_singular_value(p);
            if !(sigma >= EMBEDDING_TOLERANCE) {
                return Err(Error::NotAnEmbedding {
                    slice,
                    point: p,
                    sigma_min: sigma,
                });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &BodyGrid {
        &self.grid
    }

    /// Space dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.values[p * self.dim..(p + 1) * self.dim]
    }

    pub fn jet(&self) -> Jet1Field {
        Jet1Field::from_values(&self.grid, self.dim, &self.values)
    }
}

/// A motion `κ: I × B → S` on `T + 1` equispaced time slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Motion {
    grid: BodyGrid,
    dim: usize,
    dt: f64,
    t0: f64,
    slices: Vec<Vec<f64>>,
}

impl Motion {
    /// Validates chart membership and the embedding condition on every slice.
    pub fn new(chart: &SpaceChart, grid: BodyGrid, dt: f64, slices: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_start(chart, grid, 0.0, dt, slices)
    }

    pub fn with_start(chart: &SpaceChart, grid: BodyGrid, t0: f64, dt: f64, slices: Vec<Vec<f64>>) -> Result<Self> {
        let dim = chart.dim();
        if slices.is_empty() {
            return Err(Error::TooFewTimeSlices {
                required: 1,
                available: 0,
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidGrid(format!("time step must be positive, got {dt}")));
        }
        if grid.dim() > dim {
            return Err(Error::DimensionMismatch(format!(
                "body dimension {} exceeds space dimension {}",
                grid.dim(),
                dim
            )));
        }
        for s in &slices {
            if s.len() != grid.len() * dim {
                return Err(Error::DimensionMismatch(format!(
                    "slice has {} values, expected {}",
                    s.len(),
                    grid.len() * dim
                )));
            }
        }
        let motion = Self {
            grid,
            dim,
            dt,
            t0,
            slices,
        };
        for n in 0..motion.slices.len() {
            let cfg = Configuration {
                grid: motion.grid.clone(),
                dim,
                values: motion.slices[n].clone(),
            };
            cfg.validate(chart, n)?;
        }
        Ok(motion)
    }

    /// Samples `κ(t, x)` at `t = n·dt`, `n = 0..=steps`.
    pub fn from_fn<F>(chart: &SpaceChart, grid: BodyGrid, dt: f64, steps: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, &[f64]) -> Vec<f64>,
    {
        let slices = (0..=steps)
            .map(|n| {
                let t = n as f64 * dt;
                (0..grid.len()).flat_map(|p| f(t, &grid.point(p))).collect()
            })
            .collect();
        Self::new(chart, grid, dt, slices)
    }

    /// The stationary motion `ι(φ)`: `steps + 1` copies of `φ`.
    pub fn stationary(config: &Configuration, dt: f64, steps: usize) -> Self {
        Self {
            grid: config.grid.clone(),
            dim: config.dim,
            dt,
            t0: 0.0,
            slices: vec![config.values.clone(); steps + 1],
        }
    }

    pub fn grid(&self) -> &BodyGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn start_time(&self) -> f64 {
        self.t0
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slice_values(&self, n: usize) -> &[f64] {
        &self.slices[n]
    }

    pub fn slices(&self) -> &[Vec<f64>] {
        &self.slices
    }

    pub fn at(&self, n: usize, p: usize) -> &[f64] {
        &self.slices[n][p * self.dim..(p + 1) * self.dim]
    }

    pub fn slice(&self, n: usize) -> Configuration {
        Configuration {
            grid: self.grid.clone(),
            dim: self.dim,
            values: self.slices[n].clone(),
        }
    }

    /// World line of material point `p`.
    pub fn world_line(&self, p: usize) -> Vec<&[f64]> {
        (0..self.len()).map(|n| self.at(n, p)).collect()
    }

    fn check_slice(&self, n: usize) -> Result<()> {
        if n >= self.len() {
            Err(Error::IndexOutOfRange {
                index: n,
                len: self.len(),
            })
        } else {
            Ok(())
        }
    }

    fn require(&self, slices: usize) -> Result<()> {
        if self.len() < slices {
            Err(Error::TooFewTimeSlices {
                required: slices,
                available: self.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// The 1-jet `(x, y, A)` of a configuration at every grid point, with
/// `A^i_α = ∂κ^i/∂x^α` by second-order differences.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1Field {
    grid: BodyGrid,
    dim: usize,
    y: Vec<f64>,
    a: Vec<f64>,
}

impl Jet1Field {
    pub fn from_values(grid: &BodyGrid, dim: usize, values: &[f64]) -> Self {
        let d = grid.dim();
        let mut a = vec![0.0; grid.len() * dim * d];
        for p in 0..grid.len() {
            for i in 0..dim {
                for al in 0..d {
                    a[(p * dim + i) * d + al] = d1(grid, values, dim, i, p, al);
                }
            }
        }
        Self {
            grid: grid.clone(),
            dim,
            y: values.to_vec(),
            a,
        }
    }

    pub fn grid(&self) -> &BodyGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, p: usize) -> Vec<f64> {
        self.grid.point(p)
    }

    pub fn y(&self, p: usize) -> &[f64] {
        &self.y[p * self.dim..(p + 1) * self.dim]
    }

    /// `A` at point `p`, laid out as `a[i * d + α] = A^i_α`.
    pub fn a(&self, p: usize) -> &[f64] {
        let k = self.dim * self.grid.dim();
        &self.a[p * k..(p + 1) * k]
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    /// `∂²κ^i/∂x^α∂x^β` at `p`, laid out as `[(i * d + α) * d + β]`.
    pub fn second_derivatives(&self, p: usize) -> Vec<f64> {
        second_derivatives(&self.grid, self.dim, &self.y, p)
    }

    pub fn min_singular_value(&self, p: usize) -> f64 {
        let d = self.grid.dim();
        let a = DMatrix::from_row_slice(self.dim, d, self.a(p));
        a.singular_values().min()
    }
}

pub(crate) fn second_derivatives(grid: &BodyGrid, m: usize, values: &[f64], p: usize) -> Vec<f64> {
    let d = grid.dim();
    let mut out = vec![0.0; m * d * d];
    for i in 0..m {
        for a in 0..d {
            for b in a..d {
                let v = d_mixed(grid, values, m, i, p, a, b);
                out[(i * d + a) * d + b] = v;
                out[(i * d + b) * d + a] = v;
            }
        }
    }
    out
}

/// A vector field along a motion, `w = w^i κ*∂_{y^i}`, on the same
/// time × space grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    grid: BodyGrid,
    dim: usize,
    slices: Vec<Vec<f64>>,
}

impl DisplacementField {
    pub fn new(grid: BodyGrid, dim: usize, slices: Vec<Vec<f64>>) -> Result<Self> {
        for s in &slices {
            if s.len() != grid.len() * dim {
                return Err(Error::DimensionMismatch(format!(
                    "slice has {} values, expected {}",
                    s.len(),
                    grid.len() * dim
                )));
            }
        }
        Ok(Self { grid, dim, slices })
    }

    pub fn zeros_like(motion: &Motion) -> Self {
        Self {
            grid: motion.grid.clone(),
            dim: motion.dim,
            slices: vec![vec![0.0; motion.grid.len() * motion.dim]; motion.len()],
        }
    }

    /// Samples `w(t, x)` on the grid of `motion`.
    pub fn from_fn<F>(motion: &Motion, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> Vec<f64>,
    {
        let grid = motion.grid.clone();
        let slices = (0..motion.len())
            .map(|n| {
                let t = motion.time(n);
                (0..grid.len())
                    .flat_map(|p| {
                        let v = f(t, &grid.point(p));
                        assert_eq!(v.len(), motion.dim);
                        v
                    })
                    .collect()
            })
            .collect();
        Self {
            grid,
            dim: motion.dim,
            slices,
        }
    }

    pub fn grid(&self) -> &BodyGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slice_values(&self, n: usize) -> &[f64] {
        &self.slices[n]
    }

    pub fn slices(&self) -> &[Vec<f64>] {
        &self.slices
    }

    pub fn slices_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.slices
    }

    pub fn at(&self, n: usize, p: usize) -> &[f64] {
        &self.slices[n][p * self.dim..(p + 1) * self.dim]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.slices.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.slices.iter_mut().zip(&other.slices) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        out
    }

    fn matches(&self, motion: &Motion) -> Result<()> {
        if self.grid.len() != motion.grid.len() || self.dim != motion.dim || self.len() != motion.len() {
            Err(Error::DimensionMismatch(
                "displacement field does not match the motion grid".into(),
            ))
        } else {
            Ok(())
        }
    }
}

/// The 1-jet of `κ` at time slice `n`.
pub fn jet(motion: &Motion, n: usize) -> Result<Jet1Field> {
    motion.check_slice(n)?;
    Ok(Jet1Field::from_values(&motion.grid, motion.dim, &motion.slices[n]))
}

/// `V = ∂κ/∂t`: central in time, one-sided at the ends.
pub fn velocity(motion: &Motion) -> Result<DisplacementField> {
    motion.require(3)?;
    let m = motion.dim;
    let mut slices = vec![vec![0.0; motion.grid.len() * m]; motion.len()];
    for p in 0..motion.grid.len() {
        let line = motion.world_line(p);
        for (n, slice) in slices.iter_mut().enumerate() {
            let (v, _) = time_derivative(&line, motion.dt, n);
            slice[p * m..(p + 1) * m].copy_from_slice(&v);
        }
    }
    DisplacementField::new(motion.grid.clone(), m, slices)
}

fn second_time_derivative(samples: &[&[f64]], dt: f64, n: usize) -> Vec<f64> {
    let len = samples.len();
    let m = samples[n].len();
    let dt2 = dt * dt;
    (0..m)
        .map(|i| {
            let s = |k: usize| samples[k][i];
            if n > 0 && n + 1 < len {
                ((s(n + 1) - s(n)) - (s(n) - s(n - 1))) / dt2
            } else if n == 0 {
                (2.0 * (s(0) - s(1)) - 3.0 * (s(1) - s(2)) + (s(2) - s(3))) / dt2
            } else {
                (2.0 * (s(n) - s(n - 1)) - 3.0 * (s(n - 1) - s(n - 2)) + (s(n - 2) - s(n - 3))) / dt2
            }
        })
        .collect()
}

/// Covariant acceleration at one slice and point:
/// `A^i = ∂²κ^i/∂t² + Γ^i_lk(κ) ∂κ^l/∂t ∂κ^k/∂t`.
pub(crate) fn acceleration_at(chart: &SpaceChart, motion: &Motion, n: usize, p: usize) -> Result<Vec<f64>> {
    let line = motion.world_line(p);
    let acc = second_time_derivative(&line, motion.dt, n);
    let (v, _) = time_derivative(&line, motion.dt, n);
    let gamma = chart.christoffel(line[n])?;
    let corr = gamma.contract(&v, &v);
    Ok(acc.iter().zip(&corr).map(|(a, c)| a + c).collect())
}

/// Covariant acceleration `A = DV/dt` on every slice.
pub fn acceleration(chart: &SpaceChart, motion: &Motion) -> Result<DisplacementField> {
    motion.require(4)?;
    let m = motion.dim;
    let mut slices = vec![vec![0.0; motion.grid.len() * m]; motion.len()];
    for (n, slice) in slices.iter_mut().enumerate() {
        for p in 0..motion.grid.len() {
            let a = acceleration_at(chart, motion, n, p)?;
            slice[p * m..(p + 1) * m].copy_from_slice(&a);
        }
    }
    DisplacementField::new(motion.grid.clone(), m, slices)
}

/// `D²w/dt²` at slice `n` and point `p`, by applying the covariant time
/// derivative twice along the world line. Uses at most the slices
/// `n−2..=n+2`.
pub(crate) fn second_covariant_derivative_at(
    chart: &SpaceChart,
    motion: &Motion,
    w: &DisplacementField,
    n: usize,
    p: usize,
) -> Result<Vec<f64>> {
    let len = motion.len();
    let line = motion.world_line(p);
    let field: Vec<&[f64]> = (0..len).map(|k| w.at(k, p)).collect();
    // indices at which the first derivative is needed
    let needed: Vec<usize> = if n > 0 && n + 1 < len {
        vec![n - 1, n, n + 1]
    } else if n == 0 {
        vec![0, 1, 2]
    } else {
        vec![n - 2, n - 1, n]
    };
    let mut first = Vec::with_capacity(3);
    for &k in &needed {
        // restrict to a five-slice window so the result is local in time
        let lo = k.saturating_sub(2);
        let hi = (k + 3).min(len);
        let cd = covariant_derivative_samples(chart, &line[lo..hi], &field[lo..hi], motion.dt, k - lo)?;
        first.push(cd.value);
    }
    let path: Vec<&[f64]> = needed.iter().map(|&k| line[k]).collect();
    let du: Vec<&[f64]> = first.iter().map(Vec::as_slice).collect();
    let local = needed
        .iter()
        .position(|&k| k == n)
        .expect("n is among the stencil indices");
    Ok(covariant_derivative_samples(chart, &path, &du, motion.dt, local)?.value)
}

/// `D²w/dt²` along every material world line.
pub fn second_covariant_time_derivative(
    chart: &SpaceChart,
    motion: &Motion,
    w: &DisplacementField,
) -> Result<DisplacementField> {
    motion.require(6)?;
    w.matches(motion)?;
    let m = motion.dim;
    let mut slices = vec![vec![0.0; motion.grid.len() * m]; motion.len()];
    for (n, slice) in slices.iter_mut().enumerate() {
        for p in 0..motion.grid.len() {
            let v = second_covariant_derivative_at(chart, motion, w, n, p)?;
            slice[p * m..(p + 1) * m].copy_from_slice(&v);
        }
    }
    DisplacementField::new(motion.grid.clone(), m, slices)
}

/// Trapezoid quadrature of `∫_I ∫_B G_κ(u, w) ρ dx dt`.
pub fn pair(chart: &SpaceChart, motion: &Motion, u: &DisplacementField, w: &DisplacementField) -> Result<f64> {
    u.matches(motion)?;
    w.matches(motion)?;
    let len = motion.len();
    let mut total = 0.0;
    for n in 0..len {
        let wt = if len == 1 {
            1.0
        } else if n == 0 || n == len - 1 {
            0.5 * motion.dt
        } else {
            motion.dt
        };
        total += wt * pair_slice(chart, &motion.grid, &motion.slices[n], &u.slices[n], &w.slices[n]);
    }
    Ok(total)
}

/// Spatial trapezoid quadrature of `∫_B G_φ(u, w) ρ dx` on one slice.
pub fn pair_slice(chart: &SpaceChart, grid: &BodyGrid, config: &[f64], u: &[f64], w: &[f64]) -> f64 {
    let m = chart.dim();
    let rho = grid.density();
    (0..grid.len())
        .map(|p| {
            let s = p * m..(p + 1) * m;
            grid.quadrature_weight(p) * rho[p] * chart.inner(&config[s.clone()], &u[s.clone()], &w[s])
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn line_grid(n: usize) -> BodyGrid {
        BodyGrid::new(1, n).unwrap()
    }

    #[test]
    fn identity_jet() {
        let chart = SpaceChart::euclidean(2);
        let grid = BodyGrid::new(2, 7).unwrap();
        let cfg = Configuration::from_fn(&chart, grid, |x| x.to_vec()).unwrap();
        let jet = cfg.jet();
        for p in 0..cfg.grid().len() {
            let a = jet.a(p);
            assert_abs_diff_eq!(a[0], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(a[1], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(a[2], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(a[3], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn parabola_jet() {
        let chart = SpaceChart::euclidean(2);
        let cfg = Configuration::from_fn(&chart, line_grid(33), |x| vec![x[0], x[0] * x[0]]).unwrap();
        let jet = cfg.jet();
        let a = jet.a(16);
        assert_abs_diff_eq!(a[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn jet_error_quarters_under_refinement() {
        let chart = SpaceChart::euclidean(1);
        let err = |n: usize| {
            let cfg = Configuration::from_fn(&chart, line_grid(n), |x| vec![x[0] + 0.2 * (3.0 * x[0]).sin()]).unwrap();
            let jet = cfg.jet();
            (0..n)
                .map(|p| {
                    let x = jet.x(p)[0];
                    (jet.a(p)[0] - (1.0 + 0.6 * (3.0 * x).cos())).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(33) / err(65);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn embedding_violation_is_rejected() {
        let chart = SpaceChart::euclidean(2);
        let err = Configuration::from_fn(&chart, line_grid(9), |_| vec![0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::NotAnEmbedding { .. }));
    }

    #[test]
    fn chart_violation_is_rejected() {
        let chart = SpaceChart::sphere();
        let err = Configuration::from_fn(&chart, line_grid(9), |x| vec![0.01, x[0]]).unwrap_err();
        assert!(matches!(err, Error::OutsideChart { .. }));
    }

    #[test]
    fn velocity_examples() {
        let chart = SpaceChart::euclidean(1);
        let grid = line_grid(9);
        let cfg = Configuration::from_fn(&chart, grid.clone(), |x| vec![x[0]]).unwrap();
        let v = velocity(&Motion::stationary(&cfg, 0.1, 4)).unwrap();
        assert!(v.slices().iter().flatten().all(|c| *c == 0.0));

        let m = Motion::from_fn(&chart, grid.clone(), 0.1, 5, |t, x| vec![x[0] + 0.3 * t]).unwrap();
        let v = velocity(&m).unwrap();
        assert!(v.slices().iter().flatten().all(|c| (c - 0.3).abs() < 1e-12));

        let dt = 0.01;
        let m = Motion::from_fn(&chart, grid, dt, 200, |t, x| vec![x[0] + t * t * 0.5]).unwrap();
        let v = velocity(&m).unwrap();
        assert_abs_diff_eq!(v.at(100, 3)[0], 2.0 * 0.5, epsilon = 1e-10);
    }

    #[test]
    fn acceleration_examples() {
        let e = SpaceChart::euclidean(1);
        let grid = line_grid(9);
        let m = Motion::from_fn(&e, grid.clone(), 0.1, 6, |t, x| vec![x[0] + 0.4 * t]).unwrap();
        let a = acceleration(&e, &m).unwrap();
        assert!(a.slices().iter().flatten().all(|c| c.abs() < 1e-12));

        let m = Motion::from_fn(&e, grid.clone(), 0.1, 6, |t, x| vec![x[0] + 0.5 * t * t * 0.7]).unwrap();
        let a = acceleration(&e, &m).unwrap();
        assert!(a.slices().iter().flatten().all(|c| (c - 0.7).abs() < 1e-10));

        let s = SpaceChart::sphere();
        let omega = 0.8;
        let dt = 0.01;
        let m = Motion::from_fn(&s, grid, dt, 10, |t, x| vec![PI / 2.0, 0.3 * x[0] + omega * t]).unwrap();
        let a = acceleration(&s, &m).unwrap();
        assert!(a.slices().iter().flatten().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn second_covariant_derivative_examples() {
        let e = SpaceChart::euclidean(2);
        let grid = line_grid(7);
        let m = Motion::from_fn(&e, grid.clone(), 0.05, 8, |_, x| vec![x[0], 0.5]).unwrap();
        let w = DisplacementField::from_fn(&m, |t, _| vec![t * t * 0.3, -t * t]);
        let d = second_covariant_time_derivative(&e, &m, &w).unwrap();
        for n in 0..m.len() {
            assert_abs_diff_eq!(d.at(n, 2)[0], 0.6, epsilon = 1e-9);
            assert_abs_diff_eq!(d.at(n, 2)[1], -2.0, epsilon = 1e-9);
        }

        let s = SpaceChart::sphere();
        let cfg = Configuration::from_fn(&s, grid, |x| vec![1.0 + 0.2 * x[0], x[0]]).unwrap();
        let m = Motion::stationary(&cfg, 0.05, 6);
        let w = DisplacementField::from_fn(&m, |_, x| vec![0.1, x[0]]);
        let d = second_covariant_time_derivative(&s, &m, &w).unwrap();
        assert!(d.slices().iter().flatten().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn pair_examples() {
        let e = SpaceChart::euclidean(1);
        let grid = line_grid(9);
        let m = Motion::from_fn(&e, grid, 0.25, 4, |_, x| vec![x[0]]).unwrap();
        let one = DisplacementField::from_fn(&m, |_, _| vec![1.0]);
        let zero = DisplacementField::zeros_like(&m);
        assert_abs_diff_eq!(pair(&e, &m, &one, &one).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(pair(&e, &m, &zero, &zero).unwrap(), 0.0);
    }

    #[test]
    fn slice_mismatch_is_rejected() {
        let e = SpaceChart::euclidean(1);
        let err = Motion::new(&e, line_grid(9), 0.1, vec![vec![0.0; 8]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }
}
