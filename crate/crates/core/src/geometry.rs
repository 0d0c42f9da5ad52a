//! Riemannian geometry of the space manifold in a single chart.
//!
//! A [`SpaceChart`] carries the metric `G(y)` on an axis-aligned box of
//! coordinates together with its first derivatives (closed form for the
//! catalog charts, central differences otherwise). Everything else in the
//! crate (Christoffel symbols, curvature, geodesics, Jacobi fields,
//! covariant derivatives along paths) is derived from it.
//!
//! Curvature convention: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z` with
//! components `R(∂_k, ∂_l)∂_j = R^i_{jkl} ∂_i`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type MetricDerivativeFn = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;

/// Default central-difference step for metric derivatives.
pub const DEFAULT_METRIC_STEP: f64 = 1e-5;
/// Default step of the fourth-order stencil used to difference Christoffel symbols.
pub const DEFAULT_CURVATURE_STEP: f64 = 1e-3;

/// Axis-aligned validity box of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ChartDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn unbounded(dim: usize) -> Self {
        Self::new(vec![-1e8; dim], vec![1e8; dim])
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.contains_with_margin(y, 0.0)
    }

    /// True if the box of half-width `margin` around `y` lies inside the domain.
    pub fn contains_with_margin(&self, y: &[f64], margin: f64) -> bool {
        y.len() == self.lower.len()
            && y.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| v.is_finite() && *v - margin >= *lo && *v + margin <= *hi)
    }
}

/// The space manifold `S` in one coordinate chart.
#[derive(Clone)]
pub struct SpaceChart {
    name: String,
    dim: usize,
    metric: MetricFn,
    derivative: Option<MetricDerivativeFn>,
    domain: ChartDomain,
    metric_step: f64,
    curvature_step: f64,
}

impl fmt::Debug for SpaceChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpaceChart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("closed_form_derivative", &self.derivative.is_some())
            .field("domain", &self.domain)
            .finish()
    }
}

impl SpaceChart {
    /// A chart with a programmatically supplied metric. Derivatives are
    /// taken by central differences until [`with_metric_derivative`] is
    /// called.
    ///
    /// [`with_metric_derivative`]: SpaceChart::with_metric_derivative
    pub fn custom<F>(name: impl Into<String>, dim: usize, domain: ChartDomain, metric: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        assert!(dim > 0, "chart dimension must be positive");
        assert_eq!(domain.lower.len(), dim);
        Self {
            name: name.into(),
            dim,
            metric: Arc::new(metric),
            derivative: None,
            domain,
            metric_step: DEFAULT_METRIC_STEP,
            curvature_step: DEFAULT_CURVATURE_STEP,
        }
    }

    /// Registers closed-form derivatives; entry `k` of the returned vector is `∂_k G`.
    pub fn with_metric_derivative<F>(mut self, derivative: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    /// Drops any registered closed-form derivative, forcing central differences.
    pub fn without_metric_derivative(mut self) -> Self {
        self.derivative = None;
        self
    }

    pub fn with_metric_step(mut self, step: f64) -> Self {
        self.metric_step = step;
        self
    }

    pub fn with_curvature_step(mut self, step: f64) -> Self {
        self.curvature_step = step;
        self
    }

    /// Flat `ℝ^m` with the identity metric.
    pub fn euclidean(dim: usize) -> Self {
        Self::custom(
            format!("euclidean:{dim}"),
            dim,
            ChartDomain::unbounded(dim),
            move |_| DMatrix::identity(dim, dim),
        )
        .with_metric_derivative(move |_| vec![DMatrix::zeros(dim, dim); dim])
    }

    /// Unit round sphere in polar coordinates `(θ, φ)`, `G = diag(1, sin²θ)`.
    pub fn sphere() -> Self {
        let domain = ChartDomain::new(vec![0.05, -4.0 * PI], vec![PI - 0.05, 4.0 * PI]);
        Self::custom("sphere", 2, domain, |y| {
            let s = y[0].sin();
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s * s])
        })
        .with_metric_derivative(|y| {
            let d = 2.0 * y[0].sin() * y[0].cos();
            vec![DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, d]), DMatrix::zeros(2, 2)]
        })
    }

    /// Poincaré half-plane `{y₂ > 0}`, `G = diag(1/y₂², 1/y₂²)`.
    pub fn half_plane() -> Self {
        let domain = ChartDomain::new(vec![-50.0, 1e-3], vec![50.0, 1e3]);
        Self::custom("half-plane", 2, domain, |y| {
            let c = 1.0 / (y[1] * y[1]);
            DMatrix::from_row_slice(2, 2, &[c, 0.0, 0.0, c])
        })
        .with_metric_derivative(|y| {
            let d = -2.0 / (y[1] * y[1] * y[1]);
            vec![DMatrix::zeros(2, 2), DMatrix::from_row_slice(2, 2, &[d, 0.0, 0.0, d])]
        })
    }

    /// Resolves `"euclidean:m"`, `"sphere"` or `"half-plane"`.
    pub fn from_catalog(name: &str) -> Result<Self> {
        let name = name.trim();
        match name {
            "sphere" => Ok(Self::sphere()),
            "half-plane" | "hyperbolic" => Ok(Self::half_plane()),
            _ => match name.strip_prefix("euclidean:") {
                Some(m) => match m.trim().parse::<usize>() {
                    Ok(m) if m > 0 => Ok(Self::euclidean(m)),
                    _ => Err(Error::UnknownCatalogEntry(name.to_string())),
                },
                None if name == "euclidean" => Ok(Self::euclidean(2)),
                None => Err(Error::UnknownCatalogEntry(name.to_string())),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn has_closed_form_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.domain.contains(y)
    }

    pub fn check_point(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, chart has dimension {}",
                y.len(),
                self.dim
            )));
        }
        if !self.domain.contains(y) {
            return Err(Error::OutsideChart { point: y.to_vec() });
        }
        Ok(())
    }

    /// `G(y)`; no domain check.
    pub fn metric(&self, y: &[f64]) -> DMatrix<f64> {
        (self.metric)(y)
    }

    /// `G(u, v)` at `y`.
    pub fn inner(&self, y: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let g = self.metric(y);
        quadratic_form(&g, u, v)
    }

    /// Lowers an index: `(♭u)_i = G_ij u^j`.
    pub fn lower(&self, y: &[f64], u: &[f64]) -> Vec<f64> {
        let g = self.metric(y);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| g[(i, j)] * u[j]).sum())
            .collect()
    }

    /// `∂_k G_ij` for every `k`, closed-form if registered.
    pub fn metric_derivative(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        if let Some(d) = &self.derivative {
            return d(y);
        }
        let h = self.metric_step;
        let mut yp = y.to_vec();
        (0..self.dim)
            .map(|k| {
                yp[k] = y[k] + h;
                let gp = self.metric(&yp);
                yp[k] = y[k] - h;
                let gm = self.metric(&yp);
                yp[k] = y[k];
                (gp - gm) / (2.0 * h)
            })
            .collect()
    }

    pub fn inverse_metric(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.metric(y);
        invert_spd(&g).ok_or_else(|| Error::DegenerateMetric { point: y.to_vec() })
    }

    /// Levi-Civita symbols `Γ^i_jk = ½ g^il (∂_j g_lk + ∂_k g_lj − ∂_l g_jk)`.
    pub fn christoffel(&self, y: &[f64]) -> Result<Christoffel> {
        self.check_point(y)?;
        let ginv = self.inverse_metric(y)?;
        let dg = self.metric_derivative(y);
        let m = self.dim;
        let mut lowered = vec![0.0; m * m * m];
        for l in 0..m {
            for j in 0..m {
                for k in j..m {
                    let v = 0.5 * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                    lowered[(l * m + j) * m + k] = v;
                    lowered[(l * m + k) * m + j] = v;
                }
            }
        }
        let mut data = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in j..m {
                    let v: f64 = (0..m).map(|l| ginv[(i, l)] * lowered[(l * m + j) * m + k]).sum();
                    data[(i * m + j) * m + k] = v;
                    data[(i * m + k) * m + j] = v;
                }
            }
        }
        Ok(Christoffel { dim: m, data })
    }

    /// Riemann tensor from a fourth-order difference of the Christoffel symbols.
    pub fn curvature(&self, y: &[f64]) -> Result<CurvatureTensor> {
        self.check_point(y)?;
        let h = self.curvature_step;
        if !self.domain.contains_with_margin(y, 2.0 * h) {
            return Err(Error::InsufficientStencilRoom {
                point: y.to_vec(),
                step: h,
            });
        }
        let m = self.dim;
        let gamma = self.christoffel(y)?;
        // dgamma[k] = ∂_k Γ
        let mut dgamma = Vec::with_capacity(m);
        let mut yp = y.to_vec();
        for k in 0..m {
            let mut at = |offset: f64| -> Result<Christoffel> {
                yp[k] = y[k] + offset;
                let c = self.christoffel(&yp);
                yp[k] = y[k];
                c
            };
            let p2 = at(2.0 * h)?;
            let p1 = at(h)?;
            let m1 = at(-h)?;
            let m2 = at(-2.0 * h)?;
            let data = (0..m * m * m)
                .map(|n| (8.0 * (p1.data[n] - m1.data[n]) - (p2.data[n] - m2.data[n])) / (12.0 * h))
                .collect();
            dgamma.push(Christoffel { dim: m, data });
        }
        let mut data = vec![0.0; m * m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut v = dgamma[k].get(i, l, j) - dgamma[l].get(i, k, j);
                        for n in 0..m {
                            v += gamma.get(i, k, n) * gamma.get(n, l, j) - gamma.get(i, l, n) * gamma.get(n, k, j);
                        }
                        data[((i * m + j) * m + k) * m + l] = v;
                    }
                }
            }
        }
        Ok(CurvatureTensor { dim: m, data })
    }

    /// Smallest eigenvalue of `G(y)`.
    pub fn min_metric_eigenvalue(&self, y: &[f64]) -> f64 {
        let g = self.metric(y);
        let sym = (&g + g.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}

/// Christoffel symbols `Γ^i_jk` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    /// `Γ^i_jk u^j v^k`.
    pub fn contract(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let m = self.dim;
        (0..m)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..m {
                    if u[j] == 0.0 {
                        continue;
                    }
                    for k in 0..m {
                        s += self.get(i, j, k) * u[j] * v[k];
                    }
                }
                s
            })
            .collect()
    }
}

/// Riemann curvature components `R^i_{jkl}` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    dim: usize,
    data: Vec<f64>,
}

impl CurvatureTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let m = self.dim;
        self.data[((i * m + j) * m + k) * m + l]
    }

    /// `R(X,Y)Z`, i.e. `R^i_{jkl} Z^j X^k Y^l`.
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let m = self.dim;
        (0..m)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            s += self.get(i, j, k, l) * z[j] * x[k] * y[l];
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// Largest violation of `R^i_{jkl} = −R^i_{jlk}`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let m = self.dim;
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        worst = worst.max((self.get(i, j, k, l) + self.get(i, j, l, k)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest violation of the first Bianchi identity.
    pub fn bianchi_defect(&self) -> f64 {
        let m = self.dim;
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let s = self.get(i, j, k, l) + self.get(i, k, l, j) + self.get(i, l, j, k);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

/// A point and a tangent vector in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl GeodesicState {
    pub fn new(position: Vec<f64>, velocity: Vec<f64>) -> Self {
        assert_eq!(position.len(), velocity.len());
        Self { position, velocity }
    }
}

/// Classical RK4 step for an autonomous system `ż = f(z)`.
fn rk4_step<F>(z: &[f64], h: f64, f: &mut F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    let n = z.len();
    let k1 = f(z, 0.0)?;
    let z2: Vec<f64> = (0..n).map(|i| z[i] + 0.5 * h * k1[i]).collect();
    let k2 = f(&z2, 0.5)?;
    let z3: Vec<f64> = (0..n).map(|i| z[i] + 0.5 * h * k2[i]).collect();
    let k3 = f(&z3, 0.5)?;
    let z4: Vec<f64> = (0..n).map(|i| z[i] + h * k3[i]).collect();
    let k4 = f(&z4, 1.0)?;
    Ok((0..n)
        .map(|i| z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn chart_exit(chart: &SpaceChart, y: &[f64], parameter: f64) -> Result<()> {
    if chart.contains(y) {
        Ok(())
    } else {
        Err(Error::ChartExit {
            parameter,
            point: y.to_vec(),
        })
    }
}

/// Integrates the geodesic equation over `[0, duration]` with `steps` RK4
/// steps, returning all `steps + 1` states.
pub fn geodesic_trajectory(
    chart: &SpaceChart,
    state: &GeodesicState,
    duration: f64,
    steps: usize,
) -> Result<Vec<GeodesicState>> {
    let m = chart.dim();
    chart.check_point(&state.position)?;
    let steps = steps.max(1);
    let h = duration / steps as f64;
    let mut z: Vec<f64> = state.position.iter().chain(&state.velocity).copied().collect();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.clone());
    for n in 0..steps {
        let t0 = n as f64 * h;
        let mut rhs = |z: &[f64], frac: f64| -> Result<Vec<f64>> {
            let (y, v) = z.split_at(m);
            chart_exit(chart, y, t0 + frac * h)?;
            let gamma = chart.christoffel(y)?;
            let acc = gamma.contract(v, v);
            Ok(v.iter().copied().chain(acc.into_iter().map(|a| -a)).collect())
        };
        z = rk4_step(&z, h, &mut rhs)?;
        chart_exit(chart, &z[..m], t0 + h)?;
        out.push(GeodesicState::new(z[..m].to_vec(), z[m..].to_vec()));
    }
    Ok(out)
}

/// `exp_y(v)`: the geodesic through `state` evaluated at parameter 1,
/// together with its velocity there.
pub fn exp_map(chart: &SpaceChart, state: &GeodesicState, steps: usize) -> Result<GeodesicState> {
    if state.velocity.iter().all(|v| *v == 0.0) {
        chart.check_point(&state.position)?;
        return Ok(state.clone());
    }
    let mut traj = geodesic_trajectory(chart, state, 1.0, steps)?;
    Ok(traj.pop().expect("trajectory has at least one state"))
}

/// Jacobi field data at the end of an integration.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiSample {
    /// `γ(s)`.
    pub position: Vec<f64>,
    /// `γ̇(s)`.
    pub velocity: Vec<f64>,
    /// `J(s)`.
    pub field: Vec<f64>,
    /// `DJ/ds(s)`.
    pub derivative: Vec<f64>,
}

/// Jacobi field along `s ↦ exp_y(s v)` with `J(0) = 0`, `DJ/ds(0) = w`,
/// evaluated at `s` after `steps` RK4 steps.
pub fn jacobi_field(chart: &SpaceChart, y: &[f64], v: &[f64], w: &[f64], s: f64, steps: usize) -> Result<JacobiSample> {
    jacobi_field_with_initial(chart, y, v, &vec![0.0; w.len()], w, s, steps)
}

/// Jacobi field with general initial data `J(0) = j0`, `DJ/ds(0) = p0`.
pub fn jacobi_field_with_initial(
    chart: &SpaceChart,
    y: &[f64],
    v: &[f64],
    j0: &[f64],
    p0: &[f64],
    s: f64,
    steps: usize,
) -> Result<JacobiSample> {
    let m = chart.dim();
    chart.check_point(y)?;
    if v.len() != m || j0.len() != m || p0.len() != m {
        return Err(Error::DimensionMismatch("jacobi field data".into()));
    }
    let steps = steps.max(1);
    let h = s / steps as f64;
    let mut z: Vec<f64> = y.iter().chain(v).chain(j0).chain(p0).copied().collect();
    for n in 0..steps {
        let t0 = n as f64 * h;
        let mut rhs = |z: &[f64], frac: f64| -> Result<Vec<f64>> {
            let pos = &z[..m];
            let vel = &z[m..2 * m];
            let jf = &z[2 * m..3 * m];
            let p = &z[3 * m..];
            chart_exit(chart, pos, t0 + frac * h)?;
            let gamma = chart.christoffel(pos)?;
            let acc = gamma.contract(vel, vel);
            let gj = gamma.contract(vel, jf);
            let gp = gamma.contract(vel, p);
            let rj = if jf.iter().any(|c| *c != 0.0) {
                chart.curvature(pos)?.apply(jf, vel, vel)
            } else {
                vec![0.0; m]
            };
            let mut out = Vec::with_capacity(4 * m);
            out.extend_from_slice(vel);
            out.extend(acc.iter().map(|a| -a));
            out.extend((0..m).map(|i| p[i] - gj[i]));
            out.extend((0..m).map(|i| -gp[i] - rj[i]));
            Ok(out)
        };
        z = rk4_step(&z, h, &mut rhs)?;
        chart_exit(chart, &z[..m], t0 + h)?;
    }
    Ok(JacobiSample {
        position: z[..m].to_vec(),
        velocity: z[m..2 * m].to_vec(),
        field: z[2 * m..3 * m].to_vec(),
        derivative: z[3 * m..].to_vec(),
    })
}

/// Parallel transport of `u` along the geodesic through `state`; returns
/// the transported vector at every step.
pub fn parallel_transport_along_geodesic(
    chart: &SpaceChart,
    state: &GeodesicState,
    u: &[f64],
    duration: f64,
    steps: usize,
) -> Result<Vec<(GeodesicState, Vec<f64>)>> {
    let m = chart.dim();
    chart.check_point(&state.position)?;
    let steps = steps.max(1);
    let h = duration / steps as f64;
    let mut z: Vec<f64> = state.position.iter().chain(&state.velocity).chain(u).copied().collect();
    let mut out = Vec::with_capacity(steps + 1);
    out.push((state.clone(), u.to_vec()));
    for n in 0..steps {
        let t0 = n as f64 * h;
        let mut rhs = |z: &[f64], frac: f64| -> Result<Vec<f64>> {
            let pos = &z[..m];
            let vel = &z[m..2 * m];
            let field = &z[2 * m..];
            chart_exit(chart, pos, t0 + frac * h)?;
            let gamma = chart.christoffel(pos)?;
            let acc = gamma.contract(vel, vel);
            let tr = gamma.contract(vel, field);
            let mut out = Vec::with_capacity(3 * m);
            out.extend_from_slice(vel);
            out.extend(acc.iter().map(|a| -a));
            out.extend(tr.iter().map(|a| -a));
            Ok(out)
        };
        z = rk4_step(&z, h, &mut rhs)?;
        chart_exit(chart, &z[..m], t0 + h)?;
        out.push((
            GeodesicState::new(z[..m].to_vec(), z[m..2 * m].to_vec()),
            z[2 * m..].to_vec(),
        ));
    }
    Ok(out)
}

/// Which difference stencil produced a time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeStencil {
    /// Second-order central difference.
    Central,
    /// Second-order one-sided difference at the first sample.
    Forward,
    /// Second-order one-sided difference at the last sample.
    Backward,
}

impl TimeStencil {
    pub fn order(&self) -> usize {
        2
    }
}

/// Value of a covariant time derivative and the stencil used to compute it.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariantDerivative {
    pub value: Vec<f64>,
    pub stencil: TimeStencil,
}

/// Second-order time derivative of sampled vectors at index `n`.
pub(crate) fn time_derivative(samples: &[&[f64]], dt: f64, n: usize) -> (Vec<f64>, TimeStencil) {
    let len = samples.len();
    let m = samples[n].len();
    if n > 0 && n + 1 < len {
        let d = (0..m)
            .map(|i| (samples[n + 1][i] - samples[n - 1][i]) / (2.0 * dt))
            .collect();
        (d, TimeStencil::Central)
    } else if n == 0 {
        let d = (0..m)
            .map(|i| (3.0 * (samples[1][i] - samples[0][i]) - (samples[2][i] - samples[1][i])) / (2.0 * dt))
            .collect();
        (d, TimeStencil::Forward)
    } else {
        let d = (0..m)
            .map(|i| (3.0 * (samples[n][i] - samples[n - 1][i]) - (samples[n - 1][i] - samples[n - 2][i])) / (2.0 * dt))
            .collect();
        (d, TimeStencil::Backward)
    }
}

/// `(Du/dt)^i = u̇^i + Γ^i_jk(y) ẏ^j u^k` at sample `n` of a path sampled
/// with uniform step `dt`.
pub fn covariant_derivative_along_path(
    chart: &SpaceChart,
    path: &[Vec<f64>],
    field: &[Vec<f64>],
    dt: f64,
    n: usize,
) -> Result<CovariantDerivative> {
    let p: Vec<&[f64]> = path.iter().map(Vec::as_slice).collect();
    let f: Vec<&[f64]> = field.iter().map(Vec::as_slice).collect();
    covariant_derivative_samples(chart, &p, &f, dt, n)
}

pub(crate) fn covariant_derivative_samples(
    chart: &SpaceChart,
    path: &[&[f64]],
    field: &[&[f64]],
    dt: f64,
    n: usize,
) -> Result<CovariantDerivative> {
    if path.len() != field.len() {
        return Err(Error::DimensionMismatch("path and field sample counts differ".into()));
    }
    if path.len() < 3 {
        return Err(Error::TooFewTimeSlices {
            required: 3,
            available: path.len(),
        });
    }
    if n >= path.len() {
        return Err(Error::IndexOutOfRange {
            index: n,
            len: path.len(),
        });
    }
    for y in path {
        chart.check_point(y)?;
    }
    let (ydot, stencil) = time_derivative(path, dt, n);
    let (udot, _) = time_derivative(field, dt, n);
    let gamma = chart.christoffel(path[n])?;
    let corr = gamma.contract(&ydot, field[n]);
    Ok(CovariantDerivative {
        value: udot.iter().zip(&corr).map(|(a, b)| a + b).collect(),
        stencil,
    })
}

pub(crate) fn quadratic_form(g: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let m = u.len();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            s += g[(i, j)] * u[i] * v[j];
        }
    }
    s
}

pub(crate) fn invert_spd(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = g.clone().cholesky()?;
    let inv = chol.inverse();
    if inv.iter().all(|v| v.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn euclidean_christoffel_vanishes() {
        let c = SpaceChart::euclidean(3).christoffel(&[0.3, -1.0, 2.0]).unwrap();
        assert!(c.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sphere_christoffel_hand_values() {
        let chart = SpaceChart::sphere();
        let t = PI / 3.0;
        let c = chart.christoffel(&[t, 0.0]).unwrap();
        assert_abs_diff_eq!(c.get(0, 1, 1), -t.sin() * t.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(c.get(1, 0, 1), t.cos() / t.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(c.get(1, 1, 0), t.cos() / t.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(c.get(0, 0, 0), 0.0);
    }

    #[test]
    fn half_plane_christoffel_hand_values() {
        let c = SpaceChart::half_plane().christoffel(&[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(c.get(0, 0, 1), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.get(1, 0, 0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.get(1, 1, 1), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn finite_difference_derivative_matches_closed_form() {
        let closed = SpaceChart::sphere();
        let fd = SpaceChart::sphere().without_metric_derivative();
        let y = [1.1, 0.4];
        let a = closed.christoffel(&y).unwrap();
        let b = fd.christoffel(&y).unwrap();
        for n in 0..8 {
            assert_abs_diff_eq!(a.data[n], b.data[n], epsilon = 1e-9);
        }
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let chart = SpaceChart::custom("flat-collapse", 2, ChartDomain::unbounded(2), |y| {
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, y[0] * y[0]])
        });
        let err = chart.christoffel(&[0.0, 1.0]).unwrap_err();
        assert_eq!(err, Error::DegenerateMetric { point: vec![0.0, 1.0] });
    }

    #[test]
    fn sphere_curvature_at_equator() {
        let r = SpaceChart::sphere().curvature(&[PI / 2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r.get(0, 1, 0, 1), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.get(0, 1, 1, 0), -1.0, epsilon = 1e-9);
    }

    #[test]
    fn curvature_matches_constant_curvature_form() {
        for (chart, k, y) in [
            (SpaceChart::sphere(), 1.0, vec![1.0, 0.3]),
            (SpaceChart::half_plane(), -1.0, vec![0.2, 0.7]),
        ] {
            let r = chart.curvature(&y).unwrap();
            let g = chart.metric(&y);
            let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            for i in 0..2 {
                for j in 0..2 {
                    for kk in 0..2 {
                        for l in 0..2 {
                            let expect = k * (delta(i, kk) * g[(j, l)] - delta(i, l) * g[(j, kk)]);
                            assert_abs_diff_eq!(r.get(i, j, kk, l), expect, epsilon = 1e-8);
                        }
                    }
                }
            }
            assert!(r.antisymmetry_defect() < 1e-9);
            assert!(r.bianchi_defect() < 1e-9);
        }
    }

    #[test]
    fn curvature_near_boundary_needs_room() {
        let chart = SpaceChart::sphere();
        let err = chart.curvature(&[0.0505, 0.0]).unwrap_err();
        assert!(matches!(err, Error::InsufficientStencilRoom { .. }));
    }

    #[test]
    fn exp_map_examples() {
        let e = SpaceChart::euclidean(2);
        let out = exp_map(&e, &GeodesicState::new(vec![0.0, 0.0], vec![1.0, 2.0]), 10).unwrap();
        assert_abs_diff_eq!(out.position[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.position[1], 2.0, epsilon = 1e-14);

        let s = SpaceChart::sphere();
        let speed = 0.7;
        let out = exp_map(&s, &GeodesicState::new(vec![PI / 2.0, 0.0], vec![0.0, speed]), 50).unwrap();
        assert_abs_diff_eq!(out.position[0], PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.position[1], speed, epsilon = 1e-12);

        let y = vec![1.0, 0.5];
        let out = exp_map(&s, &GeodesicState::new(y.clone(), vec![0.0, 0.0]), 5).unwrap();
        assert_eq!(out.position, y);
    }

    #[test]
    fn exp_map_reports_chart_exit() {
        let s = SpaceChart::sphere();
        let err = exp_map(&s, &GeodesicState::new(vec![0.5, 0.0], vec![-3.0, 0.0]), 100).unwrap_err();
        match err {
            Error::ChartExit { parameter, .. } => assert!(parameter > 0.1 && parameter < 0.2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn geodesic_speed_is_conserved() {
        let s = SpaceChart::sphere();
        let st = GeodesicState::new(vec![1.0, 0.2], vec![0.4, 0.9]);
        let traj = geodesic_trajectory(&s, &st, 1.0, 200).unwrap();
        let e0 = s.inner(&st.position, &st.velocity, &st.velocity);
        for g in traj {
            assert_abs_diff_eq!(s.inner(&g.position, &g.velocity, &g.velocity), e0, epsilon = 1e-10);
        }
    }

    #[test]
    fn jacobi_field_examples() {
        let e = SpaceChart::euclidean(2);
        let j = jacobi_field(&e, &[0.0, 0.0], &[1.0, 0.0], &[0.3, -0.2], 0.8, 20).unwrap();
        assert_abs_diff_eq!(j.field[0], 0.24, epsilon = 1e-14);
        assert_abs_diff_eq!(j.field[1], -0.16, epsilon = 1e-14);

        let s = SpaceChart::sphere();
        for sv in [0.25, 0.5, 1.0] {
            let j = jacobi_field(&s, &[PI / 2.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], sv, 200).unwrap();
            let norm = s.inner(&j.position, &j.field, &j.field).sqrt();
            assert_abs_diff_eq!(norm, sv.sin(), epsilon = 1e-10);
        }

        let j = jacobi_field(&s, &[1.0, 0.0], &[0.3, 0.5], &[0.0, 0.0], 1.0, 20).unwrap();
        assert!(j.field.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn jacobi_initial_derivative_matches() {
        let s = SpaceChart::sphere();
        let w = [0.3, 0.7];
        let j = jacobi_field(&s, &[1.0, 0.0], &[0.3, 0.5], &w, 1e-4, 1).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(j.field[i] / 1e-4, w[i], epsilon = 1e-3);
        }
    }

    #[test]
    fn covariant_derivative_examples() {
        let e = SpaceChart::euclidean(2);
        let dt = 0.01;
        let times: Vec<f64> = (0..201).map(|n| n as f64 * dt).collect();
        let path: Vec<Vec<f64>> = times.iter().map(|t| vec![*t, 0.0]).collect();
        let field: Vec<Vec<f64>> = times.iter().map(|t| vec![*t, t * t]).collect();
        let d = covariant_derivative_along_path(&e, &path, &field, dt, 100).unwrap();
        assert_eq!(d.stencil, TimeStencil::Central);
        assert_abs_diff_eq!(d.value[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.value[1], 2.0, epsilon = 1e-12);

        let s = SpaceChart::sphere();
        let path = vec![vec![1.0, 0.3]; 5];
        let field = vec![vec![0.2, -0.1]; 5];
        let d = covariant_derivative_along_path(&s, &path, &field, 0.1, 0).unwrap();
        assert_eq!(d.stencil, TimeStencil::Forward);
        assert!(d.value.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn parallel_transported_field_has_zero_covariant_derivative() {
        let s = SpaceChart::sphere();
        let st = GeodesicState::new(vec![1.0, 0.0], vec![0.3, 0.8]);
        let dt = 1e-2;
        let out = parallel_transport_along_geodesic(&s, &st, &[0.5, -0.4], 1.0, 100).unwrap();
        let path: Vec<Vec<f64>> = out.iter().map(|(g, _)| g.position.clone()).collect();
        let field: Vec<Vec<f64>> = out.iter().map(|(_, u)| u.clone()).collect();
        let d = covariant_derivative_along_path(&s, &path, &field, dt, 50).unwrap();
        assert!(d.value.iter().all(|v| v.abs() < 1e-4), "{:?}", d.value);
        // transport is an isometry
        let n0 = s.inner(&path[0], &field[0], &field[0]);
        let n1 = s.inner(&path[100], &field[100], &field[100]);
        assert_abs_diff_eq!(n0, n1, epsilon = 1e-10);
    }

    #[test]
    fn catalog_lookup() {
        assert_eq!(SpaceChart::from_catalog("euclidean:3").unwrap().dim(), 3);
        assert_eq!(SpaceChart::from_catalog("sphere").unwrap().name(), "sphere");
        assert_eq!(SpaceChart::from_catalog("half-plane").unwrap().dim(), 2);
        assert!(matches!(
            SpaceChart::from_catalog("torus"),
            Err(Error::UnknownCatalogEntry(_))
        ));
    }
}
