//! Brute-force verifiers for the geometric identities and the linearization.
//!
//! Nothing here reuses the integrators or Christoffel symbols of
//! [`crate::geometry`]: connection coefficients come from fourth-order
//! differences of the chart metric and every ODE is stepped by a private RK4
//! loop. The chart catalog and the nonlinear residual (the object being
//! differentiated) are the only shared pieces.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constitutive::{fold_body_load, BoundaryTraction, ConstitutiveDensity, LoadingDensity};
use crate::dynamics::{boundary_residual_slice, interior_residual_slice};
use crate::error::{Error, Result};
use crate::geometry::{jacobi_field, SpaceChart};
use crate::grid::BodyGrid;
use crate::kinematics::{pair_slice, Configuration, DisplacementField, Motion};

const METRIC_STEP: f64 = 1e-3;
const CHRISTOFFEL_STEP: f64 = 2e-3;
/// RK4 steps per unit parameter for the oracle's exponential map.
pub const ORACLE_EXP_STEPS: usize = 8;

/// Outcome of a refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectReport {
    pub name: String,
    pub samples: usize,
    /// Defect at the finest level.
    pub max_defect: f64,
    /// Least-squares slope of `log defect` against `log step`.
    pub convergence_slope: f64,
    /// `(step, defect)` per level, coarsest first.
    pub levels: Vec<(f64, f64)>,
}

impl DefectReport {
    pub fn from_levels(name: impl Into<String>, samples: usize, levels: Vec<(f64, f64)>) -> Self {
        let max_defect = levels.last().map_or(0.0, |l| l.1);
        Self {
            name: name.into(),
            samples,
            max_defect,
            convergence_slope: loglog_slope(&levels),
            levels,
        }
    }
}

impl fmt::Display for DefectReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "name={} samples={} defect={:.3e} slope={:.2}",
            self.name, self.samples, self.max_defect, self.convergence_slope
        )
    }
}

/// Least-squares slope of `ln y` against `ln x`; NaN with fewer than two
/// positive samples.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn metric_partials(chart: &SpaceChart, y: &[f64]) -> Vec<DMatrix<f64>> {
    let h = METRIC_STEP;
    let mut z = y.to_vec();
    (0..y.len())
        .map(|k| {
            let mut at = |s: f64| {
                z[k] = y[k] + s;
                let g = chart.metric(&z);
                z[k] = y[k];
                g
            };
            let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
            ((p1 - m1) * 8.0 - (p2 - m2)) / (12.0 * h)
        })
        .collect()
}

/// `Γ^i_jk` at `[(i*m + j)*m + k]` from differences of the metric.
fn christoffel(chart: &SpaceChart, y: &[f64]) -> Result<Vec<f64>> {
    let m = y.len();
    let inv = chart
        .metric(y)
        .try_inverse()
        .ok_or_else(|| Error::DegenerateMetric { point: y.to_vec() })?;
    let dg = metric_partials(chart, y);
    let mut out = vec![0.0; m * m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                out[(i * m + j) * m + k] = 0.5
                    * (0..m)
                        .map(|l| inv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]))
                        .sum::<f64>();
            }
        }
    }
    Ok(out)
}

/// `∂_l Γ^i_jk` at `[l][(i*m + j)*m + k]`.
fn christoffel_partials(chart: &SpaceChart, y: &[f64]) -> Result<Vec<Vec<f64>>> {
    let h = CHRISTOFFEL_STEP;
    let mut z = y.to_vec();
    (0..y.len())
        .map(|l| {
            let mut at = |s: f64| {
                z[l] = y[l] + s;
                let g = christoffel(chart, &z);
                z[l] = y[l];
                g
            };
            let (p2, p1, m1, m2) = (at(2.0 * h)?, at(h)?, at(-h)?, at(-2.0 * h)?);
            Ok((0..p1.len())
                .map(|n| (8.0 * (p1[n] - m1[n]) - (p2[n] - m2[n])) / (12.0 * h))
                .collect())
        })
        .collect()
}

fn contract(gamma: &[f64], u: &[f64], v: &[f64]) -> Vec<f64> {
    let m = u.len();
    (0..m)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..m {
                for k in 0..m {
                    s += gamma[(i * m + j) * m + k] * u[j] * v[k];
                }
            }
            s
        })
        .collect()
}

fn rk4<F>(mut z: Vec<f64>, steps: usize, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let h = 1.0 / steps as f64;
    let n = z.len();
    let axpy = |z: &[f64], k: &[f64], a: f64| -> Vec<f64> { (0..n).map(|i| z[i] + a * k[i]).collect() };
    for _ in 0..steps {
        let k1 = f(&z)?;
        let k2 = f(&axpy(&z, &k1, 0.5 * h))?;
        let k3 = f(&axpy(&z, &k2, 0.5 * h))?;
        let k4 = f(&axpy(&z, &k3, h))?;
        for i in 0..n {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(z)
}

fn inside(chart: &SpaceChart, y: &[f64]) -> Result<()> {
    if chart.contains(y) {
        Ok(())
    } else {
        Err(Error::ChartExit {
            parameter: f64::NAN,
            point: y.to_vec(),
        })
    }
}

/// `exp_y(v)` together with the coordinate basis at `y` parallel-transported
/// to it; `frame[a]` is the image of `∂_a`.
pub fn transported_frame(chart: &SpaceChart, y: &[f64], v: &[f64], steps: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = y.len();
    chart.check_point(y)?;
    let identity: Vec<Vec<f64>> = (0..m).map(|a| (0..m).map(|i| f64::from(a == i)).collect()).collect();
    if v.iter().all(|c| *c == 0.0) {
        return Ok((y.to_vec(), identity));
    }
    let mut z: Vec<f64> = y.iter().chain(v).copied().collect();
    z.extend(identity.concat());
    let z = rk4(z, steps, |z| {
        let (pos, vel) = (&z[..m], &z[m..2 * m]);
        inside(chart, pos)?;
        let g = christoffel(chart, pos)?;
        let mut out = vel.to_vec();
        out.extend(contract(&g, vel, vel).iter().map(|a| -a));
        for a in 0..m {
            let e = &z[2 * m + a * m..2 * m + (a + 1) * m];
            out.extend(contract(&g, vel, e).iter().map(|c| -c));
        }
        Ok(out)
    })?;
    inside(chart, &z[..m])?;
    let frame = (0..m).map(|a| z[2 * m + a * m..2 * m + (a + 1) * m].to_vec()).collect();
    Ok((z[..m].to_vec(), frame))
}

/// `exp_y(v)` and `J_k(1)` for each `J_k(τ) = ∂_λ exp_y(τ(v + λ w_k))`,
/// from the coordinate variational equations.
pub fn variational_jacobi(
    chart: &SpaceChart,
    y: &[f64],
    v: &[f64],
    ws: &[&[f64]],
    steps: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = y.len();
    chart.check_point(y)?;
    if v.iter().all(|c| *c == 0.0) {
        return Ok((y.to_vec(), ws.iter().map(|w| w.to_vec()).collect()));
    }
    let mut z: Vec<f64> = y.iter().chain(v).copied().collect();
    for w in ws {
        z.extend(std::iter::repeat_n(0.0, m));
        z.extend_from_slice(w);
    }
    let z = rk4(z, steps, |z| {
        let (pos, vel) = (&z[..m], &z[m..2 * m]);
        inside(chart, pos)?;
        let g = christoffel(chart, pos)?;
        let dg = christoffel_partials(chart, pos)?;
        let mut out = vel.to_vec();
        out.extend(contract(&g, vel, vel).iter().map(|a| -a));
        for k in 0..ws.len() {
            let base = 2 * m + 2 * k * m;
            let jf = &z[base..base + m];
            let p = &z[base + m..base + 2 * m];
            out.extend_from_slice(p);
            let gp = contract(&g, vel, p);
            for i in 0..m {
                let mut s = -2.0 * gp[i];
                for (l, dl) in dg.iter().enumerate() {
                    s -= jf[l] * contract(dl, vel, vel)[i];
                }
                out.push(s);
            }
        }
        Ok(out)
    })?;
    inside(chart, &z[..m])?;
    let fields = (0..ws.len())
        .map(|k| z[2 * m + 2 * k * m..2 * m + 2 * k * m + m].to_vec())
        .collect();
    Ok((z[..m].to_vec(), fields))
}

/// How residual co-vectors at perturbed points are compared with the base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovectorComparison {
    /// Parallel transport back along the perturbing geodesic.
    #[default]
    Transported,
    /// Raw coordinate components.
    Naive,
}

/// Directional derivative of the residual of the equations of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceDerivative {
    /// Point-major interior field on the chosen slice.
    pub interior: Vec<f64>,
    pub boundary: Vec<BoundaryTraction>,
}

struct Perturbed {
    interior: Vec<f64>,
    boundary: Vec<BoundaryTraction>,
}

#[allow(clippy::too_many_arguments)]
fn perturbed_residual(
    chart: &SpaceChart,
    motion: &Motion,
    w: &DisplacementField,
    cd: &Arc<dyn ConstitutiveDensity>,
    folded: &dyn ConstitutiveDensity,
    load: &LoadingDensity,
    n: usize,
    s: f64,
    comparison: CovectorComparison,
) -> Result<Perturbed> {
    let grid = motion.grid();
    let m = motion.dim();
    let mut frames = Vec::new();
    let mut slices = Vec::with_capacity(motion.len());
    // slices read by the acceleration stencil at n
    let window = if n > 0 && n + 1 < motion.len() {
        n - 1..n + 2
    } else {
        n.saturating_sub(3)..(n + 4).min(motion.len())
    };
    for k in 0..motion.len() {
        if !window.contains(&k) {
            slices.push(motion.slice_values(k).to_vec());
            continue;
        }
        let pts: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..grid.len())
            .into_par_iter()
            .map(|p| {
                let v: Vec<f64> = w.at(k, p).iter().map(|c| s * c).collect();
                transported_frame(chart, motion.at(k, p), &v, ORACLE_EXP_STEPS)
            })
            .collect::<Result<_>>()?;
        slices.push(pts.iter().flat_map(|(y, _)| y.iter().copied()).collect::<Vec<f64>>());
        if k == n {
            frames = pts.into_iter().map(|(_, f)| f).collect();
        }
    }
    let moved = Motion::with_start(chart, grid.clone(), motion.start_time(), motion.dt(), slices)?;
    let pull = |p: usize, r: &[f64]| -> Vec<f64> {
        match comparison {
            CovectorComparison::Naive => r.to_vec(),
            CovectorComparison::Transported => (0..m).map(|a| (0..m).map(|i| r[i] * frames[p][a][i]).sum()).collect(),
        }
    };
    let r = interior_residual_slice(chart, &moved, folded, n)?;
    let interior = (0..grid.len()).flat_map(|p| pull(p, &r[p * m..(p + 1) * m])).collect();
    let mut boundary = boundary_residual_slice(cd.as_ref(), load, grid, m, moved.slice_values(n))?;
    for t in &mut boundary {
        t.values = pull(t.point, &t.values);
    }
    Ok(Perturbed { interior, boundary })
}

/// Central difference in `s` of the residual at `exp_κ(s w)` on slice `n`.
#[allow(clippy::too_many_arguments)]
pub fn fd_force_derivative(
    chart: &SpaceChart,
    motion: &Motion,
    w: &DisplacementField,
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
    n: usize,
    eps: f64,
    comparison: CovectorComparison,
) -> Result<ForceDerivative> {
    if w.len() != motion.len() || w.dim() != motion.dim() || w.grid() != motion.grid() {
        return Err(Error::DimensionMismatch(
            "displacement does not match the motion".into(),
        ));
    }
    if n >= motion.len() {
        return Err(Error::IndexOutOfRange {
            index: n,
            len: motion.len(),
        });
    }
    let folded = fold_body_load(cd.clone(), load, motion.grid());
    let run = |s: f64| perturbed_residual(chart, motion, w, cd, folded.as_ref(), load, n, s, comparison);
    let plus = run(eps)?;
    let minus = run(-eps)?;
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * eps)).collect() };
    let boundary = plus
        .boundary
        .iter()
        .zip(&minus.boundary)
        .map(|(p, q)| BoundaryTraction {
            face: p.face,
            point: p.point,
            values: diff(&p.values, &q.values),
        })
        .collect();
    Ok(ForceDerivative {
        interior: diff(&plus.interior, &minus.interior),
        boundary,
    })
}

/// A smooth random field `I × B → ℝ^m` built from low Fourier modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    d: usize,
    m: usize,
    terms: Vec<FourierTerm>,
}

#[derive(Debug, Clone, PartialEq)]
struct FourierTerm {
    component: usize,
    wave: [f64; 2],
    omega: f64,
    phase: f64,
    amplitude: f64,
}

impl FourierField {
    /// Modes `cos(π k·x + ω t + φ)` with `k_α ≤ modes`, amplitudes decaying
    /// like `1/(1 + |k|²)`, and `|ω| ≤ 1`.
    pub fn new(seed: u64, d: usize, m: usize, modes: usize, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        let k2max = if d == 2 { modes } else { 0 };
        for component in 0..m {
            for k1 in 0..=modes {
                for k2 in 0..=k2max {
                    let decay = 1.0 + (k1 * k1 + k2 * k2) as f64;
                    terms.push(FourierTerm {
                        component,
                        wave: [PI * k1 as f64, PI * k2 as f64],
                        omega: rng.gen_range(-1.0..1.0),
                        phase: rng.gen_range(0.0..2.0 * PI),
                        amplitude: amplitude * rng.gen_range(-1.0..1.0) / decay,
                    });
                }
            }
        }
        Self { d, m, terms }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for term in &self.terms {
            let kx: f64 = (0..self.d).map(|a| term.wave[a] * x[a]).sum();
            out[term.component] += term.amplitude * (kx + term.omega * t + term.phase).cos();
        }
        out
    }

    pub fn on_grid(&self, grid: &BodyGrid, t: f64) -> Vec<f64> {
        (0..grid.len()).flat_map(|p| self.eval(t, &grid.point(p))).collect()
    }

    pub fn on_motion(&self, motion: &Motion) -> DisplacementField {
        DisplacementField::from_fn(motion, |t, x| self.eval(t, x))
    }
}

/// Settings for [`metricity_defect`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricityOptions {
    pub samples: usize,
    pub seed: u64,
    pub amplitude: f64,
    /// Coarsest perturbation size; halved per level.
    pub eps: f64,
    /// Coarsest number of Jacobi integration steps; doubled per level.
    pub steps: usize,
    pub levels: usize,
}

impl Default for MetricityOptions {
    fn default() -> Self {
        Self {
            samples: 3,
            seed: 7,
            amplitude: 0.3,
            eps: 0.2,
            steps: 4,
            levels: 3,
        }
    }
}

fn perturbed_pair(
    chart: &SpaceChart,
    phi: &Configuration,
    eta: &[f64],
    u: &[f64],
    w: &[f64],
    s: f64,
    steps: usize,
) -> Result<f64> {
    let grid = phi.grid();
    let m = phi.dim();
    let pts: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let r = p * m..(p + 1) * m;
            let v: Vec<f64> = eta[r.clone()].iter().map(|c| s * c).collect();
            variational_jacobi(chart, phi.at(p), &v, &[&u[r.clone()], &w[r]], steps)
        })
        .collect::<Result<_>>()?;
    let y: Vec<f64> = pts.iter().flat_map(|(y, _)| y.iter().copied()).collect();
    let us: Vec<f64> = pts.iter().flat_map(|(_, j)| j[0].iter().copied()).collect();
    let ws: Vec<f64> = pts.iter().flat_map(|(_, j)| j[1].iter().copied()).collect();
    Ok(pair_slice(chart, grid, &y, &us, &ws))
}

/// `s`-derivative at `s = 0` of `𝒢(u_s, w_s)` at `exp_φ(s η)`, where `u_s`,
/// `w_s` are carried by the differential of the exponential map. Normalized
/// by `‖u‖ ‖w‖`; the metric is compatible exactly when this vanishes.
pub fn metricity_defect(chart: &SpaceChart, phi: &Configuration, options: &MetricityOptions) -> Result<DefectReport> {
    let grid = phi.grid();
    let (d, m) = (grid.dim(), phi.dim());
    let fields: Vec<[Vec<f64>; 3]> = (0..options.samples)
        .map(|j| {
            let seed = options.seed.wrapping_add(3 * j as u64);
            let f = |k: u64| FourierField::new(seed + k, d, m, 2, options.amplitude).on_grid(grid, 0.0);
            [f(0), f(1), f(2)]
        })
        .collect();
    let mut levels = Vec::with_capacity(options.levels);
    for k in 0..options.levels {
        let eps = options.eps / f64::from(1u32 << k);
        let steps = options.steps << k;
        let mut worst: f64 = 0.0;
        for [eta, u, w] in &fields {
            let plus = perturbed_pair(chart, phi, eta, u, w, eps, steps)?;
            let minus = perturbed_pair(chart, phi, eta, u, w, -eps, steps)?;
            let scale =
                (pair_slice(chart, grid, phi.values(), u, u) * pair_slice(chart, grid, phi.values(), w, w)).sqrt();
            let defect = (plus - minus) / (2.0 * eps);
            worst = worst.max(if scale > 0.0 {
                defect.abs() / scale
            } else {
                defect.abs()
            });
        }
        levels.push((eps, worst));
    }
    Ok(DefectReport::from_levels(
        format!("metricity[{}]", chart.name()),
        options.samples,
        levels,
    ))
}

/// `(t, s)` pairs sampled by [`jacobi_scaling_defect`].
pub const SCALING_SAMPLES: [(f64, f64); 4] = [(0.5, 0.25), (0.5, 0.5), (1.5, 0.25), (1.5, 0.5)];

fn steps_for(duration: f64, step: f64) -> usize {
    ((duration / step).round() as usize).max(1)
}

/// `max ‖J_{tv,w}(s) − J_{v,w/t}(ts)‖` over [`SCALING_SAMPLES`], one level
/// per integrator step size.
pub fn jacobi_scaling_defect(
    chart: &SpaceChart,
    y: &[f64],
    v: &[f64],
    w: &[f64],
    steps: &[f64],
) -> Result<DefectReport> {
    jacobi_scaling_defect_at(chart, y, v, w, steps, &SCALING_SAMPLES)
}

/// As [`jacobi_scaling_defect`] with explicit `(t, s)` samples.
pub fn jacobi_scaling_defect_at(
    chart: &SpaceChart,
    y: &[f64],
    v: &[f64],
    w: &[f64],
    steps: &[f64],
    samples: &[(f64, f64)],
) -> Result<DefectReport> {
    let mut levels = Vec::with_capacity(steps.len());
    for &h in steps {
        let mut worst: f64 = 0.0;
        for &(t, s) in samples {
            let tv: Vec<f64> = v.iter().map(|c| t * c).collect();
            let wt: Vec<f64> = w.iter().map(|c| c / t).collect();
            let lhs = jacobi_field(chart, y, &tv, w, s, steps_for(s, h))?;
            let rhs = jacobi_field(chart, y, v, &wt, t * s, steps_for(t * s, h))?;
            let diff: Vec<f64> = lhs.field.iter().zip(&rhs.field).map(|(a, b)| a - b).collect();
            worst = worst.max(chart.inner(&lhs.position, &diff, &diff).sqrt());
        }
        levels.push((h, worst));
    }
    Ok(DefectReport::from_levels(
        format!("jacobi-scaling[{}]", chart.name()),
        samples.len(),
        levels,
    ))
}

/// `exp_y^{-1}(q)` by Newton shooting on the oracle's exponential map.
pub fn log_map(chart: &SpaceChart, y: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    const ITERATIONS: usize = 40;
    let m = y.len();
    let basis: Vec<Vec<f64>> = (0..m).map(|a| (0..m).map(|i| f64::from(a == i)).collect()).collect();
    let refs: Vec<&[f64]> = basis.iter().map(|b| b.as_slice()).collect();
    let tol = 1e-13 * (1.0 + q.iter().map(|c| c * c).sum::<f64>().sqrt());
    let mut u: Vec<f64> = q.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..ITERATIONS {
        let (end, cols) = variational_jacobi(chart, y, &u, &refs, 4 * ORACLE_EXP_STEPS)?;
        let f = DVector::from_iterator(m, end.iter().zip(q).map(|(a, b)| a - b));
        residual = f.norm();
        if residual <= tol {
            return Ok(u);
        }
        let jac = DMatrix::from_fn(m, m, |i, a| cols[a][i]);
        let du = jac.lu().solve(&f).ok_or(Error::ShootingFailed {
            iterations: ITERATIONS,
            residual,
        })?;
        for i in 0..m {
            u[i] -= du[i];
        }
    }
    Err(Error::ShootingFailed {
        iterations: ITERATIONS,
        residual,
    })
}

/// Orthonormal frame at `y` by Gram–Schmidt on the coordinate basis; column
/// `a` is the `a`-th frame vector.
fn orthonormal_frame(chart: &SpaceChart, y: &[f64]) -> DMatrix<f64> {
    let m = y.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for a in 0..m {
        let mut e: Vec<f64> = (0..m).map(|i| f64::from(a == i)).collect();
        for c in &cols {
            let proj = chart.inner(y, &e, c);
            for i in 0..m {
                e[i] -= proj * c[i];
            }
        }
        let norm = chart.inner(y, &e, &e).sqrt();
        cols.push(e.into_iter().map(|c| c / norm).collect());
    }
    DMatrix::from_fn(m, m, |i, a| cols[a][i])
}

/// Compares the Jacobi field `J(t)` along `t ↦ exp_y(t v)` with `J(0) = 0`,
/// `DJ/dt(0) = w` against `t w` in discrete normal coordinates centred at
/// `y`, for each `t` in `ts`.
pub fn normal_coordinate_jacobi_check(
    chart: &SpaceChart,
    y: &[f64],
    v: &[f64],
    w: &[f64],
    ts: &[f64],
) -> Result<DefectReport> {
    const DELTA: f64 = 1e-3;
    let m = y.len();
    let frame = orthonormal_frame(chart, y);
    let to_normal = frame.transpose() * chart.metric(y);
    let normal = |q: &[f64]| -> Result<DVector<f64>> { Ok(&to_normal * DVector::from_vec(log_map(chart, y, q)?)) };
    let expected = &to_normal * DVector::from_column_slice(w);
    let mut levels = Vec::with_capacity(ts.len());
    for &t in ts {
        let j = jacobi_field(chart, y, v, w, t, steps_for(t, 1e-3))?;
        let at = |s: f64| -> Result<DVector<f64>> {
            let q: Vec<f64> = (0..m).map(|i| j.position[i] + s * j.field[i]).collect();
            normal(&q)
        };
        let defect = if j.field.iter().all(|c| *c == 0.0) {
            0.0
        } else {
            let (p2, p1, m1, m2) = (at(2.0 * DELTA)?, at(DELTA)?, at(-DELTA)?, at(-2.0 * DELTA)?);
            let dn = ((p1 - m1) * 8.0 - (p2 - m2)) / (12.0 * DELTA);
            (dn - &expected * t).norm()
        };
        levels.push((t, defect));
    }
    Ok(DefectReport::from_levels(
        format!("normal-coordinates[{}]", chart.name()),
        ts.len(),
        levels,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{from_lagrangian, DirichletLagrangian};
    use crate::geometry::{exp_map, GeodesicState};
    use approx::assert_abs_diff_eq;

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|h| (*h, 3.0 * h * h)).collect();
        assert_abs_diff_eq!(loglog_slope(&pts), 2.0, epsilon = 1e-12);
        assert!(loglog_slope(&[(0.1, 0.0), (0.05, 0.0)]).is_nan());
    }

    #[test]
    fn oracle_christoffel_matches_closed_form() {
        let chart = SpaceChart::sphere();
        let y = [1.1, 0.4];
        let g = christoffel(&chart, &y).unwrap();
        let lib = chart.christoffel(&y).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_abs_diff_eq!(g[(i * 2 + j) * 2 + k], lib.get(i, j, k), epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn oracle_exp_agrees_with_library_exp() {
        let chart = SpaceChart::half_plane();
        let (y, v) = ([0.2, 1.3], [0.4, -0.3]);
        let (end, frame) = transported_frame(&chart, &y, &v, 256).unwrap();
        let lib = exp_map(&chart, &GeodesicState::new(y.to_vec(), v.to_vec()), 256).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(end[i], lib.position[i], epsilon = 1e-10);
        }
        // transport is an isometry
        for a in 0..2 {
            for b in 0..2 {
                let e = [f64::from(a == 0), f64::from(a == 1)];
                let f = [f64::from(b == 0), f64::from(b == 1)];
                assert_abs_diff_eq!(
                    chart.inner(&end, &frame[a], &frame[b]),
                    chart.inner(&y, &e, &f),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn zero_perturbation_has_zero_derivative() {
        let chart = SpaceChart::sphere();
        let grid = BodyGrid::new(1, 9).unwrap();
        let motion = Motion::from_fn(&chart, grid.clone(), 0.01, 6, |t, x| vec![1.0 + 0.2 * x[0], x[0] + t]).unwrap();
        let cd: Arc<dyn ConstitutiveDensity> = Arc::new(from_lagrangian(
            Arc::new(DirichletLagrangian::new(chart.clone(), 1)),
            &grid,
        ));
        let w = DisplacementField::zeros_like(&motion);
        let fd = fd_force_derivative(
            &chart,
            &motion,
            &w,
            &cd,
            &LoadingDensity::zero(),
            3,
            0.1,
            Default::default(),
        )
        .unwrap();
        assert!(fd.interior.iter().all(|v| *v == 0.0));
        assert!(fd.boundary.iter().all(|t| t.values.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn affine_residual_has_eps_independent_derivative() {
        let chart = SpaceChart::euclidean(1);
        let grid = BodyGrid::new(1, 17).unwrap();
        let motion = Motion::from_fn(&chart, grid.clone(), 0.01, 6, |t, x| vec![x[0] + 0.1 * x[0] * x[0] * t]).unwrap();
        let cd: Arc<dyn ConstitutiveDensity> = Arc::new(from_lagrangian(
            Arc::new(DirichletLagrangian::new(chart.clone(), 1)),
            &grid,
        ));
        let w = FourierField::new(3, 1, 1, 2, 0.2).on_motion(&motion);
        let load = LoadingDensity::zero();
        let a = fd_force_derivative(&chart, &motion, &w, &cd, &load, 3, 0.1, Default::default()).unwrap();
        let b = fd_force_derivative(&chart, &motion, &w, &cd, &load, 3, 0.0125, Default::default()).unwrap();
        // rounding of the perturbed points, amplified by the 1/dt² acceleration stencil
        let scale = a.interior.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        for (x, y) in a.interior.iter().zip(&b.interior) {
            assert!((x - y).abs() <= 1e-8 * scale, "{x} {y}");
        }
    }

    #[test]
    fn fourier_fields_are_reproducible() {
        let a = FourierField::new(11, 2, 2, 2, 0.5);
        let b = FourierField::new(11, 2, 2, 2, 0.5);
        assert_eq!(a, b);
        assert_ne!(a, FourierField::new(12, 2, 2, 2, 0.5));
        assert_eq!(a.eval(0.3, &[0.1, 0.7]), b.eval(0.3, &[0.1, 0.7]));
    }

    #[test]
    fn metricity_is_exact_in_flat_space_and_for_zero_eta() {
        let chart = SpaceChart::euclidean(2);
        let grid = BodyGrid::new(1, 9).unwrap();
        let phi = Configuration::from_fn(&chart, grid, |x| vec![x[0], 0.3 * x[0] * x[0]]).unwrap();
        let r = metricity_defect(&chart, &phi, &MetricityOptions::default()).unwrap();
        assert!(r.max_defect <= 1e-12, "{r}");

        let sphere = SpaceChart::sphere();
        let grid = BodyGrid::new(1, 9).unwrap();
        let phi = Configuration::from_fn(&sphere, grid, |x| vec![1.2, x[0]]).unwrap();
        let opts = MetricityOptions {
            amplitude: 0.0,
            ..Default::default()
        };
        let r = metricity_defect(&sphere, &phi, &opts).unwrap();
        assert_eq!(r.max_defect, 0.0);
    }

    #[test]
    fn metricity_defect_converges_on_the_sphere() {
        let chart = SpaceChart::sphere();
        let grid = BodyGrid::new(1, 9).unwrap();
        let phi = Configuration::from_fn(&chart, grid, |x| vec![1.2 + 0.2 * x[0], x[0]]).unwrap();
        let r = metricity_defect(&chart, &phi, &MetricityOptions::default()).unwrap();
        assert!(r.convergence_slope >= 1.5, "{r} {:?}", r.levels);
    }

    #[test]
    fn jacobi_scaling_examples() {
        let flat = SpaceChart::euclidean(2);
        let r = jacobi_scaling_defect(&flat, &[0.1, 0.2], &[1.0, 0.5], &[0.3, -0.2], &[0.125]).unwrap();
        assert!(r.max_defect <= 1e-14);
        let sphere = SpaceChart::sphere();
        let same =
            jacobi_scaling_defect_at(&sphere, &[1.2, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[0.01], &[(1.0, 0.3)]).unwrap();
        assert_eq!(same.max_defect, 0.0);
    }

    #[test]
    fn normal_coordinates_examples() {
        let flat = SpaceChart::euclidean(2);
        let r = normal_coordinate_jacobi_check(&flat, &[0.1, 0.2], &[1.0, 0.5], &[0.3, -0.2], &[0.2, 0.1]).unwrap();
        assert!(r.max_defect <= 1e-10, "{r}");
        let sphere = SpaceChart::sphere();
        let y = [1.2, 0.3];
        let zero = normal_coordinate_jacobi_check(&sphere, &y, &[0.3, 0.8], &[0.0, 0.0], &[0.2]).unwrap();
        assert_eq!(zero.max_defect, 0.0);
        let r = normal_coordinate_jacobi_check(&sphere, &y, &[0.3, 0.8], &[0.5, -0.4], &[0.4, 0.2, 0.1]).unwrap();
        assert!(r.max_defect <= 1e-8, "{r} {:?}", r.levels);
    }

    #[test]
    fn log_inverts_exp() {
        let chart = SpaceChart::sphere();
        let y = [1.0, 0.5];
        let (q, _) = transported_frame(&chart, &y, &[0.3, -0.4], 4 * ORACLE_EXP_STEPS).unwrap();
        let u = log_map(&chart, &y, &q).unwrap();
        assert_abs_diff_eq!(u[0], 0.3, epsilon = 1e-8);
        assert_abs_diff_eq!(u[1], -0.4, epsilon = 1e-8);
    }
}
