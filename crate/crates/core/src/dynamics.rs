//! Nonlinear equations of motion: interior and boundary residuals,
//! equilibrium residuals, and explicit time integration.

use std::sync::Arc;

use crate::constitutive::{
    eval_stress, fold_body_load, BoundaryTraction, ConstitutiveDensity, LoadingDensity, StressField,
};
use crate::error::{Error, Result};
use crate::geometry::SpaceChart;
use crate::grid::{BodyGrid, Face};
use crate::kinematics::{acceleration_at, Configuration, Jet1Field, Motion};

/// Default bound on coordinate and velocity magnitudes in [`simulate`].
pub const DEFAULT_BLOWUP_BOUND: f64 = 1e6;

/// Residual of the equations of motion on the time × space grid.
///
/// `interior[n][p * m + j]` is the co-vector residual `r_j` at slice `n`;
/// values at boundary points are computed with one-sided stencils and are
/// not part of the interior equations. `boundary[n]` holds `p_σS − 𝒯`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub m: usize,
    pub interior: Vec<Vec<f64>>,
    pub boundary: Vec<Vec<BoundaryTraction>>,
}

impl ResidualField {
    /// Root-mean-square of the interior residual over interior points of slice `n`.
    pub fn interior_rms(&self, grid: &BodyGrid, n: usize) -> f64 {
        let pts = grid.interior_points();
        let sum: f64 = pts
            .iter()
            .flat_map(|&p| &self.interior[n][p * self.m..(p + 1) * self.m])
            .map(|v| v * v)
            .sum();
        (sum / (pts.len() * self.m) as f64).sqrt()
    }

    /// Largest absolute interior residual over interior points of slice `n`.
    pub fn interior_max(&self, grid: &BodyGrid, n: usize) -> f64 {
        grid.interior_points()
            .iter()
            .flat_map(|&p| &self.interior[n][p * self.m..(p + 1) * self.m])
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn boundary_max(&self, n: usize) -> f64 {
        self.boundary[n]
            .iter()
            .flat_map(|t| &t.values)
            .fold(0.0, |a, v| a.max(v.abs()))
    }
}

fn check_density(cd: &dyn ConstitutiveDensity, grid: &BodyGrid, m: usize) -> Result<()> {
    if cd.body_dim() != grid.dim() || cd.space_dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "density is for d = {}, m = {} but the body has d = {} in dimension {}",
            cd.body_dim(),
            cd.space_dim(),
            grid.dim(),
            m
        )));
    }
    Ok(())
}

fn folded(cd: &Arc<dyn ConstitutiveDensity>, load: &LoadingDensity, grid: &BodyGrid) -> Arc<dyn ConstitutiveDensity> {
    fold_body_load(cd.clone(), load, grid)
}

/// `(divS)_j + ρ b_j` on one slice, by differencing the composed stress field.
pub(crate) fn force_slice(
    cd: &dyn ConstitutiveDensity,
    grid: &BodyGrid,
    m: usize,
    values: &[f64],
) -> Result<(StressField, Vec<f64>)> {
    let jet = Jet1Field::from_values(grid, m, values);
    let stress = eval_stress(cd, &jet)?;
    let div = stress.divergence();
    Ok((stress, div))
}

/// `r_j = ρ G_ij A^i − (divS)_j − ρ b_j` at slice `n`.
pub(crate) fn interior_residual_slice(
    chart: &SpaceChart,
    motion: &Motion,
    cd: &dyn ConstitutiveDensity,
    n: usize,
) -> Result<Vec<f64>> {
    let grid = motion.grid();
    let m = motion.dim();
    let (_, div) = force_slice(cd, grid, m, motion.slice_values(n))?;
    let rho = grid.density();
    let mut out = vec![0.0; grid.len() * m];
    for p in 0..grid.len() {
        let y = motion.at(n, p);
        let acc = acceleration_at(chart, motion, n, p)?;
        let lowered = chart.lower(y, &acc);
        for j in 0..m {
            out[p * m + j] = rho[p] * lowered[j] - div[p * m + j];
        }
    }
    Ok(out)
}

/// `p_σS − 𝒯` on every face point of one slice.
pub(crate) fn boundary_residual_slice(
    cd: &dyn ConstitutiveDensity,
    load: &LoadingDensity,
    grid: &BodyGrid,
    m: usize,
    values: &[f64],
) -> Result<Vec<BoundaryTraction>> {
    let jet = Jet1Field::from_values(grid, m, values);
    let mut tr = eval_stress(cd, &jet)?.traction();
    for t in &mut tr {
        let x = grid.point(t.point);
        let load = load.surface_at(&x, &values[t.point * m..(t.point + 1) * m]);
        for (v, l) in t.values.iter_mut().zip(load) {
            *v -= l;
        }
    }
    Ok(tr)
}

/// Interior residual of the equations of motion on every slice.
pub fn interior_residual(
    chart: &SpaceChart,
    motion: &Motion,
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
) -> Result<Vec<Vec<f64>>> {
    if motion.len() < 4 {
        return Err(Error::TooFewTimeSlices {
            required: 4,
            available: motion.len(),
        });
    }
    check_density(cd.as_ref(), motion.grid(), motion.dim())?;
    let cd = folded(cd, load, motion.grid());
    (0..motion.len())
        .map(|n| interior_residual_slice(chart, motion, cd.as_ref(), n))
        .collect()
}

/// Boundary residual `p_σS − 𝒯` on every slice.
pub fn boundary_residual(
    motion: &Motion,
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
) -> Result<Vec<Vec<BoundaryTraction>>> {
    check_density(cd.as_ref(), motion.grid(), motion.dim())?;
    (0..motion.len())
        .map(|n| boundary_residual_slice(cd.as_ref(), load, motion.grid(), motion.dim(), motion.slice_values(n)))
        .collect()
}

/// Both residuals on every slice.
pub fn residual(
    chart: &SpaceChart,
    motion: &Motion,
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
) -> Result<ResidualField> {
    Ok(ResidualField {
        m: motion.dim(),
        interior: interior_residual(chart, motion, cd, load)?,
        boundary: boundary_residual(motion, cd, load)?,
    })
}

/// Residual of a stationary configuration: `−(divS + ρb)` inside, `p_σS − 𝒯`
/// on the boundary. A single slice.
pub fn equilibrium_residual(
    phi: &Configuration,
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
) -> Result<ResidualField> {
    let grid = phi.grid();
    let m = phi.dim();
    check_density(cd.as_ref(), grid, m)?;
    let full = folded(cd, load, grid);
    let (_, div) = force_slice(full.as_ref(), grid, m, phi.values())?;
    let interior = div.into_iter().map(|v| -v).collect();
    let boundary = boundary_residual_slice(cd.as_ref(), load, grid, m, phi.values())?;
    Ok(ResidualField {
        m,
        interior: vec![interior],
        boundary: vec![boundary],
    })
}

/// Time integrator for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    /// Classical fourth-order Runge–Kutta on the first-order system.
    #[default]
    Rk4,
    /// Second-order kick–drift–kick.
    Leapfrog,
}

/// Options for [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub scheme: TimeScheme,
    /// Faces held at their initial position. Other faces carry the surface load.
    pub clamped: Vec<Face>,
    pub blowup_bound: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            scheme: TimeScheme::Rk4,
            clamped: Vec::new(),
            blowup_bound: DEFAULT_BLOWUP_BOUND,
        }
    }
}

impl SimulateOptions {
    pub fn clamp(mut self, faces: impl IntoIterator<Item = Face>) -> Self {
        self.clamped.extend(faces);
        self
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }
}

/// A simulated motion with the integrator's own velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub motion: Motion,
    pub velocities: Vec<Vec<f64>>,
}

struct SemiDiscrete<'a> {
    chart: &'a SpaceChart,
    grid: &'a BodyGrid,
    m: usize,
    cd: Arc<dyn ConstitutiveDensity>,
    load: &'a LoadingDensity,
    clamped: Vec<bool>,
}

impl SemiDiscrete<'_> {
    /// Net force `(divS + ρb)_j` per unit volume, with half-cell balances
    /// on traction faces.
    fn force(&self, y: &[f64]) -> Result<Vec<f64>> {
        let grid = self.grid;
        let m = self.m;
        let d = grid.dim();
        let h = grid.spacing();
        let n = grid.n();
        let (stress, mut div) = force_slice(self.cd.as_ref(), grid, m, y)?;
        let psi = stress.psi_values();
        for p in grid.boundary_points() {
            if self.clamped[p] {
                continue;
            }
            let x = grid.point(p);
            let traction = self.load.surface_at(&x, &y[p * m..(p + 1) * m]);
            let mi = grid.multi_index(p);
            let r = stress.r_at(p);
            for j in 0..m {
                let mut total = -r[j];
                for al in 0..d {
                    let s = grid.stride(al);
                    let at = |q: usize| psi[q * m * d + j * d + al];
                    total += if mi[al] == 0 {
                        (at(p) + at(p + s) + 2.0 * traction[j]) / h
                    } else if mi[al] == n - 1 {
                        (2.0 * traction[j] - at(p) - at(p - s)) / h
                    } else {
                        (at(p + s) - at(p - s)) / (2.0 * h)
                    };
                }
                div[p * m + j] = total;
            }
        }
        Ok(div)
    }

    /// `κ̈ = −Γ(κ̇, κ̇) + ρ⁻¹ G⁻¹ (divS + ρb)`, zero on clamped points.
    fn acceleration(&self, y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let m = self.m;
        for p in 0..self.grid.len() {
            self.chart.check_point(&y[p * m..(p + 1) * m])?;
        }
        let force = self.force(y)?;
        let rho = self.grid.density();
        let mut out = vec![0.0; y.len()];
        for p in 0..self.grid.len() {
            if self.clamped[p] {
                continue;
            }
            let s = p * m..(p + 1) * m;
            let yp = &y[s.clone()];
            let vp = &v[s.clone()];
            let gamma = self.chart.christoffel(yp)?;
            let geo = gamma.contract(vp, vp);
            let ginv = self.chart.inverse_metric(yp)?;
            for i in 0..m {
                let mut a = -geo[i];
                for j in 0..m {
                    a += ginv[(i, j)] * force[p * m + j] / rho[p];
                }
                out[p * m + i] = a;
            }
        }
        Ok(out)
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

/// Integrates `κ̈^i = −Γ^i_lk κ̇^l κ̇^k + ρ⁻¹ G^ij [(divS)_j + ρ b_j]` from
/// `(φ₀, V₀)` for `steps` steps of size `dt`. Stability is the caller's
/// concern; runs that exceed the blow-up bound stop with an error.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    chart: &SpaceChart,
    phi0: &Configuration,
    v0: &[f64],
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
    dt: f64,
    steps: usize,
    options: &SimulateOptions,
) -> Result<Simulation> {
    let grid = phi0.grid();
    let m = phi0.dim();
    check_density(cd.as_ref(), grid, m)?;
    if v0.len() != phi0.values().len() {
        return Err(Error::DimensionMismatch(format!(
            "initial velocity has {} values, expected {}",
            v0.len(),
            phi0.values().len()
        )));
    }
    let mut clamped = vec![false; grid.len()];
    for face in &options.clamped {
        if face.axis >= grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "no face {} on a {}-dimensional body",
                face.label(),
                grid.dim()
            )));
        }
        for p in grid.face_points(*face) {
            clamped[p] = true;
        }
    }
    let sys = SemiDiscrete {
        chart,
        grid,
        m,
        cd: folded(cd, load, grid),
        load,
        clamped,
    };
    let mut y = phi0.values().to_vec();
    let mut v = v0.to_vec();
    for p in 0..grid.len() {
        if sys.clamped[p] {
            v[p * m..(p + 1) * m].fill(0.0);
        }
    }
    let mut slices = vec![y.clone()];
    let mut velocities = vec![v.clone()];
    for step in 1..=steps {
        match options.scheme {
            TimeScheme::Rk4 => {
                let k1a = sys.acceleration(&y, &v)?;
                let (y2, v2) = (axpy(&y, 0.5 * dt, &v), axpy(&v, 0.5 * dt, &k1a));
                let k2a = sys.acceleration(&y2, &v2)?;
                let (y3, v3) = (axpy(&y, 0.5 * dt, &v2), axpy(&v, 0.5 * dt, &k2a));
                let k3a = sys.acceleration(&y3, &v3)?;
                let (y4, v4) = (axpy(&y, dt, &v3), axpy(&v, dt, &k3a));
                let k4a = sys.acceleration(&y4, &v4)?;
                for k in 0..y.len() {
                    y[k] += dt / 6.0 * (v[k] + 2.0 * v2[k] + 2.0 * v3[k] + v4[k]);
                    v[k] += dt / 6.0 * (k1a[k] + 2.0 * k2a[k] + 2.0 * k3a[k] + k4a[k]);
                }
            }
            TimeScheme::Leapfrog => {
                let a0 = sys.acceleration(&y, &v)?;
                let half = axpy(&v, 0.5 * dt, &a0);
                y = axpy(&y, dt, &half);
                let a1 = sys.acceleration(&y, &half)?;
                v = axpy(&half, 0.5 * dt, &a1);
            }
        }
        let norm = y.iter().chain(&v).fold(0.0_f64, |a, x| a.max(x.abs()));
        if !(norm <= options.blowup_bound) {
            return Err(Error::UnstableStep {
                time_index: step,
                norm,
                bound: options.blowup_bound,
            });
        }
        slices.push(y.clone());
        velocities.push(v.clone());
    }
    let motion = Motion::new(chart, grid.clone(), dt, slices)?;
    Ok(Simulation { motion, velocities })
}

/// `½ ∫ ρ G(V, V) dx` on one slice.
pub fn kinetic_energy(chart: &SpaceChart, grid: &BodyGrid, y: &[f64], v: &[f64]) -> f64 {
    0.5 * crate::kinematics::pair_slice(chart, grid, y, v, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{from_lagrangian, DirichletLagrangian, FnDensity, ZeroLagrangian};
    use crate::geometry::{exp_map, GeodesicState};
    use crate::grid::Side;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn dirichlet(chart: &SpaceChart, grid: &BodyGrid) -> Arc<dyn ConstitutiveDensity> {
        Arc::new(from_lagrangian(
            Arc::new(DirichletLagrangian::new(chart.clone(), grid.dim())),
            grid,
        ))
    }

    fn zero(chart: &SpaceChart, grid: &BodyGrid) -> Arc<dyn ConstitutiveDensity> {
        Arc::new(from_lagrangian(
            Arc::new(ZeroLagrangian::new(grid.dim(), chart.dim())),
            grid,
        ))
    }

    #[test]
    fn geodesic_flow_has_small_residual() {
        let chart = SpaceChart::sphere();
        let grid = BodyGrid::new(1, 17).unwrap();
        let dt = 0.01;
        let motion = Motion::from_fn(&chart, grid.clone(), dt, 6, |t, x| vec![PI / 2.0, 0.5 * x[0] + t]).unwrap();
        let r = interior_residual(&chart, &motion, &zero(&chart, &grid), &LoadingDensity::zero()).unwrap();
        for n in 1..6 {
            for v in &r[n] {
                assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn wave_solution_residual_scales_with_amplitude_squared() {
        let chart = SpaceChart::euclidean(1);
        let grid = BodyGrid::new(1, 129).unwrap();
        let cd = dirichlet(&chart, &grid);
        let max_res = |eps: f64| {
            let motion = Motion::from_fn(&chart, grid.clone(), 1e-3, 6, |t, x| {
                vec![x[0] + eps * (PI * x[0]).sin() * (PI * (t + 0.2)).cos()]
            })
            .unwrap();
            let r = residual(&chart, &motion, &cd, &LoadingDensity::zero()).unwrap();
            r.interior_max(&grid, 3)
        };
        // Linear in κ, so the residual is pure discretization error.
        assert!(max_res(0.1) < 1e-3);
        assert!(max_res(0.1) / max_res(0.05) < 2.2);
    }

    #[test]
    fn equator_map_is_harmonic() {
        let chart = SpaceChart::sphere();
        let grid = BodyGrid::new(1, 33).unwrap();
        let phi = Configuration::from_fn(&chart, grid.clone(), |x| vec![PI / 2.0, 2.0 * x[0]]).unwrap();
        let res = equilibrium_residual(&phi, &dirichlet(&chart, &grid), &LoadingDensity::zero()).unwrap();
        assert!(res.interior_max(&grid, 0) < 1e-12);
        let stationary = Motion::stationary(&phi, 0.01, 4);
        let dynamic = residual(&chart, &stationary, &dirichlet(&chart, &grid), &LoadingDensity::zero()).unwrap();
        for (a, b) in dynamic.interior[2].iter().zip(&res.interior[0]) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn boundary_residual_examples() {
        let chart = SpaceChart::euclidean(1);
        let grid = BodyGrid::new(1, 65).unwrap();
        let zero_cd: Arc<dyn ConstitutiveDensity> = Arc::new(FnDensity::zero(1, 1));
        let phi = Configuration::from_fn(&chart, grid.clone(), |x| vec![x[0] + 0.1 * x[0].powi(2)]).unwrap();
        let r = equilibrium_residual(&phi, &zero_cd, &LoadingDensity::zero()).unwrap();
        assert_eq!(r.boundary_max(0), 0.0);

        // ∂κ/∂n = 0 at both ends: not an embedding, so evaluate the slice directly.
        let dir = dirichlet(&chart, &grid);
        let flat: Vec<f64> = (0..grid.len())
            .map(|p| 0.3 + 0.05 * (PI * grid.point(p)[0]).cos())
            .collect();
        let tr = boundary_residual_slice(dir.as_ref(), &LoadingDensity::zero(), &grid, 1, &flat).unwrap();
        assert!(tr.iter().all(|t| t.values[0].abs() < 1e-3));

        let phi =
            Configuration::from_fn(&chart, grid.clone(), |x| vec![x[0] + 0.05 * (2.0 * PI * x[0]).cos()]).unwrap();
        // Supplying the traction itself as the load gives zero exactly.
        let jet = phi.jet();
        let tr = crate::constitutive::traction(dir.as_ref(), &jet).unwrap();
        let lookup = tr.clone();
        let load = LoadingDensity::zero().with_surface(move |x, _| {
            let upper = x[0] > 0.5;
            lookup
                .iter()
                .find(|t| (t.face.side == Side::Upper) == upper)
                .unwrap()
                .values
                .clone()
        });
        let r = equilibrium_residual(&phi, &dir, &load).unwrap();
        assert_eq!(r.boundary_max(0), 0.0);
    }

    #[test]
    fn translation_equivariance() {
        let chart = SpaceChart::euclidean(2);
        let grid = BodyGrid::new(2, 9).unwrap();
        let cd = dirichlet(&chart, &grid);
        let f = |c: f64| {
            let motion = Motion::from_fn(&chart, grid.clone(), 0.01, 4, |t, x| {
                vec![x[0] + 0.1 * (x[1] * t).sin() + c, x[1] + 0.2 * x[0] * x[0] - c]
            })
            .unwrap();
            interior_residual(&chart, &motion, &cd, &LoadingDensity::zero()).unwrap()
        };
        let (a, b) = (f(0.0), f(3.0));
        for (u, v) in a[2].iter().zip(&b[2]) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-9);
        }
    }

    #[test]
    fn body_load_enters_residual() {
        let chart = SpaceChart::euclidean(1);
        let grid = BodyGrid::new(1, 9).unwrap();
        let phi = Configuration::from_fn(&chart, grid.clone(), |x| vec![x[0]]).unwrap();
        let load = LoadingDensity::zero().with_body(|_, _| vec![2.0]);
        let r = equilibrium_residual(&phi, &dirichlet(&chart, &grid), &load).unwrap();
        assert_abs_diff_eq!(r.interior[0][4], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_lagrangian_simulation_follows_geodesics() {
        let chart = SpaceChart::sphere();
        let grid = BodyGrid::new(1, 5).unwrap();
        let phi = Configuration::from_fn(&chart, grid.clone(), |x| vec![1.0 + 0.2 * x[0], x[0]]).unwrap();
        let v0: Vec<f64> = (0..grid.len()).flat_map(|p| vec![0.3, 0.5 + 0.1 * p as f64]).collect();
        let sim = simulate(
            &chart,
            &phi,
            &v0,
            &zero(&chart, &grid),
            &LoadingDensity::zero(),
            1e-2,
            100,
            &SimulateOptions::default(),
        )
        .unwrap();
        for p in 0..grid.len() {
            let end = exp_map(
                &chart,
                &GeodesicState::new(phi.at(p).to_vec(), v0[p * 2..p * 2 + 2].to_vec()),
                1000,
            )
            .unwrap();
            for i in 0..2 {
                assert_abs_diff_eq!(sim.motion.at(100, p)[i], end.position[i], epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn standing_wave_has_period_two() {
        let chart = SpaceChart::euclidean(1);
        let grid = BodyGrid::new(1, 65).unwrap();
        let eps = 0.05;
        let phi = Configuration::from_fn(&chart, grid.clone(), |x| vec![x[0] + eps * (PI * x[0]).sin()]).unwrap();
        let v0 = vec![0.0; grid.len()];
        let opts = SimulateOptions::default().clamp(grid.all_faces());
        let dt = 0.005;
        let steps = 400;
        let sim = simulate(
            &chart,
            &phi,
            &v0,
            &dirichlet(&chart, &grid),
            &LoadingDensity::zero(),
            dt,
            steps,
            &opts,
        )
        .unwrap();
        let half: f64 = (0..grid.len())
            .map(|p| (sim.motion.at(200, p)[0] - (grid.point(p)[0] - eps * (PI * grid.point(p)[0]).sin())).abs())
            .fold(0.0, f64::max);
        let full: f64 = (0..grid.len())
            .map(|p| (sim.motion.at(steps, p)[0] - phi.at(p)[0]).abs())
            .fold(0.0, f64::max);
        assert!(half < 1e-4 && full < 1e-4, "{half} {full}");
    }

    #[test]
    fn equilibrium_stays_put() {
        let chart = SpaceChart::euclidean(1);
        let grid = BodyGrid::new(1, 33).unwrap();
        let phi = Configuration::from_fn(&chart, grid.clone(), |x| vec![2.0 * x[0]]).unwrap();
        let v0 = vec![0.0; grid.len()];
        let opts = SimulateOptions::default()
            .clamp([Face::new(0, Side::Lower)])
            .with_scheme(TimeScheme::Leapfrog);
        let load = LoadingDensity::zero().with_surface(|_, _| vec![2.0]);
        let sim = simulate(&chart, &phi, &v0, &dirichlet(&chart, &grid), &load, 0.01, 50, &opts).unwrap();
        for p in 0..grid.len() {
            assert_abs_diff_eq!(sim.motion.at(50, p)[0], phi.at(p)[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn energy_is_nearly_conserved() {
        let chart = SpaceChart::euclidean(1);
        let grid = BodyGrid::new(1, 33).unwrap();
        let lag = Arc::new(DirichletLagrangian::new(chart.clone(), 1));
        let hyper = from_lagrangian(lag, &grid);
        let cd: Arc<dyn ConstitutiveDensity> = Arc::new(hyper.clone());
        let phi = Configuration::from_fn(&chart, grid.clone(), |x| vec![x[0] + 0.05 * (PI * x[0]).sin()]).unwrap();
        let v0 = vec![0.0; grid.len()];
        let opts = SimulateOptions::default().clamp(grid.all_faces());
        let sim = simulate(&chart, &phi, &v0, &cd, &LoadingDensity::zero(), 0.005, 200, &opts).unwrap();
        let energy = |n: usize| {
            kinetic_energy(&chart, &grid, sim.motion.slice_values(n), &sim.velocities[n])
                + hyper.energy(&sim.motion.slice(n).jet())
        };
        let e0 = energy(0);
        for n in [50, 100, 200] {
            assert!((energy(n) - e0).abs() < 1e-4 * e0, "{} vs {e0}", energy(n));
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let chart = SpaceChart::euclidean(1);
        let grid = BodyGrid::new(1, 33).unwrap();
        let phi = Configuration::from_fn(&chart, grid.clone(), |x| vec![x[0] + 0.01 * (5.0 * x[0]).sin()]).unwrap();
        let v0 = vec![0.0; grid.len()];
        let opts = SimulateOptions::default().clamp(grid.all_faces());
        let err = simulate(
            &chart,
            &phi,
            &v0,
            &dirichlet(&chart, &grid),
            &LoadingDensity::zero(),
            0.5,
            200,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnstableStep { .. }), "{err:?}");
    }
}
