//! Run modes.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use covdyn::constitutive::{eval_stress, representation_defect, virtual_work, ConstitutiveDensity};
use covdyn::dynamics::{kinetic_energy, simulate, SimulateOptions};
use covdyn::geometry::{geodesic_trajectory, GeodesicState, SpaceChart};
use covdyn::grid::BodyGrid;
use covdyn::kinematics::{Configuration, DisplacementField, Motion};
use covdyn::linearize::{apply_linearized, coefficient_fields, newton_solve, NewtonOptions, Readings};
use covdyn::oracle::{
    jacobi_scaling_defect, metricity_defect, transported_frame, CovectorComparison, DefectReport, FourierField,
    MetricityOptions,
};
use covdyn::verify::{
    acceptance_suite, consistency, fd_sweep, sweep_report, LinearizationScenario, AFFINE_SWEEP_TOLERANCE, CANONICAL_DT,
    CANONICAL_POINTS, CANONICAL_SLICES, CLASSICAL_TENSOR_TOLERANCE, CONSISTENCY_TOLERANCE, GEODESIC_FLOW_TOLERANCE,
    JACOBI_FINE_STEP, JACOBI_FINE_TOLERANCE, JACOBI_SLOPE_STEPS, METRICITY_FLAT_TOLERANCE, METRICITY_MIN_SLOPE,
    NEWTON_CURVATURE, REPRESENTATION_MIN_SLOPE, SLOPE_BAND, SPEED_DRIFT_TOLERANCE,
};

use crate::export::{field_header, numbered, push_slice, Table};
use crate::scenario::{MaterialKind, Needs, Scenario, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Equilibrium,
    Linearize,
    Verify,
    Geodesic,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Number of `ε` levels, halving from the scenario's `linearize.eps`.
    pub eps_sweep: usize,
    /// Enforce convergence slopes, not only defect magnitudes.
    pub strict: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out: None,
            seed: 1,
            eps_sweep: 4,
            strict: false,
        }
    }
}

/// Report lines and whether every enforced check passed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: covdyn::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, RunError>;
}

impl<T> Context<T> for covdyn::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, RunError> {
        self.map_err(|source| RunError::Core {
            context: what(),
            source,
        })
    }
}

struct Report {
    lines: Vec<String>,
    passed: bool,
    strict: bool,
}

impl Report {
    fn new(strict: bool) -> Self {
        Self {
            lines: Vec::new(),
            passed: true,
            strict,
        }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn check(&mut self, ok: bool, s: impl AsRef<str>) {
        self.passed &= ok;
        self.lines
            .push(format!("{} {}", if ok { "PASS" } else { "FAIL" }, s.as_ref()));
    }

    /// A convergence-rate check: enforced only in strict mode.
    fn rate(&mut self, ok: bool, s: impl AsRef<str>) {
        if self.strict {
            self.check(ok, s);
        } else {
            self.lines.push(format!(
                "{} {} (rate not enforced)",
                if ok { "pass" } else { "fail" },
                s.as_ref()
            ));
        }
    }

    fn finish(self) -> Outcome {
        Outcome {
            lines: self.lines,
            passed: self.passed,
        }
    }
}

fn save(table: &Table, dir: &Path, file: &str, report: &mut Report) -> Result<(), RunError> {
    let path = dir.join(file);
    table.save(&path).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })?;
    report.line(format!("wrote {file}"));
    Ok(())
}

fn write_report(dir: &Path, outcome: &Outcome) -> Result<(), RunError> {
    let path = dir.join("report.txt");
    let mut text = outcome.lines.join("\n");
    text.push('\n');
    std::fs::write(&path, text).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn run(scenario: Option<&Scenario>, mode: Mode, options: &RunOptions) -> Result<Outcome, RunError> {
    if let Some(dir) = &options.out {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    let outcome = match (mode, scenario) {
        (Mode::Verify, None) => verify_suite(options)?,
        (_, None) => unreachable!("only verify runs without a scenario"),
        (Mode::Simulate, Some(sc)) => run_simulate(sc, options)?,
        (Mode::Equilibrium, Some(sc)) => run_equilibrium(sc, options)?,
        (Mode::Linearize, Some(sc)) => run_linearize(sc, options)?,
        (Mode::Verify, Some(sc)) => verify_scenario(sc, options)?,
        (Mode::Geodesic, Some(sc)) => run_geodesic(sc, options)?,
    };
    if let Some(dir) = &options.out {
        write_report(dir, &outcome)?;
    }
    Ok(outcome)
}

fn header(sc: &Scenario, mode: &str, report: &mut Report) {
    report.line(format!("scenario {} ({mode}, manifold {})", sc.name, sc.manifold));
}

fn run_simulate(sc: &Scenario, options: &RunOptions) -> Result<Outcome, RunError> {
    sc.require(&[Needs::Body, Needs::Time])?;
    let mut report = Report::new(options.strict);
    header(sc, "simulate", &mut report);
    let time = sc.time.as_ref().expect("required");
    let grid = sc.grid().context(|| "body grid".into())?;
    let hyper = covdyn::constitutive::from_lagrangian(sc.lagrangian(), &grid);
    let cd: Arc<dyn ConstitutiveDensity> = Arc::new(hyper.clone());
    let phi0 = sc.initial_configuration(&grid).context(|| "initial.position".into())?;
    let v0 = sc.initial_velocity(&grid);
    let opts = SimulateOptions::default()
        .with_scheme(time.scheme)
        .clamp(sc.loading.clamped.iter().copied());
    let sim =
        simulate(&sc.chart, &phi0, &v0, &cd, &sc.load(), time.dt, time.steps, &opts).context(|| "simulate".into())?;
    let m = sc.chart.dim();
    let energy = |n: usize| {
        let kin = kinetic_energy(&sc.chart, &grid, sim.motion.slice_values(n), &sim.velocities[n]);
        (kin, hyper.energy(&sim.motion.slice(n).jet()))
    };
    let (k0, e0) = energy(0);
    let (k1, e1) = energy(time.steps);
    report.line(format!(
        "steps {} dt {:e} scheme {:?}",
        time.steps, time.dt, time.scheme
    ));
    report.line(format!("kinetic energy {k0:e} -> {k1:e}"));
    report.line(format!("stored energy {e0:e} -> {e1:e}"));
    report.line(format!("total (kinetic + stored) drift {:e}", (k1 + e1) - (k0 + e0)));
    if let Some(dir) = &options.out {
        let mut table = Table::new(field_header(&grid, &[numbered("y", m), numbered("v", m)]));
        for n in (0..=time.steps).filter(|n| n % time.output_every == 0 || *n == time.steps) {
            push_slice(
                &mut table,
                &grid,
                sim.motion.time(n),
                &[(sim.motion.slice_values(n), m), (&sim.velocities[n], m)],
            );
        }
        save(&table, dir, "motion.tsv", &mut report)?;
    }
    Ok(report.finish())
}

fn equilibrate(sc: &Scenario, grid: &BodyGrid, report: &mut Report) -> Result<Configuration, RunError> {
    let cd = sc.density(grid);
    let phi0 = sc.initial_configuration(grid).context(|| "initial.position".into())?;
    let opts = NewtonOptions {
        clamped: sc.loading.clamped.clone(),
    };
    let (phi, history) = newton_solve(&sc.chart, &phi0, &cd, &sc.load(), &opts, sc.newton_iterations)
        .context(|| "newton iteration".into())?;
    let hist: Vec<String> = history.iter().map(|r| format!("{r:.3e}")).collect();
    report.line(format!("newton residuals {}", hist.join(", ")));
    Ok(phi)
}

fn run_equilibrium(sc: &Scenario, options: &RunOptions) -> Result<Outcome, RunError> {
    sc.require(&[Needs::Body])?;
    let mut report = Report::new(options.strict);
    header(sc, "equilibrium", &mut report);
    let grid = sc.grid().context(|| "body grid".into())?;
    let phi = equilibrate(sc, &grid, &mut report)?;
    if let Some(dir) = &options.out {
        let m = sc.chart.dim();
        let mut table = Table::new(field_header(&grid, &[numbered("y", m)]));
        push_slice(&mut table, &grid, 0.0, &[(phi.values(), m)]);
        save(&table, dir, "equilibrium.tsv", &mut report)?;
    }
    Ok(report.finish())
}

/// The motion, displacement and slice to linearize at, on `grid`.
fn linearization_scenario(
    sc: &Scenario,
    grid: &BodyGrid,
    dt: f64,
    slices: usize,
    slice: usize,
    seed: u64,
    report: &mut Report,
) -> Result<LinearizationScenario, RunError> {
    let lin = &sc.linearize;
    let motion = match &lin.motion {
        Some(e) => Motion::from_fn(&sc.chart, grid.clone(), dt, slices - 1, |t, x| {
            e.iter().map(|e| e.eval(t, x)).collect()
        })
        .context(|| "linearize.motion".into())?,
        None => {
            let phi = if lin.at_equilibrium {
                equilibrate(sc, grid, report)?
            } else {
                sc.initial_configuration(grid).context(|| "initial.position".into())?
            };
            Motion::stationary(&phi, dt, slices - 1)
        }
    };
    let m = sc.chart.dim();
    let w = match &lin.displacement {
        Some(e) => DisplacementField::from_fn(&motion, |t, x| e.iter().map(|e| e.eval(t, x)).collect()),
        None => FourierField::new(seed, grid.dim(), m, 2, 0.1).on_motion(&motion),
    };
    Ok(LinearizationScenario {
        name: sc.name.clone(),
        chart: sc.chart.clone(),
        cd: sc.density(grid),
        load: sc.load(),
        motion,
        w,
        slice,
        affine: false,
    })
}

fn eps_levels(eps: f64, k: usize) -> Vec<f64> {
    (0..k.max(2)).map(|j| eps / f64::from(1u32 << j.min(30))).collect()
}

/// Runs the finite-difference comparison and records it, as a check when
/// `enforce` is set.
fn compare_with_oracle(
    ls: &LinearizationScenario,
    eps: &[f64],
    enforce: bool,
    report: &mut Report,
) -> Result<(), RunError> {
    let sweep = fd_sweep(ls, CovectorComparison::Transported, eps).context(|| "finite-difference oracle".into())?;
    let r = &consistency(ls, &sweep, &[Readings::default()]).context(|| "linearization".into())?[0];
    let line = format!(
        "linearization vs oracle: interior {:.3e}, boundary {:.3e} (tol {CONSISTENCY_TOLERANCE:e})",
        r.interior_error, r.boundary_error
    );
    if enforce {
        report.check(
            r.interior_error <= CONSISTENCY_TOLERANCE && r.boundary_error <= CONSISTENCY_TOLERANCE,
            line,
        );
    } else {
        report.line(line);
    }
    let s = sweep_report(ls, &sweep);
    let spread = s.levels.iter().fold(0.0_f64, |a, l| a.max(l.1));
    if spread <= AFFINE_SWEEP_TOLERANCE {
        report.line(format!("eps-sweep spread {spread:.3e}: residual affine along w"));
    } else if !enforce {
        report.line(format!("{s}"));
    } else {
        report.rate(
            (s.convergence_slope - 2.0).abs() <= SLOPE_BAND,
            format!("{s} (nominal 2 ± {SLOPE_BAND})"),
        );
    }
    Ok(())
}

fn run_linearize(sc: &Scenario, options: &RunOptions) -> Result<Outcome, RunError> {
    sc.require(&[Needs::Body])?;
    let mut report = Report::new(options.strict);
    header(sc, "linearize", &mut report);
    let grid = sc.grid().context(|| "body grid".into())?;
    let lin = &sc.linearize;
    let ls = linearization_scenario(sc, &grid, lin.dt, lin.slices, lin.slice, options.seed, &mut report)?;
    let n = ls.slice;
    report.line(format!("slice {n} of {}, t = {:e}", ls.motion.len(), ls.motion.time(n)));
    let coeffs = coefficient_fields(&ls.motion.slice(n), &ls.cd, &ls.load).context(|| "coefficient fields".into())?;
    let applied = apply_linearized(&sc.chart, &ls.motion, &ls.w, &ls.cd, &ls.load, n, Readings::default())
        .context(|| "linearized residual".into())?;
    compare_with_oracle(&ls, &eps_levels(lin.eps, options.eps_sweep), false, &mut report)?;
    if let Some(dir) = &options.out {
        let m = sc.chart.dim();
        let (names, rows) = coeffs.columns();
        let mut table = Table::new(field_header(&grid, &[names]));
        for (p, row) in rows.iter().enumerate() {
            push_slice_point(&mut table, &grid, ls.motion.time(n), p, row);
        }
        save(&table, dir, "coefficients.tsv", &mut report)?;
        let mut table = Table::new(field_header(
            &grid,
            &[numbered("y", m), numbered("w", m), numbered("Lw", m)],
        ));
        push_slice(
            &mut table,
            &grid,
            ls.motion.time(n),
            &[(ls.motion.slice_values(n), m), (ls.w.slice_values(n), m), (&applied, m)],
        );
        save(&table, dir, "linearized.tsv", &mut report)?;
    }
    Ok(report.finish())
}

fn push_slice_point(table: &mut Table, grid: &BodyGrid, t: f64, p: usize, values: &[f64]) {
    let mut row = vec![t];
    row.extend(grid.point(p));
    row.extend_from_slice(values);
    table.push(row);
}

fn run_geodesic(sc: &Scenario, options: &RunOptions) -> Result<Outcome, RunError> {
    sc.require(&[Needs::Geodesic])?;
    let mut report = Report::new(options.strict);
    header(sc, "geodesic", &mut report);
    let g = sc.geodesic.as_ref().expect("required");
    let start = GeodesicState::new(g.position.clone(), g.velocity.clone());
    let traj = geodesic_trajectory(&sc.chart, &start, g.duration, g.steps).context(|| "geodesic".into())?;
    let speed = |s: &GeodesicState| sc.chart.inner(&s.position, &s.velocity, &s.velocity).sqrt();
    let s0 = speed(&traj[0]);
    let drift = traj.iter().fold(0.0_f64, |a, s| a.max((speed(s) - s0).abs()));
    let end = traj.last().expect("nonempty");
    report.line(format!("end point {:?} after {} steps", end.position, g.steps));
    report.line(format!("speed {s0:e}, drift {drift:e}"));
    if let Some(dir) = &options.out {
        let m = sc.chart.dim();
        let mut cols = vec!["t".to_string()];
        cols.extend(numbered("y", m));
        cols.extend(numbered("v", m));
        cols.push("speed".into());
        let mut table = Table::new(cols);
        let h = g.duration / g.steps as f64;
        for (k, s) in traj.iter().enumerate() {
            let mut row = vec![k as f64 * h];
            row.extend_from_slice(&s.position);
            row.extend_from_slice(&s.velocity);
            row.push(speed(s));
            table.push(row);
        }
        save(&table, dir, "geodesic.tsv", &mut report)?;
    }
    Ok(report.finish())
}

fn verify_suite(options: &RunOptions) -> Result<Outcome, RunError> {
    let results = acceptance_suite(options.seed).context(|| "acceptance suite".into())?;
    let passed = results.iter().all(|r| r.passed);
    Ok(Outcome {
        lines: results.iter().map(ToString::to_string).collect(),
        passed,
    })
}

fn fmt_levels(r: &DefectReport) -> String {
    let l: Vec<String> = r.levels.iter().map(|(h, d)| format!("{h:.3e}:{d:.3e}")).collect();
    l.join(" ")
}

/// The acceptance checks that apply to one scenario.
fn verify_scenario(sc: &Scenario, options: &RunOptions) -> Result<Outcome, RunError> {
    sc.require(&[Needs::Body])?;
    let mut report = Report::new(options.strict);
    header(sc, "verify", &mut report);
    let flat = sc.manifold.starts_with("euclidean");
    let material = sc.material.as_ref().expect("required");
    let d = sc.body.as_ref().expect("required").dim;
    let m = sc.chart.dim();

    // the consistency tolerance is pinned at the canonical resolution
    let grid = sc.grid_with(CANONICAL_POINTS).context(|| "body grid".into())?;
    let slice = CANONICAL_SLICES / 2;
    let ls = linearization_scenario(
        sc,
        &grid,
        CANONICAL_DT,
        CANONICAL_SLICES,
        slice,
        options.seed,
        &mut report,
    )?;
    report.line(format!(
        "linearization at N = {CANONICAL_POINTS}, dt = {CANONICAL_DT:e}"
    ));
    compare_with_oracle(&ls, &eps_levels(sc.linearize.eps, options.eps_sweep), true, &mut report)?;

    let grid = sc.grid().context(|| "body grid".into())?;
    let phi = sc.initial_configuration(&grid).context(|| "initial.position".into())?;
    let mopts = MetricityOptions {
        seed: options.seed,
        ..MetricityOptions::default()
    };
    let r = metricity_defect(&sc.chart, &phi, &mopts).context(|| "metricity".into())?;
    if flat {
        report.check(
            r.levels.iter().all(|l| l.1 <= METRICITY_FLAT_TOLERANCE),
            format!("{r} (tol {METRICITY_FLAT_TOLERANCE:e})"),
        );
    } else {
        report.rate(
            r.convergence_slope >= METRICITY_MIN_SLOPE,
            format!("{r}, levels {} (min slope {METRICITY_MIN_SLOPE})", fmt_levels(&r)),
        );
    }

    verify_jacobi_scaling(sc, &phi, &mut report)?;
    verify_representation(sc, options.seed, &mut report)?;

    if material.kind == MaterialKind::Zero {
        if let Some(time) = &sc.time {
            verify_geodesic_flow(sc, &grid, &phi, time.dt, time.steps, &mut report)?;
        }
    }
    if flat && material.kind == MaterialKind::Svk && material.reference_metric.is_none() && d == m {
        verify_classical_tensor(sc, &grid, material.lambda, material.mu, &mut report)?;
    }
    if !sc.loading.clamped.is_empty() && (sc.loading.surface.is_some() || sc.loading.body.is_some()) {
        let cd = sc.density(&grid);
        let opts = NewtonOptions {
            clamped: sc.loading.clamped.clone(),
        };
        let (_, hist) = newton_solve(&sc.chart, &phi, &cd, &sc.load(), &opts, sc.newton_iterations.min(3))
            .context(|| "newton iteration".into())?;
        // second differences of log residuals above the roundoff floor
        let l: Vec<f64> = hist.iter().take_while(|r| **r > 1e-12).map(|r| r.ln()).collect();
        let second: Vec<f64> = l.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
        let h: Vec<String> = hist.iter().map(|r| format!("{r:.3e}")).collect();
        report.rate(
            second.iter().all(|s| *s <= NEWTON_CURVATURE),
            format!(
                "newton residuals {} (log second differences <= {NEWTON_CURVATURE})",
                h.join(", ")
            ),
        );
    }
    Ok(report.finish())
}

fn verify_jacobi_scaling(sc: &Scenario, phi: &Configuration, report: &mut Report) -> Result<(), RunError> {
    let m = sc.chart.dim();
    if m < 2 {
        return Ok(());
    }
    let y = phi.at(phi.grid().len() / 2).to_vec();
    // G-orthonormal pair from the coordinate directions
    let e = |k: usize| -> Vec<f64> { (0..m).map(|i| f64::from(i == k)).collect() };
    let unit = |v: Vec<f64>| {
        let n = sc.chart.inner(&y, &v, &v).sqrt();
        v.into_iter().map(|c| c / n).collect::<Vec<_>>()
    };
    let v = unit(e(0));
    let e1 = e(1);
    let proj = sc.chart.inner(&y, &v, &e1);
    let w = unit(e1.iter().zip(&v).map(|(a, b)| a - proj * b).collect());
    let r = jacobi_scaling_defect(&sc.chart, &y, &v, &w, &JACOBI_SLOPE_STEPS).context(|| "jacobi scaling".into())?;
    let fine = jacobi_scaling_defect(&sc.chart, &y, &v, &w, &[JACOBI_FINE_STEP]).context(|| "jacobi scaling".into())?;
    report.check(
        fine.max_defect <= JACOBI_FINE_TOLERANCE,
        format!(
            "jacobi scaling defect {:.3e} at step {JACOBI_FINE_STEP:e} (tol {JACOBI_FINE_TOLERANCE:e})",
            fine.max_defect
        ),
    );
    if r.levels.iter().all(|l| l.1 > 1e-13) {
        report.rate(
            (r.convergence_slope - 4.0).abs() <= 0.5,
            format!("{r}, levels {} (nominal 4)", fmt_levels(&r)),
        );
    } else {
        report.line(format!("{r}: at roundoff"));
    }
    Ok(())
}

fn verify_representation(sc: &Scenario, seed: u64, report: &mut Report) -> Result<(), RunError> {
    let mut levels = Vec::new();
    for n in [17, 33, 65] {
        let grid = sc.grid_with(n).context(|| "body grid".into())?;
        let phi = sc.initial_configuration(&grid).context(|| "initial.position".into())?;
        let cd = sc.density(&grid);
        let w = FourierField::new(seed, grid.dim(), phi.dim(), 2, 1.0).on_grid(&grid, 0.0);
        let stress = eval_stress(cd.as_ref(), &phi.jet()).context(|| "stress".into())?;
        let work = virtual_work(&stress, &w).abs();
        let defect = representation_defect(&stress, &w);
        if work == 0.0 && defect == 0.0 {
            report.line("representation identity: stress vanishes");
            return Ok(());
        }
        levels.push((grid.spacing(), defect / work.max(f64::MIN_POSITIVE)));
    }
    let r = DefectReport::from_levels("representation", levels.len(), levels);
    report.rate(
        r.convergence_slope >= REPRESENTATION_MIN_SLOPE,
        format!("{r}, levels {} (min slope {REPRESENTATION_MIN_SLOPE})", fmt_levels(&r)),
    );
    Ok(())
}

fn verify_geodesic_flow(
    sc: &Scenario,
    grid: &BodyGrid,
    phi: &Configuration,
    dt: f64,
    steps: usize,
    report: &mut Report,
) -> Result<(), RunError> {
    let m = sc.chart.dim();
    let v0 = sc.initial_velocity(grid);
    let cd = sc.density(grid);
    let sim = simulate(
        &sc.chart,
        phi,
        &v0,
        &cd,
        &sc.load(),
        dt,
        steps,
        &SimulateOptions::default(),
    )
    .context(|| "simulate".into())?;
    let t = steps as f64 * dt;
    let mut worst: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for p in 0..grid.len() {
        let v: Vec<f64> = v0[p * m..(p + 1) * m].iter().map(|c| t * c).collect();
        let (end, _) = transported_frame(&sc.chart, phi.at(p), &v, steps).context(|| "geodesic oracle".into())?;
        let got = sim.motion.at(steps, p);
        worst = worst.max(end.iter().zip(got).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        let speed = |n: usize| {
            let v = &sim.velocities[n][p * m..(p + 1) * m];
            sc.chart.inner(sim.motion.at(n, p), v, v).sqrt()
        };
        for n in 0..=steps {
            drift = drift.max((speed(n) - speed(0)).abs());
        }
    }
    report.check(
        worst <= GEODESIC_FLOW_TOLERANCE,
        format!("geodesic flow: deviation {worst:.3e} at t = {t:e} (tol {GEODESIC_FLOW_TOLERANCE:e})"),
    );
    report.check(
        drift <= SPEED_DRIFT_TOLERANCE,
        format!("geodesic flow: speed drift {drift:.3e} (tol {SPEED_DRIFT_TOLERANCE:e})"),
    );
    Ok(())
}

fn verify_classical_tensor(
    sc: &Scenario,
    grid: &BodyGrid,
    lambda: f64,
    mu: f64,
    report: &mut Report,
) -> Result<(), RunError> {
    let chart: &SpaceChart = &sc.chart;
    let identity = Configuration::from_fn(chart, grid.clone(), |x| x.to_vec()).context(|| "identity".into())?;
    let coeffs = coefficient_fields(
        &identity,
        &sc.density(grid),
        &covdyn::constitutive::LoadingDensity::zero(),
    )
    .context(|| "coefficient fields".into())?;
    let d = grid.dim();
    let del = |a: usize, b: usize| f64::from(a == b);
    let mut worst: f64 = 0.0;
    for p in 0..grid.len() {
        let rho = grid.density()[p];
        for al in 0..d {
            for be in 0..d {
                for l in 0..d {
                    for i in 0..d {
                        let hand =
                            mu * (del(i, be) * del(l, al) + del(l, i) * del(al, be)) + lambda * del(i, al) * del(l, be);
                        worst = worst.max((coeffs.a3(p, al, be, l, i) - rho * hand).abs());
                    }
                }
            }
        }
    }
    report.check(
        worst <= CLASSICAL_TENSOR_TOLERANCE,
        format!("svk at identity vs classical tensor: {worst:.3e} (tol {CLASSICAL_TENSOR_TOLERANCE:e})"),
    );
    Ok(())
}
