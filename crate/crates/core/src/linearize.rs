//! Covariant linearization of the equations of motion.
//!
//! At a configuration `κ` and a displacement `w` along it, the linearized
//! interior residual is
//!
//! ```text
//! ρ G_ij (A^i + D²w^i/dt² + R(w,V)V^i)
//!   − [𝒜¹_ij w^i + 𝒜²^δ_ij w^i_δ + 𝒜³^{αβ}_lj w^l_αβ + (divψ)_k Γ^k_ij w^i − (divψ)_j]
//! ```
//!
//! with `divψ = −divS`, and on the boundary
//!
//! ```text
//! (ψ^α_j − ψ^α_i Γ^i_lj w^l + ∂ψ^α_j/∂y^k w^k + ∂ψ^α_j/∂A^k_β w^k_β) n_α
//!   − 𝒯_j − ∂𝒯_j/∂y^k w^k + Γ^i_lj w^l 𝒯_i.
//! ```
//!
//! Both are affine in `w`; their constant parts are the nonlinear residuals.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::constitutive::{
    eval_stress, fold_body_load, jacobian4, BoundaryTraction, ConstitutiveDensity, JetLayout, LoadingDensity,
    DEFAULT_DENSITY_STEP,
};
use crate::error::{Error, Result};
use crate::geometry::{covariant_derivative_samples, exp_map, time_derivative, GeodesicState, SpaceChart};
use crate::grid::{d1, BodyGrid, Face};
use crate::kinematics::{
    acceleration_at, second_covariant_derivative_at, second_derivatives, velocity, Configuration, DisplacementField,
    Jet1Field, Motion,
};

/// Relative residual required of the Newton linear solve.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// How the Christoffel coupling term and the affine constant combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingReading {
    /// `(divψ)_k w^i Γ^k_ij − (divψ)_j`.
    #[default]
    Affine,
    /// `(divψ)_k w^i Γ^k_ij − (Σ_k divψ_k)(divψ)_j`.
    Product,
}

/// Which field fills the curvature slot of the inertial term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurvatureSlot {
    /// `R(w, V)V`.
    #[default]
    Displacement,
    /// `R^i_jkl V^j V^k (Dw/dt)^l`.
    TimeDerivative,
}

/// Whether the boundary expression carries the connection term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryReading {
    #[default]
    Connection,
    /// Drops `−ψ^α_i Γ^i_lj w^l n_α + Γ^i_lj w^l 𝒯_i`.
    NoConnection,
}

/// Choice among the readings of the linearized formulas. The default is the
/// one that passes the finite-difference oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Readings {
    pub coupling: CouplingReading,
    pub curvature: CurvatureSlot,
    pub boundary: BoundaryReading,
}

/// Coefficient fields of the linearized force at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedCoefficients {
    grid: BodyGrid,
    layout: JetLayout,
    a1: Vec<f64>,
    a2: Vec<f64>,
    a3: Vec<f64>,
    div_s: Vec<f64>,
    psi: Vec<f64>,
    dpsi_dy: Vec<f64>,
    dpsi_da: Vec<f64>,
}

impl LinearizedCoefficients {
    pub fn grid(&self) -> &BodyGrid {
        &self.grid
    }

    pub fn layout(&self) -> JetLayout {
        self.layout
    }

    /// `𝒜¹_ij` at point `p`.
    pub fn a1(&self, p: usize, i: usize, j: usize) -> f64 {
        let m = self.layout.m;
        self.a1[(p * m + i) * m + j]
    }

    /// `𝒜²^δ_ij` at point `p`.
    pub fn a2(&self, p: usize, delta: usize, i: usize, j: usize) -> f64 {
        let JetLayout { d, m } = self.layout;
        self.a2[((p * d + delta) * m + i) * m + j]
    }

    /// `𝒜³^{αβ}_lj` at point `p`.
    pub fn a3(&self, p: usize, alpha: usize, beta: usize, l: usize, j: usize) -> f64 {
        let JetLayout { d, m } = self.layout;
        self.a3[(((p * d + alpha) * d + beta) * m + l) * m + j]
    }

    /// `(divS)_j` at `p` (the negative of `divψ`).
    pub fn div_s(&self, p: usize) -> &[f64] {
        let m = self.layout.m;
        &self.div_s[p * m..(p + 1) * m]
    }

    /// `ψ^α_j` at `p`, laid out as `[j * d + α]`.
    pub fn psi(&self, p: usize) -> &[f64] {
        let k = self.layout.m * self.layout.d;
        &self.psi[p * k..(p + 1) * k]
    }

    /// `∂ψ^α_j/∂y^k` at `p`.
    pub fn dpsi_dy(&self, p: usize, j: usize, alpha: usize, k: usize) -> f64 {
        let JetLayout { d, m } = self.layout;
        self.dpsi_dy[((p * m + j) * d + alpha) * m + k]
    }

    /// `∂ψ^α_j/∂A^k_β` at `p`.
    pub fn dpsi_da(&self, p: usize, j: usize, alpha: usize, k: usize, beta: usize) -> f64 {
        let JetLayout { d, m } = self.layout;
        self.dpsi_da[(((p * m + j) * d + alpha) * m + k) * d + beta]
    }

    /// Named columns per grid point, for export.
    pub fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let JetLayout { d, m } = self.layout;
        let mut names = Vec::new();
        for i in 0..m {
            for j in 0..m {
                names.push(format!("A1_{}{}", i + 1, j + 1));
            }
        }
        for de in 0..d {
            for i in 0..m {
                for j in 0..m {
                    names.push(format!("A2^{}_{}{}", de + 1, i + 1, j + 1));
                }
            }
        }
        for al in 0..d {
            for be in 0..d {
                for l in 0..m {
                    for j in 0..m {
                        names.push(format!("A3^{}{}_{}{}", al + 1, be + 1, l + 1, j + 1));
                    }
                }
            }
        }
        for j in 0..m {
            names.push(format!("divS_{}", j + 1));
        }
        let rows = (0..self.grid.len())
            .map(|p| {
                let mut row = Vec::with_capacity(names.len());
                for i in 0..m {
                    for j in 0..m {
                        row.push(self.a1(p, i, j));
                    }
                }
                for de in 0..d {
                    for i in 0..m {
                        for j in 0..m {
                            row.push(self.a2(p, de, i, j));
                        }
                    }
                }
                for al in 0..d {
                    for be in 0..d {
                        for l in 0..m {
                            for j in 0..m {
                                row.push(self.a3(p, al, be, l, j));
                            }
                        }
                    }
                }
                row.extend_from_slice(self.div_s(p));
                row
            })
            .collect();
        (names, rows)
    }
}

struct PointCoefficients {
    a1: Vec<f64>,
    a2: Vec<f64>,
    a3: Vec<f64>,
    dpsi_dy: Vec<f64>,
    dpsi_da: Vec<f64>,
}

fn point_coefficients(cd: &dyn ConstitutiveDensity, jet: &Jet1Field, p: usize) -> Result<PointCoefficients> {
    let layout = cd.layout();
    let JetLayout { d, m } = layout;
    let x = jet.x(p);
    let (y, a) = (jet.y(p), jet.a(p));
    cd.check_domain(&x, y, a)
        .map_err(|reason| Error::DomainViolation { point: p, reason })?;
    let first = cd.partials(&x, y, a);
    let hess = cd.second_partials(&x, y, a)?;
    let k2 = jet.second_derivatives(p);

    // Σ_α [∂²ψ^α_j/∂z^k∂x^α + ∂²ψ^α_j/∂z^k∂y^l A^l_α + ∂²ψ^α_j/∂z^k∂A^l_β φ^l_αβ]
    let total = |j: usize, k: usize| -> f64 {
        let mut s = 0.0;
        for al in 0..d {
            s += hess.get(j, al, k, layout.x(al));
            for l in 0..m {
                s += hess.get(j, al, k, layout.y(l)) * a[l * d + al];
                for be in 0..d {
                    s += hess.get(j, al, k, layout.a(l, be)) * k2[(l * d + al) * d + be];
                }
            }
        }
        s
    };

    let mut a1 = vec![0.0; m * m];
    let mut a2 = vec![0.0; d * m * m];
    let mut a3 = vec![0.0; d * d * m * m];
    for i in 0..m {
        for j in 0..m {
            a1[i * m + j] = total(j, layout.y(i)) - first.dr_dy(j, i);
            for de in 0..d {
                a2[(de * m + i) * m + j] = total(j, layout.a(i, de)) + first.dpsi_dy(j, de, i) - first.dr_da(j, i, de);
            }
        }
    }
    for al in 0..d {
        for be in 0..d {
            for l in 0..m {
                for j in 0..m {
                    a3[((al * d + be) * m + l) * m + j] = first.dpsi_da(j, al, l, be);
                }
            }
        }
    }
    let mut dpsi_dy = vec![0.0; m * d * m];
    let mut dpsi_da = vec![0.0; m * d * m * d];
    for j in 0..m {
        for al in 0..d {
            for k in 0..m {
                dpsi_dy[(j * d + al) * m + k] = first.dpsi_dy(j, al, k);
                for be in 0..d {
                    dpsi_da[((j * d + al) * m + k) * d + be] = first.dpsi_da(j, al, k, be);
                }
            }
        }
    }
    Ok(PointCoefficients {
        a1,
        a2,
        a3,
        dpsi_dy,
        dpsi_da,
    })
}

/// Coefficients for a density with any body load already folded in.
pub(crate) fn coefficients_for_values(
    cd: &dyn ConstitutiveDensity,
    grid: &BodyGrid,
    m: usize,
    values: &[f64],
) -> Result<LinearizedCoefficients> {
    if cd.body_dim() != grid.dim() || cd.space_dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "density is for d = {}, m = {} but the body has d = {} in dimension {m}",
            cd.body_dim(),
            cd.space_dim(),
            grid.dim()
        )));
    }
    let jet = Jet1Field::from_values(grid, m, values);
    let stress = eval_stress(cd, &jet)?;
    let per_point: Vec<PointCoefficients> = (0..grid.len())
        .into_par_iter()
        .map(|p| point_coefficients(cd, &jet, p))
        .collect::<Result<_>>()?;
    let mut out = LinearizedCoefficients {
        grid: grid.clone(),
        layout: cd.layout(),
        a1: Vec::new(),
        a2: Vec::new(),
        a3: Vec::new(),
        div_s: stress.divergence(),
        psi: stress.psi_values().to_vec(),
        dpsi_dy: Vec::new(),
        dpsi_da: Vec::new(),
    };
    for c in per_point {
        out.a1.extend(c.a1);
        out.a2.extend(c.a2);
        out.a3.extend(c.a3);
        out.dpsi_dy.extend(c.dpsi_dy);
        out.dpsi_da.extend(c.dpsi_da);
    }
    Ok(out)
}

/// Coefficient fields `𝒜¹, 𝒜², 𝒜³`, the stress divergence and the boundary
/// ingredients at a stationary configuration. Body loads are folded into
/// the density's `R` slot.
pub fn coefficient_fields(
    phi: &Configuration,
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
) -> Result<LinearizedCoefficients> {
    let full = fold_body_load(cd.clone(), load, phi.grid());
    coefficients_for_values(full.as_ref(), phi.grid(), phi.dim(), phi.values())
}

/// Force part `𝒜¹w + 𝒜²w_δ + 𝒜³w_αβ + (divψ)_k Γ^k_ij w^i − c (divψ)_j`
/// at point `p`, where `c` depends on the coupling reading.
fn force_terms(
    coeffs: &LinearizedCoefficients,
    gamma: &crate::geometry::Christoffel,
    w: &[f64],
    p: usize,
    coupling: CouplingReading,
    include_constant: bool,
) -> Vec<f64> {
    let JetLayout { d, m } = coeffs.layout;
    let grid = &coeffs.grid;
    let wp = &w[p * m..(p + 1) * m];
    let w2 = second_derivatives(grid, m, w, p);
    let mut w1 = vec![0.0; m * d];
    for i in 0..m {
        for de in 0..d {
            w1[i * d + de] = d1(grid, w, m, i, p, de);
        }
    }
    let div_s = coeffs.div_s(p);
    let mut out = vec![0.0; m];
    for (j, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for i in 0..m {
            s += coeffs.a1(p, i, j) * wp[i];
            for de in 0..d {
                s += coeffs.a2(p, de, i, j) * w1[i * d + de];
            }
        }
        for al in 0..d {
            for be in 0..d {
                for l in 0..m {
                    s += coeffs.a3(p, al, be, l, j) * w2[(l * d + al) * d + be];
                }
            }
        }
        // (divψ)_k w^i Γ^k_ij with divψ = −divS
        for k in 0..m {
            for i in 0..m {
                s -= div_s[k] * wp[i] * gamma.get(k, i, j);
            }
        }
        if include_constant {
            let factor = match coupling {
                CouplingReading::Affine => 1.0,
                CouplingReading::Product => -div_s.iter().sum::<f64>(),
            };
            // − factor · (divψ)_j
            s += factor * div_s[j];
        }
        *o = s;
    }
    out
}

/// Inertial linearization `D²w/dt² + R(w, V)V` at slice `n`, point `p`.
fn inertial_at(
    chart: &SpaceChart,
    motion: &Motion,
    w: &DisplacementField,
    n: usize,
    p: usize,
    slot: CurvatureSlot,
) -> Result<Vec<f64>> {
    let mut out = second_covariant_derivative_at(chart, motion, w, n, p)?;
    let line = motion.world_line(p);
    let (v, _) = time_derivative(&line, motion.dt(), n);
    if v.iter().all(|x| *x == 0.0) {
        return Ok(out);
    }
    let curv = chart.curvature(line[n])?;
    let extra = match slot {
        CurvatureSlot::Displacement => curv.apply(w.at(n, p), &v, &v),
        CurvatureSlot::TimeDerivative => {
            let len = motion.len();
            let (lo, hi) = (n.saturating_sub(2), (n + 3).min(len));
            let field: Vec<&[f64]> = (lo..hi).map(|k| w.at(k, p)).collect();
            let dw = covariant_derivative_samples(chart, &line[lo..hi], &field, motion.dt(), n - lo)?.value;
            curv.apply(&v, &dw, &v)
        }
    };
    for (o, e) in out.iter_mut().zip(extra) {
        *o += e;
    }
    Ok(out)
}

/// `D²w/dt² + R(w, V)V` on every slice.
pub fn inertial_linearization(chart: &SpaceChart, motion: &Motion, w: &DisplacementField) -> Result<DisplacementField> {
    if motion.len() < 6 {
        return Err(Error::TooFewTimeSlices {
            required: 6,
            available: motion.len(),
        });
    }
    if w.len() != motion.len() || w.dim() != motion.dim() || w.grid() != motion.grid() {
        return Err(Error::DimensionMismatch(
            "displacement does not match the motion".into(),
        ));
    }
    let vel = velocity(motion)?;
    let m = motion.dim();
    let mut slices = Vec::with_capacity(motion.len());
    for n in 0..motion.len() {
        let mut slice = vec![0.0; motion.grid().len() * m];
        for p in 0..motion.grid().len() {
            let mut v = second_covariant_derivative_at(chart, motion, w, n, p)?;
            let vp = vel.at(n, p);
            if vp.iter().any(|x| *x != 0.0) {
                let extra = chart.curvature(motion.at(n, p))?.apply(w.at(n, p), vp, vp);
                for (a, b) in v.iter_mut().zip(extra) {
                    *a += b;
                }
            }
            slice[p * m..(p + 1) * m].copy_from_slice(&v);
        }
        slices.push(slice);
    }
    DisplacementField::new(motion.grid().clone(), m, slices)
}

fn check_displacement(motion: &Motion, w: &DisplacementField, n: usize) -> Result<()> {
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
    if motion.len() < 6 {
        return Err(Error::TooFewTimeSlices {
            required: 6,
            available: motion.len(),
        });
    }
    Ok(())
}

/// Linearized interior residual at slice `n` with precomputed coefficients
/// (which must belong to slice `n`).
pub fn apply_with_coefficients(
    chart: &SpaceChart,
    motion: &Motion,
    w: &DisplacementField,
    coeffs: &LinearizedCoefficients,
    n: usize,
    readings: Readings,
) -> Result<Vec<f64>> {
    check_displacement(motion, w, n)?;
    let grid = motion.grid();
    let m = motion.dim();
    let rho = grid.density();
    let wn = w.slice_values(n);
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|p| -> Result<Vec<f64>> {
            let y = motion.at(n, p);
            let mut acc = acceleration_at(chart, motion, n, p)?;
            let inert = inertial_at(chart, motion, w, n, p, readings.curvature)?;
            for (a, b) in acc.iter_mut().zip(inert) {
                *a += b;
            }
            let lhs = chart.lower(y, &acc);
            let gamma = chart.christoffel(y)?;
            let rhs = force_terms(coeffs, &gamma, wn, p, readings.coupling, true);
            Ok((0..m).map(|j| rho[p] * lhs[j] - rhs[j]).collect())
        })
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

/// Linearized interior residual `L_κ(w)` at slice `n`.
#[allow(clippy::too_many_arguments)]
pub fn apply_linearized(
    chart: &SpaceChart,
    motion: &Motion,
    w: &DisplacementField,
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
    n: usize,
    readings: Readings,
) -> Result<Vec<f64>> {
    check_displacement(motion, w, n)?;
    let full = fold_body_load(cd.clone(), load, motion.grid());
    let coeffs = coefficients_for_values(full.as_ref(), motion.grid(), motion.dim(), motion.slice_values(n))?;
    apply_with_coefficients(chart, motion, w, &coeffs, n, readings)
}

/// `∂𝒯_j/∂y^k` by fourth-order differences of the surface load.
fn surface_load_derivative(load: &LoadingDensity, x: &[f64], y: &[f64]) -> Vec<f64> {
    let f = |y: &[f64]| load.surface_at(x, y);
    jacobian4(&f, y, DEFAULT_DENSITY_STEP).1
}

/// Linearized boundary residual on one slice: `values` is the configuration,
/// `w` the displacement on the same slice.
pub fn boundary_linearized(
    chart: &SpaceChart,
    values: &[f64],
    w: &[f64],
    coeffs: &LinearizedCoefficients,
    load: &LoadingDensity,
    readings: Readings,
) -> Result<Vec<BoundaryTraction>> {
    boundary_terms(chart, values, w, coeffs, load, readings, true)
}

fn boundary_terms(
    chart: &SpaceChart,
    values: &[f64],
    w: &[f64],
    coeffs: &LinearizedCoefficients,
    load: &LoadingDensity,
    readings: Readings,
    include_constant: bool,
) -> Result<Vec<BoundaryTraction>> {
    let grid = &coeffs.grid;
    let JetLayout { d, m } = coeffs.layout;
    let mut out = Vec::new();
    for face in grid.all_faces() {
        for p in grid.face_points(face) {
            let y = &values[p * m..(p + 1) * m];
            let x = grid.point(p);
            let wp = &w[p * m..(p + 1) * m];
            let gamma = chart.christoffel(y)?;
            let psi = coeffs.psi(p);
            let t = load.surface_at(&x, y);
            let dt = if load.has_surface() {
                surface_load_derivative(load, &x, y)
            } else {
                vec![0.0; m * m]
            };
            let al = face.axis;
            let n = face.sign();
            let mut vals = vec![0.0; m];
            for (j, v) in vals.iter_mut().enumerate() {
                let mut s = 0.0;
                if include_constant {
                    s += psi[j * d + al] * n - t[j];
                }
                for k in 0..m {
                    s += n * coeffs.dpsi_dy(p, j, al, k) * wp[k];
                    for be in 0..d {
                        s += n * coeffs.dpsi_da(p, j, al, k, be) * d1(grid, w, m, k, p, be);
                    }
                    s -= dt[j * m + k] * wp[k];
                }
                if readings.boundary == BoundaryReading::Connection {
                    for i in 0..m {
                        for l in 0..m {
                            let g = gamma.get(i, l, j) * wp[l];
                            s += g * (t[i] - psi[i * d + al] * n);
                        }
                    }
                }
                *v = s;
            }
            out.push(BoundaryTraction {
                face,
                point: p,
                values: vals,
            });
        }
    }
    Ok(out)
}

/// Options for [`newton_step`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NewtonOptions {
    /// Faces with `w = 0`; the remaining faces get linearized traction rows.
    pub clamped: Vec<Face>,
}

/// One Newton correction and the quality of its linear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub w: Vec<f64>,
    /// Norm of the nonlinear residual rows before the step.
    pub residual_norm: f64,
    pub solve_relative_residual: f64,
}

struct StaticSystem {
    clamped: Vec<bool>,
    traction_faces: Vec<Face>,
}

impl StaticSystem {
    fn new(grid: &BodyGrid, clamped_faces: &[Face]) -> Self {
        let mut clamped = vec![false; grid.len()];
        for f in clamped_faces {
            for p in grid.face_points(*f) {
                clamped[p] = true;
            }
        }
        let traction_faces = grid
            .all_faces()
            .into_iter()
            .filter(|f| !clamped_faces.contains(f))
            .collect();
        Self {
            clamped,
            traction_faces,
        }
    }

    /// Rows of the static linearized system: the affine part when
    /// `include_constant`, the linear part otherwise.
    fn rows(
        &self,
        chart: &SpaceChart,
        values: &[f64],
        w: &[f64],
        coeffs: &LinearizedCoefficients,
        load: &LoadingDensity,
        include_constant: bool,
    ) -> Result<Vec<f64>> {
        let grid = &coeffs.grid;
        let m = coeffs.layout.m;
        let mut out = vec![0.0; grid.len() * m];
        for p in 0..grid.len() {
            if self.clamped[p] {
                out[p * m..(p + 1) * m].copy_from_slice(&w[p * m..(p + 1) * m]);
            } else if !grid.is_boundary(p) {
                let gamma = chart.christoffel(&values[p * m..(p + 1) * m])?;
                let f = force_terms(coeffs, &gamma, w, p, CouplingReading::Affine, include_constant);
                for j in 0..m {
                    out[p * m + j] = -f[j];
                }
            }
        }
        let bd = boundary_terms(chart, values, w, coeffs, load, Readings::default(), include_constant)?;
        for t in bd {
            if self.clamped[t.point] || !self.traction_faces.contains(&t.face) {
                continue;
            }
            for j in 0..m {
                out[t.point * m + j] += t.values[j];
            }
        }
        Ok(out)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Null-space dimension estimate from the singular values.
fn null_dimension(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().singular_values();
    let top = sv.max();
    sv.iter().filter(|s| **s <= 1e-10 * top).count()
}

/// Largest system solved with a singular-value check for degeneracy.
const SVD_CHECK_LIMIT: usize = 1500;

/// Solves the static linearized equilibrium problem at `phi` for the
/// correction `w`; update with [`apply_correction`].
pub fn newton_step(
    chart: &SpaceChart,
    phi: &Configuration,
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
    options: &NewtonOptions,
) -> Result<NewtonStep> {
    let grid = phi.grid();
    let m = phi.dim();
    let coeffs = coefficient_fields(phi, cd, load)?;
    let system = StaticSystem::new(grid, &options.clamped);
    let size = grid.len() * m;
    let zero = vec![0.0; size];
    let constant = system.rows(chart, phi.values(), &zero, &coeffs, load, true)?;
    let mut a = DMatrix::zeros(size, size);
    let mut e = zero.clone();
    for q in 0..size {
        e[q] = 1.0;
        let col = system.rows(chart, phi.values(), &e, &coeffs, load, false)?;
        a.set_column(q, &DVector::from_vec(col));
        e[q] = 0.0;
    }
    if size <= SVD_CHECK_LIMIT {
        let null_dim = null_dimension(&a);
        if null_dim > 0 {
            return Err(Error::DegenerateLinearization { null_dim });
        }
    }
    let rhs = -DVector::from_vec(constant.clone());
    let w = a
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateLinearization {
            null_dim: null_dimension(&a).max(1),
        })?;
    let rel = (&a * &w - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    if rhs.norm() > 0.0 && rel > SOLVER_TOLERANCE {
        return Err(Error::SolverTolerance {
            relative: rel,
            tolerance: SOLVER_TOLERANCE,
        });
    }
    Ok(NewtonStep {
        w: w.as_slice().to_vec(),
        residual_norm: norm(&constant),
        solve_relative_residual: if rhs.norm() > 0.0 { rel } else { 0.0 },
    })
}

/// Norm of the static residual rows used by [`newton_step`] at `phi`.
pub fn static_residual_norm(
    phi: &Configuration,
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
    options: &NewtonOptions,
) -> Result<f64> {
    let grid = phi.grid();
    let m = phi.dim();
    let full = fold_body_load(cd.clone(), load, grid);
    let jet = phi.jet();
    let stress = eval_stress(full.as_ref(), &jet)?;
    let div = stress.divergence();
    let system = StaticSystem::new(grid, &options.clamped);
    let mut rows = vec![0.0; grid.len() * m];
    for p in grid.interior_points() {
        if !system.clamped[p] {
            for j in 0..m {
                rows[p * m + j] = div[p * m + j];
            }
        }
    }
    let bd = crate::dynamics::equilibrium_residual(phi, cd, load)?.boundary.remove(0);
    for t in bd {
        if system.clamped[t.point] || !system.traction_faces.contains(&t.face) {
            continue;
        }
        for j in 0..m {
            rows[t.point * m + j] += t.values[j];
        }
    }
    Ok(norm(&rows))
}

/// `φ ← exp_φ(w)` pointwise.
pub fn apply_correction(chart: &SpaceChart, phi: &Configuration, w: &[f64], steps: usize) -> Result<Configuration> {
    let m = phi.dim();
    let mut values = Vec::with_capacity(phi.values().len());
    for p in 0..phi.grid().len() {
        let state = GeodesicState::new(phi.at(p).to_vec(), w[p * m..(p + 1) * m].to_vec());
        values.extend(exp_map(chart, &state, steps)?.position);
    }
    Configuration::new(chart, phi.grid().clone(), values)
}

/// Runs `iterations` Newton steps and returns the residual norm before each
/// step and after the last, together with the final configuration.
pub fn newton_solve(
    chart: &SpaceChart,
    phi: &Configuration,
    cd: &Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
    options: &NewtonOptions,
    iterations: usize,
) -> Result<(Configuration, Vec<f64>)> {
    let mut current = phi.clone();
    let mut history = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let step = newton_step(chart, &current, cd, load, options)?;
        history.push(step.residual_norm);
        current = apply_correction(chart, &current, &step.w, 32)?;
    }
    history.push(static_residual_norm(&current, cd, load, options)?);
    Ok((current, history))
}
