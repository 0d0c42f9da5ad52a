//! Smooth constitutive densities `ψ = (ψ^α_i dA^i_α + R_j dy^j) Vol`,
//! hyperelastic densities built from a Lagrangian, loadings, and the
//! divergence and traction of the resulting stress fields.
//!
//! Jet-space partials use the flattened variable `z = (x, y, A)` of length
//! `d + m + m·d`, with `A^i_α` at offset `d + m + i·d + α`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::SpaceChart;
use crate::grid::{d1, BodyGrid, Face, GridInterpolant, ScalarBodyFn};
use crate::kinematics::Jet1Field;

/// Default step for jet-space differences of densities.
pub const DEFAULT_DENSITY_STEP: f64 = 1e-3;

pub type JetVectorFn = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type LoadFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
type MatrixFieldFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Layout of the jet variable `z = (x, y, A)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JetLayout {
    pub d: usize,
    pub m: usize,
}

impl JetLayout {
    pub fn new(d: usize, m: usize) -> Self {
        Self { d, m }
    }

    pub fn len(&self) -> usize {
        self.d + self.m + self.m * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, beta: usize) -> usize {
        beta
    }

    pub fn y(&self, k: usize) -> usize {
        self.d + k
    }

    pub fn a(&self, k: usize, beta: usize) -> usize {
        self.d + self.m + k * self.d + beta
    }

    /// Index of `ψ^α_i` in a flattened stress array.
    pub fn psi(&self, i: usize, alpha: usize) -> usize {
        i * self.d + alpha
    }

    pub fn join(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.len());
        z.extend_from_slice(x);
        z.extend_from_slice(y);
        z.extend_from_slice(a);
        z
    }

    pub fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (x, rest) = z.split_at(self.d);
        let (y, a) = rest.split_at(self.m);
        (x, y, a)
    }
}

/// Fourth-order central-difference Jacobian of `f` at `z`, row-major
/// `[c * z.len() + k]`.
pub(crate) fn jacobian4(f: &dyn Fn(&[f64]) -> Vec<f64>, z: &[f64], h: f64) -> (usize, Vec<f64>) {
    let nz = z.len();
    let mut zp = z.to_vec();
    let mut cols = Vec::with_capacity(nz);
    let mut ncomp = 0;
    for k in 0..nz {
        let eval = |zp: &mut Vec<f64>, s: f64| {
            zp[k] = z[k] + s;
            let v = f(zp);
            zp[k] = z[k];
            v
        };
        let p2 = eval(&mut zp, 2.0 * h);
        let p1 = eval(&mut zp, h);
        let m1 = eval(&mut zp, -h);
        let m2 = eval(&mut zp, -2.0 * h);
        ncomp = p1.len();
        let col: Vec<f64> = (0..ncomp)
            .map(|c| (8.0 * (p1[c] - m1[c]) - (p2[c] - m2[c])) / (12.0 * h))
            .collect();
        cols.push(col);
    }
    let mut out = vec![0.0; ncomp * nz];
    for (k, col) in cols.iter().enumerate() {
        for c in 0..ncomp {
            out[c * nz + k] = col[c];
        }
    }
    (ncomp, out)
}

/// First partials of `ψ` and `R` with respect to the jet variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPartials {
    layout: JetLayout,
    dpsi: Vec<f64>,
    dr: Vec<f64>,
}

impl DensityPartials {
    pub fn new(layout: JetLayout, dpsi: Vec<f64>, dr: Vec<f64>) -> Self {
        Self { layout, dpsi, dr }
    }

    pub fn layout(&self) -> JetLayout {
        self.layout
    }

    /// `∂ψ^α_i/∂z^k`.
    pub fn psi(&self, i: usize, alpha: usize, k: usize) -> f64 {
        self.dpsi[self.layout.psi(i, alpha) * self.layout.len() + k]
    }

    /// `∂R_j/∂z^k`.
    pub fn r(&self, j: usize, k: usize) -> f64 {
        self.dr[j * self.layout.len() + k]
    }

    pub fn dpsi_dx(&self, i: usize, alpha: usize, beta: usize) -> f64 {
        self.psi(i, alpha, self.layout.x(beta))
    }

    pub fn dpsi_dy(&self, i: usize, alpha: usize, k: usize) -> f64 {
        self.psi(i, alpha, self.layout.y(k))
    }

    /// `∂ψ^α_i/∂A^k_β`.
    pub fn dpsi_da(&self, i: usize, alpha: usize, k: usize, beta: usize) -> f64 {
        self.psi(i, alpha, self.layout.a(k, beta))
    }

    pub fn dr_dy(&self, j: usize, k: usize) -> f64 {
        self.r(j, self.layout.y(k))
    }

    pub fn dr_da(&self, j: usize, k: usize, beta: usize) -> f64 {
        self.r(j, self.layout.a(k, beta))
    }
}

/// Second partials `∂²ψ^α_i/∂z^k∂z^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiHessian {
    layout: JetLayout,
    data: Vec<f64>,
}

impl PsiHessian {
    pub fn new(layout: JetLayout, data: Vec<f64>) -> Self {
        Self { layout, data }
    }

    pub fn layout(&self) -> JetLayout {
        self.layout
    }

    pub fn get(&self, i: usize, alpha: usize, k: usize, l: usize) -> f64 {
        let nz = self.layout.len();
        self.data[(self.layout.psi(i, alpha) * nz + k) * nz + l]
    }
}

/// A smooth constitutive density: the fields `ψ^α_i(x,y,A)` and `R_j(x,y,A)`.
///
/// `psi` returns `m·d` values laid out as `[i * d + α]`; `a` uses the same
/// layout for `A^i_α`. Partials default to fourth-order central differences
/// with [`ConstitutiveDensity::difference_step`].
pub trait ConstitutiveDensity: Send + Sync {
    fn body_dim(&self) -> usize;
    fn space_dim(&self) -> usize;
    fn psi(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64>;
    fn r(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64>;

    /// Rejects jets outside the density's domain.
    fn check_domain(&self, _x: &[f64], _y: &[f64], _a: &[f64]) -> std::result::Result<(), String> {
        Ok(())
    }

    fn difference_step(&self) -> f64 {
        DEFAULT_DENSITY_STEP
    }

    fn is_twice_differentiable(&self) -> bool {
        true
    }

    fn layout(&self) -> JetLayout {
        JetLayout::new(self.body_dim(), self.space_dim())
    }

    /// `∂ψ^α_i/∂z^k` laid out as `[psi(i, α) * nz + k]`.
    fn psi_partials(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        let layout = self.layout();
        let psi = |z: &[f64]| {
            let (x, y, a) = layout.split(z);
            self.psi(x, y, a)
        };
        jacobian4(&psi, &layout.join(x, y, a), self.difference_step()).1
    }

    fn partials(&self, x: &[f64], y: &[f64], a: &[f64]) -> DensityPartials {
        let layout = self.layout();
        let r = |z: &[f64]| {
            let (x, y, a) = layout.split(z);
            self.r(x, y, a)
        };
        let (_, dr) = jacobian4(&r, &layout.join(x, y, a), self.difference_step());
        DensityPartials::new(layout, self.psi_partials(x, y, a), dr)
    }

    /// Second partials of `ψ`, by differencing [`ConstitutiveDensity::psi_partials`]
    /// unless overridden.
    fn second_partials(&self, x: &[f64], y: &[f64], a: &[f64]) -> Result<PsiHessian> {
        if !self.is_twice_differentiable() {
            return Err(Error::NotTwiceDifferentiable(
                "density declares no second partials".into(),
            ));
        }
        let layout = self.layout();
        let nz = layout.len();
        let z = layout.join(x, y, a);
        let first = |z: &[f64]| {
            let (x, y, a) = layout.split(z);
            self.psi_partials(x, y, a)
        };
        let (_, raw) = jacobian4(&first, &z, self.difference_step());
        // raw[(c * nz + k) * nz + l] = ∂/∂z^l of ∂ψ_c/∂z^k; symmetrize.
        let ncomp = raw.len() / (nz * nz);
        let mut data = vec![0.0; raw.len()];
        for c in 0..ncomp {
            for k in 0..nz {
                for l in 0..nz {
                    let base = c * nz * nz;
                    data[base + k * nz + l] = 0.5 * (raw[base + k * nz + l] + raw[base + l * nz + k]);
                }
            }
        }
        Ok(PsiHessian::new(layout, data))
    }
}

/// A density given by closures, for densities outside the catalog.
#[derive(Clone)]
pub struct FnDensity {
    d: usize,
    m: usize,
    psi: JetVectorFn,
    r: JetVectorFn,
    twice_differentiable: bool,
}

impl fmt::Debug for FnDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDensity")
            .field("d", &self.d)
            .field("m", &self.m)
            .finish()
    }
}

impl FnDensity {
    pub fn new<P, R>(d: usize, m: usize, psi: P, r: R) -> Self
    where
        P: Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        R: Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            d,
            m,
            psi: Arc::new(psi),
            r: Arc::new(r),
            twice_differentiable: true,
        }
    }

    /// `ψ = 0`, `R = 0`.
    pub fn zero(d: usize, m: usize) -> Self {
        Self::new(d, m, move |_, _, _| vec![0.0; m * d], move |_, _, _| vec![0.0; m])
    }

    /// Marks the density as only once differentiable.
    pub fn once_differentiable(mut self) -> Self {
        self.twice_differentiable = false;
        self
    }
}

impl ConstitutiveDensity for FnDensity {
    fn body_dim(&self) -> usize {
        self.d
    }

    fn space_dim(&self) -> usize {
        self.m
    }

    fn psi(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        (self.psi)(x, y, a)
    }

    fn r(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        (self.r)(x, y, a)
    }

    fn is_twice_differentiable(&self) -> bool {
        self.twice_differentiable
    }
}

/// A Lagrangian density `ℒ(x, y, A)` per unit mass.
pub trait Lagrangian: Send + Sync {
    fn name(&self) -> String;
    fn body_dim(&self) -> usize;
    fn space_dim(&self) -> usize;
    fn value(&self, x: &[f64], y: &[f64], a: &[f64]) -> f64;

    fn check_domain(&self, _x: &[f64], _y: &[f64], _a: &[f64]) -> std::result::Result<(), String> {
        Ok(())
    }

    /// `∂ℒ/∂y^k`.
    fn grad_y(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        let f = |y: &[f64]| vec![self.value(x, y, a)];
        jacobian4(&f, y, DEFAULT_DENSITY_STEP).1
    }

    /// `∂ℒ/∂A^i_α`, laid out as `[i * d + α]`.
    fn grad_a(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        let f = |a: &[f64]| vec![self.value(x, y, a)];
        jacobian4(&f, a, DEFAULT_DENSITY_STEP).1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroLagrangian {
    d: usize,
    m: usize,
}

impl ZeroLagrangian {
    pub fn new(d: usize, m: usize) -> Self {
        Self { d, m }
    }
}

impl Lagrangian for ZeroLagrangian {
    fn name(&self) -> String {
        "zero".into()
    }

    fn body_dim(&self) -> usize {
        self.d
    }

    fn space_dim(&self) -> usize {
        self.m
    }

    fn value(&self, _x: &[f64], _y: &[f64], _a: &[f64]) -> f64 {
        0.0
    }

    fn grad_y(&self, _x: &[f64], _y: &[f64], _a: &[f64]) -> Vec<f64> {
        vec![0.0; self.m]
    }

    fn grad_a(&self, _x: &[f64], _y: &[f64], _a: &[f64]) -> Vec<f64> {
        vec![0.0; self.m * self.d]
    }
}

/// Dirichlet (harmonic-map) energy `½ G_ij(y) A^i_α A^j_α`.
#[derive(Debug, Clone)]
pub struct DirichletLagrangian {
    chart: SpaceChart,
    d: usize,
}

impl DirichletLagrangian {
    pub fn new(chart: SpaceChart, d: usize) -> Self {
        Self { chart, d }
    }
}

impl Lagrangian for DirichletLagrangian {
    fn name(&self) -> String {
        "dirichlet".into()
    }

    fn body_dim(&self) -> usize {
        self.d
    }

    fn space_dim(&self) -> usize {
        self.chart.dim()
    }

    fn value(&self, _x: &[f64], y: &[f64], a: &[f64]) -> f64 {
        let c = pullback_metric(&self.chart.metric(y), a, self.d);
        0.5 * c.trace()
    }

    fn grad_y(&self, _x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        self.chart
            .metric_derivative(y)
            .iter()
            .map(|dg| 0.5 * pullback_metric(dg, a, self.d).trace())
            .collect()
    }

    fn grad_a(&self, _x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        lower_a(&self.chart.metric(y), a, self.d)
    }
}

/// Reference metric `g(x)` on the body, a symmetric `d×d` field.
#[derive(Clone)]
pub struct ReferenceMetric {
    d: usize,
    field: MatrixFieldFn,
}

impl fmt::Debug for ReferenceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceMetric").field("d", &self.d).finish()
    }
}

impl ReferenceMetric {
    pub fn euclidean(d: usize) -> Self {
        Self::from_fn(d, move |_| DMatrix::identity(d, d))
    }

    pub fn from_fn<F>(d: usize, g: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self { d, field: Arc::new(g) }
    }

    /// Grid samples laid out as `[p * d*d + α * d + β]`, interpolated
    /// multilinearly.
    pub fn from_samples(grid: &BodyGrid, samples: &[f64]) -> Result<Self> {
        let d = grid.dim();
        if samples.len() != grid.len() * d * d {
            return Err(Error::DimensionMismatch(format!(
                "{} reference-metric samples for {} points with d = {d}",
                samples.len(),
                grid.len()
            )));
        }
        let comps: Vec<GridInterpolant> = (0..d * d)
            .map(|c| {
                let s = (0..grid.len()).map(|p| samples[p * d * d + c]).collect();
                GridInterpolant::new(d, grid.n(), s)
            })
            .collect();
        Ok(Self::from_fn(d, move |x| {
            DMatrix::from_fn(d, d, |a, b| comps[a * d + b].eval(x))
        }))
    }

    /// The pullback `C = AᵀG A` of a configuration, sampled at its jet.
    pub fn pullback(chart: &SpaceChart, jet: &Jet1Field) -> Result<Self> {
        let grid = jet.grid();
        let d = grid.dim();
        let samples: Vec<f64> = (0..grid.len())
            .flat_map(|p| {
                let c = pullback_metric(&chart.metric(jet.y(p)), jet.a(p), d);
                c.transpose().as_slice().to_vec()
            })
            .collect();
        Self::from_samples(grid, &samples)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn at(&self, x: &[f64]) -> DMatrix<f64> {
        (self.field)(x)
    }
}

/// `C_αβ = A^i_α M_ij A^j_β` for `a` laid out as `[i * d + α]`.
pub(crate) fn pullback_metric(metric: &DMatrix<f64>, a: &[f64], d: usize) -> DMatrix<f64> {
    let m = metric.nrows();
    let ga = lower_a(metric, a, d);
    DMatrix::from_fn(d, d, |al, be| (0..m).map(|i| a[i * d + al] * ga[i * d + be]).sum())
}

/// `(G A)_{iα} = G_ij A^j_α`, laid out as `[i * d + α]`. Plain loops keep the
/// rounding independent of memory layout.
fn lower_a(metric: &DMatrix<f64>, a: &[f64], d: usize) -> Vec<f64> {
    let m = metric.nrows();
    let mut out = vec![0.0; m * d];
    for i in 0..m {
        for al in 0..d {
            out[i * d + al] = (0..m).map(|j| metric[(i, j)] * a[j * d + al]).sum();
        }
    }
    out
}

/// Saint Venant–Kirchhoff energy relative to a reference metric `g` that
/// need not be realizable: `μ |E|² + ½λ (tr E)²`, `E = ½(C − g)`.
#[derive(Debug, Clone)]
pub struct IncompatibleSvk {
    chart: SpaceChart,
    reference: ReferenceMetric,
    lambda: f64,
    mu: f64,
}

impl IncompatibleSvk {
    /// Defaults `λ = 0`, `μ = 1`, i.e. `ℒ = ¼ |C − g|²`.
    pub fn new(chart: SpaceChart, reference: ReferenceMetric) -> Self {
        Self {
            chart,
            reference,
            lambda: 0.0,
            mu: 1.0,
        }
    }

    pub fn with_moduli(mut self, lambda: f64, mu: f64) -> Self {
        self.lambda = lambda;
        self.mu = mu;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Second Piola–Kirchhoff-type tensor `S = 2μE + λ tr(E) I`.
    fn stress(&self, x: &[f64], y: &[f64], a: &[f64]) -> DMatrix<f64> {
        let d = self.reference.dim();
        let c = pullback_metric(&self.chart.metric(y), a, d);
        let e = (c - self.reference.at(x)) * 0.5;
        let tr = e.trace();
        e * (2.0 * self.mu) + DMatrix::identity(d, d) * (self.lambda * tr)
    }
}

impl Lagrangian for IncompatibleSvk {
    fn name(&self) -> String {
        "svk-incompatible".into()
    }

    fn body_dim(&self) -> usize {
        self.reference.dim()
    }

    fn space_dim(&self) -> usize {
        self.chart.dim()
    }

    fn value(&self, x: &[f64], y: &[f64], a: &[f64]) -> f64 {
        let d = self.reference.dim();
        let c = pullback_metric(&self.chart.metric(y), a, d);
        let e = (c - self.reference.at(x)) * 0.5;
        let tr = e.trace();
        self.mu * e.norm_squared() + 0.5 * self.lambda * tr * tr
    }

    fn grad_y(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        let d = self.reference.dim();
        let s = self.stress(x, y, a);
        self.chart
            .metric_derivative(y)
            .iter()
            .map(|dg| 0.5 * s.component_mul(&pullback_metric(dg, a, d)).sum())
            .collect()
    }

    fn grad_a(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        let d = self.reference.dim();
        let m = self.chart.dim();
        let s = self.stress(x, y, a);
        let ga = lower_a(&self.chart.metric(y), a, d);
        // (G A S)_{iα} = Σ_δ (GA)_{iδ} S_{δα}
        let mut out = vec![0.0; m * d];
        for i in 0..m {
            for al in 0..d {
                out[i * d + al] = (0..d).map(|de| ga[i * d + de] * s[(de, al)]).sum();
            }
        }
        out
    }
}

/// Catalog lookup with default parameters: `zero`, `dirichlet`,
/// `svk-incompatible` (Euclidean reference metric, `λ = 0`, `μ = 1`).
pub fn lagrangian_from_catalog(name: &str, chart: &SpaceChart, d: usize) -> Result<Arc<dyn Lagrangian>> {
    match name.trim() {
        "zero" => Ok(Arc::new(ZeroLagrangian::new(d, chart.dim()))),
        "dirichlet" => Ok(Arc::new(DirichletLagrangian::new(chart.clone(), d))),
        "svk-incompatible" | "svk" => Ok(Arc::new(IncompatibleSvk::new(
            chart.clone(),
            ReferenceMetric::euclidean(d),
        ))),
        other => Err(Error::UnknownCatalogEntry(other.to_string())),
    }
}

/// The density of a hyperelastic body: `ψ^α_i = ρ ∂ℒ/∂A^i_α`,
/// `R_i = ρ ∂ℒ/∂y^i`.
#[derive(Clone)]
pub struct HyperelasticDensity {
    lagrangian: Arc<dyn Lagrangian>,
    density: ScalarBodyFn,
}

impl fmt::Debug for HyperelasticDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HyperelasticDensity")
            .field("lagrangian", &self.lagrangian.name())
            .finish()
    }
}

impl HyperelasticDensity {
    pub fn lagrangian(&self) -> &Arc<dyn Lagrangian> {
        &self.lagrangian
    }

    /// `∫ ℒ ρ dx` over the grid by the trapezoid rule.
    pub fn energy(&self, jet: &Jet1Field) -> f64 {
        let grid = jet.grid();
        (0..grid.len())
            .map(|p| {
                let x = jet.x(p);
                grid.quadrature_weight(p) * (self.density)(&x) * self.lagrangian.value(&x, jet.y(p), jet.a(p))
            })
            .sum()
    }
}

pub fn from_lagrangian(lagrangian: Arc<dyn Lagrangian>, grid: &BodyGrid) -> HyperelasticDensity {
    HyperelasticDensity {
        lagrangian,
        density: grid.density_fn(),
    }
}

impl ConstitutiveDensity for HyperelasticDensity {
    fn body_dim(&self) -> usize {
        self.lagrangian.body_dim()
    }

    fn space_dim(&self) -> usize {
        self.lagrangian.space_dim()
    }

    fn psi(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        let rho = (self.density)(x);
        self.lagrangian.grad_a(x, y, a).into_iter().map(|v| rho * v).collect()
    }

    fn r(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        let rho = (self.density)(x);
        self.lagrangian.grad_y(x, y, a).into_iter().map(|v| rho * v).collect()
    }

    fn check_domain(&self, x: &[f64], y: &[f64], a: &[f64]) -> std::result::Result<(), String> {
        self.lagrangian.check_domain(x, y, a)
    }
}

/// Body loading `b_i(x, y)` per unit mass and surface loading `𝒯_i(x, y)`
/// on `∂B`. Both default to zero.
#[derive(Clone, Default)]
pub struct LoadingDensity {
    body: Option<LoadFn>,
    surface: Option<LoadFn>,
}

impl fmt::Debug for LoadingDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoadingDensity")
            .field("body", &self.body.is_some())
            .field("surface", &self.surface.is_some())
            .finish()
    }
}

impl LoadingDensity {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_body<F>(mut self, b: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.body = Some(Arc::new(b));
        self
    }

    pub fn with_surface<F>(mut self, t: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.surface = Some(Arc::new(t));
        self
    }

    pub fn has_body(&self) -> bool {
        self.body.is_some()
    }

    pub fn has_surface(&self) -> bool {
        self.surface.is_some()
    }

    pub fn body_at(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.body {
            Some(b) => b(x, y),
            None => vec![0.0; y.len()],
        }
    }

    pub fn surface_at(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match &self.surface {
            Some(t) => t(x, y),
            None => vec![0.0; y.len()],
        }
    }
}

/// A density with the body load folded into the `R` slot: `R − ρ b`.
#[derive(Clone)]
pub struct LoadedDensity {
    inner: Arc<dyn ConstitutiveDensity>,
    body: LoadFn,
    density: ScalarBodyFn,
}

impl ConstitutiveDensity for LoadedDensity {
    fn body_dim(&self) -> usize {
        self.inner.body_dim()
    }

    fn space_dim(&self) -> usize {
        self.inner.space_dim()
    }

    fn psi(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        self.inner.psi(x, y, a)
    }

    fn r(&self, x: &[f64], y: &[f64], a: &[f64]) -> Vec<f64> {
        let rho = (self.density)(x);
        let b = (self.body)(x, y);
        self.inner
            .r(x, y, a)
            .into_iter()
            .zip(b)
            .map(|(r, b)| r - rho * b)
            .collect()
    }

    fn check_domain(&self, x: &[f64], y: &[f64], a: &[f64]) -> std::result::Result<(), String> {
        self.inner.check_domain(x, y, a)
    }

    fn difference_step(&self) -> f64 {
        self.inner.difference_step()
    }

    fn is_twice_differentiable(&self) -> bool {
        self.inner.is_twice_differentiable()
    }
}

/// Folds the body part of `load` into the density; returns `cd` unchanged
/// when there is no body load.
pub fn fold_body_load(
    cd: Arc<dyn ConstitutiveDensity>,
    load: &LoadingDensity,
    grid: &BodyGrid,
) -> Arc<dyn ConstitutiveDensity> {
    match &load.body {
        None => cd,
        Some(b) => Arc::new(LoadedDensity {
            inner: cd,
            body: b.clone(),
            density: grid.density_fn(),
        }),
    }
}

/// `ψ∘j¹κ` and `R∘j¹κ` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    grid: BodyGrid,
    layout: JetLayout,
    psi: Vec<f64>,
    r: Vec<f64>,
}

impl StressField {
    pub fn grid(&self) -> &BodyGrid {
        &self.grid
    }

    pub fn layout(&self) -> JetLayout {
        self.layout
    }

    /// `ψ^α_i` at `p`, laid out as `[i * d + α]`.
    pub fn psi_at(&self, p: usize) -> &[f64] {
        let k = self.layout.m * self.layout.d;
        &self.psi[p * k..(p + 1) * k]
    }

    pub fn r_at(&self, p: usize) -> &[f64] {
        let m = self.layout.m;
        &self.r[p * m..(p + 1) * m]
    }

    pub fn psi_values(&self) -> &[f64] {
        &self.psi
    }

    pub fn r_values(&self) -> &[f64] {
        &self.r
    }

    /// `(divS)_j = ∂_α(ψ^α_j∘j¹κ) − R_j` by differencing the composed field.
    pub fn divergence(&self) -> Vec<f64> {
        let JetLayout { d, m } = self.layout;
        let mut out = vec![0.0; self.grid.len() * m];
        for p in 0..self.grid.len() {
            for j in 0..m {
                let div: f64 = (0..d)
                    .map(|al| composed_d1(&self.grid, &self.psi, m * d, j * d + al, p, al))
                    .sum();
                out[p * m + j] = div - self.r[p * m + j];
            }
        }
        out
    }

    /// `Σ_α ψ^α_i n_α` on every face, one entry per (face, point).
    pub fn traction(&self) -> Vec<BoundaryTraction> {
        let JetLayout { d, m } = self.layout;
        let mut out = Vec::new();
        for face in self.grid.all_faces() {
            for p in self.grid.face_points(face) {
                let psi = self.psi_at(p);
                let values = (0..m).map(|i| face.sign() * psi[i * d + face.axis]).collect();
                out.push(BoundaryTraction { face, point: p, values });
            }
        }
        out
    }
}

/// First derivative of a composed field `ψ∘j¹κ`. Next to a face the stencil
/// is one-sided away from it: the face values carry the less accurate
/// one-sided jet, and a central difference through them drops an order.
fn composed_d1(grid: &BodyGrid, data: &[f64], ncomp: usize, c: usize, p: usize, axis: usize) -> f64 {
    let n = grid.n();
    let h = grid.spacing();
    let s = grid.stride(axis);
    let i = grid.multi_index(p)[axis];
    let at = |q: usize| data[q * ncomp + c];
    if i == 1 {
        (3.0 * (at(p + s) - at(p)) - (at(p + 2 * s) - at(p + s))) / (2.0 * h)
    } else if i == n - 2 {
        (3.0 * (at(p) - at(p - s)) - (at(p - s) - at(p - 2 * s))) / (2.0 * h)
    } else {
        d1(grid, data, ncomp, c, p, axis)
    }
}

/// `(p_σS)_i = ψ^α_i n_α` at one boundary point of one face.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTraction {
    pub face: Face,
    pub point: usize,
    pub values: Vec<f64>,
}

fn check_dims(cd: &dyn ConstitutiveDensity, jet: &Jet1Field) -> Result<()> {
    if cd.body_dim() != jet.grid().dim() || cd.space_dim() != jet.dim() {
        return Err(Error::DimensionMismatch(format!(
            "density is for d = {}, m = {} but the jet has d = {}, m = {}",
            cd.body_dim(),
            cd.space_dim(),
            jet.grid().dim(),
            jet.dim()
        )));
    }
    Ok(())
}

pub fn eval_stress(cd: &dyn ConstitutiveDensity, jet: &Jet1Field) -> Result<StressField> {
    check_dims(cd, jet)?;
    let grid = jet.grid();
    let layout = cd.layout();
    let mut psi = Vec::with_capacity(grid.len() * layout.m * layout.d);
    let mut r = Vec::with_capacity(grid.len() * layout.m);
    for p in 0..grid.len() {
        let x = jet.x(p);
        let (y, a) = (jet.y(p), jet.a(p));
        cd.check_domain(&x, y, a)
            .map_err(|reason| Error::DomainViolation { point: p, reason })?;
        let sp = cd.psi(&x, y, a);
        let rp = cd.r(&x, y, a);
        if sp.len() != layout.m * layout.d || rp.len() != layout.m {
            return Err(Error::DimensionMismatch(format!(
                "density returned {} stress and {} force components",
                sp.len(),
                rp.len()
            )));
        }
        if sp.iter().chain(&rp).any(|v| !v.is_finite()) {
            return Err(Error::DomainViolation {
                point: p,
                reason: "non-finite value".into(),
            });
        }
        psi.extend(sp);
        r.extend(rp);
    }
    Ok(StressField {
        grid: grid.clone(),
        layout,
        psi,
        r,
    })
}

/// Divergence by differencing the composed stress field.
pub fn stress_divergence(cd: &dyn ConstitutiveDensity, jet: &Jet1Field) -> Result<Vec<f64>> {
    Ok(eval_stress(cd, jet)?.divergence())
}

/// Divergence by the chain rule:
/// `∂ψ^α_j/∂x^α + ∂ψ^α_j/∂y^l A^l_α + ∂ψ^α_j/∂A^l_β ∂_{αβ}κ^l − R_j`.
pub fn stress_divergence_chain_rule(cd: &dyn ConstitutiveDensity, jet: &Jet1Field) -> Result<Vec<f64>> {
    check_dims(cd, jet)?;
    let grid = jet.grid();
    let JetLayout { d, m } = cd.layout();
    let mut out = vec![0.0; grid.len() * m];
    for p in 0..grid.len() {
        let x = jet.x(p);
        let (y, a) = (jet.y(p), jet.a(p));
        cd.check_domain(&x, y, a)
            .map_err(|reason| Error::DomainViolation { point: p, reason })?;
        let dp = cd.partials(&x, y, a);
        let r = cd.r(&x, y, a);
        let k2 = jet.second_derivatives(p);
        for j in 0..m {
            let mut s = -r[j];
            for al in 0..d {
                s += dp.dpsi_dx(j, al, al);
                for l in 0..m {
                    s += dp.dpsi_dy(j, al, l) * a[l * d + al];
                    for be in 0..d {
                        s += dp.dpsi_da(j, al, l, be) * k2[(l * d + al) * d + be];
                    }
                }
            }
            out[p * m + j] = s;
        }
    }
    Ok(out)
}

pub fn traction(cd: &dyn ConstitutiveDensity, jet: &Jet1Field) -> Result<Vec<BoundaryTraction>> {
    Ok(eval_stress(cd, jet)?.traction())
}

/// Trapezoid value of `∫ (ψ^α_i w^i_{,α} + R_i w^i) dx` for a single-slice
/// field `w` (point-major).
pub fn virtual_work(stress: &StressField, w: &[f64]) -> f64 {
    let grid = &stress.grid;
    let JetLayout { d, m } = stress.layout;
    (0..grid.len())
        .map(|p| {
            let psi = stress.psi_at(p);
            let r = stress.r_at(p);
            let mut s = 0.0;
            for i in 0..m {
                s += r[i] * w[p * m + i];
                for al in 0..d {
                    s += psi[i * d + al] * d1(grid, w, m, i, p, al);
                }
            }
            grid.quadrature_weight(p) * s
        })
        .sum()
}

/// Trapezoid value of `∫ f_i w^i dx` for point-major fields.
pub fn body_work(grid: &BodyGrid, f: &[f64], w: &[f64], m: usize) -> f64 {
    (0..grid.len())
        .map(|p| grid.quadrature_weight(p) * (0..m).map(|i| f[p * m + i] * w[p * m + i]).sum::<f64>())
        .sum()
}

/// Face quadrature of `∫_{∂B} t_i w^i`.
pub fn boundary_work(grid: &BodyGrid, tractions: &[BoundaryTraction], w: &[f64], m: usize) -> f64 {
    let mut total = 0.0;
    for face in grid.all_faces() {
        let weights = grid.face_weights(face);
        let on_face = tractions.iter().filter(|t| t.face == face);
        for (t, wt) in on_face.zip(weights) {
            total += wt * (0..m).map(|i| t.values[i] * w[t.point * m + i]).sum::<f64>();
        }
    }
    total
}

/// `|∫S(j¹w) + ∫divS·w − ∫_{∂B} p_σS·w|`, the discrete defect of the
/// integration-by-parts identity.
pub fn representation_defect(stress: &StressField, w: &[f64]) -> f64 {
    let m = stress.layout.m;
    let lhs = virtual_work(stress, w);
    let div = stress.divergence();
    let rhs = -body_work(&stress.grid, &div, w, m) + boundary_work(&stress.grid, &stress.traction(), w, m);
    (lhs - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn jet_1d(n: usize, m: usize, f: impl Fn(f64) -> Vec<f64>) -> Jet1Field {
        let grid = BodyGrid::new(1, n).unwrap();
        let values: Vec<f64> = (0..n).flat_map(|p| f(grid.point(p)[0])).collect();
        Jet1Field::from_values(&grid, m, &values)
    }

    #[test]
    fn zero_lagrangian_gives_zero_density() {
        let chart = SpaceChart::sphere();
        let grid = BodyGrid::new(1, 9).unwrap();
        let cd = from_lagrangian(lagrangian_from_catalog("zero", &chart, 1).unwrap(), &grid);
        assert_eq!(cd.psi(&[0.3], &[1.0, 0.2], &[0.4, 0.5]), vec![0.0, 0.0]);
        assert_eq!(cd.r(&[0.3], &[1.0, 0.2], &[0.4, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn dirichlet_flat_stress_is_gradient() {
        let chart = SpaceChart::euclidean(2);
        let grid = BodyGrid::new(2, 9).unwrap();
        let cd = from_lagrangian(Arc::new(DirichletLagrangian::new(chart, 2)), &grid);
        let a = [1.2, -0.3, 0.7, 2.0];
        let psi = cd.psi(&[0.1, 0.2], &[0.0, 0.0], &a);
        for k in 0..4 {
            assert_abs_diff_eq!(psi[k], a[k], epsilon = 1e-14);
        }
        assert_eq!(cd.r(&[0.1, 0.2], &[0.0, 0.0], &a), vec![0.0, 0.0]);
    }

    #[test]
    fn dirichlet_curved_force_term() {
        // Sphere, d = 1: R_θ = ½ ∂_θ(sin²θ) (A^φ)² = sinθ cosθ (A^φ)².
        let chart = SpaceChart::sphere();
        let grid = BodyGrid::new(1, 9).unwrap();
        let cd = from_lagrangian(Arc::new(DirichletLagrangian::new(chart, 1)), &grid);
        let (th, at, ap) = (1.1_f64, 0.4, 0.9);
        let r = cd.r(&[0.5], &[th, 0.3], &[at, ap]);
        assert_abs_diff_eq!(r[0], th.sin() * th.cos() * ap * ap, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1], 0.0, epsilon = 1e-14);
        let psi = cd.psi(&[0.5], &[th, 0.3], &[at, ap]);
        assert_abs_diff_eq!(psi[0], at, epsilon = 1e-14);
        assert_abs_diff_eq!(psi[1], th.sin().powi(2) * ap, epsilon = 1e-14);
    }

    #[test]
    fn lagrangian_gradients_match_differences() {
        let chart = SpaceChart::half_plane();
        let g = ReferenceMetric::from_fn(2, |x| {
            DMatrix::from_row_slice(2, 2, &[1.0 + 0.2 * x[0], 0.1, 0.1, 0.9 + 0.1 * x[1]])
        });
        let svk = IncompatibleSvk::new(chart.clone(), g).with_moduli(0.7, 1.3);
        let dir = DirichletLagrangian::new(chart, 2);
        let (x, y, a) = ([0.3, 0.6], [0.2, 1.4], [1.1, 0.2, -0.3, 0.8]);
        for lag in [&svk as &dyn Lagrangian, &dir] {
            let fa = |a: &[f64]| vec![lag.value(&x, &y, a)];
            let fy = |y: &[f64]| vec![lag.value(&x, y, &a)];
            let na = jacobian4(&fa, &a, 1e-3).1;
            let ny = jacobian4(&fy, &y, 1e-3).1;
            for (u, v) in lag.grad_a(&x, &y, &a).iter().zip(&na) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-9);
            }
            for (u, v) in lag.grad_y(&x, &y, &a).iter().zip(&ny) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn svk_is_stress_free_at_reference_metric() {
        let chart = SpaceChart::sphere();
        let jet = jet_1d(17, 2, |x| vec![1.0 + 0.3 * x, 0.5 * x * x + x]);
        let g = ReferenceMetric::pullback(&chart, &jet).unwrap();
        let cd = from_lagrangian(
            Arc::new(IncompatibleSvk::new(chart, g).with_moduli(0.5, 1.0)),
            jet.grid(),
        );
        let s = eval_stress(&cd, &jet).unwrap();
        for v in s.psi_values().iter().chain(s.r_values()) {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn svk_moduli_give_classical_tensor_at_identity() {
        let (lambda, mu) = (0.6, 1.7);
        let chart = SpaceChart::euclidean(2);
        let grid = BodyGrid::new(2, 9).unwrap();
        let cd = from_lagrangian(
            Arc::new(IncompatibleSvk::new(chart, ReferenceMetric::euclidean(2)).with_moduli(lambda, mu)),
            &grid,
        );
        let dp = cd.partials(&[0.4, 0.4], &[0.4, 0.4], &[1.0, 0.0, 0.0, 1.0]);
        let del = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..2 {
            for al in 0..2 {
                for l in 0..2 {
                    for be in 0..2 {
                        let expect =
                            mu * (del(i, be) * del(l, al) + del(l, i) * del(al, be)) + lambda * del(i, al) * del(l, be);
                        assert_abs_diff_eq!(dp.dpsi_da(i, al, l, be), expect, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn hyperelastic_second_partials_are_symmetric_in_a() {
        let chart = SpaceChart::sphere();
        let grid = BodyGrid::new(2, 9).unwrap();
        let cd = from_lagrangian(
            Arc::new(IncompatibleSvk::new(chart, ReferenceMetric::euclidean(2)).with_moduli(0.3, 1.0)),
            &grid,
        );
        let (x, y, a) = ([0.2, 0.7], [1.2, 0.4], [0.9, 0.1, 0.2, 1.1]);
        let dp = cd.partials(&x, &y, &a);
        for i in 0..2 {
            for al in 0..2 {
                for k in 0..2 {
                    for be in 0..2 {
                        assert_abs_diff_eq!(dp.dpsi_da(i, al, k, be), dp.dpsi_da(k, be, i, al), epsilon = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn second_partials_of_cubic_density() {
        // ψ = x y A², so ∂²ψ/∂y∂A = 2xA and ∂²ψ/∂A² = 2xy.
        let cd = FnDensity::new(1, 1, |x, y, a| vec![x[0] * y[0] * a[0] * a[0]], |_, _, _| vec![0.0]);
        let h = cd.second_partials(&[0.5], &[2.0], &[3.0]).unwrap();
        let l = cd.layout();
        assert_abs_diff_eq!(h.get(0, 0, l.y(0), l.a(0, 0)), 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(h.get(0, 0, l.a(0, 0), l.a(0, 0)), 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(h.get(0, 0, l.x(0), l.y(0)), 9.0, epsilon = 1e-8);
        let once = FnDensity::zero(1, 1).once_differentiable();
        assert!(matches!(
            once.second_partials(&[0.0], &[0.0], &[1.0]),
            Err(Error::NotTwiceDifferentiable(_))
        ));
    }

    #[test]
    fn partials_converge_at_second_order_under_plain_differences() {
        let cd = FnDensity::new(
            1,
            1,
            |x, y, a| vec![(x[0] * y[0]).sin() * a[0].exp()],
            |_, y, _| vec![y[0].cos()],
        );
        let dp = cd.partials(&[0.3], &[0.8], &[0.2]);
        let exact = 0.3 * (0.24_f64).cos() * (0.2_f64).exp();
        assert_abs_diff_eq!(dp.dpsi_dy(0, 0, 0), exact, epsilon = 1e-11);
        let err = |h: f64| {
            let f = |y: f64| cd.psi(&[0.3], &[y], &[0.2])[0];
            ((f(0.8 + h) - f(0.8 - h)) / (2.0 * h) - dp.dpsi_dy(0, 0, 0)).abs()
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn eval_stress_examples() {
        let jet = jet_1d(9, 1, |x| vec![x]);
        let zero = eval_stress(&FnDensity::zero(1, 1), &jet).unwrap();
        assert!(zero.psi_values().iter().all(|v| *v == 0.0));
        let grid = jet.grid().clone();
        let dir = from_lagrangian(Arc::new(DirichletLagrangian::new(SpaceChart::euclidean(1), 1)), &grid);
        let s = eval_stress(&dir, &jet).unwrap();
        for p in 0..grid.len() {
            assert_abs_diff_eq!(s.psi_at(p)[0], 1.0, epsilon = 1e-12);
        }
        assert_eq!(s, eval_stress(&dir, &jet).unwrap());
    }

    #[test]
    fn eval_stress_reports_domain_violation() {
        let cd = FnDensity::new(1, 1, |_, _, a| vec![a[0].ln()], |_, _, _| vec![0.0]);
        let jet = jet_1d(9, 1, |x| vec![-(x - 0.5).powi(2)]);
        assert!(matches!(eval_stress(&cd, &jet), Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn divergence_examples() {
        let jet = jet_1d(9, 1, |x| vec![x]);
        let constant = FnDensity::new(1, 1, |_, _, _| vec![2.5], |_, _, _| vec![0.0]);
        let linear = FnDensity::new(1, 1, |x, _, _| vec![x[0]], |_, _, _| vec![0.0]);
        let force = FnDensity::new(1, 1, |_, _, _| vec![0.0], |_, _, _| vec![3.0]);
        for (cd, expect) in [(constant, 0.0), (linear, 1.0), (force, -3.0)] {
            for v in stress_divergence(&cd, &jet).unwrap() {
                assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
            }
            for v in stress_divergence_chain_rule(&cd, &jet).unwrap() {
                assert_abs_diff_eq!(v, expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn divergence_paths_agree_to_second_order() {
        let chart = SpaceChart::sphere();
        let errs: Vec<f64> = [33, 65]
            .iter()
            .map(|&n| {
                let jet = jet_1d(n, 2, |x| {
                    vec![PI / 2.0 + 0.3 * (x - 0.5), 0.8 * x + 0.1 * (PI * x).sin()]
                });
                let cd = from_lagrangian(Arc::new(DirichletLagrangian::new(chart.clone(), 1)), jet.grid());
                let a = stress_divergence(&cd, &jet).unwrap();
                let b = stress_divergence_chain_rule(&cd, &jet).unwrap();
                jet.grid()
                    .interior_points()
                    .iter()
                    .flat_map(|&p| (0..2).map(move |j| p * 2 + j))
                    .map(|k| (a[k] - b[k]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.5, "ratio {ratio}, errs {errs:?}");
    }

    #[test]
    fn traction_signs_and_free_ends() {
        let jet = jet_1d(9, 1, |x| vec![x]);
        let cd = FnDensity::new(1, 1, |x, _, _| vec![1.0 + x[0]], |_, _, _| vec![0.0]);
        let t = traction(&cd, &jet).unwrap();
        let lower = t.iter().find(|t| t.face.side == crate::grid::Side::Lower).unwrap();
        let upper = t.iter().find(|t| t.face.side == crate::grid::Side::Upper).unwrap();
        assert_abs_diff_eq!(lower.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(upper.values[0], 2.0, epsilon = 1e-14);

        // κ = 3x²(1−x)² has zero slope at both ends.
        let grid = BodyGrid::new(1, 129).unwrap();
        let dir = from_lagrangian(Arc::new(DirichletLagrangian::new(SpaceChart::euclidean(1), 1)), &grid);
        let flat = jet_1d(129, 1, |x| vec![(x * x * (1.0 - x).powi(2)) * 3.0]);
        for t in traction(&dir, &flat).unwrap() {
            assert_abs_diff_eq!(t.values[0], 0.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn body_load_folds_into_force_slot() {
        let grid = BodyGrid::new(1, 9).unwrap().with_density(|x| 2.0 + x[0]).unwrap();
        let base: Arc<dyn ConstitutiveDensity> =
            Arc::new(FnDensity::new(1, 1, |_, _, a| vec![a[0]], |_, _, _| vec![1.0]));
        let load = LoadingDensity::zero().with_body(|_, _| vec![0.5]);
        let folded = fold_body_load(base.clone(), &load, &grid);
        assert_abs_diff_eq!(folded.r(&[1.0], &[0.0], &[1.0])[0], 1.0 - 3.0 * 0.5, epsilon = 1e-15);
        let same = fold_body_load(base, &LoadingDensity::zero(), &grid);
        assert_eq!(same.r(&[1.0], &[0.0], &[1.0]), vec![1.0]);
    }

    #[test]
    fn representation_identity_converges() {
        let chart = SpaceChart::sphere();
        let defect = |n: usize| {
            let jet = jet_1d(n, 2, |x| vec![1.2 + 0.2 * x, 0.7 * x + 0.1 * (PI * x).sin()]);
            let cd = from_lagrangian(Arc::new(DirichletLagrangian::new(chart.clone(), 1)), jet.grid());
            let s = eval_stress(&cd, &jet).unwrap();
            let w: Vec<f64> = (0..n)
                .flat_map(|p| {
                    let x = jet.grid().point(p)[0];
                    vec![(2.0 * x).cos(), 1.0 + x * x]
                })
                .collect();
            representation_defect(&s, &w)
        };
        let (a, b) = (defect(33), defect(65));
        assert!(a / b > 3.5, "{a} {b}");
    }

    #[test]
    fn catalog_rejects_unknown_names() {
        let chart = SpaceChart::euclidean(1);
        assert!(matches!(
            lagrangian_from_catalog("neo-hookean", &chart, 1),
            Err(Error::UnknownCatalogEntry(_))
        ));
    }

    #[test]
    fn reference_metric_samples_interpolate() {
        let grid = BodyGrid::new(2, 5).unwrap();
        let samples: Vec<f64> = (0..grid.len())
            .flat_map(|p| {
                let x = grid.point(p);
                vec![1.0 + x[0], 0.0, 0.0, 1.0 + x[1]]
            })
            .collect();
        let g = ReferenceMetric::from_samples(&grid, &samples).unwrap();
        let v = g.at(&[0.3, 0.55]);
        assert_abs_diff_eq!(v[(0, 0)], 1.3, epsilon = 1e-14);
        assert_abs_diff_eq!(v[(1, 1)], 1.55, epsilon = 1e-14);
        assert!(ReferenceMetric::from_samples(&grid, &samples[1..]).is_err());
    }
}
