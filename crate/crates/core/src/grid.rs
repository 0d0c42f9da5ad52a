//! The body `B = [0,1]^d` as a uniform grid with a mass density, plus the
//! second-order difference stencils and trapezoid quadrature used on it.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarBodyFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Side of the unit box along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
}

/// A face of the unit box: `x^axis = 0` (lower) or `x^axis = 1` (upper).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub fn new(axis: usize, side: Side) -> Self {
        Self { axis, side }
    }

    /// Component of the outward unit co-normal along `axis`.
    pub fn sign(&self) -> f64 {
        match self.side {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        }
    }

    /// Outward co-normal `n_α` as a vector of length `d`.
    pub fn conormal(&self, d: usize) -> Vec<f64> {
        let mut n = vec![0.0; d];
        n[self.axis] = self.sign();
        n
    }

    /// Label such as `x1-` or `x2+`.
    pub fn label(&self) -> String {
        let s = match self.side {
            Side::Lower => '-',
            Side::Upper => '+',
        };
        format!("x{}{}", self.axis + 1, s)
    }

    pub fn parse(label: &str) -> Option<Self> {
        let label = label.trim();
        let rest = label.strip_prefix('x')?;
        let (num, side) = rest.split_at(rest.len().checked_sub(1)?);
        let axis = num.parse::<usize>().ok()?.checked_sub(1)?;
        let side = match side {
            "-" => Side::Lower,
            "+" => Side::Upper,
            _ => return None,
        };
        Some(Self { axis, side })
    }
}

/// Uniform grid with `n` points per axis on `[0,1]^d`, spacing `h = 1/(n−1)`,
/// and a positive mass density `ρ` (mass form `ρ dx¹∧…∧dx^d`).
#[derive(Clone)]
pub struct BodyGrid {
    dim: usize,
    n: usize,
    h: f64,
    density: ScalarBodyFn,
    rho: Vec<f64>,
}

impl fmt::Debug for BodyGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BodyGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("h", &self.h)
            .finish()
    }
}

impl PartialEq for BodyGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.rho == other.rho
    }
}

impl BodyGrid {
    /// Grid with unit density.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "unsupported body dimension {dim} (d must be 1 or 2)"
            )));
        }
        if n < 5 {
            return Err(Error::InvalidGrid(format!("need at least 5 points per axis, got {n}")));
        }
        let count = n.pow(dim as u32);
        Ok(Self {
            dim,
            n,
            h: 1.0 / (n - 1) as f64,
            density: Arc::new(|_| 1.0),
            rho: vec![1.0; count],
        })
    }

    /// Replaces the density with a closed-form function of `x`.
    pub fn with_density<F>(mut self, density: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let rho: Vec<f64> = (0..self.len()).map(|p| density(&self.point(p))).collect();
        if let Some(p) = rho.iter().position(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "density must be positive, got {} at grid point {p}",
                rho[p]
            )));
        }
        self.density = Arc::new(density);
        self.rho = rho;
        Ok(self)
    }

    /// Replaces the density with grid samples, interpolated multilinearly
    /// between grid points.
    pub fn with_density_samples(self, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} density samples for {} grid points",
                samples.len(),
                self.len()
            )));
        }
        let interp = GridInterpolant::new(self.dim, self.n, samples);
        self.with_density(move |x| interp.eval(x))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn density(&self) -> &[f64] {
        &self.rho
    }

    pub fn density_at(&self, x: &[f64]) -> f64 {
        (self.density)(x)
    }

    pub fn density_fn(&self) -> ScalarBodyFn {
        self.density.clone()
    }

    /// Multi-index of grid point `p` (axis 0 varies fastest).
    pub fn multi_index(&self, p: usize) -> [usize; 2] {
        if self.dim == 1 {
            [p, 0]
        } else {
            [p % self.n, p / self.n]
        }
    }

    pub fn index(&self, multi: [usize; 2]) -> usize {
        if self.dim == 1 {
            multi[0]
        } else {
            multi[0] + self.n * multi[1]
        }
    }

    /// Index stride along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.n
        }
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        let mi = self.multi_index(p);
        (0..self.dim).map(|a| mi[a] as f64 * self.h).collect()
    }

    pub fn is_boundary(&self, p: usize) -> bool {
        let mi = self.multi_index(p);
        (0..self.dim).any(|a| mi[a] == 0 || mi[a] == self.n - 1)
    }

    /// Faces of the box containing grid point `p`.
    pub fn faces_of(&self, p: usize) -> Vec<Face> {
        let mi = self.multi_index(p);
        let mut out = Vec::new();
        for a in 0..self.dim {
            if mi[a] == 0 {
                out.push(Face::new(a, Side::Lower));
            }
            if mi[a] == self.n - 1 {
                out.push(Face::new(a, Side::Upper));
            }
        }
        out
    }

    pub fn all_faces(&self) -> Vec<Face> {
        (0..self.dim)
            .flat_map(|a| [Face::new(a, Side::Lower), Face::new(a, Side::Upper)])
            .collect()
    }

    /// Grid points on `face`, ordered along the remaining axis.
    pub fn face_points(&self, face: Face) -> Vec<usize> {
        let fixed = match face.side {
            Side::Lower => 0,
            Side::Upper => self.n - 1,
        };
        if self.dim == 1 {
            return vec![fixed];
        }
        (0..self.n)
            .map(|k| {
                let mut mi = [0, 0];
                mi[face.axis] = fixed;
                mi[1 - face.axis] = k;
                self.index(mi)
            })
            .collect()
    }

    pub fn interior_points(&self) -> Vec<usize> {
        (0..self.len()).filter(|p| !self.is_boundary(*p)).collect()
    }

    pub fn boundary_points(&self) -> Vec<usize> {
        (0..self.len()).filter(|p| self.is_boundary(*p)).collect()
    }

    /// Trapezoid weight of grid point `p` on `[0,1]^d`.
    pub fn quadrature_weight(&self, p: usize) -> f64 {
        let mi = self.multi_index(p);
        (0..self.dim)
            .map(|a| {
                if mi[a] == 0 || mi[a] == self.n - 1 {
                    0.5 * self.h
                } else {
                    self.h
                }
            })
            .product()
    }

    /// Trapezoid weights along a face (a single unit weight when `d = 1`).
    pub fn face_weights(&self, _face: Face) -> Vec<f64> {
        if self.dim == 1 {
            return vec![1.0];
        }
        (0..self.n)
            .map(|k| {
                if k == 0 || k == self.n - 1 {
                    0.5 * self.h
                } else {
                    self.h
                }
            })
            .collect()
    }

    /// Same grid at a different resolution, keeping the density function.
    pub fn refined(&self, n: usize) -> Result<Self> {
        let density = self.density.clone();
        Self::new(self.dim, n)?.with_density(move |x| density(x))
    }
}

/// Multilinear interpolant of grid samples.
#[derive(Debug, Clone)]
pub struct GridInterpolant {
    dim: usize,
    n: usize,
    samples: Vec<f64>,
}

impl GridInterpolant {
    pub fn new(dim: usize, n: usize, samples: Vec<f64>) -> Self {
        Self { dim, n, samples }
    }

    /// Cell index and local coordinate; the end cells extend linearly past the box.
    fn locate(&self, x: f64) -> (usize, f64) {
        let h = 1.0 / (self.n - 1) as f64;
        let s = x / h;
        let k = (s.floor().max(0.0) as usize).min(self.n - 2);
        (k, s - k as f64)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.dim == 1 {
            let (k, f) = self.locate(x[0]);
            lerp(self.samples[k], self.samples[k + 1], f)
        } else {
            let (k0, f0) = self.locate(x[0]);
            let (k1, f1) = self.locate(x[1]);
            let at = |a: usize, b: usize| self.samples[a + self.n * b];
            let lo = lerp(at(k0, k1), at(k0 + 1, k1), f0);
            let hi = lerp(at(k0, k1 + 1), at(k0 + 1, k1 + 1), f0);
            lerp(lo, hi, f1)
        }
    }
}

/// Second-order first derivative along `axis` of component `c` of an
/// interleaved grid array with `ncomp` components per point. Central in the
/// interior, one-sided at the box faces.
pub(crate) fn d1(grid: &BodyGrid, data: &[f64], ncomp: usize, c: usize, p: usize, axis: usize) -> f64 {
    let n = grid.n;
    let h = grid.h;
    let s = grid.stride(axis);
    let i = grid.multi_index(p)[axis];
    let at = |q: usize| data[q * ncomp + c];
    if i == 0 {
        (3.0 * (at(p + s) - at(p)) - (at(p + 2 * s) - at(p + s))) / (2.0 * h)
    } else if i == n - 1 {
        (3.0 * (at(p) - at(p - s)) - (at(p - s) - at(p - 2 * s))) / (2.0 * h)
    } else {
        (at(p + s) - at(p - s)) / (2.0 * h)
    }
}

/// Second-order second derivative along `axis`; one-sided four-point
/// stencil at the faces.
pub(crate) fn d2(grid: &BodyGrid, data: &[f64], ncomp: usize, c: usize, p: usize, axis: usize) -> f64 {
    let n = grid.n;
    let h2 = grid.h * grid.h;
    let s = grid.stride(axis);
    let i = grid.multi_index(p)[axis];
    let at = |q: usize| data[q * ncomp + c];
    if i == 0 {
        (2.0 * (at(p) - at(p + s)) - 3.0 * (at(p + s) - at(p + 2 * s)) + (at(p + 2 * s) - at(p + 3 * s))) / h2
    } else if i == n - 1 {
        (2.0 * (at(p) - at(p - s)) - 3.0 * (at(p - s) - at(p - 2 * s)) + (at(p - 2 * s) - at(p - 3 * s))) / h2
    } else {
        ((at(p + s) - at(p)) - (at(p) - at(p - s))) / h2
    }
}

/// Mixed second derivative `∂_a ∂_b` (`a ≠ b`) as the composition of two
/// first-derivative stencils.
pub(crate) fn d_mixed(grid: &BodyGrid, data: &[f64], ncomp: usize, c: usize, p: usize, a: usize, b: usize) -> f64 {
    if a == b {
        return d2(grid, data, ncomp, c, p, a);
    }
    let n = grid.n;
    let h = grid.h;
    let s = grid.stride(a);
    let i = grid.multi_index(p)[a];
    let inner = |q: usize| d1(grid, data, ncomp, c, q, b);
    if i == 0 {
        (3.0 * (inner(p + s) - inner(p)) - (inner(p + 2 * s) - inner(p + s))) / (2.0 * h)
    } else if i == n - 1 {
        (3.0 * (inner(p) - inner(p - s)) - (inner(p - s) - inner(p - 2 * s))) / (2.0 * h)
    } else {
        (inner(p + s) - inner(p - s)) / (2.0 * h)
    }
}

// Exact on constant data, so a uniform field has no spurious x-dependence.
fn lerp(a: f64, b: f64, f: f64) -> f64 {
    a + f * (b - a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_bad_shapes() {
        assert!(BodyGrid::new(3, 9).is_err());
        assert!(BodyGrid::new(1, 4).is_err());
        assert!(BodyGrid::new(1, 9).unwrap().with_density(|x| x[0] - 0.5).is_err());
    }

    #[test]
    fn quadrature_integrates_bilinear_exactly() {
        let g = BodyGrid::new(2, 9).unwrap();
        let s: f64 = (0..g.len())
            .map(|p| {
                let x = g.point(p);
                g.quadrature_weight(p) * (1.0 + x[0] * x[1])
            })
            .sum();
        assert_abs_diff_eq!(s, 1.25, epsilon = 1e-14);
    }

    #[test]
    fn stencils_exact_on_quadratics() {
        let g = BodyGrid::new(2, 7).unwrap();
        let data: Vec<f64> = (0..g.len())
            .map(|p| {
                let x = g.point(p);
                x[0] * x[0] + 3.0 * x[0] * x[1] - x[1] * x[1]
            })
            .collect();
        for p in 0..g.len() {
            let x = g.point(p);
            assert_abs_diff_eq!(d1(&g, &data, 1, 0, p, 0), 2.0 * x[0] + 3.0 * x[1], epsilon = 1e-11);
            assert_abs_diff_eq!(d1(&g, &data, 1, 0, p, 1), 3.0 * x[0] - 2.0 * x[1], epsilon = 1e-11);
            assert_abs_diff_eq!(d2(&g, &data, 1, 0, p, 0), 2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(d2(&g, &data, 1, 0, p, 1), -2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(d_mixed(&g, &data, 1, 0, p, 0, 1), 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn face_labels_round_trip() {
        for f in BodyGrid::new(2, 5).unwrap().all_faces() {
            assert_eq!(Face::parse(&f.label()), Some(f));
        }
        assert_eq!(Face::parse("y1+"), None);
    }

    #[test]
    fn interpolant_reproduces_samples() {
        let g = BodyGrid::new(2, 5).unwrap();
        let samples: Vec<f64> = (0..g.len()).map(|p| 1.0 + p as f64).collect();
        let interp = GridInterpolant::new(2, 5, samples.clone());
        for p in 0..g.len() {
            assert_abs_diff_eq!(interp.eval(&g.point(p)), samples[p], epsilon = 1e-12);
        }
    }
}
