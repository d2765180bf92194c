//! Spatial meshes in `s`, `v` and `r` and the flattened grid-index map.
//!
//! The `s`-mesh is uniform on `[s_left, s_right]` around the strike and
//! sinh-stretched outside; the `v`- and `r`-meshes concentrate points near
//! `v = 0` and `r = c` respectively.

use crate::error::{Error, Result};
use crate::model::OptionKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub m1: usize,
    pub m2: usize,
    pub m3: usize,
    pub s_max: f64,
    pub v_max: f64,
    pub r_max: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub s_left: f64,
    pub s_right: f64,
    /// Concentration point of the `r`-mesh.
    pub c: f64,
    /// Equidistant meshes instead of the stretched ones.
    pub uniform: bool,
}

impl GridSpec {
    /// Default truncation and stretching for strike `k`, maturity `t` and
    /// `m1 = 2m`, `m2 = m3 = m`.
    pub fn default_spec(k: f64, t: f64, c1: f64, m: usize, uniform: bool) -> Self {
        let v_max = 10.0;
        let r_max = 1.0;
        Self {
            m1: 2 * m,
            m2: m,
            m3: m,
            s_max: 14.0 * k,
            v_max,
            r_max,
            d1: k / 20.0,
            d2: v_max / 500.0,
            d3: r_max / 400.0,
            // The 1/4 is a fixed shape constant, not the short rate.
            s_left: 0.5f64.max((-0.25 * t).exp()) * k,
            s_right: k,
            c: c1,
            uniform,
        }
    }

    /// Truncates the `s`-domain at the barrier.
    pub fn with_barrier(self, barrier: f64) -> Self {
        Self {
            s_max: barrier,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 < 1 || self.m2 < 1 || self.m3 < 1 {
            return Err(Error::InvalidParameter(
                "mesh interval counts must be at least 1".into(),
            ));
        }
        if !(0.0 <= self.s_left && self.s_left < self.s_right && self.s_right <= self.s_max) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= s_left < s_right <= s_max, got {} {} {}",
                self.s_left, self.s_right, self.s_max
            )));
        }
        if !(self.d1 > 0.0 && self.d2 > 0.0 && self.d3 > 0.0) {
            return Err(Error::InvalidParameter(
                "stretching parameters must be positive".into(),
            ));
        }
        if !(self.v_max > 0.0 && self.r_max > 0.0) {
            return Err(Error::InvalidParameter(
                "v_max and r_max must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Computational step of the `s`-transformation.
    pub fn s_step(&self) -> f64 {
        let (xi_min, _, xi_max) = self.s_xi_range();
        (xi_max - xi_min) / self.m1 as f64
    }

    fn s_xi_range(&self) -> (f64, f64, f64) {
        let xi_min = (-self.s_left / self.d1).asinh();
        let xi_int = (self.s_right - self.s_left) / self.d1;
        let xi_max = xi_int + ((self.s_max - self.s_right) / self.d1).asinh();
        (xi_min, xi_int, xi_max)
    }
}

/// Strictly increasing 1-D mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    pub points: Vec<f64>,
    /// `widths[i - 1] = points[i] - points[i - 1]`.
    pub widths: Vec<f64>,
    /// Spacing of the underlying equidistant parameter.
    pub step: f64,
}

impl Mesh1D {
    fn from_points(points: Vec<f64>, step: f64) -> Self {
        let widths = points.windows(2).map(|w| w[1] - w[0]).collect();
        Self {
            points,
            widths,
            step,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `x_i - x_{i-1}`, for `1 <= i < len`.
    #[inline]
    pub fn delta(&self, i: usize) -> f64 {
        self.widths[i - 1]
    }

    /// Equidistant mesh on `[lo, hi]` with `m` intervals.
    pub fn uniform(lo: f64, hi: f64, m: usize) -> Self {
        let h = (hi - lo) / m as f64;
        let mut points: Vec<f64> = (0..=m).map(|i| lo + i as f64 * h).collect();
        points[m] = hi;
        Self::from_points(points, h)
    }

    /// Index of the mesh point nearest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if (p - x).abs() < (self.points[best] - x).abs() {
                best = i;
            }
        }
        best
    }
}

/// Three-branch stretching map for `s`.
pub fn s_transform(spec: &GridSpec, xi: f64) -> f64 {
    let (_, xi_int, _) = spec.s_xi_range();
    if xi < 0.0 {
        spec.s_left + spec.d1 * xi.sinh()
    } else if xi <= xi_int {
        spec.s_left + spec.d1 * xi
    } else {
        spec.s_right + spec.d1 * (xi - xi_int).sinh()
    }
}

pub fn build_s_mesh(spec: &GridSpec) -> Mesh1D {
    let (xi_min, _, _) = spec.s_xi_range();
    let dxi = spec.s_step();
    let m1 = spec.m1;
    let mut points: Vec<f64> = (0..=m1)
        .map(|i| s_transform(spec, xi_min + i as f64 * dxi))
        .collect();
    points[0] = 0.0;
    points[m1] = spec.s_max;
    Mesh1D::from_points(points, dxi)
}

pub fn build_v_mesh(spec: &GridSpec) -> Mesh1D {
    let m2 = spec.m2;
    let d_eta = (spec.v_max / spec.d2).asinh() / m2 as f64;
    let mut points: Vec<f64> = (0..=m2)
        .map(|j| spec.d2 * (j as f64 * d_eta).sinh())
        .collect();
    points[0] = 0.0;
    points[m2] = spec.v_max;
    Mesh1D::from_points(points, d_eta)
}

pub fn build_r_mesh(spec: &GridSpec) -> Mesh1D {
    let m3 = spec.m3;
    let zeta_lo = ((-spec.r_max - spec.c) / spec.d3).asinh();
    let zeta_hi = ((spec.r_max - spec.c) / spec.d3).asinh();
    let d_zeta = (zeta_hi - zeta_lo) / m3 as f64;
    let mut points: Vec<f64> = (0..=m3)
        .map(|k| spec.c + spec.d3 * (zeta_lo + k as f64 * d_zeta).sinh())
        .collect();
    points[0] = -spec.r_max;
    points[m3] = spec.r_max;
    Mesh1D::from_points(points, d_zeta)
}

/// Empirical mesh smoothness constants: `(C0, C1, C2)` with
/// `C0 dxi <= dx_i <= C1 dxi` and `|dx_{i+1} - dx_i| <= C2 dxi^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessReport {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn smoothness_report(mesh: &Mesh1D, dxi: f64) -> Result<SmoothnessReport> {
    if mesh.len() < 3 {
        return Err(Error::InvalidParameter(
            "smoothness needs at least three points".into(),
        ));
    }
    let w = &mesh.widths;
    let c0 = w.iter().copied().fold(f64::INFINITY, f64::min) / dxi;
    let c1 = w.iter().copied().fold(0.0, f64::max) / dxi;
    let c2 = w
        .windows(2)
        .map(|p| (p[1] - p[0]).abs())
        .fold(0.0, f64::max)
        / (dxi * dxi);
    Ok(SmoothnessReport { c0, c1, c2 })
}

/// Tensor-product grid with the set of active (unknown) points.
///
/// The active set excludes Dirichlet boundaries: `s = 0` always, `v = v_max`
/// for the vanilla call and `s = B` for the up-and-out call. Points are
/// numbered with `i` (the `s` index) fastest, then `j`, then `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3D {
    pub s: Mesh1D,
    pub v: Mesh1D,
    pub r: Mesh1D,
    pub kind: OptionKind,
    i_lo: usize,
    ni: usize,
    nj: usize,
    nk: usize,
}

impl Grid3D {
    pub fn new(s: Mesh1D, v: Mesh1D, r: Mesh1D, kind: OptionKind) -> Self {
        let (m1, m2, m3) = (s.len() - 1, v.len() - 1, r.len() - 1);
        let (ni, nj) = match kind {
            OptionKind::Call => (m1, m2),
            OptionKind::UpAndOutCall => (m1 - 1, m2 + 1),
        };
        Self {
            s,
            v,
            r,
            kind,
            i_lo: 1,
            ni,
            nj,
            nk: m3 + 1,
        }
    }

    /// Builds the nonuniform (or uniform, per `spec.uniform`) grid.
    pub fn build(spec: &GridSpec, kind: OptionKind) -> Result<Self> {
        spec.validate()?;
        if kind == OptionKind::UpAndOutCall && spec.m1 < 2 {
            return Err(Error::InvalidParameter(
                "the barrier grid needs m1 >= 2".into(),
            ));
        }
        if spec.uniform {
            return Ok(build_uniform_meshes(spec, kind));
        }
        Ok(Self::new(
            build_s_mesh(spec),
            build_v_mesh(spec),
            build_r_mesh(spec),
            kind,
        ))
    }

    pub fn m1(&self) -> usize {
        self.s.len() - 1
    }

    pub fn m2(&self) -> usize {
        self.v.len() - 1
    }

    pub fn m3(&self) -> usize {
        self.r.len() - 1
    }

    /// Active counts per direction.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.ni, self.nj, self.nk)
    }

    pub fn size(&self) -> usize {
        self.ni * self.nj * self.nk
    }

    pub fn i_range(&self) -> std::ops::RangeInclusive<usize> {
        self.i_lo..=self.i_lo + self.ni - 1
    }

    pub fn j_range(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.nj - 1
    }

    pub fn k_range(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.nk - 1
    }

    pub fn is_active(&self, i: usize, j: usize, k: usize) -> bool {
        self.i_range().contains(&i) && j < self.nj && k < self.nk
    }

    /// Linear index of an active point.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(self.is_active(i, j, k));
        (i - self.i_lo) + self.ni * (j + self.nj * k)
    }

    /// Linear index if `(i, j, k)` is active.
    pub fn try_index(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        self.is_active(i, j, k).then(|| self.index(i, j, k))
    }

    /// Inverse of [`Grid3D::index`].
    #[inline]
    pub fn unmap(&self, l: usize) -> (usize, usize, usize) {
        let i = l % self.ni;
        let rest = l / self.ni;
        (i + self.i_lo, rest % self.nj, rest / self.nj)
    }

    pub fn point(&self, l: usize) -> (f64, f64, f64) {
        let (i, j, k) = self.unmap(l);
        (self.s.points[i], self.v.points[j], self.r.points[k])
    }
}

pub fn build_uniform_meshes(spec: &GridSpec, kind: OptionKind) -> Grid3D {
    Grid3D::new(
        Mesh1D::uniform(0.0, spec.s_max, spec.m1),
        Mesh1D::uniform(0.0, spec.v_max, spec.m2),
        Mesh1D::uniform(-spec.r_max, spec.r_max, spec.m3),
        kind,
    )
}
