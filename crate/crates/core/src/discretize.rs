//! Finite-difference semidiscretization `U'(t) = A(t) U(t) + g(t)` of the
//! Heston-Hull-White PDE, split as `A = A0 + A1 + A2 + A3(t)`.
//!
//! `A0` collects the mixed derivatives; `A1`, `A2`, `A3(t)` the `s`-, `v`- and
//! `r`-direction terms, each also carrying one third of the `-r u` reaction.
//! Only the `r`-drift `a (b(T - t) - r)` depends on time.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid3D, Mesh1D};
use crate::linalg::{band_factor, BandedLu, BandedMatrix, SparseBuilder, SparseOperator};
use crate::model::{HhwParams, OptionKind, OptionSpec};

/// Three-point finite-difference weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilCoeffs {
    pub offsets: [isize; 3],
    pub weights: [f64; 3],
}

fn check_widths(a: f64, b: f64) -> Result<()> {
    if a > 0.0 && b > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "mesh widths must be positive, got {a} and {b}"
        )))
    }
}

/// First derivative from `x_{i-2}, x_{i-1}, x_i`.
pub fn coeff_backward(dx_im1: f64, dx_i: f64) -> Result<StencilCoeffs> {
    check_widths(dx_im1, dx_i)?;
    let (p, q) = (dx_im1, dx_i);
    Ok(StencilCoeffs {
        offsets: [-2, -1, 0],
        weights: [q / (p * (p + q)), (-p - q) / (p * q), (p + 2.0 * q) / (q * (p + q))],
    })
}

/// First derivative from `x_{i-1}, x_i, x_{i+1}`.
pub fn coeff_central(dx_i: f64, dx_ip1: f64) -> Result<StencilCoeffs> {
    check_widths(dx_i, dx_ip1)?;
    let (p, q) = (dx_i, dx_ip1);
    Ok(StencilCoeffs {
        offsets: [-1, 0, 1],
        weights: [-q / (p * (p + q)), (q - p) / (p * q), p / (q * (p + q))],
    })
}

/// First derivative from `x_i, x_{i+1}, x_{i+2}`.
pub fn coeff_forward(dx_ip1: f64, dx_ip2: f64) -> Result<StencilCoeffs> {
    check_widths(dx_ip1, dx_ip2)?;
    let (p, q) = (dx_ip1, dx_ip2);
    Ok(StencilCoeffs {
        offsets: [0, 1, 2],
        weights: [(-2.0 * p - q) / (p * (p + q)), (p + q) / (p * q), -p / (q * (p + q))],
    })
}

/// Second derivative from `x_{i-1}, x_i, x_{i+1}`.
pub fn coeff_second(dx_i: f64, dx_ip1: f64) -> Result<StencilCoeffs> {
    check_widths(dx_i, dx_ip1)?;
    let (p, q) = (dx_i, dx_ip1);
    Ok(StencilCoeffs {
        offsets: [-1, 0, 1],
        weights: [2.0 / (p * (p + q)), -2.0 / (p * q), 2.0 / (q * (p + q))],
    })
}

// Interior stencils on a mesh; widths are positive by construction so the
// unwraps cannot fire.
fn central(mesh: &Mesh1D, i: usize) -> StencilCoeffs {
    coeff_central(mesh.delta(i), mesh.delta(i + 1)).unwrap()
}

fn second(mesh: &Mesh1D, i: usize) -> StencilCoeffs {
    coeff_second(mesh.delta(i), mesh.delta(i + 1)).unwrap()
}

fn backward(mesh: &Mesh1D, i: usize) -> StencilCoeffs {
    coeff_backward(mesh.delta(i - 1), mesh.delta(i)).unwrap()
}

fn forward(mesh: &Mesh1D, i: usize) -> StencilCoeffs {
    coeff_forward(mesh.delta(i + 1), mesh.delta(i + 2)).unwrap()
}

/// Which piece of the split a stencil contribution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Mixed,
    S,
    V,
    R,
    /// `r`-drift weights, to be scaled by `b(T - t)`.
    RDrift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Term {
    /// Weight on the grid value at `(i, j, k)`, which may lie on a
    /// Dirichlet boundary.
    Coef {
        part: Part,
        at: (usize, usize, usize),
        w: f64,
    },
    /// Inhomogeneous boundary contribution.
    Const { part: Part, value: f64 },
}

/// Generates the FD row of every active grid point.
struct RowBuilder<'a> {
    params: &'a HhwParams,
    grid: &'a Grid3D,
}

impl RowBuilder<'_> {
    fn barrier(&self) -> bool {
        self.grid.kind == OptionKind::UpAndOutCall
    }

    /// Known value at an eliminated Dirichlet point.
    fn dirichlet_value(&self, i: usize, j: usize, _k: usize) -> f64 {
        let g = self.grid;
        if i == 0 || (self.barrier() && i == g.m1()) {
            0.0
        } else if !self.barrier() && j == g.m2() {
            g.s.points[i]
        } else {
            unreachable!("({i}, {j}) is not a Dirichlet point")
        }
    }

    fn row(&self, i: usize, j: usize, k: usize, out: &mut Vec<Term>) {
        out.clear();
        self.s_terms(i, j, k, out);
        self.v_terms(i, j, k, out);
        self.r_terms(i, j, k, out);
        self.mixed_terms(i, j, k, out);
    }

    fn s_terms(&self, i: usize, j: usize, k: usize, out: &mut Vec<Term>) {
        let g = self.grid;
        let (s, v, r) = (g.s.points[i], g.v.points[j], g.r.points[k]);
        let mesh = &g.s;
        let diff = 0.5 * s * s * v;
        let conv = r * s;
        let mut push = |di: isize, w: f64| {
            out.push(Term::Coef {
                part: Part::S,
                at: ((i as isize + di) as usize, j, k),
                w,
            })
        };
        push(0, -r / 3.0);
        if !self.barrier() && i == g.m1() {
            // du/ds = 1 at s_max; virtual point s_m1 + ds_m1 extrapolated
            // linearly from s_{m1-1}.
            let h = mesh.delta(i);
            if diff != 0.0 {
                push(-1, diff * 2.0 / (h * h));
                push(0, -diff * 2.0 / (h * h));
            }
            out.push(Term::Const {
                part: Part::S,
                value: conv + diff * 2.0 / h,
            });
            return;
        }
        if diff != 0.0 {
            let st = second(mesh, i);
            for (o, w) in st.offsets.iter().zip(st.weights) {
                push(*o, diff * w);
            }
        }
        if conv != 0.0 {
            let st = if self.barrier() {
                // upwinding; falls back to central where the one-sided
                // stencil would leave the mesh
                if r < 0.0 && i >= 2 {
                    backward(mesh, i)
                } else if r >= 0.0 && i + 2 <= g.m1() {
                    forward(mesh, i)
                } else {
                    central(mesh, i)
                }
            } else {
                central(mesh, i)
            };
            for (o, w) in st.offsets.iter().zip(st.weights) {
                push(*o, conv * w);
            }
        }
    }

    fn v_terms(&self, i: usize, j: usize, k: usize, out: &mut Vec<Term>) {
        let g = self.grid;
        let p = self.params;
        let (v, r) = (g.v.points[j], g.r.points[k]);
        let mesh = &g.v;
        let diff = 0.5 * p.sigma1 * p.sigma1 * v;
        let conv = p.kappa * (p.eta - v);
        let mut push = |dj: isize, w: f64| {
            out.push(Term::Coef {
                part: Part::V,
                at: (i, (j as isize + dj) as usize, k),
                w,
            })
        };
        push(0, -r / 3.0);
        if j == 0 {
            // v = 0: the PDE degenerates to first order in v
            let st = forward(mesh, 0);
            for (o, w) in st.offsets.iter().zip(st.weights) {
                push(*o, conv * w);
            }
            return;
        }
        if self.barrier() && j == g.m2() {
            // du/dv = 0 at v_max, mirrored virtual point
            let h = mesh.delta(j);
            push(-1, diff * 2.0 / (h * h));
            push(0, -diff * 2.0 / (h * h));
            return;
        }
        let st = second(mesh, j);
        for (o, w) in st.offsets.iter().zip(st.weights) {
            push(*o, diff * w);
        }
        let st = if v > p.eta && j >= 2 {
            backward(mesh, j)
        } else {
            central(mesh, j)
        };
        for (o, w) in st.offsets.iter().zip(st.weights) {
            push(*o, conv * w);
        }
    }

    fn r_terms(&self, i: usize, j: usize, k: usize, out: &mut Vec<Term>) {
        let g = self.grid;
        let p = self.params;
        let r = g.r.points[k];
        let mesh = &g.r;
        let diff = 0.5 * p.sigma2 * p.sigma2;
        let mut push = |part: Part, dk: isize, w: f64| {
            out.push(Term::Coef {
                part,
                at: (i, j, (k as isize + dk) as usize),
                w,
            })
        };
        push(Part::R, 0, -r / 3.0);
        let m3 = g.m3();
        if k == 0 || k == m3 {
            // du/dr = 0: the drift drops and the virtual point mirrors the
            // nearest interior value
            let (h, inner) = if k == 0 {
                (mesh.delta(1), 1)
            } else {
                (mesh.delta(m3), -1)
            };
            push(Part::R, inner, diff * 2.0 / (h * h));
            push(Part::R, 0, -diff * 2.0 / (h * h));
            return;
        }
        let st = second(mesh, k);
        for (o, w) in st.offsets.iter().zip(st.weights) {
            push(Part::R, *o, diff * w);
        }
        let st = central(mesh, k);
        for (o, w) in st.offsets.iter().zip(st.weights) {
            push(Part::R, *o, -p.a * r * w);
            push(Part::RDrift, *o, p.a * w);
        }
    }

    fn mixed_terms(&self, i: usize, j: usize, k: usize, out: &mut Vec<Term>) {
        let g = self.grid;
        let p = self.params;
        let (s, v) = (g.s.points[i], g.v.points[j]);
        if j == 0 {
            return;
        }
        let s_boundary = !self.barrier() && i == g.m1();
        let v_boundary = self.barrier() && j == g.m2();
        let r_boundary = k == 0 || k == g.m3();
        let sq = v.sqrt();
        let mut cross = |coef: f64, a: StencilCoeffs, b: StencilCoeffs, place: &dyn Fn(isize, isize) -> (usize, usize, usize)| {
            if coef == 0.0 {
                return;
            }
            for (oa, wa) in a.offsets.iter().zip(a.weights) {
                for (ob, wb) in b.offsets.iter().zip(b.weights) {
                    out.push(Term::Coef {
                        part: Part::Mixed,
                        at: place(*oa, *ob),
                        w: coef * wa * wb,
                    });
                }
            }
        };
        let off = |x: usize, d: isize| (x as isize + d) as usize;
        if !s_boundary && !v_boundary {
            cross(
                p.rho12 * p.sigma1 * s * v,
                central(&g.s, i),
                central(&g.v, j),
                &|a, b| (off(i, a), off(j, b), k),
            );
        }
        if !s_boundary && !r_boundary {
            cross(
                p.rho13 * p.sigma2 * s * sq,
                central(&g.s, i),
                central(&g.r, k),
                &|a, b| (off(i, a), j, off(k, b)),
            );
        }
        if !v_boundary && !r_boundary {
            cross(
                p.rho23 * p.sigma1 * p.sigma2 * sq,
                central(&g.v, j),
                central(&g.r, k),
                &|a, b| (i, off(j, a), off(k, b)),
            );
        }
    }
}

/// One direction's operator, stored as five band weights per grid point.
///
/// Entry `bands[q][o + 2]` couples point `q` with the point `o` steps away
/// along the direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionOperator {
    stride: usize,
    len: usize,
    bands: Vec<[f64; 5]>,
    line_starts: Vec<usize>,
}

impl DirectionOperator {
    fn new(stride: usize, len: usize, n: usize) -> Self {
        let line_starts = (0..n).filter(|q| (q / stride).is_multiple_of(len)).collect();
        Self {
            stride,
            len,
            bands: vec![[0.0; 5]; n],
            line_starts,
        }
    }

    pub fn dim(&self) -> usize {
        self.bands.len()
    }

    /// Number of points per grid line.
    pub fn line_len(&self) -> usize {
        self.len
    }

    pub fn line_count(&self) -> usize {
        self.line_starts.len()
    }

    #[inline]
    fn position(&self, q: usize) -> usize {
        (q / self.stride) % self.len
    }

    /// Widest band actually used: `(lower, upper)`.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut lo = 0;
        let mut hi = 0;
        for b in &self.bands {
            for (o, w) in b.iter().enumerate() {
                if *w != 0.0 {
                    if o < 2 {
                        lo = lo.max(2 - o);
                    } else {
                        hi = hi.max(o - 2);
                    }
                }
            }
        }
        (lo, hi)
    }

    /// `out = (self + beta * other) x`; `other` must share the structure.
    fn apply_scaled_into(&self, other: Option<(&DirectionOperator, f64)>, x: &[f64], out: &mut [f64]) {
        let (stride, len) = (self.stride, self.len);
        out.par_iter_mut().enumerate().for_each(|(q, o)| {
            let p = (q / stride) % len;
            let b = &self.bands[q];
            let extra = other.map(|(op, beta)| (&op.bands[q], beta));
            let mut acc = 0.0;
            for (slot, off) in (-2isize..=2).enumerate() {
                let pos = p as isize + off;
                if pos < 0 || pos >= len as isize {
                    continue;
                }
                let mut w = b[slot];
                if let Some((e, beta)) = extra {
                    w += beta * e[slot];
                }
                if w != 0.0 {
                    acc += w * x[(q as isize + off * stride as isize) as usize];
                }
            }
            *o = acc;
        });
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.apply_scaled_into(None, x, out);
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }

    /// `self + beta * other`.
    fn combined(&self, other: &DirectionOperator, beta: f64) -> Self {
        let bands = self
            .bands
            .iter()
            .zip(&other.bands)
            .map(|(a, b)| std::array::from_fn(|s| a[s] + beta * b[s]))
            .collect();
        Self {
            bands,
            ..self.clone()
        }
    }

    pub fn to_sparse(&self) -> SparseOperator {
        let n = self.dim();
        let mut b = SparseBuilder::new(n);
        for q in 0..n {
            let p = self.position(q) as isize;
            for (slot, off) in (-2isize..=2).enumerate() {
                let pos = p + off;
                if pos >= 0 && pos < self.len as isize {
                    b.push(q, (q as isize + off * self.stride as isize) as usize, self.bands[q][slot]);
                }
            }
        }
        b.finish()
    }

    /// Line-wise LU factors of `I - coef * self`.
    pub fn factor(&self, coef: f64) -> Result<DirectionFactor> {
        let lines = self
            .line_starts
            .par_iter()
            .map(|&start| {
                let mut m = BandedMatrix::zeros(self.len, 2, 2);
                for p in 0..self.len {
                    let b = &self.bands[start + p * self.stride];
                    for (slot, off) in (-2isize..=2).enumerate() {
                        let col = p as isize + off;
                        if col >= 0 && col < self.len as isize {
                            let id = if off == 0 { 1.0 } else { 0.0 };
                            m.set(p, col as usize, id - coef * b[slot]);
                        }
                    }
                }
                band_factor(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DirectionFactor {
            stride: self.stride,
            len: self.len,
            line_starts: self.line_starts.clone(),
            lines,
        })
    }
}

/// Factored `I - c A_j`, one banded LU per grid line.
#[derive(Debug, Clone)]
pub struct DirectionFactor {
    stride: usize,
    len: usize,
    line_starts: Vec<usize>,
    lines: Vec<BandedLu>,
}

impl DirectionFactor {
    /// Solves `(I - c A_j) y = x` in place. Each line owns a disjoint slice
    /// of the gather buffer, so the result does not depend on scheduling.
    pub fn solve_in_place(&self, x: &mut [f64], scratch: &mut Vec<f64>) -> Result<()> {
        let n = self.line_starts.len() * self.len;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        if self.stride == 1 {
            return x
                .par_chunks_mut(self.len)
                .zip(&self.lines)
                .try_for_each(|(chunk, lu)| lu.solve_in_place(chunk));
        }
        scratch.resize(n, 0.0);
        let src: &[f64] = x;
        scratch
            .par_chunks_mut(self.len)
            .zip(&self.line_starts)
            .zip(&self.lines)
            .try_for_each(|((chunk, &start), lu)| {
                for (p, c) in chunk.iter_mut().enumerate() {
                    *c = src[start + p * self.stride];
                }
                lu.solve_in_place(chunk)
            })?;
        for (chunk, &start) in scratch.chunks(self.len).zip(&self.line_starts) {
            for (p, c) in chunk.iter().enumerate() {
                x[start + p * self.stride] = *c;
            }
        }
        Ok(())
    }
}

/// The split semidiscrete operator and boundary vectors.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    pub a0: SparseOperator,
    pub a1: DirectionOperator,
    pub a2: DirectionOperator,
    a3_fixed: DirectionOperator,
    a3_drift: DirectionOperator,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    g3_fixed: Vec<f64>,
    g3_drift: Vec<f64>,
    params: HhwParams,
    maturity: f64,
}

impl SplitOperator {
    pub fn dim(&self) -> usize {
        self.g0.len()
    }

    /// `b(T - t)`, the mean-reversion level at calendar time `T - t`.
    pub fn drift_level(&self, t: f64) -> f64 {
        self.params.mean_reversion(self.maturity - t)
    }

    pub fn a3(&self, t: f64) -> DirectionOperator {
        self.a3_fixed.combined(&self.a3_drift, self.drift_level(t))
    }

    pub fn apply_a3_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let b = self.drift_level(t);
        self.a3_fixed.apply_scaled_into(Some((&self.a3_drift, b)), x, out);
    }

    pub fn g3(&self, t: f64) -> Vec<f64> {
        let b = self.drift_level(t);
        self.g3_fixed
            .iter()
            .zip(&self.g3_drift)
            .map(|(f, d)| f + b * d)
            .collect()
    }

    /// `out = g(t) = g0 + g1 + g2 + g3(t)`.
    pub fn source_into(&self, t: f64, out: &mut [f64]) {
        let b = self.drift_level(t);
        for (q, o) in out.iter_mut().enumerate() {
            *o = self.g0[q] + self.g1[q] + self.g2[q] + (self.g3_fixed[q] + b * self.g3_drift[q]);
        }
    }

    /// `(A0 + A1 + A2 + A3(t)) x`.
    pub fn apply_split(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut acc = self.a0.apply(x).expect("dimension");
        let mut tmp = vec![0.0; n];
        self.a1.apply_into(x, &mut tmp);
        acc.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        self.a2.apply_into(x, &mut tmp);
        acc.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        self.apply_a3_into(t, x, &mut tmp);
        acc.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        acc
    }
}

/// Semidiscrete system with its initial vector.
#[derive(Debug, Clone)]
pub struct SemidiscreteSystem {
    pub split: SplitOperator,
    pub u0: Vec<f64>,
    pub grid: Grid3D,
    pub option: OptionSpec,
    pub params: HhwParams,
}

impl SemidiscreteSystem {
    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    /// Direct assembly of the unsplit `A(t)` and `g(t)`, bypassing the
    /// direction operators.
    pub fn assemble_unsplit(&self, t: f64) -> (SparseOperator, Vec<f64>) {
        let grid = &self.grid;
        let rows = RowBuilder {
            params: &self.params,
            grid,
        };
        let b = self.split.drift_level(t);
        let n = grid.size();
        let mut builder = SparseBuilder::new(n);
        let mut g = vec![0.0; n];
        let mut terms = Vec::new();
        for l in 0..n {
            let (i, j, k) = grid.unmap(l);
            rows.row(i, j, k, &mut terms);
            for term in &terms {
                match *term {
                    Term::Coef { part, at, w } => {
                        let w = if part == Part::RDrift { b * w } else { w };
                        match grid.try_index(at.0, at.1, at.2) {
                            Some(col) => builder.push(l, col, w),
                            None => g[l] += w * rows.dirichlet_value(at.0, at.1, at.2),
                        }
                    }
                    Term::Const { part, value } => {
                        g[l] += if part == Part::RDrift { b * value } else { value };
                    }
                }
            }
        }
        (builder.finish(), g)
    }
}

/// Payoff at the active grid points.
pub fn initial_vector(option: &OptionSpec, grid: &Grid3D) -> Result<Vec<f64>> {
    if grid.kind != option.kind {
        return Err(Error::GridModeMismatch);
    }
    Ok((0..grid.size())
        .map(|l| option.payoff(grid.point(l).0))
        .collect())
}

/// Builds the split semidiscrete system for `option` on `grid`.
pub fn assemble(params: &HhwParams, option: &OptionSpec, grid: &Grid3D) -> Result<SemidiscreteSystem> {
    option.validate()?;
    if grid.kind != option.kind {
        return Err(Error::GridModeMismatch);
    }
    if let Some(b) = option.barrier {
        let top = grid.s.points[grid.m1()];
        if (top - b).abs() > 1e-12 * b {
            return Err(Error::InvalidParameter(format!(
                "barrier grid must end at the barrier {b}, ends at {top}"
            )));
        }
    }
    if grid.m1() < 3 || grid.m2() < 2 || grid.m3() < 2 {
        return Err(Error::InvalidParameter(
            "assembly needs m1 >= 3, m2 >= 2 and m3 >= 2".into(),
        ));
    }
    let (ni, nj, nk) = grid.dims();
    let n = grid.size();
    let rows = RowBuilder { params, grid };
    let mut mixed = SparseBuilder::new(n);
    let mut a1 = DirectionOperator::new(1, ni, n);
    let mut a2 = DirectionOperator::new(ni, nj, n);
    let mut a3_fixed = DirectionOperator::new(ni * nj, nk, n);
    let mut a3_drift = DirectionOperator::new(ni * nj, nk, n);
    let mut g = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut terms = Vec::new();
    for l in 0..n {
        let (i, j, k) = grid.unmap(l);
        rows.row(i, j, k, &mut terms);
        for term in &terms {
            match *term {
                Term::Const { part, value } => g[part as usize][l] += value,
                Term::Coef { part, at, w } => {
                    let Some(col) = grid.try_index(at.0, at.1, at.2) else {
                        g[part as usize][l] += w * rows.dirichlet_value(at.0, at.1, at.2);
                        continue;
                    };
                    let (op, off) = match part {
                        Part::Mixed => {
                            mixed.push(l, col, w);
                            continue;
                        }
                        Part::S => (&mut a1, at.0 as isize - i as isize),
                        Part::V => (&mut a2, at.1 as isize - j as isize),
                        Part::R => (&mut a3_fixed, at.2 as isize - k as isize),
                        Part::RDrift => (&mut a3_drift, at.2 as isize - k as isize),
                    };
                    op.bands[l][(off + 2) as usize] += w;
                }
            }
        }
    }
    let [g0, g1, g2, g3_fixed, g3_drift] = g;
    let split = SplitOperator {
        a0: mixed.finish(),
        a1,
        a2,
        a3_fixed,
        a3_drift,
        g0,
        g1,
        g2,
        g3_fixed,
        g3_drift,
        params: *params,
        maturity: option.maturity,
    };
    Ok(SemidiscreteSystem {
        split,
        u0: initial_vector(option, grid)?,
        grid: grid.clone(),
        option: *option,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::model::{case_params, CaseId};

    fn close(a: &[f64; 3], b: &[f64; 3], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn uniform_weights() {
        let h = 0.5;
        assert!(close(&coeff_backward(h, h).unwrap().weights, &[1.0 / (2.0 * h), -2.0 / h, 3.0 / (2.0 * h)], 1e-15));
        assert!(close(&coeff_central(h, h).unwrap().weights, &[-1.0 / (2.0 * h), 0.0, 1.0 / (2.0 * h)], 1e-15));
        assert!(close(&coeff_forward(h, h).unwrap().weights, &[-3.0 / (2.0 * h), 2.0 / h, -1.0 / (2.0 * h)], 1e-15));
        assert!(close(&coeff_second(h, h).unwrap().weights, &[1.0 / (h * h), -2.0 / (h * h), 1.0 / (h * h)], 1e-15));
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(coeff_backward(0.0, 1.0).is_err());
        assert!(coeff_central(1.0, -1.0).is_err());
        assert!(coeff_forward(f64::NAN, 1.0).is_err());
        assert!(coeff_second(1.0, 0.0).is_err());
    }

    #[test]
    fn first_derivative_of_linear() {
        let (p, q) = (0.3, 0.7);
        let xs = |st: &StencilCoeffs, d: [f64; 3]| -> f64 {
            st.weights.iter().zip(d).map(|(w, x)| w * x).sum()
        };
        // positions relative to x_i = 0
        assert!((xs(&coeff_backward(p, q).unwrap(), [-p - q, -q, 0.0]) - 1.0).abs() < 1e-14);
        assert!((xs(&coeff_central(p, q).unwrap(), [-p, 0.0, q]) - 1.0).abs() < 1e-14);
        assert!((xs(&coeff_forward(p, q).unwrap(), [0.0, p, p + q]) - 1.0).abs() < 1e-14);
    }

    fn small(kind: OptionKind, m: usize, case: CaseId) -> SemidiscreteSystem {
        let (p, o) = case_params(case);
        let spec = GridSpec::default_spec(o.strike, o.maturity, p.c1, m, false);
        let (spec, option) = match kind {
            OptionKind::Call => (spec, o),
            OptionKind::UpAndOutCall => (spec.with_barrier(120.0), o.with_barrier(120.0).unwrap()),
        };
        let grid = Grid3D::build(&spec, kind).unwrap();
        assemble(&p, &option, &grid).unwrap()
    }

    #[test]
    fn mode_mismatch() {
        let (p, o) = case_params(CaseId::A);
        let spec = GridSpec::default_spec(100.0, 1.0, p.c1, 5, false);
        let grid = Grid3D::build(&spec, OptionKind::Call).unwrap();
        let barrier = o.with_barrier(120.0).unwrap();
        assert_eq!(assemble(&p, &barrier, &grid).unwrap_err(), Error::GridModeMismatch);
        assert_eq!(initial_vector(&barrier, &grid).unwrap_err(), Error::GridModeMismatch);
    }

    #[test]
    fn a0_vanishes_without_correlation() {
        let (p, o) = case_params(CaseId::B);
        let p = HhwParams { rho12: 0.0, rho13: 0.0, rho23: 0.0, ..p };
        let spec = GridSpec::default_spec(100.0, o.maturity, p.c1, 6, false);
        let grid = Grid3D::build(&spec, OptionKind::Call).unwrap();
        let sys = assemble(&p, &o, &grid).unwrap();
        assert_eq!(sys.split.a0.nnz(), 0);
        assert!(sys.split.g0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bandwidths() {
        let sys = small(OptionKind::Call, 8, CaseId::A);
        assert_eq!(sys.split.a1.bandwidths(), (1, 1));
        assert_eq!(sys.split.a2.bandwidths(), (2, 2));
        assert_eq!(sys.split.a3(0.3).bandwidths(), (1, 1));
        let sys = small(OptionKind::UpAndOutCall, 8, CaseId::A);
        let (lo, hi) = sys.split.a1.bandwidths();
        assert!(lo <= 2 && hi <= 2 && (lo == 2 || hi == 2));
    }

    #[test]
    fn time_independent_parts_do_not_depend_on_t() {
        let sys = small(OptionKind::Call, 6, CaseId::E);
        let x: Vec<f64> = (0..sys.dim()).map(|l| (l as f64).sin()).collect();
        let d = |t: f64| sys.split.a3(t).apply(&x);
        let b = |t: f64| sys.split.drift_level(t);
        // A3(t1) - A3(t2) is proportional to b(t1) - b(t2)
        let (t1, t2, t3) = (0.0, 7.0, 15.0);
        let (d1, d2, d3) = (d(t1), d(t2), d(t3));
        let scale = (b(t1) - b(t3)) / (b(t1) - b(t2));
        let norm = d1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for l in 0..x.len() {
            let lhs = d1[l] - d3[l];
            let rhs = (d1[l] - d2[l]) * scale;
            assert!((lhs - rhs).abs() <= 1e-12 * norm * scale.abs().max(1.0), "{lhs} {rhs}");
        }
        assert_eq!(sys.split.g3(t1), sys.split.g3(t3));
    }

    #[test]
    fn barrier_sources_vanish() {
        let sys = small(OptionKind::UpAndOutCall, 6, CaseId::A);
        let mut g = vec![1.0; sys.dim()];
        sys.split.source_into(0.5, &mut g);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dirichlet_top_only_in_g() {
        // v = v_max never appears as a column, only through g2 and g0
        let sys = small(OptionKind::Call, 6, CaseId::A);
        let grid = &sys.grid;
        let j = grid.m2() - 1;
        let mut hit = false;
        for k in grid.k_range() {
            for i in grid.i_range() {
                let l = grid.index(i, j, k);
                if sys.split.g2[l] != 0.0 {
                    hit = true;
                }
            }
        }
        assert!(hit);
        assert_eq!(sys.split.a2.dim(), grid.size());
    }

    #[test]
    fn initial_vector_payoff() {
        let sys = small(OptionKind::Call, 6, CaseId::A);
        for (l, u) in sys.u0.iter().enumerate() {
            let s = sys.grid.point(l).0;
            assert_eq!(*u, (s - 100.0).max(0.0));
        }
    }

    #[test]
    fn factor_solve_round_trip() {
        let sys = small(OptionKind::Call, 6, CaseId::D);
        let x: Vec<f64> = (0..sys.dim()).map(|l| (l as f64 * 0.1).cos()).collect();
        for op in [&sys.split.a1, &sys.split.a2, &sys.split.a3(0.5)] {
            let f = op.factor(0.3).unwrap();
            let mut y = x.clone();
            let mut scratch = Vec::new();
            f.solve_in_place(&mut y, &mut scratch).unwrap();
            let ay = op.apply(&y);
            for l in 0..x.len() {
                let back = y[l] - 0.3 * ay[l];
                assert!((back - x[l]).abs() < 1e-10, "{back} vs {}", x[l]);
            }
        }
    }
}
