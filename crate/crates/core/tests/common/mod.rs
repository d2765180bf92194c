//! Dense reference systems shared by the integration tests.
#![allow(dead_code)]

use hhw::adi::{Direction, SplitSystem};
use hhw::discretize::SemidiscreteSystem;
use hhw::linalg::SparseOperator;
use hhw::model::SchemeId;
use hhw::Result;
use nalgebra::{DMatrix, DVector};

pub mod oracles;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type MatFn = Box<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
type VecFn = Box<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Split system held as dense matrices; only `A3` and `g3` vary in time.
pub struct DenseSplit {
    pub n: usize,
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub a3: MatFn,
    pub g012: DVector<f64>,
    pub g3: VecFn,
}

impl DenseSplit {
    pub fn a_full(&self, t: f64) -> DMatrix<f64> {
        &self.a0 + &self.a1 + &self.a2 + (self.a3)(t)
    }

    pub fn g_full(&self, t: f64) -> DVector<f64> {
        &self.g012 + (self.g3)(t)
    }

    fn dir(&self, dir: Direction, t: f64) -> DMatrix<f64> {
        match dir {
            Direction::S => self.a1.clone(),
            Direction::V => self.a2.clone(),
            Direction::R => (self.a3)(t),
        }
    }
}

pub fn dense(op: &SparseOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        for (c, w) in op.row(r) {
            m[(r, c)] += w;
        }
    }
    m
}

impl SplitSystem for DenseSplit {
    type Factor = nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

    fn dim(&self) -> usize {
        self.n
    }

    fn apply_mixed(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice((&self.a0 * DVector::from_column_slice(x)).as_slice());
    }

    fn apply_direction(&self, dir: Direction, t: f64, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice((self.dir(dir, t) * DVector::from_column_slice(x)).as_slice());
    }

    fn source(&self, t: f64, out: &mut [f64]) {
        out.copy_from_slice(self.g_full(t).as_slice());
    }

    fn factor(&self, dir: Direction, t: f64, coef: f64) -> Result<Self::Factor> {
        let m = DMatrix::identity(self.n, self.n) - self.dir(dir, t) * coef;
        Ok(m.lu())
    }

    fn solve(&self, factor: &Self::Factor, x: &mut [f64], _scratch: &mut Vec<f64>) -> Result<()> {
        let y = factor.solve(&DVector::from_column_slice(x)).expect("nonsingular");
        x.copy_from_slice(y.as_slice());
        Ok(())
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| { let z: f64 = StandardNormal.sample(&mut *rng); scale * z })
}

/// Banded, diagonally dominant with negative diagonal, like a diffusion
/// operator.
fn direction_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in i.saturating_sub(2)..(i + 3).min(n) {
            if j != i {
                let w: f64 = StandardNormal.sample(&mut *rng);
                m[(i, j)] = 0.5 * w;
                off += (0.5 * w).abs();
            }
        }
        m[(i, i)] = -(off + 1.0);
    }
    m
}

/// Random split system with time-dependent `A3` and `g3`.
pub fn random_dense(n: usize, seed: u64) -> DenseSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0 = normal_matrix(&mut rng, n, 0.3);
    let a1 = direction_matrix(&mut rng, n);
    let a2 = direction_matrix(&mut rng, n);
    let a3_fixed = direction_matrix(&mut rng, n);
    let a3_drift = direction_matrix(&mut rng, n) * 0.5;
    let g012 = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let g3_fixed: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let g3_drift: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    DenseSplit {
        n,
        a0,
        a1,
        a2,
        a3: Box::new(move |t| &a3_fixed + &a3_drift * (1.0 + (3.0 * t).sin())),
        g012,
        g3: Box::new(move |t| &g3_fixed + &g3_drift * (2.0 * t).cos()),
    }
}

/// Dense copy of an assembled system.
pub fn dense_from_hhw(sys: &SemidiscreteSystem) -> DenseSplit {
    let split = sys.split.clone();
    let split3 = sys.split.clone();
    DenseSplit {
        n: sys.dim(),
        a0: dense(&split.a0),
        a1: dense(&split.a1.to_sparse()),
        a2: dense(&split.a2.to_sparse()),
        g012: DVector::from_fn(sys.dim(), |q, _| split.g0[q] + split.g1[q] + split.g2[q]),
        a3: Box::new(move |t| dense(&split.a3(t).to_sparse())),
        g3: Box::new(move |t| DVector::from_vec(split3.g3(t))),
    }
}

fn implicit(sys: &DenseSplit, a: &DMatrix<f64>, theta: f64, dt: f64, rhs: DVector<f64>) -> DVector<f64> {
    let m = DMatrix::identity(sys.n, sys.n) - a * (theta * dt);
    m.lu().solve(&rhs).expect("nonsingular")
}

/// One step of `scheme`, written out stage by stage with dense solves.
pub fn replay(sys: &DenseSplit, scheme: SchemeId, theta: f64, u: &[f64], t0: f64, t1: f64) -> Vec<f64> {
    let dt = t1 - t0;
    let c = theta * dt;
    let u = DVector::from_column_slice(u);
    let (a1, a2) = (&sys.a1, &sys.a2);
    let (a3_0, a3_1) = ((sys.a3)(t0), (sys.a3)(t1));
    let dg3 = (sys.g3)(t1) - (sys.g3)(t0);
    let f = |t: f64, x: &DVector<f64>| sys.a_full(t) * x + sys.g_full(t);

    let y0 = &u + f(t0, &u) * dt;
    let y1 = implicit(sys, a1, theta, dt, &y0 - a1 * &u * c);
    let y2 = implicit(sys, a2, theta, dt, &y1 - a2 * &u * c);
    let y3 = implicit(sys, &a3_1, theta, dt, &y2 - &a3_0 * &u * c + &dg3 * c);
    let second_sweep = |z0: DVector<f64>| {
        let z1 = implicit(sys, a1, theta, dt, &z0 - a1 * &u * c);
        let z2 = implicit(sys, a2, theta, dt, &z1 - a2 * &u * c);
        implicit(sys, &a3_1, theta, dt, &z2 - &a3_0 * &u * c + &dg3 * c)
    };
    let out = match scheme {
        SchemeId::Do => y3,
        SchemeId::Cs => second_sweep(&y0 + &sys.a0 * (&y3 - &u) * (0.5 * dt)),
        SchemeId::Mcs => {
            let yh = &y0 + &sys.a0 * (&y3 - &u) * c;
            second_sweep(&yh + (f(t1, &y3) - f(t0, &u)) * ((0.5 - theta) * dt))
        }
        SchemeId::Hv => {
            let z0 = &y0 + (f(t1, &y3) - f(t0, &u)) * (0.5 * dt);
            let z1 = implicit(sys, a1, theta, dt, &z0 - a1 * &y3 * c);
            let z2 = implicit(sys, a2, theta, dt, &z1 - a2 * &y3 * c);
            implicit(sys, &a3_1, theta, dt, &z2 - &a3_1 * &y3 * c)
        }
    };
    out.as_slice().to_vec()
}
