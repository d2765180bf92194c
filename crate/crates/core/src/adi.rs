//! ADI time stepping: Douglas, Craig-Sneyd, modified Craig-Sneyd and
//! Hundsdorfer-Verwer splittings of `U' = (A0 + A1 + A2 + A3(t)) U + g(t)`.
//!
//! `A0` is always explicit. Systems with `I - theta dt A1` and
//! `I - theta dt A2` are factored once per `(theta, dt)`; `A3` is time
//! dependent and refactored every step.

use crate::discretize::{DirectionFactor, SemidiscreteSystem};
use crate::error::{Error, Result};
use crate::model::SchemeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    S,
    V,
    R,
}

/// A split linear ODE system the ADI schemes can integrate.
pub trait SplitSystem {
    type Factor: Send + Sync;

    fn dim(&self) -> usize;

    /// `out = A0 x`.
    fn apply_mixed(&self, x: &[f64], out: &mut [f64]);

    /// `out = A_dir(t) x`; only the `R` direction may depend on `t`.
    fn apply_direction(&self, dir: Direction, t: f64, x: &[f64], out: &mut [f64]);

    /// `out = g(t)`. Only the part belonging to the `R` direction may vary
    /// in time, so the schemes add `g(t_n) - g(t_{n-1})` in the `R` stage.
    fn source(&self, t: f64, out: &mut [f64]);

    /// Factors `I - coef * A_dir(t)`.
    fn factor(&self, dir: Direction, t: f64, coef: f64) -> Result<Self::Factor>;

    /// Overwrites `x` with the solution of the factored system.
    fn solve(&self, factor: &Self::Factor, x: &mut [f64], scratch: &mut Vec<f64>) -> Result<()>;
}

impl SplitSystem for SemidiscreteSystem {
    type Factor = DirectionFactor;

    fn dim(&self) -> usize {
        self.u0.len()
    }

    fn apply_mixed(&self, x: &[f64], out: &mut [f64]) {
        self.split.a0.apply_into(x, out).expect("dimension");
    }

    fn apply_direction(&self, dir: Direction, t: f64, x: &[f64], out: &mut [f64]) {
        match dir {
            Direction::S => self.split.a1.apply_into(x, out),
            Direction::V => self.split.a2.apply_into(x, out),
            Direction::R => self.split.apply_a3_into(t, x, out),
        }
    }

    fn source(&self, t: f64, out: &mut [f64]) {
        self.split.source_into(t, out);
    }

    fn factor(&self, dir: Direction, t: f64, coef: f64) -> Result<DirectionFactor> {
        match dir {
            Direction::S => self.split.a1.factor(coef),
            Direction::V => self.split.a2.factor(coef),
            Direction::R => self.split.a3(t).factor(coef),
        }
    }

    fn solve(&self, factor: &DirectionFactor, x: &mut [f64], scratch: &mut Vec<f64>) -> Result<()> {
        factor.solve_in_place(x, scratch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub scheme: SchemeId,
    pub theta: f64,
    pub dt: f64,
    pub steps: usize,
    /// Replace the first step by two Douglas substeps (`theta = 1`) of
    /// size `dt / 2`.
    pub damping: bool,
}

impl StepperConfig {
    /// `steps` equal steps over `[0, maturity]`.
    pub fn new(scheme: SchemeId, theta: f64, maturity: f64, steps: usize, damping: bool) -> Self {
        Self {
            scheme,
            theta,
            dt: maturity / steps as f64,
            steps,
            damping,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidParameter("need at least one step".into()));
        }
        if !(self.theta > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidParameter(
                "theta and dt must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Number of full-direction factorizations performed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FactorCounts {
    pub s: usize,
    pub v: usize,
    pub r: usize,
}

impl std::ops::AddAssign for FactorCounts {
    fn add_assign(&mut self, o: Self) {
        self.s += o.s;
        self.v += o.v;
        self.r += o.r;
    }
}

/// Factors and work vectors for stepping with a fixed `(theta, dt)`.
pub struct StepperState<F> {
    pub theta: f64,
    pub dt: f64,
    lu1: F,
    lu2: F,
    pub counts: FactorCounts,
    // A0 U, A1 U, A2 U, A3(t_{n-1}) U
    au: [Vec<f64>; 4],
    y0: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    tmp: Vec<f64>,
    dg: Vec<f64>,
    scratch: Vec<f64>,
}

impl<F> StepperState<F> {
    pub fn new<S: SplitSystem<Factor = F>>(sys: &S, theta: f64, dt: f64) -> Result<Self> {
        let n = sys.dim();
        let c = theta * dt;
        let lu1 = sys.factor(Direction::S, 0.0, c)?;
        let lu2 = sys.factor(Direction::V, 0.0, c)?;
        Ok(Self {
            theta,
            dt,
            lu1,
            lu2,
            counts: FactorCounts { s: 1, v: 1, r: 0 },
            au: std::array::from_fn(|_| vec![0.0; n]),
            y0: vec![0.0; n],
            y: vec![0.0; n],
            z: vec![0.0; n],
            tmp: vec![0.0; n],
            dg: vec![0.0; n],
            scratch: Vec::new(),
        })
    }

    fn check<S: SplitSystem<Factor = F>>(&self, sys: &S, u: &[f64], t_prev: f64, t_next: f64) -> Result<()> {
        if u.len() != sys.dim() || self.y.len() != sys.dim() {
            return Err(Error::DimensionMismatch {
                expected: sys.dim(),
                got: u.len(),
            });
        }
        let h = t_next - t_prev;
        if (h - self.dt).abs() > 1e-12 * self.dt.max(t_next.abs()) {
            return Err(Error::InvalidParameter(format!(
                "step {h} does not match the factored dt {}",
                self.dt
            )));
        }
        Ok(())
    }

    /// First (Douglas) stage, leaving `Y0` in `y0`, `Y3` in `y` and the
    /// factor of `I - theta dt A3(t_n)` returned.
    fn douglas_stage<S: SplitSystem<Factor = F>>(
        &mut self,
        sys: &S,
        u: &[f64],
        t_prev: f64,
        t_next: f64,
    ) -> Result<F> {
        let (dt, c) = (self.dt, self.theta * self.dt);
        sys.apply_mixed(u, &mut self.au[0]);
        sys.apply_direction(Direction::S, t_prev, u, &mut self.au[1]);
        sys.apply_direction(Direction::V, t_prev, u, &mut self.au[2]);
        sys.apply_direction(Direction::R, t_prev, u, &mut self.au[3]);
        sys.source(t_prev, &mut self.tmp);
        sys.source(t_next, &mut self.dg);
        for q in 0..u.len() {
            self.dg[q] -= self.tmp[q];
            let au = self.au[0][q] + self.au[1][q] + self.au[2][q] + self.au[3][q];
            self.y0[q] = u[q] + dt * (au + self.tmp[q]);
        }
        let lu3 = sys.factor(Direction::R, t_next, c)?;
        self.counts.r += 1;
        self.y.copy_from_slice(&self.y0);
        self.corrector_sweep(sys, &lu3, false)?;
        Ok(lu3)
    }

    /// Three implicit corrections applied to `y` (or `z` when `second`),
    /// each relaxing towards `U_{n-1}`.
    fn corrector_sweep<S: SplitSystem<Factor = F>>(&mut self, sys: &S, lu3: &F, second: bool) -> Result<()> {
        let c = self.theta * self.dt;
        let target = if second { &mut self.z } else { &mut self.y };
        for (q, t) in target.iter_mut().enumerate() {
            *t -= c * self.au[1][q];
        }
        sys.solve(&self.lu1, target, &mut self.scratch)?;
        for (q, t) in target.iter_mut().enumerate() {
            *t -= c * self.au[2][q];
        }
        sys.solve(&self.lu2, target, &mut self.scratch)?;
        for (q, t) in target.iter_mut().enumerate() {
            *t += c * (self.dg[q] - self.au[3][q]);
        }
        sys.solve(lu3, target, &mut self.scratch)
    }

    /// `out = A(t_n) Y3 - A(t_{n-1}) U + dg`, with `A0 (Y3 - U)` left in
    /// `tmp` for the caller.
    fn full_increment<S: SplitSystem<Factor = F>>(&mut self, sys: &S, u: &[f64], t_next: f64, out: &mut [f64]) {
        let n = u.len();
        for q in 0..n {
            self.z[q] = self.y[q] - u[q];
        }
        sys.apply_mixed(&self.z, &mut self.tmp);
        let mut part = vec![0.0; n];
        for q in 0..n {
            out[q] = self.tmp[q] + self.dg[q];
        }
        for (dir, slot) in [(Direction::S, 1), (Direction::V, 2)] {
            sys.apply_direction(dir, t_next, &self.y, &mut part);
            for q in 0..n {
                out[q] += part[q] - self.au[slot][q];
            }
        }
        sys.apply_direction(Direction::R, t_next, &self.y, &mut part);
        for q in 0..n {
            out[q] += part[q] - self.au[3][q];
        }
    }
}

pub fn step_do<S: SplitSystem>(
    state: &mut StepperState<S::Factor>,
    sys: &S,
    u: &mut [f64],
    t_prev: f64,
    t_next: f64,
) -> Result<()> {
    state.check(sys, u, t_prev, t_next)?;
    state.douglas_stage(sys, u, t_prev, t_next)?;
    u.copy_from_slice(&state.y);
    Ok(())
}

pub fn step_cs<S: SplitSystem>(
    state: &mut StepperState<S::Factor>,
    sys: &S,
    u: &mut [f64],
    t_prev: f64,
    t_next: f64,
) -> Result<()> {
    state.check(sys, u, t_prev, t_next)?;
    let lu3 = state.douglas_stage(sys, u, t_prev, t_next)?;
    let half = 0.5 * state.dt;
    for q in 0..u.len() {
        state.z[q] = state.y[q] - u[q];
    }
    sys.apply_mixed(&state.z, &mut state.tmp);
    for q in 0..u.len() {
        state.z[q] = state.y0[q] + half * state.tmp[q];
    }
    state.corrector_sweep(sys, &lu3, true)?;
    u.copy_from_slice(&state.z);
    Ok(())
}

pub fn step_mcs<S: SplitSystem>(
    state: &mut StepperState<S::Factor>,
    sys: &S,
    u: &mut [f64],
    t_prev: f64,
    t_next: f64,
) -> Result<()> {
    state.check(sys, u, t_prev, t_next)?;
    let lu3 = state.douglas_stage(sys, u, t_prev, t_next)?;
    let (dt, theta) = (state.dt, state.theta);
    let mut inc = vec![0.0; u.len()];
    state.full_increment(sys, u, t_next, &mut inc);
    for q in 0..u.len() {
        state.z[q] = state.y0[q] + theta * dt * state.tmp[q] + (0.5 - theta) * dt * inc[q];
    }
    state.corrector_sweep(sys, &lu3, true)?;
    u.copy_from_slice(&state.z);
    Ok(())
}

pub fn step_hv<S: SplitSystem>(
    state: &mut StepperState<S::Factor>,
    sys: &S,
    u: &mut [f64],
    t_prev: f64,
    t_next: f64,
) -> Result<()> {
    state.check(sys, u, t_prev, t_next)?;
    let lu3 = state.douglas_stage(sys, u, t_prev, t_next)?;
    let n = u.len();
    let c = state.theta * state.dt;
    let mut inc = vec![0.0; n];
    state.full_increment(sys, u, t_next, &mut inc);
    for q in 0..n {
        state.z[q] = state.y0[q] + 0.5 * state.dt * inc[q];
    }
    // the second sweep relaxes towards Y3
    let mut ay = vec![0.0; n];
    sys.apply_direction(Direction::S, t_next, &state.y, &mut ay);
    for q in 0..n {
        state.z[q] -= c * ay[q];
    }
    sys.solve(&state.lu1, &mut state.z, &mut state.scratch)?;
    sys.apply_direction(Direction::V, t_next, &state.y, &mut ay);
    for q in 0..n {
        state.z[q] -= c * ay[q];
    }
    sys.solve(&state.lu2, &mut state.z, &mut state.scratch)?;
    sys.apply_direction(Direction::R, t_next, &state.y, &mut ay);
    for q in 0..n {
        state.z[q] -= c * ay[q];
    }
    sys.solve(&lu3, &mut state.z, &mut state.scratch)?;
    u.copy_from_slice(&state.z);
    Ok(())
}

pub fn step<S: SplitSystem>(
    scheme: SchemeId,
    state: &mut StepperState<S::Factor>,
    sys: &S,
    u: &mut [f64],
    t_prev: f64,
    t_next: f64,
) -> Result<()> {
    match scheme {
        SchemeId::Do => step_do(state, sys, u, t_prev, t_next),
        SchemeId::Cs => step_cs(state, sys, u, t_prev, t_next),
        SchemeId::Mcs => step_mcs(state, sys, u, t_prev, t_next),
        SchemeId::Hv => step_hv(state, sys, u, t_prev, t_next),
    }
}

/// Result of [`integrate`].
#[derive(Debug, Clone)]
pub struct Integration {
    pub u: Vec<f64>,
    pub counts: FactorCounts,
}

/// Integrates from `u0` at `t = 0` to `t = steps * dt`.
pub fn integrate<S: SplitSystem>(sys: &S, u0: &[f64], config: &StepperConfig) -> Result<Integration> {
    config.validate()?;
    if u0.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: u0.len(),
        });
    }
    let dt = config.dt;
    let mut u = u0.to_vec();
    let mut counts = FactorCounts::default();
    let mut first = 1;
    if config.damping {
        let half = 0.5 * dt;
        let mut damp = StepperState::new(sys, 1.0, half)?;
        step_do(&mut damp, sys, &mut u, 0.0, half)?;
        step_do(&mut damp, sys, &mut u, half, dt)?;
        counts += damp.counts;
        first = 2;
    }
    if first <= config.steps {
        let mut state = StepperState::new(sys, config.theta, dt)?;
        for n in first..=config.steps {
            let t_prev = (n - 1) as f64 * dt;
            let t_next = n as f64 * dt;
            step(config.scheme, &mut state, sys, &mut u, t_prev, t_next)?;
        }
        counts += state.counts;
    }
    Ok(Integration { u, counts })
}
