//! Model constants, option contracts and the benchmark parameter sets.
//!
//! The asset follows Heston dynamics with a Hull-White short rate whose
//! mean-reversion level is `b(tau) = c1 - c2 * exp(-c3 * tau)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Heston-Hull-White model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HhwParams {
    /// Mean-reversion speed of the variance.
    pub kappa: f64,
    /// Long-run variance.
    pub eta: f64,
    /// Volatility of the variance.
    pub sigma1: f64,
    /// Mean-reversion speed of the short rate.
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Short-rate volatility.
    pub sigma2: f64,
    pub rho12: f64,
    pub rho13: f64,
    pub rho23: f64,
}

impl HhwParams {
    /// Validates the strict model invariants.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("eta", self.eta),
            ("sigma1", self.sigma1),
            ("a", self.a),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("sigma2", self.sigma2),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.c1 <= self.c2 {
            return Err(Error::InvalidParameter(format!(
                "c1 ({}) must exceed c2 ({})",
                self.c1, self.c2
            )));
        }
        self.validate_correlations()
    }

    /// Checks that each correlation lies in [-1, 1] and that the correlation
    /// matrix is positive semidefinite.
    pub fn validate_correlations(&self) -> Result<()> {
        for (name, rho) in [
            ("rho12", self.rho12),
            ("rho13", self.rho13),
            ("rho23", self.rho23),
        ] {
            if !(-1.0..=1.0).contains(&rho) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [-1, 1], got {rho}"
                )));
            }
        }
        let min_eig = self.correlation_eigenvalues()[0];
        if min_eig < -1e-12 {
            return Err(Error::InvalidParameter(format!(
                "correlation matrix is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    pub fn correlation_matrix(&self) -> [[f64; 3]; 3] {
        [
            [1.0, self.rho12, self.rho13],
            [self.rho12, 1.0, self.rho23],
            [self.rho13, self.rho23, 1.0],
        ]
    }

    /// Eigenvalues of the correlation matrix in ascending order.
    ///
    /// Closed-form roots of the characteristic cubic of a symmetric 3x3
    /// matrix (trigonometric form).
    pub fn correlation_eigenvalues(&self) -> [f64; 3] {
        let (p, q, r) = (self.rho12, self.rho13, self.rho23);
        let off = p * p + q * q + r * r;
        if off == 0.0 {
            return [1.0; 3];
        }
        // A = I + E with E the zero-diagonal part; eig(A) = 1 + eig(E).
        // eig(E) solve x^3 - off*x - 2pqr = 0.
        let half_det = p * q * r;
        let scale = (off / 3.0).sqrt();
        let arg = (half_det / (scale * scale * scale)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let two_pi_3 = 2.0 * std::f64::consts::PI / 3.0;
        let mut eig = [
            1.0 + 2.0 * scale * phi.cos(),
            1.0 + 2.0 * scale * (phi + two_pi_3).cos(),
            1.0 + 2.0 * scale * (phi - two_pi_3).cos(),
        ];
        eig.sort_by(f64::total_cmp);
        eig
    }

    /// The same constants with `rho13 = rho23 = 0`, the regime in which the
    /// semi-closed-form call price applies.
    pub fn without_cross_correlations(&self) -> Self {
        Self {
            rho13: 0.0,
            rho23: 0.0,
            ..*self
        }
    }

    /// Degenerate limit with a constant short rate `r0` (`sigma2 = 0`,
    /// `b = r0`). This deliberately leaves the strict invariants; it exists
    /// to cross-check the hybrid formulas against plain Heston.
    pub fn constant_rate_limit(&self, r0: f64) -> Self {
        Self {
            sigma2: 0.0,
            c1: r0,
            c2: 0.0,
            rho13: 0.0,
            rho23: 0.0,
            ..*self
        }
    }

    /// Mean-reversion level `b(tau) = c1 - c2 exp(-c3 tau)`.
    pub fn mean_reversion(&self, tau: f64) -> f64 {
        self.c1 - self.c2 * (-self.c3 * tau).exp()
    }

    /// Largest absolute correlation; bounds the relative size of the mixed
    /// derivative coefficients of the diffusion matrix.
    pub fn gamma_measure(&self) -> f64 {
        self.rho12.abs().max(self.rho13.abs()).max(self.rho23.abs())
    }

    pub fn feller_satisfied(&self) -> bool {
        2.0 * self.kappa * self.eta > self.sigma1 * self.sigma1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptionKind {
    Call,
    UpAndOutCall,
}

/// Payoff contract. `barrier` is set iff the option is an up-and-out call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub strike: f64,
    pub maturity: f64,
    pub barrier: Option<f64>,
}

impl OptionSpec {
    pub fn call(strike: f64, maturity: f64) -> Result<Self> {
        let spec = Self {
            kind: OptionKind::Call,
            strike,
            maturity,
            barrier: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn up_and_out_call(strike: f64, maturity: f64, barrier: f64) -> Result<Self> {
        let spec = Self {
            kind: OptionKind::UpAndOutCall,
            strike,
            maturity,
            barrier: Some(barrier),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "strike must be positive, got {}",
                self.strike
            )));
        }
        if !(self.maturity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "maturity must be positive, got {}",
                self.maturity
            )));
        }
        match (self.kind, self.barrier) {
            (OptionKind::Call, None) => Ok(()),
            (OptionKind::Call, Some(_)) => Err(Error::InvalidParameter(
                "a vanilla call takes no barrier".into(),
            )),
            (OptionKind::UpAndOutCall, None) => Err(Error::InvalidParameter(
                "an up-and-out call requires a barrier".into(),
            )),
            (OptionKind::UpAndOutCall, Some(b)) if b > self.strike => Ok(()),
            (OptionKind::UpAndOutCall, Some(b)) => Err(Error::InvalidParameter(format!(
                "barrier {b} must exceed the strike {}",
                self.strike
            ))),
        }
    }

    /// The same maturity and strike as an up-and-out call with barrier `b`.
    pub fn with_barrier(&self, b: f64) -> Result<Self> {
        Self::up_and_out_call(self.strike, self.maturity, b)
    }

    pub fn payoff(&self, s: f64) -> f64 {
        (s - self.strike).max(0.0)
    }

    pub fn is_barrier(&self) -> bool {
        self.kind == OptionKind::UpAndOutCall
    }
}

/// The six benchmark parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseId {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl CaseId {
    pub const ALL: [CaseId; 6] = [CaseId::A, CaseId::B, CaseId::C, CaseId::D, CaseId::E, CaseId::F];

    /// Spot rate at which the up-and-out surfaces are usually displayed.
    pub fn display_rate(self) -> f64 {
        match self {
            CaseId::A => 0.025,
            CaseId::B => 0.022,
            CaseId::C => 0.025,
            CaseId::D => 0.027,
            CaseId::E => 0.022,
            CaseId::F => 0.017,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            CaseId::A => "A",
            CaseId::B => "B",
            CaseId::C => "C",
            CaseId::D => "D",
            CaseId::E => "E",
            CaseId::F => "F",
        };
        f.write_str(c)
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(CaseId::A),
            "B" => Ok(CaseId::B),
            "C" => Ok(CaseId::C),
            "D" => Ok(CaseId::D),
            "E" => Ok(CaseId::E),
            "F" => Ok(CaseId::F),
            other => Err(Error::InvalidParameter(format!("unknown case '{other}'"))),
        }
    }
}

/// ADI splitting schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    /// Douglas.
    Do,
    /// Craig-Sneyd.
    Cs,
    /// Modified Craig-Sneyd.
    Mcs,
    /// Hundsdorfer-Verwer.
    Hv,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [SchemeId::Do, SchemeId::Cs, SchemeId::Mcs, SchemeId::Hv];
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeId::Do => "do",
            SchemeId::Cs => "cs",
            SchemeId::Mcs => "mcs",
            SchemeId::Hv => "hv",
        })
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "do" | "douglas" => Ok(SchemeId::Do),
            "cs" => Ok(SchemeId::Cs),
            "mcs" => Ok(SchemeId::Mcs),
            "hv" => Ok(SchemeId::Hv),
            other => Err(Error::InvalidParameter(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Table of model constants and the vanilla call (K = 100) for a case.
/// Cross correlations are the nonzero variants; see
/// [`HhwParams::without_cross_correlations`].
pub fn case_params(id: CaseId) -> (HhwParams, OptionSpec) {
    #[rustfmt::skip]
    let (kappa, eta, sigma1, a, c1, c2, c3, sigma2, rho12, rho13, rho23, maturity) = match id {
        CaseId::A => (3.0,    0.12,   0.04,   0.2,  0.05,  0.01,  1.0, 0.03,  0.6,    0.2,  0.4, 1.0),
        CaseId::B => (0.6067, 0.0707, 0.2928, 0.05, 0.055, 0.005, 4.0, 0.06, -0.7571, 0.6, -0.2, 3.0),
        CaseId::C => (2.5,    0.06,   0.5,    0.15, 0.101, 0.001, 2.3, 0.1,  -0.1,   -0.3,  0.2, 0.25),
        CaseId::D => (0.5,    0.04,   1.0,    0.08, 0.103, 0.003, 1.0, 0.09, -0.9,    0.6, -0.7, 10.0),
        CaseId::E => (0.3,    0.04,   0.9,    0.16, 0.055, 0.025, 1.6, 0.03, -0.5,    0.2,  0.1, 15.0),
        CaseId::F => (1.0,    0.09,   1.0,    0.22, 0.074, 0.014, 2.1, 0.07, -0.3,   -0.5, -0.2, 5.0),
    };
    let params = HhwParams {
        kappa,
        eta,
        sigma1,
        a,
        c1,
        c2,
        c3,
        sigma2,
        rho12,
        rho13,
        rho23,
    };
    let option = OptionSpec {
        kind: OptionKind::Call,
        strike: 100.0,
        maturity,
        barrier: None,
    };
    (params, option)
}

/// Default implicitness parameter for a scheme given the correlation
/// measure `gamma`.
pub fn theta_default(scheme: SchemeId, gamma: f64) -> f64 {
    match scheme {
        SchemeId::Do => 2.0 / 3.0,
        SchemeId::Cs => 0.5,
        SchemeId::Mcs => (1.0f64 / 3.0).max(2.0 / 13.0 * (2.0 * gamma + 1.0)),
        SchemeId::Hv => 0.5 + 3.0f64.sqrt() / 6.0,
    }
}
