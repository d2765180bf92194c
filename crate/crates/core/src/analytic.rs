//! Semi-closed-form European call price for `rho13 = rho23 = 0`.
//!
//! `price = s P1 - K B(r, tau) P2`, with the zero-coupon bond `B` from the
//! Hull-White model and `P1`, `P2` recovered from characteristic functions
//! by Fourier inversion. Times are calendar times `tau` in `[0, T]`.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{HhwParams, OptionSpec};

/// `(exp(x L) - 1) / x`, continuous at `x = 0`.
fn expm1_ratio(x: f64, len: f64) -> f64 {
    if x == 0.0 {
        len
    } else {
        (x * len).exp_m1() / x
    }
}

/// Exact `int_tau^T b(l) (1 - exp(-a (T - l))) dl` for
/// `b(l) = c1 - c2 exp(-c3 l)`.
pub fn b_integral(tau: f64, maturity: f64, p: &HhwParams) -> f64 {
    let len = maturity - tau;
    if len == 0.0 {
        return 0.0;
    }
    let decay = expm1_ratio(-p.a, len);
    let constant = p.c1 * (len - decay);
    let level = p.c2 * (-p.c3 * tau).exp() * expm1_ratio(-p.c3, len);
    let cross = p.c2 * (-p.c3 * tau - p.a * len).exp() * expm1_ratio(p.a - p.c3, len);
    constant - level + cross
}

/// `T - tau + 2/a e^{-a(T-tau)} - 1/(2a) e^{-2a(T-tau)} - 3/(2a)`.
fn rate_variance_shape(a: f64, len: f64) -> f64 {
    len + 2.0 / a * (-a * len).exp() - 0.5 / a * (-2.0 * a * len).exp() - 1.5 / a
}

/// Exponent `c(r, tau)` of the zero-coupon bond price.
pub fn bond_exponent(r: f64, tau: f64, p: &HhwParams, maturity: f64) -> f64 {
    let len = maturity - tau;
    let rate = -r * expm1_ratio(-p.a, len);
    let var = if p.sigma2 == 0.0 {
        0.0
    } else {
        p.sigma2 * p.sigma2 / (2.0 * p.a * p.a) * rate_variance_shape(p.a, len)
    };
    rate - b_integral(tau, maturity, p) + var
}

/// Zero-coupon bond paying 1 at `maturity`, seen at `tau` with short rate `r`.
pub fn bond_price(r: f64, tau: f64, p: &HhwParams, maturity: f64) -> Result<f64> {
    if tau > maturity || tau < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bond time {tau} outside [0, {maturity}]"
        )));
    }
    Ok(bond_exponent(r, tau, p, maturity).exp())
}

/// Algebraic form of the characteristic function exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharFnForm {
    /// `g = (beta + d) / (beta - d)` with `exp(+d (T - tau))`. Its logarithm
    /// crosses the principal branch cut for long maturities.
    Classic,
    /// The equivalent form in `1 / g` and `exp(-d (T - tau))`, which stays
    /// on the principal branch.
    Rotated,
}

/// Per-branch constants of `f_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharFnContext {
    pub j: u8,
    pub delta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub rho: f64,
}

impl CharFnContext {
    pub fn new(j: u8, p: &HhwParams) -> Result<Self> {
        let (delta, beta, gamma) = match j {
            1 => (0.0, p.kappa - p.rho12 * p.sigma1, 0.5),
            2 => (1.0, p.kappa, -0.5),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "branch index must be 1 or 2, got {j}"
                )))
            }
        };
        Ok(Self {
            j,
            delta,
            beta,
            gamma,
            alpha: p.kappa * p.eta,
            rho: p.rho12,
        })
    }
}

/// Intermediate quantities at one frequency `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEval {
    pub d: Complex64,
    pub g: Complex64,
    pub f: Complex64,
    pub g_coef: Complex64,
    pub h: Complex64,
}

impl ComplexEval {
    pub fn is_finite(&self) -> bool {
        [self.d, self.g, self.f, self.g_coef, self.h]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// `F_j`, `G_j`, `H_j` at `(tau, y)`.
pub fn exponents(
    ctx: &CharFnContext,
    tau: f64,
    y: f64,
    p: &HhwParams,
    maturity: f64,
    form: CharFnForm,
) -> ComplexEval {
    let i = Complex64::i();
    let len = maturity - tau;
    let s2 = p.sigma1 * p.sigma1;
    let iy_d = Complex64::new(-ctx.delta, y);
    let bt = Complex64::new(ctx.beta, -ctx.rho * p.sigma1 * y);
    let d = (bt * bt - s2 * (2.0 * i * ctx.gamma * y - y * y)).sqrt();
    let g = (bt + d) / (bt - d);
    let (g_coef, heston) = match form {
        CharFnForm::Classic => {
            let e = (d * len).exp();
            let gc = (bt + d) / s2 * ((1.0 - e) / (1.0 - g * e));
            let log = ((1.0 - g * e) / (1.0 - g)).ln();
            (gc, ctx.alpha / s2 * ((bt + d) * len - 2.0 * log))
        }
        CharFnForm::Rotated => {
            let e = (-d * len).exp();
            let gi = (bt - d) / (bt + d);
            let gc = (bt - d) / s2 * ((1.0 - e) / (1.0 - gi * e));
            let log = ((1.0 - gi * e) / (1.0 - gi)).ln();
            (gc, ctx.alpha / s2 * ((bt - d) * len - 2.0 * log))
        }
    };
    let decay = expm1_ratio(-p.a, len);
    let h = iy_d * decay;
    let mut f = heston + iy_d * b_integral(tau, maturity, p);
    if p.sigma2 != 0.0 {
        let q = iy_d / p.a;
        f += 0.5 * p.sigma2 * p.sigma2 * q * q * rate_variance_shape(p.a, len);
    }
    ComplexEval { d, g, f, g_coef, h }
}

/// `f_j(x, v, r, tau; y)` for log-price `x`.
#[allow(clippy::too_many_arguments)]
pub fn char_fn(
    j: u8,
    x: f64,
    v: f64,
    r: f64,
    tau: f64,
    y: f64,
    p: &HhwParams,
    maturity: f64,
    form: CharFnForm,
) -> Result<Complex64> {
    if !(y > 0.0) {
        return Err(Error::InvalidParameter(format!("frequency must be positive, got {y}")));
    }
    if !(tau < maturity) {
        return Err(Error::InvalidParameter(format!(
            "need tau < T, got {tau} and {maturity}"
        )));
    }
    let ctx = CharFnContext::new(j, p)?;
    let e = exponents(&ctx, tau, y, p, maturity, form);
    if !e.is_finite() {
        return Err(Error::NonFinite(format!("characteristic function at y = {y}")));
    }
    let mut expo = e.f + e.g_coef * v + e.h * r + Complex64::new(0.0, x * y);
    if j == 2 {
        expo -= bond_exponent(r, tau, p, maturity);
    }
    let z = expo.exp();
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite(format!("characteristic function at y = {y}")));
    }
    Ok(z)
}

// 15-point Kronrod nodes on [-1, 1] (positive half) and weights, with the
// embedded 7-point Gauss weights on the odd nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Gauss-Kronrod 7/15 estimate on `[lo, hi]`; also reports the largest
/// integrand magnitude seen.
fn gk15<F: FnMut(f64) -> Result<f64>>(f: &mut F, lo: f64, hi: f64) -> Result<(Panel, f64)> {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c)?;
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut peak = fc.abs();
    for k in 0..7 {
        let dx = h * XGK[k];
        let (a, b) = (f(c - dx)?, f(c + dx)?);
        kron += WGK[k] * (a + b);
        if k % 2 == 1 {
            gauss += WG[k / 2] * (a + b);
        }
        peak = peak.max(a.abs()).max(b.abs());
    }
    if !(kron.is_finite() && gauss.is_finite()) {
        return Err(Error::NonFinite(format!("integrand on [{lo}, {hi}]")));
    }
    Ok((
        Panel {
            lo,
            hi,
            value: kron * h,
            error: ((kron - gauss) * h).abs(),
        },
        peak,
    ))
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[lo, hi]` to
/// absolute tolerance `tol`. Returns the value and the integrand peak.
pub fn integrate_adaptive<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_panels: usize,
) -> Result<(f64, f64)> {
    let mut heap = BinaryHeap::new();
    let (first, mut peak) = gk15(&mut f, lo, hi)?;
    let mut err = first.error;
    heap.push(first);
    while err > tol {
        if heap.len() >= max_panels {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} above {tol:e} after {max_panels} panels"
            )));
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        let (a, pa) = gk15(&mut f, worst.lo, mid)?;
        let (b, pb) = gk15(&mut f, mid, worst.hi)?;
        peak = peak.max(pa).max(pb);
        err += a.error + b.error - worst.error;
        heap.push(a);
        heap.push(b);
        // refresh to shed accumulated rounding in the running sum
        if heap.len() % 64 == 0 {
            err = heap.iter().map(|p| p.error).sum();
        }
    }
    let total = heap.iter().map(|p| p.value).sum();
    Ok((total, peak))
}

/// Settings for the Fourier inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionSettings {
    pub abs_tol: f64,
    /// First truncation point of the frequency axis.
    pub initial_cut: f64,
    /// Truncation is accepted once the integrand envelope falls below this
    /// fraction of its peak.
    pub tail_ratio: f64,
    pub max_cut: f64,
    pub max_panels: usize,
    pub form: CharFnForm,
}

impl Default for InversionSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            initial_cut: 200.0,
            tail_ratio: 1e-12,
            max_cut: 1e6,
            max_panels: 4000,
            form: CharFnForm::Rotated,
        }
    }
}

/// `P_j = 1/2 + 1/pi int_0^inf Re[exp(-i y ln K) f_j / (i y)] dy`.
#[allow(clippy::too_many_arguments)]
pub fn probability_with(
    j: u8,
    x: f64,
    v: f64,
    r: f64,
    tau: f64,
    strike: f64,
    p: &HhwParams,
    maturity: f64,
    settings: &InversionSettings,
) -> Result<f64> {
    if !(strike > 0.0) {
        return Err(Error::InvalidParameter("strike must be positive".into()));
    }
    let ln_k = strike.ln();
    let integrand = |y: f64| -> Result<f64> {
        let f = char_fn(j, x, v, r, tau, y, p, maturity, settings.form)?;
        let z = Complex64::new(0.0, -y * ln_k).exp() * f / Complex64::new(0.0, y);
        Ok(z.re)
    };
    let envelope = |y: f64| -> Result<f64> {
        Ok(char_fn(j, x, v, r, tau, y, p, maturity, settings.form)?.norm() / y)
    };
    // Each segment gets a share of the tolerance that shrinks geometrically.
    let mut cut = settings.initial_cut;
    let mut seg_tol = 0.5 * settings.abs_tol * PI;
    let (mut total, mut peak) = integrate_adaptive(integrand, 0.0, cut, seg_tol, settings.max_panels)?;
    while envelope(cut)? > settings.tail_ratio * peak {
        if cut >= settings.max_cut {
            return Err(Error::Quadrature(format!(
                "integrand has not decayed at y = {cut}"
            )));
        }
        seg_tol *= 0.5;
        let (part, pk) = integrate_adaptive(integrand, cut, 2.0 * cut, seg_tol, settings.max_panels)?;
        total += part;
        peak = peak.max(pk);
        cut *= 2.0;
    }
    let prob = 0.5 + total / PI;
    if !(-1e-7..=1.0 + 1e-7).contains(&prob) {
        return Err(Error::Quadrature(format!(
            "probability P{j} = {prob} outside [0, 1]"
        )));
    }
    Ok(prob.clamp(0.0, 1.0))
}

#[allow(clippy::too_many_arguments)]
pub fn probability(
    j: u8,
    x: f64,
    v: f64,
    r: f64,
    tau: f64,
    strike: f64,
    p: &HhwParams,
    maturity: f64,
) -> Result<f64> {
    probability_with(j, x, v, r, tau, strike, p, maturity, &InversionSettings::default())
}

fn check_domain(p: &HhwParams, option: &OptionSpec) -> Result<()> {
    if p.rho13 != 0.0 || p.rho23 != 0.0 {
        return Err(Error::Domain(
            "the closed form requires rho13 = rho23 = 0".into(),
        ));
    }
    if option.is_barrier() {
        return Err(Error::Domain("the closed form prices vanilla calls only".into()));
    }
    Ok(())
}

/// European call value at `(s, v, r)` and calendar time `tau`.
pub fn call_price(s: f64, v: f64, r: f64, tau: f64, p: &HhwParams, option: &OptionSpec) -> Result<f64> {
    call_price_with(s, v, r, tau, p, option, &InversionSettings::default())
}

pub fn call_price_with(
    s: f64,
    v: f64,
    r: f64,
    tau: f64,
    p: &HhwParams,
    option: &OptionSpec,
    settings: &InversionSettings,
) -> Result<f64> {
    check_domain(p, option)?;
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("spot must be positive, got {s}")));
    }
    let (k, t) = (option.strike, option.maturity);
    let x = s.ln();
    let p1 = probability_with(1, x, v, r, tau, k, p, t, settings)?;
    let p2 = probability_with(2, x, v, r, tau, k, p, t, settings)?;
    let bond = bond_price(r, tau, p, t)?;
    Ok((s * p1 - k * bond * p2).max(0.0))
}
