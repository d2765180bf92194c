//! Independent closed forms and quadratures used as test oracles.

use num_complex::Complex64;
use quadrature::double_exponential;

/// `int_a^b f` by double-exponential quadrature.
pub fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    double_exponential::integrate(f, a, b, tol).integral
}

/// `int_0^inf f` summed over panels `[0, 1], [1, 2], [2, 4], ...` until a
/// panel contributes less than `tol`.
pub fn quad_half_line(f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let mut total = quad(&f, 0.0, 1.0, tol);
    let mut lo = 1.0;
    loop {
        let part = quad(&f, lo, 2.0 * lo, tol);
        total += part;
        lo *= 2.0;
        if part.abs() < tol || lo > 1e8 {
            return total;
        }
    }
}

/// Heston model constants with a constant rate.
#[derive(Debug, Clone, Copy)]
pub struct Heston {
    pub kappa: f64,
    pub eta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub rate: f64,
}

impl Heston {
    /// Characteristic function of `ln(S_T / S_0) - rate T` at complex `u`.
    fn char_fn(&self, u: Complex64, v: f64, t: f64) -> Complex64 {
        let i = Complex64::i();
        let (k, s) = (self.kappa, self.sigma);
        let beta = k - self.rho * s * i * u;
        let d = (beta * beta + s * s * (i * u + u * u)).sqrt();
        let g = (beta - d) / (beta + d);
        let e = (-d * t).exp();
        let c = k * self.eta / (s * s) * ((beta - d) * t - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
        let dd = (beta - d) / (s * s) * (1.0 - e) / (1.0 - g * e);
        (c + dd * v).exp()
    }

    /// Call price from the single-integral inversion along `Im u = -1/2`.
    pub fn call(&self, s: f64, v: f64, strike: f64, t: f64) -> f64 {
        let x = (s / strike).ln() + self.rate * t;
        let integrand = |u: f64| {
            let z = Complex64::new(u, -0.5);
            let phi = self.char_fn(z, v, t);
            (Complex64::new(0.0, u * x).exp() * phi).re / (u * u + 0.25)
        };
        let integral = quad_half_line(integrand, 1e-12);
        s - (s * strike).sqrt() * (-0.5 * self.rate * t).exp() / std::f64::consts::PI * integral
    }
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-Scholes call price.
pub fn black_scholes(s: f64, strike: f64, rate: f64, vol: f64, t: f64) -> f64 {
    let sd = vol * t.sqrt();
    let d1 = ((s / strike).ln() + (rate + 0.5 * vol * vol) * t) / sd;
    s * norm_cdf(d1) - strike * (-rate * t).exp() * norm_cdf(d1 - sd)
}
