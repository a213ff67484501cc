//! Closed-form leading-order estimates, carried in log space.
//!
//! For an interior maximizer with degeneracy index `m` the estimate is
//!
//! ```text
//! A_n = phi(xi0) * exp(n h(xi0)) * (Gamma(1/(2m)) / m) * ((2m)! / (-n h^(2m)(xi0)))^(1/(2m))
//! ```
//!
//! which for `m = 1` is `phi(xi0) exp(n h(xi0)) sqrt(2 pi / (-n h''(xi0)))`.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critical::CriticalPoint;
use crate::expr::{DomainError, Expr};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AsymptoticError {
    #[error("phi vanishes at xi0 = {xi0} (phi(xi0) = {value}); the amplitude must be non-zero")]
    ZeroAmplitude { xi0: f64, value: f64 },
    #[error("log_gamma requires a positive argument, got {0}")]
    NonPositiveArgument(f64),
    #[error("value exp({log_mag}) is outside the f64 range")]
    NotRepresentable { log_mag: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Sign and natural-log magnitude of a real number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogScaledValue {
    pub sign: i8,
    pub log_mag: f64,
}

impl LogScaledValue {
    pub const ZERO: LogScaledValue = LogScaledValue {
        sign: 0,
        log_mag: f64::NEG_INFINITY,
    };

    pub fn new(sign: i8, log_mag: f64) -> LogScaledValue {
        if sign == 0 || log_mag == f64::NEG_INFINITY {
            LogScaledValue::ZERO
        } else {
            LogScaledValue {
                sign: sign.signum(),
                log_mag,
            }
        }
    }

    pub fn from_f64(v: f64) -> LogScaledValue {
        if v == 0.0 {
            LogScaledValue::ZERO
        } else {
            LogScaledValue::new(if v > 0.0 { 1 } else { -1 }, v.abs().ln())
        }
    }

    /// Multiplies by `exp(log_factor)`.
    pub fn scale_log(self, log_factor: f64) -> LogScaledValue {
        LogScaledValue::new(self.sign, self.log_mag + log_factor)
    }

    /// Plain `f64`, refused when the magnitude over- or underflows.
    pub fn to_f64(self) -> Result<f64, AsymptoticError> {
        if self.sign == 0 {
            return Ok(0.0);
        }
        let lo = f64::MIN_POSITIVE.ln();
        let hi = f64::MAX.ln();
        if !(self.log_mag >= lo && self.log_mag <= hi) {
            return Err(AsymptoticError::NotRepresentable {
                log_mag: self.log_mag,
            });
        }
        Ok(f64::from(self.sign) * self.log_mag.exp())
    }

    /// `self / other`; the quotient of two values with the same exponential
    /// factor is computed without ever materializing either.
    pub fn ratio(self, other: LogScaledValue) -> LogScaledValue {
        if self.sign == 0 {
            return LogScaledValue::ZERO;
        }
        LogScaledValue::new(self.sign * other.sign, self.log_mag - other.log_mag)
    }
}

impl std::ops::Mul for LogScaledValue {
    type Output = LogScaledValue;

    fn mul(self, rhs: LogScaledValue) -> LogScaledValue {
        LogScaledValue::new(self.sign * rhs.sign, self.log_mag + rhs.log_mag)
    }
}

impl fmt::Display for LogScaledValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => f.write_str("0"),
            s => write!(f, "{}exp({})", if s < 0 { "-" } else { "" }, self.log_mag),
        }
    }
}

/// Leading-order estimate at a given `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: u64,
    pub value: LogScaledValue,
    pub m: u32,
    pub xi0: f64,
}

// B_{2k} / (2k (2k - 1)) for k = 1..=8.
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_405_617_6;
const SERIES_MIN: f64 = 10.0;

/// Natural log of the gamma function for positive arguments.
///
/// Arguments below 10 are shifted up with `Γ(x) = Γ(x + k) / (x (x+1) ... (x+k-1))`
/// and the asymptotic Stirling series is summed from there.
pub fn log_gamma(x: f64) -> Result<f64, AsymptoticError> {
    if !(x > 0.0) {
        return Err(AsymptoticError::NonPositiveArgument(x));
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let mut z = x;
    let mut prod = 1.0;
    while z < SERIES_MIN {
        prod *= z;
        z += 1.0;
    }
    Ok(stirling_series(z) - prod.ln())
}

fn stirling_series(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let tail = STIRLING_COEFFS
        .iter()
        .rev()
        .fold(0.0, |acc, &c| acc * inv2 + c)
        * inv;
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + tail
}

/// `ln(k!)`.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    if k <= 30 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    log_gamma(k as f64 + 1.0).expect("positive argument")
}

/// `∫_R e^{-z^(2m)} dz = Gamma(1/(2m)) / m`.
pub fn gauss_power_integral(m: u32) -> f64 {
    log_gauss_power_integral(m).exp()
}

fn log_gauss_power_integral(m: u32) -> f64 {
    let m = f64::from(m);
    log_gamma(1.0 / (2.0 * m)).expect("positive argument") - m.ln()
}

/// Log of the `n`-independent limit constant
/// `(Gamma(1/(2m))/m) * ((2m)!/(-d2m))^(1/(2m))`.
pub fn log_limit_constant(m: u32, d2m: f64) -> f64 {
    let two_m = 2.0 * f64::from(m);
    log_gauss_power_integral(m) + (ln_factorial(2 * u64::from(m)) - (-d2m).ln()) / two_m
}

/// Amplitude `phi(xi0)`, rejected when it is zero relative to its neighbors.
///
/// The maximizer is only known to rounding, so an exactly vanishing `phi`
/// typically evaluates to something like 1e-16 there; it is treated as zero
/// when it is below `1e-9` times the larger of `|phi(xi0 ± δ)|`,
/// `δ = 1e-3·max(1, |xi0|)`.
pub fn amplitude(phi: &Expr, xi0: f64) -> Result<f64, AsymptoticError> {
    const REL: f64 = 1e-9;
    let v = phi.eval(xi0)?;
    let delta = 1e-3 * xi0.abs().max(1.0);
    let neighbors = [xi0 - delta, xi0 + delta]
        .iter()
        .filter_map(|&x| phi.eval(x).ok())
        .fold(0.0f64, |m, p| m.max(p.abs()));
    if v == 0.0 || v.abs() <= REL * neighbors {
        return Err(AsymptoticError::ZeroAmplitude { xi0, value: v });
    }
    Ok(v)
}

fn check_cp(cp: &CriticalPoint, n: u64) -> Result<(), AsymptoticError> {
    if n == 0 {
        return Err(AsymptoticError::InvalidArgument("n must be at least 1".into()));
    }
    if cp.m == 0 || !(cp.d2m < 0.0) {
        return Err(AsymptoticError::InvalidArgument(format!(
            "critical point needs m >= 1 and d2m < 0, got m = {}, d2m = {}",
            cp.m, cp.d2m
        )));
    }
    Ok(())
}

/// General-`m` estimate from a known amplitude.
pub fn estimate_from_amplitude(
    amp: f64,
    cp: &CriticalPoint,
    n: u64,
) -> Result<Estimate, AsymptoticError> {
    check_cp(cp, n)?;
    let two_m = 2.0 * f64::from(cp.m);
    let nf = n as f64;
    let log_mag = amp.abs().ln() + nf * cp.h0 + log_limit_constant(cp.m, cp.d2m) - nf.ln() / two_m;
    Ok(Estimate {
        n,
        value: LogScaledValue::new(if amp > 0.0 { 1 } else { -1 }, log_mag),
        m: cp.m,
        xi0: cp.xi0,
    })
}

/// Quadratic-maximum estimate `amp·e^{n h0}·sqrt(2π/(-n h''))`, written
/// directly (no gamma function).
pub fn quadratic_estimate_from_amplitude(
    amp: f64,
    cp: &CriticalPoint,
    n: u64,
) -> Result<Estimate, AsymptoticError> {
    check_cp(cp, n)?;
    if cp.m != 1 {
        return Err(AsymptoticError::InvalidArgument(format!(
            "quadratic estimate needs m = 1, got {}",
            cp.m
        )));
    }
    let nf = n as f64;
    let log_mag = amp.abs().ln() + nf * cp.h0 + 0.5 * (LN_2 + PI.ln() - (-nf * cp.d2m).ln());
    Ok(Estimate {
        n,
        value: LogScaledValue::new(if amp > 0.0 { 1 } else { -1 }, log_mag),
        m: 1,
        xi0: cp.xi0,
    })
}

/// Leading-order asymptotic estimate of `∫ phi e^{n h}` at the critical point.
pub fn laplace_estimate(phi: &Expr, cp: &CriticalPoint, n: u64) -> Result<Estimate, AsymptoticError> {
    let amp = amplitude(phi, cp.xi0)?;
    let est = estimate_from_amplitude(amp, cp, n)?;
    if cp.m == 1 {
        let direct = quadratic_estimate_from_amplitude(amp, cp, n)?;
        let drift = (est.value.log_mag - direct.value.log_mag).abs();
        debug_assert!(
            drift <= 1e-12 * direct.value.log_mag.abs().max(1.0),
            "general and quadratic estimates disagree by {drift}"
        );
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn cp(m: u32, d2m: f64, h0: f64) -> CriticalPoint {
        CriticalPoint { xi0: 0.0, m, d2m, h0 }
    }

    #[test]
    fn log_gamma_known_values() {
        assert!((log_gamma(0.5).unwrap() - PI.sqrt().ln()).abs() < 1e-14);
        assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-14);
        assert!((log_gamma(0.5).unwrap() - 0.5723649).abs() < 1e-7);
        let g5 = log_gamma(5.0).unwrap().exp();
        assert!((g5 - 24.0).abs() / 24.0 < 1e-14);
    }

    #[test]
    fn log_gamma_reference_values() {
        // 30-digit reference values.
        let cases = [
            (0.05, 2.9688792010517308254),
            (0.3, 1.0957979948180755217),
            (1.7, -0.095807697407065864527),
            (7.25, 7.0521854507385394449),
            (33.5, 83.302425502950053443),
            (50.0, 144.56574394634488601),
        ];
        for (x, want) in cases {
            let got = log_gamma(x).unwrap();
            // Error in lnΓ is the relative error in Γ.
            assert!((got - want).abs() < 1e-12, "x = {x}: {got} vs {want}");
        }
    }

    #[test]
    fn log_gamma_rejects_non_positive() {
        assert_eq!(log_gamma(0.0), Err(AsymptoticError::NonPositiveArgument(0.0)));
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn log_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for k in 1..=25u32 {
            fact *= f64::from(k);
            let g = log_gamma(f64::from(k) + 1.0).unwrap().exp();
            assert!((g - fact).abs() / fact < 1e-13, "k = {k}: {}", (g - fact) / fact);
        }
    }

    #[test]
    fn gauss_power_integral_m1_is_sqrt_pi() {
        assert!((gauss_power_integral(1) - PI.sqrt()).abs() < 1e-14);
        assert!((gauss_power_integral(1) - 1.7724539).abs() < 1e-7);
    }

    #[test]
    fn gaussian_estimate_is_sqrt_pi_over_two() {
        let phi = parse("1").unwrap();
        let e = laplace_estimate(&phi, &cp(1, -2.0, 0.0), 4).unwrap();
        let v = e.value.to_f64().unwrap();
        assert!((v - PI.sqrt() / 2.0).abs() < 1e-14);
        assert!((v - 0.8862269).abs() < 1e-7);
    }

    #[test]
    fn stirling_estimate_at_n1() {
        let phi = parse("1").unwrap();
        let e = laplace_estimate(&phi, &cp(1, -1.0, -1.0), 1).unwrap();
        let v = e.value.to_f64().unwrap();
        assert!((v - (-1.0f64).exp() * (2.0 * PI).sqrt()).abs() < 1e-14);
        assert!((v - 0.9221370).abs() < 1e-7);
    }

    #[test]
    fn zero_amplitude_rejected() {
        let phi = parse("x-1").unwrap();
        let c = CriticalPoint { xi0: 1.0 - f64::EPSILON, m: 1, d2m: -1.0, h0: -1.0 };
        assert!(matches!(
            laplace_estimate(&phi, &c, 10),
            Err(AsymptoticError::ZeroAmplitude { .. })
        ));
        // A tiny but genuinely constant amplitude is fine.
        let phi = parse("1e-20").unwrap();
        assert!(laplace_estimate(&phi, &c, 10).is_ok());
    }

    #[test]
    fn negative_amplitude_sign_carried() {
        let phi = parse("-3").unwrap();
        let e = laplace_estimate(&phi, &cp(1, -2.0, 0.0), 4).unwrap();
        assert_eq!(e.value.sign, -1);
    }

    #[test]
    fn large_exponent_stays_in_log_space() {
        let phi = parse("1").unwrap();
        let e = laplace_estimate(&phi, &cp(1, -1.0, 1.0), 10_000).unwrap();
        assert!(e.value.log_mag > 9_990.0);
        assert!(matches!(e.value.to_f64(), Err(AsymptoticError::NotRepresentable { .. })));
    }

    #[test]
    fn scaling_law_in_n() {
        let phi = parse("2").unwrap();
        for &m in &[1u32, 2, 3] {
            let c = cp(m, -5.0, -0.3);
            let n = 37u64;
            let k = 6u64;
            let a = laplace_estimate(&phi, &c, n).unwrap().value.log_mag;
            let b = laplace_estimate(&phi, &c, k * n).unwrap().value.log_mag;
            let expected = n as f64 * (k as f64 - 1.0) * c.h0 - (k as f64).ln() / (2.0 * f64::from(m));
            assert!((b - a - expected).abs() < 1e-12, "m = {m}");
        }
    }

    #[test]
    fn log_scaled_arithmetic() {
        let a = LogScaledValue::from_f64(-4.0);
        let b = LogScaledValue::from_f64(0.5);
        assert_eq!((a * b).to_f64().unwrap(), -2.0);
        assert!((a.ratio(b).to_f64().unwrap() + 8.0).abs() < 1e-14);
        assert_eq!(LogScaledValue::from_f64(0.0), LogScaledValue::ZERO);
        assert_eq!(LogScaledValue::ZERO.to_f64().unwrap(), 0.0);
        assert!(LogScaledValue::new(1, -800.0).to_f64().is_err());
    }
}
