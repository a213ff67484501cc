//! Locating the interior maximizer of `h` and classifying how flat it is.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{DomainError, Expr};

/// Interior maximizer with its degeneracy index.
///
/// `m` is half the order of the first non-vanishing derivative, `d2m` that
/// derivative (always negative) and `h0 = h(xi0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub xi0: f64,
    pub m: u32,
    pub d2m: f64,
    pub h0: f64,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CriticalError {
    #[error("maximum of h lies on the boundary near x = {x}; the maximizer must be interior")]
    BoundaryMaximum { x: f64 },
    #[error("no sign change of h' found near x = {near}")]
    NoCriticalPoint { near: f64 },
    #[error("h has competing maxima near x = {first} and x = {second}")]
    AmbiguousMaximum { first: f64, second: f64 },
    #[error("first non-vanishing derivative at xi0 has odd order {order}; not a local maximum")]
    OddLeadingDerivative { order: usize },
    #[error("leading derivative of order {order} is positive ({value}); xi0 is a local minimum")]
    PositiveLeadingDerivative { order: usize, value: f64 },
    #[error("all derivatives up to order {max_order} vanish at xi0")]
    AllDerivativesVanish { max_order: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Monotone map from `s in [0, 1]` onto `[a, b]`, compactifying infinite ends.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Compactify {
    Finite { a: f64, b: f64 },
    Upper { a: f64 },
    Lower { b: f64 },
    Both,
}

impl Compactify {
    pub(crate) fn new(a: f64, b: f64) -> Compactify {
        match (a.is_finite(), b.is_finite()) {
            (true, true) => Compactify::Finite { a, b },
            (true, false) => Compactify::Upper { a },
            (false, true) => Compactify::Lower { b },
            (false, false) => Compactify::Both,
        }
    }

    pub(crate) fn to_x(self, s: f64) -> f64 {
        match self {
            Compactify::Finite { a, b } => a + (b - a) * s,
            Compactify::Upper { a } => a + s / (1.0 - s),
            Compactify::Lower { b } => b - (1.0 - s) / s,
            Compactify::Both => {
                let t = 2.0 * s - 1.0;
                t / (1.0 - t.abs())
            }
        }
    }

    /// Sample points; endpoints included only where they are finite.
    pub(crate) fn samples(self, count: usize) -> Vec<f64> {
        let last = (count - 1) as f64;
        (0..count)
            .map(|i| self.to_x(i as f64 / last))
            .filter(|x| x.is_finite())
            .collect()
    }
}

fn validate_interval(a: f64, b: f64) -> Result<(), CriticalError> {
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(CriticalError::InvalidArgument(format!(
            "interval [{a}, {b}] is empty"
        )));
    }
    Ok(())
}

/// Finds the interior maximizer of `h` on `(a, b)`.
///
/// Samples `grid` points (through a compactifying map for infinite ends),
/// then refines the best local sample maxima by Newton's method on `h'` inside
/// a sign-change bracket, falling back to bisection whenever a step would
/// leave the bracket.
pub fn locate_maximum(h: &Expr, a: f64, b: f64, grid: usize, tol: f64) -> Result<f64, CriticalError> {
    validate_interval(a, b)?;
    if grid < 16 {
        return Err(CriticalError::InvalidArgument(format!("grid {grid} < 16")));
    }
    if !(tol > 0.0) {
        return Err(CriticalError::InvalidArgument(format!("tol {tol} must be positive")));
    }
    let map = Compactify::new(a, b);
    let xs = map.samples(grid);
    let hs: Vec<Option<f64>> = xs
        .iter()
        .map(|&x| h.eval(x).ok().filter(|v| !v.is_nan()))
        .collect();

    let (best, _) = hs
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((i, v)),
        })
        .ok_or(CriticalError::NoCriticalPoint { near: 0.5 * (xs[0] + xs[xs.len() - 1]) })?;

    // First and last samples are either finite endpoints or the outermost
    // points of a compactified infinite end; a maximum there is not interior.
    if best == 0 || best == xs.len() - 1 {
        return Err(CriticalError::BoundaryMaximum { x: xs[best] });
    }

    // Distinct local sample maxima, highest first.
    let mut peaks: Vec<usize> = (1..xs.len() - 1)
        .filter(|&i| match (hs[i - 1], hs[i], hs[i + 1]) {
            (l, Some(c), r) => l.is_none_or(|l| c >= l) && r.is_none_or(|r| c > r),
            _ => false,
        })
        .collect();
    if !peaks.contains(&best) {
        peaks.push(best);
    }
    peaks.sort_by(|&i, &j| hs[j].partial_cmp(&hs[i]).unwrap());
    peaks.truncate(8);

    let mut refined: Vec<(f64, f64, f64, f64)> = Vec::new();
    for &i in &peaks {
        match refine(h, &xs, &hs, i, tol) {
            Ok(r) => refined.push(r),
            Err(e) if i == best => return Err(e),
            Err(_) => {}
        }
    }
    refined.sort_by(|p, q| q.1.partial_cmp(&p.1).unwrap());
    let (xi0, h_best, lo, hi) = refined[0];
    if !(xi0 > a && xi0 < b) {
        return Err(CriticalError::BoundaryMaximum { x: xi0 });
    }
    let thresh = tol * h_best.abs().max(1.0);
    for &(x, hv, _, _) in &refined[1..] {
        if hv >= h_best - thresh && (x < lo || x > hi) {
            return Err(CriticalError::AmbiguousMaximum { first: xi0, second: x });
        }
    }
    Ok(xi0)
}

fn first_two(h: &Expr, x: f64) -> Option<(f64, f64)> {
    let j = h.jet(x, 2).ok()?;
    let d1 = j.derivative(1);
    let d2 = j.derivative(2);
    (d1.is_finite() && d2.is_finite()).then_some((d1, d2))
}

/// Refines around sample `i`; returns `(x, h(x), lo, hi)` with the original
/// bracket `[lo, hi]`.
fn refine(
    h: &Expr,
    xs: &[f64],
    hs: &[Option<f64>],
    i: usize,
    tol: f64,
) -> Result<(f64, f64, f64, f64), CriticalError> {
    let near = xs[i];
    let no_cp = CriticalError::NoCriticalPoint { near };
    // Pull a neighbor toward the peak until h' is defined there.
    let usable = |j: usize| -> Option<(f64, f64)> {
        let mut x = xs[j];
        for _ in 0..60 {
            if hs[j].is_some() || x != xs[j] {
                if let Some((d1, _)) = first_two(h, x) {
                    return Some((x, d1));
                }
            }
            x = 0.5 * (x + near);
        }
        None
    };
    let (mut lo, d_lo) = usable(i - 1).ok_or(no_cp.clone())?;
    let (mut hi, d_hi) = usable(i + 1).ok_or(no_cp.clone())?;
    let (lo0, hi0) = (lo, hi);
    if d_lo == 0.0 {
        return finish(h, lo, lo0, hi0);
    }
    if d_hi == 0.0 {
        return finish(h, hi, lo0, hi0);
    }
    if !(d_lo > 0.0 && d_hi < 0.0) {
        // The peak sample itself may already be on the far side of the root.
        return Err(no_cp);
    }

    let mut x = near;
    for _ in 0..400 {
        let Some((d1, d2)) = first_two(h, x) else {
            x = 0.5 * (lo + hi);
            continue;
        };
        if d1 == 0.0 {
            break;
        }
        if d1 > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - d1 / d2;
        let candidate = if d2 < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (candidate - x).abs();
        x = candidate;
        if step <= 1e-16 * x.abs().max(1.0) || hi - lo <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    let (d1, d2) = first_two(h, x).ok_or(no_cp.clone())?;
    if d1.abs() > tol * (d2.abs() * x.abs()).max(1.0) {
        return Err(no_cp);
    }
    finish(h, x, lo0, hi0)
}

fn finish(h: &Expr, x: f64, lo: f64, hi: f64) -> Result<(f64, f64, f64, f64), CriticalError> {
    Ok((x, h.eval(x)?, lo, hi))
}

/// Reads the degeneracy index off the Taylor jet of `h` at `xi0`.
///
/// A derivative counts as vanishing when it is at most `tol` times the largest
/// derivative magnitude among orders `1..=max_order` (and at least `tol`).
pub fn classify_degeneracy(
    h: &Expr,
    xi0: f64,
    max_order: usize,
    tol: f64,
) -> Result<CriticalPoint, CriticalError> {
    if max_order < 2 || !max_order.is_multiple_of(2) {
        return Err(CriticalError::InvalidArgument(format!(
            "max_order {max_order} must be even and at least 2"
        )));
    }
    let jet = h.jet(xi0, max_order)?;
    let derivs: Vec<f64> = (0..=max_order).map(|j| jet.derivative(j)).collect();
    let scale = derivs[1..].iter().fold(1.0f64, |s, d| s.max(d.abs()));
    let thresh = tol * scale;
    let Some(order) = (1..=max_order).find(|&j| derivs[j].abs() > thresh) else {
        return Err(CriticalError::AllDerivativesVanish { max_order });
    };
    if order % 2 == 1 {
        return Err(CriticalError::OddLeadingDerivative { order });
    }
    let value = derivs[order];
    if value > 0.0 {
        return Err(CriticalError::PositiveLeadingDerivative { order, value });
    }
    Ok(CriticalPoint {
        xi0,
        m: (order / 2) as u32,
        d2m: value,
        h0: jet.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn loc(h: &str, a: f64, b: f64) -> Result<f64, CriticalError> {
        locate_maximum(&parse(h).unwrap(), a, b, 1024, 1e-12)
    }

    #[test]
    fn stirling_maximizer() {
        let x = loc("log(x)-x", 0.0, f64::INFINITY).unwrap();
        assert!((x - 1.0).abs() <= 1e-10, "{x}");
    }

    #[test]
    fn shifted_quadratic() {
        let x = loc("-(x-2)^2", 0.0, 5.0).unwrap();
        assert!((x - 2.0).abs() <= 1e-10 * 2.0, "{x}");
    }

    #[test]
    fn boundary_maximum() {
        assert!(matches!(loc("x", 0.0, 1.0), Err(CriticalError::BoundaryMaximum { .. })));
        assert!(matches!(
            loc("x^3", f64::NEG_INFINITY, f64::INFINITY),
            Err(CriticalError::BoundaryMaximum { .. })
        ));
    }

    #[test]
    fn degenerate_quartic_is_located() {
        let x = loc("-x^4", -1.0, 3.0).unwrap();
        assert!(x.abs() < 1e-6, "{x}");
        let x = loc("-x^4+x^6/2", -0.5, 0.5).unwrap();
        assert!(x.abs() < 1e-6, "{x}");
    }

    #[test]
    fn symmetric_double_well_is_ambiguous() {
        let r = loc("-(x^2-1)^2", -2.0, 2.0);
        assert!(matches!(r, Err(CriticalError::AmbiguousMaximum { .. })), "{r:?}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let h = parse("-x^2").unwrap();
        assert!(locate_maximum(&h, 1.0, 0.0, 1024, 1e-12).is_err());
        assert!(locate_maximum(&h, -1.0, 1.0, 8, 1e-12).is_err());
        assert!(classify_degeneracy(&h, 0.0, 3, 1e-9).is_err());
    }

    #[test]
    fn classification_examples() {
        let cp = classify_degeneracy(&parse("-x^2").unwrap(), 0.0, 8, 1e-9).unwrap();
        assert_eq!((cp.m, cp.d2m, cp.h0), (1, -2.0, 0.0));
        let cp = classify_degeneracy(&parse("-x^4").unwrap(), 0.0, 8, 1e-9).unwrap();
        assert_eq!((cp.m, cp.d2m, cp.h0), (2, -24.0, 0.0));
        assert!(matches!(
            classify_degeneracy(&parse("x^3").unwrap(), 0.0, 8, 1e-9),
            Err(CriticalError::OddLeadingDerivative { order: 3 })
        ));
        assert!(matches!(
            classify_degeneracy(&parse("x^2").unwrap(), 0.0, 8, 1e-9),
            Err(CriticalError::PositiveLeadingDerivative { order: 2, .. })
        ));
        assert!(matches!(
            classify_degeneracy(&parse("-x^10").unwrap(), 0.0, 8, 1e-9),
            Err(CriticalError::AllDerivativesVanish { max_order: 8 })
        ));
    }

    #[test]
    fn classification_is_scale_relative() {
        // Absolute thresholds would call h'' negligible here.
        let cp = classify_degeneracy(&parse("-1e-6*x^2").unwrap(), 0.0, 8, 1e-9).unwrap();
        assert_eq!(cp.m, 1);
        // ...and would miss that h'' is negligible next to a huge quartic term.
        let cp = classify_degeneracy(&parse("-1e-12*x^2-1e6*x^4").unwrap(), 0.0, 8, 1e-9)
            .unwrap();
        assert_eq!(cp.m, 2);
    }

    #[test]
    fn even_monomials_classify() {
        for k in 1..=4u32 {
            let h = parse(&format!("-x^{}", 2 * k)).unwrap();
            let cp = classify_degeneracy(&h, 0.0, 8, 1e-9).unwrap();
            let fact: f64 = (1..=2 * k).map(|i| i as f64).product();
            assert_eq!(cp.m, k);
            assert_eq!(cp.d2m, -fact);
        }
    }
}
