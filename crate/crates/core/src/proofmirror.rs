//! The window-splitting argument instantiated at a finite `n`.
//!
//! The integral is cut at `xi0 ± ε` with `ε = n^(-1/(6m²))`; each estimate of
//! the argument becomes a numerical check on samples of the window or the
//! tails. Every integral here is scaled by `e^{-n h0}` and multiplied by
//! `n^(1/(2m))`, so the center tends to the limit constant and the tails to 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotic::{self, ln_factorial};
use crate::critical::{Compactify, CriticalPoint};
use crate::expr::Expr;
use crate::par::{self, Exec};
use crate::quadrature::{adaptive_quad_with, ProblemSpec, QuadOptions};

/// Samples of `h^(2m)` across the window.
pub const BRACKET_SAMPLES: usize = 257;
/// Samples for the surrogate gap and the tail suprema.
pub const GAP_SAMPLES: usize = 1025;
/// Slack allowed on the predicted shrink factor of one ladder step.
pub const LADDER_SLACK: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ProofError {
    #[error(
        "window [xi0 - ε, xi0 + ε] with ε = {epsilon} does not fit inside (a, b) at n = {n}{}",
        match .min_n { Some(k) => format!("; smallest admissible n is {k}"), None => String::new() }
    )]
    WindowExceedsInterval {
        n: u64,
        epsilon: f64,
        min_n: Option<u64>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `n^(-1/(6m²))`.
pub fn window_epsilon(n: u64, m: u32) -> f64 {
    let m = f64::from(m);
    (n as f64).powf(-1.0 / (6.0 * m * m))
}

/// Rescaled window radius `ε (n (-d2m) / (2m)!)^(1/(2m))`.
pub fn window_radius(cp: &CriticalPoint, n: u64, eps: f64) -> f64 {
    let two_m = 2.0 * f64::from(cp.m);
    let log = ((n as f64).ln() + (-cp.d2m).ln() - ln_factorial(2 * u64::from(cp.m))) / two_m;
    eps * log.exp()
}

fn check_n(n: u64, cp: &CriticalPoint) -> Result<(), ProofError> {
    if n == 0 || cp.m == 0 || !(cp.d2m < 0.0) {
        return Err(ProofError::InvalidArgument(format!(
            "need n >= 1, m >= 1 and d2m < 0 (n = {n}, m = {}, d2m = {})",
            cp.m, cp.d2m
        )));
    }
    Ok(())
}

/// `ε` for `n`, or the smallest `n` whose window lies strictly inside `(a, b)`.
pub fn fitted_epsilon(ps: &ProblemSpec, cp: &CriticalPoint, n: u64) -> Result<f64, ProofError> {
    check_n(n, cp)?;
    let eps = window_epsilon(n, cp.m);
    if cp.xi0 - eps > ps.a && cp.xi0 + eps < ps.b {
        return Ok(eps);
    }
    let d = (cp.xi0 - ps.a).min(ps.b - cp.xi0);
    let m = f64::from(cp.m);
    let bound = d.powf(-6.0 * m * m).floor();
    let min_n = (d > 0.0 && bound < u64::MAX as f64).then(|| bound as u64 + 1);
    Err(ProofError::WindowExceedsInterval { n, epsilon: eps, min_n })
}

fn scale(cp: &CriticalPoint, n: u64) -> f64 {
    (n as f64).powf(1.0 / (2.0 * f64::from(cp.m)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitIntegral {
    pub epsilon: f64,
    pub left_tail: f64,
    pub center: f64,
    pub right_tail: f64,
    /// Sum of the three quadrature error estimates, scaled like the parts.
    pub err_est: f64,
    pub converged: bool,
}

/// The three scaled pieces `[a, xi0-ε]`, `[xi0-ε, xi0+ε]`, `[xi0+ε, b]`.
pub fn split_integral(ps: &ProblemSpec, cp: &CriticalPoint, n: u64) -> Result<SplitIntegral, crate::Error> {
    let eps = fitted_epsilon(ps, cp, n)?;
    let s = scale(cp, n);
    let bounds = [
        (ps.a, cp.xi0 - eps),
        (cp.xi0 - eps, cp.xi0 + eps),
        (cp.xi0 + eps, ps.b),
    ];
    let mut parts = Vec::with_capacity(3);
    for (lo, hi) in bounds {
        parts.push(ps.integrate_scaled_between(cp, n, lo, hi)?);
    }
    Ok(SplitIntegral {
        epsilon: eps,
        left_tail: s * parts[0].value,
        center: s * parts[1].value,
        right_tail: s * parts[2].value,
        err_est: s * parts.iter().map(|p| p.err_est).sum::<f64>(),
        converged: parts.iter().all(|p| p.converged),
    })
}

fn window_samples(xi0: f64, eps: f64, count: usize) -> Vec<f64> {
    let last = (count - 1) as f64;
    (0..count)
        .map(|i| xi0 - eps + 2.0 * eps * (i as f64 / last))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketCheck {
    pub pass: bool,
    /// Extremes of `h^(2m)(x) / h^(2m)(xi0)` over the window.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Whichever extreme is farther from 1 in log terms.
    pub worst_ratio: f64,
    pub samples: usize,
}

/// `½ ≤ h^(2m)(x) / h^(2m)(xi0) ≤ 3/2` on the window `|x - xi0| ≤ eps`.
pub fn check_derivative_bracket(
    h: &Expr,
    cp: &CriticalPoint,
    eps: f64,
    exec: Exec,
) -> Result<BracketCheck, crate::Error> {
    if !(eps >= 0.0) || !(cp.d2m < 0.0) {
        return Err(ProofError::InvalidArgument(format!("eps = {eps}, d2m = {}", cp.d2m)).into());
    }
    let order = 2 * cp.m as usize;
    let xs = window_samples(cp.xi0, eps, BRACKET_SAMPLES);
    let ratios = par::try_map(exec, &xs, |&x| h.derivative(x, order).map(|d| d / cp.d2m))?;
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst_ratio = if max_ratio.ln().abs() >= min_ratio.ln().abs() {
        max_ratio
    } else {
        min_ratio
    };
    Ok(BracketCheck {
        pass: min_ratio >= 0.5 && max_ratio <= 1.5,
        min_ratio,
        max_ratio,
        worst_ratio,
        samples: xs.len(),
    })
}

/// `sup_{u ≥ 0} u e^{(d2m / (2 (2m)!)) u} = 2 (2m)! / (-d2m e)`.
pub fn tail_constant(m: u32, d2m: f64) -> f64 {
    2.0 * ln_factorial(2 * u64::from(m)).exp() / (-d2m * std::f64::consts::E)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    /// `n^(1/(2m)) sup_tails e^{n (h - h0)}`.
    pub lhs: f64,
    /// `C n^(5/(6m) - 1)`.
    pub rhs: f64,
    pub c: f64,
    pub pass: bool,
}

fn tail_samples(lo: f64, hi: f64) -> Vec<f64> {
    let mut xs = Compactify::new(lo, hi).samples(GAP_SAMPLES);
    xs.retain(|&x| x >= lo && x <= hi);
    xs
}

/// Sup of the scaled exponential over both tails against the closed-form bound.
pub fn check_tail_bound(ps: &ProblemSpec, cp: &CriticalPoint, n: u64) -> Result<TailBound, crate::Error> {
    let eps = fitted_epsilon(ps, cp, n)?;
    let mut xs = tail_samples(ps.a, cp.xi0 - eps);
    xs.extend(tail_samples(cp.xi0 + eps, ps.b));
    let nf = n as f64;
    // Points outside the domain of h carry no mass.
    let vals = par::map(ps.options.exec, &xs, |&x| {
        ps.h.eval(x).map_or(0.0, |hv| (nf * (hv - cp.h0)).exp())
    });
    let sup = vals.iter().copied().fold(0.0, f64::max);
    let lhs = scale(cp, n) * sup;
    let c = tail_constant(cp.m, cp.d2m);
    let rhs = c * nf.powf(5.0 / (6.0 * f64::from(cp.m)) - 1.0);
    Ok(TailBound {
        lhs,
        rhs,
        c,
        pass: lhs <= rhs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateGap {
    /// `max |e^{n p} - e^{n q}|` over the window samples.
    pub sup_gap: f64,
    /// `max |p - q|` over the same samples.
    pub max_pq: f64,
    /// `|d2m| ε^{2m} / (2 (2m)!)`.
    pub pq_bound: f64,
    /// Whether `|p - q| ≤ pq_bound` held at every sample.
    pub pointwise_pass: bool,
    /// `max |p - q| / n`.
    pub paper_bound_a: f64,
    /// `n max |p - q|`.
    pub paper_bound_b: f64,
    pub within_bound_a: bool,
    pub within_bound_b: bool,
}

/// Compares `p = h - h0` with its leading Taylor term `q` on the window.
pub fn surrogate_gap(ps: &ProblemSpec, cp: &CriticalPoint, n: u64) -> Result<SurrogateGap, crate::Error> {
    let eps = fitted_epsilon(ps, cp, n)?;
    let two_m = 2 * cp.m;
    let fact = ln_factorial(u64::from(two_m)).exp();
    let nf = n as f64;
    let xs = window_samples(cp.xi0, eps, GAP_SAMPLES);
    let rows = par::try_map(ps.options.exec, &xs, |&x| -> Result<(f64, f64, f64), crate::Error> {
        let hv = ps.h.eval(x)?;
        let p = hv - cp.h0;
        let q = cp.d2m * (x - cp.xi0).powi(two_m as i32) / fact;
        // Rounding in `h(x) - h0`, not a failure of the bound.
        let slack = 4.0 * f64::EPSILON * hv.abs().max(cp.h0.abs());
        Ok((((nf * p).exp() - (nf * q).exp()).abs(), (p - q).abs(), slack))
    })?;
    let pq_bound = cp.d2m.abs() * eps.powi(two_m as i32) / (2.0 * fact);
    let sup_gap = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_pq = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let paper_bound_a = max_pq / nf;
    let paper_bound_b = nf * max_pq;
    Ok(SurrogateGap {
        sup_gap,
        max_pq,
        pq_bound,
        pointwise_pass: rows.iter().all(|r| r.1 <= pq_bound + r.2),
        paper_bound_a,
        paper_bound_b,
        within_bound_a: sup_gap <= paper_bound_a,
        within_bound_b: sup_gap <= paper_bound_b,
    })
}

/// `∫_{|z| > r} e^{-z^{2m}} dz`.
pub fn truncated_tail_deficit(r: f64, m: u32) -> Result<f64, crate::Error> {
    if !(r >= 0.0) || m == 0 {
        return Err(ProofError::InvalidArgument(format!("need r >= 0 and m >= 1 (r = {r}, m = {m})")).into());
    }
    let k = 2 * m as i32;
    let opts = QuadOptions {
        rel_tol: 1e-12,
        ..QuadOptions::default()
    };
    let one_side = adaptive_quad_with(|z: f64| (-z.powi(k)).exp(), r, f64::INFINITY, &opts)?;
    Ok(2.0 * one_side.value)
}

/// Per-estimate outcomes of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flags {
    pub derivative_bracket: bool,
    pub tail_bound: bool,
    pub pointwise_gap: bool,
    pub additivity: bool,
    pub converged: bool,
}

impl Flags {
    pub fn all(&self) -> bool {
        self.derivative_bracket && self.tail_bound && self.pointwise_gap && self.additivity && self.converged
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowDiagnostics {
    pub n: u64,
    pub m: u32,
    pub epsilon: f64,
    pub left_tail: f64,
    pub center: f64,
    pub right_tail: f64,
    /// `phi(xi0) n^(1/(2m)) ∫_window e^{n q}`.
    pub surrogate_center: f64,
    /// Rescaled window radius.
    pub r: f64,
    pub sup_gap: f64,
    /// `C n^(5/(6m) - 1) ∫_tails |phi|`; infinite when `phi` is not integrable there.
    pub tail_bound: f64,
    pub deficit: f64,
    /// `n^(1/(2m))` times the whole scaled integral.
    pub full: f64,
    /// `phi(xi0) (Γ(1/(2m)) / m) ((2m)! / (-d2m))^(1/(2m))`.
    pub target: f64,
    /// `|full / target - 1|`.
    pub final_rel_error: f64,
    pub bracket: BracketCheck,
    pub tail: TailBound,
    pub gap: SurrogateGap,
    pub flags: Flags,
}

/// Runs every check at one `n`.
pub fn proof_trace(ps: &ProblemSpec, cp: &CriticalPoint, n: u64) -> Result<WindowDiagnostics, crate::Error> {
    let split = split_integral(ps, cp, n)?;
    let eps = split.epsilon;
    let s = scale(cp, n);
    let whole = ps.integrate_scaled_between(cp, n, ps.a, ps.b)?;
    let full = s * whole.value;

    let bracket = check_derivative_bracket(&ps.h, cp, eps, ps.options.exec)?;
    let tail = check_tail_bound(ps, cp, n)?;
    let gap = surrogate_gap(ps, cp, n)?;

    let amp = asymptotic::amplitude(&ps.phi, cp.xi0)?;
    let fact = ln_factorial(2 * u64::from(cp.m)).exp();
    let two_m = 2 * cp.m as i32;
    let nf = n as f64;
    let window_opts = ps.quad_options(vec![cp.xi0]);
    let surrogate = adaptive_quad_with(
        |x: f64| (nf * cp.d2m * (x - cp.xi0).powi(two_m) / fact).exp(),
        cp.xi0 - eps,
        cp.xi0 + eps,
        &window_opts,
    )?;
    let surrogate_center = amp * s * surrogate.value;

    let r = window_radius(cp, n, eps);
    let deficit = truncated_tail_deficit(r, cp.m)?;

    let abs_phi = |x: f64| ps.phi.eval(x).map_or(f64::NAN, f64::abs);
    let opts = ps.quad_options(Vec::new());
    let tail_mass = [(ps.a, cp.xi0 - eps), (cp.xi0 + eps, ps.b)]
        .iter()
        .map(|&(lo, hi)| match adaptive_quad_with(abs_phi, lo, hi, &opts) {
            Ok(q) if q.converged => q.value,
            _ => f64::INFINITY,
        })
        .sum::<f64>();
    let tail_bound = tail.rhs * tail_mass;

    let target = amp * asymptotic::log_limit_constant(cp.m, cp.d2m).exp();
    let parts = split.left_tail + split.center + split.right_tail;
    let size = split.left_tail.abs() + split.center.abs() + split.right_tail.abs();
    let additivity_tol = 10.0 * ps.options.rel_tol * size + split.err_est + s * whole.err_est;

    let flags = Flags {
        derivative_bracket: bracket.pass,
        tail_bound: tail.pass,
        pointwise_gap: gap.pointwise_pass,
        additivity: (parts - full).abs() <= additivity_tol,
        converged: split.converged && whole.converged && surrogate.converged,
    };
    Ok(WindowDiagnostics {
        n,
        m: cp.m,
        epsilon: eps,
        left_tail: split.left_tail,
        center: split.center,
        right_tail: split.right_tail,
        surrogate_center,
        r,
        sup_gap: gap.sup_gap,
        tail_bound,
        deficit,
        full,
        target,
        final_rel_error: (full / target - 1.0).abs(),
        bracket,
        tail,
        gap,
        flags,
    })
}

/// Whether `values` (taken at increasing `ns`) shrink toward zero at least
/// like `n^(-exponent)`, up to a factor `slack` per step.
///
/// A step passes when the next value is exactly zero, or when it is strictly
/// smaller and at most `slack · prev · (n_next / n_prev)^(-exponent)`.
pub fn ladder_decays(ns: &[u64], values: &[f64], exponent: f64, slack: f64) -> bool {
    assert_eq!(ns.len(), values.len(), "one value per n");
    ns.windows(2).zip(values.windows(2)).all(|(n, v)| {
        let (prev, next) = (v[0].abs(), v[1].abs());
        if next == 0.0 {
            return true;
        }
        let factor = (n[1] as f64 / n[0] as f64).powf(-exponent);
        next < prev && next <= slack * prev * factor
    })
}

/// Decay exponent of the tail bound, `1 - 5/(6m)`.
pub fn tail_decay_exponent(m: u32) -> f64 {
    1.0 - 5.0 / (6.0 * f64::from(m))
}

/// Convenience: traces along a ladder of `n`, in parallel over `n`.
pub fn trace_ladder(
    ps: &ProblemSpec,
    cp: &CriticalPoint,
    ns: &[u64],
) -> Result<Vec<WindowDiagnostics>, crate::Error> {
    par::try_map(ps.options.exec, ns, |&n| proof_trace(ps, cp, n))
}
