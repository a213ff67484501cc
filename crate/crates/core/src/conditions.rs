//! Sample-based checks of the hypotheses on `phi` and `h`.
//!
//! None of these can prove a hypothesis; they look for counterexamples on
//! finite grids and report what they saw.

use serde::{Deserialize, Serialize};

use crate::asymptotic;
use crate::critical::{Compactify, CriticalPoint};
use crate::expr::Expr;
use crate::quadrature::ProblemSpec;

/// Number of `ρ` values tried on each flank.
pub const RHO_COUNT: usize = 32;
/// Samples per segment in the flank check.
pub const FLANK_SAMPLES: usize = 256;
/// Default integrability probes.
pub const N_PROBE: [u64; 5] = [0, 1, 4, 16, 64];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub status: Status,
    pub pass: bool,
    pub detail: String,
    pub worst_witness: Option<f64>,
}

impl Condition {
    fn new(status: Status, detail: String, worst_witness: Option<f64>) -> Condition {
        Condition {
            status,
            pass: status == Status::Pass,
            detail,
            worst_witness,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub c1: Condition,
    pub c3: Condition,
    pub c4: Condition,
    pub c5: Condition,
}

impl ConditionReport {
    pub fn conditions(&self) -> [(&'static str, &Condition); 4] {
        [("c1", &self.c1), ("c3", &self.c3), ("c4", &self.c4), ("c5", &self.c5)]
    }

    pub fn worst(&self) -> Status {
        let statuses = self.conditions().map(|(_, c)| c.status);
        if statuses.contains(&Status::Fail) {
            Status::Fail
        } else if statuses.contains(&Status::Warn) {
            Status::Warn
        } else {
            Status::Pass
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flank {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlankCheck {
    pub pass: bool,
    /// Outer point with the largest excess over the inner minimum.
    pub worst_witness: Option<f64>,
    /// That excess, `h(y) - min_inner h`.
    pub worst_excess: f64,
    pub rho_checked: usize,
}

fn rho_grid(xi0: f64, a: f64, b: f64) -> Vec<f64> {
    let r = (xi0 - a).min(b - xi0);
    let span = b - a;
    let rho_max = if r.is_finite() {
        r.min(span / 2.0)
    } else {
        10.0 * xi0.abs().max(1.0)
    };
    let rho_min = rho_max * 1e-3;
    let ratio = (rho_max / rho_min).powf(1.0 / (RHO_COUNT - 1) as f64);
    (0..RHO_COUNT).map(|i| rho_min * ratio.powi(i as i32)).collect()
}

fn sampled(h: &Expr, xs: impl Iterator<Item = f64>) -> Vec<(f64, f64)> {
    // Points outside the domain of h are skipped.
    xs.filter_map(|x| h.eval(x).ok().map(|v| (x, v))).collect()
}

/// Checks that `h` on `[xi0 - ρ, xi0]` never drops below `h` on `[a, xi0 - ρ]`
/// (mirrored for the right flank) over a geometric grid of `ρ`.
pub fn check_flank_dominance(
    h: &Expr,
    xi0: f64,
    a: f64,
    b: f64,
    samples: usize,
    flank: Flank,
) -> Result<FlankCheck, crate::Error> {
    if samples < 64 {
        return Err(crate::Error::InvalidArgument(format!(
            "flank check needs at least 64 samples, got {samples}"
        )));
    }
    let h0 = h.eval(xi0)?;
    let tol = 1e-12 * h0.abs().max(1.0);
    let mut worst = (0.0f64, None);
    let mut rho_checked = 0;
    for rho in rho_grid(xi0, a, b) {
        let (inner_lo, inner_hi, outer_lo, outer_hi) = match flank {
            Flank::Left => (xi0 - rho, xi0, a, xi0 - rho),
            Flank::Right => (xi0, xi0 + rho, xi0 + rho, b),
        };
        if !(outer_lo < outer_hi) {
            continue;
        }
        rho_checked += 1;
        let last = (samples - 1) as f64;
        let inner = sampled(
            h,
            (0..samples).map(|i| inner_lo + (inner_hi - inner_lo) * (i as f64 / last)),
        );
        let outer = sampled(h, Compactify::new(outer_lo, outer_hi).samples(samples).into_iter());
        let inner_min = inner.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        for &(y, hy) in &outer {
            let excess = hy - inner_min;
            if excess > tol && excess > worst.0 {
                worst = (excess, Some(y));
            }
        }
    }
    Ok(FlankCheck {
        pass: worst.1.is_none(),
        worst_witness: worst.1,
        worst_excess: worst.0,
        rho_checked,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub n: u64,
    pub converged: bool,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityCheck {
    /// Every probe converged, including `n = 0`.
    pub pass: bool,
    /// Every probe with `n ≥ 1` converged.
    pub pass_positive_n: bool,
    pub detail: String,
    pub probes: Vec<Probe>,
}

/// Quadrature of `|phi| e^{n (h - h0)}` for each probe `n`.
pub fn check_integrability(
    ps: &ProblemSpec,
    cp: &CriticalPoint,
    n_probe: &[u64],
) -> Result<IntegrabilityCheck, crate::Error> {
    if !n_probe.contains(&0) {
        return Err(crate::Error::InvalidArgument("integrability probes must include n = 0".into()));
    }
    let opts = ps.quad_options(vec![cp.xi0]);
    let mut probes = Vec::with_capacity(n_probe.len());
    for &n in n_probe {
        let f = ps.scaled_integrand(cp, n);
        let probe = match crate::quadrature::adaptive_quad_with(|x| f(x).abs(), ps.a, ps.b, &opts) {
            Ok(q) => Probe {
                n,
                converged: q.converged,
                value: Some(q.value),
                error: (!q.converged).then(|| format!("no convergence, estimate {:e} ± {:e}", q.value, q.err_est)),
            },
            Err(e) => Probe {
                n,
                converged: false,
                value: None,
                error: Some(e.to_string()),
            },
        };
        probes.push(probe);
    }
    let failed: Vec<u64> = probes.iter().filter(|p| !p.converged).map(|p| p.n).collect();
    let pass_positive_n = !failed.iter().any(|&n| n > 0);
    let detail = if failed.is_empty() {
        format!("integrable for all probed n {n_probe:?}")
    } else if pass_positive_n {
        "not integrable at n = 0; integrable for all probed n >= 1".to_string()
    } else {
        format!("not integrable for n in {failed:?}")
    };
    Ok(IntegrabilityCheck {
        pass: failed.is_empty(),
        pass_positive_n,
        detail,
        probes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeCheck {
    pub pass: bool,
    pub value: Option<f64>,
    pub detail: String,
}

const DELTAS: [f64; 3] = [1e-3, 1e-5, 1e-7];

/// `phi(xi0) ≠ 0` and `phi(xi0 ± δ) → phi(xi0)` along `δ ∈ {1e-3, 1e-5, 1e-7}`.
pub fn check_amplitude(phi: &Expr, xi0: f64) -> AmplitudeCheck {
    let fail = |value, detail: String| AmplitudeCheck {
        pass: false,
        value,
        detail,
    };
    let v = match phi.eval(xi0) {
        Ok(v) => v,
        Err(e) => return fail(None, e.to_string()),
    };
    let mut dev = [0.0f64; 3];
    for (k, &d) in DELTAS.iter().enumerate() {
        for x in [xi0 - d, xi0 + d] {
            match phi.eval(x) {
                Ok(p) => dev[k] = dev[k].max((p - v).abs()),
                Err(e) => return fail(Some(v), format!("phi undefined at {x}: {e}")),
            }
        }
    }
    if let Err(e) = asymptotic::amplitude(phi, xi0) {
        return fail(Some(v), e.to_string());
    }
    let converges = dev[2] <= 1e-3 * dev[0] || dev[2] <= 1e-9 * v.abs().max(1.0);
    if !converges {
        return fail(
            Some(v),
            format!(
                "phi(xi0 ± δ) does not approach phi(xi0) = {v}: deviations {:e}, {:e}, {:e}",
                dev[0], dev[1], dev[2]
            ),
        );
    }
    AmplitudeCheck {
        pass: true,
        value: Some(v),
        detail: format!("phi(xi0) = {v}"),
    }
}

fn flank_condition(check: &FlankCheck, side: &str) -> Condition {
    if check.pass {
        Condition::new(
            Status::Pass,
            format!("{side} flank dominated over {} values of rho", check.rho_checked),
            None,
        )
    } else {
        Condition::new(
            Status::Fail,
            format!(
                "{side} flank: h exceeds the inner minimum by {:e} further out",
                check.worst_excess
            ),
            check.worst_witness,
        )
    }
}

/// Runs all four checks with the default grids.
pub fn check_conditions(ps: &ProblemSpec, cp: &CriticalPoint) -> Result<ConditionReport, crate::Error> {
    let ic = check_integrability(ps, cp, &N_PROBE)?;
    let c1 = if ic.pass {
        Condition::new(Status::Pass, ic.detail, None)
    } else if ic.pass_positive_n {
        Condition::new(Status::Warn, ic.detail, None)
    } else {
        Condition::new(Status::Fail, ic.detail, None)
    };
    let left = check_flank_dominance(&ps.h, cp.xi0, ps.a, ps.b, FLANK_SAMPLES, Flank::Left)?;
    let right = check_flank_dominance(&ps.h, cp.xi0, ps.a, ps.b, FLANK_SAMPLES, Flank::Right)?;
    let amp = check_amplitude(&ps.phi, cp.xi0);
    let c5 = Condition::new(
        if amp.pass { Status::Pass } else { Status::Fail },
        amp.detail,
        (!amp.pass).then_some(cp.xi0),
    );
    Ok(ConditionReport {
        c1,
        c3: flank_condition(&left, "left"),
        c4: flank_condition(&right, "right"),
        c5,
    })
}
