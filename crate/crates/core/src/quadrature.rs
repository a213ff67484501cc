//! Adaptive Gauss–Kronrod quadrature and the scaled Laplace integral oracle.
//!
//! Panels are refined globally: each round bisects the panels with the
//! largest error estimates, evaluating the children as one batch (in parallel
//! when enabled). Infinite ends are mapped onto `[0, 1)` by
//! `x = c ± sinh(u / (1 - u))`, which turns algebraic or exponential decay
//! into (double-)exponential decay in `u`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotic::{self, LogScaledValue};
use crate::critical::{self, CriticalError, CriticalPoint};
use crate::expr::{self, Expr};
use crate::par::{self, Exec};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum QuadError {
    #[error("integral diverges (estimate {value:e} after {evaluations} evaluations)")]
    DivergentIntegral { value: f64, evaluations: usize },
    #[error("quadrature did not converge: {value} ± {err_est} after {evaluations} evaluations")]
    NonConvergence {
        value: f64,
        err_est: f64,
        evaluations: usize,
    },
    #[error("invalid integration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("tolerances must be positive (rel {rel_tol}, abs {abs_tol})")]
    InvalidTolerance { rel_tol: f64, abs_tol: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub err_est: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Integrand evaluations that returned NaN and were counted as zero.
    pub nan_points: usize,
}

impl QuadResult {
    pub fn require_converged(self) -> Result<QuadResult, QuadError> {
        if self.converged {
            Ok(self)
        } else {
            Err(QuadError::NonConvergence {
                value: self.value,
                err_est: self.err_est,
                evaluations: self.evaluations,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
    /// Points inside `(a, b)` that must be panel boundaries.
    pub breakpoints: Vec<f64>,
    pub exec: Exec,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_evals: 1_000_000,
            breakpoints: Vec::new(),
            exec: Exec::default(),
        }
    }
}

const DIVERGENCE_LIMIT: f64 = 1e300;
const BATCH: usize = 16;

#[rustfmt::skip]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[rustfmt::skip]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[rustfmt::skip]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Clone, Copy, Debug)]
enum Segment {
    Finite,
    /// `[c, ∞)` via `x = c + sinh(u / (1 - u))`, `u ∈ [0, 1)`.
    Upper(f64),
    /// `(-∞, c]` via `x = c - sinh(u / (1 - u))`.
    Lower(f64),
}

impl Segment {
    /// Transformed integrand value and whether it was a NaN that got zeroed.
    fn eval<F: Fn(f64) -> f64>(self, f: &F, u: f64) -> (f64, bool) {
        let v = match self {
            Segment::Finite => f(u),
            Segment::Upper(c) | Segment::Lower(c) => {
                let s = u / (1.0 - u);
                let sh = s.sinh();
                let x = if matches!(self, Segment::Upper(_)) { c + sh } else { c - sh };
                if !x.is_finite() {
                    return (0.0, false);
                }
                let fx = f(x);
                if fx == 0.0 {
                    return (0.0, false);
                }
                let d = 1.0 - u;
                fx * s.cosh() / (d * d)
            }
        };
        if v.is_nan() {
            (0.0, true)
        } else {
            (v, false)
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    seg: usize,
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
    nans: usize,
    splittable: bool,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

#[allow(clippy::needless_range_loop)]
fn gk21<F: Fn(f64) -> f64>(f: &F, seg: Segment, seg_idx: usize, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut nans = 0;
    let mut at = |u: f64| {
        let (v, nan) = seg.eval(f, u);
        nans += usize::from(nan);
        v
    };
    let fc = at(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..5 {
        let jt = 2 * j + 1;
        let dx = half * XGK[jt];
        let (f1, f2) = (at(center - dx), at(center + dx));
        fv1[jt] = f1;
        fv2[jt] = f2;
        res_g += WG[j] * (f1 + f2);
        res_k += WGK[jt] * (f1 + f2);
        res_abs += WGK[jt] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jt = 2 * j;
        let dx = half * XGK[jt];
        let (f1, f2) = (at(center - dx), at(center + dx));
        fv1[jt] = f1;
        fv2[jt] = f2;
        res_k += WGK[jt] * (f1 + f2);
        res_abs += WGK[jt] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_k - res_g) * half;
    let value = res_k * half;
    let err = if value.is_finite() {
        rescale_error(err, res_abs * half.abs(), res_asc * half.abs())
    } else {
        f64::INFINITY
    };
    Panel {
        seg: seg_idx,
        lo,
        hi,
        value,
        err,
        nans,
        splittable: true,
    }
}

const EVALS_PER_PANEL: usize = 21;

/// Adaptive quadrature with default options and the given tolerances.
pub fn adaptive_quad<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<QuadResult, QuadError>
where
    F: Fn(f64) -> f64 + Sync,
{
    let opts = QuadOptions {
        rel_tol,
        abs_tol,
        ..QuadOptions::default()
    };
    adaptive_quad_with(f, a, b, &opts)
}

/// `∫_a^b f`, with either end possibly infinite.
///
/// Running out of budget is not an error: the best estimate comes back with
/// `converged == false`. A non-finite or astronomically large estimate is
/// reported as [`QuadError::DivergentIntegral`].
pub fn adaptive_quad_with<F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult, QuadError>
where
    F: Fn(f64) -> f64 + Sync,
{
    if a.is_nan() || b.is_nan() || a >= b || a == f64::INFINITY || b == f64::NEG_INFINITY {
        return Err(QuadError::InvalidInterval { a, b });
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(QuadError::InvalidTolerance {
            rel_tol: opts.rel_tol,
            abs_tol: opts.abs_tol,
        });
    }

    let mut cuts: Vec<f64> = opts
        .breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b && p.is_finite())
        .collect();
    if cuts.is_empty() && !a.is_finite() && !b.is_finite() {
        cuts.push(0.0);
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut points = vec![a];
    points.extend(cuts);
    points.push(b);

    let mut segments = Vec::new();
    let mut seeds = Vec::new();
    for (i, w) in points.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        let (seg, lo, hi) = if p == f64::NEG_INFINITY {
            (Segment::Lower(q), 0.0, 1.0)
        } else if q == f64::INFINITY {
            (Segment::Upper(p), 0.0, 1.0)
        } else {
            (Segment::Finite, p, q)
        };
        segments.push(seg);
        seeds.push((i, lo, hi));
    }

    let mut panels: Vec<Panel> =
        par::map(opts.exec, &seeds, |&(i, lo, hi)| gk21(&f, segments[i], i, lo, hi));
    let mut evaluations = panels.len() * EVALS_PER_PANEL;
    let mut nan_points: usize = panels.iter().map(|p| p.nans).sum();

    let converged = loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        if !total.is_finite() || total.abs() > DIVERGENCE_LIMIT {
            return Err(QuadError::DivergentIntegral {
                value: total,
                evaluations,
            });
        }
        let err_total: f64 = panels.iter().map(|p| p.err).sum();
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err_total <= tol {
            break true;
        }
        if evaluations >= opts.max_evals {
            break false;
        }

        let mut order: Vec<usize> = (0..panels.len())
            .filter(|&i| panels[i].splittable && panels[i].err > 0.0)
            .collect();
        order.sort_by(|&i, &j| panels[j].err.partial_cmp(&panels[i].err).unwrap().then(i.cmp(&j)));
        let budget_left = (opts.max_evals - evaluations) / (2 * EVALS_PER_PANEL);
        order.truncate(BATCH.min(budget_left.max(1)));

        let mut jobs = Vec::with_capacity(2 * order.len());
        let mut parents = Vec::with_capacity(order.len());
        for &i in &order {
            let p = panels[i];
            let mid = 0.5 * (p.lo + p.hi);
            if !(mid > p.lo && mid < p.hi) {
                panels[i].splittable = false;
                continue;
            }
            parents.push(i);
            jobs.push((p.seg, p.lo, mid));
            jobs.push((p.seg, mid, p.hi));
        }
        if parents.is_empty() {
            if panels.iter().any(|p| p.splittable && p.err > 0.0) {
                continue;
            }
            break false;
        }
        let kids = par::map(opts.exec, &jobs, |&(s, lo, hi)| gk21(&f, segments[s], s, lo, hi));
        evaluations += kids.len() * EVALS_PER_PANEL;
        nan_points += kids.iter().map(|p| p.nans).sum::<usize>();
        for (k, &i) in parents.iter().enumerate() {
            panels[i] = kids[2 * k];
            panels.push(kids[2 * k + 1]);
        }
    };

    panels.sort_by(|p, q| p.seg.cmp(&q.seg).then(p.lo.partial_cmp(&q.lo).unwrap()));
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let err_est: f64 = panels.iter().map(|p| p.err).sum();
    Ok(QuadResult {
        value,
        err_est,
        evaluations,
        converged,
        nan_points,
    })
}

/// Tunables shared by the problem-level operations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemOptions {
    pub grid: usize,
    pub locate_tol: f64,
    pub degeneracy_tol: f64,
    pub max_order: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
    pub exec: Exec,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        ProblemOptions {
            grid: 1024,
            locate_tol: 1e-12,
            degeneracy_tol: 1e-9,
            max_order: 8,
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_evals: 1_000_000,
            exec: Exec::default(),
        }
    }
}

/// A Laplace-type integral `∫_a^b phi(x) exp(n h(x)) dx`, `n` left open.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub a: f64,
    pub b: f64,
    pub phi: Expr,
    pub h: Expr,
    pub options: ProblemOptions,
}

impl ProblemSpec {
    pub fn new(phi: Expr, h: Expr, a: f64, b: f64) -> Result<ProblemSpec, crate::Error> {
        ProblemSpec::with_options(phi, h, a, b, ProblemOptions::default())
    }

    pub fn with_options(
        phi: Expr,
        h: Expr,
        a: f64,
        b: f64,
        options: ProblemOptions,
    ) -> Result<ProblemSpec, crate::Error> {
        if a.is_nan() || b.is_nan() || a >= b {
            return Err(QuadError::InvalidInterval { a, b }.into());
        }
        Ok(ProblemSpec { a, b, phi, h, options })
    }

    /// Parses both expressions.
    pub fn parse(phi: &str, h: &str, a: f64, b: f64) -> Result<ProblemSpec, crate::Error> {
        ProblemSpec::new(expr::parse(phi)?, expr::parse(h)?, a, b)
    }

    /// Locates and classifies the maximizer of `h`.
    pub fn critical_point(&self) -> Result<CriticalPoint, CriticalError> {
        let o = &self.options;
        let xi0 = critical::locate_maximum(&self.h, self.a, self.b, o.grid, o.locate_tol)?;
        critical::classify_degeneracy(&self.h, xi0, o.max_order, o.degeneracy_tol)
    }

    pub fn quad_options(&self, breakpoints: Vec<f64>) -> QuadOptions {
        QuadOptions {
            rel_tol: self.options.rel_tol,
            abs_tol: self.options.abs_tol,
            max_evals: self.options.max_evals,
            breakpoints,
            exec: self.options.exec,
        }
    }

    /// `x ↦ phi(x) exp(n (h(x) - h0))`; domain errors become NaN.
    pub fn scaled_integrand(&self, cp: &CriticalPoint, n: u64) -> impl Fn(f64) -> f64 + Sync + '_ {
        let h0 = cp.h0;
        let nf = n as f64;
        move |x| match (self.phi.eval(x), self.h.eval(x)) {
            (Ok(p), Ok(hv)) => {
                if n == 0 {
                    p
                } else {
                    let e = (nf * (hv - h0)).exp();
                    if e == 0.0 {
                        0.0
                    } else {
                        p * e
                    }
                }
            }
            _ => f64::NAN,
        }
    }

    /// `∫_lo^hi phi e^{n (h - h0)}`, with `xi0` as a breakpoint when inside.
    pub fn integrate_scaled_between(
        &self,
        cp: &CriticalPoint,
        n: u64,
        lo: f64,
        hi: f64,
    ) -> Result<QuadResult, QuadError> {
        adaptive_quad_with(self.scaled_integrand(cp, n), lo, hi, &self.quad_options(vec![cp.xi0]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledIntegral {
    /// `I_n` itself, `log_mag = log|S| + n h0`.
    pub value: LogScaledValue,
    /// Quadrature of the scaled integrand `S`.
    pub scaled: QuadResult,
}

/// `I_n = ∫ phi e^{n h}` computed as `e^{n h0} ∫ phi e^{n (h - h0)}`.
pub fn integrate_scaled(ps: &ProblemSpec, cp: &CriticalPoint, n: u64) -> Result<ScaledIntegral, QuadError> {
    let scaled = ps.integrate_scaled_between(cp, n, ps.a, ps.b)?;
    let value = LogScaledValue::from_f64(scaled.value).scale_log(n as f64 * cp.h0);
    Ok(ScaledIntegral { value, scaled })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: u64,
    pub log_i: f64,
    pub log_a: f64,
    pub ratio: f64,
    pub converged: bool,
}

/// Oracle integral vs asymptotic estimate for each `n`, in input order.
pub fn ratio_table(ps: &ProblemSpec, cp: &CriticalPoint, n_list: &[u64]) -> Result<Vec<RatioRow>, crate::Error> {
    if n_list.is_empty() {
        return Err(crate::Error::InvalidArgument("n list is empty".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(crate::Error::InvalidArgument("n list must be strictly ascending".into()));
    }
    let amp = asymptotic::amplitude(&ps.phi, cp.xi0)?;
    par::try_map(ps.options.exec, n_list, |&n| -> Result<RatioRow, crate::Error> {
        let est = asymptotic::estimate_from_amplitude(amp, cp, n)?;
        let int = integrate_scaled(ps, cp, n)?;
        let q = int.value.ratio(est.value);
        Ok(RatioRow {
            n,
            log_i: int.value.log_mag,
            log_a: est.value.log_mag,
            ratio: f64::from(q.sign) * q.log_mag.exp(),
            converged: int.scaled.converged,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn q(f: impl Fn(f64) -> f64 + Sync, a: f64, b: f64) -> QuadResult {
        adaptive_quad(f, a, b, 1e-10, 1e-300).unwrap()
    }

    #[test]
    fn polynomial() {
        let r = q(|x| x * x, -1.0, 1.0);
        assert!(r.converged);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn half_line_exponential() {
        let r = q(|x| (-x).exp(), 0.0, f64::INFINITY);
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn whole_line_gaussian() {
        let r = q(|x| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY);
        assert!(r.converged);
        assert!((r.value - PI.sqrt()).abs() < 1e-12, "{r:?}");
        let r = q(|x| (-x * x).exp(), f64::NEG_INFINITY, 0.0);
        assert!((r.value - 0.5 * PI.sqrt()).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn algebraic_tail() {
        let r = q(|x| 1.0 / (1.0 + x * x), f64::NEG_INFINITY, f64::INFINITY);
        assert!(r.converged);
        assert!((r.value - PI).abs() < 1e-9 * PI, "{r:?}");
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} = 2
        let r = q(|x| 1.0 / x.sqrt(), 0.0, 1.0);
        assert!(r.converged, "{r:?}");
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn divergent_integrals_are_reported() {
        let r = adaptive_quad(|_| 1.0, 0.0, f64::INFINITY, 1e-10, 1e-300);
        assert!(matches!(r, Err(QuadError::DivergentIntegral { .. })), "{r:?}");
        let r = adaptive_quad(|x| 1.0 / x, 0.0, 1.0, 1e-10, 1e-300);
        assert!(matches!(r, Err(QuadError::DivergentIntegral { .. })) || !r.unwrap().converged);
    }

    #[test]
    fn budget_exhaustion_is_not_converged() {
        let opts = QuadOptions {
            max_evals: 500,
            ..QuadOptions::default()
        };
        let r = adaptive_quad_with(|x| (1.0 / x).sin(), 1e-8, 1.0, &opts).unwrap();
        assert!(!r.converged);
        assert!(r.clone().require_converged().is_err());
        assert!(r.evaluations <= 500 + 2 * BATCH * EVALS_PER_PANEL);
    }

    #[test]
    fn nan_points_are_zeroed_and_counted() {
        let r = q(|x| if x == 0.0 { f64::NAN } else { 1.0 }, -1.0, 1.0);
        assert!((r.value - 2.0).abs() < 1e-14);
        assert!(r.nan_points > 0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(adaptive_quad(|x| x, 1.0, 0.0, 1e-10, 1e-300).is_err());
        assert!(adaptive_quad(|x| x, 0.0, 1.0, 0.0, 1e-300).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let f = |x: f64| (x.sin() * 3.0).exp() / (1.0 + x * x);
        let run = |exec| {
            let o = QuadOptions { exec, ..QuadOptions::default() };
            adaptive_quad_with(f, -30.0, 40.0, &o).unwrap()
        };
        let (s, p) = (run(Exec::Sequential), run(Exec::Parallel));
        assert_eq!(s, p);
    }

    fn ps(phi: &str, h: &str, a: f64, b: f64) -> ProblemSpec {
        ProblemSpec::parse(phi, h, a, b).unwrap()
    }

    #[test]
    fn scaled_gaussian() {
        let p = ps("1", "-x^2", f64::NEG_INFINITY, f64::INFINITY);
        let cp = p.critical_point().unwrap();
        let r = integrate_scaled(&p, &cp, 9).unwrap();
        assert_eq!(r.value.sign, 1);
        assert!((r.value.log_mag - (PI / 9.0).sqrt().ln()).abs() < 1e-10);
    }

    #[test]
    fn stirling_at_n1_is_one() {
        let p = ps("1", "log(x)-x", 0.0, f64::INFINITY);
        let cp = p.critical_point().unwrap();
        let r = integrate_scaled(&p, &cp, 1).unwrap();
        // I_1 = 1!/1^2
        assert!(r.value.log_mag.abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn quartic_substitution() {
        let p = ps("1", "-x^4", f64::NEG_INFINITY, f64::INFINITY);
        let cp = p.critical_point().unwrap();
        let r = integrate_scaled(&p, &cp, 16).unwrap();
        // Γ(1/4)/4, Γ(1/4) = 3.625609908221908...
        let expected = 3.625_609_908_221_908_3_f64 / 4.0;
        assert!((r.value.to_f64().unwrap() - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn ratio_table_rejects_unsorted() {
        let p = ps("1", "-x^2", f64::NEG_INFINITY, f64::INFINITY);
        let cp = p.critical_point().unwrap();
        assert!(ratio_table(&p, &cp, &[4, 1]).is_err());
        assert!(ratio_table(&p, &cp, &[]).is_err());
    }
}
