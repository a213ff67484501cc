use super::{BinOp, DomainError, Expr, Func};

/// Truncated Taylor series about `center`: `coeffs[j] = f^(j)(center) / j!`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub center: f64,
    pub coeffs: Vec<f64>,
}

impl Jet {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `j`-th derivative, `coeffs[j] * j!`.
    pub fn derivative(&self, j: usize) -> f64 {
        let fact: f64 = (2..=j).map(|i| i as f64).product();
        self.coeffs[j] * fact
    }

    pub fn truncate(&self, order: usize) -> Jet {
        Jet {
            center: self.center,
            coeffs: self.coeffs[..=order.min(self.order())].to_vec(),
        }
    }
}

type Coeffs = Vec<f64>;

pub(super) fn eval_jet(f: &Expr, center: f64, order: usize) -> Result<Jet, DomainError> {
    let coeffs = walk(f, center, order + 1)?;
    Ok(Jet { center, coeffs })
}

fn constant(v: f64, len: usize) -> Coeffs {
    let mut c = vec![0.0; len];
    c[0] = v;
    c
}

fn walk(f: &Expr, x0: f64, len: usize) -> Result<Coeffs, DomainError> {
    Ok(match f {
        Expr::Num(v) => constant(*v, len),
        Expr::X => {
            let mut c = constant(x0, len);
            if len > 1 {
                c[1] = 1.0;
            }
            c
        }
        Expr::Neg(a) => walk(a, x0, len)?.into_iter().map(|v| -v).collect(),
        Expr::Call(func, a) => {
            let u = walk(a, x0, len)?;
            match func {
                Func::Exp => exp(&u),
                Func::Log => {
                    if !(u[0] > 0.0) {
                        return Err(DomainError { node: "log", argument: u[0] });
                    }
                    log(&u)
                }
                Func::Sqrt => {
                    // The derivative of sqrt is unbounded at zero.
                    if u[0] < 0.0 || u[0].is_nan() || (u[0] == 0.0 && len > 1) {
                        return Err(DomainError { node: "sqrt", argument: u[0] });
                    }
                    sqrt(&u)
                }
                Func::Sin => sin_cos(&u).0,
                Func::Cos => sin_cos(&u).1,
            }
        }
        Expr::Binary(op, a, b) => {
            if *op == BinOp::Pow {
                return pow(a, b, x0, len);
            }
            let u = walk(a, x0, len)?;
            let v = walk(b, x0, len)?;
            match op {
                BinOp::Add => u.iter().zip(&v).map(|(p, q)| p + q).collect(),
                BinOp::Sub => u.iter().zip(&v).map(|(p, q)| p - q).collect(),
                BinOp::Mul => mul(&u, &v),
                BinOp::Div => {
                    if v[0] == 0.0 {
                        return Err(DomainError { node: "/", argument: u[0] });
                    }
                    div(&u, &v)
                }
                BinOp::Pow => unreachable!(),
            }
        }
    })
}

/// Cauchy product truncated to the common length.
fn mul(u: &[f64], v: &[f64]) -> Coeffs {
    (0..u.len())
        .map(|k| (0..=k).map(|j| u[j] * v[k - j]).sum())
        .collect()
}

fn div(u: &[f64], v: &[f64]) -> Coeffs {
    let mut c: Coeffs = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        let s: f64 = (1..=k).map(|j| v[j] * c[k - j]).sum();
        c.push((u[k] - s) / v[0]);
    }
    c
}

fn exp(u: &[f64]) -> Coeffs {
    let mut e: Coeffs = Vec::with_capacity(u.len());
    e.push(u[0].exp());
    for k in 1..u.len() {
        let s: f64 = (1..=k).map(|j| j as f64 * u[j] * e[k - j]).sum();
        e.push(s / k as f64);
    }
    e
}

fn log(u: &[f64]) -> Coeffs {
    let mut l: Coeffs = Vec::with_capacity(u.len());
    l.push(u[0].ln());
    for k in 1..u.len() {
        let s: f64 = (1..k).map(|j| j as f64 * l[j] * u[k - j]).sum();
        l.push((u[k] - s / k as f64) / u[0]);
    }
    l
}

fn sqrt(u: &[f64]) -> Coeffs {
    let mut r: Coeffs = Vec::with_capacity(u.len());
    r.push(u[0].sqrt());
    for k in 1..u.len() {
        let s: f64 = (1..k).map(|j| r[j] * r[k - j]).sum();
        r.push((u[k] - s) / (2.0 * r[0]));
    }
    r
}

fn sin_cos(u: &[f64]) -> (Coeffs, Coeffs) {
    let n = u.len();
    let mut s = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    s.push(u[0].sin());
    c.push(u[0].cos());
    for k in 1..n {
        let mut ss = 0.0;
        let mut cs = 0.0;
        for j in 1..=k {
            let w = j as f64 * u[j];
            ss += w * c[k - j];
            cs += w * s[k - j];
        }
        s.push(ss / k as f64);
        c.push(-cs / k as f64);
    }
    (s, c)
}

/// `u^p` for a constant real exponent and `u[0] > 0`.
fn powf(u: &[f64], p: f64) -> Coeffs {
    let mut r: Coeffs = Vec::with_capacity(u.len());
    r.push(u[0].powf(p));
    for k in 1..u.len() {
        let s: f64 = (1..=k)
            .map(|j| ((p + 1.0) * j as f64 - k as f64) * u[j] * r[k - j])
            .sum();
        r.push(s / (k as f64 * u[0]));
    }
    r
}

fn powi(u: &[f64], mut k: u64) -> Coeffs {
    let mut acc = constant(1.0, u.len());
    let mut base = u.to_vec();
    while k > 0 {
        if k & 1 == 1 {
            acc = mul(&acc, &base);
        }
        k >>= 1;
        if k > 0 {
            base = mul(&base, &base);
        }
    }
    acc
}

fn pow(a: &Expr, b: &Expr, x0: f64, len: usize) -> Result<Coeffs, DomainError> {
    let u = walk(a, x0, len)?;
    if let Some(p) = b.constant_value() {
        if p.fract() == 0.0 && p.abs() < 1e9 {
            let k = p.abs() as u64;
            let r = powi(&u, k);
            if p >= 0.0 {
                return Ok(r);
            }
            if r[0] == 0.0 {
                return Err(DomainError { node: "pow", argument: u[0] });
            }
            return Ok(div(&constant(1.0, len), &r));
        }
        if u[0] < 0.0 || (u[0] == 0.0 && len > 1) || u[0].is_nan() {
            return Err(DomainError { node: "pow", argument: u[0] });
        }
        return Ok(powf(&u, p));
    }
    // Variable exponent: u^v = exp(v log u).
    if !(u[0] > 0.0) {
        return Err(DomainError { node: "pow", argument: u[0] });
    }
    let v = walk(b, x0, len)?;
    Ok(exp(&mul(&v, &log(&u))))
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn coeffs(s: &str, c: f64, k: usize) -> Vec<f64> {
        parse(s).unwrap().jet(c, k).unwrap().coeffs
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn exp_series() {
        let c = coeffs("exp(x)", 0.0, 3);
        assert!(close(&c, &[1.0, 1.0, 0.5, 1.0 / 6.0], 1e-16), "{c:?}");
    }

    #[test]
    fn log_minus_x_at_one() {
        let c = coeffs("log(x)-x", 1.0, 2);
        assert!(close(&c, &[-1.0, 0.0, -0.5], 1e-16), "{c:?}");
    }

    #[test]
    fn square_at_five() {
        assert_eq!(coeffs("x^2", 5.0, 4), vec![25.0, 10.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn sqrt_and_fractional_power_agree() {
        let a = coeffs("sqrt(x)", 2.0, 6);
        let b = coeffs("x^0.5", 2.0, 6);
        assert!(close(&a, &b, 1e-15));
    }

    #[test]
    fn variable_exponent() {
        // x^x at 1: value 1, first derivative 1, second derivative 2.
        let j = parse("x^x").unwrap().jet(1.0, 2).unwrap();
        assert!((j.derivative(1) - 1.0).abs() < 1e-15);
        assert!((j.derivative(2) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sin_cos_series() {
        let s = coeffs("sin(x)", 0.0, 5);
        assert!(close(&s, &[0.0, 1.0, 0.0, -1.0 / 6.0, 0.0, 1.0 / 120.0], 1e-16));
        let c = coeffs("cos(2*x)", 0.0, 4);
        assert!(close(&c, &[1.0, 0.0, -2.0, 0.0, 2.0 / 3.0], 1e-15));
    }

    #[test]
    fn quotient_and_negative_power() {
        let a = coeffs("1/(1-x)", 0.0, 6);
        assert!(close(&a, &[1.0; 7], 1e-15));
        let b = coeffs("(1-x)^-1", 0.0, 6);
        assert!(close(&a, &b, 1e-15));
    }

    #[test]
    fn sqrt_at_zero_is_domain_error() {
        assert!(parse("sqrt(x)").unwrap().jet(0.0, 1).is_err());
        assert!(parse("sqrt(x)").unwrap().jet(0.0, 0).is_ok());
    }

    #[test]
    fn even_powers_of_x_have_factorial_derivatives() {
        for k in 1..=4u32 {
            let f = parse(&format!("-x^{}", 2 * k)).unwrap();
            let fact: f64 = (1..=2 * k).map(|i| i as f64).product();
            assert_eq!(f.derivative(0.0, 2 * k as usize).unwrap(), -fact);
        }
    }
}
