//! Closed-form Schwartz test functions.
//!
//! Two leaf families are provided:
//!
//! * Gauss–Hermite functions `P((x-c)/w) exp(-pi ((x-c)/w)^2) exp(2 pi i xi x)`,
//!   closed under differentiation and under the Fourier transform
//!   `f^(y) = ∫ f(x) exp(-2 pi i x y) dx`;
//! * radial bumps equal to `amplitude` on `|x-c| <= inner`, vanishing on
//!   `|x-c| >= outer`, with the smooth step
//!   `s(u) = g(1-u) / (g(u) + g(1-u))`, `g(u) = exp(-1/u)` for `u > 0`.
//!
//! Bump derivatives are evaluated with truncated Taylor arithmetic, which is the
//! chain rule applied exactly up to rounding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Highest derivative order supported for every variant.
pub const MAX_DERIVATIVE_ORDER: usize = 8;

/// Identifier of the bump profile, recorded next to serialized functions.
pub const BUMP_PROFILE: &str = "smoothstep-exp: s(u)=g(1-u)/(g(u)+g(1-u)), g(u)=exp(-1/u)";

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussHermite {
    /// Coefficients of `P(u)` in increasing degree.
    pub poly: Vec<Complex64>,
    pub center: f64,
    pub width: f64,
    pub modulation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub inner: f64,
    pub outer: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    GaussHermite(GaussHermite),
    Bump(Bump),
    FiniteSum { terms: Vec<TestFunction> },
}

/// A test function together with the bump profile it was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionDocument {
    pub profile: String,
    pub function: TestFunction,
}

impl TestFunctionDocument {
    pub fn new(function: TestFunction) -> Self {
        Self {
            profile: BUMP_PROFILE.to_string(),
            function,
        }
    }

    pub fn into_function(self) -> Result<TestFunction> {
        if self.profile != BUMP_PROFILE {
            return Err(Error::InvalidTestFunction(format!(
                "unknown bump profile {:?}",
                self.profile
            )));
        }
        self.function.validated()
    }
}

// ---------------------------------------------------------------------------
// polynomials in u

fn poly_eval(p: &[Complex64], u: f64) -> Complex64 {
    p.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * u + c)
}

fn poly_deriv(p: &[Complex64]) -> Vec<Complex64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// `P' - 2 pi u P`: the polynomial part of `d/du [P(u) exp(-pi u^2)]`.
fn hermite_step(p: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); p.len() + 1];
    for (k, c) in poly_deriv(p).into_iter().enumerate() {
        out[k] += c;
    }
    for (k, &c) in p.iter().enumerate() {
        out[k + 1] -= c * (2.0 * PI);
    }
    trim(out)
}

fn trim(mut p: Vec<Complex64>) -> Vec<Complex64> {
    while p.len() > 1 && p.last().is_some_and(|c| c.norm() == 0.0) {
        p.pop();
    }
    if p.is_empty() {
        p.push(Complex64::new(0.0, 0.0));
    }
    p
}

/// `sum |p_k| u^k` for `u >= 0`, an upper bound of `|P(±u)|`.
fn poly_abs_bound(p: &[Complex64], u: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * u + c.norm())
}

impl GaussHermite {
    pub fn gaussian(center: f64, width: f64) -> Self {
        Self {
            poly: vec![Complex64::new(1.0, 0.0)],
            center,
            width,
            modulation: 0.0,
        }
    }

    pub fn modulated(mut self, frequency: f64) -> Self {
        self.modulation = frequency;
        self
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        for c in &mut self.poly {
            *c *= factor;
        }
        self
    }

    pub fn evaluate(&self, x: f64) -> Complex64 {
        let u = (x - self.center) / self.width;
        let g = (-PI * u * u).exp();
        if g == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let phase = 2.0 * PI * self.modulation * x;
        poly_eval(&self.poly, u) * g * Complex64::new(phase.cos(), phase.sin())
    }

    /// Exact first derivative, again of Gauss–Hermite form.
    pub fn derivative(&self) -> GaussHermite {
        let step = hermite_step(&self.poly);
        let mut poly: Vec<Complex64> = step.into_iter().map(|c| c / self.width).collect();
        if self.modulation != 0.0 {
            let m = I * (2.0 * PI * self.modulation);
            for (k, &c) in self.poly.iter().enumerate() {
                poly[k] += m * c;
            }
        }
        GaussHermite {
            poly: trim(poly),
            center: self.center,
            width: self.width,
            modulation: self.modulation,
        }
    }

    /// Exact transform under `f^(y) = ∫ f(x) exp(-2 pi i x y) dx`.
    pub fn fourier(&self) -> GaussHermite {
        // transform of u^k exp(-pi u^2) is q_k(v) exp(-pi v^2) with
        // q_{k+1} = (i / 2 pi) (q_k' - 2 pi v q_k)
        let mut q = vec![Complex64::new(1.0, 0.0)];
        let mut acc = vec![Complex64::new(0.0, 0.0); self.poly.len()];
        for (k, &p) in self.poly.iter().enumerate() {
            if k > 0 {
                q = hermite_step(&q)
                    .into_iter()
                    .map(|c| c * I / (2.0 * PI))
                    .collect();
            }
            if acc.len() < q.len() {
                acc.resize(q.len(), Complex64::new(0.0, 0.0));
            }
            for (j, &c) in q.iter().enumerate() {
                acc[j] += p * c;
            }
        }
        let phase = 2.0 * PI * self.center * self.modulation;
        let factor = Complex64::new(phase.cos(), phase.sin()) * self.width;
        GaussHermite {
            poly: trim(acc.into_iter().map(|c| c * factor).collect()),
            center: self.modulation,
            width: 1.0 / self.width,
            modulation: -self.center,
        }
    }

    /// Smallest `U >= 0` (on a quarter grid) past which `|P(u)| exp(-pi u^2) < tol`.
    fn decay_radius(&self, tol: f64) -> f64 {
        let deg = self.poly.len() as f64;
        let turn = (deg / (2.0 * PI)).sqrt().max(1.0);
        let mut u = turn;
        while poly_abs_bound(&self.poly, u) * (-PI * u * u).exp() >= tol {
            u += 0.25;
        }
        u
    }

    /// Upper estimate of `sup_{|u| >= u0} |P(u)| exp(-pi u^2)`.
    fn envelope(&self, u0: f64) -> f64 {
        let turn = (self.poly.len() as f64 / (2.0 * PI)).sqrt().max(1.0);
        if u0 >= turn {
            return poly_abs_bound(&self.poly, u0) * (-PI * u0 * u0).exp();
        }
        let mut best: f64 = 0.0;
        let mut u = u0;
        while u <= turn {
            best = best.max(poly_abs_bound(&self.poly, u) * (-PI * u * u).exp());
            u += 1e-3;
        }
        best.max(poly_abs_bound(&self.poly, turn) * (-PI * turn * turn).exp())
    }
}

// ---------------------------------------------------------------------------
// truncated Taylor series for the bump profile

type Jet = [f64; MAX_DERIVATIVE_ORDER + 1];

fn jet_recip(a: &Jet) -> Jet {
    let mut b = [0.0; MAX_DERIVATIVE_ORDER + 1];
    b[0] = 1.0 / a[0];
    for k in 1..=MAX_DERIVATIVE_ORDER {
        let s: f64 = (1..=k).map(|j| a[j] * b[k - j]).sum();
        b[k] = -s / a[0];
    }
    b
}

fn jet_exp(a: &Jet) -> Jet {
    let mut b = [0.0; MAX_DERIVATIVE_ORDER + 1];
    b[0] = a[0].exp();
    for k in 1..=MAX_DERIVATIVE_ORDER {
        let s: f64 = (1..=k).map(|j| j as f64 * a[j] * b[k - j]).sum();
        b[k] = s / k as f64;
    }
    b
}

impl Bump {
    pub fn new(center: f64, inner: f64, outer: f64, amplitude: f64) -> Result<Self> {
        let b = Self {
            center,
            inner,
            outer,
            amplitude,
        };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        if !(0.0 < self.inner && self.inner < self.outer) {
            return Err(Error::InvalidTestFunction(format!(
                "bump needs 0 < inner < outer, got inner={} outer={}",
                self.inner, self.outer
            )));
        }
        Ok(())
    }

    /// Derivatives `0..=order` at `x`.
    pub fn derivatives(&self, x: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        let r = (x - self.center).abs();
        if r <= self.inner {
            out[0] = self.amplitude;
            return out;
        }
        if r >= self.outer {
            return out;
        }
        let span = self.outer - self.inner;
        let u0 = (r - self.inner) / span;
        let slope = if x >= self.center { 1.0 } else { -1.0 } / span;
        let mut one_minus_u = [0.0; MAX_DERIVATIVE_ORDER + 1];
        one_minus_u[0] = 1.0 - u0;
        one_minus_u[1] = -slope;
        let mut u = [0.0; MAX_DERIVATIVE_ORDER + 1];
        u[0] = u0;
        u[1] = slope;
        let a = jet_recip(&one_minus_u);
        let b = jet_recip(&u);
        let mut e = [0.0; MAX_DERIVATIVE_ORDER + 1];
        for k in 0..=MAX_DERIVATIVE_ORDER {
            e[k] = a[k] - b[k];
        }
        // s = 1 / (1 + exp(E)); outside the float range every derivative is negligible
        if e[0] > 700.0 {
            return out;
        }
        if e[0] < -700.0 {
            out[0] = self.amplitude;
            return out;
        }
        let mut den = jet_exp(&e);
        den[0] += 1.0;
        let s = jet_recip(&den);
        let mut fact = 1.0;
        for k in 0..=order {
            if k > 0 {
                fact *= k as f64;
            }
            out[k] = self.amplitude * s[k] * fact;
        }
        out
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.derivatives(x, 0)[0]
    }
}

// ---------------------------------------------------------------------------

impl TestFunction {
    pub fn gaussian(center: f64, width: f64) -> Self {
        TestFunction::GaussHermite(GaussHermite::gaussian(center, width))
    }

    /// The standard Gaussian `exp(-pi x^2)`, its own transform.
    pub fn standard_gaussian() -> Self {
        Self::gaussian(0.0, 1.0)
    }

    pub fn bump(center: f64, inner: f64, outer: f64, amplitude: f64) -> Result<Self> {
        Ok(TestFunction::Bump(Bump::new(center, inner, outer, amplitude)?))
    }

    /// Flattened finite sum; nested sums are spliced in.
    pub fn sum(terms: Vec<TestFunction>) -> Self {
        let mut flat = Vec::new();
        for t in terms {
            match t {
                TestFunction::FiniteSum { terms } => flat.extend(terms),
                leaf => flat.push(leaf),
            }
        }
        TestFunction::FiniteSum { terms: flat }
    }

    /// Checks the variant invariants (also flattens nested sums).
    pub fn validated(self) -> Result<Self> {
        match self {
            TestFunction::GaussHermite(ref g) => {
                if !(g.width > 0.0 && g.width.is_finite()) || g.poly.is_empty() {
                    return Err(Error::InvalidTestFunction(format!(
                        "Gauss-Hermite width must be positive, got {}",
                        g.width
                    )));
                }
                Ok(self)
            }
            TestFunction::Bump(b) => {
                b.check()?;
                Ok(self)
            }
            TestFunction::FiniteSum { terms } => {
                let terms = terms
                    .into_iter()
                    .map(|t| t.validated())
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::sum(terms))
            }
        }
    }

    pub fn leaves(&self) -> Vec<&TestFunction> {
        match self {
            TestFunction::FiniteSum { terms } => terms.iter().collect(),
            leaf => vec![leaf],
        }
    }

    pub fn evaluate(&self, x: f64) -> Complex64 {
        match self {
            TestFunction::GaussHermite(g) => g.evaluate(x),
            TestFunction::Bump(b) => Complex64::new(b.evaluate(x), 0.0),
            TestFunction::FiniteSum { terms } => terms.iter().map(|t| t.evaluate(x)).sum(),
        }
    }

    /// Derivative of the given order: symbolic for Gauss–Hermite leaves, an
    /// evaluator otherwise.
    pub fn derivative(&self, order: usize) -> Result<Derivative> {
        check_order(order)?;
        if self.leaves().iter().all(|l| matches!(l, TestFunction::GaussHermite(_))) {
            let mut leaves = Vec::new();
            for l in self.leaves() {
                if let TestFunction::GaussHermite(g) = l {
                    let mut d = g.clone();
                    for _ in 0..order {
                        d = d.derivative();
                    }
                    leaves.push(TestFunction::GaussHermite(d));
                }
            }
            let f = if leaves.len() == 1 && !matches!(self, TestFunction::FiniteSum { .. }) {
                leaves.pop().unwrap()
            } else {
                TestFunction::sum(leaves)
            };
            return Ok(Derivative::Symbolic(f));
        }
        Ok(Derivative::Evaluator {
            function: self.clone(),
            order,
        })
    }

    /// `f^(k)(x)`.
    pub fn derivative_at(&self, x: f64, order: usize) -> Result<Complex64> {
        check_order(order)?;
        Ok(DerivativeTable::new(self, order).at(x)[order])
    }

    pub fn fourier(&self) -> Result<TestFunction> {
        match self {
            TestFunction::GaussHermite(g) => Ok(TestFunction::GaussHermite(g.fourier())),
            TestFunction::Bump(_) => Err(Error::NoClosedFormTransform("bump leaf")),
            TestFunction::FiniteSum { terms } => Ok(TestFunction::sum(
                terms.iter().map(|t| t.fourier()).collect::<Result<Vec<_>>>()?,
            )),
        }
    }

    /// Disjoint intervals outside of which `|f| < tol`.
    pub fn support_hull(&self, tol: f64) -> Vec<(f64, f64)> {
        let mut iv: Vec<(f64, f64)> = self
            .leaves()
            .iter()
            .map(|l| match l {
                TestFunction::GaussHermite(g) => {
                    let u = g.decay_radius(tol);
                    (g.center - g.width * u, g.center + g.width * u)
                }
                TestFunction::Bump(b) => (b.center - b.outer, b.center + b.outer),
                TestFunction::FiniteSum { .. } => unreachable!("sums are flat"),
            })
            .collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in iv {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        merged
    }

    /// Upper estimate of `sup_{|x| >= radius} |f^(order)(x)|`, used for
    /// truncation bounds of series over windows.
    pub fn envelope_beyond(&self, radius: f64, order: usize) -> Result<f64> {
        check_order(order)?;
        let mut total = 0.0;
        for l in self.leaves() {
            total += match l {
                TestFunction::GaussHermite(g) => {
                    let mut d = g.clone();
                    for _ in 0..order {
                        d = d.derivative();
                    }
                    let u0 = ((radius - d.center.abs()) / d.width).max(0.0);
                    d.envelope(u0)
                }
                TestFunction::Bump(b) => {
                    if radius >= b.center.abs() + b.outer {
                        0.0
                    } else {
                        bump_sup(b, order)
                    }
                }
                TestFunction::FiniteSum { .. } => unreachable!("sums are flat"),
            };
        }
        Ok(total)
    }

    /// Numerical `N_{n,m}(f) = sup_x max{1,|x|^n} max_{k<=m} |f^(k)(x)|`.
    pub fn seminorm(&self, n: u32, m: usize) -> Result<f64> {
        if n > 6 || m > 4 {
            return Err(Error::Unsupported(format!(
                "seminorm N_{{{n},{m}}} (n <= 6, m <= 4)"
            )));
        }
        let table = DerivativeTable::new(self, m);
        let weighted = |x: f64| -> f64 {
            let w = x.abs().powi(n as i32).max(1.0);
            table
                .at(x)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
                * w
        };
        let mut best: f64 = 0.0;
        for (lo, hi) in self.support_hull(1e-30) {
            best = best.max(interval_sup(&weighted, lo, hi));
        }
        Ok(best)
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::Unsupported(format!(
            "derivative order {order} > {MAX_DERIVATIVE_ORDER}"
        )));
    }
    Ok(())
}

fn bump_sup(b: &Bump, order: usize) -> f64 {
    if order == 0 {
        return b.amplitude.abs();
    }
    let f = |x: f64| b.derivatives(x, order)[order].abs();
    interval_sup(&f, b.center + b.inner, b.center + b.outer)
}

/// Sup of a continuous function on `[lo, hi]`: grid doubling until the maximum
/// stabilises to 1e-6 relative, then zoom refinement around the best node.
fn interval_sup(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let scan = |count: usize| -> (f64, f64) {
        let step = (hi - lo) / count as f64;
        (0..=count)
            .map(|i| {
                let x = lo + step * i as f64;
                (f(x), x)
            })
            .fold((0.0, lo), |a, b| if b.0 > a.0 { b } else { a })
    };
    let mut count = 2048;
    let mut best = scan(count).0;
    let mut arg;
    loop {
        count *= 2;
        let (b, a) = scan(count);
        let stable = (b - best).abs() <= 1e-6 * b.abs().max(f64::MIN_POSITIVE);
        best = b;
        arg = a;
        if stable || count >= 1 << 17 {
            break;
        }
    }
    let mut half = (hi - lo) / count as f64;
    for _ in 0..30 {
        let step = half / 8.0;
        for i in -8..=8 {
            let x = (arg + step * i as f64).clamp(lo, hi);
            let v = f(x);
            if v > best {
                best = v;
                arg = x;
            }
        }
        half /= 4.0;
    }
    best
}

/// Derivatives `0..=order` of a test function, precomputed per leaf.
pub struct DerivativeTable {
    order: usize,
    leaves: Vec<LeafDerivatives>,
}

enum LeafDerivatives {
    Symbolic(Vec<GaussHermite>),
    Bump(Bump),
}

impl DerivativeTable {
    pub fn new(f: &TestFunction, order: usize) -> Self {
        let leaves = f
            .leaves()
            .into_iter()
            .map(|l| match l {
                TestFunction::GaussHermite(g) => {
                    let mut ds = vec![g.clone()];
                    for k in 0..order {
                        let next = ds[k].derivative();
                        ds.push(next);
                    }
                    LeafDerivatives::Symbolic(ds)
                }
                TestFunction::Bump(b) => LeafDerivatives::Bump(*b),
                TestFunction::FiniteSum { .. } => unreachable!("sums are flat"),
            })
            .collect();
        Self { order, leaves }
    }

    pub fn at(&self, x: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.order + 1];
        for leaf in &self.leaves {
            match leaf {
                LeafDerivatives::Symbolic(ds) => {
                    for (k, d) in ds.iter().enumerate() {
                        out[k] += d.evaluate(x);
                    }
                }
                LeafDerivatives::Bump(b) => {
                    for (k, v) in b.derivatives(x, self.order).into_iter().enumerate() {
                        out[k] += v;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Derivative {
    Symbolic(TestFunction),
    Evaluator { function: TestFunction, order: usize },
}

impl Derivative {
    pub fn evaluate(&self, x: f64) -> Complex64 {
        match self {
            Derivative::Symbolic(f) => f.evaluate(x),
            Derivative::Evaluator { function, order } => {
                DerivativeTable::new(function, *order).at(x)[*order]
            }
        }
    }
}
