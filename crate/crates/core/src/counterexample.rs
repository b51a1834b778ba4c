//! The unbounded-convolution construction: a finite range of shifted periodic
//! combs `ν = Σ_n τ_n^{-2/3} (σ_{M_n}^{2τ_n} - σ_{M_n}^{τ_n})`, witness locations
//! `λ_n`, the bump sum `ψ` and the certificate that `S(t) = ν(ψ e^{-2πixt})`
//! grows like `τ_n^{-1/3}` along `t_n = 1/(2τ_n)`.
//!
//! Locations, shifts and evaluation points are exact dyadic rationals, so every
//! phase is reduced modulo one before a float is formed.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::distribution::{Atom, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::exact::{
    cis_neg_turns, int, pi_bounds, pow2, pow2_third_bounds, rat, serde_rational, to_f64,
    Rational, Real,
};
use crate::periodic::{construct_sigma, MassPolicy, Sigma};
use crate::schwartz::TestFunction;
use crate::sum::ComplexSum;

/// Selected atoms must carry at least this fraction of the largest mass.
pub const MASS_FLOOR: f64 = 1e-3;

const SCAN_LIMIT: u64 = 1_000_000;

// ---------------------------------------------------------------------------
// τ rule

/// Integer polynomial `a(n)`; `τ_n = 2^{-a(n)}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauRule {
    /// Coefficients in increasing degree.
    pub coefficients: Vec<i64>,
}

impl TauRule {
    pub fn exponent(&self, n: u32) -> i64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0i64, |acc, &c| acc * n as i64 + c)
    }

    fn degree(&self) -> usize {
        self.coefficients
            .iter()
            .rposition(|&c| c != 0)
            .unwrap_or(0)
    }
}

impl Default for TauRule {
    fn default() -> Self {
        Self {
            coefficients: vec![1, 3, 1],
        }
    }
}

impl FromStr for TauRule {
    type Err = Error;

    /// Accepts sums of terms `c`, `c*n`, `cn`, `n^k`, `c*n^k` with signs.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Parse(format!("tau rule {s:?}: {why}"));
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(bad("empty"));
        }
        let mut coefficients = vec![0i64; 1];
        let mut rest = t.as_str();
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'+' => (1, &rest[1..]),
                b'-' => (-1, &rest[1..]),
                _ => (1, rest),
            };
            let end = body.find(['+', '-']).unwrap_or(body.len());
            let term = &body[..end];
            rest = &body[end..];
            if term.is_empty() {
                return Err(bad("dangling sign"));
            }
            let (coef, degree) = match term.find('n') {
                None => (term.parse::<i64>().map_err(|_| bad("bad constant"))?, 0usize),
                Some(i) => {
                    let c = term[..i].trim_end_matches('*');
                    let c = if c.is_empty() {
                        1
                    } else {
                        c.parse::<i64>().map_err(|_| bad("bad coefficient"))?
                    };
                    let after = &term[i + 1..];
                    let d = if after.is_empty() {
                        1
                    } else if let Some(e) = after.strip_prefix('^') {
                        e.parse::<usize>().map_err(|_| bad("bad exponent"))?
                    } else {
                        return Err(bad("unexpected text after n"));
                    };
                    (c, d)
                }
            };
            if degree > 6 {
                return Err(bad("degree above 6"));
            }
            if coefficients.len() <= degree {
                coefficients.resize(degree + 1, 0);
            }
            coefficients[degree] += sign * coef;
        }
        Ok(Self { coefficients })
    }
}

impl fmt::Display for TauRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (d, &c) in self.coefficients.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let sign = if c < 0 { "-" } else if first { "" } else { "+" };
            let a = c.abs();
            let coef = if a == 1 && d > 0 { String::new() } else { a.to_string() };
            let var = match d {
                0 => String::new(),
                1 => "n".into(),
                _ => format!("n^{d}"),
            };
            write!(f, "{sign}{coef}{var}")?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl Serialize for TauRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TauRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// configuration and τ checks

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    pub n0: u32,
    pub n_max: u32,
    pub base: u64,
    #[serde(with = "serde_rational")]
    pub alpha: Rational,
    pub tau_rule: TauRule,
    pub mass_policy: MassPolicy,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            n0: 2,
            n_max: 4,
            base: 16,
            alpha: rat(1, 8),
            tau_rule: TauRule::default(),
            mass_policy: MassPolicy::Translate,
        }
    }
}

impl CounterexampleConfig {
    pub fn range(&self) -> std::ops::RangeInclusive<u32> {
        self.n0..=self.n_max
    }

    pub fn modulus_m(&self, n: u32) -> Result<u64> {
        self.base
            .checked_pow(n)
            .filter(|&m| m <= 1 << 20)
            .ok_or_else(|| Error::OutOfRange(format!("M_{n} = {}^{n} above 2^20", self.base)))
    }

    pub fn tau(&self, n: u32) -> Rational {
        pow2(-self.tau_rule.exponent(n))
    }

    fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n_max < self.n0 {
            return Err(Error::OutOfRange(format!(
                "index range {}..={} must be nonempty and start at 1 or later",
                self.n0, self.n_max
            )));
        }
        if self.base < 16 {
            return Err(Error::OutOfRange(format!("base {} below 16", self.base)));
        }
        for n in self.range() {
            self.modulus_m(n)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub n: Option<u32>,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, n: Option<u32>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            n,
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub exponents: Vec<(u32, i64)>,
    pub checks: Vec<Check>,
    pub first_violation: Option<String>,
    pub passed: bool,
}

/// Upper bound of `Σ_{p in ps} 2^{k a_p / 3}` with `k = ±1, ±2`.
fn sum_pow_third_hi(ks: impl Iterator<Item = i64>) -> Rational {
    ks.map(|k| pow2_third_bounds(k).1)
        .fold(Rational::zero(), |a, b| a + b)
}

/// Exponents `a_n` over the range and the inequalities the certificate needs,
/// each decided in exact rational arithmetic.
pub fn choose_tau(config: &CounterexampleConfig) -> Result<TauReport> {
    config.validate()?;
    let rule = &config.tau_rule;
    let a = |n: u32| rule.exponent(n);
    let range: Vec<u32> = config.range().collect();
    let exponents: Vec<(u32, i64)> = range.iter().map(|&n| (n, a(n))).collect();
    let mut checks = Vec::new();

    for w in range.windows(2) {
        let ok = a(w[1]) > a(w[0]);
        checks.push(Check::new(
            "a_n strictly increasing",
            Some(w[1]),
            ok,
            format!("a_{} = {}, a_{} = {}", w[0], a(w[0]), w[1], a(w[1])),
        ));
    }

    // (s1): Σ_{p<n} τ_p^{-1/3} < τ_n^{-1/3} / 3
    for &n in &range {
        let lhs = sum_pow_third_hi(range.iter().filter(|&&p| p < n).map(|&p| a(p)));
        let rhs = pow2_third_bounds(a(n)).0 / int(3);
        checks.push(Check::new(
            "s1",
            Some(n),
            lhs < rhs,
            format!("sum_(p<n) tau_p^(-1/3) <= {:.6e} vs tau_n^(-1/3)/3 >= {:.6e}", to_f64(&lhs), to_f64(&rhs)),
        ));
    }

    // (s2): Σ_{p>n} τ_p^{2/3} < (2/(3π)) τ_n^{2/3}, the tail p > n_max by a geometric bound
    let tail = s2_tail_bound(config);
    for &n in &range {
        let finite = sum_pow_third_hi(range.iter().filter(|&&p| p > n).map(|&p| -2 * a(p)));
        let (ok, detail) = match &tail {
            Some(t) => {
                let lhs = finite + t;
                let rhs = pow2_third_bounds(-2 * a(n)).0 * int(2) / (int(3) * pi_bounds().1);
                (
                    lhs < rhs,
                    format!("sum_(p>n) tau_p^(2/3) <= {:.6e} vs 2/(3 pi) tau_n^(2/3) >= {:.6e}", to_f64(&lhs), to_f64(&rhs)),
                )
            }
            None => (false, "no geometric tail bound: rule must be convex of degree <= 2 and increasing".into()),
        };
        checks.push(Check::new("s2", Some(n), ok, detail));
    }

    for &n in &range {
        let tau = config.tau(n);
        checks.push(Check::new(
            "tau_n < 1/16",
            Some(n),
            tau < rat(1, 16),
            format!("tau_n = 2^-{}", a(n)),
        ));
    }

    // sufficient for τ_n < 1/(3 λ_n) because λ_n < 2 M_n; re-checked once λ_n is known
    for &n in &range {
        let m = config.modulus_m(n)?;
        let ok = config.tau(n) * int(6) * int(m as i64) < int(1);
        checks.push(Check::new(
            "tau_n < 1/(6 M_n)",
            Some(n),
            ok,
            format!("tau_n = 2^-{}, M_n = {m}", a(n)),
        ));
    }

    // (g) on the range: log τ_n / log λ_n and log τ_n / n both decrease strictly
    let lb = (config.base as f64).log2();
    for w in range.windows(2) {
        let r = |n: u32| a(n) as f64 / (1.0 + n as f64 * lb);
        let q = |n: u32| a(n) as f64 / n as f64;
        let ok = r(w[1]) > r(w[0]) && q(w[1]) > q(w[0]);
        checks.push(Check::new(
            "g on range",
            Some(w[1]),
            ok,
            format!(
                "a_n/log2(2M_n): {:.4} -> {:.4}; a_n/n: {:.4} -> {:.4}",
                r(w[0]),
                r(w[1]),
                q(w[0]),
                q(w[1])
            ),
        ));
    }

    let first_violation = checks.iter().find(|c| !c.passed).map(|c| match c.n {
        Some(n) => format!("{} fails at n = {n}: {}", c.name, c.detail),
        None => format!("{} fails: {}", c.name, c.detail),
    });
    Ok(TauReport {
        exponents,
        passed: first_violation.is_none(),
        first_violation,
        checks,
    })
}

/// `Σ_{p > n_max} 2^{-2 a_p/3}` bounded by a geometric series: for a convex rule
/// the increments `a_{p+1} - a_p` never drop below `g = a_{n_max+2} - a_{n_max+1}`.
fn s2_tail_bound(config: &CounterexampleConfig) -> Option<Rational> {
    let rule = &config.tau_rule;
    let deg = rule.degree();
    let convex = deg <= 1 || (deg == 2 && rule.coefficients[2] > 0);
    if !convex {
        return None;
    }
    let n1 = config.n_max + 1;
    let g = rule.exponent(n1 + 1) - rule.exponent(n1);
    if g <= 0 {
        return None;
    }
    let first = pow2_third_bounds(-2 * rule.exponent(n1)).1;
    let ratio = pow2_third_bounds(-2 * g).1;
    Some(first / (int(1) - ratio))
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSummary {
    #[serde(rename = "M")]
    pub m: u64,
    pub construction: String,
    /// Hole residual of the spectrum: absolute after max-normalisation when
    /// materialized, relative to `Σ|c_j|` on sampled frequencies otherwise.
    pub spectrum_residual: f64,
    pub residual_kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub n: u32,
    #[serde(rename = "M")]
    pub m: u64,
    pub a: i64,
    #[serde(with = "serde_rational")]
    pub tau: Rational,
    pub sigma: SigmaSummary,
    pub j_prime: u64,
    #[serde(with = "serde_rational")]
    pub eta: Rational,
    #[serde(with = "serde_rational")]
    pub lambda: Rational,
    pub mass: Complex64,
    pub mass_modulus: f64,
    pub candidates_scanned: u64,
    pub foreign_points: u128,
    pub foreign_bound: u128,
    pub candidate_intervals: u128,
    pub tau_below_third_lambda: bool,
    pub local_restriction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiBump {
    #[serde(with = "serde_rational")]
    pub center: Rational,
    pub inner: f64,
    pub outer: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub n: u32,
    #[serde(with = "serde_rational")]
    pub t: Rational,
    /// `2 τ_n^{-1/3} |m_n|`.
    pub main_term: f64,
    pub cross_bound: f64,
    pub lower_bound: f64,
    pub s_modulus: f64,
    pub growth_ratio: Option<f64>,
    pub required_growth: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleBundle {
    pub config: CounterexampleConfig,
    pub tau_report: TauReport,
    pub records: Vec<IndexRecord>,
    pub psi: Vec<PsiBump>,
    pub witnesses: Vec<Witness>,
    /// Smallest starting index (same `n_max`) for which every check passes;
    /// `None` until [`smallest_passing_n0`] has been run or when the range fails.
    pub n0_reported: Option<u32>,
    pub verdict: String,
}

/// A bundle together with the comb handles it was built from.
pub struct Pipeline {
    pub bundle: CounterexampleBundle,
    pub sigmas: Vec<Sigma>,
}

fn weight(a: i64) -> f64 {
    // τ^{-1/3} = 2^{a/3}
    2f64.powf(a as f64 / 3.0)
}

fn dyadic_f64(e: i64) -> f64 {
    2f64.powi(e as i32)
}

fn sigma_summary(s: &Sigma) -> SigmaSummary {
    match s {
        Sigma::Materialized(p) => SigmaSummary {
            m: p.m,
            construction: p.construction.clone(),
            spectrum_residual: p.spectrum_residual,
            residual_kind: "absolute, full FFT".into(),
        },
        Sigma::Lazy(a) => SigmaSummary {
            m: a.m,
            construction: "closed-form".into(),
            spectrum_residual: a.spectrum_residual_relative,
            residual_kind: "relative to l1 norm, sampled hole frequencies".into(),
        },
    }
}

/// `I_{n,j} = (η - 1/(2η), η + 1/(2η))` with `η = M + j/M`.
pub fn candidate_interval(m: u64, j: u64) -> (Rational, Rational, Rational) {
    let eta = Rational::new(BigInt::from(m * m + j), BigInt::from(m));
    let half = Rational::one() / (&eta * int(2));
    (&eta - &half, &eta + &half, eta)
}

impl Pipeline {
    pub fn config(&self) -> &CounterexampleConfig {
        &self.bundle.config
    }

    fn index(&self, n: u32) -> usize {
        (n - self.bundle.config.n0) as usize
    }

    fn sigma(&self, n: u32) -> &Sigma {
        &self.sigmas[self.index(n)]
    }

    /// Shifts `τ_p, 2τ_p` of every other index in range.
    fn foreign_shifts(&self, n: u32) -> Vec<(u32, Rational)> {
        let c = self.config();
        c.range()
            .filter(|&p| p != n)
            .flat_map(|p| [(p, c.tau(p)), (p, c.tau(p) * int(2))])
            .collect()
    }

    /// Foreign atoms in `(lo, hi)`, counted by residue arithmetic.
    pub fn foreign_count(&self, n: u32, lo: &Rational, hi: &Rational) -> u128 {
        self.foreign_shifts(n)
            .iter()
            .map(|(p, s)| self.sigma(*p).count_in(s, lo, hi))
            .sum()
    }

    /// Independent check by direct enumeration of every integer index whose
    /// shifted location lies in `window`: does any foreign atom fall in `I_{n,j'}`?
    pub fn brute_force_disjoint(&self, n: u32, window: (&Rational, &Rational)) -> Result<bool> {
        let rec = &self.bundle.records[self.index(n)];
        let (lo, hi, _) = candidate_interval(rec.m, rec.j_prime);
        for (p, s) in self.foreign_shifts(n) {
            let sig = self.sigma(p);
            let mp = sig.m() as i128;
            let nn = sig.modulus() as i128;
            let y0 = to_i128(&((window.0 - &s) * int(mp as i64)).floor().to_integer());
            let y1 = to_i128(&((window.1 - &s) * int(mp as i64)).ceil().to_integer());
            if y1 - y0 > 100_000_000 {
                return Err(Error::WindowExceeded(format!(
                    "{} indices for M_{p}",
                    y1 - y0
                )));
            }
            for y in y0..=y1 {
                if !sig.in_support(y.rem_euclid(nn) as u64) {
                    continue;
                }
                let x = Rational::new(BigInt::from(y), BigInt::from(mp)) + &s;
                if x > lo && x < hi {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Atoms of the finite-range `ν` in `(lo, hi)`.
    pub fn assemble_nu(&self, lo: &Rational, hi: &Rational) -> Result<DiscreteDistribution> {
        let c = self.config();
        let reach = &c.alpha * int(c.base.pow(c.n_max + 1) as i64);
        if lo.abs() > reach || hi.abs() > reach {
            return Err(Error::WindowExceeded(format!(
                "({lo}, {hi}) leaves (-{reach}, {reach}), where the omitted indices start to contribute"
            )));
        }
        let radius = to_f64(&lo.abs()).max(to_f64(&hi.abs()));
        let mut total = DiscreteDistribution::new(radius.max(f64::MIN_POSITIVE), Vec::new())?;
        for n in c.range() {
            let tau = c.tau(n);
            let w = Complex64::new(dyadic_f64(2 * c.tau_rule.exponent(n)).cbrt(), 0.0);
            let s = self.sigma(n);
            let plus = s.shifted_window(&(&tau * int(2)), lo, hi, c.mass_policy)?;
            let minus = s.shifted_window(&tau, lo, hi, c.mass_policy)?;
            total = total.plus(&plus.scaled(w)).plus(&minus.scaled(-w));
        }
        Ok(total)
    }

    /// Window `|y| <= radius` of `μ`, the inverse transform of `ν`:
    /// `Σ_n τ_n^{-2/3} (e^{4πiτ_n y} - e^{2πiτ_n y}) σ̌_{M_n}(y)`.
    pub fn mu_window(&self, radius: f64) -> Result<DiscreteDistribution> {
        let c = self.config();
        if c.mass_policy != MassPolicy::Translate {
            return Err(Error::Unsupported("inverse transform needs translated masses".into()));
        }
        let reach = to_f64(&(&c.alpha * int(c.base.pow(c.n_max + 1) as i64)));
        if radius > reach {
            return Err(Error::WindowExceeded(format!("radius {radius} above {reach}")));
        }
        let mut atoms = Vec::new();
        for n in c.range() {
            let s = self.sigma(n);
            let m = s.m();
            // the spectral hole leaves nothing below α M_n
            if to_f64(&(&c.alpha * int(m as i64))) > radius {
                continue;
            }
            let Sigma::Materialized(p) = s else {
                return Err(Error::Unsupported(format!(
                    "spectrum of M_{n} = {m} is not materialized"
                )));
            };
            let tau = c.tau(n);
            let w = dyadic_f64(2 * c.tau_rule.exponent(n)).cbrt();
            let nn = p.modulus() as i64;
            let top = (radius * m as f64).floor() as i64;
            let hole = crate::periodic::hole_radius(m, &c.alpha)? as i64;
            for y in (-top..=top).filter(|y| y.abs() >= hole) {
                let chat = p.transform[(-y).rem_euclid(nn) as usize];
                if chat.norm() == 0.0 {
                    continue;
                }
                let x = rat(y, m as i64);
                let bracket = cis_neg_turns(&(-(&x * &tau) * int(2))) - cis_neg_turns(&-(&x * &tau));
                atoms.push(Atom::dirac(Real::Exact(x), chat / m as f64 * w * bracket));
            }
        }
        DiscreteDistribution::new(radius, atoms)
    }

    pub fn psi(&self) -> Result<TestFunction> {
        psi_from(&self.bundle.psi)
    }
}

fn to_i128(b: &BigInt) -> i128 {
    b.to_i128().expect("index fits in i128")
}

pub fn psi_from(bumps: &[PsiBump]) -> Result<TestFunction> {
    Ok(TestFunction::sum(
        bumps
            .iter()
            .map(|b| TestFunction::bump(to_f64(&b.center), b.inner, b.outer, b.amplitude))
            .collect::<Result<Vec<_>>>()?,
    ))
}

/// Smallest admissible `j` for index `n`, with scan statistics.
fn select_lambda(p: &Pipeline, n: u32) -> Result<(u64, u64)> {
    let c = p.config();
    let sig = p.sigma(n);
    let m = sig.m();
    let nn = m * m;
    let (j_lo, j_hi) = (nn / 8, 7 * nn / 8);
    let start = match sig {
        Sigma::Lazy(a) => a.mass_range_above(MASS_FLOOR).0.max(j_lo),
        Sigma::Materialized(_) => j_lo,
    };
    let shifts = p.foreign_shifts(n);
    let mut scanned = 0u64;
    for j in start..=j_hi {
        scanned += 1;
        if scanned > SCAN_LIMIT {
            break;
        }
        if sig.mass(j).norm() < MASS_FLOOR {
            if matches!(sig, Sigma::Lazy(_)) && j > nn / 4 {
                break;
            }
            continue;
        }
        let (lo, hi, _) = candidate_interval(m, j);
        if shifts
            .iter()
            .all(|(q, s)| p.sigma(*q).count_in(s, &lo, &hi) == 0)
        {
            return Ok((j, scanned));
        }
    }
    let occupancy = p.foreign_count(n, &int(m as i64), &int(2 * m as i64));
    Err(Error::SelectionFailed {
        n,
        detail: format!(
            "no admissible j after {scanned} candidates from {start}; {occupancy} foreign points in (M_n, 2M_n), base {}",
            c.base
        ),
    })
}

/// Runs every stage: τ checks, combs, selection, occupancy, ψ and witnesses.
pub fn run_pipeline(config: &CounterexampleConfig) -> Result<Pipeline> {
    let tau_report = choose_tau(config)?;
    if let Some(v) = &tau_report.first_violation {
        let n = tau_report
            .checks
            .iter()
            .find(|c| !c.passed)
            .and_then(|c| c.n)
            .unwrap_or(config.n0);
        return Err(Error::CertificateRejected {
            n,
            reason: v.clone(),
        });
    }
    let sigmas = config
        .range()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| construct_sigma(config.modulus_m(n)?, &config.alpha))
        .collect::<Result<Vec<_>>>()?;
    let mut pipeline = Pipeline {
        bundle: CounterexampleBundle {
            config: config.clone(),
            tau_report,
            records: Vec::new(),
            psi: Vec::new(),
            witnesses: Vec::new(),
            n0_reported: None,
            verdict: String::new(),
        },
        sigmas,
    };

    let picks = config
        .range()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| select_lambda(&pipeline, n))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (n, (j, scanned)) in config.range().zip(picks) {
        let sig = pipeline.sigma(n);
        let m = sig.m();
        let tau = config.tau(n);
        let (_, _, eta) = candidate_interval(m, j);
        let lambda = &eta + &tau;
        let mass = sig.mass(j);
        let mm = int(m as i64);
        let foreign_points = pipeline.foreign_count(n, &mm, &(&mm * int(2)));
        let msq = (m as u128) * (m as u128);
        records.push(IndexRecord {
            n,
            m,
            a: config.tau_rule.exponent(n),
            tau: tau.clone(),
            sigma: sigma_summary(sig),
            j_prime: j,
            eta,
            tau_below_third_lambda: &tau * &lambda * int(3) < int(1),
            lambda,
            mass,
            mass_modulus: mass.norm(),
            candidates_scanned: scanned,
            foreign_points,
            foreign_bound: 2 * msq / (config.base as u128 - 1),
            candidate_intervals: 7 * msq / 8 - msq / 8 + 1,
            local_restriction: false,
        });
    }
    pipeline.bundle.records = records;

    // local restriction: ν on B(λ_n, 1/(2λ_n)) is exactly τ^{-2/3} m (δ_{λ+τ} - δ_λ)
    for i in 0..pipeline.bundle.records.len() {
        let rec = pipeline.bundle.records[i].clone();
        let half = Rational::one() / (&rec.lambda * int(2));
        let window = pipeline.assemble_nu(&(&rec.lambda - &half), &(&rec.lambda + &half))?;
        let w = dyadic_f64(2 * rec.a).cbrt();
        let expect_mass = match config.mass_policy {
            MassPolicy::Translate => rec.mass * w,
            MassPolicy::Unit => Complex64::new(w, 0.0),
        };
        let atoms = window.atoms();
        let at = |x: &Rational| atoms.iter().find(|a| a.location.to_rational() == *x);
        let ok = atoms.len() == 2
            && at(&rec.lambda).is_some_and(|a| a.mass == -expect_mass)
            && at(&(&rec.lambda + &rec.tau)).is_some_and(|a| a.mass == expect_mass);
        pipeline.bundle.records[i].local_restriction = ok;
    }

    let recs = &pipeline.bundle.records;
    for w in recs.windows(2) {
        let gap = &w[1].lambda - &w[0].lambda;
        let reach = Rational::one() / (&w[0].lambda * int(2)) + Rational::one() / (&w[1].lambda * int(2));
        if gap <= reach {
            return Err(Error::CertificateRejected {
                n: w[1].n,
                reason: "bump supports of psi overlap".into(),
            });
        }
    }
    pipeline.bundle.psi = recs
        .iter()
        .map(|r| PsiBump {
            center: r.lambda.clone(),
            inner: 1.0 / (3.0 * to_f64(&r.lambda)),
            outer: 1.0 / (2.0 * to_f64(&r.lambda)),
            amplitude: 1.0 / weight(r.a),
        })
        .collect();

    pipeline.bundle.witnesses = witnesses(&terms_of(&pipeline.bundle));
    pipeline.bundle.verdict = bundle_verdict(&pipeline.bundle);
    if pipeline.bundle.verdict.starts_with("pass") {
        pipeline.bundle.n0_reported = Some(config.n0);
    }
    Ok(pipeline)
}

/// Tries `n0 = 1, 2, ...` up to the configured start and returns the first
/// start whose pipeline passes every check.
pub fn smallest_passing_n0(config: &CounterexampleConfig) -> Option<u32> {
    (1..=config.n0).find(|&n0| {
        let c = CounterexampleConfig {
            n0,
            ..config.clone()
        };
        run_pipeline(&c).is_ok_and(|p| p.bundle.verdict.starts_with("pass"))
    })
}

fn bundle_verdict(b: &CounterexampleBundle) -> String {
    let failures: Vec<String> = b
        .records
        .iter()
        .filter_map(|r| {
            let mut why = Vec::new();
            if !r.local_restriction {
                why.push("local restriction");
            }
            if !r.tau_below_third_lambda {
                why.push("tau_n < 1/(3 lambda_n)");
            }
            if r.foreign_points >= r.foreign_bound || r.foreign_points >= r.candidate_intervals {
                why.push("occupancy");
            }
            (!why.is_empty()).then(|| format!("n = {}: {}", r.n, why.join(", ")))
        })
        .chain(
            b.witnesses
                .iter()
                .filter(|w| !w.passed)
                .map(|w| format!("n = {}: witness", w.n)),
        )
        .collect();
    if failures.is_empty() && b.witnesses.len() >= 3 {
        "pass".into()
    } else if failures.is_empty() {
        "pass (fewer than three indices: growth not certified)".into()
    } else {
        format!("fail: {}", failures.join("; "))
    }
}

// ---------------------------------------------------------------------------
// S(t) and witnesses

/// One summand `w m [e(-(λ+τ)t) - e(-λt)]` of `S(t)` with `w = τ^{-1/3}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub n: u32,
    pub lambda: Rational,
    pub tau: Rational,
    pub weight: f64,
    pub mass: Complex64,
}

pub fn terms_of(bundle: &CounterexampleBundle) -> Vec<Term> {
    let unit = bundle.config.mass_policy == MassPolicy::Unit;
    bundle
        .records
        .iter()
        .map(|r| Term {
            n: r.n,
            lambda: r.lambda.clone(),
            tau: r.tau.clone(),
            weight: weight(r.a),
            mass: if unit { Complex64::new(1.0, 0.0) } else { r.mass },
        })
        .collect()
}

fn term_value(term: &Term, t: &Rational) -> Complex64 {
    let lt = &term.lambda * t;
    let bracket = cis_neg_turns(&(&lt + &term.tau * t)) - cis_neg_turns(&lt);
    bracket * term.mass * term.weight
}

/// `S(t) = Σ τ_n^{-1/3} m_n [e^{-2πi(λ_n+τ_n)t} - e^{-2πiλ_n t}]`.
pub fn evaluate_s(terms: &[Term], t: &Rational) -> Complex64 {
    let mut acc = ComplexSum::new();
    for term in terms {
        acc += term_value(term, t);
    }
    acc.sum()
}

/// `t_n = 1/(2τ_n)`.
pub fn witness_time(tau: &Rational) -> Rational {
    Rational::one() / (tau * int(2))
}

/// Witness rows with the mass-aware lower bound and the growth requirement
/// `|S(t_n)| / |S(t_{n-1})| >= max(2, w_n / (2 w_{n-1}))`.
pub fn witnesses(terms: &[Term]) -> Vec<Witness> {
    let mut out: Vec<Witness> = Vec::new();
    for (i, term) in terms.iter().enumerate() {
        let t = witness_time(&term.tau);
        let s = evaluate_s(terms, &t).norm();
        let main = 2.0 * term.weight * term.mass.norm();
        let before: f64 = terms[..i].iter().map(|p| 2.0 * p.weight * p.mass.norm()).sum();
        let after: f64 = terms[i + 1..]
            .iter()
            .map(|p| p.weight * p.mass.norm() * std::f64::consts::PI * to_f64(&(&p.tau / &term.tau)))
            .sum();
        let cross = before + after;
        let lower = main - cross;
        let (growth_ratio, required_growth) = match out.last() {
            Some(prev) => (
                Some(s / prev.s_modulus),
                Some((term.weight / terms[i - 1].weight / 2.0).max(2.0)),
            ),
            None => (None, None),
        };
        let grows = match (growth_ratio, required_growth) {
            (Some(g), Some(r)) => g >= r,
            _ => true,
        };
        out.push(Witness {
            n: term.n,
            t,
            main_term: main,
            cross_bound: cross,
            lower_bound: lower,
            s_modulus: s,
            growth_ratio,
            required_growth,
            passed: lower > 0.0 && s >= lower && grows,
        });
    }
    out
}

/// Certified witnesses for a range of at least three indices.
pub fn certify_unboundedness(bundle: &CounterexampleBundle) -> Result<Vec<Witness>> {
    if bundle.records.len() < 3 {
        return Err(Error::OutOfRange(format!(
            "certificate needs at least three indices, got {}",
            bundle.records.len()
        )));
    }
    let ws = witnesses(&terms_of(bundle));
    if let Some(w) = ws.iter().find(|w| !w.passed) {
        return Err(Error::CertificateRejected {
            n: w.n,
            reason: format!(
                "|S(t_n)| = {:.6e}, lower bound {:.6e}, growth {:?} (needed {:?})",
                w.s_modulus, w.lower_bound, w.growth_ratio, w.required_growth
            ),
        });
    }
    Ok(ws)
}

/// Standalone witness for `μ = Σ τ_n^{-2/3} [δ_{λ_n+τ_n} - δ_{λ_n}]` with unit masses.
/// Rows additionally require `|S(t_n)| >= (2/3) τ_n^{-1/3}`.
pub fn prop4_witness(lambdas: &[Rational], taus: &[Rational]) -> Result<Vec<Witness>> {
    if lambdas.len() != taus.len() || lambdas.is_empty() {
        return Err(Error::OutOfRange("need equally many lambdas and taus".into()));
    }
    let terms: Vec<Term> = lambdas
        .iter()
        .zip(taus)
        .enumerate()
        .map(|(i, (l, t))| {
            if !t.is_positive() {
                return Err(Error::OutOfRange(format!("tau = {t} must be positive")));
            }
            Ok(Term {
                n: i as u32,
                lambda: l.clone(),
                tau: t.clone(),
                weight: to_f64(t).powf(-1.0 / 3.0),
                mass: Complex64::new(1.0, 0.0),
            })
        })
        .collect::<Result<_>>()?;
    let mut ws = witnesses(&terms);
    for (w, term) in ws.iter_mut().zip(&terms) {
        w.passed = w.passed && w.s_modulus >= 2.0 / 3.0 * term.weight;
    }
    Ok(ws)
}

/// `{λ_n, λ_n + τ_n}` with `λ_n = 2^n`, `τ_n = 2^{-n^2}` as exact rationals.
pub fn dyadic_pairs(ns: std::ops::RangeInclusive<i64>) -> (Vec<Rational>, Vec<Rational>) {
    ns.map(|n| (pow2(n), pow2(-n * n))).unzip()
}

/// Witness table as CSV: `n,t_n,abs_s,lower_bound,verdict`.
pub fn witness_csv(ws: &[Witness]) -> String {
    let mut s = String::from("n,t_n,abs_s,lower_bound,verdict\n");
    for w in ws {
        s.push_str(&format!(
            "{},{},{:.16e},{:.16e},{}\n",
            w.n,
            crate::exact::format_rational(&w.t),
            w.s_modulus,
            w.lower_bound,
            if w.passed { "pass" } else { "fail" }
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{fit_p_discreteness, PointSet};
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn default_pipeline() -> &'static Pipeline {
        static P: OnceLock<Pipeline> = OnceLock::new();
        P.get_or_init(|| run_pipeline(&CounterexampleConfig::default()).unwrap())
    }

    #[test]
    fn tau_rule_parsing_round_trips() {
        let r: TauRule = "n^2+3n+1".parse().unwrap();
        assert_eq!(r.coefficients, vec![1, 3, 1]);
        assert_eq!(r.exponent(2), 11);
        assert_eq!(r.to_string(), "n^2+3n+1");
        let r: TauRule = " 12*n^2 - n + 5 ".parse().unwrap();
        assert_eq!(r.exponent(3), 12 * 9 - 3 + 5);
        assert_eq!(r.to_string(), "12n^2-n+5");
        assert_eq!("n".parse::<TauRule>().unwrap().exponent(7), 7);
        assert!("n^2+".parse::<TauRule>().is_err());
        assert!("2m".parse::<TauRule>().is_err());
    }

    #[test]
    fn default_rule_passes_every_check() {
        let r = choose_tau(&CounterexampleConfig::default()).unwrap();
        assert!(r.passed, "{:?}", r.first_violation);
        assert_eq!(r.exponents, vec![(2, 11), (3, 19), (4, 29)]);
        assert!(CounterexampleConfig::default().tau(2) < rat(1, 16));
        for name in ["s1", "s2", "tau_n < 1/16", "tau_n < 1/(6 M_n)", "g on range"] {
            assert!(r.checks.iter().any(|c| c.name == name), "{name}");
        }
    }

    #[test]
    fn s1_and_s2_agree_with_float_oracle() {
        // independent float evaluation with a wide margin check
        let a = |n: i64| (n * n + 3 * n + 1) as f64;
        for n in 2..=4i64 {
            let lhs: f64 = (2..n).map(|p| 2f64.powf(a(p) / 3.0)).sum();
            assert!(lhs < 2f64.powf(a(n) / 3.0) / 3.0);
            let tail: f64 = (n + 1..60).map(|p| 2f64.powf(-2.0 * a(p) / 3.0)).sum();
            assert!(tail < 2.0 / (3.0 * std::f64::consts::PI) * 2f64.powf(-2.0 * a(n) / 3.0));
        }
    }

    #[test]
    fn linear_rule_fails_s1() {
        let cfg = CounterexampleConfig {
            tau_rule: "n".parse().unwrap(),
            ..Default::default()
        };
        let r = choose_tau(&cfg).unwrap();
        assert!(!r.passed);
        assert!(r.checks.iter().any(|c| c.name == "s1" && !c.passed));
        assert!(!r.first_violation.unwrap().contains("a_n strictly increasing"));
        assert!(run_pipeline(&cfg).is_err());
    }

    #[test]
    fn selection_is_disjoint_by_brute_force() {
        let p = default_pipeline();
        // n = 2: scan every index of every foreign comb meeting (M_2, 2M_2)
        assert!(p
            .brute_force_disjoint(2, (&int(256), &int(512)))
            .unwrap());
        for n in 3..=4 {
            let rec = &p.bundle.records[(n - 2) as usize];
            let w = (&rec.eta - int(1), &rec.eta + int(1));
            assert!(p.brute_force_disjoint(n, (&w.0, &w.1)).unwrap(), "n={n}");
        }
    }

    #[test]
    fn records_satisfy_the_construction() {
        let p = default_pipeline();
        assert_eq!(p.bundle.verdict, "pass");
        for r in &p.bundle.records {
            assert_eq!(&r.lambda - &r.eta, r.tau);
            assert!(r.local_restriction, "n={}", r.n);
            assert!(r.tau_below_third_lambda);
            assert!(r.mass_modulus >= MASS_FLOOR);
            let m = r.m as u128;
            assert!(r.foreign_points < 2 * m * m / 15);
            assert!(r.foreign_points < 3 * m * m / 4);
            assert!(r.sigma.spectrum_residual < 1e-10);
            let mm = int(r.m as i64);
            assert!(r.lambda > mm && r.lambda < &mm * int(2));
        }
        // only lower indices occupy (M_n, 2M_n)
        assert_eq!(p.bundle.records[0].foreign_points, 0);
    }

    #[test]
    fn occupancy_matches_enumeration_for_small_index() {
        let p = default_pipeline();
        // n = 3: count foreign atoms of M_2 = 256 in (4096, 8192) one by one
        let sig = &p.sigmas[0];
        let mut count = 0u128;
        for s in [p.config().tau(2), p.config().tau(2) * int(2)] {
            let (lo, hi) = (int(4096), int(8192));
            for y in (4096 * 256 - 1)..=(8192 * 256 + 1) {
                let x = rat(y, 256) + &s;
                if x > lo && x < hi && sig.in_support((y as u64) % 65536) {
                    count += 1;
                }
            }
        }
        assert_eq!(count, p.bundle.records[1].foreign_points);
    }

    #[test]
    fn assemble_nu_examples() {
        let p = default_pipeline();
        for r in &p.bundle.records {
            let half = Rational::one() / (&r.lambda * int(2));
            let w = p.assemble_nu(&(&r.lambda - &half), &(&r.lambda + &half)).unwrap();
            assert_eq!(w.len(), 2);
        }
        assert!(p.assemble_nu(&int(-2), &int(2)).unwrap().is_empty());
        // total count on (M_2 + M_2/8, 2M_2 - M_2/8) against enumeration of the M_2 comb
        let (lo, hi) = (int(288), int(480));
        let w = p.assemble_nu(&lo, &hi).unwrap();
        let sig = &p.sigmas[0];
        let mut brute = 0usize;
        for s in [p.config().tau(2), p.config().tau(2) * int(2)] {
            for y in (288 * 256 - 1)..=(480 * 256 + 1) {
                let x = rat(y, 256) + &s;
                if x > lo && x < hi && sig.mass(y as u64 % 65536).norm() != 0.0 {
                    brute += 1;
                }
            }
        }
        assert_eq!(w.len(), brute);
        assert!(p.assemble_nu(&int(0), &int(1 << 20)).is_err());
    }

    #[test]
    fn psi_examples() {
        let p = default_pipeline();
        let psi = p.psi().unwrap();
        for (b, r) in p.bundle.psi.iter().zip(&p.bundle.records) {
            let l = to_f64(&r.lambda);
            let amp = 2f64.powf(-(r.a as f64) / 3.0);
            assert_eq!(psi.evaluate(l).re, amp);
            assert_eq!(psi.evaluate(to_f64(&(&r.lambda + &r.tau))).re, amp);
            assert_eq!(psi.evaluate(l + 1.0 / l).re, 0.0);
            assert_eq!(b.amplitude, amp);
        }
    }

    #[test]
    fn s_examples_and_exact_main_term() {
        let p = default_pipeline();
        let terms = terms_of(&p.bundle);
        assert_eq!(evaluate_s(&terms, &Rational::zero()), Complex64::new(0.0, 0.0));
        for (i, term) in terms.iter().enumerate() {
            let t = witness_time(&term.tau);
            assert_eq!(&term.tau * &t, rat(1, 2));
            let v = term_value(term, &t);
            assert_eq!(v.norm().to_bits(), (2.0 * term.weight * term.mass.norm()).to_bits());
            assert_eq!(p.bundle.witnesses[i].main_term, 2.0 * term.weight * term.mass.norm());
        }
    }

    #[test]
    fn certificate_passes_with_growth() {
        let p = default_pipeline();
        let ws = certify_unboundedness(&p.bundle).unwrap();
        assert_eq!(ws.len(), 3);
        for (i, w) in ws.iter().enumerate() {
            assert!(w.s_modulus >= w.lower_bound && w.lower_bound > 0.0);
            if i > 0 {
                let a = &p.bundle.records;
                let need = 2f64.powf((a[i].a - a[i - 1].a) as f64 / 3.0) / 2.0;
                assert!(w.growth_ratio.unwrap() >= need);
            }
        }
    }

    #[test]
    fn smallest_start_index() {
        // n0 = 1 fails tau_1 < 1/(6 M_1)
        let cfg = CounterexampleConfig::default();
        assert_eq!(smallest_passing_n0(&cfg), Some(2));
        assert_eq!(default_pipeline().bundle.n0_reported, Some(2));
    }

    #[test]
    fn single_term_bundle_has_no_cross_terms() {
        let cfg = CounterexampleConfig {
            n0: 2,
            n_max: 2,
            ..Default::default()
        };
        let p = run_pipeline(&cfg).unwrap();
        let w = &p.bundle.witnesses[0];
        assert_eq!(w.s_modulus, w.main_term);
        assert_eq!(w.cross_bound, 0.0);
        assert!(certify_unboundedness(&p.bundle).is_err());
    }

    #[test]
    fn prop4_dyadic_witness() {
        let (l, t) = dyadic_pairs(3..=5);
        let ws = prop4_witness(&l, &t).unwrap();
        for (w, n) in ws.iter().zip(3..=5i64) {
            assert!(w.passed, "{w:?}");
            assert!(w.s_modulus >= 2.0 / 3.0 * 2f64.powf((n * n) as f64 / 3.0));
        }
    }

    #[test]
    fn dyadic_pairs_fail_p_discreteness_on_a_long_range() {
        let (l, t) = dyadic_pairs(3..=20);
        let pts: Vec<Real> = l
            .iter()
            .zip(&t)
            .flat_map(|(a, b)| [Real::Exact(a.clone()), Real::Exact(a + b)])
            .collect();
        let set = PointSet::line(2f64.powi(21), pts).unwrap();
        assert!(fit_p_discreteness(&set, 16.0).unwrap().fit.is_none());
        let comb = PointSet::line(50.0, (-50..=50).map(|n| Real::Exact(int(n)))).unwrap();
        assert_eq!(fit_p_discreteness(&comb, 16.0).unwrap().fit.unwrap().h, 0.0);
    }

    #[test]
    fn mu_window_lives_on_the_spectral_lattice() {
        let p = default_pipeline();
        let mu = p.mu_window(48.0).unwrap();
        assert!(!mu.is_empty());
        for a in mu.atoms() {
            let y = a.location.to_rational() * int(256);
            assert!(y.is_integer());
            assert!(a.location.abs_f64() >= 32.0);
        }
    }

    #[test]
    fn fq_verdict_names_the_spectrum() {
        let cfg = CounterexampleConfig {
            tau_rule: "12n^2".parse().unwrap(),
            ..Default::default()
        };
        let p = run_pipeline(&cfg).unwrap();
        assert_eq!(p.bundle.verdict, "pass");
        let mu = p.mu_window(48.0).unwrap();
        let mut nu = DiscreteDistribution::new(1.0, Vec::new()).unwrap();
        for r in &p.bundle.records {
            let half = Rational::one() / (&r.lambda * int(2));
            nu = nu.plus(&p.assemble_nu(&(&r.lambda - &half), &(&r.lambda + &half)).unwrap());
        }
        let v = crate::distribution::fq_verdict(&mu, &nu, 16.0).unwrap();
        assert!(!v.fourier_quasicrystal);
        assert_eq!(v.failed_hypothesis.as_deref(), Some("spectrum not p-discrete"));
        assert_eq!(v.measure.p_discrete_fit.unwrap().h, 0.0);
    }

    #[test]
    fn bundle_json_round_trip() {
        let p = default_pipeline();
        let s = serde_json::to_string(&p.bundle).unwrap();
        let back: CounterexampleBundle = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p.bundle);
        assert_eq!(witnesses(&terms_of(&back)), p.bundle.witnesses);
        assert_eq!(witness_csv(&back.witnesses).lines().count(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn s_matches_direct_application(num in -10_000i64..10_000, den in 1i64..1000) {
            let p = default_pipeline();
            let t = rat(num, den);
            let psi = p.psi().unwrap();
            let mut nu = DiscreteDistribution::new(1.0, Vec::new()).unwrap();
            for r in &p.bundle.records {
                let reach = Rational::one() / &r.lambda;
                nu = nu.plus(&p.assemble_nu(&(&r.lambda - &reach), &(&r.lambda + &reach)).unwrap());
            }
            let direct = nu.apply_with(|x, _| psi.evaluate(x.to_f64()) * cis_neg_turns(&(x.to_rational() * &t)));
            let s = evaluate_s(&terms_of(&p.bundle), &t);
            prop_assert!((direct - s).norm() <= 1e-10 * s.norm().max(1.0), "{} vs {}", direct, s);
        }
    }
}
