//! M-periodic Dirac combs on `M^-1 ℤ` whose support and spectrum avoid the
//! holes `dist(j, M^2 ℤ) < α M^2` of the index group `ℤ/M^2ℤ`.
//!
//! Atom `j` sits at `j/M mod M` with mass `c_j`; the spectrum is the comb
//! `(1/M) Σ_m ĉ(m) δ_{m/M}` with `ĉ(m) = Σ_j c_j e^{-2πi jm/M^2}`.
//!
//! Small moduli use a dense null-space solve. Large moduli use the closed form
//! `P(z) = z^L Π_{|h|<L} (z - ω^h)`, `ω = e^{2πi/M^2}`, whose coefficients are
//! Gaussian binomials at a root of unity and are real.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::distribution::{Atom, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::exact::{int, rat, serde_rational, to_f64, Rational, Real};
use crate::schwartz::TestFunction;

/// Largest `M^2` solved by dense orthogonalization.
pub const DENSE_MAX_INDEX: u64 = 1024;
/// Largest `M^2` whose coefficient vector is materialized and checked by FFT.
pub const MATERIALIZE_MAX_INDEX: u64 = 1 << 16;
pub const HOLE_TOLERANCE: f64 = 1e-10;

/// `-ln` of the smallest positive normal double; coefficients below it are zero in floating point.
const LOG_UNDERFLOW: f64 = 745.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenIndices {
    pub modulus: u64,
    /// Residues `j` with `|j| < radius` (mod `modulus`) are forbidden.
    pub radius: u64,
    pub support: Vec<u64>,
    pub spectrum: Vec<u64>,
}

fn validate_alpha(alpha: &Rational) -> Result<()> {
    if !(alpha.is_positive() && *alpha <= rat(1, 6)) {
        return Err(Error::OutOfRange(format!(
            "alpha = {alpha} outside (0, 1/6]"
        )));
    }
    Ok(())
}

/// `L = ceil(α M^2)`: the open hole `|j| < α M^2` is `|j| <= L - 1`.
pub fn hole_radius(m: u64, alpha: &Rational) -> Result<u64> {
    validate_alpha(alpha)?;
    if !(2..=1 << 20).contains(&m) {
        return Err(Error::OutOfRange(format!("M = {m} outside [2, 2^20]")));
    }
    let an = alpha * int((m * m) as i64);
    if an < int(1) {
        return Err(Error::TrivialHoles(to_f64(&an)));
    }
    Ok(an.ceil().to_integer().to_u64().expect("fits"))
}

pub fn forbidden_indices(m: u64, alpha: &Rational) -> Result<ForbiddenIndices> {
    let l = hole_radius(m, alpha)?;
    let n = m * m;
    let mut set: Vec<u64> = (0..l).chain((n - (l - 1))..n).collect();
    set.sort_unstable();
    set.dedup();
    Ok(ForbiddenIndices {
        modulus: n,
        radius: l,
        support: set.clone(),
        spectrum: set,
    })
}

/// How translated copies carry masses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MassPolicy {
    /// Carry `c_j`, so the shifted comb is the translate.
    #[default]
    Translate,
    /// Unit mass on every support point.
    Unit,
}

/// A materialized coefficient vector with its hole residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCombMeasure {
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(with = "serde_rational")]
    pub alpha: Rational,
    pub construction: String,
    pub coefficients: Vec<Complex64>,
    pub transform: Vec<Complex64>,
    pub support_residual: f64,
    pub spectrum_residual: f64,
    pub null_space_dimension: Option<usize>,
    pub real_masses: bool,
}

/// Closed-form coefficients evaluated on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcSigma {
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(with = "serde_rational")]
    pub alpha: Rational,
    pub radius: u64,
    /// Largest `|ĉ(m)| / Σ|c_j|` over the sampled hole frequencies.
    pub spectrum_residual_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sigma {
    Materialized(PeriodicCombMeasure),
    Lazy(ArcSigma),
}

fn fft(v: &[Complex64]) -> Vec<Complex64> {
    let mut buf = v.to_vec();
    FftPlanner::<f64>::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf
}

fn residuals(c: &[Complex64], chat: &[Complex64], holes: &ForbiddenIndices) -> (f64, f64) {
    let s = holes
        .support
        .iter()
        .map(|&j| c[j as usize].norm())
        .fold(0.0, f64::max);
    let t = holes
        .spectrum
        .iter()
        .map(|&j| chat[j as usize].norm())
        .fold(0.0, f64::max);
    (s, t)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn finish(
    m: u64,
    alpha: &Rational,
    construction: &str,
    mut c: Vec<Complex64>,
    holes: &ForbiddenIndices,
    null_space_dimension: Option<usize>,
) -> Result<PeriodicCombMeasure> {
    let max = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::Infeasible("zero coefficient vector".into()));
    }
    for z in &mut c {
        *z /= max;
    }
    let real_masses = c.iter().all(|z| z.im == 0.0);
    let chat = fft(&c);
    let (support_residual, spectrum_residual) = residuals(&c, &chat, holes);
    if support_residual > HOLE_TOLERANCE || spectrum_residual > HOLE_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "hole residuals {support_residual:e} / {spectrum_residual:e} above {HOLE_TOLERANCE:e}"
        )));
    }
    Ok(PeriodicCombMeasure {
        m,
        alpha: alpha.clone(),
        construction: construction.into(),
        coefficients: c,
        transform: chat,
        support_residual,
        spectrum_residual,
        null_space_dimension,
        real_masses,
    })
}

/// Dense synthesis: orthonormalize the spectral constraint rows restricted to the
/// allowed columns, project the seed `e_L` onto their complement, keep the real
/// part when it survives.
pub fn construct_dense(m: u64, alpha: &Rational) -> Result<PeriodicCombMeasure> {
    let holes = forbidden_indices(m, alpha)?;
    let n = holes.modulus;
    if n > DENSE_MAX_INDEX {
        return Err(Error::OutOfRange(format!(
            "dense synthesis limited to M^2 <= {DENSE_MAX_INDEX}, got {n}"
        )));
    }
    let l = holes.radius;
    let allowed: Vec<u64> = (l..=n - l).collect();
    if allowed.is_empty() {
        return Err(Error::Infeasible("support hole covers every index".into()));
    }
    // rows conj(e^{-2πi jm/N}) so that <c, row> = ĉ(m)
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for &mm in &holes.spectrum {
        let mut v: Vec<Complex64> = allowed
            .iter()
            .map(|&j| {
                let r = (j * mm) % n;
                let a = 2.0 * PI * r as f64 / n as f64;
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        let start = norm(&v);
        for _ in 0..2 {
            for q in &basis {
                let p = dot(&v, q);
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= p * y;
                }
            }
        }
        let r = norm(&v);
        if r > 1e-10 * start {
            for x in &mut v {
                *x /= r;
            }
            basis.push(v);
        }
    }
    let null_dim = allowed.len() - basis.len();
    if null_dim == 0 {
        return Err(Error::Infeasible(format!(
            "null space trivial for M = {m}, alpha = {alpha}"
        )));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); allowed.len()];
    v[0] = Complex64::new(1.0, 0.0);
    for _ in 0..2 {
        for q in &basis {
            let p = dot(&v, q);
            for (x, y) in v.iter_mut().zip(q) {
                *x -= p * y;
            }
        }
    }
    let full = norm(&v);
    let re = v.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    let real = re > 1e-8 * full;
    let mut c = vec![Complex64::new(0.0, 0.0); n as usize];
    for (k, &j) in allowed.iter().enumerate() {
        c[j as usize] = if real {
            Complex64::new(v[k].re, 0.0)
        } else {
            v[k]
        };
    }
    if !(full > 1e-12) {
        return Err(Error::Infeasible("seed lies in the constraint span".into()));
    }
    finish(m, alpha, "dense", c, &holes, Some(null_dim))
}

impl ArcSigma {
    pub fn new(m: u64, alpha: &Rational) -> Result<Self> {
        let l = hole_radius(m, alpha)?;
        let n = m * m;
        if 4 * l > n + 1 {
            return Err(Error::Infeasible(format!(
                "closed form needs 4L <= M^2 + 1, got L = {l}, M^2 = {n}"
            )));
        }
        let mut s = Self {
            m,
            alpha: alpha.clone(),
            radius: l,
            spectrum_residual_relative: f64::NAN,
        };
        s.spectrum_residual_relative = s.sampled_spectrum_residual();
        Ok(s)
    }

    pub fn modulus(&self) -> u64 {
        self.m * self.m
    }

    fn roots(&self) -> u64 {
        2 * self.radius - 1
    }

    /// Support residues `[L, 3L-1]`.
    pub fn support_range(&self) -> (u64, u64) {
        (self.radius, 3 * self.radius - 1)
    }

    /// Residues of the two largest coefficients.
    pub fn peak(&self) -> (u64, u64) {
        (2 * self.radius - 1, 2 * self.radius)
    }

    /// `ln |c_{L+k+1}| - ln |c_{L+k}|` for `k < L - 1` (a positive increment towards the peak).
    fn step(&self, k: u64) -> f64 {
        let n = self.modulus() as f64;
        let r = self.roots();
        (PI * (r - k) as f64 / n).sin().ln() - (PI * (k + 1) as f64 / n).sin().ln()
    }

    /// `ln |c_j|` relative to the peak, or `-inf` when it underflows or `j` is off support.
    pub fn log_abs_mass(&self, j: u64) -> f64 {
        let (lo, hi) = self.support_range();
        if j < lo || j > hi {
            return f64::NEG_INFINITY;
        }
        let d = j - lo;
        let d = d.min(self.roots() - d);
        let peak = self.radius - 1;
        let mut acc = 0.0;
        for k in (d..peak).rev() {
            acc -= self.step(k);
            if acc < -LOG_UNDERFLOW {
                return f64::NEG_INFINITY;
            }
        }
        acc
    }

    /// Normalized `c_j` (residue `j` taken mod `M^2`).
    pub fn mass(&self, j: u64) -> f64 {
        let j = j % self.modulus();
        let la = self.log_abs_mass(j);
        if la == f64::NEG_INFINITY {
            return 0.0;
        }
        let d = j - self.radius;
        if d.is_multiple_of(2) {
            la.exp()
        } else {
            -la.exp()
        }
    }

    /// Residue range outside which every coefficient underflows.
    pub fn significant_range(&self) -> (u64, u64) {
        let peak = self.radius - 1;
        let mut acc = 0.0;
        let mut d = peak;
        while d > 0 {
            let next = acc - self.step(d - 1);
            if next < -LOG_UNDERFLOW {
                break;
            }
            acc = next;
            d -= 1;
        }
        (self.radius + d, self.radius + self.roots() - d)
    }

    /// Residues `j` in the support whose `|c_j|` is at least `ratio` (a contiguous range).
    pub fn mass_range_above(&self, ratio: f64) -> (u64, u64) {
        let peak = self.radius - 1;
        let target = ratio.ln();
        let mut acc = 0.0;
        let mut d = peak;
        while d > 0 {
            let next = acc - self.step(d - 1);
            if next < target {
                break;
            }
            acc = next;
            d -= 1;
        }
        (self.radius + d, self.radius + self.roots() - d)
    }

    /// Significant coefficients as `(residue, value)`, computed by one sweep from the peak.
    pub fn significant_coefficients(&self) -> Vec<(u64, f64)> {
        let (lo, _) = self.significant_range();
        let d_lo = lo - self.radius;
        let peak = self.radius - 1;
        let mut logs = vec![0.0; (peak - d_lo + 1) as usize];
        let mut acc = 0.0;
        for d in (d_lo..peak).rev() {
            acc -= self.step(d);
            logs[(d - d_lo) as usize] = acc;
        }
        let r = self.roots();
        let mut out = Vec::with_capacity(2 * logs.len());
        for d in d_lo..=(r - d_lo) {
            let e = d.min(r - d);
            let v = logs[(e - d_lo) as usize].exp();
            out.push((self.radius + d, if d % 2 == 0 { v } else { -v }));
        }
        out
    }

    fn sampled_spectrum_residual(&self) -> f64 {
        let n = self.modulus();
        let l = self.radius;
        let coeffs = self.significant_coefficients();
        let l1: f64 = coeffs.iter().map(|c| c.1.abs()).sum();
        let mut samples = vec![0, 1, l - 1, (l - 1) / 2, n - 1, n - (l - 1)];
        samples.sort_unstable();
        samples.dedup();
        samples
            .into_iter()
            .map(|mm| {
                let s: Complex64 = coeffs
                    .iter()
                    .map(|&(j, c)| {
                        let r = ((j as u128 * mm as u128) % n as u128) as f64;
                        let a = -2.0 * PI * r / n as f64;
                        Complex64::new(a.cos(), a.sin()) * c
                    })
                    .sum();
                s.norm() / l1
            })
            .fold(0.0, f64::max)
    }

    /// Full coefficient vector for moduli up to [`MATERIALIZE_MAX_INDEX`].
    pub fn materialize(&self) -> Result<PeriodicCombMeasure> {
        let n = self.modulus();
        if n > MATERIALIZE_MAX_INDEX {
            return Err(Error::OutOfRange(format!(
                "materialization limited to M^2 <= {MATERIALIZE_MAX_INDEX}"
            )));
        }
        let mut c = vec![Complex64::new(0.0, 0.0); n as usize];
        for (j, v) in self.significant_coefficients() {
            c[j as usize] = Complex64::new(v, 0.0);
        }
        let holes = forbidden_indices(self.m, &self.alpha)?;
        finish(self.m, &self.alpha, "closed-form", c, &holes, None)
    }
}

/// Dense synthesis for `M^2 <= 1024`, closed form above.
pub fn construct_sigma(m: u64, alpha: &Rational) -> Result<Sigma> {
    let n = m.saturating_mul(m);
    if n <= DENSE_MAX_INDEX {
        return Ok(Sigma::Materialized(construct_dense(m, alpha)?));
    }
    let arc = ArcSigma::new(m, alpha)?;
    if n <= MATERIALIZE_MAX_INDEX {
        return Ok(Sigma::Materialized(arc.materialize()?));
    }
    Ok(Sigma::Lazy(arc))
}

impl PeriodicCombMeasure {
    pub fn modulus(&self) -> u64 {
        self.m * self.m
    }

    /// Spectrum as a window of the comb `(1/M) Σ ĉ(m) δ_{m/M}`.
    pub fn transform_window(&self, radius: f64) -> Result<DiscreteDistribution> {
        let n = self.modulus() as i64;
        let top = (radius * self.m as f64).floor() as i64;
        let atoms = (-top..=top).map(|y| {
            let r = y.rem_euclid(n) as usize;
            Atom::dirac(
                Real::Exact(rat(y, self.m as i64)),
                self.transform[r] / self.m as f64,
            )
        });
        DiscreteDistribution::new(radius, atoms.collect())
    }

    /// CSV of `j, |c_j|, |ĉ(j)|`.
    pub fn profile_csv(&self) -> String {
        let mut s = String::from("j,abs_c,abs_chat\n");
        for (j, (c, t)) in self.coefficients.iter().zip(&self.transform).enumerate() {
            s.push_str(&format!("{j},{:.16e},{:.16e}\n", c.norm(), t.norm()));
        }
        s
    }
}

impl Sigma {
    pub fn m(&self) -> u64 {
        match self {
            Sigma::Materialized(p) => p.m,
            Sigma::Lazy(a) => a.m,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.m() * self.m()
    }

    pub fn alpha(&self) -> &Rational {
        match self {
            Sigma::Materialized(p) => &p.alpha,
            Sigma::Lazy(a) => &a.alpha,
        }
    }

    /// Residue ranges (inclusive) containing every index with nonzero mass.
    pub fn support_ranges(&self) -> Vec<(u64, u64)> {
        match self {
            Sigma::Materialized(p) => {
                let mut out: Vec<(u64, u64)> = Vec::new();
                for (j, c) in p.coefficients.iter().enumerate() {
                    if c.norm() == 0.0 {
                        continue;
                    }
                    let j = j as u64;
                    match out.last_mut() {
                        Some(last) if last.1 + 1 == j => last.1 = j,
                        _ => out.push((j, j)),
                    }
                }
                out
            }
            Sigma::Lazy(a) => vec![a.support_range()],
        }
    }

    pub fn mass(&self, j: u64) -> Complex64 {
        match self {
            Sigma::Materialized(p) => p.coefficients[(j % p.modulus()) as usize],
            Sigma::Lazy(a) => Complex64::new(a.mass(j), 0.0),
        }
    }

    pub fn in_support(&self, j: u64) -> bool {
        let j = j % self.modulus();
        match self {
            Sigma::Materialized(p) => p.coefficients[j as usize].norm() != 0.0,
            Sigma::Lazy(a) => {
                let (lo, hi) = a.support_range();
                lo <= j && j <= hi
            }
        }
    }

    /// Integers `y` in `[y0, y1]` whose residue lies in the support, as inclusive runs.
    pub fn support_runs(&self, y0: i128, y1: i128) -> Vec<(i128, i128)> {
        let n = self.modulus() as i128;
        let mut runs = Vec::new();
        if y0 > y1 {
            return runs;
        }
        for (s0, s1) in self.support_ranges() {
            let (s0, s1) = (s0 as i128, s1 as i128);
            let k0 = Integer::div_floor(&(y0 - s1), &n);
            let k1 = Integer::div_floor(&(y1 - s0), &n);
            for k in k0..=k1 {
                let a = y0.max(k * n + s0);
                let b = y1.min(k * n + s1);
                if a <= b {
                    runs.push((a, b));
                }
            }
        }
        runs.sort_unstable();
        runs
    }

    /// Number of atoms of the `τ`-shifted comb in the open interval `(lo, hi)`.
    pub fn count_in(&self, tau: &Rational, lo: &Rational, hi: &Rational) -> u128 {
        let (y0, y1) = self.index_bounds(tau, lo, hi);
        self.support_runs(y0, y1)
            .iter()
            .map(|&(a, b)| (b - a + 1) as u128)
            .sum()
    }

    /// Inclusive integer range of `y` with `lo < y/M + τ < hi`.
    pub fn index_bounds(&self, tau: &Rational, lo: &Rational, hi: &Rational) -> (i128, i128) {
        let m = int(self.m() as i64);
        let a = (lo - tau) * &m;
        let b = (hi - tau) * &m;
        let y0 = a.floor().to_integer() + 1;
        let y1 = if b.is_integer() {
            b.to_integer() - 1
        } else {
            b.floor().to_integer()
        };
        (to_i128(&y0), to_i128(&y1))
    }

    /// Atoms of the `τ`-shifted comb in `(lo, hi)`.
    pub fn shifted_window(
        &self,
        tau: &Rational,
        lo: &Rational,
        hi: &Rational,
        policy: MassPolicy,
    ) -> Result<DiscreteDistribution> {
        let count = self.count_in(tau, lo, hi);
        if count > 20_000_000 {
            return Err(Error::WindowExceeded(format!(
                "{count} atoms in ({lo}, {hi})"
            )));
        }
        let (y0, y1) = self.index_bounds(tau, lo, hi);
        let m = self.m() as i64;
        let n = self.modulus() as i128;
        let mut atoms = Vec::with_capacity(count as usize);
        for (a, b) in self.support_runs(y0, y1) {
            for y in a..=b {
                let mass = match policy {
                    MassPolicy::Translate => self.mass(y.rem_euclid(n) as u64),
                    MassPolicy::Unit => Complex64::new(1.0, 0.0),
                };
                if mass.norm() == 0.0 && policy == MassPolicy::Translate {
                    continue;
                }
                let x = Rational::new(BigInt::from(y), BigInt::from(m)) + tau;
                atoms.push(Atom::dirac(Real::Exact(x), mass));
            }
        }
        let radius = to_f64(&lo.abs()).max(to_f64(&hi.abs()));
        DiscreteDistribution::new(radius, atoms)
    }

    /// The unshifted comb on `(-radius, radius)`.
    pub fn window(&self, radius: f64) -> Result<DiscreteDistribution> {
        let r = Rational::from_float(radius).ok_or_else(|| Error::OutOfRange("radius".into()))?;
        let mut d = self.shifted_window(&Rational::zero(), &-r.clone(), &r, MassPolicy::Translate)?;
        // include the closed endpoints
        let mut atoms = d.atoms().to_vec();
        for x in [-r.clone(), r] {
            let y = &x * int(self.m() as i64);
            if y.is_integer() {
                let yi = to_i128(&y.to_integer());
                let mass = self.mass(yi.rem_euclid(self.modulus() as i128) as u64);
                if mass.norm() != 0.0 {
                    atoms.push(Atom::dirac(Real::Exact(x), mass));
                }
            }
        }
        d = DiscreteDistribution::new(radius, atoms)?;
        Ok(d)
    }
}

fn to_i128(b: &BigInt) -> i128 {
    b.to_i128().expect("index fits in i128")
}

/// `|(σ^{2τ} - σ^τ, φ)| / (τ N_{2,1}(φ))` with the pieces that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateMeasurement {
    #[serde(with = "serde_rational")]
    pub tau: Rational,
    pub pairing: Complex64,
    pub seminorm: f64,
    pub ratio: f64,
    pub window_radius: f64,
    pub tail_bound: f64,
}

pub fn lemma3_ratio(sigma: &Sigma, tau: &Rational, phi: &TestFunction) -> Result<TranslateMeasurement> {
    if !(tau.is_positive() && *tau < rat(1, 2)) {
        return Err(Error::OutOfRange(format!("tau = {tau} outside (0, 1/2)")));
    }
    let reach = phi
        .support_hull(1e-30)
        .iter()
        .map(|&(a, b)| a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    let radius = (reach + 1.0).ceil();
    let r = int(radius as i64);
    let twice = tau * int(2);
    let diff = sigma
        .shifted_window(&twice, &-r.clone(), &r, MassPolicy::Translate)?
        .plus(&sigma.shifted_window(tau, &-r.clone(), &r, MassPolicy::Translate)?.scaled(Complex64::new(-1.0, 0.0)));
    let pairing = diff.apply(phi)?;
    let tail_bound = diff.tail_bound(phi)?;
    let seminorm = phi.seminorm(2, 1)?;
    Ok(TranslateMeasurement {
        tau: tau.clone(),
        pairing,
        seminorm,
        ratio: pairing.norm() / (to_f64(tau) * seminorm),
        window_radius: radius,
        tail_bound,
    })
}
