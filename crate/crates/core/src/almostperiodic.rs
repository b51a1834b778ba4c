//! Convolution series `g(t) = Σ b(γ) ψ̂(γ) e^{2πitγ}`, ε-almost period search on
//! sampled functions, and Bohr/Ronkin Fourier coefficients from geometric
//! sweeps of the averaging radius.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::schwartz::{DerivativeTable, TestFunction};
use crate::sum::{sum_complex, ComplexSum};

/// Default agreement tolerance for recovered coefficients.
pub const COEFFICIENT_TOLERANCE: f64 = 5e-3;
/// Default bound on the truncated tail of a convolution series.
pub const SERIES_TAIL_TOLERANCE: f64 = 1e-9;
/// Ronkin division refuses `|φ̂(λ)|` below this.
pub const MIN_PHI_HAT: f64 = 1e-6;

fn cis(turns: f64) -> Complex64 {
    let x = 2.0 * PI * turns;
    Complex64::new(x.cos(), x.sin())
}

/// Values of a function on the uniform grid `t0 + i dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Complex64>,
}

impl Samples {
    pub fn from_fn<F: Fn(f64) -> Complex64 + Sync>(t0: f64, dt: f64, count: usize, f: F) -> Self {
        let values = (0..count)
            .into_par_iter()
            .map(|i| f(t0 + i as f64 * dt))
            .collect();
        Self { t0, dt, values }
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reads `t,re[,im]` rows (header optional); `t` must be uniform.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut ts = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("line {}: {e}", line + 1)))?;
            let field = |k: usize| -> Option<std::result::Result<f64, _>> {
                rec.get(k).map(|s| s.parse::<f64>())
            };
            let t = match field(0) {
                Some(Ok(t)) => t,
                // a non-numeric first row is a header
                Some(Err(_)) if line == 0 => continue,
                _ => return Err(Error::Parse(format!("line {}: bad t", line + 1))),
            };
            let re = match field(1) {
                Some(Ok(v)) => v,
                _ => return Err(Error::Parse(format!("line {}: bad real part", line + 1))),
            };
            let im = match field(2) {
                None => 0.0,
                Some(Ok(v)) => v,
                Some(Err(_)) => {
                    return Err(Error::Parse(format!("line {}: bad imaginary part", line + 1)))
                }
            };
            ts.push(t);
            values.push(Complex64::new(re, im));
        }
        if ts.len() < 2 {
            return Err(Error::InsufficientSamples(format!("{} rows", ts.len())));
        }
        let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Parse("t must increase".into()));
        }
        for (i, t) in ts.iter().enumerate() {
            if (t - (ts[0] + i as f64 * dt)).abs() > 1e-6 * dt {
                return Err(Error::Parse(format!("row {} breaks the uniform grid", i + 1)));
            }
        }
        Ok(Self {
            t0: ts[0],
            dt,
            values,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,re,im\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", self.t(i), v.re, v.im));
        }
        s
    }

    /// Grid index of `t`, if `t` lies on the grid.
    fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let i = x.round();
        ((x - i).abs() < 1e-9 * x.abs().max(1.0) && i >= 0.0 && (i as usize) < self.len())
            .then_some(i as usize)
    }
}

// ---------------------------------------------------------------------------
// convolution series

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSamples {
    pub samples: Samples,
    /// `(γ, b(γ) ψ̂(γ))` for the atoms in the window.
    pub frequencies: Vec<(f64, Complex64)>,
    pub tail_bound: f64,
}

/// What the atoms of `f̂` stand for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extent {
    /// Every atom of `f̂` is listed; nothing is truncated.
    Complete,
    /// A window of a larger measure; the estimated tail must stay below `tolerance`.
    Window { tolerance: f64 },
}

/// `g(t) = Σ_γ b(γ) ψ̂(γ) e^{2πitγ}` over the atoms of the measure `f̂` on the grid
/// `t0 + i dt`, `i < count`.
pub fn convolve_series(
    fhat: &DiscreteDistribution,
    psi: &TestFunction,
    t0: f64,
    dt: f64,
    count: usize,
    extent: Extent,
) -> Result<SeriesSamples> {
    if !fhat.is_measure() {
        return Err(Error::NotAMeasure(format!(
            "series needs a measure, got order {}",
            fhat.max_order()
        )));
    }
    let psi_hat = psi.fourier()?;
    let (tail, tolerance) = match extent {
        Extent::Complete => (0.0, 0.0),
        Extent::Window { tolerance } => (fhat.tail_bound(&psi_hat)?, tolerance),
    };
    if !(tail <= tolerance) {
        let mut required = fhat.window_radius();
        for _ in 0..40 {
            required *= 1.5;
            if fhat.tail_bound_from(required, &psi_hat)? <= tolerance {
                break;
            }
        }
        return Err(Error::TailTooLarge {
            bound: tail,
            tolerance,
            required,
        });
    }
    let frequencies: Vec<(f64, Complex64)> = fhat
        .atoms()
        .iter()
        .map(|a| {
            let g = a.location.to_f64();
            (g, a.mass * psi_hat.evaluate(g))
        })
        .filter(|(_, c)| c.norm() != 0.0)
        .collect();
    let samples = Samples::from_fn(t0, dt, count, |t| {
        sum_complex(frequencies.iter().map(|&(g, c)| c * cis(g * t)))
    });
    Ok(SeriesSamples {
        samples,
        frequencies,
        tail_bound: tail,
    })
}

// ---------------------------------------------------------------------------
// almost periods

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostPeriod {
    pub tau: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApAnalysis {
    pub epsilon: f64,
    pub grid_step: f64,
    pub tau_step: f64,
    pub range: f64,
    /// Every scanned `τ` with `max_t |g(t+τ) - g(t)| < ε` over the grid overlap.
    pub almost_periods: Vec<AlmostPeriod>,
    /// Largest gap between consecutive members of `{0} ∪ found`, including the
    /// stretch from the last one to the end of the range.
    pub max_gap: f64,
    pub verdict: String,
}

impl ApAnalysis {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,defect\n");
        for p in &self.almost_periods {
            s.push_str(&format!("{:.16e},{:.16e}\n", p.tau, p.defect));
        }
        s
    }
}

/// Grid search of ε-almost periods `τ = k·tau_step`, `0 < τ <= range`.
/// `tau_step` must be a positive integer multiple of the grid step.
pub fn find_almost_periods(g: &Samples, epsilon: f64, range: f64, tau_step: f64) -> Result<ApAnalysis> {
    if !(epsilon > 0.0) {
        return Err(Error::OutOfRange(format!("epsilon = {epsilon}")));
    }
    let stride = tau_step / g.dt;
    let k = stride.round();
    if !(k >= 1.0) || (stride - k).abs() > 1e-9 * stride {
        return Err(Error::OutOfRange(format!(
            "tau step {tau_step} is not a multiple of the grid step {}",
            g.dt
        )));
    }
    let k = k as usize;
    if range < 10.0 * g.dt {
        return Err(Error::InsufficientSamples(format!(
            "search range {range} shorter than 10 grid steps"
        )));
    }
    let shifts = (range / tau_step + 1e-9).floor() as usize;
    if shifts * k >= g.len() {
        return Err(Error::InsufficientSamples(format!(
            "range {range} leaves no overlap on {} samples",
            g.len()
        )));
    }
    let almost_periods: Vec<AlmostPeriod> = (1..=shifts)
        .into_par_iter()
        .filter_map(|s| {
            let d = s * k;
            let defect = (0..g.len() - d)
                .map(|i| (g.values[i + d] - g.values[i]).norm())
                .fold(0.0, f64::max);
            (defect < epsilon).then_some(AlmostPeriod {
                tau: s as f64 * tau_step,
                defect,
            })
        })
        .collect();
    let mut max_gap = 0.0f64;
    let mut last = 0.0;
    for p in &almost_periods {
        max_gap = max_gap.max(p.tau - last);
        last = p.tau;
    }
    max_gap = max_gap.max(range - last);
    let verdict = if almost_periods.is_empty() {
        "no almost periods in range".to_string()
    } else if max_gap < range / 2.0 {
        "relatively dense on the scanned range".to_string()
    } else {
        "sparse on the scanned range".to_string()
    };
    Ok(ApAnalysis {
        epsilon,
        grid_step: g.dt,
        tau_step,
        range,
        almost_periods,
        max_gap,
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Bohr coefficients

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BohrReport {
    pub lambda: f64,
    pub radii: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `|a(R_{i+1}) - a(R_i)|`.
    pub cauchy: Vec<f64>,
    pub value: Complex64,
    pub converged: bool,
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "{} radii, need at least 3",
            radii.len()
        )));
    }
    let q = radii[1] / radii[0];
    let geometric = radii[0] > 0.0
        && q > 1.0
        && radii
            .windows(2)
            .all(|w| (w[1] / w[0] - q).abs() <= 1e-9 * q);
    if !geometric {
        return Err(Error::OutOfRange(format!("radii {radii:?} are not a growing geometric sequence")));
    }
    Ok(())
}

/// Finishes a sweep: a sweep has converged when the last Cauchy difference is
/// below the previous-first one or lies at rounding level.
fn bohr_report(lambda: f64, radii: &[f64], values: Vec<Complex64>, scale: f64) -> Result<BohrReport> {
    let cauchy: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let last = *cauchy.last().expect("at least two differences");
    let floor = 1e-12 * scale.max(1.0);
    let converged = last <= floor || last < cauchy[0];
    let report = BohrReport {
        lambda,
        radii: radii.to_vec(),
        value: *values.last().expect("nonempty"),
        values,
        cauchy,
        converged,
    };
    if !converged {
        return Err(Error::NotConverged(format!(
            "a({lambda}) Cauchy differences {:?} do not decrease",
            report.cauchy
        )));
    }
    Ok(report)
}

/// `(1/2R) ∫_{-R}^{R} g(t) e^{-2πiλt} dt` by the trapezoid rule for each `R`,
/// with `points_per_unit` nodes per unit length.
pub fn bohr_coefficient<F: Fn(f64) -> Complex64 + Sync>(
    g: F,
    lambda: f64,
    radii: &[f64],
    points_per_unit: usize,
) -> Result<BohrReport> {
    check_radii(radii)?;
    let mut scale = 0.0f64;
    let mut values = Vec::new();
    for &r in radii {
        let n = ((2.0 * r * points_per_unit as f64).ceil() as usize).max(2);
        let h = 2.0 * r / n as f64;
        let (sum, sup) = (0..=n)
            .into_par_iter()
            .map(|i| {
                let t = -r + i as f64 * h;
                let v = g(t);
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                (v * cis(-lambda * t) * w, v.norm())
            })
            .fold(
                || (ComplexSum::new(), 0.0f64),
                |(mut acc, m), (x, a)| {
                    acc += x;
                    (acc, m.max(a))
                },
            )
            .map(|(acc, m)| (acc.sum(), m))
            .reduce(|| (Complex64::new(0.0, 0.0), 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)));
        scale = scale.max(sup);
        values.push(sum * h / (2.0 * r));
    }
    bohr_report(lambda, radii, values, scale)
}

/// Same mean from samples; `±R` must be grid points.
pub fn bohr_from_samples(g: &Samples, lambda: f64, radii: &[f64]) -> Result<BohrReport> {
    check_radii(radii)?;
    let mut values = Vec::new();
    for &r in radii {
        let (Some(i0), Some(i1)) = (g.index_of(-r), g.index_of(r)) else {
            return Err(Error::OutOfRange(format!("±{r} not on the sample grid")));
        };
        let mut acc = ComplexSum::new();
        for i in i0..=i1 {
            let w = if i == i0 || i == i1 { 0.5 } else { 1.0 };
            acc += g.values[i] * cis(-lambda * g.t(i)) * w;
        }
        values.push(acc.sum() * g.dt / (2.0 * r));
    }
    let scale = g.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    bohr_report(lambda, radii, values, scale)
}

// ---------------------------------------------------------------------------
// Ronkin coefficients

/// An object whose convolution with a test function can be sampled.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    Distribution(&'a DiscreteDistribution),
    /// A bounded continuous function, convolved by quadrature.
    Function(&'a (dyn Fn(f64) -> Complex64 + Sync)),
}

/// Radius beyond which `φ` is negligible next to its supremum.
fn reach(phi: &TestFunction) -> Result<f64> {
    let top = phi.envelope_beyond(0.0, 0)?;
    let mut r = 1.0;
    while phi.envelope_beyond(r, 0)? > 1e-17 * top {
        r *= 1.25;
        if r > 1e6 {
            return Err(Error::InvalidTestFunction("test function does not decay".into()));
        }
    }
    Ok(r)
}

/// Samples of `f ⋆ φ` on `[-radius, radius]` with step `radius / n`.
pub fn sample_convolution(source: Source<'_>, phi: &TestFunction, radius: f64, n: usize) -> Result<Samples> {
    let reach = reach(phi)?;
    let dt = radius / n as f64;
    match source {
        Source::Distribution(f) => {
            if radius + reach > f.window_radius() {
                return Err(Error::WindowExceeded(format!(
                    "f * phi on [-{radius}, {radius}] needs atoms up to {}, window is {}",
                    radius + reach,
                    f.window_radius()
                )));
            }
            let mut atoms: Vec<(f64, u32, Complex64)> = f
                .atoms()
                .iter()
                .map(|a| (a.location.to_f64(), a.order, a.mass))
                .collect();
            atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
            let table = DerivativeTable::new(phi, f.max_order() as usize);
            // (D^k δ_x)(φ(t - ·)) = φ^(k)(t - x)
            Ok(Samples::from_fn(-radius, dt, 2 * n + 1, |t| {
                let lo = atoms.partition_point(|a| a.0 < t - reach);
                let hi = atoms.partition_point(|a| a.0 <= t + reach);
                sum_complex(
                    atoms[lo..hi]
                        .iter()
                        .map(|&(x, k, m)| m * table.at(t - x)[k as usize]),
                )
            }))
        }
        Source::Function(g) => {
            let hull = phi.support_hull(1e-17);
            let h = phi_width(phi) / 32.0;
            Ok(Samples::from_fn(-radius, dt, 2 * n + 1, |t| {
                let mut acc = ComplexSum::new();
                for &(a, b) in &hull {
                    let m = ((b - a) / h).ceil() as usize;
                    let step = (b - a) / m as f64;
                    for i in 0..=m {
                        let x = a + i as f64 * step;
                        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                        acc += g(t - x) * phi.evaluate(x) * (w * step);
                    }
                }
                acc.sum()
            }))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RonkinReport {
    pub lambda: f64,
    pub value: Complex64,
    pub phi_hat: Complex64,
    pub bohr: BohrReport,
    /// Same coefficient through the second test function.
    pub second_value: Complex64,
    pub discrepancy: f64,
    pub phi_independent: bool,
    pub tolerance: f64,
}

fn phi_width(phi: &TestFunction) -> f64 {
    phi
        .leaves()
        .iter()
        .map(|l| match l {
            TestFunction::GaussHermite(g) => g.width,
            TestFunction::Bump(b) => b.outer - b.inner,
            TestFunction::FiniteSum { .. } => 1.0,
        })
        .fold(f64::INFINITY, f64::min)
}

/// Sample count on `[0, R_max]` putting every sweep radius on the grid with
/// about 64 nodes per width of `φ`.
fn grid_count(phi: &TestFunction, radii: &[f64]) -> usize {
    let per_unit = (64.0 / phi_width(phi)).clamp(16.0, 4096.0);
    let first = (radii[0] * per_unit).ceil() as usize;
    let last = *radii.last().expect("checked");
    (first as f64 * last / radii[0]).round() as usize
}

fn phi_hat_at(phi: &TestFunction, lambda: f64) -> Result<Complex64> {
    let v = phi.fourier()?.evaluate(lambda);
    if v.norm() < MIN_PHI_HAT {
        return Err(Error::OutOfRange(format!(
            "|phi_hat({lambda})| = {:.3e} below {MIN_PHI_HAT}",
            v.norm()
        )));
    }
    Ok(v)
}

fn ronkin_from_samples(g: &Samples, lambda: f64, phi: &TestFunction, radii: &[f64]) -> Result<(Complex64, Complex64, BohrReport)> {
    let phi_hat = phi_hat_at(phi, lambda)?;
    let bohr = bohr_from_samples(g, lambda, radii)?;
    Ok((bohr.value / phi_hat, phi_hat, bohr))
}

/// `a(λ, f) = a(λ, f ⋆ φ) / φ̂(λ)`, recomputed with `phi2` to check that the
/// answer does not depend on the test function.
pub fn ronkin_coefficient(
    f: Source<'_>,
    lambda: f64,
    phi: &TestFunction,
    phi2: &TestFunction,
    radii: &[f64],
    tolerance: f64,
) -> Result<RonkinReport> {
    check_radii(radii)?;
    let r = *radii.last().expect("checked");
    let g1 = sample_convolution(f, phi, r, grid_count(phi, radii))?;
    let g2 = sample_convolution(f, phi2, r, grid_count(phi2, radii))?;
    let (value, phi_hat, bohr) = ronkin_from_samples(&g1, lambda, phi, radii)?;
    let (second_value, _, _) = ronkin_from_samples(&g2, lambda, phi2, radii)?;
    let discrepancy = (value - second_value).norm();
    Ok(RonkinReport {
        lambda,
        value,
        phi_hat,
        bohr,
        second_value,
        discrepancy,
        phi_independent: discrepancy <= tolerance,
        tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub lambda: f64,
    pub coefficient: Complex64,
    pub candidate: Complex64,
    pub discrepancy: f64,
    pub cauchy_last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCheckReport {
    pub rows: Vec<CoefficientRow>,
    pub max_discrepancy: f64,
    /// `Σ |a(λ, f)|` over the candidates.
    pub coefficient_l1: f64,
    pub tolerance: f64,
    pub verdict: String,
}

impl WindowCheckReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,re_a,im_a,convergence\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.lambda, r.coefficient.re, r.coefficient.im, r.cauchy_last
            ));
        }
        s
    }
}

/// Compares `a(λ, f)` with the candidate masses of `f̂` at each candidate `λ`.
/// For a measure source the coefficients are Ronkin coefficients through `φ`;
/// a function source uses the Bohr mean of `f` itself.
pub fn theorem7_check(
    f: Source<'_>,
    candidates: &[(f64, Complex64)],
    phi: &TestFunction,
    radii: &[f64],
    tolerance: f64,
) -> Result<WindowCheckReport> {
    check_radii(radii)?;
    let r = *radii.last().expect("checked");
    let rows: Vec<CoefficientRow> = match f {
        Source::Distribution(_) => {
            let g = sample_convolution(f, phi, r, grid_count(phi, radii))?;
            candidates
                .par_iter()
                .map(|&(lambda, candidate)| {
                    let (a, _, bohr) = ronkin_from_samples(&g, lambda, phi, radii)?;
                    Ok(CoefficientRow {
                        lambda,
                        coefficient: a,
                        candidate,
                        discrepancy: (a - candidate).norm(),
                        cauchy_last: *bohr.cauchy.last().expect("nonempty"),
                    })
                })
                .collect::<Result<_>>()?
        }
        Source::Function(g) => candidates
            .iter()
            .map(|&(lambda, candidate)| {
                let bohr = bohr_coefficient(g, lambda, radii, 32)?;
                Ok(CoefficientRow {
                    lambda,
                    coefficient: bohr.value,
                    candidate,
                    discrepancy: (bohr.value - candidate).norm(),
                    cauchy_last: *bohr.cauchy.last().expect("nonempty"),
                })
            })
            .collect::<Result<_>>()?,
    };
    let max_discrepancy = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    let coefficient_l1 = rows.iter().map(|r| r.coefficient.norm()).sum();
    Ok(WindowCheckReport {
        verdict: if max_discrepancy <= tolerance { "pass" } else { "fail" }.into(),
        rows,
        max_discrepancy,
        coefficient_l1,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Atom;
    use crate::exact::{int, Real};
    use crate::periodic::construct_dense;
    use crate::exact::rat;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn comb(w: i64) -> DiscreteDistribution {
        DiscreteDistribution::integer_comb(w as f64)
    }

    #[test]
    fn series_of_a_single_atom_is_constant() {
        let d = DiscreteDistribution::measure(4.0, [(Real::Exact(int(0)), c(1.0, 0.0))]).unwrap();
        let s = convolve_series(&d, &TestFunction::standard_gaussian(), -5.0, 0.25, 41, Extent::Window { tolerance: 1e-9 }).unwrap();
        for v in &s.samples.values {
            assert!((v - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn two_term_series_matches_direct_sum() {
        // ψ̂ = 1 at both atoms up to 1e-14: a very narrow Gaussian has a very wide transform
        let p = 99_i64;
        let q = 70_i64;
        let d = DiscreteDistribution::measure(
            2.0,
            [(Real::Exact(int(1)), c(1.0, 0.0)), (Real::Exact(rat(p, q)), c(1.0, 0.0))],
        )
        .unwrap();
        let psi = TestFunction::gaussian(0.0, 1e-8);
        let s = convolve_series(&d, &psi, -3.0, 0.01, 601, Extent::Complete).unwrap();
        let w = 1e-8;
        for (i, v) in s.samples.values.iter().enumerate() {
            let t = s.samples.t(i);
            let direct = cis(t) + cis(p as f64 / q as f64 * t);
            assert!((v / w - direct).norm() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn series_tail_refusal_names_the_required_window() {
        let psi = TestFunction::gaussian(0.0, 0.05);
        let err = convolve_series(&comb(5), &psi, 0.0, 0.1, 10, Extent::Window { tolerance: 1e-9 }).unwrap_err();
        match err {
            Error::TailTooLarge { required, .. } => assert!(required > 5.0),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn series_from_periodic_spectrum_has_period_sixteen() {
        let s16 = construct_dense(16, &rat(1, 8)).unwrap();
        let fhat = s16.transform_window(12.0).unwrap();
        let psi = TestFunction::gaussian(0.0, 1.0);
        let s = convolve_series(&fhat, &psi, 0.0, 1.0 / 16.0, 16 * 32 + 1, Extent::Window { tolerance: 1e-9 }).unwrap();
        let scale = s.samples.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(scale > 0.0);
        for i in 0..16 * 16 {
            let d = (s.samples.values[i + 256] - s.samples.values[i]).norm();
            assert!(d < 1e-8 * scale.max(1.0), "i={i} d={d}");
        }
    }

    #[test]
    fn almost_periods_of_a_pure_exponential_are_the_integers() {
        let g = Samples::from_fn(0.0, 0.125, 801, cis);
        let a = find_almost_periods(&g, 1e-9, 50.0, 0.125).unwrap();
        let taus: Vec<f64> = a.almost_periods.iter().map(|p| p.tau).collect();
        assert_eq!(taus, (1..=50).map(|k| k as f64).collect::<Vec<_>>());
        assert!(a.almost_periods.iter().all(|p| p.defect < 1e-12));
        assert_eq!(a.max_gap, 1.0);
    }

    #[test]
    fn two_frequency_search_is_relatively_dense() {
        let s2 = 2f64.sqrt();
        let g = Samples::from_fn(0.0, 0.05, 8001, |t| cis(t) + cis(s2 * t));
        let a = find_almost_periods(&g, 0.2, 200.0, 0.05).unwrap();
        assert!(!a.almost_periods.is_empty());
        assert!(a.max_gap < 200.0);
        // oracle: τ is an ε-almost period when both τ and √2 τ are near integers
        for p in &a.almost_periods {
            let d = |x: f64| (x - x.round()).abs();
            assert!(2.0 * PI * (d(p.tau) + d(s2 * p.tau)) > p.defect - 1e-9);
        }
    }

    #[test]
    fn linear_drift_has_no_almost_periods() {
        let g = Samples::from_fn(0.0, 0.1, 1001, |t| c(t, 0.0));
        let a = find_almost_periods(&g, 0.05, 20.0, 0.1).unwrap();
        assert!(a.almost_periods.is_empty());
        assert!(find_almost_periods(&g, 0.05, 0.5, 0.1).is_err());
        assert!(find_almost_periods(&g, 0.05, 20.0, 0.15).is_err());
    }

    #[test]
    fn bohr_examples() {
        let radii = [10.0, 100.0, 1000.0];
        let g = |t: f64| cis(2.0 * t) * 3.0;
        assert!((bohr_coefficient(g, 2.0, &radii, 16).unwrap().value - c(3.0, 0.0)).norm() < 1e-3);
        assert!(bohr_coefficient(g, 1.0, &radii, 16).unwrap().value.norm() < 1e-3);
        let h = |t: f64| cis(t) * 2.0 + c(0.0, 1.0) * cis(1.4 * t);
        let r = bohr_coefficient(h, 1.4, &[100.0, 1000.0, 10_000.0], 16).unwrap();
        assert!((r.value - c(0.0, 1.0)).norm() < 1e-3);
        assert!(bohr_coefficient(g, 2.0, &[1.0, 2.0], 16).is_err());
        assert!(bohr_coefficient(g, 2.0, &[1.0, 2.0, 5.0], 16).is_err());
    }

    #[test]
    fn bohr_error_decays_like_the_closed_form() {
        // (1/2R) ∫ e^{2πiνt} = sin(2πνR)/(2πνR)
        let nu = 0.3;
        let radii = [10.25, 41.0, 164.0];
        let r = bohr_coefficient(|t| cis(nu * t), 0.0, &radii, 32).unwrap();
        // trapezoid error is at most h^2 max|g''| / 12 for the mean
        let quad = (1.0f64 / 32.0).powi(2) * (2.0 * PI * nu).powi(2) / 12.0;
        for (v, &rr) in r.values.iter().zip(&radii) {
            let exact = (2.0 * PI * nu * rr).sin() / (2.0 * PI * nu * rr);
            assert!((v - c(exact, 0.0)).norm() <= quad);
            assert!(v.norm() <= 1.0 / (2.0 * PI * nu * rr) + quad);
        }
    }

    #[test]
    fn non_convergent_mean_is_reported() {
        // g(t) = t^2 has no mean
        let e = bohr_coefficient(|t| c(t * t, 0.0), 0.0, &[1.0, 10.0, 100.0], 4).unwrap_err();
        assert!(matches!(e, Error::NotConverged(_)));
    }

    #[test]
    fn ronkin_of_the_integer_comb() {
        let f = comb(80);
        let phi = TestFunction::gaussian(0.0, 1.0);
        let phi2 = TestFunction::gaussian(0.25, 0.8);
        let radii = [16.0, 32.0, 64.0];
        for (lambda, want) in [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)] {
            let r = ronkin_coefficient(Source::Distribution(&f), lambda, &phi, &phi2, &radii, 5e-3).unwrap();
            assert!((r.value - c(want, 0.0)).norm() < 5e-3, "{lambda}: {}", r.value);
            assert!(r.phi_independent);
        }
        let wide = TestFunction::gaussian(0.0, 8.0);
        assert!(ronkin_coefficient(Source::Distribution(&f), 2.0, &wide, &phi2, &radii, 5e-3).is_err());
        assert!(ronkin_coefficient(Source::Distribution(&f), 0.0, &phi, &phi2, &[40.0, 80.0, 160.0], 5e-3).is_err());
    }

    #[test]
    fn ronkin_is_linear() {
        let f1 = comb(80);
        let f2 = DiscreteDistribution::measure(
            80.0,
            (-160..=160).map(|k| (Real::Exact(rat(k, 2)), c(0.5, 0.25))),
        )
        .unwrap();
        let sum = f1.plus(&f2);
        let phi = TestFunction::gaussian(0.0, 1.0);
        let phi2 = TestFunction::gaussian(0.1, 0.7);
        let radii = [16.0, 32.0, 64.0];
        for lambda in [0.0, 0.5, 1.0] {
            let a = |f: &DiscreteDistribution| {
                ronkin_coefficient(Source::Distribution(f), lambda, &phi, &phi2, &radii, 5e-3).unwrap().value
            };
            assert!((a(&sum) - a(&f1) - a(&f2)).norm() < 1e-9);
        }
    }

    #[test]
    fn ronkin_matches_bohr_for_a_continuous_function() {
        let g = |t: f64| cis(t) * 2.0 + c(0.0, 1.0) * cis(1.4 * t) + c(1.0, 0.0);
        let phi = TestFunction::gaussian(0.0, 1.0);
        let phi2 = TestFunction::gaussian(0.0, 0.6);
        let radii = [25.0, 50.0, 100.0];
        for (lambda, want) in [(0.0, c(1.0, 0.0)), (1.0, c(2.0, 0.0)), (1.4, c(0.0, 1.0))] {
            let r = ronkin_coefficient(Source::Function(&g), lambda, &phi, &phi2, &radii, 5e-3).unwrap();
            let b = bohr_coefficient(g, lambda, &radii, 32).unwrap();
            assert!((r.value - b.value).norm() < 5e-3, "{lambda}");
            assert!((r.value - want).norm() < 5e-3);
        }
    }

    #[test]
    fn theorem7_examples() {
        let phi = TestFunction::gaussian(0.0, 1.0);
        let radii = [16.0, 32.0, 64.0];
        let cands: Vec<(f64, Complex64)> = (-2..=2).map(|k| (k as f64, c(1.0, 0.0))).collect();
        let r = theorem7_check(Source::Distribution(&comb(80)), &cands, &phi, &radii, 5e-3).unwrap();
        assert!(r.max_discrepancy < 5e-3, "{}", r.max_discrepancy);
        assert_eq!(r.verdict, "pass");

        let one = |_t: f64| c(1.0, 0.0);
        let r = theorem7_check(Source::Function(&one), &[(3.0, c(0.0, 0.0))], &phi, &[10.0, 100.0, 1000.0], 5e-3).unwrap();
        assert!(r.rows[0].coefficient.norm() < 1e-9);
    }

    #[test]
    fn theorem7_on_sigma_sixteen_outside_the_hole() {
        let s16 = construct_dense(16, &rat(1, 8)).unwrap();
        let f = crate::periodic::Sigma::Materialized(s16.clone()).window(140.0).unwrap();
        let fhat = s16.transform_window(4.0).unwrap();
        let cands: Vec<(f64, Complex64)> = fhat
            .atoms()
            .iter()
            .filter(|a: &&Atom| a.location.abs_f64() >= 2.0 && a.location.abs_f64() < 3.0)
            .map(|a| (a.location.to_f64(), a.mass))
            .collect();
        assert!(cands.iter().any(|c| c.1.norm() > 1e-3));
        let phi = TestFunction::gaussian(0.0, 0.4);
        let r = theorem7_check(Source::Distribution(&f), &cands, &phi, &[32.0, 64.0, 128.0], 5e-3).unwrap();
        assert!(r.max_discrepancy < 5e-3, "{}", r.max_discrepancy);
    }

    #[test]
    fn finite_series_is_almost_periodic_in_the_tested_sense() {
        let d = DiscreteDistribution::measure(
            3.0,
            [
                (Real::Exact(int(0)), c(1.0, 0.0)),
                (Real::Exact(int(1)), c(2.0, 0.0)),
                (Real::Exact(rat(7, 5)), c(0.0, 1.0)),
            ],
        )
        .unwrap();
        let psi = TestFunction::gaussian(0.0, 1e-8);
        let s = convolve_series(&d, &psi, 0.0, 0.05, 4001, Extent::Complete).unwrap();
        let total: f64 = s.frequencies.iter().map(|f| f.1.norm()).sum();
        let a = find_almost_periods(&s.samples, 0.1 * total, 100.0, 0.05).unwrap();
        assert!(!a.almost_periods.is_empty());
        assert!(a.max_gap <= 5.0 + 1e-9);
    }

    #[test]
    fn samples_csv_round_trip() {
        let g = Samples::from_fn(-1.0, 0.5, 5, |t| c(t, -t));
        let back = Samples::from_csv(&g.to_csv()).unwrap();
        assert_eq!(back.values, g.values);
        assert!(Samples::from_csv("t,re\n0,1\n1,2\n3,4\n").is_err());
        assert!(Samples::from_csv("0,1\nx,2\n").is_err());
    }
}
