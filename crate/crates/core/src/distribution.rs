//! Finite windows of discrete tempered distributions `Σ p_k(λ) D^k δ_λ` on the
//! line, their action on test functions and growth diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::exact::Real;
use crate::fit::{geometric_grid, power_fit, PowerFit};
use crate::pointset::{fit_p_discreteness, PDiscreteFit, PointSet};
use crate::schwartz::{DerivativeTable, TestFunction, MAX_DERIVATIVE_ORDER};
use crate::sum::{sum_f64, ComplexSum};

/// Log–log residual below which a fit counts as polynomial growth.
pub const FIT_RESIDUAL_THRESHOLD: f64 = 0.15;

const T_GRID_MAX: f64 = 8.0;
const T_GRID_STEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "point", with = "single_coordinate")]
    pub location: Real,
    #[serde(default)]
    pub order: u32,
    pub mass: Complex64,
}

impl Atom {
    pub fn new(location: Real, order: u32, mass: Complex64) -> Self {
        Self {
            location,
            order,
            mass,
        }
    }

    pub fn dirac(location: Real, mass: Complex64) -> Self {
        Self::new(location, 0, mass)
    }
}

mod single_coordinate {
    use crate::exact::Real;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &Real, s: S) -> Result<S::Ok, S::Error> {
        [x].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Real, D::Error> {
        let mut v = Vec::<Real>::deserialize(d)?;
        if v.len() != 1 {
            return Err(D::Error::custom(format!(
                "expected a one-dimensional point, got {} coordinates",
                v.len()
            )));
        }
        Ok(v.pop().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawDistribution {
    dimension: usize,
    window_radius: f64,
    atoms: Vec<Atom>,
}

/// Atoms are kept sorted by `|λ|` (ties by `λ`, then order) with unique `(λ, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DiscreteDistribution {
    window_radius: f64,
    atoms: Vec<Atom>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = Error;
    fn try_from(raw: RawDistribution) -> Result<Self> {
        if raw.dimension != 1 {
            return Err(Error::Unsupported(format!(
                "distributions of dimension {}",
                raw.dimension
            )));
        }
        Self::new(raw.window_radius, raw.atoms)
    }
}

impl From<DiscreteDistribution> for RawDistribution {
    fn from(d: DiscreteDistribution) -> Self {
        RawDistribution {
            dimension: 1,
            window_radius: d.window_radius,
            atoms: d.atoms,
        }
    }
}

fn atom_cmp(a: &Atom, b: &Atom) -> Ordering {
    a.location
        .cmp_abs(&b.location)
        .then(a.order.cmp(&b.order))
}

impl DiscreteDistribution {
    /// Validates the window and merges repeated `(λ, k)` pairs by adding masses.
    pub fn new(window_radius: f64, mut atoms: Vec<Atom>) -> Result<Self> {
        if !(window_radius > 0.0 && window_radius.is_finite()) {
            return Err(Error::InvalidPointSet(format!(
                "window radius must be positive, got {window_radius}"
            )));
        }
        for a in &atoms {
            if a.location.abs_f64() > window_radius * (1.0 + 1e-12) {
                return Err(Error::InvalidPointSet(format!(
                    "atom at {} outside window radius {window_radius}",
                    a.location
                )));
            }
            if !(a.mass.re.is_finite() && a.mass.im.is_finite()) {
                return Err(Error::InvalidPointSet(format!(
                    "non-finite mass at {}",
                    a.location
                )));
            }
        }
        atoms.sort_by(atom_cmp);
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if atom_cmp(last, &a) == Ordering::Equal => last.mass += a.mass,
                _ => merged.push(a),
            }
        }
        Ok(Self {
            window_radius,
            atoms: merged,
        })
    }

    pub fn measure<I: IntoIterator<Item = (Real, Complex64)>>(
        window_radius: f64,
        atoms: I,
    ) -> Result<Self> {
        Self::new(
            window_radius,
            atoms
                .into_iter()
                .map(|(x, m)| Atom::dirac(x, m))
                .collect(),
        )
    }

    /// Unit masses at the integers of `[-window, window]`.
    pub fn integer_comb(window_radius: f64) -> Self {
        let n = window_radius.floor() as i64;
        Self::measure(
            window_radius,
            (-n..=n).map(|k| (Real::Exact(crate::exact::int(k)), Complex64::new(1.0, 0.0))),
        )
        .expect("integers inside the window")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn window_radius(&self) -> f64 {
        self.window_radius
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Largest derivative order `K` carried by the window.
    pub fn max_order(&self) -> u32 {
        self.atoms.iter().map(|a| a.order).max().unwrap_or(0)
    }

    pub fn is_measure(&self) -> bool {
        self.atoms.iter().all(|a| a.order == 0)
    }

    /// Distinct locations as a point set.
    pub fn support(&self) -> Result<PointSet> {
        let mut xs: Vec<Real> = self.atoms.iter().map(|a| a.location.clone()).collect();
        xs.sort_by(|a, b| a.cmp_value(b));
        xs.dedup_by(|a, b| a.cmp_value(b) == Ordering::Equal);
        PointSet::line(self.window_radius, xs)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.mass *= factor;
        }
        out
    }

    /// Sum of two windows on the larger of the two radii.
    pub fn plus(&self, other: &Self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Self::new(self.window_radius.max(other.window_radius), atoms).expect("valid operands")
    }

    /// Atoms with `lo < λ < hi`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Self {
        Self {
            window_radius: self.window_radius,
            atoms: self
                .atoms
                .iter()
                .filter(|a| {
                    let x = a.location.to_f64();
                    lo < x && x < hi
                })
                .cloned()
                .collect(),
        }
    }

    /// `Σ (-1)^k p_k(λ) φ^(k)(λ)`, in `|λ|` order with compensated summation.
    pub fn apply(&self, phi: &TestFunction) -> Result<Complex64> {
        let k = self.max_order() as usize;
        if k > MAX_DERIVATIVE_ORDER {
            return Err(Error::Unsupported(format!(
                "derivative order {k} > {MAX_DERIVATIVE_ORDER}"
            )));
        }
        let table = DerivativeTable::new(phi, k);
        Ok(self.apply_with(|x, order| table.at(x.to_f64())[order as usize]))
    }

    /// Same pairing for a caller-supplied derivative oracle `(λ, k) -> φ^(k)(λ)`.
    pub fn apply_with<F: Fn(&Real, u32) -> Complex64>(&self, phi: F) -> Complex64 {
        let mut acc = ComplexSum::new();
        for a in &self.atoms {
            let v = a.mass * phi(&a.location, a.order);
            acc += if a.order % 2 == 1 { -v } else { v };
        }
        acc.sum()
    }

    /// Upper bound for the pairing with `φ` of the atoms lying beyond the window,
    /// assuming the continuation keeps the window's density and coefficient growth.
    pub fn tail_bound(&self, phi: &TestFunction) -> Result<f64> {
        self.tail_bound_from(self.window_radius, phi)
    }

    /// [`Self::tail_bound`] for the atoms beyond `radius` instead of the window edge.
    pub fn tail_bound_from(&self, radius: f64, phi: &TestFunction) -> Result<f64> {
        let growth = match self.coefficient_growth_check() {
            CoefficientGrowth::Bound { c, t } => (c, t),
            CoefficientGrowth::Violation { .. } => return Ok(f64::INFINITY),
        };
        let density = self.unit_density() as f64;
        let r = radius;
        let mut total = 0.0;
        for k in 0..=self.max_order() as usize {
            let mut side = 0.0;
            let mut j = 0usize;
            loop {
                let x = r + j as f64;
                let env = phi.envelope_beyond(x, k)?;
                let term = density * growth.0 * (x + 1.0).max(1.0).powf(growth.1) * env;
                side += term;
                if term <= 1e-18 * side || term == 0.0 {
                    break;
                }
                j += 1;
                if j > 1_000_000 {
                    return Ok(f64::INFINITY);
                }
            }
            total += 2.0 * side;
        }
        Ok(total)
    }

    /// Largest number of distinct locations in a closed unit interval.
    fn unit_density(&self) -> usize {
        let mut xs: Vec<f64> = self.atoms.iter().map(|a| a.location.to_f64()).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut best = 0;
        let mut lo = 0;
        for hi in 0..xs.len() {
            while xs[hi] - xs[lo] > 1.0 {
                lo += 1;
            }
            best = best.max(hi - lo + 1);
        }
        best
    }

    /// `ρ_f(r) = Σ_{|λ|<r} Σ_k |p_k(λ)|`.
    pub fn rho(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || r > self.window_radius * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(format!(
                "radius {r} outside (0, {}]",
                self.window_radius
            )));
        }
        Ok(sum_f64(
            self.atoms
                .iter()
                .take_while(|a| a.location.abs_f64() < r)
                .map(|a| a.mass.norm()),
        ))
    }

    /// `|μ|(B(0,r))` for measures.
    pub fn variation(&self, r: f64) -> Result<f64> {
        if !self.is_measure() {
            return Err(Error::NotAMeasure(format!(
                "order {} atoms present",
                self.max_order()
            )));
        }
        self.rho(r)
    }

    pub fn growth_report(&self) -> Result<GrowthReport> {
        let radii = geometric_grid(self.window_radius / 64.0, self.window_radius, 16);
        let rho_samples: Vec<(f64, f64)> = radii
            .iter()
            .map(|&r| Ok((r, self.rho(r)?)))
            .collect::<Result<_>>()?;
        let nonzero = rho_samples.iter().filter(|s| s.1 > 0.0).count();
        if nonzero < 8 {
            return Err(Error::InsufficientSamples(format!(
                "{nonzero} radii with nonzero rho, need 8"
            )));
        }
        let fit = power_fit(&rho_samples);
        let h = (fit.exponent - 1.0).max(0.0);
        let variation_samples = if self.is_measure() {
            rho_samples.clone()
        } else {
            Vec::new()
        };
        let tempered = fit.residual < FIT_RESIDUAL_THRESHOLD;
        // an exponent within the fit tolerance of an integer counts as that integer
        let spectral_order_bound = (h + FIT_RESIDUAL_THRESHOLD).floor() as u32;
        let transform_is_measure = fit.exponent <= 1.0 + FIT_RESIDUAL_THRESHOLD;
        let verdict = if !tempered {
            "growth not polynomial within window".to_string()
        } else if transform_is_measure {
            "measure transform, order 0".to_string()
        } else {
            format!("transform order at most {spectral_order_bound}")
        };
        Ok(GrowthReport {
            rho_samples,
            rho_fit: fit,
            exponent: fit.exponent,
            h,
            variation_samples,
            tempered,
            temperedness_exponent: tempered.then_some(fit.exponent),
            spectral_order_bound,
            transform_is_measure,
            verdict,
        })
    }

    /// Smallest `T` on the grid `0, 1/2, …, 8` for which the constant fitted on
    /// `|λ| <= R/2` also bounds the outer half of the window.
    pub fn coefficient_growth_check(&self) -> CoefficientGrowth {
        let half = 0.5 * self.window_radius;
        let weight = |a: &Atom, t: f64| a.location.abs_f64().max(1.0).powf(t);
        let steps = (T_GRID_MAX / T_GRID_STEP) as usize;
        let mut worst = None;
        for i in 0..=steps {
            let t = i as f64 * T_GRID_STEP;
            let c = self
                .atoms
                .iter()
                .filter(|a| a.location.abs_f64() <= half)
                .map(|a| a.mass.norm() / weight(a, t))
                .fold(0.0, f64::max);
            let (ratio, at) = self
                .atoms
                .iter()
                .map(|a| (a.mass.norm() / (c * weight(a, t)), a))
                .fold((0.0, None), |acc, (r, a)| {
                    if r > acc.0 {
                        (r, Some(a))
                    } else {
                        acc
                    }
                });
            if ratio <= 1.0 + 1e-12 {
                return CoefficientGrowth::Bound { c, t };
            }
            worst = at.map(|a| (a.location.clone(), ratio, t));
        }
        let (location, ratio, t_max) = worst.expect("violation has a witness atom");
        CoefficientGrowth::Violation {
            t_max,
            worst_location: location,
            ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub rho_samples: Vec<(f64, f64)>,
    pub rho_fit: PowerFit,
    /// Fitted exponent `1 + H` of `ρ_f`.
    pub exponent: f64,
    pub h: f64,
    pub variation_samples: Vec<(f64, f64)>,
    pub tempered: bool,
    pub temperedness_exponent: Option<f64>,
    pub spectral_order_bound: u32,
    pub transform_is_measure: bool,
    pub verdict: String,
}

impl GrowthReport {
    /// CSV with columns `r,rho,variation` (variation empty for non-measures).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,rho,variation\n");
        for (i, &(r, rho)) in self.rho_samples.iter().enumerate() {
            let v = self
                .variation_samples
                .get(i)
                .map(|v| format!("{:.16e}", v.1))
                .unwrap_or_default();
            s.push_str(&format!("{r:.16e},{rho:.16e},{v}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CoefficientGrowth {
    Bound { c: f64, t: f64 },
    Violation {
        t_max: f64,
        worst_location: Real,
        ratio: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub p_discrete_fit: Option<PDiscreteFit>,
    pub p_discrete_diagnostic: String,
    pub growth_exponent: Option<f64>,
    pub growth_residual: Option<f64>,
    pub polynomial_growth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FqVerdict {
    pub verdict: String,
    pub fourier_quasicrystal: bool,
    pub failed_hypothesis: Option<String>,
    pub measure: SideReport,
    pub transform: SideReport,
}

fn side_report(mu: &DiscreteDistribution, h_max: f64) -> Result<SideReport> {
    let support = mu.support()?;
    let (fit, diag) = match fit_p_discreteness(&support, h_max) {
        Ok(o) => (o.fit, o.diagnostic),
        Err(e) => (None, e.to_string()),
    };
    let growth = mu.growth_report().ok();
    Ok(SideReport {
        p_discrete_fit: fit,
        p_discrete_diagnostic: diag,
        growth_exponent: growth.as_ref().map(|g| g.exponent),
        growth_residual: growth.as_ref().map(|g| g.rho_fit.residual),
        polynomial_growth: growth.is_some_and(|g| g.tempered),
    })
}

/// Windowed check of the hypotheses under which a crystalline measure is a
/// Fourier quasicrystal: p-discrete support and spectrum, polynomial growth.
pub fn fq_verdict(
    mu: &DiscreteDistribution,
    mu_hat: &DiscreteDistribution,
    h_max: f64,
) -> Result<FqVerdict> {
    for (name, d) in [("measure", mu), ("transform", mu_hat)] {
        if !d.is_measure() {
            return Err(Error::NotAMeasure(format!(
                "{name} carries atoms of order {}",
                d.max_order()
            )));
        }
    }
    let a = side_report(mu, h_max)?;
    let b = side_report(mu_hat, h_max)?;
    let failed = if a.p_discrete_fit.is_none() {
        Some("support not p-discrete".to_string())
    } else if b.p_discrete_fit.is_none() {
        Some("spectrum not p-discrete".to_string())
    } else if !a.polynomial_growth {
        Some("variation of the measure not polynomial".to_string())
    } else if !b.polynomial_growth {
        Some("variation of the transform not polynomial".to_string())
    } else {
        None
    };
    Ok(FqVerdict {
        verdict: match &failed {
            None => "Fourier quasicrystal (within window)".to_string(),
            Some(f) => format!("hypothesis failed: {f}"),
        },
        fourier_quasicrystal: failed.is_none(),
        failed_hypothesis: failed,
        measure: a,
        transform: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};
    use proptest::prelude::*;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn at(n: i64) -> Real {
        Real::Exact(int(n))
    }

    fn masses_on_integers(w: i64, f: impl Fn(i64) -> f64) -> DiscreteDistribution {
        DiscreteDistribution::measure(w as f64, (-w..=w).map(|n| (at(n), Complex64::new(f(n), 0.0))))
            .unwrap()
    }

    #[test]
    fn apply_examples() {
        let g = TestFunction::standard_gaussian();
        let delta0 = DiscreteDistribution::measure(1.0, [(at(0), one())]).unwrap();
        assert_eq!(delta0.apply(&g).unwrap(), one());
        let d1 = DiscreteDistribution::new(1.0, vec![Atom::new(at(0), 1, one())]).unwrap();
        assert_eq!(d1.apply(&g).unwrap().norm(), 0.0);
        let bump = TestFunction::bump(0.0, 1.0 / 3.0, 0.5, 1.0).unwrap();
        let diff = DiscreteDistribution::measure(2.0, [(at(1), one()), (at(0), -one())]).unwrap();
        assert_eq!(diff.apply(&bump).unwrap(), -one());
    }

    #[test]
    fn derivative_atoms_carry_sign() {
        // D δ_1 applied to φ is -φ'(1)
        let g = TestFunction::standard_gaussian();
        let d = DiscreteDistribution::new(2.0, vec![Atom::new(at(1), 1, one())]).unwrap();
        let expect = -g.derivative_at(1.0, 1).unwrap();
        assert!((d.apply(&g).unwrap() - expect).norm() < 1e-15);
        let d2 = DiscreteDistribution::new(2.0, vec![Atom::new(at(1), 2, one())]).unwrap();
        assert!((d2.apply(&g).unwrap() - g.derivative_at(1.0, 2).unwrap()).norm() < 1e-15);
        assert_eq!(d2.max_order(), 2);
        assert!(!d2.is_measure());
        let d9 = DiscreteDistribution::new(2.0, vec![Atom::new(at(1), 9, one())]).unwrap();
        assert!(matches!(d9.apply(&g), Err(Error::Unsupported(_))));
    }

    #[test]
    fn repeated_pairs_merge() {
        let d = DiscreteDistribution::new(
            3.0,
            vec![
                Atom::new(Real::Exact(rat(1, 2)), 0, one()),
                Atom::new(Real::Exact(rat(2, 4)), 0, one()),
                Atom::new(Real::Exact(rat(1, 2)), 1, one()),
            ],
        )
        .unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.atoms()[0].mass, Complex64::new(2.0, 0.0));
        assert!(DiscreteDistribution::measure(1.0, [(at(2), one())]).is_err());
    }

    #[test]
    fn rho_examples() {
        let comb = DiscreteDistribution::integer_comb(100.0);
        assert_eq!(comb.rho(10.5).unwrap(), 21.0);
        let d = DiscreteDistribution::measure(
            20.0,
            (1..=20).map(|n| (at(n), Complex64::new(n as f64, 0.0))),
        )
        .unwrap();
        assert_eq!(d.rho(5.5).unwrap(), 15.0);
        assert_eq!(comb.rho(100.0).unwrap(), 199.0);
        assert!(comb.rho(101.0).is_err());
    }

    #[test]
    fn rho_at_window_is_total_mass_plus_boundary() {
        let comb = DiscreteDistribution::integer_comb(50.5);
        let total: f64 = comb.atoms().iter().map(|a| a.mass.norm()).sum();
        assert_eq!(comb.rho(50.5).unwrap(), total);
    }

    #[test]
    fn growth_report_examples() {
        let comb = DiscreteDistribution::integer_comb(200.0);
        let r = comb.growth_report().unwrap();
        assert!((r.exponent - 1.0).abs() < 0.15, "{}", r.exponent);
        assert_eq!(r.spectral_order_bound, 0);
        assert!(r.transform_is_measure);
        assert_eq!(r.verdict, "measure transform, order 0");

        let lin = masses_on_integers(200, |n| n.abs() as f64);
        let r = lin.growth_report().unwrap();
        // oracle: ρ(r) = 2 Σ_{n<r} n, fitted independently on the same radii
        let samples: Vec<(f64, f64)> = r
            .rho_samples
            .iter()
            .map(|&(x, _)| {
                let m = (x.ceil() as i64) - 1;
                (x, (m * (m + 1)) as f64)
            })
            .collect();
        let oracle = power_fit(&samples);
        assert!((r.exponent - oracle.exponent).abs() < 1e-12);
        assert!((r.exponent - 2.0).abs() < 0.15, "{}", r.exponent);
        assert_eq!(r.spectral_order_bound, 1);
        assert!(!r.transform_is_measure);
        assert!(r.to_csv().lines().count() == 17);
    }

    #[test]
    fn growth_report_needs_samples() {
        let d = DiscreteDistribution::measure(100.0, [(at(99), one())]).unwrap();
        assert!(matches!(d.growth_report(), Err(Error::InsufficientSamples(_))));
    }

    #[test]
    fn coefficient_growth_examples() {
        let comb = DiscreteDistribution::integer_comb(50.0);
        assert_eq!(comb.coefficient_growth_check(), CoefficientGrowth::Bound { c: 1.0, t: 0.0 });
        let sq = masses_on_integers(50, |n| (n * n) as f64);
        assert_eq!(sq.coefficient_growth_check(), CoefficientGrowth::Bound { c: 1.0, t: 2.0 });
        let ex = masses_on_integers(50, |n| (n.abs() as f64).exp());
        match ex.coefficient_growth_check() {
            CoefficientGrowth::Violation { t_max, worst_location, .. } => {
                assert_eq!(t_max, 8.0);
                assert_eq!(worst_location.abs_f64(), 50.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn poisson_self_duality_on_integer_comb() {
        let comb = DiscreteDistribution::integer_comb(100.0);
        for phi in [
            TestFunction::standard_gaussian(),
            TestFunction::gaussian(0.3, 1.7),
            TestFunction::gaussian(0.0, 0.6),
        ] {
            let a = comb.apply(&phi).unwrap();
            let b = comb.apply(&phi.fourier().unwrap()).unwrap();
            let tail = comb.tail_bound(&phi).unwrap() + comb.tail_bound(&phi.fourier().unwrap()).unwrap();
            assert!(tail < 1e-12, "{tail}");
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn tail_bound_dominates_truncation() {
        let phi = TestFunction::gaussian(0.0, 4.0);
        let small = DiscreteDistribution::integer_comb(6.0);
        let big = DiscreteDistribution::integer_comb(60.0);
        let err = (big.apply(&phi).unwrap() - small.apply(&phi).unwrap()).norm();
        let bound = small.tail_bound(&phi).unwrap();
        assert!(err <= bound, "{err} > {bound}");
        assert!(bound < 1.0);
    }

    #[test]
    fn json_round_trip_with_orders() {
        let s = r#"{"dimension":1,"window_radius":4,"atoms":[
            {"point":["1/2"],"order":1,"mass":[1.0,0.5]},
            {"point":[-3],"mass":[2.0,0.0]}]}"#;
        let d = DiscreteDistribution::from_json(s).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.atoms()[0].location, Real::Exact(rat(1, 2)));
        assert_eq!(d.atoms()[1].order, 0);
        let back = DiscreteDistribution::from_json(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
        assert!(DiscreteDistribution::from_json(r#"{"dimension":2,"window_radius":1,"atoms":[]}"#).is_err());
    }

    #[test]
    fn fq_verdict_on_lattice() {
        let comb = DiscreteDistribution::integer_comb(100.0);
        let v = fq_verdict(&comb, &comb, 16.0).unwrap();
        assert!(v.fourier_quasicrystal, "{v:?}");
        assert_eq!(v.measure.p_discrete_fit.as_ref().unwrap().h, 0.0);
        let d1 = DiscreteDistribution::new(2.0, vec![Atom::new(at(1), 1, one())]).unwrap();
        assert!(matches!(fq_verdict(&d1, &comb, 16.0), Err(Error::NotAMeasure(_))));
    }

    #[test]
    fn fq_verdict_flags_clustered_support() {
        // pairs n, n + 2^-n on n ≤ 150: 2^-150 is below 150^-16
        let mut atoms = Vec::new();
        for n in 2..=150i64 {
            atoms.push((at(n), one()));
            atoms.push((Real::Exact(int(n) + crate::exact::pow2(-n)), -one()));
        }
        let mu = DiscreteDistribution::measure(151.0, atoms).unwrap();
        let comb = DiscreteDistribution::integer_comb(100.0);
        let v = fq_verdict(&mu, &comb, 16.0).unwrap();
        assert_eq!(v.failed_hypothesis.as_deref(), Some("support not p-discrete"));
    }

    proptest! {
        #[test]
        fn linearity(
            xs in proptest::collection::vec((-40i64..40, -3.0f64..3.0, -3.0f64..3.0), 1..30),
            ys in proptest::collection::vec((-40i64..40, -3.0f64..3.0, -3.0f64..3.0), 1..30),
            a in -2.0f64..2.0, b in -2.0f64..2.0,
            c in -5.0f64..5.0, w in 0.5f64..6.0,
        ) {
            let mk = |v: &Vec<(i64, f64, f64)>| DiscreteDistribution::measure(
                40.0, v.iter().map(|&(n, re, im)| (Real::Exact(rat(n, 1)), Complex64::new(re, im)))).unwrap();
            let f = mk(&xs);
            let g = mk(&ys);
            let phi = TestFunction::gaussian(c, w);
            let (ca, cb) = (Complex64::new(a, 0.0), Complex64::new(b, 0.0));
            let lhs = f.scaled(ca).plus(&g.scaled(cb)).apply(&phi).unwrap();
            let fa = f.apply(&phi).unwrap();
            let gb = g.apply(&phi).unwrap();
            let rhs = ca * fa + cb * gb;
            let scale = (ca * fa).norm() + (cb * gb).norm();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale.max(1e-300) + 1e-300);
        }

        #[test]
        fn rho_is_monotone(masses in proptest::collection::vec(0.0f64..5.0, 41), r1 in 0.1f64..20.0, r2 in 0.1f64..20.0) {
            let d = DiscreteDistribution::measure(20.0, masses.iter().enumerate().map(|(i, &m)| (at(i as i64 - 20), Complex64::new(m, 0.0)))).unwrap();
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(d.rho(lo).unwrap() <= d.rho(hi).unwrap());
        }

        #[test]
        fn max_order_is_max_stored_order(orders in proptest::collection::vec(0u32..9, 1..20)) {
            let atoms: Vec<Atom> = orders.iter().enumerate().map(|(i, &k)| Atom::new(at(i as i64), k, one())).collect();
            let d = DiscreteDistribution::new(30.0, atoms).unwrap();
            prop_assert_eq!(d.max_order(), *orders.iter().max().unwrap());
            prop_assert_eq!(d.is_measure(), orders.iter().all(|&k| k == 0));
        }
    }
}
