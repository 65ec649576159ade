//! Weight priors dual to stationary kernels, the Matérn spectral density and
//! a numerical Wiener–Khinchin transform.
//!
//! A symmetric prior `p(w)` on the hidden-layer frequencies of a network with
//! a periodic activation induces the stationary kernel
//! `κ(r) = ∫ p(w) cos(w r) dw`. Student-t priors with `2ν` degrees of freedom
//! give the Matérn-ν kernel, Cauchy gives the exponential kernel and the
//! standard normal gives the RBF kernel.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, StudentT};
use statrs::distribution::{ContinuousCDF, StudentsT as StudentsTDist};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::quadrature;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorFamily {
    Normal,
    Cauchy,
    StudentT { dof: f64 },
}

/// Symmetric, zero-centred weight prior with a frequency scale.
///
/// `scale = 1/ℓ` realises a kernel with lengthscale `ℓ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPrior {
    pub family: PriorFamily,
    pub scale: f64,
}

impl WeightPrior {
    pub fn new(family: PriorFamily, scale: f64) -> Result<Self> {
        let prior = Self { family, scale };
        prior.validate()?;
        Ok(prior)
    }

    pub fn normal() -> Self {
        Self {
            family: PriorFamily::Normal,
            scale: 1.0,
        }
    }

    pub fn cauchy() -> Self {
        Self {
            family: PriorFamily::Cauchy,
            scale: 1.0,
        }
    }

    pub fn student_t(dof: f64) -> Result<Self> {
        Self::new(PriorFamily::StudentT { dof }, 1.0)
    }

    pub fn with_scale(self, scale: f64) -> Result<Self> {
        Self::new(self.family, scale)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior scale must be positive, got {}",
                self.scale
            )));
        }
        if let PriorFamily::StudentT { dof } = self.family {
            if !(dof > 0.0 && dof.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "Student-t degrees of freedom must be positive, got {dof}"
                )));
            }
        }
        Ok(())
    }

    /// Log-normaliser of the unit-scale density.
    fn log_norm(&self) -> f64 {
        match self.family {
            PriorFamily::Normal => -0.5 * (2.0 * PI).ln(),
            PriorFamily::Cauchy => -PI.ln(),
            PriorFamily::StudentT { dof } => {
                ln_gamma(0.5 * (dof + 1.0)) - ln_gamma(0.5 * dof) - 0.5 * (dof * PI).ln()
            }
        }
    }

    /// Log density without input checks.
    pub fn log_pdf_unchecked(&self, w: f64) -> f64 {
        let z = w / self.scale;
        let kernel = match self.family {
            PriorFamily::Normal => -0.5 * z * z,
            PriorFamily::Cauchy => -(z * z).ln_1p(),
            PriorFamily::StudentT { dof } => -0.5 * (dof + 1.0) * (z * z / dof).ln_1p(),
        };
        self.log_norm() + kernel - self.scale.ln()
    }

    pub fn log_pdf(&self, w: f64) -> Result<f64> {
        self.validate()?;
        if !w.is_finite() {
            return Err(Error::NonFinite(format!("weight {w}")));
        }
        Ok(self.log_pdf_unchecked(w))
    }

    pub fn pdf(&self, w: f64) -> f64 {
        self.log_pdf_unchecked(w).exp()
    }

    /// `d/dw log p(w)`.
    pub fn grad_log_pdf(&self, w: f64) -> f64 {
        let s2 = self.scale * self.scale;
        match self.family {
            PriorFamily::Normal => -w / s2,
            PriorFamily::Cauchy => -2.0 * w / (s2 + w * w),
            PriorFamily::StudentT { dof } => -(dof + 1.0) * w / (dof * s2 + w * w),
        }
    }

    pub fn cdf(&self, w: f64) -> f64 {
        let z = w / self.scale;
        match self.family {
            PriorFamily::Normal => 0.5 * statrs::function::erf::erfc(-z / 2f64.sqrt()),
            PriorFamily::Cauchy => 0.5 + z.atan() / PI,
            PriorFamily::StudentT { dof } => StudentsTDist::new(0.0, 1.0, dof)
                .expect("validated degrees of freedom")
                .cdf(z),
        }
    }

    /// One draw from the prior.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = match self.family {
            PriorFamily::Normal => rng.sample(rand_distr::StandardNormal),
            PriorFamily::Cauchy => Cauchy::new(0.0, 1.0).expect("unit Cauchy").sample(rng),
            PriorFamily::StudentT { dof } => StudentT::new(dof).expect("validated dof").sample(rng),
        };
        self.scale * z
    }
}

/// `log p(w)` for the prior.
pub fn prior_log_pdf(prior: &WeightPrior, w: f64) -> Result<f64> {
    prior.log_pdf(w)
}

/// `n` i.i.d. draws, deterministic in `seed`.
pub fn prior_sample(prior: &WeightPrior, seed: u64, n: usize) -> Result<Vec<f64>> {
    prior.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let mut rng = rng::seeded(seed);
    Ok((0..n).map(|_| prior.draw(&mut rng)).collect())
}

/// Unit-lengthscale Matérn spectral density
/// `S(ω) = 2√π·Γ(ν+½)/Γ(ν)·(2ν)^ν·(2ν+ω²)^−(ν+½)`.
pub fn matern_spectral_density(nu: f64, w: f64) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("smoothness must be positive, got {nu}")));
    }
    if !w.is_finite() {
        return Err(Error::NonFinite(format!("frequency {w}")));
    }
    let log_s = (2.0 * PI.sqrt()).ln() + ln_gamma(nu + 0.5) - ln_gamma(nu) + nu * (2.0 * nu).ln()
        - (nu + 0.5) * (2.0 * nu + w * w).ln();
    Ok(log_s.exp())
}

/// The weight prior whose scaled density is the spectral density of `spec`.
pub fn prior_for_kernel(spec: &KernelSpec) -> Result<WeightPrior> {
    spec.validate()?;
    let family = match spec.family {
        KernelFamily::Rbf => PriorFamily::Normal,
        KernelFamily::Exponential => PriorFamily::Cauchy,
        KernelFamily::Matern { nu } => PriorFamily::StudentT { dof: 2.0 * nu },
        other => {
            return Err(Error::Unsupported(format!(
                "no dual weight prior for non-stationary kernel {other:?}"
            )))
        }
    };
    WeightPrior::new(family, 1.0 / spec.lengthscale)
}

/// Inverse of [`prior_for_kernel`]: the unit-variance kernel induced by `prior`.
pub fn kernel_for_prior(prior: &WeightPrior) -> Result<KernelSpec> {
    prior.validate()?;
    let lengthscale = 1.0 / prior.scale;
    match prior.family {
        PriorFamily::Normal => KernelSpec::rbf(lengthscale, 1.0),
        PriorFamily::Cauchy => KernelSpec::exponential(lengthscale, 1.0),
        PriorFamily::StudentT { dof } => KernelSpec::matern(dof / 2.0, lengthscale, 1.0).map_err(|_| {
            Error::Unsupported(format!("Student-t with {dof} degrees of freedom has no closed-form kernel"))
        }),
    }
}

/// `κ(r) = ∫ p(w) cos(w r) dw` by numerical quadrature.
///
/// At `r = 0` the density is integrated directly with the exact tail mass
/// added. Otherwise the half-line is split at the zeros of `cos(w r)`; the
/// resulting alternating partial sums are accelerated by iterated averaging.
pub fn wiener_khinchin_numeric(prior: &WeightPrior, r: f64) -> Result<f64> {
    prior.validate()?;
    if !r.is_finite() {
        return Err(Error::NonFinite(format!("lag {r}")));
    }
    let unit = WeightPrior {
        family: prior.family,
        scale: 1.0,
    };
    let rho = (r * prior.scale).abs();
    if rho == 0.0 {
        return total_mass(&unit);
    }
    oscillatory(&unit, rho)
}

const SEGMENT_TOL: f64 = 1e-14;

fn total_mass(prior: &WeightPrior) -> Result<f64> {
    let mut mass = 0.0;
    let (mut a, mut b) = (0.0, 1.0);
    while b <= 64.0 {
        mass += quadrature::integrate(|w| prior.pdf(w), a, b, SEGMENT_TOL)?.0;
        a = b;
        b *= 2.0;
    }
    let tail = 1.0 - prior.cdf(a);
    Ok(2.0 * (mass + tail))
}

fn oscillatory(prior: &WeightPrior, rho: f64) -> Result<f64> {
    const ORDER: usize = 12;
    const MAX_SEGMENTS: usize = 200_000;
    const STABLE_TOL: f64 = 1e-11;

    let period = PI / rho;
    let integrand = |w: f64| prior.pdf(w) * (rho * w).cos();
    let mut partial = Vec::with_capacity(64);
    let mut sum = 2.0 * quadrature::integrate(integrand, 0.0, 0.5 * period, SEGMENT_TOL)?.0;
    partial.push(sum);
    let mut previous: Option<f64> = None;
    let mut last_change = f64::INFINITY;
    for j in 1..MAX_SEGMENTS {
        let a = (j as f64 - 0.5) * period;
        let seg = 2.0 * quadrature::integrate(integrand, a, a + period, SEGMENT_TOL)?.0;
        sum += seg;
        partial.push(sum);
        if seg.abs() < 1e-17 && j > 2 {
            return Ok(sum);
        }
        if partial.len() > 2 * ORDER {
            let estimate = averaged(&partial[partial.len() - ORDER - 1..]);
            if let Some(prev) = previous {
                last_change = (estimate - prev).abs();
                if last_change < STABLE_TOL {
                    return Ok(estimate);
                }
            }
            previous = Some(estimate);
        }
    }
    Err(Error::Quadrature {
        residual: last_change,
    })
}

/// Repeated neighbour averaging of partial sums of an alternating series.
fn averaged(sums: &[f64]) -> f64 {
    let mut s = sums.to_vec();
    while s.len() > 1 {
        s = s.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    s[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_prior_duals_invert() {
        for spec in [
            KernelSpec::rbf(2.0, 1.0).unwrap(),
            KernelSpec::exponential(0.5, 1.0).unwrap(),
            KernelSpec::matern(1.5, 1.0, 1.0).unwrap(),
        ] {
            let back = kernel_for_prior(&prior_for_kernel(&spec).unwrap()).unwrap();
            assert_eq!(back.variance, 1.0);
            assert_abs_diff_eq!(back.lengthscale, spec.lengthscale, epsilon = 1e-15);
            assert_eq!(back.eval_distance(0.7), spec.eval_distance(0.7));
        }
        assert!(kernel_for_prior(&WeightPrior::student_t(4.0).unwrap()).is_err());
    }

    #[test]
    fn log_pdf_at_mode() {
        assert_abs_diff_eq!(
            prior_log_pdf(&WeightPrior::normal(), 0.0).unwrap(),
            -0.918_938_533_204_672_7,
            epsilon = 1e-14
        );
        let t3 = WeightPrior::student_t(3.0).unwrap();
        assert_abs_diff_eq!(
            prior_log_pdf(&t3, 0.0).unwrap(),
            (2.0 / (PI * 3f64.sqrt())).ln(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(t3.pdf(0.0), 0.367553, epsilon = 1e-6);
        assert_abs_diff_eq!(
            prior_log_pdf(&WeightPrior::cauchy(), 0.0).unwrap(),
            (1.0 / PI).ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn log_pdf_rejects_non_finite() {
        assert!(prior_log_pdf(&WeightPrior::normal(), f64::INFINITY).is_err());
        assert!(WeightPrior::student_t(0.0).is_err());
        assert!(WeightPrior::normal().with_scale(-1.0).is_err());
    }

    #[test]
    fn student_t_one_is_cauchy() {
        let t1 = WeightPrior::student_t(1.0).unwrap();
        for w in [-3.0, -0.2, 0.0, 1.0, 7.5] {
            assert_abs_diff_eq!(t1.log_pdf_unchecked(w), WeightPrior::cauchy().log_pdf_unchecked(w), epsilon = 1e-13);
        }
    }

    #[test]
    fn student_t_approaches_normal() {
        let big = WeightPrior::student_t(1e7).unwrap();
        for w in [0.0, 0.5, 1.5, 3.0] {
            assert_abs_diff_eq!(big.pdf(w), WeightPrior::normal().pdf(w), epsilon = 1e-6);
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for prior in [
            WeightPrior::normal(),
            WeightPrior::cauchy(),
            WeightPrior::student_t(3.0).unwrap(),
            WeightPrior::student_t(5.0).unwrap().with_scale(0.5).unwrap(),
        ] {
            let mass = wiener_khinchin_numeric(&prior, 0.0).unwrap();
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn score_matches_finite_difference() {
        for prior in [
            WeightPrior::normal().with_scale(0.7).unwrap(),
            WeightPrior::cauchy(),
            WeightPrior::student_t(3.0).unwrap(),
        ] {
            for w in [-2.0, -0.3, 0.4, 5.0] {
                let h = 1e-6;
                let fd = (prior.log_pdf_unchecked(w + h) - prior.log_pdf_unchecked(w - h)) / (2.0 * h);
                assert_abs_diff_eq!(prior.grad_log_pdf(w), fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn spectral_density_values() {
        assert_abs_diff_eq!(
            matern_spectral_density(1.5, 0.0).unwrap(),
            4.0 / 3f64.sqrt(),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            matern_spectral_density(1.5, 0.0).unwrap() / (2.0 * PI),
            0.367553,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(matern_spectral_density(0.5, 0.0).unwrap(), 2.0, epsilon = 1e-14);
        for w in [0.1, 1.0, 3.3] {
            assert_eq!(
                matern_spectral_density(2.5, w).unwrap(),
                matern_spectral_density(2.5, -w).unwrap()
            );
        }
        assert!(matern_spectral_density(0.0, 1.0).is_err());
    }

    #[test]
    fn spectral_identity_with_student_t() {
        let ws = [0.0, 0.1, -0.1, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 5.0, -5.0];
        for nu in [0.5, 1.5, 2.5] {
            let t = WeightPrior::student_t(2.0 * nu).unwrap();
            for w in ws {
                let lhs = prior_log_pdf(&t, w).unwrap().exp();
                let rhs = matern_spectral_density(nu, w).unwrap() / (2.0 * PI);
                assert!((lhs - rhs).abs() <= 1e-12, "nu={nu} w={w}");
            }
        }
    }

    #[test]
    fn table_priors() {
        let p = prior_for_kernel(&KernelSpec::matern(1.5, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(p, WeightPrior::student_t(3.0).unwrap());
        let p = prior_for_kernel(&KernelSpec::rbf(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(p, WeightPrior::normal());
        let p = prior_for_kernel(&KernelSpec::exponential(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(p, WeightPrior::cauchy());
        let p = prior_for_kernel(&KernelSpec::rbf(4.0, 1.0).unwrap()).unwrap();
        assert_eq!(p.scale, 0.25);
        let arc = KernelSpec::new(KernelFamily::ArcCos { order: 1 }, 1.0, 1.0).unwrap();
        assert!(prior_for_kernel(&arc).is_err());
    }

    #[test]
    fn wiener_khinchin_examples() {
        let v = wiener_khinchin_numeric(&WeightPrior::normal(), 1.0).unwrap();
        assert_abs_diff_eq!(v, (-0.5f64).exp(), epsilon = 1e-9);
        let v = wiener_khinchin_numeric(&WeightPrior::cauchy(), 1.0).unwrap();
        assert_abs_diff_eq!(v, (-1f64).exp(), epsilon = 1e-9);
        for prior in [WeightPrior::normal(), WeightPrior::cauchy()] {
            assert_abs_diff_eq!(wiener_khinchin_numeric(&prior, 0.0).unwrap(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn wiener_khinchin_is_even_and_scales() {
        let t = WeightPrior::student_t(3.0).unwrap();
        let a = wiener_khinchin_numeric(&t, 1.3).unwrap();
        let b = wiener_khinchin_numeric(&t, -1.3).unwrap();
        assert_eq!(a, b);
        let scaled = t.with_scale(0.5).unwrap();
        let c = wiener_khinchin_numeric(&scaled, 2.6).unwrap();
        assert_abs_diff_eq!(a, c, epsilon = 1e-14);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = WeightPrior::student_t(3.0).unwrap();
        assert_eq!(prior_sample(&p, 7, 100).unwrap(), prior_sample(&p, 7, 100).unwrap());
        assert_ne!(prior_sample(&p, 7, 100).unwrap(), prior_sample(&p, 8, 100).unwrap());
        assert!(prior_sample(&p, 7, 0).is_err());
    }
}
