//! Periodic activation functions and the ReLU baseline.
//!
//! The periodic kinds all have period 2π and are scaled so that, under a
//! uniform bias on (−π, π), their fundamental harmonic yields a unit-variance
//! stationary kernel.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    /// `√2·sin x`
    Sin,
    /// `sin x + cos x`
    SinCos,
    /// Triangle wave with peak `π²/(4√2)`.
    Triangle,
    /// Sum of a triangle wave and its quarter-period shift.
    PeriodicReLU,
    ReLU,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 5] = [
        ActivationKind::Sin,
        ActivationKind::SinCos,
        ActivationKind::Triangle,
        ActivationKind::PeriodicReLU,
        ActivationKind::ReLU,
    ];

    pub fn is_periodic(self) -> bool {
        !matches!(self, ActivationKind::ReLU)
    }

    /// Whether Monte-Carlo kernels draw a uniform bias for this kind.
    pub fn uses_bias(self) -> bool {
        !matches!(self, ActivationKind::SinCos)
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sin => "sin",
            ActivationKind::SinCos => "sincos",
            ActivationKind::Triangle => "triangle",
            ActivationKind::PeriodicReLU => "prelu",
            ActivationKind::ReLU => "relu",
        }
    }

    /// Distance from `x` to the nearest non-differentiable point.
    pub fn distance_to_kink(self, x: f64) -> f64 {
        let to_lattice = |x: f64, step: f64, offset: f64| {
            let t = (x - offset) / step;
            (t - t.round()).abs() * step
        };
        match self {
            ActivationKind::Sin | ActivationKind::SinCos => f64::INFINITY,
            ActivationKind::Triangle => to_lattice(x, PI, FRAC_PI_2),
            ActivationKind::PeriodicReLU => to_lattice(x, FRAC_PI_2, 0.0),
            ActivationKind::ReLU => x.abs(),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sin" => Ok(ActivationKind::Sin),
            "sincos" => Ok(ActivationKind::SinCos),
            "triangle" => Ok(ActivationKind::Triangle),
            "prelu" => Ok(ActivationKind::PeriodicReLU),
            "relu" => Ok(ActivationKind::ReLU),
            other => Err(Error::Config(format!(
                "unknown activation `{other}` (expected sin, sincos, triangle, prelu, relu)"
            ))),
        }
    }
}

const TRIANGLE_SCALE: f64 = PI / (2.0 * SQRT_2);

/// Unit-slope triangle wave of period 2π and amplitude π/2.
fn triangle_raw(x: f64) -> f64 {
    let n = (x / PI + 0.5).floor();
    let sign = if n.rem_euclid(2.0) == 0.0 { 1.0 } else { -1.0 };
    (x - PI * n) * sign
}

/// Left-derivative of [`triangle_raw`].
fn triangle_raw_slope(x: f64) -> f64 {
    let n = (x / PI + 0.5).ceil() - 1.0;
    if n.rem_euclid(2.0) == 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn activate(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Sin => SQRT_2 * x.sin(),
        ActivationKind::SinCos => x.sin() + x.cos(),
        ActivationKind::Triangle => TRIANGLE_SCALE * triangle_raw(x),
        ActivationKind::PeriodicReLU => FRAC_PI_4 * (triangle_raw(x + FRAC_PI_2) + triangle_raw(x)),
        ActivationKind::ReLU => x.max(0.0),
    }
}

/// Derivative of [`activate`]; the left-derivative at kinks.
pub fn activate_grad(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Sin => SQRT_2 * x.cos(),
        ActivationKind::SinCos => x.cos() - x.sin(),
        ActivationKind::Triangle => TRIANGLE_SCALE * triangle_raw_slope(x),
        ActivationKind::PeriodicReLU => {
            FRAC_PI_4 * (triangle_raw_slope(x + FRAC_PI_2) + triangle_raw_slope(x))
        }
        ActivationKind::ReLU => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}
