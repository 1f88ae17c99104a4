//! Exactly reducible domains: an interval `(0, L)` and the radial ball of
//! radius `R` in `R^N`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DiscretizationError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { length: f64 },
    Ball { dim: usize, radius: f64 },
}

/// Validates the parameters of a domain.
pub fn make_domain(kind: Domain) -> Result<Domain, DiscretizationError> {
    match kind {
        Domain::Interval { length } if !(length > 0.0 && length.is_finite()) => {
            Err(DiscretizationError::InvalidParameter(format!(
                "interval length must be positive, got {length}"
            )))
        }
        Domain::Ball { dim, .. } if dim < 1 => Err(DiscretizationError::InvalidParameter(
            "ball dimension must be at least 1".into(),
        )),
        Domain::Ball { radius, .. } if !(radius > 0.0 && radius.is_finite()) => {
            Err(DiscretizationError::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )))
        }
        d => Ok(d),
    }
}

impl Domain {
    pub fn interval(length: f64) -> Result<Self, DiscretizationError> {
        make_domain(Domain::Interval { length })
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self, DiscretizationError> {
        make_domain(Domain::Ball { dim, radius })
    }

    /// Largest value of the boundary distance.
    pub fn inradius(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length / 2.0,
            Domain::Ball { radius, .. } => radius,
        }
    }

    /// Boundary distance at the coordinate `x` (`x ∈ [0, L]`, or `r ∈ [0, R]`).
    pub fn delta(&self, x: f64) -> f64 {
        match *self {
            Domain::Interval { length } => x.min(length - x),
            Domain::Ball { radius, .. } => radius - x,
        }
    }

    /// Volume factor of the reduced integral at boundary distance `δ`:
    /// 1 on an interval, `ω_N r^{N−1}` with `r = R − δ` on a ball.
    pub fn jacobian_at_delta(&self, delta: f64) -> f64 {
        match *self {
            Domain::Interval { .. } => 1.0,
            Domain::Ball { dim, radius } => {
                sphere_area(dim) * (radius - delta).powi(dim as i32 - 1)
            }
        }
    }

    /// `Δδ` at boundary distance `δ`: 0 on an interval, `−(N−1)/r` on a ball.
    pub fn laplacian_of_delta(&self, delta: f64) -> f64 {
        match *self {
            Domain::Interval { .. } => 0.0,
            Domain::Ball { dim, radius } => -((dim - 1) as f64) / (radius - delta),
        }
    }

    /// Default cut-off `η₀`: half the inradius on an interval, `R/4` on a ball.
    pub fn default_eta0(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length / 4.0,
            Domain::Ball { radius, .. } => radius / 4.0,
        }
    }
}

/// Surface area of the unit sphere in `R^N`, `2π^{N/2}/Γ(N/2)`.
pub fn sphere_area(dim: usize) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half(dim)
}

/// `Γ(N/2)` for a positive integer `N`.
fn gamma_half(n: usize) -> f64 {
    let (mut g, mut x) = if n % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    while x + 0.5 < n as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// `interval:L` or `ball:N,R`.
impl FromStr for Domain {
    type Err = DiscretizationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DiscretizationError::InvalidParameter(format!("cannot parse domain '{s}'"));
        let (head, rest) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "interval" => Domain::interval(rest.trim().parse().map_err(|_| bad())?),
            "ball" => {
                let (n, r) = rest.split_once(',').ok_or_else(bad)?;
                Domain::ball(
                    n.trim().parse().map_err(|_| bad())?,
                    r.trim().parse().map_err(|_| bad())?,
                )
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval { length } => write!(f, "interval:{length}"),
            Domain::Ball { dim, radius } => write!(f, "ball:{dim},{radius}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_and_jacobians() {
        let d = Domain::interval(1.0).unwrap();
        assert_eq!(d.inradius(), 0.5);
        assert_eq!(d.delta(0.3), 0.3);
        assert!((d.delta(0.8) - 0.2).abs() < 1e-15);
        let b = Domain::ball(3, 1.0).unwrap();
        assert_eq!(b.delta(0.25), 0.75);
        assert!((b.jacobian_at_delta(0.5) - 4.0 * PI * 0.25).abs() < 1e-14);
        assert_eq!(Domain::ball(1, 1.0).unwrap().jacobian_at_delta(0.3), 2.0);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Domain::interval(0.0).is_err());
        assert!(Domain::ball(0, 1.0).is_err());
        assert!(Domain::ball(2, -1.0).is_err());
        assert_eq!(
            "ball:3,2".parse::<Domain>().unwrap(),
            Domain::Ball {
                dim: 3,
                radius: 2.0
            }
        );
        assert!("disk:1".parse::<Domain>().is_err());
    }
}
