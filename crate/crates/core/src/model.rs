//! Model parameters, regime classification and the derived rate quantities
//! every other module is written in terms of.

use std::fmt;

use thiserror::Error;

use crate::scalar::Real;

/// Default halfwidth of the critical band in `|Δγ| - 4J`, in rate units.
pub const DEFAULT_EPS_CRIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{field}` must be finite (got {value})")]
    NonFinite { field: &'static str, value: f64 },
    #[error("parameter `{field}` {constraint} (got {value})")]
    OutOfRange {
        field: &'static str,
        constraint: &'static str,
        value: f64,
    },
}

/// Physical inputs of the two-site chain at the resonant point.
///
/// `j` is the exchange coupling, `gamma1`/`gamma2` the local amplitude
/// damping rates. All three share one inverse-time unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    j: T,
    gamma1: T,
    gamma2: T,
}

fn check_finite<T: Real>(field: &'static str, v: T) -> Result<(), ParamError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NonFinite {
            field,
            value: v.to_f64().unwrap_or(f64::NAN),
        })
    }
}

impl<T: Real> ModelParams<T> {
    pub fn new(j: T, gamma1: T, gamma2: T) -> Result<Self, ParamError> {
        check_finite("j", j)?;
        check_finite("gamma1", gamma1)?;
        check_finite("gamma2", gamma2)?;
        if j < T::zero() {
            return Err(ParamError::OutOfRange {
                field: "j",
                constraint: "must be >= 0",
                value: j.to_f64().unwrap_or(f64::NAN),
            });
        }
        for (field, g) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if g <= T::zero() {
                return Err(ParamError::OutOfRange {
                    field,
                    constraint: "must be > 0",
                    value: g.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { j, gamma1, gamma2 })
    }

    #[inline]
    pub fn j(&self) -> T {
        self.j
    }

    #[inline]
    pub fn gamma1(&self) -> T {
        self.gamma1
    }

    #[inline]
    pub fn gamma2(&self) -> T {
        self.gamma2
    }

    /// Mean damping rate γ̄ = (γ1+γ2)/2.
    #[inline]
    pub fn gbar(&self) -> T {
        (self.gamma1 + self.gamma2) / T::lit(2.0)
    }

    /// Signed dissipation inhomogeneity Δγ = γ1 - γ2.
    #[inline]
    pub fn dgamma(&self) -> T {
        self.gamma1 - self.gamma2
    }

    /// Same model with the two sites exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            j: self.j,
            gamma1: self.gamma2,
            gamma2: self.gamma1,
        }
    }

    /// Largest rate scale of the reduced generator, `γ1 + γ2 + 4J`.
    pub fn rate_scale(&self) -> T {
        self.gamma1 + self.gamma2 + T::lit(4.0) * self.j
    }
}

impl<T: Real> fmt::Display for ModelParams<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(J={}, gamma1={}, gamma2={})",
            self.j, self.gamma1, self.gamma2
        )
    }
}

/// Relaxation regime of the single-excitation sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `|Δγ| < 4J`: oscillatory relaxation at frequency Ω/2.
    Underdamped,
    /// `|Δγ| > 4J`: multirate exponential relaxation with gap Λ.
    Overdamped,
    /// `|Δγ| = 4J` within the configured band.
    Critical,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Underdamped => "underdamped",
            Regime::Overdamped => "overdamped",
            Regime::Critical => "critical",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Regime-dependent quantities derived from [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams<T> {
    pub gbar: T,
    pub dgamma: T,
    pub regime: Regime,
    /// Λ = √((Δγ)² - 16J²) when overdamped, Ω = √(16J² - (Δγ)²) when
    /// underdamped, zero when critical.
    pub lambda_or_omega: T,
    /// (Δγ)²/Λ² or (Δγ)²/Ω²; `None` in the critical band.
    pub alpha: Option<T>,
    /// k = 2γ̄/Λ, overdamped only.
    pub k: Option<T>,
}

impl<T: Real> DerivedParams<T> {
    /// Λ when overdamped.
    pub fn lambda(&self) -> Option<T> {
        (self.regime == Regime::Overdamped).then_some(self.lambda_or_omega)
    }

    /// Ω when underdamped.
    pub fn omega(&self) -> Option<T> {
        (self.regime == Regime::Underdamped).then_some(self.lambda_or_omega)
    }
}

/// Classifies the regime with critical-band halfwidth `eps_crit`.
///
/// Λ² and Ω² are formed as `(|Δγ| - 4J)(|Δγ| + 4J)` so that the identity
/// (Δγ)² = Λ² + 16J² survives cancellation near the crossover.
pub fn classify_regime<T: Real>(p: &ModelParams<T>, eps_crit: T) -> DerivedParams<T> {
    let four_j = T::lit(4.0) * p.j();
    let dgamma = p.dgamma();
    let abs_dg = dgamma.abs();
    let gbar = p.gbar();
    let gap = abs_dg - four_j;

    let (regime, rate) = if gap > eps_crit {
        (Regime::Overdamped, (gap * (abs_dg + four_j)).sqrt())
    } else if -gap > eps_crit {
        (Regime::Underdamped, ((-gap) * (abs_dg + four_j)).sqrt())
    } else {
        (Regime::Critical, T::zero())
    };

    let (alpha, k) = match regime {
        Regime::Overdamped => (
            Some(dgamma * dgamma / (rate * rate)),
            Some(T::lit(2.0) * gbar / rate),
        ),
        Regime::Underdamped => (Some(dgamma * dgamma / (rate * rate)), None),
        Regime::Critical => (None, None),
    };

    DerivedParams {
        gbar,
        dgamma,
        regime,
        lambda_or_omega: rate,
        alpha,
        k,
    }
}

/// [`classify_regime`] with the default band [`DEFAULT_EPS_CRIT`].
pub fn derived_values<T: Real>(p: &ModelParams<T>) -> DerivedParams<T> {
    classify_regime(p, T::lit(DEFAULT_EPS_CRIT))
}
