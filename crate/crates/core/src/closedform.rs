//! Exact evaluation of the reliability and hazard for the `|11⟩` initial state.
//!
//! Production evaluators work on real hyperbolic (overdamped), trigonometric
//! (underdamped) or polynomial (critical) forms. All of them write
//! `R(t) = e^{-γ̄t} D(t)` and `h(t) = γ̄ - D'(t)/D(t)`; the overdamped branch
//! additionally pulls `e^{Λt/2}` out of `D` once it would overflow.
//!
//! [`eigen_modes`] exposes the complex eigenmode expansion of the reduced
//! generator for callers that need individual modes.

use num_complex::Complex;
use thiserror::Error;

use crate::liouville::ReducedState;
use crate::model::{derived_values, DerivedParams, ModelParams, Regime};
use crate::scalar::Real;

/// Below this `|Δγ|` the uniform-damping branch `2e^{-γ̄t} - e^{-2γ̄t}` is used.
pub const EPS_DEG: f64 = 1e-12;

/// Half-gap θ = Λt/2 above which overdamped forms are rescaled by `e^{-θ}`.
const RESCALE_THETA: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModeError {
    #[error("spectrum is degenerate in the critical band (|dgamma| = 4J)")]
    DegenerateSpectrum,
    #[error("eigenvectors are singular for uniform damping (|dgamma| = {dgamma:e})")]
    DegenerateDissipation { dgamma: f64 },
    #[error("eigenvectors are singular for decoupled sites (J = 0)")]
    ZeroCoupling,
    #[error("mode matrix is singular for this initial state")]
    SingularModes,
}

/// Eigenvalues, eigenvectors and `|11⟩` expansion coefficients of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecomposition<T> {
    pub eigenvalues: [Complex<T>; 4],
    /// `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: [[Complex<T>; 4]; 4],
    /// Expansion of `(0, 0, 1, 0)` in the eigenvectors.
    pub coefficients: [Complex<T>; 4],
}

impl<T: Real> ModeDecomposition<T> {
    /// `Σ_k C_k e^{λ_k t} v_k` for the given coefficients.
    pub fn evaluate(&self, coefficients: &[Complex<T>; 4], t: T) -> [Complex<T>; 4] {
        let mut x = [Complex::new(T::zero(), T::zero()); 4];
        for k in 0..4 {
            let w = coefficients[k] * (self.eigenvalues[k] * t).exp();
            for (xi, vi) in x.iter_mut().zip(&self.eigenvectors[k]) {
                *xi = *xi + w * *vi;
            }
        }
        x
    }

    /// `x(t)` for the `|11⟩` start.
    pub fn state_at(&self, t: T) -> [Complex<T>; 4] {
        self.evaluate(&self.coefficients, t)
    }

    /// Solves `x0 = Σ_k C_k v_k` for an arbitrary initial reduced state.
    pub fn coefficients_for(&self, x0: &ReducedState<T>) -> Result<[Complex<T>; 4], ModeError> {
        let mut m = [[Complex::new(T::zero(), T::zero()); 5]; 4];
        let rhs = x0.to_array();
        for row in 0..4 {
            for col in 0..4 {
                m[row][col] = self.eigenvectors[col][row];
            }
            m[row][4] = Complex::new(rhs[row], T::zero());
        }
        for col in 0..4 {
            let pivot = (col..4)
                .max_by(|&a, &b| {
                    m[a][col]
                        .norm()
                        .partial_cmp(&m[b][col].norm())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty range");
            if !(m[pivot][col].norm() > T::epsilon()) {
                return Err(ModeError::SingularModes);
            }
            m.swap(col, pivot);
            for row in (col + 1)..4 {
                let f = m[row][col] / m[col][col];
                for c in col..5 {
                    let sub = f * m[col][c];
                    m[row][c] = m[row][c] - sub;
                }
            }
        }
        let mut c = [Complex::new(T::zero(), T::zero()); 4];
        for row in (0..4).rev() {
            let mut acc = m[row][4];
            for k in (row + 1)..4 {
                acc = acc - m[row][k] * c[k];
            }
            c[row] = acc / m[row][row];
        }
        Ok(c)
    }
}

/// Eigenmodes of the reduced generator.
pub fn eigen_modes<T: Real>(p: &ModelParams<T>) -> Result<ModeDecomposition<T>, ModeError> {
    let d = derived_values(p);
    if d.regime == Regime::Critical {
        return Err(ModeError::DegenerateSpectrum);
    }
    if d.dgamma.abs() <= T::lit(EPS_DEG) {
        return Err(ModeError::DegenerateDissipation {
            dgamma: d.dgamma.to_f64().unwrap_or(f64::NAN),
        });
    }
    if p.j() == T::zero() {
        return Err(ModeError::ZeroCoupling);
    }

    let re = |x: T| Complex::new(x, T::zero());
    let two = T::lit(2.0);
    let four_j = T::lit(4.0) * p.j();
    let two_j = re(two * p.j());
    let dg = re(d.dgamma);
    let gbar = re(d.gbar);
    let lambda = match d.regime {
        Regime::Overdamped => re(d.lambda_or_omega),
        _ => Complex::new(T::zero(), d.lambda_or_omega),
    };
    // Λ² = (|Δγ| - 4J)(|Δγ| + 4J), real in both regimes
    let abs_dg = d.dgamma.abs();
    let lambda_sq = (abs_dg - four_j) * (abs_dg + four_j);

    let half_lambda = lambda / re(two);
    let eigenvalues = [
        -gbar,
        -gbar * re(two),
        -gbar - half_lambda,
        -gbar + half_lambda,
    ];

    let one = re(T::one());
    let zero = re(T::zero());
    let v1 = [two_j / dg, two_j / dg, zero, one];
    let v2 = [-one, -one, one, zero];
    let a3 = two_j / (dg + lambda);
    let v3 = [lambda / re(four_j) + a3, a3, zero, one];
    let a4 = two_j / (dg - lambda);
    let v4 = [-lambda / re(four_j) + a4, a4, zero, one];

    let c3 = T::lit(4.0) * p.j() * d.dgamma / lambda_sq;
    let coefficients = [re(-two * c3), one, re(c3), re(c3)];

    Ok(ModeDecomposition {
        eigenvalues,
        eigenvectors: [v1, v2, v3, v4],
        coefficients,
    })
}

/// `R = e^{log_scale} d`, `-dR/dt = e^{log_scale} (γ̄ d - d_prime)`.
#[derive(Debug, Clone, Copy)]
struct SurvivalParts<T> {
    gbar: T,
    log_scale: T,
    d: T,
    d_prime: T,
}

fn survival_parts<T: Real>(
    p: &ModelParams<T>,
    derived: &DerivedParams<T>,
    t: T,
) -> SurvivalParts<T> {
    let two = T::lit(2.0);
    let gbar = derived.gbar;
    let decay = (-gbar * t).exp();
    let dg2 = derived.dgamma * derived.dgamma;

    let (log_scale, d, d_prime) = match derived.regime {
        Regime::Critical => {
            let j2 = p.j() * p.j();
            (
                -gbar * t,
                two + T::lit(4.0) * j2 * t * t - decay,
                T::lit(8.0) * j2 * t + gbar * decay,
            )
        }
        _ if derived.dgamma.abs() <= T::lit(EPS_DEG) => (-gbar * t, two - decay, gbar * decay),
        Regime::Underdamped => {
            let omega = derived.lambda_or_omega;
            let alpha = derived.alpha.unwrap_or(T::zero());
            let theta = omega * t / two;
            let half = (theta / two).sin();
            // 1 - cos θ = 2 sin²(θ/2)
            let xi = T::one() + alpha * two * half * half;
            (
                -gbar * t,
                two * xi - decay,
                dg2 / omega * theta.sin() + gbar * decay,
            )
        }
        Regime::Overdamped => {
            let lambda = derived.lambda_or_omega;
            let alpha = derived.alpha.unwrap_or(T::zero());
            let theta = lambda * t / two;
            if theta <= T::lit(RESCALE_THETA) {
                let half = (theta / two).sinh();
                let big_theta = T::one() + alpha * two * half * half;
                (
                    -gbar * t,
                    two * big_theta - decay,
                    dg2 / lambda * theta.sinh() + gbar * decay,
                )
            } else {
                let e1 = (-theta).exp();
                let e2 = e1 * e1;
                let decay_scaled = (-gbar * t - theta).exp();
                (
                    -gbar * t + theta,
                    two * e1 + alpha * (T::one() + e2 - two * e1) - decay_scaled,
                    dg2 / lambda * (T::one() - e2) / two + gbar * decay_scaled,
                )
            }
        }
    };
    SurvivalParts {
        gbar,
        log_scale,
        d,
        d_prime,
    }
}

/// Closed-form reliability `R(t)` for the `|11⟩` start.
pub fn reliability_analytic<T: Real>(p: &ModelParams<T>, t: T) -> T {
    let s = survival_parts(p, &derived_values(p), t);
    s.log_scale.exp() * s.d
}

/// Closed-form failure density `-dR/dt`.
pub fn failure_density_analytic<T: Real>(p: &ModelParams<T>, t: T) -> T {
    let s = survival_parts(p, &derived_values(p), t);
    s.log_scale.exp() * (s.gbar * s.d - s.d_prime)
}

/// Closed-form hazard `h(t) = -d ln R/dt`.
pub fn hazard_analytic<T: Real>(p: &ModelParams<T>, t: T) -> T {
    let s = survival_parts(p, &derived_values(p), t);
    // roundoff can push h(0) a few ulps below zero
    (s.gbar - s.d_prime / s.d).max(T::zero())
}

/// `(R, h)` sharing one regime classification.
pub fn reliability_and_hazard<T: Real>(p: &ModelParams<T>, t: T) -> (T, T) {
    let s = survival_parts(p, &derived_values(p), t);
    (
        s.log_scale.exp() * s.d,
        (s.gbar - s.d_prime / s.d).max(T::zero()),
    )
}

/// Long-time behaviour of the hazard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HazardAsymptote<T> {
    /// Overdamped and critical: `h → γ̄ - Λ/2` (`Λ = 0` when critical).
    Plateau(T),
    /// Underdamped: a bounded oscillation of angular frequency Ω/2 about a
    /// baseline of order γ̄.
    Oscillatory {
        baseline: T,
        frequency: T,
        bounded: bool,
    },
}

pub fn hazard_asymptote<T: Real>(p: &ModelParams<T>) -> HazardAsymptote<T> {
    let d = derived_values(p);
    let two = T::lit(2.0);
    match d.regime {
        Regime::Overdamped => HazardAsymptote::Plateau(d.gbar - d.lambda_or_omega / two),
        Regime::Critical => HazardAsymptote::Plateau(d.gbar),
        Regime::Underdamped => HazardAsymptote::Oscillatory {
            baseline: d.gbar,
            frequency: d.lambda_or_omega / two,
            // Ξ ≥ 1 keeps the denominator 2Ξ - e^{-γ̄t} ≥ 1
            bounded: true,
        },
    }
}
