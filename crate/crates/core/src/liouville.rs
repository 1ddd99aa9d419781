//! Numerical ground truth: the 4×4 Lindblad master equation for the two-site
//! chain and the closed four-component reduced system it implies.
//!
//! Basis ordering is `|0⟩=|00⟩, |1⟩=|10⟩, |2⟩=|01⟩, |3⟩=|11⟩`. The reduced
//! vector is `x = (ρ11, ρ22, ρ33, ρm)` with `ρm = i(ρ12 - ρ21) = -2 Im ρ12`.

use std::fmt;
use std::ops::{Add, Mul};

use num_complex::Complex;
use thiserror::Error;

use crate::model::{derived_values, ModelParams, Regime};
use crate::scalar::Real;

pub const DIM: usize = 4;

/// Reliability cutoff below which the hazard is not reported.
pub const R_CUTOFF: f64 = 1e-4;

/// Default integration step.
pub const DEFAULT_DT: f64 = 1e-3;

/// Upper bound on `dt * (γ1 + γ2 + 4J)` accepted by the fixed-step integrator.
pub const STABILITY_BOUND: f64 = 0.1;

/// Excitation number of each basis state.
const SECTOR: [u8; DIM] = [0, 1, 1, 2];

pub type Mat4<T> = [[Complex<T>; DIM]; DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    Trace,
    Hermiticity,
    Positivity,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Invariant::Trace => "unit trace",
            Invariant::Hermiticity => "hermiticity",
            Invariant::Positivity => "positivity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LiouvilleError {
    #[error("step {dt} too large: dt*(gamma1+gamma2+4J) = {product} exceeds {STABILITY_BOUND}")]
    StepTooLarge { dt: f64, product: f64 },
    #[error("{invariant} breached at t = {t}: deviation {deviation:e} exceeds {tolerance:e}")]
    InvariantBreach {
        invariant: Invariant,
        t: f64,
        deviation: f64,
        tolerance: f64,
    },
    #[error("initial state violates {invariant}: deviation {deviation:e}")]
    InvalidInitialState {
        invariant: Invariant,
        deviation: f64,
    },
    #[error("time grid must be non-empty, finite and strictly increasing")]
    InvalidGrid,
    #[error("integration step must be positive and finite (got {0})")]
    InvalidStep(f64),
}

fn f64_of<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn zero_mat<T: Real>() -> Mat4<T> {
    [[Complex::new(T::zero(), T::zero()); DIM]; DIM]
}

fn mat_mul<T: Real>(a: &Mat4<T>, b: &Mat4<T>) -> Mat4<T> {
    let mut out = zero_mat();
    for i in 0..DIM {
        for k in 0..DIM {
            let aik = a[i][k];
            if aik.re == T::zero() && aik.im == T::zero() {
                continue;
            }
            for j in 0..DIM {
                out[i][j] = out[i][j] + aik * b[k][j];
            }
        }
    }
    out
}

fn dagger<T: Real>(a: &Mat4<T>) -> Mat4<T> {
    let mut out = zero_mat();
    for i in 0..DIM {
        for j in 0..DIM {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

/// Density matrix (or any operator on the two-site space) in the ordered basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix<T> {
    entries: Mat4<T>,
}

/// Computational basis states of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisState {
    /// `|00⟩`, the absorbing failure state.
    Ground = 0,
    /// `|10⟩`
    Site1 = 1,
    /// `|01⟩`
    Site2 = 2,
    /// `|11⟩`
    Both = 3,
}

impl<T: Real> DensityMatrix<T> {
    pub fn from_entries(entries: Mat4<T>) -> Self {
        Self { entries }
    }

    pub fn zero() -> Self {
        Self {
            entries: zero_mat(),
        }
    }

    /// Projector onto a basis state.
    pub fn pure(state: BasisState) -> Self {
        let mut m = Self::zero();
        let i = state as usize;
        m.entries[i][i] = Complex::new(T::one(), T::zero());
        m
    }

    /// Lifts a reduced state back to a block-diagonal density matrix with
    /// `ρ00 = 1 - ρ11 - ρ22 - ρ33` and a purely imaginary `ρ12`.
    pub fn from_reduced(x: &ReducedState<T>) -> Self {
        let mut m = Self::zero();
        let half = T::lit(0.5);
        m.entries[0][0] = Complex::new(T::one() - x.rho11 - x.rho22 - x.rho33, T::zero());
        m.entries[1][1] = Complex::new(x.rho11, T::zero());
        m.entries[2][2] = Complex::new(x.rho22, T::zero());
        m.entries[3][3] = Complex::new(x.rho33, T::zero());
        m.entries[1][2] = Complex::new(T::zero(), -half * x.rho_m);
        m.entries[2][1] = Complex::new(T::zero(), half * x.rho_m);
        m
    }

    pub fn entries(&self) -> &Mat4<T> {
        &self.entries
    }

    pub fn get(&self, m: usize, n: usize) -> Complex<T> {
        self.entries[m][n]
    }

    pub fn trace(&self) -> Complex<T> {
        (0..DIM).fold(Complex::new(T::zero(), T::zero()), |acc, i| {
            acc + self.entries[i][i]
        })
    }

    /// `max |ρ_mn - conj(ρ_nm)|`.
    pub fn hermiticity_error(&self) -> T {
        let mut worst = T::zero();
        for m in 0..DIM {
            for n in m..DIM {
                worst = worst.max((self.entries[m][n] - self.entries[n][m].conj()).norm());
            }
        }
        worst
    }

    /// Largest modulus of a coherence between different excitation sectors.
    pub fn sector_coherence(&self) -> T {
        let mut worst = T::zero();
        for m in 0..DIM {
            for n in 0..DIM {
                if SECTOR[m] != SECTOR[n] {
                    worst = worst.max(self.entries[m][n].norm());
                }
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [T; DIM] {
        // A Hermitian X + iY has the same spectrum as the real symmetric
        // [[X, -Y], [Y, X]], each eigenvalue appearing twice.
        let half = T::lit(0.5);
        let mut big = [[T::zero(); 2 * DIM]; 2 * DIM];
        for m in 0..DIM {
            for n in 0..DIM {
                let h = (self.entries[m][n] + self.entries[n][m].conj()) * half;
                big[m][n] = h.re;
                big[m + DIM][n + DIM] = h.re;
                big[m + DIM][n] = h.im;
                big[m][n + DIM] = -h.im;
            }
        }
        let mut eig = jacobi_eigenvalues(big);
        eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        let mut out = [T::zero(); DIM];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = (eig[2 * i] + eig[2 * i + 1]) * half;
        }
        out
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues()[0]
    }

    /// `R = 1 - ⟨00|ρ|00⟩`.
    pub fn reliability(&self) -> T {
        T::one() - self.entries[0][0].re
    }

    pub fn reduced(&self) -> ReducedState<T> {
        ReducedState {
            rho11: self.entries[1][1].re,
            rho22: self.entries[2][2].re,
            rho33: self.entries[3][3].re,
            rho_m: -T::lit(2.0) * self.entries[1][2].im,
        }
    }

    fn check(&self, tol: &InvariantTolerances<T>) -> Result<(), (Invariant, T, T)> {
        let trace_dev = (self.trace() - Complex::new(T::one(), T::zero())).norm();
        if !(trace_dev <= tol.trace) {
            return Err((Invariant::Trace, trace_dev, tol.trace));
        }
        let herm = self.hermiticity_error();
        if !(herm <= tol.hermiticity) {
            return Err((Invariant::Hermiticity, herm, tol.hermiticity));
        }
        let min_eig = self.min_eigenvalue();
        if !(min_eig >= -tol.positivity) {
            return Err((Invariant::Positivity, -min_eig, tol.positivity));
        }
        Ok(())
    }
}

impl<T: Real> Add for DensityMatrix<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..DIM {
            for j in 0..DIM {
                self.entries[i][j] = self.entries[i][j] + rhs.entries[i][j];
            }
        }
        self
    }
}

impl<T: Real> Mul<T> for DensityMatrix<T> {
    type Output = Self;
    fn mul(mut self, s: T) -> Self {
        for row in self.entries.iter_mut() {
            for v in row.iter_mut() {
                *v = *v * s;
            }
        }
        self
    }
}

/// Cyclic Jacobi rotations on a small real symmetric matrix.
fn jacobi_eigenvalues<T: Real, const N: usize>(mut a: [[T; N]; N]) -> [T; N] {
    let two = T::lit(2.0);
    for _sweep in 0..64 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..N {
            diag = diag + a[i][i] * a[i][i];
            for j in (i + 1)..N {
                off = off + a[i][j] * a[i][j];
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[p][q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut out = [T::zero(); N];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = a[i][i];
    }
    out
}

/// Hamiltonian and jump operators of the resonant chain.
struct Operators<T> {
    h: Mat4<T>,
    jumps: [Mat4<T>; 2],
    jumps_dag: [Mat4<T>; 2],
    /// L†L for each jump.
    decay: [Mat4<T>; 2],
}

impl<T: Real> Operators<T> {
    fn new(p: &ModelParams<T>) -> Self {
        let c = |x: T| Complex::new(x, T::zero());
        let mut h = zero_mat();
        // J(σ+⁽¹⁾σ-⁽²⁾ + h.c.) couples |10⟩ and |01⟩
        h[1][2] = c(p.j());
        h[2][1] = c(p.j());

        // σ-⁽¹⁾: |10⟩→|00⟩, |11⟩→|01⟩; σ-⁽²⁾: |01⟩→|00⟩, |11⟩→|10⟩
        let mut l1 = zero_mat();
        let s1 = p.gamma1().sqrt();
        l1[0][1] = c(s1);
        l1[2][3] = c(s1);
        let mut l2 = zero_mat();
        let s2 = p.gamma2().sqrt();
        l2[0][2] = c(s2);
        l2[1][3] = c(s2);

        let jumps = [l1, l2];
        let jumps_dag = [dagger(&l1), dagger(&l2)];
        let decay = [
            mat_mul(&jumps_dag[0], &jumps[0]),
            mat_mul(&jumps_dag[1], &jumps[1]),
        ];
        Self {
            h,
            jumps,
            jumps_dag,
            decay,
        }
    }

    fn apply(&self, rho: &Mat4<T>) -> Mat4<T> {
        let minus_i = Complex::new(T::zero(), -T::one());
        let half = T::lit(0.5);
        let hr = mat_mul(&self.h, rho);
        let rh = mat_mul(rho, &self.h);
        let mut out = zero_mat();
        for i in 0..DIM {
            for j in 0..DIM {
                out[i][j] = minus_i * (hr[i][j] - rh[i][j]);
            }
        }
        for k in 0..2 {
            let jump = mat_mul(&mat_mul(&self.jumps[k], rho), &self.jumps_dag[k]);
            let left = mat_mul(&self.decay[k], rho);
            let right = mat_mul(rho, &self.decay[k]);
            for i in 0..DIM {
                for j in 0..DIM {
                    out[i][j] = out[i][j] + jump[i][j] - (left[i][j] + right[i][j]) * half;
                }
            }
        }
        out
    }
}

/// Right-hand side of the master equation, `dρ/dt = -i[H,ρ] + Σ D[L_i]ρ`.
pub fn lindblad_rhs<T: Real>(rho: &DensityMatrix<T>, p: &ModelParams<T>) -> DensityMatrix<T> {
    DensityMatrix::from_entries(Operators::new(p).apply(&rho.entries))
}

/// Acceptance thresholds for the per-output-time state checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantTolerances<T> {
    pub trace: T,
    pub hermiticity: T,
    pub positivity: T,
}

impl<T: Real> Default for InvariantTolerances<T> {
    fn default() -> Self {
        Self {
            trace: T::tol(1e-9, 1e3),
            hermiticity: T::tol(1e-12, 64.0),
            positivity: T::tol(1e-8, 1e3),
        }
    }
}

fn validate_grid<T: Real>(t_grid: &[T]) -> Result<(), LiouvilleError> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(LiouvilleError::InvalidGrid);
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LiouvilleError::InvalidGrid);
    }
    Ok(())
}

fn validate_step<T: Real>(p: &ModelParams<T>, dt: T) -> Result<(), LiouvilleError> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(LiouvilleError::InvalidStep(f64_of(dt)));
    }
    let product = dt * p.rate_scale();
    if product > T::lit(STABILITY_BOUND) {
        return Err(LiouvilleError::StepTooLarge {
            dt: f64_of(dt),
            product: f64_of(product),
        });
    }
    Ok(())
}

/// Number of equal substeps of size at most `dt` spanning `span`.
fn substeps<T: Real>(span: T, dt: T) -> usize {
    let n = (span / dt - T::lit(1e-9)).ceil();
    n.to_usize().unwrap_or(1).max(1)
}

/// Classical fourth-order Runge-Kutta over the grid, `dt` being the largest
/// substep. `step` maps (state, h) to the state after one step.
fn march<S: Copy, T: Real>(
    x0: S,
    t_grid: &[T],
    dt: T,
    mut step: impl FnMut(&S, T) -> S,
    mut on_output: impl FnMut(T, &S) -> Result<(), LiouvilleError>,
) -> Result<Vec<S>, LiouvilleError> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut x = x0;
    on_output(t_grid[0], &x)?;
    out.push(x);
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        let n = substeps(span, dt);
        let h = span / T::count(n);
        for _ in 0..n {
            x = step(&x, h);
        }
        on_output(w[1], &x)?;
        out.push(x);
    }
    Ok(out)
}

/// Trajectory of the full density matrix.
#[derive(Debug, Clone)]
pub struct MasterTrajectory<T> {
    pub params: ModelParams<T>,
    pub t: Vec<T>,
    pub states: Vec<DensityMatrix<T>>,
}

impl<T: Real> MasterTrajectory<T> {
    /// Extracts `(ρ11, ρ22, ρ33, i(ρ12 - ρ21))` at each time and derives R and h
    /// with the default cutoff.
    pub fn to_reduced(&self) -> ReducedTrajectory<T> {
        ReducedTrajectory::new(
            self.params,
            self.t.clone(),
            self.states.iter().map(DensityMatrix::reduced).collect(),
            T::lit(R_CUTOFF),
        )
    }
}

/// Integrates the master equation from `rho0` at `t_grid[0]`, reporting the
/// state at every grid time. Substeps never exceed `dt`.
pub fn evolve_master<T: Real>(
    rho0: &DensityMatrix<T>,
    p: &ModelParams<T>,
    t_grid: &[T],
    dt: T,
) -> Result<MasterTrajectory<T>, LiouvilleError> {
    evolve_master_with(rho0, p, t_grid, dt, &InvariantTolerances::default())
}

pub fn evolve_master_with<T: Real>(
    rho0: &DensityMatrix<T>,
    p: &ModelParams<T>,
    t_grid: &[T],
    dt: T,
    tol: &InvariantTolerances<T>,
) -> Result<MasterTrajectory<T>, LiouvilleError> {
    validate_grid(t_grid)?;
    validate_step(p, dt)?;
    rho0.check(tol)
        .map_err(|(invariant, dev, _)| LiouvilleError::InvalidInitialState {
            invariant,
            deviation: f64_of(dev),
        })?;

    let ops = Operators::new(p);
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let two = T::lit(2.0);
    let f = |m: &DensityMatrix<T>| DensityMatrix::from_entries(ops.apply(&m.entries));

    let states = march(
        *rho0,
        t_grid,
        dt,
        |rho, h| {
            let k1 = f(rho);
            let k2 = f(&(*rho + k1 * (h * half)));
            let k3 = f(&(*rho + k2 * (h * half)));
            let k4 = f(&(*rho + k3 * h));
            *rho + (k1 + k2 * two + k3 * two + k4) * (h * sixth)
        },
        |t, rho| {
            rho.check(tol).map_err(
                |(invariant, dev, tolerance)| LiouvilleError::InvariantBreach {
                    invariant,
                    t: f64_of(t),
                    deviation: f64_of(dev),
                    tolerance: f64_of(tolerance),
                },
            )
        },
    )?;

    Ok(MasterTrajectory {
        params: *p,
        t: t_grid.to_vec(),
        states,
    })
}

/// Closed linear system for `(ρ11, ρ22, ρ33, ρm)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState<T> {
    pub rho11: T,
    pub rho22: T,
    pub rho33: T,
    pub rho_m: T,
}

impl<T: Real> ReducedState<T> {
    pub fn new(rho11: T, rho22: T, rho33: T, rho_m: T) -> Self {
        Self {
            rho11,
            rho22,
            rho33,
            rho_m,
        }
    }

    /// The `|11⟩⟨11|` initial condition.
    pub fn fully_excited() -> Self {
        Self::new(T::zero(), T::zero(), T::one(), T::zero())
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.rho11, self.rho22, self.rho33, self.rho_m]
    }

    pub fn from_array(x: [T; 4]) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }

    /// `R = ρ11 + ρ22 + ρ33`.
    pub fn reliability(&self) -> T {
        self.rho11 + self.rho22 + self.rho33
    }

    /// Failure flux `-dR/dt = γ1 ρ11 + γ2 ρ22`.
    pub fn failure_rate(&self, p: &ModelParams<T>) -> T {
        p.gamma1() * self.rho11 + p.gamma2() * self.rho22
    }

    /// Checks population bounds and the Cauchy-Schwarz bound on `ρm`.
    pub fn is_physical(&self) -> bool {
        let slack = T::tol(1e-9, 64.0);
        let in_unit = |v: T| v >= -slack && v <= T::one() + slack;
        let pops_ok = in_unit(self.rho11)
            && in_unit(self.rho22)
            && in_unit(self.rho33)
            && self.reliability() <= T::one() + slack;
        let bound = T::lit(2.0) * (self.rho11.max(T::zero()) * self.rho22.max(T::zero())).sqrt();
        pops_ok && self.rho_m.abs() <= bound + T::tol(1e-8, 1e3)
    }
}

/// The 4×4 generator `A` of `ẋ = A x`.
pub fn build_a<T: Real>(p: &ModelParams<T>) -> [[T; 4]; 4] {
    let z = T::zero();
    let (g1, g2, j, gb) = (p.gamma1(), p.gamma2(), p.j(), p.gbar());
    let two = T::lit(2.0);
    [
        [-g1, z, g2, j],
        [z, -g2, g1, -j],
        [z, z, -two * gb, z],
        [-two * j, two * j, z, -gb],
    ]
}

/// Reduced trajectory with derived reliability and hazard.
#[derive(Debug, Clone)]
pub struct ReducedTrajectory<T> {
    pub params: ModelParams<T>,
    pub t: Vec<T>,
    pub states: Vec<ReducedState<T>>,
    pub reliability: Vec<T>,
    /// `None` where `R <= r_cutoff`.
    pub hazard: Vec<Option<T>>,
}

impl<T: Real> ReducedTrajectory<T> {
    pub fn new(
        params: ModelParams<T>,
        t: Vec<T>,
        states: Vec<ReducedState<T>>,
        r_cutoff: T,
    ) -> Self {
        let mut traj = Self {
            params,
            t,
            states,
            reliability: Vec::new(),
            hazard: Vec::new(),
        };
        traj.reliability = reliability_numeric(&traj);
        traj.hazard = hazard_numeric(&traj, r_cutoff);
        traj
    }
}

/// `R = ρ11 + ρ22 + ρ33` at every time.
pub fn reliability_numeric<T: Real>(traj: &ReducedTrajectory<T>) -> Vec<T> {
    traj.states.iter().map(ReducedState::reliability).collect()
}

/// `h = (γ1 ρ11 + γ2 ρ22) / R`, evaluated pointwise and reported only where
/// `R > r_cutoff`.
pub fn hazard_numeric<T: Real>(traj: &ReducedTrajectory<T>, r_cutoff: T) -> Vec<Option<T>> {
    traj.states
        .iter()
        .map(|x| {
            let r = x.reliability();
            (r > r_cutoff).then(|| x.failure_rate(&traj.params) / r)
        })
        .collect()
}

/// Propagator of the reduced system outside the critical band.
///
/// With `s = ρ11+ρ22`, `d = ρ11-ρ22`, `m = ρm` and `z = (s, d, m)`,
/// `ż = (K - γ̄) z + ρ33 (2γ̄, -Δγ, 0)` where `K³ = μ K`, `μ = Λ²/4` (negative
/// when underdamped). The `|11⟩` source has particular solution
/// `-2 ρ33(0) e^{-2γ̄t} ê_s`, so `e^{Kt} = I + S(t) K + C(t) K²` finishes the
/// job, with `S = sinh(√μ t)/√μ` and `C = (cosh(√μ t) - 1)/μ`.
struct SectorPropagator<T> {
    gbar: T,
    delta: T,
    j: T,
    /// √|μ|
    rate: T,
    oscillatory: bool,
}

impl<T: Real> SectorPropagator<T> {
    fn new(p: &ModelParams<T>, rate: T, oscillatory: bool) -> Self {
        Self {
            gbar: p.gbar(),
            delta: p.dgamma() / T::lit(2.0),
            j: p.j(),
            rate,
            oscillatory,
        }
    }

    /// `(e^{-γ̄t}, e^{-γ̄t} S(t), e^{-γ̄t} C(t))`.
    fn weights(&self, t: T) -> (T, T, T) {
        let decay = (-self.gbar * t).exp();
        let a = self.rate;
        let x = a * t;
        let two = T::lit(2.0);
        if self.oscillatory {
            let half_sin = (x / two).sin();
            (
                decay,
                decay * x.sin() / a,
                decay * two * half_sin * half_sin / (a * a),
            )
        } else if x < T::lit(20.0) {
            let half_sinh = (x / two).sinh();
            (
                decay,
                decay * x.sinh() / a,
                decay * two * half_sinh * half_sinh / (a * a),
            )
        } else {
            let slow = ((a - self.gbar) * t).exp();
            let fast = (-(a + self.gbar) * t).exp();
            (
                decay,
                (slow - fast) / (two * a),
                (slow + fast - two * decay) / (two * a * a),
            )
        }
    }

    fn evolve(&self, x0: &ReducedState<T>, t: T) -> ReducedState<T> {
        let two = T::lit(2.0);
        let (d, j) = (self.delta, self.j);
        let r33 = x0.rho33;
        let z0 = [
            x0.rho11 + x0.rho22 + two * r33,
            x0.rho11 - x0.rho22,
            x0.rho_m,
        ];
        let kz = [-d * z0[1], -d * z0[0] + two * j * z0[2], -two * j * z0[1]];
        let k2z = [-d * kz[1], -d * kz[0] + two * j * kz[2], -two * j * kz[1]];
        let (w0, ws, wc) = self.weights(t);
        let z: Vec<T> = (0..3)
            .map(|i| w0 * z0[i] + ws * kz[i] + wc * k2z[i])
            .collect();
        let fast = (-two * self.gbar * t).exp();
        let s = z[0] - two * r33 * fast;
        ReducedState {
            rho11: (s + z[1]) / two,
            rho22: (s - z[1]) / two,
            rho33: r33 * fast,
            rho_m: z[2],
        }
    }
}

fn apply_a<T: Real>(a: &[[T; 4]; 4], x: &[T; 4]) -> [T; 4] {
    let mut out = [T::zero(); 4];
    for (i, row) in a.iter().enumerate() {
        out[i] = row.iter().zip(x).map(|(&aij, &xj)| aij * xj).sum();
    }
    out
}

/// Fixed-step RK4 on `ẋ = A x`.
pub fn integrate_reduced<T: Real>(
    x0: &ReducedState<T>,
    p: &ModelParams<T>,
    t_grid: &[T],
    dt: T,
) -> Result<Vec<ReducedState<T>>, LiouvilleError> {
    validate_grid(t_grid)?;
    validate_step(p, dt)?;
    let a = build_a(p);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let sixth = T::one() / T::lit(6.0);
    let axpy = |x: &[T; 4], k: &[T; 4], s: T| -> [T; 4] {
        [
            x[0] + s * k[0],
            x[1] + s * k[1],
            x[2] + s * k[2],
            x[3] + s * k[3],
        ]
    };
    let states = march(
        x0.to_array(),
        t_grid,
        dt,
        |x, h| {
            let k1 = apply_a(&a, x);
            let k2 = apply_a(&a, &axpy(x, &k1, h * half));
            let k3 = apply_a(&a, &axpy(x, &k2, h * half));
            let k4 = apply_a(&a, &axpy(x, &k3, h));
            let mut out = *x;
            for i in 0..4 {
                out[i] = out[i] + h * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            }
            out
        },
        |_, _| Ok(()),
    )?;
    Ok(states.into_iter().map(ReducedState::from_array).collect())
}

/// Evolves the reduced vector over `t_grid` (initial state at `t_grid[0]`).
///
/// Exact to roundoff outside the critical band; inside it the fixed-step
/// integrator runs with [`DEFAULT_DT`].
pub fn evolve_reduced<T: Real>(
    x0: &ReducedState<T>,
    p: &ModelParams<T>,
    t_grid: &[T],
) -> Result<ReducedTrajectory<T>, LiouvilleError> {
    validate_grid(t_grid)?;
    let derived = derived_values(p);
    let t0 = t_grid[0];
    let states = match derived.regime {
        Regime::Critical => {
            let dt = T::lit(DEFAULT_DT).min(T::lit(STABILITY_BOUND) / p.rate_scale());
            integrate_reduced(x0, p, t_grid, dt)?
        }
        regime => {
            let prop = SectorPropagator::new(
                p,
                derived.lambda_or_omega / T::lit(2.0),
                regime == Regime::Underdamped,
            );
            t_grid.iter().map(|&t| prop.evolve(x0, t - t0)).collect()
        }
    };
    Ok(ReducedTrajectory::new(
        *p,
        t_grid.to_vec(),
        states,
        T::lit(R_CUTOFF),
    ))
}

/// Uniform grid `0, step, 2 step, ..., t_max` (last point snapped to `t_max`).
pub fn uniform_grid<T: Real>(t_max: T, step: T) -> Vec<T> {
    let n = (t_max / step + T::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(0);
    let mut grid: Vec<T> = (0..=n).map(|i| T::count(i) * step).collect();
    if let Some(last) = grid.last_mut() {
        if (t_max - *last).abs() <= step * T::lit(1e-6) {
            *last = t_max;
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(j: f64, g1: f64, g2: f64) -> ModelParams<f64> {
        ModelParams::new(j, g1, g2).unwrap()
    }

    #[test]
    fn build_a_matches_entrywise() {
        let a = build_a(&p(0.5, 0.2, 0.5));
        let expected = [
            [-0.2, 0.0, 0.5, 0.5],
            [0.0, -0.5, 0.2, -0.5],
            [0.0, 0.0, -0.7, 0.0],
            [-1.0, 1.0, 0.0, -0.35],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((a[i][j] - expected[i][j]).abs() < 1e-15, "A[{i}][{j}]");
            }
        }
    }

    #[test]
    fn population_rows_sum_to_failure_flux() {
        let q = p(0.37, 1.3, 0.4);
        let a = build_a(&q);
        for c in 0..4 {
            let col: f64 = (0..3).map(|r| a[r][c]).sum();
            let expected = [-1.3, -0.4, 0.0, 0.0][c];
            assert!((col - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn ground_state_is_stationary() {
        let d = lindblad_rhs(&DensityMatrix::pure(BasisState::Ground), &p(0.5, 0.2, 0.5));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d.get(i, j).norm(), 0.0);
            }
        }
    }

    #[test]
    fn fully_excited_rhs_at_origin() {
        let d = lindblad_rhs(&DensityMatrix::pure(BasisState::Both), &p(0.5, 0.2, 0.5));
        assert!((d.get(3, 3).re + 0.7).abs() < 1e-15);
        assert!((d.get(1, 1).re - 0.5).abs() < 1e-15);
        assert!((d.get(2, 2).re - 0.2).abs() < 1e-15);
        let mut rest = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                if !(i == j && i != 0) {
                    rest = rest.max(d.get(i, j).norm());
                }
            }
        }
        assert_eq!(rest, 0.0);
    }

    #[test]
    fn eigenvalues_of_known_state() {
        // diag(0.5, 0.3, 0.2, 0) with a coherence between |10⟩ and |01⟩
        let mut m = DensityMatrix::<f64>::zero().entries().to_owned();
        m[0][0] = Complex::new(0.5, 0.0);
        m[1][1] = Complex::new(0.3, 0.0);
        m[2][2] = Complex::new(0.2, 0.0);
        m[1][2] = Complex::new(0.0, 0.1);
        m[2][1] = Complex::new(0.0, -0.1);
        let ev = DensityMatrix::from_entries(m).eigenvalues();
        let disc = (0.05f64 * 0.05 + 0.01).sqrt();
        let expected = [0.0, 0.25 - disc, 0.25 + disc, 0.5];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-13, "{ev:?}");
        }
    }

    #[test]
    fn stability_guard_rejects_large_steps() {
        let q = p(0.5, 3.0, 0.5);
        let rho = DensityMatrix::pure(BasisState::Both);
        let err = evolve_master(&rho, &q, &[0.0, 1.0], 0.05).unwrap_err();
        assert!(matches!(err, LiouvilleError::StepTooLarge { .. }));
        assert!(evolve_master(&rho, &q, &[0.0, 1.0], 0.0125).is_ok());
    }

    #[test]
    fn rejects_bad_grid_and_state() {
        let q = p(0.5, 0.2, 0.5);
        let rho = DensityMatrix::pure(BasisState::Both);
        assert_eq!(
            evolve_master(&rho, &q, &[0.0, 0.0], 1e-3).unwrap_err(),
            LiouvilleError::InvalidGrid
        );
        let err = evolve_master(&DensityMatrix::zero(), &q, &[0.0, 1.0], 1e-3).unwrap_err();
        assert!(matches!(
            err,
            LiouvilleError::InvalidInitialState {
                invariant: Invariant::Trace,
                ..
            }
        ));
    }

    #[test]
    fn invariant_breach_is_reported() {
        let q = p(0.5, 0.2, 0.5);
        let mut m = DensityMatrix::<f64>::zero().entries().to_owned();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Complex::new(0.25, 0.0);
        }
        // demand min eigenvalue >= 0.2; the mixed state drains into |00⟩
        let tight = InvariantTolerances {
            trace: 1e-9,
            hermiticity: 1e-12,
            positivity: -0.2,
        };
        let grid = uniform_grid(5.0, 0.1);
        match evolve_master_with(&DensityMatrix::from_entries(m), &q, &grid, 1e-3, &tight) {
            Err(LiouvilleError::InvariantBreach { invariant, t, .. }) => {
                assert_eq!(invariant, Invariant::Positivity);
                assert!(t > 0.0);
            }
            other => panic!("expected a positivity breach, got {other:?}"),
        }
    }

    #[test]
    fn zero_reduced_state_stays_zero() {
        let grid = uniform_grid(10.0, 0.5);
        for q in [p(0.5, 0.2, 0.5), p(0.5, 3.0, 0.5), p(0.5, 2.5, 0.5)] {
            let traj = evolve_reduced(&ReducedState::new(0.0, 0.0, 0.0, 0.0), &q, &grid).unwrap();
            assert!(traj.states.iter().all(|x| x.to_array() == [0.0; 4]));
        }
    }

    #[test]
    fn decoupled_site_decays_exponentially() {
        let q = p(0.0, 0.8, 0.3);
        let grid = uniform_grid(10.0, 0.25);
        let traj = evolve_reduced(&ReducedState::new(1.0, 0.0, 0.0, 0.0), &q, &grid).unwrap();
        for (t, x) in traj.t.iter().zip(&traj.states) {
            assert!((x.rho11 - (-0.8 * t).exp()).abs() < 1e-14);
            assert!(x.rho22.abs() < 1e-15 && x.rho33 == 0.0 && x.rho_m.abs() < 1e-15);
        }
    }

    #[test]
    fn propagator_survives_long_times() {
        let q = p(0.5, 3.0, 0.5);
        let traj = evolve_reduced(&ReducedState::fully_excited(), &q, &[0.0, 5000.0]).unwrap();
        assert!(traj.states[1].to_array().iter().all(|v| v.is_finite()));
        assert!(traj.reliability[1] >= 0.0);
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(20.0, 1e-3);
        assert_eq!(g.len(), 20001);
        assert_eq!(*g.last().unwrap(), 20.0);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn reduced_state_physicality() {
        assert!(ReducedState::new(0.25, 0.25, 0.5, 0.5).is_physical());
        assert!(!ReducedState::new(0.25, 0.25, 0.5, 0.6).is_physical());
        assert!(!ReducedState::new(0.6, 0.3, 0.5, 0.0).is_physical());
    }
}
