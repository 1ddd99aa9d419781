//! Stroboscopic monitoring: first-passage sampling and the empirical
//! survival and hazard estimators.
//!
//! From the fully excited start the density matrix stays block diagonal in
//! the excitation number, so a projective failure check at `t_k` does not
//! disturb the surviving state and the first-passage law is exactly
//! `1 - R(t)`. Each shot is therefore drawn by inverse transform on the
//! analytic survival function.
//!
//! Bin `k >= 1` means the failure happened in `(t_{k-1}, t_k]`; `None` marks a
//! shot still alive at the horizon.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::closedform::{hazard_analytic, reliability_analytic};
use crate::model::ModelParams;
use crate::scalar::Real;

/// Bins whose risk set is smaller than this are flagged unreliable.
pub const MIN_RELIABLE_RISK: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FptError {
    #[error("monitoring interval dt must be finite and > 0 (got {0})")]
    InvalidDt(f64),
    #[error("n_shots must be >= 1")]
    NoShots,
    #[error("t_max must be finite and >= dt (got t_max={t_max}, dt={dt})")]
    InvalidHorizon { t_max: f64, dt: f64 },
    #[error("sample contains no shots")]
    EmptySample,
    #[error("variance experiment needs at least 2 repetitions (got {0})")]
    TooFewRepetitions(usize),
    #[error("time {t} is not on the monitoring grid below t_max")]
    OffGrid { t: f64 },
}

/// Monitoring protocol: interval `dt`, shot count, seed and horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitoringConfig<T> {
    dt: T,
    n_shots: usize,
    seed: u64,
    t_max: T,
}

impl<T: Real> MonitoringConfig<T> {
    pub fn new(dt: T, n_shots: usize, seed: u64, t_max: T) -> Result<Self, FptError> {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(FptError::InvalidDt(f(dt)));
        }
        if n_shots == 0 {
            return Err(FptError::NoShots);
        }
        if !(t_max.is_finite() && t_max >= dt) {
            return Err(FptError::InvalidHorizon {
                t_max: f(t_max),
                dt: f(dt),
            });
        }
        Ok(Self {
            dt,
            n_shots,
            seed,
            t_max,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn n_shots(&self) -> usize {
        self.n_shots
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn t_max(&self) -> T {
        self.t_max
    }

    pub fn with_shots(&self, n_shots: usize) -> Result<Self, FptError> {
        Self::new(self.dt, n_shots, self.seed, self.t_max)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }

    /// Index of the last monitoring time, `K = floor(t_max/dt)`.
    pub fn n_bins(&self) -> usize {
        let ratio = self.t_max / self.dt;
        // absorb representation error in t_max/dt
        (ratio + T::tol(1e-9, 16.0) * ratio.max(T::one()))
            .floor()
            .to_usize()
            .unwrap_or(0)
    }

    /// `t_k = k dt` for `k = 0..=K`.
    pub fn times(&self) -> Vec<T> {
        (0..=self.n_bins()).map(|k| T::count(k) * self.dt).collect()
    }

    /// Grid index of `t`, if it is a monitoring time strictly below `t_max`.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let k = (t / self.dt).round();
        let idx = k.to_usize()?;
        ((k * self.dt - t).abs() <= T::tol(1e-9, 64.0) * self.dt.max(t) && idx < self.n_bins())
            .then_some(idx)
    }
}

/// Per-shot uniform variates in `[0, 1)`.
pub trait UniformSource {
    fn uniform(&self, shot: u64) -> f64;
}

/// Counter-based stream: shot `i` uses ChaCha8 stream `i` under the
/// configured seed, so the draw is independent of scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    pub seed: u64,
}

impl UniformSource for CounterRng {
    fn uniform(&self, shot: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(shot);
        rng.gen::<f64>()
    }
}

impl<F: Fn(u64) -> f64> UniformSource for F {
    fn uniform(&self, shot: u64) -> f64 {
        self(shot)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FptSampleSet<T> {
    /// Failure bin per shot, `None` when censored at `t_max`.
    pub bins: Vec<Option<usize>>,
    pub config: MonitoringConfig<T>,
    pub params: ModelParams<T>,
}

impl<T: Real> FptSampleSet<T> {
    /// Number of shots failing in each bin `0..=K` (bin 0 is always empty).
    pub fn bin_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.config.n_bins() + 1];
        for k in self.bins.iter().flatten() {
            counts[*k] += 1;
        }
        counts
    }

    pub fn censored(&self) -> usize {
        self.bins.iter().filter(|b| b.is_none()).count()
    }
}

fn survival_grid<T: Real>(p: &ModelParams<T>, cfg: &MonitoringConfig<T>) -> Vec<T> {
    cfg.times()
        .into_iter()
        .map(|t| reliability_analytic(p, t))
        .collect()
}

/// Conditional failure probabilities `p_k = 1 - R(t_{k+1})/R(t_k)` for
/// `k = 0..K`.
pub fn bin_probabilities<T: Real>(p: &ModelParams<T>, cfg: &MonitoringConfig<T>) -> Vec<T> {
    survival_grid(p, cfg)
        .windows(2)
        .map(|w| {
            if w[0] > T::zero() {
                (T::one() - w[1] / w[0]).max(T::zero()).min(T::one())
            } else {
                T::one()
            }
        })
        .collect()
}

/// Draws `n_shots` first-passage bins with the counter-based RNG.
pub fn sample_first_passage<T: Real>(
    p: &ModelParams<T>,
    cfg: &MonitoringConfig<T>,
) -> FptSampleSet<T> {
    sample_with_source(p, cfg, &CounterRng { seed: cfg.seed })
}

/// Inverse-transform sampling from an arbitrary uniform source: the shot's
/// bin is the smallest `k >= 1` with `R(t_k) < u`.
pub fn sample_with_source<T: Real, S: UniformSource + Sync>(
    p: &ModelParams<T>,
    cfg: &MonitoringConfig<T>,
    source: &S,
) -> FptSampleSet<T> {
    let r = survival_grid(p, cfg);
    let bins = (0..cfg.n_shots as u64)
        .into_par_iter()
        .map(|shot| {
            let u = T::lit(source.uniform(shot));
            // R is non-increasing, so `R(t_k) >= u` holds on a prefix
            let k = r[1..].partition_point(|&rk| rk >= u) + 1;
            (k < r.len()).then_some(k)
        })
        .collect();
    FptSampleSet {
        bins,
        config: *cfg,
        params: *p,
    }
}

/// Theoretical variance of `ĥ(t_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceTheory<T> {
    /// `p_k(1-p_k) / (dt² N_s R(t_k))`.
    pub exact: T,
    /// `h(t_k) / (dt N_s R(t_k))`.
    pub asymptotic: T,
}

/// Binomial variance of the discrete hazard estimator at `t_k`; `None` when
/// `R(t_k) = 0`.
pub fn hazard_variance_theory<T: Real>(
    p: &ModelParams<T>,
    t_k: T,
    cfg: &MonitoringConfig<T>,
) -> Option<VarianceTheory<T>> {
    let r0 = reliability_analytic(p, t_k);
    if !(r0 > T::zero()) {
        return None;
    }
    let r1 = reliability_analytic(p, t_k + cfg.dt);
    let pk = (T::one() - r1 / r0).max(T::zero()).min(T::one());
    let expected_risk = T::count(cfg.n_shots) * r0;
    Some(VarianceTheory {
        exact: pk * (T::one() - pk) / (cfg.dt * cfg.dt * expected_risk),
        asymptotic: hazard_analytic(p, t_k) / (cfg.dt * expected_risk),
    })
}

/// Empirical survival and hazard on `t_k`, `k = 0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSeries<T> {
    pub t: Vec<T>,
    /// Shots alive at `t_k`.
    pub n_risk: Vec<usize>,
    /// Failures in `(t_k, t_{k+1}]`.
    pub n_k: Vec<usize>,
    pub r_hat: Vec<T>,
    /// `n_k / (dt n_risk)`, `None` where the risk set is empty.
    pub h_hat: Vec<Option<T>>,
    /// Exact binomial variance, `None` where `R(t_k) = 0`.
    pub var_theory: Vec<Option<T>>,
    /// `n_risk < MIN_RELIABLE_RISK`.
    pub unreliable: Vec<bool>,
}

impl<T> EstimateSeries<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Risk-set estimators from a sample. Censored shots stay at risk through
/// every bin and never count as failures.
pub fn estimate<T: Real>(sample: &FptSampleSet<T>) -> Result<EstimateSeries<T>, FptError> {
    let n_s = sample.bins.len();
    if n_s == 0 {
        return Err(FptError::EmptySample);
    }
    let cfg = &sample.config;
    let counts = sample.bin_counts();
    let k_max = cfg.n_bins();
    let dt = cfg.dt;
    let total = T::count(n_s);

    let mut out = EstimateSeries {
        t: Vec::with_capacity(k_max),
        n_risk: Vec::with_capacity(k_max),
        n_k: Vec::with_capacity(k_max),
        r_hat: Vec::with_capacity(k_max),
        h_hat: Vec::with_capacity(k_max),
        var_theory: Vec::with_capacity(k_max),
        unreliable: Vec::with_capacity(k_max),
    };
    let mut at_risk = n_s;
    for k in 0..k_max {
        let t = T::count(k) * dt;
        // bin k+1 holds failures in (t_k, t_{k+1}]
        let nk = counts[k + 1];
        out.t.push(t);
        out.n_risk.push(at_risk);
        out.n_k.push(nk);
        out.r_hat.push(T::count(at_risk) / total);
        out.h_hat
            .push((at_risk > 0).then(|| T::count(nk) / (dt * T::count(at_risk))));
        out.var_theory.push(
            hazard_variance_theory(&sample.params, t, &cfg.with_shots(n_s).expect("n_s > 0"))
                .map(|v| v.exact),
        );
        out.unreliable.push(at_risk < MIN_RELIABLE_RISK);
        at_risk -= nk;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow<T> {
    pub n_shots: usize,
    pub t: T,
    /// Unbiased sample variance of `ĥ(t)` over the repetitions where it is
    /// defined; `None` if fewer than two.
    pub var_emp: Option<T>,
    pub var_theory: T,
    /// Repetitions whose risk set at `t` was empty.
    pub undefined_reps: usize,
}

/// Repeats the estimator `repetitions` times for every shot count and
/// records the spread of `ĥ` at each requested time.
///
/// Repetition seeds are drawn in order from a ChaCha8 stream keyed by the
/// template's seed, so the table is reproducible.
pub fn variance_experiment<T: Real>(
    p: &ModelParams<T>,
    template: &MonitoringConfig<T>,
    n_s_list: &[usize],
    times: &[T],
    repetitions: usize,
) -> Result<Vec<VarianceRow<T>>, FptError> {
    if repetitions < 2 {
        return Err(FptError::TooFewRepetitions(repetitions));
    }
    let idx: Vec<usize> = times
        .iter()
        .map(|&t| {
            template.index_of(t).ok_or(FptError::OffGrid {
                t: t.to_f64().unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<_, _>>()?;
    let mut seeds = ChaCha8Rng::seed_from_u64(template.seed());
    let mut rows = Vec::with_capacity(n_s_list.len() * times.len());
    for &n_s in n_s_list {
        let cfg = template.with_shots(n_s)?;
        let mut draws: Vec<Vec<T>> = vec![Vec::with_capacity(repetitions); times.len()];
        for _ in 0..repetitions {
            let rep_cfg = cfg.with_seed(seeds.next_u64());
            let est = estimate(&sample_first_passage(p, &rep_cfg))?;
            for (slot, &k) in draws.iter_mut().zip(&idx) {
                if let Some(h) = est.h_hat[k] {
                    slot.push(h);
                }
            }
        }
        for ((&t, &k), values) in times.iter().zip(&idx).zip(draws) {
            let t_k = T::count(k) * cfg.dt();
            let var_theory = hazard_variance_theory(p, t_k, &cfg)
                .map(|v| v.exact)
                .unwrap_or(T::infinity());
            rows.push(VarianceRow {
                n_shots: n_s,
                t,
                var_emp: sample_variance(&values),
                var_theory,
                undefined_reps: repetitions - values.len(),
            });
        }
    }
    Ok(rows)
}

fn sample_variance<T: Real>(x: &[T]) -> Option<T> {
    if x.len() < 2 {
        return None;
    }
    let n = T::count(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    let ss: T = x.iter().map(|&v| (v - mean) * (v - mean)).sum();
    Some(ss / (n - T::one()))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope<T: Real>(points: &[(T, T)]) -> Option<T> {
    if points.len() < 2 {
        return None;
    }
    let n = T::count(points.len());
    let lx: Vec<T> = points.iter().map(|(x, _)| x.ln()).collect();
    let ly: Vec<T> = points.iter().map(|(_, y)| y.ln()).collect();
    let mx = lx.iter().copied().sum::<T>() / n;
    let my = ly.iter().copied().sum::<T>() / n;
    let sxy: T = lx.iter().zip(&ly).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let sxx: T = lx.iter().map(|&a| (a - mx) * (a - mx)).sum();
    (sxx > T::zero()).then(|| sxy / sxx)
}
