//! Extremum structure of the overdamped hazard.
//!
//! Two independent routes count the extrema:
//!
//! * the time domain, where `h'(t) = -F(t)/D(t)²` with
//!   `F = D D'' - (D')²` and `R = e^{-γ̄t} D`;
//! * the `u = e^{-Λt/2}` domain, where `R = u^{k-1} (A + B u + A u² - u^{k+1})`
//!   and extrema are the roots of `G(u)` in `(0, 1)`.
//!
//! Both are scanned over the same horizon, refined by bisection, and must
//! agree root by root.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{derived_values, DerivedParams, ModelParams, ParamError, Regime};
use crate::poly::Poly;
use crate::scalar::Real;

/// Default blank-band halfwidth around `|Δγ| = 4J` in phase maps.
pub const DEFAULT_BAND: f64 = 0.02;

/// Reference value of the `k = 2` transition point.
pub const X_STAR_REFERENCE: f64 = 0.934756;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtremaError {
    #[error("extremum analysis needs the overdamped regime (got {0})")]
    NotOverdamped(Regime),
    #[error("F-scan found {f_scan} extrema but G-scan found {g_scan}")]
    MethodDisagreement { f_scan: usize, g_scan: usize },
    #[error("F-scan and G-scan roots differ by {gap:e} in t")]
    RootMismatch { gap: f64 },
    #[error("{method} scan found {count} roots; only 0 or 2 are admissible")]
    UnexpectedRootCount { method: &'static str, count: usize },
    #[error("root count of the k=2 quartic never changes on (0, 6)")]
    BracketNotFound,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

struct Overdamped<T> {
    gbar: T,
    lambda: T,
    alpha: T,
    /// B = -32J²/Λ²
    b: T,
    k: T,
}

impl<T: Real> Overdamped<T> {
    fn from_derived(p: &ModelParams<T>, d: &DerivedParams<T>) -> Result<Self, ExtremaError> {
        if d.regime != Regime::Overdamped {
            return Err(ExtremaError::NotOverdamped(d.regime));
        }
        let lambda = d.lambda_or_omega;
        Ok(Self {
            gbar: d.gbar,
            lambda,
            alpha: d.alpha.expect("overdamped alpha"),
            b: -T::lit(32.0) * p.j() * p.j() / (lambda * lambda),
            k: d.k.expect("overdamped k"),
        })
    }

    fn new(p: &ModelParams<T>) -> Result<Self, ExtremaError> {
        Self::from_derived(p, &derived_values(p))
    }

    /// `Φ = F e^{-θ}` from `E = e^{-θ}` and `W = e^{-γ̄t}`.
    ///
    /// Expanded so that the `O(1)` parts of `D D''` and `(D')²` cancel
    /// exactly; the naive product loses every digit once `E` is below ulp.
    #[inline]
    fn phi(&self, e: T, w: T) -> T {
        let one = T::one();
        let quarter = T::lit(0.25);
        let (a, l, g) = (self.alpha, self.lambda, self.gbar);
        let two_g = T::lit(2.0) * g;
        -a * l * l * (a - one) * T::lit(0.5) * (one + e * e) + a * a * l * l * e
            - a * (l + two_g) * (l + two_g) * quarter * w
            + T::lit(2.0) * g * g * (a - one) * w * e
            - a * (two_g - l) * (two_g - l) * quarter * w * e * e
    }

    fn phi_at(&self, t: T) -> T {
        let theta = self.lambda * t / T::lit(2.0);
        self.phi((-theta).exp(), (-self.gbar * t).exp())
    }

    /// Unscaled `F(t) = Φ e^{θ}`.
    fn f_at(&self, t: T) -> T {
        self.phi_at(t) * (self.lambda * t / T::lit(2.0)).exp()
    }

    /// `G(u)` from `u` and `u^k`.
    #[inline]
    fn g_parts(&self, u: T, uk: T) -> T {
        let (a, b, k) = (self.alpha, self.b, self.k);
        let one = T::one();
        let kp = k + one;
        let km = k - one;
        a * b + T::lit(4.0) * a * a * u + a * b * u * u
            - a * kp * kp * uk
            - b * k * k * uk * u
            - a * km * km * uk * u * u
    }

    fn g_at(&self, u: T) -> T {
        self.g_parts(u, u.powf(self.k))
    }

    fn horizon(&self, scan: &ScanConfig) -> T {
        let f = T::lit(scan.horizon_factor);
        // G(u) ≈ AB + 4A²u for small u, so the last sign change sits near
        // u = -B/(4A); go a decade past it
        let tail = if self.b < T::zero() {
            T::lit(2.0) / self.lambda * (T::lit(40.0) * self.alpha / -self.b).ln()
        } else {
            T::zero()
        };
        f.max(f / self.lambda).max(tail)
    }

    fn step(&self, scan: &ScanConfig) -> T {
        T::lit(scan.step_factor) * T::one().min(T::one() / self.lambda)
    }
}

/// `F(t) = D D'' - (D')²`, whose sign is opposite to that of `h'(t)`.
pub fn f_extremum<T: Real>(p: &ModelParams<T>, t: T) -> Result<T, ExtremaError> {
    Ok(Overdamped::new(p)?.f_at(t))
}

/// Extremum function in `u = e^{-Λt/2}`:
/// `G(u) = AB + 4A²u + ABu² - A(k+1)²u^k - Bk²u^{k+1} - A(k-1)²u^{k+2}`.
pub fn g_of_u<T: Real>(p: &ModelParams<T>, u: T) -> Result<T, ExtremaError> {
    if !(u > T::zero() && u <= T::one()) {
        return Err(ExtremaError::InvalidArgument(format!(
            "u must lie in (0, 1], got {u}"
        )));
    }
    Ok(Overdamped::new(p)?.g_at(u))
}

/// Resolution of the extremum scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    /// Horizon is `max(f, f/Λ)`, extended when the coupling is weak.
    pub horizon_factor: f64,
    /// Grid step is `s · min(1, 1/Λ)`.
    pub step_factor: f64,
    /// Bisection stops once the bracket is this narrow in t.
    pub root_tol: f64,
    /// Largest admissible gap between matched F and G roots.
    pub match_tol: f64,
    /// Roots closer than this are flagged near-degenerate.
    pub degenerate_gap: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            horizon_factor: 20.0,
            step_factor: 1e-3,
            root_tol: 1e-9,
            match_tol: 1e-6,
            degenerate_gap: 1e-6,
        }
    }
}

/// Extremum count and locations for one overdamped parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremumReport<T> {
    /// 0 or 2.
    pub count: usize,
    /// `(t_max, t_min)` when `count == 2`.
    pub locations: Option<(T, T)>,
    /// `γ̄ - Λ/2`.
    pub plateau: T,
    pub method_agreement: bool,
    /// The two roots are closer than `ScanConfig::degenerate_gap`.
    pub near_degenerate: bool,
    pub f_roots: Vec<T>,
    /// G roots mapped back to time.
    pub g_roots: Vec<T>,
}

fn bisect<T: Real>(mut lo: T, mut hi: T, tol: T, f: impl Fn(T) -> T) -> T {
    let mut flo = f(lo);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = (lo + hi) / T::lit(2.0);
        let fm = f(mid);
        if fm == T::zero() {
            return mid;
        }
        if (fm > T::zero()) == (flo > T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// Sign-change scan of `Φ` on the uniform grid in t.
fn scan_f<T: Real>(od: &Overdamped<T>, n: usize, step: T, tol: T) -> Vec<T> {
    let e_step = (-od.lambda * step / T::lit(2.0)).exp();
    let w_step = (-od.gbar * step).exp();
    let mut e = T::one();
    let mut w = T::one();
    let mut prev = od.phi(e, w);
    let mut roots = Vec::new();
    for i in 1..=n {
        // resynchronise the recurrences periodically
        if i % 4096 == 0 {
            let t = T::count(i) * step;
            e = (-od.lambda * t / T::lit(2.0)).exp();
            w = (-od.gbar * t).exp();
        } else {
            e = e * e_step;
            w = w * w_step;
        }
        let cur = od.phi(e, w);
        if (cur > T::zero()) != (prev > T::zero()) {
            let lo = T::count(i - 1) * step;
            let hi = T::count(i) * step;
            roots.push(bisect(lo, hi, tol, |t| od.phi_at(t)));
        }
        prev = cur;
    }
    roots
}

/// Sign-change scan of `G` over `ln u ∈ [-Λ T/2, 0]`, returned as times.
fn scan_g<T: Real>(od: &Overdamped<T>, n: usize, step: T, tol: T) -> Vec<T> {
    let half_l = od.lambda / T::lit(2.0);
    let v_step = -half_l * step;
    let u_step = v_step.exp();
    let uk_step = (od.k * v_step).exp();
    let mut u = T::one();
    let mut uk = T::one();
    let mut prev = od.g_parts(u, uk);
    let mut roots = Vec::new();
    let v_tol = tol * half_l;
    for i in 1..=n {
        if i % 4096 == 0 {
            let v = T::count(i) * v_step;
            u = v.exp();
            uk = (od.k * v).exp();
        } else {
            u = u * u_step;
            uk = uk * uk_step;
        }
        let cur = od.g_parts(u, uk);
        if (cur > T::zero()) != (prev > T::zero()) {
            let hi = T::count(i - 1) * v_step;
            let lo = T::count(i) * v_step;
            let v = bisect(lo, hi, v_tol, |v| od.g_parts(v.exp(), (od.k * v).exp()));
            roots.push(-v / half_l);
        }
        prev = cur;
    }
    roots
}

/// Counts the extrema of the overdamped hazard with both methods.
pub fn count_hazard_extrema<T: Real>(
    p: &ModelParams<T>,
    scan: &ScanConfig,
) -> Result<ExtremumReport<T>, ExtremaError> {
    let od = Overdamped::new(p)?;
    let horizon = od.horizon(scan);
    let step = od.step(scan);
    let n = (horizon / step).ceil().to_usize().unwrap_or(0);
    let tol = T::lit(scan.root_tol);

    let f_roots = scan_f(&od, n, step, tol);
    let g_roots = scan_g(&od, n, step, tol);

    for (method, roots) in [("F", &f_roots), ("G", &g_roots)] {
        if !roots.is_empty() && roots.len() != 2 {
            return Err(ExtremaError::UnexpectedRootCount {
                method,
                count: roots.len(),
            });
        }
    }
    if f_roots.len() != g_roots.len() {
        return Err(ExtremaError::MethodDisagreement {
            f_scan: f_roots.len(),
            g_scan: g_roots.len(),
        });
    }
    let gap = f_roots
        .iter()
        .zip(&g_roots)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max);
    if gap > T::lit(scan.match_tol) {
        return Err(ExtremaError::RootMismatch {
            gap: gap.to_f64().unwrap_or(f64::NAN),
        });
    }

    let count = f_roots.len();
    let locations = (count == 2).then(|| (f_roots[0], f_roots[1]));
    let near_degenerate = locations
        .map(|(a, b)| (b - a).abs() < T::lit(scan.degenerate_gap))
        .unwrap_or(false);
    Ok(ExtremumReport {
        count,
        locations,
        plateau: od.gbar - od.lambda / T::lit(2.0),
        method_agreement: true,
        near_degenerate,
        f_roots,
        g_roots,
    })
}

/// Square grid over `[gmin, gmax]²` for phase maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid<T> {
    pub gmin: T,
    pub gmax: T,
    pub n: usize,
}

impl<T: Real> PhaseGrid<T> {
    pub fn values(&self) -> Vec<T> {
        if self.n == 1 {
            return vec![self.gmin];
        }
        let h = (self.gmax - self.gmin) / T::count(self.n - 1);
        (0..self.n).map(|i| self.gmin + T::count(i) * h).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseClass {
    NoExtrema,
    TwoExtrema,
    /// Not overdamped, or within the band around `|Δγ| = 4J`.
    Blank,
    /// The two counting methods disagreed.
    Disagreement,
}

impl PhaseClass {
    /// CSV code: 0, 2, -1 (blank) or -2 (disagreement).
    pub fn code(&self) -> i32 {
        match self {
            PhaseClass::NoExtrema => 0,
            PhaseClass::TwoExtrema => 2,
            PhaseClass::Blank => -1,
            PhaseClass::Disagreement => -2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCell<T> {
    pub gamma1: T,
    pub gamma2: T,
    pub regime: Regime,
    pub class: PhaseClass,
}

/// Row-major map: cell `(i, j)` has `gamma1 = values[i]`, `gamma2 = values[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap<T> {
    pub j: T,
    pub n: usize,
    pub cells: Vec<PhaseCell<T>>,
}

impl<T: Real> PhaseMap<T> {
    pub fn cell(&self, i: usize, j: usize) -> &PhaseCell<T> {
        &self.cells[i * self.n + j]
    }

    pub fn count(&self, class: PhaseClass) -> usize {
        self.cells.iter().filter(|c| c.class == class).count()
    }
}

/// Classifies each overdamped cell by its extremum count, blanking cells
/// with `|Δγ| - 4J <= band`.
pub fn phase_map<T: Real>(
    j: T,
    grid: &PhaseGrid<T>,
    band: T,
    scan: &ScanConfig,
) -> Result<PhaseMap<T>, ExtremaError> {
    if grid.n == 0 || !(grid.gmin > T::zero()) || !(grid.gmax >= grid.gmin) {
        return Err(ExtremaError::InvalidArgument(
            "phase grid needs n >= 1 and 0 < gmin <= gmax".into(),
        ));
    }
    let values = grid.values();
    let four_j = T::lit(4.0) * j;
    let cells = (0..grid.n * grid.n)
        .into_par_iter()
        .map(|idx| -> Result<PhaseCell<T>, ExtremaError> {
            let (g1, g2) = (values[idx / grid.n], values[idx % grid.n]);
            let p = ModelParams::new(j, g1, g2)?;
            let regime = derived_values(&p).regime;
            let class = if regime != Regime::Overdamped || (g1 - g2).abs() - four_j <= band {
                PhaseClass::Blank
            } else {
                match count_hazard_extrema(&p, scan) {
                    Ok(r) if r.count == 2 => PhaseClass::TwoExtrema,
                    Ok(_) => PhaseClass::NoExtrema,
                    Err(_) => PhaseClass::Disagreement,
                }
            };
            Ok(PhaseCell {
                gamma1: g1,
                gamma2: g2,
                regime,
                class,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PhaseMap {
        j,
        n: grid.n,
        cells,
    })
}

/// `P(u) = -2 G(u)` on the `k = 2` slice, parametrised by `x = -B = 32J²/Λ²`.
pub fn quartic_k2<T: Real + crate::poly::Coefficient>(x: T) -> Poly<T> {
    let l = T::lit;
    Poly::new(vec![
        x * x + l(2.0) * x,
        -(l(2.0) * x * x + l(8.0) * x + l(8.0)),
        x * x + l(11.0) * x + l(18.0),
        -l(8.0) * x,
        x + l(2.0),
    ])
}

/// `Res(P, P')` of the `k = 2` quartic; it changes sign where two real roots
/// merge.
pub fn resultant_k2<T: Real + crate::poly::Coefficient>(x: T) -> T {
    let q = quartic_k2(x);
    crate::poly::resultant(&q, &q.derivative())
}

/// Number of roots of the `k = 2` quartic in `(0, 1)`.
pub fn root_count_k2<T: Real + crate::poly::Coefficient>(x: T) -> usize {
    quartic_k2(x).count_roots(&T::zero(), &T::one())
}

/// Locates the `x ∈ (0, 6)` where the `k = 2` root count switches between
/// 0 and 2, by bisection on the Sturm count.
pub fn critical_x_k2<T: Real + crate::poly::Coefficient>() -> Result<T, ExtremaError> {
    let mut lo = T::lit(1e-6);
    let mut hi = T::lit(6.0 - 1e-6);
    let count_lo = root_count_k2(lo);
    if count_lo == root_count_k2(hi) {
        return Err(ExtremaError::BracketNotFound);
    }
    let tol = T::epsilon() * T::lit(16.0);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) / T::lit(2.0);
        if root_count_k2(mid) == count_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

/// Points on the curve `k(γ1, γ2) = n` inside the positive quadrant.
///
/// With `s = γ1 + γ2` and `d = γ1 - γ2` the curve is the hyperbola
/// `d²/(4J)² - s²/(4nJ)² = 1`. Both branches (`d > 0` and `d < 0`) are
/// emitted for `samples` values of `s` uniformly spaced in `[s_min, s_max]`.
pub fn integer_k_curve<T: Real>(
    n: u32,
    j: T,
    s_min: T,
    s_max: T,
    samples: usize,
) -> Result<Vec<(T, T)>, ExtremaError> {
    if n < 2 {
        return Err(ExtremaError::InvalidArgument(format!(
            "integer k slices need n >= 2, got {n}"
        )));
    }
    if !(j > T::zero()) || !(s_max >= s_min) || samples == 0 {
        return Err(ExtremaError::InvalidArgument(
            "integer k curve needs J > 0, s_min <= s_max and samples >= 1".into(),
        ));
    }
    let nf = T::lit(n as f64);
    let four_j = T::lit(4.0) * j;
    let two = T::lit(2.0);
    let step = if samples > 1 {
        (s_max - s_min) / T::count(samples - 1)
    } else {
        T::zero()
    };
    let mut points = Vec::new();
    for i in 0..samples {
        let s = s_min + T::count(i) * step;
        let d = (s * s / (nf * nf) + four_j * four_j).sqrt();
        if s <= d {
            continue;
        }
        points.push(((s + d) / two, (s - d) / two));
        points.push(((s - d) / two, (s + d) / two));
    }
    Ok(points)
}
