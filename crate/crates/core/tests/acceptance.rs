#![allow(clippy::needless_range_loop)]

//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinrel::extrema::{resultant_k2, DEFAULT_BAND, X_STAR_REFERENCE};
use spinrel::liouville::uniform_grid;
use spinrel::{
    bin_probabilities, count_hazard_extrema, critical_x_k2, derived_values, eigen_modes, estimate,
    evolve_master, failure_density_analytic, hazard_analytic, phase_map, reliability_analytic,
    reliability_and_hazard, sample_first_passage, variance_experiment, BasisState, Density64,
    Monitoring64, Params64, PhaseClass, PhaseGrid, Regime, ScanConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn p(j: f64, g1: f64, g2: f64) -> Params64 {
    Params64::new(j, g1, g2).unwrap()
}

fn fig2_sets() -> [Params64; 3] {
    [p(0.5, 0.2, 0.5), p(0.5, 3.0, 0.5), p(0.1, 2.5, 1.0)]
}

fn master_reliability(q: &Params64, t_max: f64, dt: f64) -> (Vec<f64>, Vec<f64>, Vec<Option<f64>>) {
    let grid = uniform_grid(t_max, dt);
    let traj = evolve_master(&Density64::pure(BasisState::Both), q, &grid, dt)
        .expect("master evolution")
        .to_reduced();
    (grid, traj.reliability, traj.hazard)
}

fn analytic_numeric_agreement() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for q in fig2_sets() {
        let start = Instant::now();
        let (grid, r_num, h_num) = master_reliability(&q, 20.0, 1e-3);
        let elapsed = start.elapsed();
        let mut dr = 0.0f64;
        let mut dh = 0.0f64;
        for ((t, r), h) in grid.iter().zip(&r_num).zip(&h_num) {
            let (ra, ha) = reliability_and_hazard(&q, *t);
            dr = dr.max((ra - r).abs());
            if let Some(h) = h {
                dh = dh.max((ha - h).abs());
            }
        }
        let ok = dr <= 1e-6 && dh <= 1e-5 && elapsed < Duration::from_secs(10);
        pass &= ok;
        parts.push(format!(
            "{q}: dR={dr:.1e} dh={dh:.1e} {:.2}s",
            elapsed.as_secs_f64()
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn overdamped_plateau() -> Outcome {
    let a = hazard_analytic(&p(0.5, 3.0, 0.5), 20.0);
    let b = hazard_analytic(&p(0.1, 2.5, 1.0), 40.0);
    Outcome {
        pass: (a - 1.0).abs() <= 1e-3 && (b - 1.02716).abs() <= 1e-3,
        detail: format!("h(20)={a:.9} (target 1.0), h(40)={b:.9} (target 1.02716)"),
    }
}

fn extremum_classification() -> Outcome {
    let scan = ScanConfig::default();
    let a = count_hazard_extrema(&p(0.5, 3.0, 0.5), &scan);
    let b = count_hazard_extrema(&p(0.1, 2.5, 1.0), &scan);
    let counts_ok = matches!(&a, Ok(r) if r.count == 0 && r.method_agreement)
        && matches!(&b, Ok(r) if r.count == 2 && r.method_agreement);

    let start = Instant::now();
    let grid = PhaseGrid {
        gmin: 0.05,
        gmax: 3.0,
        n: 100,
    };
    let map = phase_map(0.1, &grid, DEFAULT_BAND, &scan).expect("phase map");
    let elapsed = start.elapsed();
    let (zero, two, blank, bad) = (
        map.count(PhaseClass::NoExtrema),
        map.count(PhaseClass::TwoExtrema),
        map.count(PhaseClass::Blank),
        map.count(PhaseClass::Disagreement),
    );
    let map_ok = bad == 0 && zero > 0 && two > 0 && elapsed < Duration::from_secs(60);
    Outcome {
        pass: counts_ok && map_ok,
        detail: format!(
            "counts {:?}/{:?}; map 0:{zero} 2:{two} blank:{blank} disagree:{bad} in {:.1}s",
            a.map(|r| r.count),
            b.map(|r| r.count),
            elapsed.as_secs_f64()
        ),
    }
}

fn quartic_critical_point() -> Outcome {
    let start = Instant::now();
    let x = critical_x_k2::<f64>();
    let elapsed = start.elapsed();
    match x {
        Ok(x) => {
            let flips = resultant_k2(x - 1e-3) * resultant_k2(x + 1e-3) < 0.0;
            let ok =
                (x - X_STAR_REFERENCE).abs() <= 1e-3 && flips && elapsed < Duration::from_secs(1);
            Outcome {
                pass: ok,
                detail: format!(
                    "x*={x:.12}, resultant sign change: {flips}, {:.3}s",
                    elapsed.as_secs_f64()
                ),
            }
        }
        Err(e) => Outcome {
            pass: false,
            detail: e.to_string(),
        },
    }
}

fn fpt_estimator_fidelity() -> Outcome {
    let q = p(0.5, 0.2, 0.5);
    let start = Instant::now();
    let cfg = Monitoring64::new(0.1, 100_000, 20_240_601, 45.0).unwrap();
    let est = estimate(&sample_first_passage(&q, &cfg)).unwrap();
    let pk = bin_probabilities(&q, &cfg);
    let elapsed = start.elapsed();

    let sup = est
        .t
        .iter()
        .zip(&est.r_hat)
        .map(|(&t, &r)| (r - reliability_analytic(&q, t)).abs())
        .fold(0.0, f64::max);
    let (mut eligible, mut within, mut within_h) = (0usize, 0usize, 0usize);
    for k in 0..est.len() {
        if est.n_risk[k] < 100 {
            continue;
        }
        let (Some(h), Some(var)) = (est.h_hat[k], est.var_theory[k]) else {
            continue;
        };
        eligible += 1;
        let sigma = var.sqrt();
        // E[ĥ | n_risk] is the conditional bin probability over dt
        if (h - pk[k] / 0.1).abs() <= 4.0 * sigma {
            within += 1;
        }
        if (h - hazard_analytic(&q, est.t[k])).abs() <= 4.0 * sigma {
            within_h += 1;
        }
    }
    let frac = within as f64 / eligible.max(1) as f64;
    let frac_h = within_h as f64 / eligible.max(1) as f64;
    Outcome {
        pass: sup <= 0.01 && frac >= 0.99 && eligible > 0 && elapsed < Duration::from_secs(30),
        detail: format!(
            "sup|R_hat-R|={sup:.2e}; within 4σ of p_k/dt: {within}/{eligible} ({:.1}%); \
             of h(t_k): {within_h}/{eligible} ({:.1}%); {:.2}s",
            100.0 * frac,
            100.0 * frac_h,
            elapsed.as_secs_f64()
        ),
    }
}

fn variance_scaling() -> Outcome {
    let q = p(0.5, 0.2, 0.5);
    let n_list = [1_000usize, 10_000, 100_000];
    let times = [2.5, 10.0, 17.5];
    let start = Instant::now();
    let template = Monitoring64::new(0.1, 1, 4_242, 45.0).unwrap();
    let rows = variance_experiment(&q, &template, &n_list, &times, 50).expect("variance run");
    let elapsed = start.elapsed();

    let mut pass = elapsed < Duration::from_secs(300);
    let mut parts = Vec::new();
    for &t in &times {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.t == t)
            .filter_map(|r| r.var_emp.map(|v| (r.n_shots as f64, v)))
            .collect();
        let slope = spinrel::fpt::loglog_slope(&pts);
        let ok = pts.len() == n_list.len() && slope.is_some_and(|s| (-1.15..=-0.85).contains(&s));
        pass &= ok;
        parts.push(format!("t={t}: slope={:.3}", slope.unwrap_or(f64::NAN)));
    }
    let mut worst = (1.0f64, 0usize, 0.0f64);
    for r in &rows {
        let ratio = r.var_emp.map_or(f64::NAN, |v| v / r.var_theory);
        let ok = (0.5..=2.0).contains(&ratio);
        pass &= ok;
        if !ok || (ratio - 1.0).abs() > (worst.0 - 1.0).abs() {
            worst = (ratio, r.n_shots, r.t);
        }
        if r.undefined_reps > 0 {
            parts.push(format!(
                "N={} t={}: {} reps with empty risk set",
                r.n_shots, r.t, r.undefined_reps
            ));
        }
    }
    parts.push(format!(
        "ratio furthest from 1: {:.3} at N={} t={}",
        worst.0, worst.1, worst.2
    ));
    parts.push(format!("{:.1}s", elapsed.as_secs_f64()));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn structural_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7_777);
    let (mut trace, mut block, mut mode, mut deriv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut monotone = true;
    let mut nonneg = true;
    let mut mode_draws = 0;
    for _ in 0..1000 {
        let q = p(
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.01..4.0),
            rng.gen_range(0.01..4.0),
        );
        let grid = uniform_grid(5.0, 0.5);
        let dt = (0.05 / q.rate_scale()).min(1e-3);
        let traj = evolve_master(&Density64::pure(BasisState::Both), &q, &grid, dt)
            .expect("master evolution");
        for s in &traj.states {
            trace = trace.max((s.trace().re - 1.0).abs());
            block = block.max(s.sector_coherence());
        }
        let mut prev = 1.0;
        for i in 0..=200 {
            let t = i as f64 * 0.1;
            let (r, h) = reliability_and_hazard(&q, t);
            monotone &= r <= prev + 1e-15;
            nonneg &= h >= 0.0;
            prev = r;
        }
        // the mode sum needs J > 0 and Δγ != 0 and is ill-conditioned at the
        // crossover, where the eigenvectors merge
        let d = derived_values(&q);
        if d.regime == Regime::Critical || (d.dgamma.abs() - 4.0 * q.j()).abs() < 1e-3 {
            continue;
        }
        let Ok(modes) = eigen_modes(&q) else { continue };
        mode_draws += 1;
        let a = spinrel::build_a(&q);
        for t in [0.0, 0.7, 2.0, 6.0] {
            let x = modes.state_at(t);
            let r_modes = x[0].re + x[1].re + x[2].re;
            mode = mode.max((r_modes - reliability_analytic(&q, t)).abs());
            // ẋ = A x, evaluated termwise on the mode sum
            let mut xdot = [num_complex::Complex64::new(0.0, 0.0); 4];
            for k in 0..4 {
                let w =
                    modes.coefficients[k] * modes.eigenvalues[k] * (modes.eigenvalues[k] * t).exp();
                for i in 0..4 {
                    xdot[i] += w * modes.eigenvectors[k][i];
                }
            }
            for i in 0..4 {
                let ax: f64 = (0..4).map(|j| a[i][j] * x[j].re).sum();
                deriv = deriv.max((xdot[i].re - ax).abs());
            }
            let f = q.gamma1() * x[0].re + q.gamma2() * x[1].re;
            deriv = deriv.max((f - failure_density_analytic(&q, t)).abs());
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: trace <= 1e-9
            && block <= 1e-12
            && monotone
            && nonneg
            && mode <= 1e-10
            && deriv <= 1e-10
            && elapsed < Duration::from_secs(30),
        detail: format!(
            "trace {trace:.1e}, block {block:.1e}, monotone {monotone}, h>=0 {nonneg}, \
             mode-sum {mode:.1e}, derivative {deriv:.1e} ({mode_draws} mode draws), {:.1}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn critical_limit() -> Outcome {
    let q = p(0.5, 2.5, 0.5);
    let (grid, r_num, _) = master_reliability(&q, 20.0, 1e-3);
    let gb = q.gbar();
    let j2 = q.j() * q.j();
    let err = grid
        .iter()
        .zip(&r_num)
        .map(|(&t, r)| {
            let formula = (2.0 + 4.0 * j2 * t * t) * (-gb * t).exp() - (-2.0 * gb * t).exp();
            (formula - r)
                .abs()
                .max((reliability_analytic(&q, t) - r).abs())
        })
        .fold(0.0, f64::max);
    Outcome {
        pass: err <= 1e-7,
        detail: format!("regime {}, sup error {err:.1e}", derived_values(&q).regime),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("analytic/numeric agreement", analytic_numeric_agreement),
        ("overdamped plateau", overdamped_plateau),
        ("extremum classification", extremum_classification),
        ("critical point x*", quartic_critical_point),
        ("first-passage estimator fidelity", fpt_estimator_fidelity),
        ("variance scaling", variance_scaling),
        ("structural invariants", structural_invariants),
        ("critical-regime limit", critical_limit),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {}. {name}: {}", i + 1, outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {}/8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
