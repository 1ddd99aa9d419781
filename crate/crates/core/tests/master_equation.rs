#![allow(clippy::needless_range_loop)]

//! The master equation against an independently assembled 16×16 Liouvillian,
//! and the reduced dynamics against the full density-matrix integration.

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinrel::liouville::{uniform_grid, Mat4};
use spinrel::{
    evolve_master, evolve_reduced, integrate_reduced, lindblad_rhs, reliability_analytic,
    BasisState, Density64, Params64, Reduced64,
};

type M = Vec<Vec<C>>;

fn zeros(n: usize) -> M {
    vec![vec![C::new(0.0, 0.0); n]; n]
}

fn eye(n: usize) -> M {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

fn kron(a: &M, b: &M) -> M {
    let (n, m) = (a.len(), b.len());
    let mut out = zeros(n * m);
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn mul(a: &M, b: &M) -> M {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn dagger(a: &M) -> M {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

fn transpose(a: &M) -> M {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn add(a: &M, b: &M, s: C) -> M {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + s * y).collect())
        .collect()
}

/// Two-qubit operators from single-site ones, ordering the basis as
/// `|00⟩, |10⟩, |01⟩, |11⟩` (site 1 is the fast index).
fn site_ops() -> (M, M, M) {
    let lower = vec![
        vec![C::new(0.0, 0.0), C::new(1.0, 0.0)],
        vec![C::new(0.0, 0.0), C::new(0.0, 0.0)],
    ];
    let id = eye(2);
    // kron(site2, site1) puts site 1 on the fast index
    let s1 = kron(&id, &lower);
    let s2 = kron(&lower, &id);
    let hop = add(
        &mul(&dagger(&s1), &s2),
        &mul(&dagger(&s2), &s1),
        C::new(1.0, 0.0),
    );
    (s1, s2, hop)
}

/// Column-stacking Liouvillian: `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
fn liouvillian(p: &Params64) -> M {
    let (s1, s2, hop) = site_ops();
    let h: M = hop
        .iter()
        .map(|r| r.iter().map(|x| x * p.j()).collect())
        .collect();
    let id = eye(4);
    let mut l = add(
        &kron(&id, &h),
        &kron(&transpose(&h), &id),
        C::new(-1.0, 0.0),
    );
    l = l
        .iter()
        .map(|r| r.iter().map(|x| x * C::new(0.0, -1.0)).collect())
        .collect();
    for (s, g) in [(s1, p.gamma1()), (s2, p.gamma2())] {
        let op: M = s
            .iter()
            .map(|r| r.iter().map(|x| x * g.sqrt()).collect())
            .collect();
        let conj: M = op
            .iter()
            .map(|r| r.iter().map(|x| x.conj()).collect())
            .collect();
        let ldl = mul(&dagger(&op), &op);
        l = add(&l, &kron(&conj, &op), C::new(1.0, 0.0));
        l = add(&l, &kron(&id, &ldl), C::new(-0.5, 0.0));
        l = add(&l, &kron(&transpose(&ldl), &id), C::new(-0.5, 0.0));
    }
    l
}

fn random_density(rng: &mut ChaCha8Rng) -> Density64 {
    let mut a = zeros(4);
    for row in a.iter_mut() {
        for x in row.iter_mut() {
            *x = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let rho = mul(&a, &dagger(&a));
    let tr: f64 = (0..4).map(|i| rho[i][i].re).sum();
    let mut e: Mat4<f64> = [[C::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            e[i][j] = rho[i][j] / tr;
        }
    }
    Density64::from_entries(e)
}

fn random_params(rng: &mut ChaCha8Rng) -> Params64 {
    Params64::new(
        rng.gen_range(0.0..2.0),
        rng.gen_range(0.01..4.0),
        rng.gen_range(0.01..4.0),
    )
    .unwrap()
}

#[test]
fn rhs_matches_superoperator() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let p = random_params(&mut rng);
        let rho = random_density(&mut rng);
        let l = liouvillian(&p);
        let mut vec_rho = vec![C::new(0.0, 0.0); 16];
        for i in 0..4 {
            for j in 0..4 {
                vec_rho[j * 4 + i] = rho.get(i, j);
            }
        }
        let got = lindblad_rhs(&rho, &p);
        for r in 0..16 {
            let expected: C = (0..16).map(|c| l[r][c] * vec_rho[c]).sum();
            let (i, j) = (r % 4, r / 4);
            assert!(
                (got.get(i, j) - expected).norm() < 1e-12,
                "{p} entry ({i},{j}): {} vs {expected}",
                got.get(i, j)
            );
        }
    }
}

#[test]
fn rhs_is_traceless_and_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let d = lindblad_rhs(&random_density(&mut rng), &p);
        assert!(d.trace().norm() < 1e-13);
        assert!(d.hermiticity_error() < 1e-13);
    }
}

#[test]
fn master_and_reduced_agree_for_fig2_sets() {
    for (j, g1, g2) in [
        (0.5, 0.2, 0.5),
        (0.5, 3.0, 0.5),
        (0.1, 2.5, 1.0),
        (0.5, 2.5, 0.5),
    ] {
        let p = Params64::new(j, g1, g2).unwrap();
        let grid = uniform_grid(10.0, 0.5);
        let master = evolve_master(&Density64::pure(BasisState::Both), &p, &grid, 1e-3)
            .unwrap()
            .to_reduced();
        let reduced = evolve_reduced(&Reduced64::fully_excited(), &p, &grid).unwrap();
        for (a, b) in master.states.iter().zip(&reduced.states) {
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                assert!((x - y).abs() < 1e-10, "{p}: {x} vs {y}");
            }
        }
        for (t, r) in grid.iter().zip(&master.reliability) {
            assert!((r - reliability_analytic(&p, *t)).abs() < 1e-10);
        }
    }
}

#[test]
fn fully_excited_start_stays_block_diagonal() {
    let p = Params64::new(0.5, 0.2, 0.5).unwrap();
    let grid = uniform_grid(20.0, 0.25);
    let traj = evolve_master(&Density64::pure(BasisState::Both), &p, &grid, 1e-3).unwrap();
    for s in &traj.states {
        assert!(s.sector_coherence() <= 1e-12);
        assert!((s.trace().re - 1.0).abs() <= 1e-9);
        assert!(s.min_eigenvalue() > -1e-12);
    }
}

#[test]
fn reduced_integrator_converges_to_propagator() {
    let p = Params64::new(0.5, 3.0, 0.5).unwrap();
    let grid = uniform_grid(5.0, 0.5);
    let exact = evolve_reduced(&Reduced64::fully_excited(), &p, &grid).unwrap();
    let mut prev = f64::INFINITY;
    for dt in [4e-3, 2e-3, 1e-3] {
        let rk = integrate_reduced(&Reduced64::fully_excited(), &p, &grid, dt).unwrap();
        let err = rk
            .iter()
            .zip(&exact.states)
            .map(|(a, b)| (a.reliability() - b.reliability()).abs())
            .fold(0.0, f64::max);
        assert!(err < prev / 8.0 || err < 1e-14, "dt={dt} err={err}");
        prev = err;
    }
}

#[test]
fn arbitrary_reduced_start_matches_master() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let p = random_params(&mut rng);
        let rho = random_density(&mut rng);
        // drop sector coherences, which the reduced description discards
        let mut e = *rho.entries();
        for i in 0..4 {
            for j in 0..4 {
                let sector = |k: usize| [0, 1, 1, 2][k];
                if sector(i) != sector(j) {
                    e[i][j] = C::new(0.0, 0.0);
                }
            }
        }
        let rho = Density64::from_entries(e);
        let grid = uniform_grid(3.0, 0.5);
        let dt = (0.05 / p.rate_scale()).min(1e-3);
        let master = evolve_master(&rho, &p, &grid, dt).unwrap().to_reduced();
        let reduced = evolve_reduced(&rho.reduced(), &p, &grid).unwrap();
        for (a, b) in master.states.iter().zip(&reduced.states) {
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                assert!((x - y).abs() < 1e-9, "{p}: {x} vs {y}");
            }
        }
    }
}
