//! Acceptance gate: every criterion the engine must satisfy, each as one
//! test with pinned tolerances and a single PASS line on success.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tasep_core::{
    bethe, combinat, correlator, detforms, montecarlo, oracle,
    qism::{self, Side},
    RingShape,
};

fn shape(m: usize, n: usize) -> RingShape {
    RingShape::new(m, n).unwrap()
}

/// Random nonzero complex rapidity with magnitude in [0.6, 1.6].
fn random_u(rng: &mut ChaCha8Rng) -> C64 {
    let r: f64 = rng.gen_range(0.6..1.6);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    C64::from_polar(r, phi)
}

const END_TO_END_SHAPES: [(usize, usize); 6] =
    [(2, 1), (3, 1), (4, 2), (5, 2), (6, 3), (8, 3)];

#[test]
fn criterion_1_end_to_end_correlation_matches_oracle() {
    let times = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0];
    let tol = 1e-8;
    let mut worst = 0.0f64;
    for &(m, n) in &END_TO_END_SHAPES {
        let s = shape(m, n);
        let cat = bethe::solve_all(s, bethe::DEFAULT_TOL).unwrap();
        for site in 1..=m {
            for &t in &times {
                let b = correlator::correlation(s, site, t, &cat).unwrap().value;
                let o = oracle::direct_correlation(s, site, t).unwrap();
                let diff = (b - o).abs();
                worst = worst.max(diff);
                assert!(
                    diff < tol,
                    "M={m} N={n} m={site} t={t}: bethe {b} vs oracle {o}, |diff| = {diff:.3e}"
                );
            }
        }
    }
    println!("PASS criterion 1: end-to-end |bethe - oracle| < 1e-8 (worst {worst:.3e})");
}

#[test]
fn criterion_2_bethe_completeness_and_spectrum() {
    for m in 2..=10usize {
        for n in 1..m {
            let s = shape(m, n);
            let cat = bethe::solve_all(s, 1e-10).unwrap();
            let expected = s.dim() - 1;
            assert_eq!(
                cat.solutions.len(),
                expected,
                "M={m} N={n}: found {} of {expected} nontrivial solutions",
                cat.solutions.len()
            );
            assert!(cat.includes_stationary);
            for sol in &cat.solutions {
                assert!(
                    sol.residual < 1e-10,
                    "M={m} N={n}: residual {:.3e}",
                    sol.residual
                );
            }

            // energy multiset + {0} == oracle spectrum, with multiplicities
            let gen = oracle::build_generator(s).unwrap();
            let spec = oracle::spectrum(&gen).unwrap();
            let mut energies: Vec<C64> = cat.solutions.iter().map(|sol| sol.energy).collect();
            energies.push(C64::new(0.0, 0.0));
            assert_eq!(energies.len(), spec.eigenvalues.len());
            // greedy nearest-neighbour matching consumes each oracle
            // eigenvalue once, so degeneracies must match in count
            let mut used = vec![false; spec.eigenvalues.len()];
            for e in &energies {
                let (best, dist) = spec
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !used[*i])
                    .map(|(i, ev)| (i, (e - ev).norm()))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                assert!(
                    dist < 1e-8,
                    "M={m} N={n}: Bethe energy {e} is {dist:.3e} from nearest unused eigenvalue"
                );
                used[best] = true;
            }
        }
    }
    println!("PASS criterion 2: Bethe catalogs complete with oracle-matched spectra for M <= 10");
}

#[test]
fn criterion_3_scalar_product_matches_qism() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5350_5244);
    for m in 2..=8usize {
        for n in 1..=3.min(m) {
            for _ in 0..20 {
                let v: Vec<C64> = (0..n).map(|_| random_u(&mut rng)).collect();
                let u: Vec<C64> = (0..n).map(|_| random_u(&mut rng)).collect();
                let got = detforms::scalar_product(&v, &u, m).unwrap();
                let left = qism::build_state(&v, Side::Left, m).unwrap();
                let right = qism::build_state(&u, Side::Right, m).unwrap();
                let want = qism::pair(&left, &right);
                let rel = (got - want).norm() / want.norm().max(f64::MIN_POSITIVE);
                assert!(
                    rel < 1e-10,
                    "M={m} N={n}: scalar product got {got}, qism {want}, rel {rel:.3e}"
                );
            }
        }
    }
    println!("PASS criterion 3: scalar-product determinant matches qism within 1e-10 relative");
}

#[test]
fn criterion_4_form_factor_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x464f_524d);
    for m in 2..=8usize {
        for n in 1..=3.min(m - 1) {
            for _ in 0..10 {
                let v: Vec<C64> = (0..n).map(|_| random_u(&mut rng)).collect();
                let u: Vec<C64> = (0..n).map(|_| random_u(&mut rng)).collect();
                // <Psi(v)| s_1 |Psi(u)> = prod_k (1 - u_k^{-2}) * S_{M-1}(v, u)
                let got = detforms::form_factor_s1_generic(&v, &u, m).unwrap();
                let left = qism::build_state(&v, Side::Left, m).unwrap();
                let right = qism::build_state(&u, Side::Right, m).unwrap();
                let projected = qism::apply_projector_full(&right, 1, m).unwrap();
                let want = qism::pair(&left, &projected);
                let rel = (got - want).norm() / want.norm().max(f64::MIN_POSITIVE);
                assert!(
                    rel < 1e-10,
                    "M={m} N={n}: form factor got {got}, qism {want}, rel {rel:.3e}"
                );
            }
        }
    }
    println!("PASS criterion 4: s_1 form factor reduces to the M-1 scalar product within 1e-10");
}

#[test]
fn criterion_5_norm_formula() {
    for m in 2..=8usize {
        for n in 1..m {
            let s = shape(m, n);
            let cat = bethe::solve_all(s, bethe::DEFAULT_TOL).unwrap();
            for sol in &cat.solutions {
                let u: Vec<C64> = sol.w.iter().map(|&w| detforms::u_from_w(w)).collect();
                let got = detforms::norm_squared(&sol.w, s, 1e-8).unwrap();
                let left = qism::build_state(&u, Side::Left, m).unwrap();
                let right = qism::build_state(&u, Side::Right, m).unwrap();
                let want = qism::pair(&left, &right);
                let rel = (got - want).norm() / want.norm().max(1.0);
                assert!(
                    rel < 1e-8,
                    "M={m} N={n}: norm got {got}, qism {want}, rel {rel:.3e}"
                );
            }
            // the stationary state pairs with itself to exactly Z_N
            let steady = qism::steady_state_full(m, n);
            let z = qism::pair(&steady, &steady);
            assert_eq!(z, C64::new(s.z(), 0.0));
        }
    }
    println!("PASS criterion 5: det Qtilde norm matches qism within 1e-8; stationary norm = Z_N");
}

#[test]
fn criterion_6_algebraic_identities() {
    // RTT relation at random spectral parameters; magnitudes near 1 keep
    // the monodromy entries O(1) so the absolute tolerance is meaningful
    let mut rng = ChaCha8Rng::seed_from_u64(0x5254_5452);
    let mut draw_pair = |rng: &mut ChaCha8Rng| loop {
        let mut one = |rng: &mut ChaCha8Rng| {
            let r: f64 = rng.gen_range(0.9..1.1);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            C64::from_polar(r, phi)
        };
        let (u, v) = (one(rng), one(rng));
        // keep the R-matrix entries O(1): g(u,v) has a pole at v^2 = u^2
        if (v * v - u * u).norm() > 0.2 {
            return (u, v);
        }
    };
    for m in 2..=6usize {
        for _ in 0..10 {
            let (u, v) = draw_pair(&mut rng);
            let res = qism::rtt_residual(u, v, m).unwrap();
            assert!(res < 1e-12, "M={m}: RTT residual {res:.3e} at u={u}, v={v}");
        }
    }
    // tau(1)^M = identity, exactly (the shift is a 0/1 permutation)
    for m in 2..=6usize {
        let tau = qism::shift_operator(m).unwrap();
        let mut power = tau.clone();
        for _ in 1..m {
            power = power.dot(&tau);
        }
        let dim = 1usize << m;
        for i in 0..dim {
            for j in 0..dim {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(power[[i, j]], C64::new(want, 0.0));
            }
        }
    }
    // Theta(1)^M = 1 per catalog solution
    for m in 2..=8usize {
        for n in 1..m {
            let cat = bethe::solve_all(shape(m, n), bethe::DEFAULT_TOL).unwrap();
            for sol in &cat.solutions {
                let dev = (sol.theta1.powu(m as u32) - 1.0).norm();
                assert!(dev < 1e-8, "M={m} N={n}: |Theta(1)^M - 1| = {dev:.3e}");
            }
        }
    }
    // the transfer-matrix log derivative reproduces the Hamiltonian
    for m in 2..=6usize {
        let from_tau = qism::hamiltonian_from_transfer(m).unwrap();
        let direct = qism::hamiltonian_direct(m).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in from_tau.iter().zip(direct.iter()) {
            worst = worst.max((a - b).norm());
        }
        assert!(worst < 1e-8, "M={m}: |H_tau - H_direct| = {worst:.3e}");
    }
    println!("PASS criterion 6: RTT < 1e-12, tau^M = I, Theta(1)^M = 1, H from tau within 1e-8");
}

#[test]
fn criterion_7_static_sum_rules() {
    for &(m, n) in &END_TO_END_SHAPES {
        let s = shape(m, n);
        let cat = bethe::solve_all(s, bethe::DEFAULT_TOL).unwrap();
        // t = 0: pure counting
        for site in 1..=m {
            let got = correlator::correlation(s, site, 0.0, &cat).unwrap().value;
            let want = if site == 1 {
                (m - n) as f64 / m as f64
            } else {
                combinat::binomial(m as u64 - 2, n as u64).unwrap() as f64 / s.z()
            };
            assert!(
                (got - want).abs() < 1e-8,
                "M={m} N={n} m={site} t=0: got {got}, want {want}"
            );
        }
        // t -> infinity: the product of densities
        let gen = oracle::build_generator(s).unwrap();
        let gap = oracle::spectrum(&gen).unwrap().gap;
        let t_late = 50.0 / gap;
        let stationary = ((m - n) as f64 / m as f64).powi(2);
        let got = correlator::correlation(s, 2, t_late, &cat).unwrap().value;
        assert!(
            (got - stationary).abs() < 1e-6,
            "M={m} N={n} t={t_late}: got {got}, stationary {stationary}"
        );
    }
    println!("PASS criterion 7: t=0 counting values and t->infinity limits hold");
}

#[test]
fn criterion_8_monte_carlo_consistency() {
    let s = shape(4, 2);
    let cat = bethe::solve_all(s, bethe::DEFAULT_TOL).unwrap();
    let exact = correlator::correlation(s, 3, 1.0, &cat).unwrap().value;

    let est = montecarlo::estimate_correlation(montecarlo::McConfig {
        shape: s,
        samples: 100_000,
        t: 1.0,
        m: 3,
        seed: 20_240_001,
    })
    .unwrap();
    let z = (est.mean - exact) / est.std_error;
    assert!(
        z.abs() < 3.0,
        "MC mean {} vs exact {exact}: z = {z:.2}",
        est.mean
    );

    // z-score sanity across independent seeds: no systematic bias and no
    // wildly misreported error bars
    let mut zs = Vec::new();
    for seed in 0..20u64 {
        let e = montecarlo::estimate_correlation(montecarlo::McConfig {
            shape: s,
            samples: 20_000,
            t: 1.0,
            m: 3,
            seed: 7_000 + seed,
        })
        .unwrap();
        zs.push((e.mean - exact) / e.std_error);
    }
    let mean_z = zs.iter().sum::<f64>() / zs.len() as f64;
    let within = zs.iter().filter(|z| z.abs() <= 3.0).count();
    assert!(
        mean_z.abs() < 1.0,
        "mean z over 20 seeds = {mean_z:.3} (bias suspected)"
    );
    assert!(within >= 19, "{within}/20 seeds within 3 sigma");
    println!("PASS criterion 8: Monte Carlo within 3 sigma (z = {z:.2}, mean z = {mean_z:.2})");
}
