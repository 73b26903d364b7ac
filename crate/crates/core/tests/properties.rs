//! Property tests against independent oracles: an explicit lifted-matrix
//! evaluation of the objective, central finite differences, sampled
//! perturbations around block minimizers, and file round trips.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snl_core::files::{parse_instance, write_instance};
use snl_core::generate::{generate, GenSpec};
use snl_core::problem::{objective, penalized_gradient, penalized_objective};
use snl_core::solver::{solve_u_column, solve_v_column, sweep, u_column_system, v_column_system};
use snl_core::{FactorPair, Network, Points};

fn instance(m: usize, n: usize, rho: f64, sigma: f64, seed: u64) -> Network {
    let spec = GenSpec { m, n, dim: 2, rho, sigma, seed };
    let (network, _, _) = generate(&spec).unwrap().into_instance().into_parts();
    network
}

fn random_points(rng: &mut ChaCha8Rng, dim: usize, len: usize, scale: f64) -> Points {
    let data = (0..dim * len).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    Points::from_flat(dim, data).unwrap()
}

fn random_pair(rng: &mut ChaCha8Rng, net: &Network) -> FactorPair {
    let (d, m) = (net.dim(), net.num_sensors());
    FactorPair::new(random_points(rng, d, m, 1.5), random_points(rng, d, m, 1.5)).unwrap()
}

/// `f` from the lifted matrix `Z = [I V; Uᵀ UᵀV]` and the edge vectors
/// `e_i − e_j` and `(a_k; −e_i)`, with every entry formed explicitly.
fn lifted_objective(net: &Network, pair: &FactorPair) -> f64 {
    let (d, m) = (net.dim(), net.num_sensors());
    let size = d + m;
    let mut z = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            z[r * size + c] = match (r < d, c < d) {
                (true, true) => f64::from(u8::from(r == c)),
                (true, false) => pair.v.column(c - d)[r],
                (false, true) => pair.u.column(r - d)[c],
                (false, false) => (0..d).map(|l| pair.u.column(r - d)[l] * pair.v.column(c - d)[l]).sum(),
            };
        }
    }
    let quad = |x: &[f64]| -> f64 {
        (0..size)
            .map(|r| (0..size).map(|c| x[r] * z[r * size + c] * x[c]).sum::<f64>())
            .sum()
    };
    let mut total = 0.0;
    for e in net.ss_edges() {
        let mut x = vec![0.0; size];
        x[d + e.i] = 1.0;
        x[d + e.j] = -1.0;
        total += (quad(&x) - e.dist * e.dist).powi(2);
    }
    for e in net.sa_edges() {
        let mut x = vec![0.0; size];
        x[..d].copy_from_slice(net.anchors().column(e.anchor));
        x[d + e.sensor] = -1.0;
        total += (quad(&x) - e.dist * e.dist).powi(2);
    }
    0.5 * total
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn swapped(pair: &FactorPair) -> FactorPair {
    FactorPair::new(pair.v.clone(), pair.u.clone()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_matches_lifted_matrix(m in 1usize..7, n in 3usize..6, seed in any::<u64>()) {
        let net = instance(m, n, 1.0, 0.1, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let pair = random_pair(&mut rng, &net);
        let lhs = objective(&net, &pair);
        let rhs = lifted_objective(&net, &pair);
        prop_assert!(rel_close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn objective_is_symmetric_in_factors(m in 1usize..7, seed in any::<u64>()) {
        let net = instance(m, 4, 1.0, 0.2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = random_pair(&mut rng, &net);
        let a = objective(&net, &pair);
        let b = objective(&net, &swapped(&pair));
        prop_assert!(rel_close(a, b, 1e-14));
    }

    #[test]
    fn gradient_matches_central_differences(m in 1usize..6, seed in any::<u64>(), gamma in 0.01f64..5.0) {
        let net = instance(m, 4, 1.0, 0.1, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let pair = random_pair(&mut rng, &net);
        let (gu, gv) = penalized_gradient(&net, &pair, gamma).unwrap();
        let h = 1e-6;
        let mut err = 0.0f64;
        let mut norm = 0.0f64;
        for (which, analytic) in [(0, &gu), (1, &gv)] {
            for idx in 0..analytic.as_slice().len() {
                let eval = |delta: f64| {
                    let mut p = pair.clone();
                    let target = if which == 0 { &mut p.u } else { &mut p.v };
                    target.as_mut_slice()[idx] += delta;
                    penalized_objective(&net, &p, gamma).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                err += (fd - analytic.as_slice()[idx]).powi(2);
                norm += analytic.as_slice()[idx].powi(2);
            }
        }
        prop_assert!(err.sqrt() <= 1e-5 * norm.sqrt().max(1.0), "err {} norm {}", err.sqrt(), norm.sqrt());
    }

    #[test]
    fn column_systems_are_gamma_strongly_convex(m in 1usize..7, seed in any::<u64>(), gamma in 1e-3f64..10.0) {
        let net = instance(m, 4, 0.9, 0.1, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let pair = random_pair(&mut rng, &net);
        let d = net.dim();
        for i in 0..m {
            for (a, _) in [u_column_system(&net, &pair, i, gamma), v_column_system(&net, &pair, i, gamma)] {
                for _ in 0..10 {
                    let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                    let xax: f64 = (0..d).map(|r| (0..d).map(|c| x[r] * a[r * d + c] * x[c]).sum::<f64>()).sum();
                    let xx: f64 = x.iter().map(|v| v * v).sum();
                    prop_assert!(xax >= gamma * xx * (1.0 - 1e-12));
                }
            }
        }
    }

    #[test]
    fn column_minimizers_resist_perturbation(m in 1usize..6, seed in any::<u64>(), gamma in 0.05f64..3.0) {
        let net = instance(m, 4, 1.0, 0.1, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 11);
        let mut pair = random_pair(&mut rng, &net);
        let i = (seed % m as u64) as usize;
        for use_u in [true, false] {
            let x = if use_u { solve_u_column(&net, &pair, i, gamma) } else { solve_v_column(&net, &pair, i, gamma) }.unwrap();
            let target = if use_u { &mut pair.u } else { &mut pair.v };
            target.column_mut(i).copy_from_slice(&x);
            let best = penalized_objective(&net, &pair, gamma).unwrap();
            for _ in 0..100 {
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                let mut p = pair.clone();
                let col = if use_u { p.u.column_mut(i) } else { p.v.column_mut(i) };
                col[0] += 1e-3 * angle.cos();
                col[1] += 1e-3 * angle.sin();
                let value = penalized_objective(&net, &p, gamma).unwrap();
                prop_assert!(value >= best * (1.0 - 1e-12), "{value} < {best}");
            }
        }
    }

    #[test]
    fn sweeps_never_increase_penalized_objective(m in 1usize..12, seed in any::<u64>(), gamma in 0.01f64..5.0) {
        let net = instance(m, 5, 0.8, 0.15, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 13);
        let mut pair = random_pair(&mut rng, &net);
        let mut before = penalized_objective(&net, &pair, gamma).unwrap();
        for _ in 0..20 {
            let out = sweep(&net, &pair, gamma).unwrap();
            prop_assert!(out.penalized_value <= before * (1.0 + 1e-12), "{} > {before}", out.penalized_value);
            before = out.penalized_value;
            pair = out.factors;
        }
    }

    #[test]
    fn iterates_stay_bounded(m in 2usize..15, seed in any::<u64>(), gamma in 0.01f64..5.0) {
        let spec = GenSpec { m, n: 4, dim: 2, rho: 0.9, sigma: 0.1, seed };
        let generated = generate(&spec).unwrap();
        prop_assume!(generated.is_connected());
        let (net, _, _) = generated.into_instance().into_parts();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 17);
        let mut pair = random_pair(&mut rng, &net);
        let max_dist = net.ss_edges().iter().map(|e| e.dist).chain(net.sa_edges().iter().map(|e| e.dist)).fold(0.0, f64::max);
        let bound = 100.0 * pair.max_abs().max(net.anchors().max_abs()).max(max_dist);
        for _ in 0..50 {
            pair = sweep(&net, &pair, gamma).unwrap().factors;
            prop_assert!(pair.max_abs() < bound);
        }
    }

    #[test]
    fn instance_files_round_trip(m in 1usize..40, n in 1usize..8, dim in 1usize..4, seed in any::<u64>(), sigma in 0.0f64..0.3) {
        let spec = GenSpec { m, n, dim, rho: 0.6, sigma, seed };
        let inst = generate(&spec).unwrap().into_instance();
        let text = write_instance(&inst).unwrap();
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(write_instance(&back).unwrap(), text);
    }
}
