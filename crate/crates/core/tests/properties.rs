#![allow(clippy::needless_range_loop)]

mod common;

use common::{fully_observed, gaussian, rng, separated_matrix, Spectral};
use lowrank::baselines::{soft_impute, SoftImputeConfig};
use lowrank::inner::{optimize_fast, optimize_full, InnerConfig, LsqrScope};
use lowrank::linalg::{
    svd_threshold, top_singular_triplet, DenseMatrix, FactorPair, SparseObservations,
};
use lowrank::objectives::{
    huber, ClippedObservedQuadratic, HuberLowRank, Objective, ObservedQuadratic,
};
use lowrank::solvers::{
    fast_greedy, fast_local_search, greedy, local_search, span_gradient_residual, SolverConfig,
};
use lowrank::sparse_equiv::{lift_diagonal, planted_instance, DesignKind};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_pair(g: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> FactorPair {
    FactorPair::new(gaussian(g, m, r), gaussian(g, n, r)).unwrap()
}

fn random_observations(g: &mut ChaCha8Rng, m: usize, n: usize, p: f64) -> SparseObservations {
    let mut e = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if g.random_bool(p) {
                e.push((i, j, g.random_range(-3.0..3.0)));
            }
        }
    }
    SparseObservations::new(m, n, e).unwrap()
}

/// Central difference of `R` along `x·yᵀ` against `xᵀ·∇R·y`.
fn directional_error(obj: &dyn Objective, p: &FactorPair, g: &mut ChaCha8Rng) -> f64 {
    let (m, n) = obj.dims();
    let x: Vec<f64> = (0..m).map(|_| g.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| g.random_range(-1.0..1.0)).collect();
    let h = 1e-5;
    let shift = |s: f64| p.append(&x.iter().map(|v| s * v).collect::<Vec<_>>(), &y);
    let fd = (obj.value(&shift(h)) - obj.value(&shift(-h))) / (2.0 * h);
    let grad = obj.gradient(p).to_dense();
    let exact: f64 = (0..m)
        .map(|i| x[i] * (0..n).map(|j| grad[(i, j)] * y[j]).sum::<f64>())
        .sum();
    (fd - exact).abs() / exact.abs().max(1e-3)
}

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn quadratic_gradient_matches_differences(seed in any::<u64>(), m in 2usize..9, n in 2usize..9, r in 0usize..3) {
        let mut g = rng(seed);
        let obj = ObservedQuadratic::new(random_observations(&mut g, m, n, 0.6));
        let p = random_pair(&mut g, m, n, r);
        for _ in 0..20 {
            prop_assert!(directional_error(&obj, &p, &mut g) <= 1e-5);
        }
    }

    #[test]
    fn huber_gradient_matches_differences(seed in any::<u64>(), m in 2usize..8, n in 2usize..8) {
        let mut g = rng(seed);
        let target = gaussian(&mut g, m, n);
        let p = random_pair(&mut g, m, n, 2);
        let delta = 0.7;
        let residual = p.to_dense().sub(&target);
        // finite differences straddling a kink are meaningless
        prop_assume!(residual.as_slice().iter().all(|v| (v.abs() - delta).abs() > 0.05));
        let obj = HuberLowRank::new(target, delta).unwrap();
        for _ in 0..20 {
            prop_assert!(directional_error(&obj, &p, &mut g) <= 1e-5);
        }
    }

    #[test]
    fn lifted_gradient_matches_differences(seed in 0u64..1000, n in 3usize..8) {
        let mut g = rng(seed);
        let problem = planted_instance(n, 2, DesignKind::Gaussian, seed).unwrap();
        let lifted = lift_diagonal(&problem, 1.5).unwrap();
        let p = random_pair(&mut g, n, n, 2);
        for _ in 0..20 {
            prop_assert!(directional_error(&lifted, &p, &mut g) <= 1e-5);
        }
    }

    #[test]
    fn quadratic_value_sign_and_huber_dominance(seed in any::<u64>(), m in 1usize..8, n in 1usize..8) {
        let mut g = rng(seed);
        let target = gaussian(&mut g, m, n);
        let p = random_pair(&mut g, m, n, 1);
        let quad = ObservedQuadratic::new(fully_observed(&target));
        prop_assert!(quad.value(&p) >= 0.0);
        let exact = ObservedQuadratic::new(fully_observed(&p.to_dense()));
        prop_assert_eq!(exact.value(&p), 0.0);
        let hub = HuberLowRank::new(target, g.random_range(0.1..2.0)).unwrap();
        prop_assert!(hub.value(&p) <= quad.value(&p) + 1e-12);
    }

    #[test]
    fn gradient_operator_agrees_with_materialized(seed in any::<u64>(), m in 1usize..8, n in 1usize..8) {
        let mut g = rng(seed);
        let p = random_pair(&mut g, m, n, 2);
        let sparse = ObservedQuadratic::new(random_observations(&mut g, m, n, 0.5)).gradient(&p);
        let dense = HuberLowRank::new(gaussian(&mut g, m, n), 0.5).unwrap().gradient(&p);
        for handle in [sparse, dense] {
            let full = handle.to_dense();
            let x: Vec<f64> = (0..n).map(|_| g.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..m).map(|_| g.random_range(-1.0..1.0)).collect();
            let op = handle.as_operator();
            let (mut a, mut c) = (vec![0.0; m], vec![0.0; n]);
            op.apply(&x, &mut a);
            op.apply_transpose(&y, &mut c);
            let (b, d) = (full.matvec(&x), full.t_matvec(&y));
            for (u, v) in a.iter().zip(&b).chain(c.iter().zip(&d)) {
                prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn clipped_value_is_unclipped_quadratic(seed in any::<u64>()) {
        let mut g = rng(seed);
        let target = random_observations(&mut g, 6, 5, 0.7);
        let p = random_pair(&mut g, 6, 5, 2);
        let clipped = ClippedObservedQuadratic::new(target.clone(), -1.0, 1.0).unwrap();
        prop_assert_eq!(clipped.value(&p), ObservedQuadratic::new(target).value(&p));
    }
}

proptest! {
    #![proptest_config(cases(32))]

    #[test]
    fn power_iteration_residual(seed in any::<u64>(), m in 2usize..12, n in 2usize..12) {
        let mut g = rng(seed);
        let k = m.min(n);
        // σ₁/σ₂ ≥ 1.1
        let mut sigma: Vec<f64> = (0..k).map(|i| 1.0 / (1.0 + i as f64)).collect();
        sigma[0] = 1.1 * sigma.get(1).copied().unwrap_or(0.0).max(0.5) + g.random_range(0.0..1.0);
        let a = Spectral::random(&mut g, m, n, sigma).dense();
        let out = top_singular_triplet(&a, seed, 5000, 1e-12).unwrap();
        let t = &out.triplet;
        let av = a.matvec(&t.v);
        let res: f64 = av.iter().zip(&t.u).map(|(x, u)| (x - t.sigma * u).powi(2)).sum::<f64>().sqrt();
        prop_assert!(out.converged);
        prop_assert!(res <= 1e-4 * t.sigma);
        let again = top_singular_triplet(&a, seed, 5000, 1e-12).unwrap();
        prop_assert_eq!(&again.triplet, t);
    }

    #[test]
    fn thresholded_svd_is_lemma_optimum(seed in any::<u64>(), m in 2usize..8, n in 2usize..8, r in 1usize..4, log_lambda in -1.0f64..1.0) {
        let mut g = rng(seed);
        let a = gaussian(&mut g, m, n);
        let r = r.min(m.min(n));
        let lambda = 10f64.powf(log_lambda);
        let value = |x: &DenseMatrix| a.inner(x) - 0.5 * lambda * x.inner(x);
        let (h, _) = svd_threshold(&a, r).unwrap();
        let mut best = h.to_dense();
        best.scale(1.0 / lambda);
        let top = value(&best);
        for _ in 0..1000 {
            let mut cand = gaussian(&mut g, m, r).matmul_t(&gaussian(&mut g, n, r));
            cand.scale(g.random_range(0.0..2.0) * best.frobenius_norm() / cand.frobenius_norm());
            prop_assert!(value(&cand) <= top + 1e-9 * top.abs().max(1.0));
        }
    }
}

/// Per-row normal equations solved by Gaussian elimination with pivoting:
/// the exact minimum of `R(U·Vᵀ)` over `U` for fixed `V`.
fn row_oracle(target: &SparseObservations, v: &DenseMatrix) -> Option<f64> {
    let r = v.cols();
    let mut total = 0.0;
    for i in 0..target.rows() {
        let entries: Vec<(usize, f64)> = target
            .iter()
            .filter(|e| e.0 == i)
            .map(|e| (e.1, e.2))
            .collect();
        if entries.is_empty() {
            continue;
        }
        let mut a = vec![vec![0.0; r + 1]; r];
        for &(j, val) in &entries {
            for p in 0..r {
                for q in 0..r {
                    a[p][q] += v[(j, p)] * v[(j, q)];
                }
                a[p][r] += v[(j, p)] * val;
            }
        }
        for c in 0..r {
            let piv = (c..r).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
            a.swap(c, piv);
            if a[c][c].abs() < 1e-8 {
                return None;
            }
            for row in c + 1..r {
                let f = a[row][c] / a[c][c];
                for col in c..=r {
                    a[row][col] -= f * a[c][col];
                }
            }
        }
        let mut u = vec![0.0; r];
        for c in (0..r).rev() {
            let s: f64 = (c + 1..r).map(|k| a[c][k] * u[k]).sum();
            u[c] = (a[c][r] - s) / a[c][c];
        }
        total += entries
            .iter()
            .map(|&(j, val)| {
                let pred: f64 = (0..r).map(|k| u[k] * v[(j, k)]).sum();
                0.5 * (val - pred) * (val - pred)
            })
            .sum::<f64>();
    }
    Some(total)
}

fn permuted_rows(target: &SparseObservations, perm: &[usize]) -> SparseObservations {
    let entries = target.iter().map(|(i, j, v)| (perm[i], j, v)).collect();
    SparseObservations::new(target.rows(), target.cols(), entries).unwrap()
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn full_refit_is_monotone_and_stationary(seed in any::<u64>(), m in 3usize..10, n in 3usize..10, r in 1usize..4) {
        let mut g = rng(seed);
        let obj = ObservedQuadratic::new(random_observations(&mut g, m, n, 0.6));
        let p = random_pair(&mut g, m, n, r.min(m.min(n)));
        let out = optimize_full(&p, &obj, &InnerConfig::default()).unwrap();
        prop_assert!(obj.value(&out.pair) <= obj.value(&p) + 1e-12);
        let grad_norm = lowrank::linalg::spectral_norm_estimate(obj.gradient(&out.pair).as_operator(), 1).unwrap();
        let residual = span_gradient_residual(&out.pair, &obj).unwrap() * (1.0 + grad_norm);
        prop_assert!(residual <= 1e-7 * (1.0 + grad_norm));
    }

    #[test]
    fn capped_refit_approaches_row_oracle(seed in any::<u64>(), m in 4usize..12, n in 8usize..16, r in 1usize..4) {
        let mut g = rng(seed);
        let target = random_observations(&mut g, m, n, 0.7);
        let p = random_pair(&mut g, m, n, r);
        let oracle = row_oracle(&target, p.v());
        prop_assume!(oracle.is_some());
        let oracle = oracle.unwrap();
        let obj = ObservedQuadratic::new(target);
        let scale = oracle.max(1.0);
        let long = InnerConfig::default().with_scope(LsqrScope::PerRow).with_ls_iters(100);
        let v_long = obj.value(&optimize_fast(&p, 0, &obj, &long).unwrap().pair);
        prop_assert!((v_long - oracle).abs() <= 1e-6 * scale, "{} vs {}", v_long, oracle);
        for scope in [LsqrScope::PerRow, LsqrScope::Joint] {
            let short = InnerConfig::default().with_scope(scope).with_ls_iters(3);
            let v_short = obj.value(&optimize_fast(&p, 0, &obj, &short).unwrap().pair);
            prop_assert!(v_short >= oracle - 1e-9 * scale);
        }
    }

    #[test]
    fn row_solves_are_independent(seed in any::<u64>(), m in 3usize..10, n in 3usize..10) {
        let mut g = rng(seed);
        let target = random_observations(&mut g, m, n, 0.6);
        let p = random_pair(&mut g, m, n, 2);
        let mut perm: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            perm.swap(i, g.random_range(0..=i));
        }
        let pu = DenseMatrix::from_fn(m, 2, |i, c| p.u()[(perm.iter().position(|&k| k == i).unwrap(), c)]);
        let moved = FactorPair::new(pu, p.v().clone()).unwrap();
        let moved_obj = ObservedQuadratic::new(permuted_rows(&target, &perm));
        let obj = ObservedQuadratic::new(target);
        for (scope, tol) in [(LsqrScope::PerRow, 1e-12), (LsqrScope::Joint, 1e-9)] {
            let cfg = InnerConfig::default().with_scope(scope);
            let a = optimize_fast(&p, 0, &obj, &cfg).unwrap().pair;
            let b = optimize_fast(&moved, 0, &moved_obj, &cfg).unwrap().pair;
            for i in 0..m {
                for c in 0..2 {
                    let (x, y) = (a.u()[(i, c)], b.u()[(perm[i], c)]);
                    prop_assert!((x - y).abs() <= tol * (1.0 + x.abs()));
                }
            }
        }
    }

    #[test]
    fn refits_are_deterministic(seed in any::<u64>(), t in 0usize..4) {
        let mut g = rng(seed);
        let obj = ObservedQuadratic::new(random_observations(&mut g, 9, 7, 0.5));
        let p = random_pair(&mut g, 9, 7, 3);
        for scope in [LsqrScope::PerRow, LsqrScope::Joint] {
            let cfg = InnerConfig::default().with_scope(scope);
            let serial = InnerConfig { parallel: false, ..cfg };
            let a = optimize_fast(&p, t, &obj, &cfg).unwrap();
            prop_assert_eq!(&a, &optimize_fast(&p, t, &obj, &cfg).unwrap());
            prop_assert_eq!(&a, &optimize_fast(&p, t, &obj, &serial).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(cases(12))]

    #[test]
    fn greedy_endpoint_on_exact_fits(seed in any::<u64>(), r_star in 1usize..3) {
        let mut g = rng(seed);
        let spec = separated_matrix(&mut g, 12);
        let obj = ObservedQuadratic::new(fully_observed(&spec.dense()));
        let opt = spec.tail_energy(r_star);
        let eps = 1e-6;
        let gap0 = obj.value(&FactorPair::empty(12, 12)) - opt;
        let r = ((2.0 * r_star as f64 * (gap0 / eps).ln()).ceil() as usize).min(12);
        let out = greedy(&obj, &SolverConfig::new(r).with_seed(seed)).unwrap();
        prop_assert!(obj.value(&out.pair) <= opt + eps);
    }

    #[test]
    fn rank_bookkeeping(seed in any::<u64>(), r in 1usize..6) {
        let mut g = rng(seed);
        let obj = ObservedQuadratic::new(random_observations(&mut g, 10, 8, 0.5));
        let out = fast_greedy(&obj, &SolverConfig::new(r).with_seed(seed)).unwrap();
        for (t, tr) in out.traces.iter().enumerate() {
            prop_assert_eq!(tr.rank, t + 1);
            prop_assert!(tr.objective.is_finite());
        }
        let local = local_search(&obj, &SolverConfig::local(r, 8).with_seed(seed)).unwrap();
        prop_assert!(local.traces.iter().all(|tr| tr.rank <= r));
        prop_assert!(local.pair.rank() <= r);
    }

    #[test]
    fn fast_local_trace_decreases(seed in any::<u64>(), r in 1usize..6) {
        let mut g = rng(seed);
        let obj = ObservedQuadratic::new(random_observations(&mut g, 12, 10, 0.5));
        let cfg = SolverConfig::new(r).with_seed(seed);
        let out = fast_local_search(&obj, &cfg).unwrap();
        let swaps: Vec<f64> = out.traces.iter().filter(|t| t.truncated_column.is_some()).map(|t| t.objective).collect();
        let init = fast_greedy(&obj, &cfg).unwrap();
        let mut last = obj.value(&init.pair);
        // every accepted swap improves; only the final one may not
        for (k, &v) in swaps.iter().enumerate() {
            if k + 1 < swaps.len() {
                prop_assert!(v < last);
            }
            last = v;
        }
        prop_assert!(obj.value(&out.pair) <= obj.value(&init.pair));
    }

    #[test]
    fn soft_impute_objective_is_monotone(seed in any::<u64>(), frac in 0.05f64..0.5) {
        let mut g = rng(seed);
        let target = random_observations(&mut g, 12, 10, 0.5);
        let top = lowrank::linalg::spectral_norm_estimate(&target, 0).unwrap();
        let out = soft_impute(&target, &SoftImputeConfig::new(frac * top, 10)).unwrap();
        for w in out.trace.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective + 1e-9 * w[0].objective.max(1.0));
        }
    }

    #[test]
    fn observations_reject_bad_entries(m in 1usize..6, n in 1usize..6, i in 0usize..8, j in 0usize..8) {
        let res = SparseObservations::new(m, n, vec![(i, j, 1.0)]);
        prop_assert_eq!(res.is_ok(), i < m && j < n);
        if i < m && j < n {
            prop_assert!(SparseObservations::new(m, n, vec![(i, j, 1.0), (i, j, 2.0)]).is_err());
        }
    }
}

#[test]
fn huber_formula_examples() {
    assert_eq!(huber(0.5, 1.0), 0.125);
    assert_eq!(huber(2.0, 1.0), 1.5);
}
