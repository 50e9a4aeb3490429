//! The optimal-forgery solver checked against independent oracles: an
//! exhaustive simplex grid, random feasible strategies and an exact
//! sort-based water-filling construction.

use std::sync::Arc;

use proptest::prelude::*;
use proptest::strategy::Strategy;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use tagforge::{solve_optimal_forgery, verify_kkt, CategorySet, Profile};

fn cats(n: usize) -> Arc<CategorySet> {
    Arc::new(CategorySet::new((0..n).map(|i| format!("c{i}"))).unwrap())
}

fn kl(t: &[f64], q: &[f64]) -> f64 {
    t.iter()
        .zip(q)
        .map(|(&a, &b)| if a > 0.0 { a * (a / b).log2() } else { 0.0 })
        .sum()
}

fn objective(p: &[f64], q: &[f64], r: &[f64], rho: f64) -> f64 {
    let t: Vec<f64> = p.iter().zip(r).map(|(a, b)| (1.0 - rho) * a + rho * b).collect();
    kl(&t, q)
}

/// Uniform sample from the simplex via normalized exponentials.
fn random_simplex(rng: &mut Pcg64, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Sparse user-like profile: some categories zeroed.
fn random_user(rng: &mut Pcg64, n: usize) -> Vec<f64> {
    loop {
        let mut v = random_simplex(rng, n);
        for x in v.iter_mut() {
            if rng.random_bool(0.3) {
                *x = 0.0;
            }
        }
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return v.iter().map(|x| x / s).collect();
        }
    }
}

/// Exact water-filling by sorting the ratios (1-rho) p_i / pbar_i and
/// growing the active set until the level is consistent.
fn sorted_water_filling(p: &[f64], q: &[f64], rho: f64) -> Vec<f64> {
    let floor: Vec<f64> = p.iter().map(|x| (1.0 - rho) * x).collect();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| (floor[a] / q[a]).total_cmp(&(floor[b] / q[b])));
    let (mut pop_a, mut floor_a) = (0.0, 0.0);
    for (k, &i) in order.iter().enumerate() {
        pop_a += q[i];
        floor_a += floor[i];
        let level = (rho + floor_a) / pop_a;
        let next_ratio = order.get(k + 1).map_or(f64::INFINITY, |&j| floor[j] / q[j]);
        if level <= next_ratio {
            return floor.iter().zip(q).map(|(f, qi)| f.max(level * qi)).collect();
        }
    }
    unreachable!("the full active set is always consistent")
}

#[test]
fn grid_oracle_three_categories() {
    let c = cats(3);
    let p = [0.7, 0.2, 0.1];
    let q = [1.0 / 3.0; 3];
    let rho = 0.3;
    let steps = 1000;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let r = [
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ];
            best = best.min(objective(&p, &q, &r, rho));
        }
    }
    // value of the grid search, computed independently before the build
    assert!((best - 0.07525111554462369).abs() < 1e-9, "grid minimum {best}");

    let sol = solve_optimal_forgery(
        &Profile::new(c.clone(), p.to_vec()).unwrap(),
        &Profile::new(c, q.to_vec()).unwrap(),
        rho,
    )
    .unwrap();
    assert!((sol.objective - best).abs() < 1e-6);
    assert!(sol.objective <= best + 1e-12);
}

#[test]
fn matches_sorted_water_filling() {
    let mut rng = Pcg64::seed_from_u64(11);
    for _ in 0..500 {
        let n = rng.random_range(2..=12);
        let c = cats(n);
        let p = random_user(&mut rng, n);
        let q = random_simplex(&mut rng, n);
        let rho = rng.random::<f64>();
        let expected = sorted_water_filling(&p, &q, rho);
        let sol = solve_optimal_forgery(
            &Profile::new(c.clone(), p.clone()).unwrap(),
            &Profile::new(c, q.clone()).unwrap(),
            rho,
        )
        .unwrap();
        for (a, b) in sol.apparent.components().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9, "apparent {a} vs oracle {b} (rho {rho})");
        }
        assert!((sol.objective - kl(&expected, &q)).abs() < 1e-9);
    }
}

#[test]
fn beats_random_strategies_and_satisfies_kkt() {
    let mut rng = Pcg64::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let c = cats(n);
        let p = random_user(&mut rng, n);
        let q = random_simplex(&mut rng, n);
        let rho = rng.random::<f64>();
        let pp = Profile::new(c.clone(), p.clone()).unwrap();
        let qq = Profile::new(c, q.clone()).unwrap();
        let sol = solve_optimal_forgery(&pp, &qq, rho).unwrap();
        assert!(verify_kkt(&sol, &pp, &qq, rho));
        for _ in 0..1000 {
            let r = random_simplex(&mut rng, n);
            assert!(sol.objective <= objective(&p, &q, &r, rho) + 1e-9);
        }
    }
}

#[test]
fn objective_non_increasing_in_rate() {
    let mut rng = Pcg64::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(2..=11);
        let c = cats(n);
        let pp = Profile::new(c.clone(), random_user(&mut rng, n)).unwrap();
        let qq = Profile::new(c, random_simplex(&mut rng, n)).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..=100 {
            let obj = solve_optimal_forgery(&pp, &qq, k as f64 / 100.0).unwrap().objective;
            assert!(obj <= last + 1e-12, "objective rose from {last} to {obj}");
            last = obj;
        }
        assert!(last < 1e-12);
    }
}

fn pmf_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("non-zero", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (2usize..=8).prop_flat_map(|n| {
        (
            pmf_strategy(n),
            pmf_strategy(n).prop_map(|q| q.iter().map(|x| x + 1e-3).collect::<Vec<_>>()),
            0.0f64..=1.0,
        )
    })
}

proptest! {
    #[test]
    fn solution_is_feasible((p, q, rho) in instance()) {
        let n = p.len();
        let c = cats(n);
        let s: f64 = q.iter().sum();
        let q: Vec<f64> = q.iter().map(|x| x / s).collect();
        let pp = Profile::new(c.clone(), p.clone()).unwrap();
        let qq = Profile::new(c, q.clone()).unwrap();
        let sol = solve_optimal_forgery(&pp, &qq, rho).unwrap();

        prop_assert!(sol.strategy.is_on_simplex());
        prop_assert!(sol.apparent.is_on_simplex());
        let t = sol.apparent.components();
        for i in 0..n {
            prop_assert!(t[i] >= (1.0 - rho) * p[i] - 1e-12);
            let mixed = (1.0 - rho) * p[i] + rho * sol.strategy.components()[i];
            prop_assert!((t[i] - mixed).abs() <= 1e-9);
        }
        prop_assert!((sol.objective - kl(t, &q)).abs() <= 1e-9);
        prop_assert!(verify_kkt(&sol, &pp, &qq, rho));
    }
}
