//! Optimal forgery strategy: the PMF `r` minimizing `D((1 - rho) p + rho r || pbar)`.
//!
//! Substituting `t = (1 - rho) p + rho r`, the program becomes minimizing
//! `D(t || pbar)` over PMFs `t` with `t >= (1 - rho) p` componentwise. Its KKT
//! conditions give the water-filling form `t_i = max((1 - rho) p_i, lambda pbar_i)`,
//! with the level `lambda` fixed by `sum_i t_i = 1`. The level is bracketed by
//! bisection and then recomputed exactly on the resulting active set.

use std::f64::consts::LN_2;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::privacy::kl_bits;
use crate::profiles::Profile;

pub const BISECTION_TOLERANCE: f64 = 1e-12;
pub const MAX_BISECTION_STEPS: usize = 200;
pub const KKT_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct OptimalForgery {
    /// The optimal forgery distribution `r*`.
    pub strategy: Profile,
    /// `t* = (1 - rho) p + rho r*`.
    pub apparent: Profile,
    /// `D(t* || pbar)` in bits.
    pub objective: f64,
    /// Water-filling level.
    pub lambda: f64,
    pub iterations: usize,
}

pub fn solve_optimal_forgery(p: &Profile, population: &Profile, rho: f64) -> Result<OptimalForgery> {
    p.ensure_compatible(population)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Config(format!("forgery rate {} outside [0, 1]", rho)));
    }
    let keep = 1.0 - rho;
    let floor: Vec<f64> = p.components().iter().map(|x| keep * x).collect();
    let pbar = population.components();

    if let Some(i) = (0..pbar.len()).find(|&i| pbar[i] <= 0.0 && floor[i] > 0.0) {
        return Err(Error::Infeasible(format!(
            "population has no mass on category {:?} but the user keeps {} of it",
            population.categories().label(i),
            floor[i]
        )));
    }

    if rho == 0.0 {
        return Ok(OptimalForgery {
            strategy: population.clone(),
            apparent: p.clone(),
            objective: kl_bits(p.components(), pbar),
            lambda: 0.0,
            iterations: 0,
        });
    }

    let fill = |lambda: f64| -> f64 { floor.iter().zip(pbar).map(|(f, q)| f.max(lambda * q)).sum() };

    // fill(0) = 1 - rho <= 1 and fill(lambda) >= lambda, so the root lies in [0, 1].
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    debug_assert!(fill(lo) <= 1.0 + BISECTION_TOLERANCE && fill(hi) >= 1.0 - BISECTION_TOLERANCE);
    let mut iterations = 0;
    while iterations < MAX_BISECTION_STEPS {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let s = fill(mid);
        if (s - 1.0).abs() <= BISECTION_TOLERANCE {
            lo = mid;
            hi = mid;
            break;
        }
        if s < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let bracketed = 0.5 * (lo + hi);

    // Exact level on the active set: lambda * P_A + (1 - rho)(1 - S_A) = 1.
    let (mut pop_active, mut floor_inactive) = (0.0, 0.0);
    for (f, q) in floor.iter().zip(pbar) {
        if bracketed * q >= *f && *q > 0.0 {
            pop_active += q;
        } else {
            floor_inactive += f;
        }
    }
    let lambda = if pop_active > 0.0 {
        (1.0 - floor_inactive) / pop_active
    } else {
        bracketed
    };

    let raw: Vec<f64> = floor
        .iter()
        .zip(pbar)
        .map(|(f, q)| (lambda * q - f).max(0.0) / rho)
        .collect();
    let categories = Arc::clone(p.categories());
    let strategy = Profile::from_weights(Arc::clone(&categories), &raw)?;
    let apparent = p.mix(&strategy, rho)?;
    let objective = kl_bits(apparent.components(), pbar);

    Ok(OptimalForgery {
        strategy,
        apparent,
        objective,
        lambda,
        iterations,
    })
}

/// Checks first-order optimality of `result.strategy`.
///
/// The gradient of the objective in `r_i` is `rho (log2(t_i / pbar_i) + 1/ln 2)`.
/// It must be equal (to [`KKT_TOLERANCE`]) across the support of `r` and no
/// smaller than that common value off the support.
pub fn verify_kkt(result: &OptimalForgery, p: &Profile, population: &Profile, rho: f64) -> bool {
    let r = &result.strategy;
    if !r.is_on_simplex() || !p.same_categories(population) || !p.same_categories(r) {
        return false;
    }
    if rho == 0.0 {
        return true;
    }
    let keep = 1.0 - rho;
    let grad: Vec<f64> = p
        .components()
        .iter()
        .zip(r.components())
        .zip(population.components())
        .map(|((pi, ri), qi)| {
            let t = keep * pi + rho * ri;
            if *qi <= 0.0 {
                // any r_i > 0 here puts mass where the population has none
                f64::INFINITY
            } else if t <= 0.0 {
                f64::NEG_INFINITY
            } else {
                rho * ((t / qi).log2() + 1.0 / LN_2)
            }
        })
        .collect();

    let support: Vec<usize> = (0..grad.len()).filter(|&i| r.components()[i] > 0.0).collect();
    let anchor = match support
        .iter()
        .copied()
        .max_by(|&a, &b| r.components()[a].total_cmp(&r.components()[b]))
    {
        Some(i) => grad[i],
        None => return false,
    };
    if !anchor.is_finite() {
        return false;
    }
    grad.iter().enumerate().all(|(i, g)| {
        if r.components()[i] > 0.0 {
            (g - anchor).abs() <= KKT_TOLERANCE
        } else {
            *g >= anchor - KKT_TOLERANCE
        }
    })
}
