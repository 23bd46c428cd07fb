//! Two-population alpha-rank over pure (sender, receiver) profiles.
//!
//! The stationary distribution is solved by state reduction carried out on
//! log-probabilities. Every term in the reduction is positive, so there is
//! no cancellation, and strongly selective chains (large alpha) whose
//! transition probabilities span hundreds of orders of magnitude stay exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tournament::Matrix;

pub const DEFAULT_ALPHA: f64 = 50.0;
pub const DEFAULT_POP: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRank {
    pub alpha: f64,
    pub pop: usize,
    pub sender_masses: Vec<f64>,
    pub receiver_masses: Vec<f64>,
    /// Stationary mass of each profile, indexed [sender][receiver].
    pub profile_masses: Matrix,
}

/// ln(e^y - 1) for y > 0.
fn ln_expm1(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// ln(1 - e^-y) for y > 0.
fn ln_one_minus_exp_neg(y: f64) -> f64 {
    if y > std::f64::consts::LN_2 {
        (-(-y).exp()).ln_1p()
    } else {
        (-(-y).exp_m1()).ln()
    }
}

/// Log of the fixation probability of a single mutant with payoff advantage
/// `delta` in a population of `m`.
pub fn fixation_log_rate(delta: f64, alpha: f64, m: usize) -> f64 {
    let x = alpha * delta;
    let mf = m as f64;
    if x == 0.0 {
        return -mf.ln();
    }
    if x > 0.0 {
        ln_one_minus_exp_neg(x) - ln_one_minus_exp_neg(mf * x)
    } else {
        ln_expm1(-x) - ln_expm1(-mf * x)
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn check(u: &Matrix, which: &str, ns: usize, nr: usize) -> Result<()> {
    if u.len() != ns || u.iter().any(|row| row.len() != nr) {
        return Err(Error::validation(which, "payoff matrices must share one shape"));
    }
    if u.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::validation(which, "payoffs must be finite"));
    }
    Ok(())
}

pub fn alpha_rank(u_s: &Matrix, u_r: &Matrix, alpha: f64, pop: usize) -> Result<AlphaRank> {
    let ns = u_s.len();
    let nr = u_s.first().map_or(0, Vec::len);
    if ns == 0 || nr == 0 {
        return Err(Error::validation("payoffs", "empty payoff matrix"));
    }
    check(u_s, "u_s", ns, nr)?;
    check(u_r, "u_r", ns, nr)?;
    if !(alpha > 0.0) {
        return Err(Error::validation("alpha", "must be positive"));
    }
    if pop < 2 {
        return Err(Error::validation("pop", "population size must be at least 2"));
    }

    let n = ns * nr;
    let state = |s: usize, r: usize| s * nr + r;
    let deviations = (ns - 1 + nr - 1) as f64;
    let mut lp = vec![vec![f64::NEG_INFINITY; n]; n];
    if deviations > 0.0 {
        let ln_eta = -deviations.ln();
        for s in 0..ns {
            for r in 0..nr {
                let from = state(s, r);
                for s2 in (0..ns).filter(|&x| x != s) {
                    lp[from][state(s2, r)] = ln_eta + fixation_log_rate(u_s[s2][r] - u_s[s][r], alpha, pop);
                }
                for r2 in (0..nr).filter(|&x| x != r) {
                    lp[from][state(s, r2)] = ln_eta + fixation_log_rate(u_r[s][r2] - u_r[s][r], alpha, pop);
                }
            }
        }
    }

    // Reduce states n-1..1, folding each eliminated state's flow into the rest.
    let mut exit = vec![f64::NEG_INFINITY; n];
    for k in (1..n).rev() {
        let out = (0..k).fold(f64::NEG_INFINITY, |acc, j| log_add(acc, lp[k][j]));
        exit[k] = out;
        for i in 0..k {
            if lp[i][k] == f64::NEG_INFINITY {
                continue;
            }
            let via = lp[i][k] - out;
            for j in 0..k {
                if i != j {
                    lp[i][j] = log_add(lp[i][j], via + lp[k][j]);
                }
            }
        }
    }
    let mut log_pi = vec![f64::NEG_INFINITY; n];
    log_pi[0] = 0.0;
    for k in 1..n {
        let inflow = (0..k).fold(f64::NEG_INFINITY, |acc, i| log_add(acc, log_pi[i] + lp[i][k]));
        log_pi[k] = inflow - exit[k];
    }
    let ln_z = log_pi.iter().fold(f64::NEG_INFINITY, |acc, &x| log_add(acc, x));
    if !ln_z.is_finite() {
        return Err(Error::NonConvergence(n));
    }
    let pi: Vec<f64> = log_pi.iter().map(|x| (x - ln_z).exp()).collect();

    let profile_masses: Matrix = (0..ns).map(|s| (0..nr).map(|r| pi[state(s, r)]).collect()).collect();
    let sender_masses = profile_masses.iter().map(|row| row.iter().sum()).collect();
    let receiver_masses = (0..nr).map(|r| profile_masses.iter().map(|row| row[r]).sum()).collect();
    Ok(AlphaRank {
        alpha,
        pop,
        sender_masses,
        receiver_masses,
        profile_masses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear_rate(delta: f64, alpha: f64, m: usize) -> f64 {
        let x = alpha * delta;
        if x == 0.0 {
            1.0 / m as f64
        } else {
            (-x).exp_m1() / (-(m as f64) * x).exp_m1()
        }
    }

    #[test]
    fn log_rate_matches_direct_formula() {
        for delta in [-0.3, -0.01, -1e-9, 0.0, 1e-9, 0.02, 0.5] {
            for alpha in [0.1, 1.0, 50.0] {
                let direct = linear_rate(delta, alpha, 50);
                let logged = fixation_log_rate(delta, alpha, 50).exp();
                assert!((direct - logged).abs() <= 1e-12 * direct.max(1e-300), "{delta} {alpha}");
            }
        }
        // far below what the direct formula can represent
        assert!(fixation_log_rate(-2.0, 50.0, 50) < -4000.0);
        assert!(fixation_log_rate(-2.0, 50.0, 50).is_finite());
    }

    #[test]
    fn neutral_drift_is_uniform() {
        let u_s = vec![vec![0.3, -0.5, 0.9], vec![0.1, 0.2, 0.0]];
        let u_r = vec![vec![1.0, 0.0, 0.2], vec![-0.4, 0.7, 0.5]];
        let res = alpha_rank(&u_s, &u_r, 1e-8, 50).unwrap();
        for row in &res.profile_masses {
            for m in row {
                assert!((m - 1.0 / 6.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dominant_profile_takes_the_mass() {
        let u_s = vec![vec![1.0, 0.8], vec![0.2, 0.0]];
        let u_r = vec![vec![1.0, 0.2], vec![0.8, 0.0]];
        let res = alpha_rank(&u_s, &u_r, DEFAULT_ALPHA, DEFAULT_POP).unwrap();
        assert!(res.profile_masses[0][0] > 0.99);
        assert!(res.sender_masses[0] > 0.99 && res.receiver_masses[0] > 0.99);
    }

    #[test]
    fn degenerate_shapes() {
        let res = alpha_rank(&vec![vec![0.4]], &vec![vec![0.1]], 50.0, 50).unwrap();
        assert_eq!(res.profile_masses, vec![vec![1.0]]);
        assert!(alpha_rank(&vec![vec![0.4]], &vec![vec![0.1]], 0.0, 50).is_err());
        assert!(alpha_rank(&vec![vec![0.4]], &vec![vec![0.1]], 1.0, 1).is_err());
        assert!(alpha_rank(&vec![vec![0.4, 0.1]], &vec![vec![0.1]], 1.0, 5).is_err());
    }

    proptest! {
        #[test]
        fn masses_normalized_and_shift_invariant(
            vals in proptest::collection::vec(-1.0f64..1.0, 18),
            shift in -5.0f64..5.0,
            alpha in 0.01f64..60.0,
        ) {
            let u_s: Matrix = vals[..9].chunks(3).map(|c| c.to_vec()).collect();
            let u_r: Matrix = vals[9..].chunks(3).map(|c| c.to_vec()).collect();
            let a = alpha_rank(&u_s, &u_r, alpha, 50).unwrap();
            prop_assert!((a.sender_masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((a.receiver_masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Matrix = u_s.iter().map(|r| r.iter().map(|x| x + shift).collect()).collect();
            let b = alpha_rank(&shifted, &u_r, alpha, 50).unwrap();
            for (x, y) in a.sender_masses.iter().zip(&b.sender_masses) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
