//! Slow, literal reference implementations for checking the rankings.
//!
//! Nothing here is shared with the production code: regret is found by
//! enumerating every switching policy, alpha-rank by building the full
//! transition matrix and squaring it, and Bradley-Terry by scanning a grid.

pub type Matrix = Vec<Vec<f64>>;

/// A meta-game small enough to enumerate.
#[derive(Clone, Debug, PartialEq)]
pub struct TinyGame {
    pub u_s: Matrix,
    pub u_r: Matrix,
    /// Utilities of one role's pool, indexed [agent][opponent][episode].
    pub per_episode: Option<Vec<Vec<Vec<f64>>>>,
}

fn policies(agents: usize, episodes: usize) -> Vec<Vec<usize>> {
    let mut all = vec![vec![]];
    for _ in 0..episodes {
        all = all
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..agents).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    all
}

/// Regret of `agent` against the best per-episode switching policy, worst
/// case over opponents. Every policy is enumerated.
pub fn brute_tor(tiny: &TinyGame, agent: usize) -> f64 {
    let u = tiny.per_episode.as_ref().expect("per-episode utilities");
    let agents = u.len();
    let opponents = u[0].len();
    let episodes = u[0][0].len();
    let all = policies(agents, episodes);
    let mut worst = f64::NEG_INFINITY;
    for o in 0..opponents {
        let total = |p: &[usize]| p.iter().enumerate().map(|(e, &a)| u[a][o][e]).sum::<f64>();
        let mut best = &all[0];
        for p in &all {
            if total(p) > total(best) {
                best = p;
            }
        }
        let gap = best
            .iter()
            .enumerate()
            .map(|(e, &a)| u[a][o][e] - u[agent][o][e])
            .sum::<f64>()
            / episodes as f64;
        worst = worst.max(gap);
    }
    worst.max(0.0)
}

fn fixation(delta: f64, alpha: f64, m: usize) -> f64 {
    let x = alpha * delta;
    if x == 0.0 {
        return 1.0 / m as f64;
    }
    (1.0 - (-x).exp()) / (1.0 - (-(m as f64) * x).exp())
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

fn restore_diagonal(p: &mut Matrix) {
    for i in 0..p.len() {
        let off: f64 = (0..p.len()).filter(|&j| j != i).map(|j| p[i][j]).sum();
        p[i][i] = 1.0 - off;
    }
}

/// Profile transition matrix of the two-population chain, rows indexed by
/// profile `s * nr + r`.
pub fn transition_matrix(tiny: &TinyGame, alpha: f64, m: usize) -> Matrix {
    let ns = tiny.u_s.len();
    let nr = tiny.u_s[0].len();
    let n = ns * nr;
    let eta = if ns + nr > 2 { 1.0 / (ns + nr - 2) as f64 } else { 0.0 };
    let mut p = vec![vec![0.0; n]; n];
    for s in 0..ns {
        for r in 0..nr {
            let i = s * nr + r;
            for s2 in 0..ns {
                if s2 != s {
                    p[i][s2 * nr + r] = eta * fixation(tiny.u_s[s2][r] - tiny.u_s[s][r], alpha, m);
                }
            }
            for r2 in 0..nr {
                if r2 != r {
                    p[i][s * nr + r2] = eta * fixation(tiny.u_r[s][r2] - tiny.u_r[s][r], alpha, m);
                }
            }
        }
    }
    restore_diagonal(&mut p);
    p
}

/// Stationary profile masses by squaring the transition matrix until all
/// rows agree. Returns (sender masses, receiver masses).
pub fn brute_alpha_rank(tiny: &TinyGame, alpha: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let ns = tiny.u_s.len();
    let nr = tiny.u_s[0].len();
    let mut p = transition_matrix(tiny, alpha, m);
    for _ in 0..4000 {
        let spread = (0..p.len())
            .map(|j| {
                let col = p.iter().map(|row| row[j]);
                col.clone().fold(f64::NEG_INFINITY, f64::max) - col.fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        if spread < 1e-15 {
            break;
        }
        p = matmul(&p, &p);
        restore_diagonal(&mut p);
    }
    let n = p.len();
    let pi: Vec<f64> = (0..n).map(|j| p.iter().map(|row| row[j]).sum::<f64>() / n as f64).collect();
    let z: f64 = pi.iter().sum();
    let senders = (0..ns).map(|s| (0..nr).map(|r| pi[s * nr + r]).sum::<f64>() / z).collect();
    let receivers = (0..nr).map(|r| (0..ns).map(|s| pi[s * nr + r]).sum::<f64>() / z).collect();
    (senders, receivers)
}

/// Regularized Bradley-Terry log-likelihood at log-strengths `l`.
/// `comparisons` are (winner, loser, weight); half a pseudo-win is added in
/// each direction of every pair.
pub fn bt_log_likelihood(l: &[f64], comparisons: &[(usize, usize, f64)]) -> f64 {
    let term = |w: usize, los: usize| {
        let (a, b) = (l[w], l[los]);
        a - (a.exp() + b.exp()).ln()
    };
    let mut ll: f64 = comparisons.iter().map(|&(w, los, k)| k * term(w, los)).sum();
    for i in 0..l.len() {
        for j in 0..l.len() {
            if i != j {
                ll += 0.5 * term(i, j);
            }
        }
    }
    ll
}

/// Grid maximizer of the regularized likelihood for up to three agents,
/// returned as log-strengths centered at zero.
pub fn brute_bt(n: usize, comparisons: &[(usize, usize, f64)], resolution: f64, half_width: f64) -> Vec<f64> {
    assert!((1..=3).contains(&n), "grid oracle handles up to three agents");
    let steps = (2.0 * half_width / resolution).round() as i64;
    let axis: Vec<f64> = (0..=steps).map(|k| -half_width + k as f64 * resolution).collect();
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let mut consider = |l: Vec<f64>| {
        let ll = bt_log_likelihood(&l, comparisons);
        if ll > best.0 {
            best = (ll, l);
        }
    };
    match n {
        1 => consider(vec![0.0]),
        2 => axis.iter().for_each(|&d| consider(vec![0.0, d])),
        _ => {
            for &d1 in &axis {
                for &d2 in &axis {
                    consider(vec![0.0, d1, d2]);
                }
            }
        }
    }
    let l = best.1;
    let mean = l.iter().sum::<f64>() / n as f64;
    l.into_iter().map(|x| x - mean).collect()
}
