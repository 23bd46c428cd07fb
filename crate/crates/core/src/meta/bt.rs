//! Bradley-Terry ratings from matched same-role comparisons.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::agents::Role;
use crate::error::{Error, Result};
use crate::tournament::PayoffTensor;

pub const PSEUDO_WINS: f64 = 0.5;
pub const MAX_ITERATIONS: usize = 10_000;
pub const TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub winner: String,
    pub loser: String,
    pub weight: f64,
}

/// One comparison per same-role pair and shared (opponent, episode); equal
/// utilities split into two half-weight comparisons.
pub fn build_comparisons(tensor: &PayoffTensor, role: Role) -> Vec<Comparison> {
    let (agents, opponents) = tensor.pools(role);
    let mut out = Vec::new();
    let push = |out: &mut Vec<Comparison>, w: usize, l: usize, weight: f64| {
        out.push(Comparison {
            winner: agents[w].clone(),
            loser: agents[l].clone(),
            weight,
        })
    };
    for a in 0..agents.len() {
        for b in a + 1..agents.len() {
            for o in 0..opponents.len() {
                for e in 0..tensor.episodes.len() {
                    let (Some(ua), Some(ub)) = (tensor.role_utility(role, a, o, e), tensor.role_utility(role, b, o, e))
                    else {
                        continue;
                    };
                    if ua > ub {
                        push(&mut out, a, b, 1.0);
                    } else if ub > ua {
                        push(&mut out, b, a, 1.0);
                    } else {
                        push(&mut out, a, b, 0.5);
                        push(&mut out, b, a, 0.5);
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtRatings {
    pub names: Vec<String>,
    /// Positive strengths with geometric mean 1.
    pub ratings: Vec<f64>,
    /// Natural-log strengths, centered at 0.
    pub log_ratings: Vec<f64>,
    pub iterations: usize,
}

impl BtRatings {
    pub fn rating(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.ratings[i])
    }
}

fn normalize(r: &mut [f64]) {
    let mean_log = r.iter().map(|x| x.ln()).sum::<f64>() / r.len() as f64;
    let g = mean_log.exp();
    for x in r.iter_mut() {
        *x /= g;
    }
}

/// Minorization-maximization fit with half a pseudo-win in each direction
/// of every pair. Agents are ordered by name.
pub fn fit_bradley_terry(comparisons: &[Comparison]) -> Result<BtRatings> {
    let names: Vec<String> = comparisons
        .iter()
        .flat_map(|c| [c.winner.clone(), c.loser.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = names.len();
    let pos = |s: &str| names.binary_search_by(|x| x.as_str().cmp(s)).expect("name collected");
    let mut wins = vec![vec![0.0; n]; n];
    for c in comparisons {
        if c.winner == c.loser || !(c.weight > 0.0) {
            return Err(Error::validation("comparisons", format!("bad comparison {c:?}")));
        }
        wins[pos(&c.winner)][pos(&c.loser)] += c.weight;
    }
    for (i, row) in wins.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            if i != j {
                *w += PSEUDO_WINS;
            }
        }
    }
    if n > 1 && !connected(&wins) {
        return Err(Error::NotConnected);
    }

    let total_wins: Vec<f64> = wins.iter().map(|row| row.iter().sum()).collect();
    let mut r = vec![1.0; n];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS && n > 1 {
        iterations += 1;
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (wins[i][j] + wins[j][i]) / (r[i] + r[j]))
                    .sum();
                total_wins[i] / denom
            })
            .collect();
        normalize(&mut next);
        let change = next
            .iter()
            .zip(&r)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        r = next;
        if change < TOLERANCE {
            break;
        }
    }
    if iterations == MAX_ITERATIONS {
        log::warn!("Bradley-Terry fit stopped at the iteration cap");
    }
    let log_ratings = r.iter().map(|x| x.ln()).collect();
    Ok(BtRatings {
        names,
        ratings: r,
        log_ratings,
        iterations,
    })
}

fn connected(wins: &[Vec<f64>]) -> bool {
    let n = wins.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && (wins[i][j] > 0.0 || wins[j][i] > 0.0) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
