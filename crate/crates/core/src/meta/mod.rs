//! Meta-game analysis over a payoff tensor: per-episode oracle and regret,
//! Bradley-Terry ratings, alpha-rank, maximin and pure equilibria.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::Role;
use crate::error::{Error, Result};
use crate::tournament::{Matrix, PayoffTensor};

pub mod alpha;
pub mod bt;

pub use alpha::{alpha_rank, fixation_log_rate, AlphaRank, DEFAULT_ALPHA, DEFAULT_POP};
pub use bt::{build_comparisons, fit_bradley_terry, BtRatings, Comparison};

/// Indices of `names` in lexicographic order, the tie-break order used by
/// every argmax here.
fn lexicographic(names: &[String]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..names.len()).collect();
    idx.sort_by(|&a, &b| names[a].cmp(&names[b]));
    idx
}

/// Per-(opponent, episode) best agent of one role's pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OraclePolicy {
    pub role: Role,
    /// opponent -> episode -> (agent, utility)
    pub cells: BTreeMap<String, BTreeMap<String, (String, f64)>>,
}

impl OraclePolicy {
    pub fn pick(&self, opponent: &str, episode_id: &str) -> Option<(&str, f64)> {
        self.cells
            .get(opponent)?
            .get(episode_id)
            .map(|(a, u)| (a.as_str(), *u))
    }
}

pub fn oracle_policy(tensor: &PayoffTensor, role: Role) -> OraclePolicy {
    let (agents, opponents) = tensor.pools(role);
    let order = lexicographic(agents);
    let mut cells = BTreeMap::new();
    for (o, opp) in opponents.iter().enumerate() {
        let mut row = BTreeMap::new();
        for (e, ep) in tensor.episodes.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for &a in &order {
                if let Some(u) = tensor.role_utility(role, a, o, e) {
                    if best.map_or(true, |(_, b)| u > b) {
                        best = Some((a, u));
                    }
                }
            }
            if let Some((a, u)) = best {
                row.insert(ep.clone(), (agents[a].clone(), u));
            }
        }
        cells.insert(opp.clone(), row);
    }
    OraclePolicy { role, cells }
}

/// Worst-case over opponents of the mean per-episode gap to the oracle.
pub fn tor(tensor: &PayoffTensor, agent: &str, role: Role) -> Result<f64> {
    let (agents, opponents) = tensor.pools(role);
    let a = agents
        .iter()
        .position(|n| n == agent)
        .ok_or_else(|| Error::validation("agent", format!("`{agent}` is not in the {role} pool")))?;
    let oracle = oracle_policy(tensor, role);
    let mut worst = 0.0f64;
    for (o, opp) in opponents.iter().enumerate() {
        let gaps: Vec<f64> = tensor
            .episodes
            .iter()
            .enumerate()
            .filter_map(|(e, ep)| {
                let own = tensor.role_utility(role, a, o, e)?;
                let (_, best) = oracle.pick(opp, ep)?;
                Some(best - own)
            })
            .collect();
        if !gaps.is_empty() {
            worst = worst.max(gaps.iter().sum::<f64>() / gaps.len() as f64);
        }
    }
    Ok(worst)
}

/// Mean utility of each agent of `role` over all its successful episodes.
pub fn mean_utilities(tensor: &PayoffTensor, role: Role) -> Vec<f64> {
    let (agents, opponents) = tensor.pools(role);
    (0..agents.len())
        .map(|a| {
            let vals: Vec<f64> = (0..opponents.len())
                .flat_map(|o| (0..tensor.episodes.len()).filter_map(move |e| tensor.role_utility(role, a, o, e)))
                .collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect()
}

/// Which axis of a [sender][receiver] matrix holds the deciding agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Columns,
}

/// The strategy whose worst case is best. Ties go to the lexicographically
/// first name.
pub fn maximin<'a>(matrix: &Matrix, names: &'a [String], axis: Axis) -> Option<&'a str> {
    let value = |own: usize, opp: usize| match axis {
        Axis::Rows => matrix[own][opp],
        Axis::Columns => matrix[opp][own],
    };
    let n_opp = match axis {
        Axis::Rows => matrix.first().map_or(0, Vec::len),
        Axis::Columns => matrix.len(),
    };
    let mut best: Option<(usize, f64)> = None;
    for own in lexicographic(names) {
        let worst = (0..n_opp).map(|o| value(own, o)).fold(f64::INFINITY, f64::min);
        if best.map_or(true, |(_, b)| worst > b) {
            best = Some((own, worst));
        }
    }
    best.map(|(i, _)| names[i].as_str())
}

/// Profiles (sender, receiver) where both play a best response.
pub fn pure_nash(u_s: &Matrix, u_r: &Matrix) -> Vec<(usize, usize)> {
    let ns = u_s.len();
    let nr = u_s.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for s in 0..ns {
        for r in 0..nr {
            let s_best = (0..ns).all(|s2| u_s[s2][r] <= u_s[s][r]);
            let r_best = (0..nr).all(|r2| u_r[s][r2] <= u_r[s][r]);
            if s_best && r_best {
                out.push((s, r));
            }
        }
    }
    out
}
