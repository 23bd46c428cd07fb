//! Episode-aligned round-robin tournaments and the payoff tensor they fill.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, Role};
use crate::engine::{EpisodeOptions, Environment};
use crate::error::{Error, Result};
use crate::seed::episode_seed;
use crate::trace::{EpisodeTrace, TraceSink};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub env_id: String,
    pub story_id: String,
}

impl Variant {
    pub fn new(env_id: &str, story_id: &str) -> Self {
        Self {
            env_id: env_id.into(),
            story_id: story_id.into(),
        }
    }
}

impl Environment {
    pub fn variant(&self) -> Variant {
        Variant::new(&self.config.env_id, &self.story.story_id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub episode_id: String,
    pub env_id: String,
    pub story_id: String,
    /// Position of this episode among those of its variant.
    pub episode_index: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub master_seed: u64,
    pub episodes_per_pair: usize,
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn per_variant_counts(&self) -> BTreeMap<Variant, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(Variant::new(&e.env_id, &e.story_id)).or_default() += 1;
        }
        out
    }
}

/// Round-robin over variants. Each entry's seed hashes the master seed with
/// the variant and the entry's index within that variant.
pub fn build_schedule(variants: &[Variant], episodes_per_pair: usize, master_seed: u64) -> Result<Schedule> {
    if variants.is_empty() || episodes_per_pair % variants.len() != 0 {
        return Err(Error::Divisibility {
            episodes: episodes_per_pair,
            variants: variants.len(),
        });
    }
    let entries = (0..episodes_per_pair)
        .map(|i| {
            let v = &variants[i % variants.len()];
            let k = i / variants.len();
            ScheduleEntry {
                episode_id: format!("ep{i:06}"),
                env_id: v.env_id.clone(),
                story_id: v.story_id.clone(),
                episode_index: k,
                seed: episode_seed(master_seed, &v.env_id, &v.story_id, k),
            }
        })
        .collect();
    Ok(Schedule {
        master_seed,
        episodes_per_pair,
        entries,
    })
}

/// Per-(sender, receiver, episode) utilities; `None` marks a failed episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffTensor {
    pub senders: Vec<String>,
    pub receivers: Vec<String>,
    pub episodes: Vec<String>,
    u_s: Vec<Option<f64>>,
    u_r: Vec<Option<f64>>,
}

impl PayoffTensor {
    pub fn new(senders: Vec<String>, receivers: Vec<String>, episodes: Vec<String>) -> Self {
        let n = senders.len() * receivers.len() * episodes.len();
        Self {
            senders,
            receivers,
            episodes,
            u_s: vec![None; n],
            u_r: vec![None; n],
        }
    }

    fn idx(&self, s: usize, r: usize, e: usize) -> usize {
        (s * self.receivers.len() + r) * self.episodes.len() + e
    }

    pub fn set(&mut self, s: usize, r: usize, e: usize, u_s: f64, u_r: f64) {
        let i = self.idx(s, r, e);
        self.u_s[i] = Some(u_s);
        self.u_r[i] = Some(u_r);
    }

    pub fn u_s(&self, s: usize, r: usize, e: usize) -> Option<f64> {
        self.u_s[self.idx(s, r, e)]
    }

    pub fn u_r(&self, s: usize, r: usize, e: usize) -> Option<f64> {
        self.u_r[self.idx(s, r, e)]
    }

    pub fn utility(&self, role: Role, s: usize, r: usize, e: usize) -> Option<f64> {
        match role {
            Role::Sender => self.u_s(s, r, e),
            Role::Receiver => self.u_r(s, r, e),
        }
    }

    pub fn failures(&self, s: usize, r: usize) -> usize {
        (0..self.episodes.len()).filter(|&e| self.u_s(s, r, e).is_none()).count()
    }

    pub fn total_failures(&self) -> usize {
        self.u_s.iter().filter(|v| v.is_none()).count()
    }

    /// Agents playing `role`, and their opponents.
    pub fn pools(&self, role: Role) -> (&[String], &[String]) {
        match role {
            Role::Sender => (&self.senders, &self.receivers),
            Role::Receiver => (&self.receivers, &self.senders),
        }
    }

    /// Utility of `role`'s agent `a` against opponent `o` on episode `e`.
    pub fn role_utility(&self, role: Role, a: usize, o: usize, e: usize) -> Option<f64> {
        match role {
            Role::Sender => self.u_s(a, o, e),
            Role::Receiver => self.u_r(o, a, e),
        }
    }

    /// Builds a tensor from stored traces. Agent and episode axes are sorted;
    /// cells with no trace are treated as failed.
    pub fn from_traces(traces: &[EpisodeTrace]) -> Self {
        let senders: BTreeSet<&str> = traces.iter().map(|t| t.model_sender.as_str()).collect();
        let receivers: BTreeSet<&str> = traces.iter().map(|t| t.model_receiver.as_str()).collect();
        let episodes: BTreeSet<&str> = traces.iter().map(|t| t.episode_id.as_str()).collect();
        let pos = |set: &BTreeSet<&str>, k: &str| set.iter().position(|x| *x == k).expect("collected above");
        let mut tensor = PayoffTensor::new(
            senders.iter().map(|s| s.to_string()).collect(),
            receivers.iter().map(|s| s.to_string()).collect(),
            episodes.iter().map(|s| s.to_string()).collect(),
        );
        for t in traces {
            let (s, r, e) = (
                pos(&senders, &t.model_sender),
                pos(&receivers, &t.model_receiver),
                pos(&episodes, &t.episode_id),
            );
            tensor.set(s, r, e, t.payoffs.score_s, t.payoffs.score_r);
        }
        tensor
    }
}

pub type Matrix = Vec<Vec<f64>>;

/// Episode-mean payoff matrices indexed [sender][receiver], excluding
/// failed episodes.
pub fn payoff_matrices(tensor: &PayoffTensor) -> Result<(Matrix, Matrix)> {
    let (ns, nr) = (tensor.senders.len(), tensor.receivers.len());
    let mut ms = vec![vec![0.0; nr]; ns];
    let mut mr = vec![vec![0.0; nr]; ns];
    for s in 0..ns {
        for r in 0..nr {
            let cells: Vec<(f64, f64)> = (0..tensor.episodes.len())
                .filter_map(|e| Some((tensor.u_s(s, r, e)?, tensor.u_r(s, r, e)?)))
                .collect();
            if cells.is_empty() {
                return Err(Error::EmptyCell {
                    sender: tensor.senders[s].clone(),
                    receiver: tensor.receivers[r].clone(),
                });
            }
            let n = cells.len() as f64;
            ms[s][r] = cells.iter().map(|c| c.0).sum::<f64>() / n;
            mr[s][r] = cells.iter().map(|c| c.1).sum::<f64>() / n;
        }
    }
    Ok((ms, mr))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub sender: String,
    pub receiver: String,
    pub episode_id: String,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct TournamentResult {
    pub tensor: PayoffTensor,
    pub failures: Vec<EpisodeFailure>,
}

/// Runs `job` over `0..n` on up to `jobs` threads, claiming indices in order.
pub(crate) fn parallel_for<F>(n: usize, jobs: usize, job: F) -> Result<()>
where
    F: Fn(usize) -> Result<()> + Sync,
{
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, n.max(1)) {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                if let Err(e) = job(i) {
                    abort.store(true, Ordering::SeqCst);
                    first_error.lock().expect("error slot").get_or_insert(e);
                    break;
                }
            });
        }
    });
    match first_error.into_inner().expect("error slot") {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn lookup<'a>(envs: &'a [Environment], env_id: &str, story_id: &str) -> Result<&'a Environment> {
    envs.iter()
        .find(|e| e.config.env_id == env_id && e.story.story_id == story_id)
        .ok_or_else(|| Error::validation("schedule", format!("no environment for ({env_id}, {story_id})")))
}

/// Plays every schedule entry for every sender x receiver pairing.
/// Pairings run in parallel; the episodes of one pairing run in schedule
/// order, so each pairing's trace file is deterministic. Episode errors are
/// recorded as failures; sink errors abort the run.
pub fn run_tournament(
    envs: &[Environment],
    schedule: &Schedule,
    senders: &[Agent],
    receivers: &[Agent],
    sink: &dyn TraceSink,
    jobs: usize,
) -> Result<TournamentResult> {
    for a in senders {
        if a.role() != Role::Sender {
            return Err(Error::validation("senders", format!("`{}` is not a sender", a.name())));
        }
    }
    for a in receivers {
        if a.role() != Role::Receiver {
            return Err(Error::validation("receivers", format!("`{}` is not a receiver", a.name())));
        }
    }
    let entry_envs: Vec<&Environment> = schedule
        .entries
        .iter()
        .map(|e| lookup(envs, &e.env_id, &e.story_id))
        .collect::<Result<_>>()?;

    let pairings: Vec<(usize, usize)> = (0..senders.len())
        .flat_map(|s| (0..receivers.len()).map(move |r| (s, r)))
        .collect();
    type Cell = Result<(f64, f64), String>;
    let results: Mutex<BTreeMap<(usize, usize), Vec<Cell>>> = Mutex::new(BTreeMap::new());

    parallel_for(pairings.len(), jobs, |p| {
        let (s, r) = pairings[p];
        let mut cells = Vec::with_capacity(schedule.entries.len());
        for (entry, env) in schedule.entries.iter().zip(&entry_envs) {
            let opts = EpisodeOptions {
                episode_id: Some(entry.episode_id.clone()),
                ..Default::default()
            };
            match env.run(&senders[s], &receivers[r], entry.seed, &opts) {
                Ok(trace) => {
                    sink.write(&trace)?;
                    cells.push(Ok((trace.payoffs.score_s, trace.payoffs.score_r)));
                }
                Err(e) => {
                    log::warn!(
                        "episode {} ({} vs {}) failed: {e}",
                        entry.episode_id,
                        senders[s].name(),
                        receivers[r].name()
                    );
                    cells.push(Err(e.to_string()));
                }
            }
        }
        results.lock().expect("results lock").insert((s, r), cells);
        Ok(())
    })?;

    let mut tensor = PayoffTensor::new(
        senders.iter().map(|a| a.name().to_string()).collect(),
        receivers.iter().map(|a| a.name().to_string()).collect(),
        schedule.entries.iter().map(|e| e.episode_id.clone()).collect(),
    );
    let mut failures = Vec::new();
    for ((s, r), cells) in results.into_inner().expect("results lock") {
        for (e, cell) in cells.into_iter().enumerate() {
            match cell {
                Ok((us, ur)) => tensor.set(s, r, e, us, ur),
                Err(error) => failures.push(EpisodeFailure {
                    sender: senders[s].name().to_string(),
                    receiver: receivers[r].name().to_string(),
                    episode_id: schedule.entries[e].episode_id.clone(),
                    error,
                }),
            }
        }
    }
    Ok(TournamentResult { tensor, failures })
}
