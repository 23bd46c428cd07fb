//! Leaderboards, behavior profiles and meta-game tables from stored traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::agents::Role;
use crate::config::{GameConfig, PublicSpec};
use crate::error::{Error, Result};
use crate::meta::{
    alpha_rank, build_comparisons, fit_bradley_terry, maximin, mean_utilities, pure_nash, tor, AlphaRank, Axis,
    BtRatings,
};
use crate::metrics::{aggregate, judge_cogency, receiver_metrics, sender_metrics, CogencyJudge, ReceiverBehavior, SenderBehavior};
use crate::trace::EpisodeTrace;
use crate::tournament::{payoff_matrices, Matrix, PayoffTensor};

pub struct ReportInputs<'a> {
    pub traces: &'a [EpisodeTrace],
    /// Variants by env id; behavior tables skip traces whose variant is absent.
    pub configs: &'a BTreeMap<String, GameConfig>,
    /// Public descriptions by (env id, story id), used by the cogency judge.
    pub specs: &'a BTreeMap<(String, String), PublicSpec>,
    pub judge: Option<&'a dyn CogencyJudge>,
    pub alpha: f64,
    pub pop: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoleRow {
    pub agent: String,
    pub mean: f64,
    pub bt: f64,
    pub bt_log: f64,
    pub tor: f64,
    pub alpha_mass: f64,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub tensor: PayoffTensor,
    pub senders: Vec<RoleRow>,
    pub receivers: Vec<RoleRow>,
    pub u_s: Matrix,
    pub u_r: Matrix,
    pub alpha: AlphaRank,
    pub maximin_sender: Option<String>,
    pub maximin_receiver: Option<String>,
    pub nash: Vec<(String, String)>,
    pub sender_behavior: BTreeMap<(String, String), (usize, Vec<f64>)>,
    pub receiver_behavior: BTreeMap<(String, String), (usize, Vec<f64>)>,
}

fn role_rows(tensor: &PayoffTensor, role: Role, masses: &[f64]) -> Result<Vec<RoleRow>> {
    let (agents, _) = tensor.pools(role);
    let means = mean_utilities(tensor, role);
    let bt: BtRatings = fit_bradley_terry(&build_comparisons(tensor, role))?;
    agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let (rating, log_rating) = match bt.names.iter().position(|n| n == a) {
                Some(k) => (bt.ratings[k], bt.log_ratings[k]),
                None => (1.0, 0.0),
            };
            Ok(RoleRow {
                agent: a.clone(),
                mean: means[i],
                bt: rating,
                bt_log: log_rating,
                tor: tor(tensor, a, role)?,
                alpha_mass: masses[i],
            })
        })
        .collect()
}

pub fn build_report(inputs: &ReportInputs<'_>) -> Result<Report> {
    if inputs.traces.is_empty() {
        return Err(Error::EmptySample);
    }
    let tensor = PayoffTensor::from_traces(inputs.traces);
    let (u_s, u_r) = payoff_matrices(&tensor)?;
    let alpha = alpha_rank(&u_s, &u_r, inputs.alpha, inputs.pop)?;
    let senders = role_rows(&tensor, Role::Sender, &alpha.sender_masses)?;
    let receivers = role_rows(&tensor, Role::Receiver, &alpha.receiver_masses)?;
    let nash = pure_nash(&u_s, &u_r)
        .into_iter()
        .map(|(s, r)| (tensor.senders[s].clone(), tensor.receivers[r].clone()))
        .collect();

    let mut ordered: Vec<&EpisodeTrace> = inputs.traces.iter().collect();
    ordered.sort_by(|a, b| {
        (&a.model_sender, &a.model_receiver, &a.episode_id).cmp(&(&b.model_sender, &b.model_receiver, &b.episode_id))
    });
    let with_config: Vec<(&EpisodeTrace, &GameConfig)> = ordered
        .into_iter()
        .filter_map(|t| inputs.configs.get(&t.env_id).map(|c| (t, c)))
        .collect();
    let kept: Vec<EpisodeTrace> = with_config.iter().map(|(t, _)| (*t).clone()).collect();
    let s_vals: Vec<[f64; 6]> = with_config
        .iter()
        .map(|(t, c)| {
            let mut m: SenderBehavior = sender_metrics(t, c);
            if let Some(spec) = inputs.specs.get(&(t.env_id.clone(), t.story_schema_id.clone())) {
                m.cogency = judge_cogency(inputs.judge, &t.message, &t.theta_true, spec);
            }
            m.values()
        })
        .collect();
    let r_vals: Vec<[f64; 5]> = with_config.iter().map(|(t, c)| receiver_metrics(t, c).values()).collect();

    Ok(Report {
        maximin_sender: maximin(&u_s, &tensor.senders, Axis::Rows).map(str::to_string),
        maximin_receiver: maximin(&u_r, &tensor.receivers, Axis::Columns).map(str::to_string),
        sender_behavior: aggregate(&kept, |t| t.model_sender.as_str(), &s_vals),
        receiver_behavior: aggregate(&kept, |t| t.model_receiver.as_str(), &r_vals),
        tensor,
        senders,
        receivers,
        u_s,
        u_r,
        alpha,
        nash,
    })
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn role_csv(rows: &[RoleRow]) -> String {
    csv_table(
        &["agent", "mean", "bt", "bt_log", "tor", "alpha_mass"],
        rows.iter().map(|r| {
            vec![r.agent.clone(), num(r.mean), num(r.bt), num(r.bt_log), num(r.tor), num(r.alpha_mass)]
        }),
    )
}

fn matrix_csv(m: &Matrix, rows: &[String], cols: &[String]) -> String {
    let mut header = vec!["sender\\receiver"];
    header.extend(cols.iter().map(String::as_str));
    csv_table(
        &header,
        m.iter().zip(rows).map(|(row, name)| {
            std::iter::once(name.clone()).chain(row.iter().map(|x| num(*x))).collect()
        }),
    )
}

fn behavior_csv(columns: &[&str], data: &BTreeMap<(String, String), (usize, Vec<f64>)>) -> String {
    let mut header = vec!["agent", "env", "episodes"];
    header.extend_from_slice(columns);
    csv_table(
        &header,
        data.iter().map(|((agent, env), (n, vals))| {
            [agent.clone(), env.clone(), n.to_string()]
                .into_iter()
                .chain(vals.iter().map(|x| num(*x)))
                .collect()
        }),
    )
}

fn text_table(out: &mut String, title: &str, rows: &[RoleRow]) {
    let width = rows.iter().map(|r| r.agent.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "  {:<width$}  {:>9}  {:>9}  {:>9}  {:>9}", "agent", "BT(log)", "Mean", "TOR", "alpha");
    let mut sorted: Vec<&RoleRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.agent.cmp(&b.agent)));
    for r in sorted {
        let _ = writeln!(
            out,
            "  {:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9.4}",
            r.agent, r.bt_log, r.mean, r.tor, r.alpha_mass
        );
    }
    out.push('\n');
}

fn behavior_table(out: &mut String, title: &str, columns: &[&str], rows: &BTreeMap<(String, String), (usize, Vec<f64>)>) {
    let pooled: Vec<_> = rows.iter().filter(|((_, env), _)| env == "*").collect();
    if pooled.is_empty() {
        return;
    }
    let width = pooled.iter().map(|((a, _), _)| a.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "\n{title} (all environments)");
    let _ = write!(out, "  {:<width$}", "agent");
    for c in columns {
        let _ = write!(out, "  {c:>12}");
    }
    out.push('\n');
    for ((agent, _), (_, vals)) in pooled {
        let _ = write!(out, "  {agent:<width$}");
        for v in vals {
            let _ = write!(out, "  {:>12.4}", v + 0.0);
        }
        out.push('\n');
    }
}

impl Report {
    /// Output files by name. Content depends only on the input traces.
    pub fn files(&self) -> BTreeMap<String, String> {
        let mut f = BTreeMap::new();
        f.insert("senders.csv".into(), role_csv(&self.senders));
        f.insert("receivers.csv".into(), role_csv(&self.receivers));
        f.insert(
            "payoff_sender.csv".into(),
            matrix_csv(&self.u_s, &self.tensor.senders, &self.tensor.receivers),
        );
        f.insert(
            "payoff_receiver.csv".into(),
            matrix_csv(&self.u_r, &self.tensor.senders, &self.tensor.receivers),
        );
        let masses = self
            .senders
            .iter()
            .map(|r| vec!["sender".to_string(), r.agent.clone(), num(r.alpha_mass)])
            .chain(
                self.receivers
                    .iter()
                    .map(|r| vec!["receiver".to_string(), r.agent.clone(), num(r.alpha_mass)]),
            );
        f.insert("alpha_rank.csv".into(), csv_table(&["role", "agent", "mass"], masses));
        f.insert(
            "behavior_senders.csv".into(),
            behavior_csv(&SenderBehavior::COLUMNS, &self.sender_behavior),
        );
        f.insert(
            "behavior_receivers.csv".into(),
            behavior_csv(&ReceiverBehavior::COLUMNS, &self.receiver_behavior),
        );
        f.insert("summary.txt".into(), self.summary());
        f
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} senders x {} receivers x {} episodes ({} failed cells)\n",
            self.tensor.senders.len(),
            self.tensor.receivers.len(),
            self.tensor.episodes.len(),
            self.tensor.total_failures()
        );
        text_table(&mut out, "Senders", &self.senders);
        text_table(&mut out, "Receivers", &self.receivers);
        let _ = writeln!(out, "alpha-rank: alpha={} M={}", self.alpha.alpha, self.alpha.pop);
        let _ = writeln!(out, "maximin sender: {}", self.maximin_sender.as_deref().unwrap_or("-"));
        let _ = writeln!(out, "maximin receiver: {}", self.maximin_receiver.as_deref().unwrap_or("-"));
        if self.nash.is_empty() {
            let _ = writeln!(out, "pure Nash equilibria: none");
        } else {
            let _ = writeln!(out, "pure Nash equilibria:");
            for (s, r) in &self.nash {
                let _ = writeln!(out, "  ({s}, {r})");
            }
        }
        behavior_table(&mut out, "Sender behavior", &SenderBehavior::COLUMNS, &self.sender_behavior);
        behavior_table(&mut out, "Receiver behavior", &ReceiverBehavior::COLUMNS, &self.receiver_behavior);
        out
    }
}
