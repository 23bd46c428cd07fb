//! Episode trace records and the JSON-lines store they live in.
//!
//! Field names follow the published sample trace exactly (`story_schema_id`,
//! `model_sender`, `Score_R`, ...) so traces interoperate with other tooling.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::{Message, Regime, ThetaVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ToolStatus {
    Ok,
    Unavailable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub attr_id: String,
    pub tool_id: String,
    pub cost: f64,
    pub observed_value: Option<u8>,
    pub status: ToolStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PayoffRecord", into = "PayoffRecord")]
pub struct PayoffBreakdown {
    pub score_r: f64,
    pub score_s: f64,
    pub err_ratio: f64,
    pub cost_ratio: f64,
    pub claim_penalty: f64,
    pub persuasion: f64,
    pub caught_lie_perfect: bool,
}

#[derive(Serialize, Deserialize)]
struct PayoffRecord {
    #[serde(rename = "Score_R")]
    score_r: f64,
    #[serde(rename = "Score_S")]
    score_s: f64,
    err_ratio: f64,
    cost_ratio: f64,
    claim_penalty: f64,
    caught_lie_perfect: u8,
}

impl From<PayoffRecord> for PayoffBreakdown {
    fn from(r: PayoffRecord) -> Self {
        PayoffBreakdown {
            score_r: r.score_r,
            score_s: r.score_s,
            err_ratio: r.err_ratio,
            cost_ratio: r.cost_ratio,
            claim_penalty: r.claim_penalty,
            persuasion: r.score_s + r.claim_penalty,
            caught_lie_perfect: r.caught_lie_perfect != 0,
        }
    }
}

impl From<PayoffBreakdown> for PayoffRecord {
    fn from(p: PayoffBreakdown) -> Self {
        PayoffRecord {
            score_r: p.score_r,
            score_s: p.score_s,
            err_ratio: p.err_ratio,
            cost_ratio: p.cost_ratio,
            claim_penalty: p.claim_penalty,
            caught_lie_perfect: p.caught_lie_perfect as u8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode_id: String,
    pub env_id: String,
    pub story_schema_id: String,
    pub model_sender: String,
    pub model_receiver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub regime: Regime,
    pub message: Message,
    pub tool_transcript: Vec<ToolCall>,
    pub theta_true: ThetaVector,
    pub theta_hat: ThetaVector,
    pub payoffs: PayoffBreakdown,
}

impl EpisodeTrace {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// Parses JSON-lines trace text; blank lines are skipped.
pub fn parse_traces(text: &str) -> Result<Vec<EpisodeTrace>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))
        })
        .collect()
}

/// Reads a single trace file. Accepts either JSON lines or one pretty-printed
/// object.
pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Vec<EpisodeTrace>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') && !text.trim().contains('\n') {
        return parse_traces(&text);
    }
    match parse_traces(&text) {
        Ok(t) => Ok(t),
        Err(line_err) => serde_json::from_str::<EpisodeTrace>(&text)
            .map(|t| vec![t])
            .map_err(|_| Error::Parse(format!("{}: {line_err}", path.display()))),
    }
}

/// Every `*.jsonl` file under `dir` (non-recursive), sorted by file name.
pub fn trace_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<_> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_trace_dir(dir: impl AsRef<Path>) -> Result<Vec<EpisodeTrace>> {
    let mut out = Vec::new();
    for f in trace_files(dir)? {
        out.extend(read_trace_file(f)?);
    }
    Ok(out)
}

/// Destination for finished traces.
pub trait TraceSink: Send + Sync {
    fn write(&self, trace: &EpisodeTrace) -> Result<()>;
}

/// Keeps traces in memory, in write order.
#[derive(Default)]
pub struct MemorySink {
    traces: Mutex<Vec<EpisodeTrace>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_traces(self) -> Vec<EpisodeTrace> {
        self.traces.into_inner().expect("sink lock")
    }

    pub fn snapshot(&self) -> Vec<EpisodeTrace> {
        self.traces.lock().expect("sink lock").clone()
    }
}

impl TraceSink for MemorySink {
    fn write(&self, trace: &EpisodeTrace) -> Result<()> {
        self.traces.lock().expect("sink lock").push(trace.clone());
        Ok(())
    }
}

/// Append-only store with one JSON-lines file per (sender, receiver) pairing.
pub struct JsonlTraceStore {
    dir: PathBuf,
    files: Mutex<BTreeMap<String, File>>,
}

impl JsonlTraceStore {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::Sink(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            files: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn pairing_file_name(sender: &str, receiver: &str) -> String {
        format!("{}__{}.jsonl", sanitize(sender), sanitize(receiver))
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.+".contains(c) { c } else { '_' })
        .collect()
}

impl TraceSink for JsonlTraceStore {
    fn write(&self, trace: &EpisodeTrace) -> Result<()> {
        let name = Self::pairing_file_name(&trace.model_sender, &trace.model_receiver);
        let mut files = self.files.lock().expect("store lock");
        if !files.contains_key(&name) {
            let path = self.dir.join(&name);
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| Error::Sink(format!("{}: {e}", path.display())))?;
            files.insert(name.clone(), f);
        }
        let f = files.get_mut(&name).expect("just inserted");
        writeln!(f, "{}", trace.to_line()).map_err(|e| Error::Sink(e.to_string()))
    }
}

/// Streams traces from a reader, one per line.
pub fn read_traces_from(reader: impl std::io::Read) -> Result<Vec<EpisodeTrace>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const GOLDEN: &str = include_str!("../../../data/golden/ep000003.jsonl");

    #[test]
    fn golden_trace_parses_with_exact_field_names() {
        let traces = parse_traces(GOLDEN).unwrap();
        assert_eq!(traces.len(), 1);
        let t = &traces[0];
        assert_eq!(t.episode_id, "ep000003");
        assert_eq!(t.story_schema_id, "story_12_I");
        assert_eq!(t.message.claims.len(), 12);
        assert_eq!(t.tool_transcript.len(), 4);
        assert_eq!(t.payoffs.score_r, 0.6927);
        assert!((t.payoffs.persuasion - 0.75).abs() < 1e-12);
        assert!(!t.payoffs.caught_lie_perfect);

        let line = t.to_line();
        for key in [
            "\"episode_id\"", "\"story_schema_id\"", "\"model_sender\"", "\"model_receiver\"",
            "\"tool_transcript\"", "\"observed_value\"", "\"theta_true\"", "\"theta_hat\"",
            "\"Score_R\"", "\"Score_S\"", "\"err_ratio\"", "\"cost_ratio\"", "\"claim_penalty\"",
            "\"caught_lie_perfect\":0",
        ] {
            assert!(line.contains(key), "missing {key}");
        }
        assert!(!line.contains("persuasion"));
        assert_eq!(parse_traces(&line).unwrap()[0], *t);
    }

    #[test]
    fn store_appends_per_pairing() {
        let dir = tempfile::tempdir().unwrap();
        let store = JsonlTraceStore::create(dir.path()).unwrap();
        let mut t = parse_traces(GOLDEN).unwrap().remove(0);
        store.write(&t).unwrap();
        t.episode_id = "ep000004".into();
        store.write(&t).unwrap();
        t.model_receiver = "other".into();
        store.write(&t).unwrap();
        drop(store);
        let files = trace_files(dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        assert_eq!(read_trace_dir(dir.path()).unwrap().len(), 3);
    }

    #[test]
    fn unavailable_call_serializes_null_observation() {
        let call = ToolCall {
            attr_id: "V4".into(),
            tool_id: "T_V4".into(),
            cost: 1.0,
            observed_value: None,
            status: ToolStatus::Unavailable,
        };
        let s = serde_json::to_string(&call).unwrap();
        assert!(s.contains("\"observed_value\":null"));
        assert!(s.contains("\"UNAVAILABLE\""));
    }
}
