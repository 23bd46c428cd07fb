//! Mixed-credibility strategic communication: a sender with private
//! attributes makes claims, a receiver with a verification budget decides
//! what to check, and both are scored on the receiver's final estimate.
//!
//! The crate covers the whole pipeline: variant configs and priors,
//! scripted and remote agents, the episode engine, tournaments, behavior
//! metrics, meta-game rankings and playbook distillation.

pub mod agents;
pub mod config;
pub mod engine;
pub mod error;
pub mod meta;
pub mod metrics;
pub mod prior;
pub mod report;
pub mod seed;
pub mod topd;
pub mod tournament;
pub mod trace;

pub use agents::{Agent, AgentRef, ReceiverAction, Role};
pub use config::{
    load_config, load_config_dir, load_story, load_story_dir, render_public_spec, GameConfig, Message, PublicSpec,
    Regime, StoryLayer, ThetaVector,
};
pub use engine::{run_episode, EpisodeOptions, Environment};
pub use error::{Error, Result};
pub use topd::Playbook;
pub use tournament::{build_schedule, run_tournament, PayoffTensor, Schedule, Variant};
pub use trace::{EpisodeTrace, JsonlTraceStore, MemorySink, PayoffBreakdown, TraceSink};
