//! Benchmark generators and their trial-reset rules.

pub mod rocksample;
pub mod tag;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::AskDynamics;
use crate::error::Result;
use crate::model::MomdpModel;

pub use rocksample::{make_rocksample, RockSample, RockSampleConfig};
pub use tag::{make_tag, Tag, TagConfig, TagGrid};

/// Domain section of an experiment config, discriminated by `"domain"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "lowercase")]
pub enum DomainConfig {
    Tag(TagConfig),
    Rocksample(RockSampleConfig),
}

#[derive(Debug, Clone)]
pub enum Domain {
    Tag(Tag),
    RockSample(RockSample),
}

impl Domain {
    pub fn build(cfg: &DomainConfig) -> Result<Self> {
        Ok(match cfg {
            DomainConfig::Tag(c) => Domain::Tag(make_tag(c)?),
            DomainConfig::Rocksample(c) => Domain::RockSample(make_rocksample(c)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::Tag(_) => "tag",
            Domain::RockSample(_) => "rocksample",
        }
    }

    pub fn model(&self) -> &MomdpModel {
        match self {
            Domain::Tag(t) => &t.model,
            Domain::RockSample(r) => &r.model,
        }
    }

    pub fn ask_dynamics(&self) -> AskDynamics {
        match self {
            Domain::Tag(t) => t.ask_dynamics(),
            Domain::RockSample(r) => r.ask_dynamics(),
        }
    }

    /// Fresh `(x, y)` for the next trial.
    pub fn reset_trial<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        match self {
            Domain::Tag(t) => t.reset_trial(rng),
            Domain::RockSample(r) => r.reset_trial(rng),
        }
    }

    pub fn default_max_steps(&self) -> usize {
        match self {
            Domain::Tag(_) => 200,
            Domain::RockSample(_) => 100,
        }
    }
}
