//! Study configuration: one TOML file with nested tables. Secrets never
//! appear in it; it names the environment variables that hold them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use distill_core::datagen::DEFAULT_FAILURE_THRESHOLD;
use distill_core::teacher::{BackendDescriptor, BackendKind, GenerationParams, DEFAULT_CONCURRENCY};
use distill_core::train::TrainingConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    pub teacher: TeacherConfig,
    pub training: TrainingConfig,
    /// Student dimensions by size name; merged over the built-in sizes.
    pub sizes: BTreeMap<String, StudentSize>,
    pub survey: SurveyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherConfig {
    pub kind: BackendKind,
    pub model_id: String,
    pub endpoint: Option<String>,
    pub auth_env_var: Option<String>,
    pub command: Vec<String>,
    pub params: GenerationParams,
    pub cache_dir: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub concurrency: usize,
    pub failure_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentSize {
    pub embed: usize,
    pub hidden: usize,
    pub max_target_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurveyConfig {
    pub seed: u64,
    pub addr: String,
    /// Environment variable holding the operator token for the export endpoint.
    pub operator_token_env: String,
    pub show_choices: bool,
    /// Candidate explanations drawn per variant when building a pool from checkpoints.
    pub items_per_variant: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seed: 0,
            teacher: TeacherConfig::default(),
            training: TrainingConfig::default(),
            sizes: BTreeMap::new(),
            survey: SurveyConfig::default(),
        }
    }
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            kind: BackendKind::Stub,
            model_id: "stub-teacher".into(),
            endpoint: None,
            auth_env_var: None,
            command: Vec::new(),
            params: GenerationParams::default(),
            cache_dir: None,
            templates: None,
            concurrency: DEFAULT_CONCURRENCY,
            failure_threshold: DEFAULT_FAILURE_THRESHOLD,
        }
    }
}

impl Default for SurveyConfig {
    fn default() -> Self {
        SurveyConfig {
            seed: 0,
            addr: "127.0.0.1:8080".into(),
            operator_token_env: "DISTILL_SURVEY_TOKEN".into(),
            show_choices: true,
            items_per_variant: 10,
        }
    }
}

pub fn builtin_sizes() -> BTreeMap<String, StudentSize> {
    BTreeMap::from([
        ("small".to_string(), StudentSize { embed: 32, hidden: 64, max_target_len: 64 }),
        ("base".to_string(), StudentSize { embed: 64, hidden: 128, max_target_len: 96 }),
        ("large".to_string(), StudentSize { embed: 128, hidden: 256, max_target_len: 128 }),
    ])
}

impl TeacherConfig {
    pub fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            kind: self.kind,
            model_id: self.model_id.clone(),
            endpoint: self.endpoint.clone(),
            auth_env_var: self.auth_env_var.clone(),
            command: self.command.clone(),
        }
    }
}

impl StudyConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let config = match path {
            None => StudyConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.teacher.descriptor().validate().map_err(CliError::config)?;
        self.teacher.params.validate().map_err(CliError::config)?;
        if self.teacher.concurrency == 0 {
            return Err(CliError::Config("teacher.concurrency must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.teacher.failure_threshold) {
            return Err(CliError::Config("teacher.failure_threshold must be within [0, 1]".into()));
        }
        self.training.validate().map_err(CliError::config)?;
        for (name, s) in &self.sizes {
            if s.embed == 0 || s.hidden == 0 || s.max_target_len == 0 {
                return Err(CliError::Config(format!("sizes.{name}: dimensions must be positive")));
            }
        }
        if self.survey.items_per_variant == 0 {
            return Err(CliError::Config("survey.items_per_variant must be at least 1".into()));
        }
        Ok(())
    }

    pub fn size(&self, name: &str) -> Result<StudentSize, CliError> {
        let mut sizes = builtin_sizes();
        sizes.extend(self.sizes.clone());
        sizes.get(name).copied().ok_or_else(|| {
            CliError::Config(format!("unknown size `{name}` (known: {})", sizes.keys().cloned().collect::<Vec<_>>().join(", ")))
        })
    }
}
