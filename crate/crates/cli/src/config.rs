use std::fs;
use std::path::{Path, PathBuf};

use qexp::elements::Toolbox;
use qexp::objectives::Objective;
use qexp::search::SearchConfig;
use qexp::setup::Setup;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Declarative search configuration. Keys mirror the search settings; every
/// key is optional in a file and flags override file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Inline toolbox text, e.g. `"BS, LI, Dove(0|2)"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toolbox: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toolbox_file: Option<PathBuf>,
    /// Inline base setup (sources, detection, options).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setup: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setup_file: Option<PathBuf>,
    /// Pump dimension of the standard two-crystal base when no setup is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_elements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augment_toolbox: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simplify: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enumerate: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_after: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub progress_every: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<bool>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $(if $src.$f.is_some() { $dst.$f = $src.$f.clone(); })*
    };
}

impl RunConfig {
    /// Reads a TOML config, or the `config` section of a run manifest when
    /// the file ends in `.json`. Relative file references are resolved
    /// against the config's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            let manifest: crate::manifest::RunManifest =
                serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            manifest.config
        } else {
            toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        };
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.toolbox_file, &mut cfg.setup_file].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Values set in `other` win.
    pub fn overlay(&mut self, other: &RunConfig) {
        if other.toolbox.is_some() || other.toolbox_file.is_some() {
            self.toolbox = None;
            self.toolbox_file = None;
        }
        if other.setup.is_some() || other.setup_file.is_some() || other.dim.is_some() {
            self.setup = None;
            self.setup_file = None;
            self.dim = None;
        }
        overlay!(self, other; objective, seed, budget, workers, toolbox, toolbox_file, setup, setup_file,
            dim, max_elements, augment_toolbox, simplify, audit, enumerate, stop_after, progress_every, timestamps);
    }

    /// Builds the search settings together with a fully inlined snapshot
    /// that reproduces them without the original files.
    pub fn resolve(&self) -> Result<(SearchConfig, RunConfig), CliError> {
        let objective: Objective = self
            .objective
            .as_deref()
            .ok_or_else(|| CliError::usage("no objective given (config key `objective` or --objective)"))?
            .parse()?;

        let toolbox: Toolbox = match (&self.toolbox, &self.toolbox_file) {
            (Some(text), _) => text.parse()?,
            (None, Some(path)) => read(path)?.parse()?,
            (None, None) => Toolbox::default(),
        };

        let mut base: Setup = match (&self.setup, &self.setup_file) {
            (Some(text), _) => text.parse()?,
            (None, Some(path)) => read(path)?.parse()?,
            (None, None) => Setup::standard(self.dim.unwrap_or(3)),
        };
        if let Some(n) = self.max_elements {
            base.options.max_elements = n;
        }
        base = base.with_elements(Vec::new());

        let mut search = SearchConfig::new(objective);
        search.base = base;
        search.toolbox = toolbox;
        search.budget = self.budget.unwrap_or(search.budget);
        search.seed = self.seed.unwrap_or(search.seed);
        search.workers = self.workers.unwrap_or(search.workers);
        search.augment_toolbox = self.augment_toolbox.unwrap_or(search.augment_toolbox);
        search.simplify = self.simplify.unwrap_or(search.simplify);
        search.audit = self.audit.unwrap_or(search.audit);
        search.enumerate = self.enumerate.unwrap_or(search.enumerate);
        search.stop_after = self.stop_after.or(search.stop_after);
        search.progress_every = self.progress_every.or(search.progress_every);
        search.timestamps = self.timestamps.unwrap_or(search.timestamps);
        search.validate()?;

        let snapshot = RunConfig {
            objective: Some(search.objective.to_string()),
            seed: Some(search.seed),
            budget: Some(search.budget),
            workers: Some(search.workers),
            toolbox: Some(search.toolbox.to_string()),
            toolbox_file: None,
            setup: Some(search.base.to_string()),
            setup_file: None,
            dim: None,
            max_elements: Some(search.max_elements()),
            augment_toolbox: Some(search.augment_toolbox),
            simplify: Some(search.simplify),
            audit: Some(search.audit),
            enumerate: Some(search.enumerate),
            stop_after: search.stop_after,
            progress_every: search.progress_every,
            timestamps: Some(search.timestamps),
        };
        Ok((search, snapshot))
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

/// A flag value that names an existing file is read from it; anything else
/// is taken literally.
pub fn file_or_inline(value: &str) -> Result<String, CliError> {
    let p = Path::new(value);
    if p.is_file() {
        read(p)
    } else {
        Ok(value.to_string())
    }
}
