//! Run configuration: a TOML file overlaid by command-line flags, with
//! per-command defaults filled in before the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    /// Second preset for `weights-classify` equivalence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights2: Option<String>,
    #[serde(rename = "fn", skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f2: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blaschke: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<bool>,
    #[serde(default)]
    pub numerics: Numerics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    /// `[x_min, x_max, y_min, y_max]`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_limit: Option<usize>,
    /// `[re, im]`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<String>,
    /// Relative change allowed under doubling in `riesz`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

pub const COMMANDS: &[&str] = &[
    "weights-classify",
    "gram",
    "riesz",
    "index-map",
    "decompose",
    "jordan",
    "similar",
    "kaplansky",
    "douglas",
    "counterexample",
    "verify",
];

/// A configuration problem; reported with exit status 64.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
}

/// Parse errors carry the TOML line and column.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                ConfigError(format!("line {line}, column {col}: {msg}"))
            }
            None => ConfigError(msg),
        }
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

macro_rules! overlay_fields {
    ($dst:expr, $src:expr; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Fields set in `flags` replace those in `self`.
    pub fn overlay(mut self, flags: &RunConfig) -> RunConfig {
        overlay_fields!(self, flags; command, out, weights, weights2, function, f1, f2, blaschke, csv);
        overlay_fields!(self.numerics, flags.numerics; k, n_max, resolution, bounds, t, probe_limit, omega0, normalization, tol);
        self
    }

    /// Fill the defaults `command` uses, so `result.json` records every value the run depended on.
    pub fn resolve(mut self, command: &str) -> Result<RunConfig, ConfigError> {
        if !COMMANDS.contains(&command) {
            return Err(ConfigError(format!("unknown command `{command}`")));
        }
        if let Some(c) = &self.command {
            if c != command {
                return Err(ConfigError(format!("config is for `{c}`, not `{command}`")));
            }
        }
        self.command = Some(command.to_string());
        self.out.get_or_insert_with(|| PathBuf::from("bundle-lab-out"));
        self.csv.get_or_insert(false);
        let n = &mut self.numerics;
        let needs_weights = !matches!(command, "index-map" | "decompose" | "verify");
        if needs_weights {
            let default = if command == "counterexample" { "reciprocal:nln" } else { "hardy" };
            self.weights.get_or_insert_with(|| default.to_string());
        }
        let require = |v: &Option<String>, key: &str| {
            if v.is_none() {
                Err(ConfigError(format!("`{command}` needs `{key}`")))
            } else {
                Ok(())
            }
        };
        match command {
            "weights-classify" => {
                n.probe_limit.get_or_insert(10_000);
            }
            "gram" | "douglas" => {
                require(&self.blaschke, "blaschke")?;
                n.k.get_or_insert(256);
                n.n_max.get_or_insert(40);
                if command == "gram" {
                    n.normalization.get_or_insert_with(|| "beta".to_string());
                }
            }
            "riesz" => {
                require(&self.blaschke, "blaschke")?;
                n.k.get_or_insert(512);
                n.n_max.get_or_insert(100);
                n.tol.get_or_insert(1e-2);
            }
            "index-map" => {
                require(&self.function, "fn")?;
                n.bounds.get_or_insert([-2.0, 2.0, -2.0, 2.0]);
                n.resolution.get_or_insert(400);
            }
            "decompose" => require(&self.function, "fn")?,
            "jordan" => {
                require(&self.function, "fn")?;
                n.k.get_or_insert(256);
            }
            "similar" | "kaplansky" => {
                require(&self.f1, "f1")?;
                require(&self.f2, "f2")?;
            }
            "counterexample" => {
                n.t.get_or_insert(0.5);
                n.n_max.get_or_insert(800);
            }
            _ => {}
        }
        Ok(self)
    }
}
