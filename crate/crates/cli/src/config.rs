//! Run configuration: one JSON document per experiment.
//!
//! `${VAR}` anywhere in the file is replaced by the value of the environment
//! variable `VAR` before parsing; `$$` yields a literal `$`. Relative paths
//! resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use uie_core::codec::Strictness;
use uie_core::ingest::SourceFormat;
use uie_core::model::{Language, TaskKind};
use uie_core::sampler::SamplingPolicy;
use uie_infer::EndpointConfig;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub path: PathBuf,
    /// Detected from the file contents when absent.
    #[serde(default)]
    pub format: Option<SourceFormat>,
    /// Defaults to the file stem.
    #[serde(default)]
    pub dataset: Option<String>,
    /// Checked against the parsed records when given.
    #[serde(default)]
    pub task: Option<TaskKind>,
    /// Guessed from the text when absent.
    #[serde(default)]
    pub lang: Option<Language>,
}

impl DatasetManifest {
    pub fn dataset_name(&self) -> String {
        self.dataset.clone().unwrap_or_else(|| file_stem(&self.path))
    }
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub datasets: Vec<DatasetManifest>,
    #[serde(default)]
    pub sampling: SamplingPolicy,
    /// Template file; the built-in set is used when absent.
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/run`.
    #[serde(default)]
    pub run_dir: Option<PathBuf>,
    #[serde(default)]
    pub strictness: Strictness,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            datasets: Vec::new(),
            sampling: SamplingPolicy::default(),
            templates: None,
            endpoint: None,
            output_dir: default_output_dir(),
            run_dir: None,
            strictness: Strictness::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_in(&text, base).with_context(|| format!("config {}", path.display()))
    }

    pub fn from_str_in(text: &str, base: &Path) -> Result<Self> {
        let text = interpolate(text, |k| std::env::var(k).ok())?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            join(&mut d.path);
        }
        if let Some(t) = &mut self.templates {
            join(t);
        }
        join(&mut self.output_dir);
        if let Some(r) = &mut self.run_dir {
            join(r);
        }
    }

    pub fn validate(&self) -> Result<()> {
        for d in &self.datasets {
            if !d.path.exists() {
                bail!("dataset file {} does not exist", d.path.display());
            }
        }
        if let Some(t) = &self.templates {
            if !t.exists() {
                bail!("template file {} does not exist", t.display());
            }
        }
        self.sampling.validate()?;
        if let Some(e) = &self.endpoint {
            e.validate()?;
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.run_dir.clone().unwrap_or_else(|| self.output_dir.join("run"))
    }

    pub fn endpoint(&self) -> Result<&EndpointConfig> {
        self.endpoint.as_ref().context("config has no endpoint section")
    }
}

/// Expand `${NAME}` using `lookup`. Unset variables are an error.
pub fn interpolate(text: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('$') {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 1..];
        if let Some(tail) = after.strip_prefix('$') {
            out.push('$');
            rest = tail;
        } else if let Some(body) = after.strip_prefix('{') {
            let Some(end) = body.find('}') else {
                bail!("unterminated ${{ in config");
            };
            let name = &body[..end];
            match lookup(name) {
                Some(v) => out.push_str(&json_escape(&v)),
                None => bail!("environment variable {name} is not set"),
            }
            rest = &body[end + 1..];
        } else {
            out.push('$');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Escape a value for splicing into a JSON string literal.
fn json_escape(v: &str) -> String {
    let quoted = serde_json::to_string(v).expect("string serializes");
    quoted[1..quoted.len() - 1].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation() {
        let env = |k: &str| match k {
            "TOKEN" => Some("a\"b".to_string()),
            "HOST" => Some("localhost".to_string()),
            _ => None,
        };
        assert_eq!(interpolate(r#"{"u": "http://${HOST}/$$x"}"#, env).unwrap(), r#"{"u": "http://localhost/$x"}"#);
        assert_eq!(interpolate(r#""${TOKEN}""#, env).unwrap(), r#""a\"b""#);
        assert!(interpolate("${MISSING}", env).unwrap_err().to_string().contains("MISSING"));
        assert!(interpolate("${OPEN", env).is_err());
        assert_eq!(interpolate("cost $5", env).unwrap(), "cost $5");
    }

    #[test]
    fn defaults_and_resolution() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.bio"), "x O\n").unwrap();
        let cfg = RunConfig::from_str_in(r#"{"datasets": [{"path": "a.bio", "task": "NER"}]}"#, dir.path()).unwrap();
        assert_eq!(cfg.datasets[0].path, dir.path().join("a.bio"));
        assert_eq!(cfg.datasets[0].dataset_name(), "a");
        assert_eq!(cfg.run_dir(), dir.path().join("out").join("run"));
        assert_eq!(cfg.sampling, SamplingPolicy::default());
    }

    #[test]
    fn validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(RunConfig::from_str_in(r#"{"datasets": [{"path": "missing.bio"}]}"#, dir.path()).is_err());
        assert!(RunConfig::from_str_in(r#"{"datasets": [], "bogus": 1}"#, dir.path()).is_err());
        assert!(RunConfig::from_str_in(r#"{"sampling": {"min_negatives": 4, "max_negatives": 2}}"#, dir.path()).is_err());
        assert!(RunConfig::from_str_in(
            r#"{"datasets": [{"path": "x", "task": "POS"}]}"#,
            dir.path()
        )
        .is_err());
    }
}
