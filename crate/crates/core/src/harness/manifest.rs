use sha2::{Digest, Sha256};
use toml::{Table, Value};

use super::{Command, RunConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Running,
    Ok,
    Failed { stage: String, error: String },
}

/// Run record written as `manifest.toml` next to the tables.
#[derive(Clone, Debug)]
pub struct Manifest {
    pub command: Command,
    pub version: &'static str,
    /// SHA-256 of the effective configuration after command-line overrides,
    /// with the output directory blanked.
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outcome: Outcome,
    /// Fitted constants and diagnostics, in insertion order.
    pub results: Table,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: Command, cfg: &RunConfig) -> Self {
        let mut hashed = cfg.clone();
        hashed.output.dir.clear();
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: hex::encode(Sha256::digest(hashed.to_toml().as_bytes())),
            seed: cfg.seed,
            threads: 0,
            wall_time_s: 0.0,
            outcome: Outcome::Running,
            results: Table::new(),
            files: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        match self.results.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        let mut run = Table::new();
        run.insert("command".into(), self.command.name().into());
        run.insert("version".into(), self.version.into());
        run.insert("config_sha256".into(), self.config_sha256.clone().into());
        // Seeds are u64; TOML integers are i64, so the seed is kept as text.
        run.insert("seed".into(), self.seed.to_string().into());
        run.insert("threads".into(), (self.threads as i64).into());
        run.insert("wall_time_s".into(), self.wall_time_s.into());
        match &self.outcome {
            Outcome::Running => {
                run.insert("status".into(), "running".into());
            }
            Outcome::Ok => {
                run.insert("status".into(), "ok".into());
            }
            Outcome::Failed { stage, error } => {
                run.insert("status".into(), "failed".into());
                run.insert("failure_stage".into(), stage.clone().into());
                run.insert("error".into(), error.clone().into());
            }
        }
        run.insert(
            "files".into(),
            Value::Array(self.files.iter().map(|f| Value::from(f.clone())).collect()),
        );
        let mut doc = Table::new();
        doc.insert("run".into(), Value::Table(run));
        doc.insert("results".into(), Value::Table(self.results.clone()));
        toml::to_string(&doc).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_config() {
        let a = Manifest::new(Command::Direct, &RunConfig::default());
        let mut cfg = RunConfig::default();
        assert_eq!(Manifest::new(Command::Direct, &cfg).config_sha256, a.config_sha256);
        cfg.output.dir = "elsewhere".into();
        assert_eq!(Manifest::new(Command::Direct, &cfg).config_sha256, a.config_sha256);
        cfg.seed = 1;
        assert_ne!(Manifest::new(Command::Direct, &cfg).config_sha256, a.config_sha256);
        assert_eq!(a.config_sha256.len(), 64);
    }

    #[test]
    fn render_parses_back() {
        let mut m = Manifest::new(Command::Stability, &RunConfig::default());
        m.set("theta", 1.0 / 3.0);
        m.outcome = Outcome::Failed {
            stage: "sweep".into(),
            error: "boom".into(),
        };
        let t: Table = m.render().parse().unwrap();
        assert_eq!(t["run"]["failure_stage"].as_str(), Some("sweep"));
        assert_eq!(t["results"]["theta"].as_float(), Some(1.0 / 3.0));
    }
}
