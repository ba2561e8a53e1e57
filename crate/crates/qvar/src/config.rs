//! Study configuration (TOML, `version = 1`).
//!
//! ```toml
//! version = 1
//! kernel = "fbm:0.6"
//! horizon = 1.0            # optional, default 1
//! scheme = "first:phi=auto"
//! partition = "uniform"    # instantiated at every level
//! levels = [64, 128, 256]  # or "2^6..2^8"
//!
//! [mc]                     # optional
//! replicates = 2000
//! seed = 1
//!
//! [output]                 # optional
//! dir = "out"              # default: $QVAR_OUT_DIR, then ./qvar-out
//! formats = ["csv", "json"]
//! ```
//!
//! Command-line flags override values from the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::spec::{parse_levels, validate_levels};
use crate::{AppError, AppResult};

pub const CONFIG_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "QVAR_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "qvar-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Levels {
    List(Vec<usize>),
    Range(String),
}

impl Levels {
    pub fn resolve(&self) -> AppResult<Vec<usize>> {
        match self {
            Levels::List(v) => {
                validate_levels(v)?;
                Ok(v.clone())
            }
            Levels::Range(s) => parse_levels(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default)]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub version: u32,
    pub kernel: String,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub scheme: String,
    #[serde(default = "default_partition")]
    pub partition: String,
    pub levels: Levels,
    #[serde(default)]
    pub mc: Option<McSection>,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory that relative file references resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_horizon() -> f64 {
    1.0
}

fn default_partition() -> String {
    "uniform".into()
}

/// Values given on the command line; `Some` wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kernel: Option<String>,
    pub horizon: Option<f64>,
    pub scheme: Option<String>,
    pub partition: Option<String>,
    pub levels: Option<String>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

impl StudyConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> AppResult<Self> {
        let mut cfg: StudyConfig = toml::from_str(text).map_err(|e| AppError::config(format!("config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check_version()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
    }

    /// A config assembled from flags alone.
    pub fn from_overrides(o: &Overrides) -> AppResult<Self> {
        let missing = |what: &str| AppError::config(format!("--{what} is required without --config"));
        let mut cfg = StudyConfig {
            version: CONFIG_VERSION,
            kernel: o.kernel.clone().ok_or_else(|| missing("kernel"))?,
            horizon: default_horizon(),
            scheme: o.scheme.clone().ok_or_else(|| missing("scheme"))?,
            partition: default_partition(),
            levels: Levels::Range(o.levels.clone().ok_or_else(|| missing("levels"))?),
            mc: None,
            output: OutputSection::default(),
            base_dir: PathBuf::new(),
        };
        cfg.apply(o);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(k) = &o.kernel {
            self.kernel = k.clone();
        }
        if let Some(h) = o.horizon {
            self.horizon = h;
        }
        if let Some(s) = &o.scheme {
            self.scheme = s.clone();
        }
        if let Some(p) = &o.partition {
            self.partition = p.clone();
        }
        if let Some(l) = &o.levels {
            self.levels = Levels::Range(l.clone());
        }
        if o.replicates.is_some() || o.seed.is_some() {
            let mc = self.mc.get_or_insert(McSection { replicates: 0, seed: 0 });
            if let Some(r) = o.replicates {
                mc.replicates = r;
            }
            if let Some(s) = o.seed {
                mc.seed = s;
            }
        }
        if let Some(d) = &o.out {
            self.output.dir = Some(d.clone());
        }
        if let Some(f) = &o.formats {
            self.output.formats = Some(f.clone());
        }
    }

    fn check_version(&self) -> AppResult<()> {
        if self.version != CONFIG_VERSION {
            return Err(AppError::config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        Ok(())
    }

    /// Output directory: config or flag, then `$QVAR_OUT_DIR`, then
    /// `./qvar-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn formats(&self) -> Vec<Format> {
        self.output.formats.clone().unwrap_or_else(|| vec![Format::Csv, Format::Json])
    }

    /// Canonical TOML of the effective configuration, hashed into the
    /// manifest. The output directory is excluded so that the same study
    /// written to two places has the same hash.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output.dir = None;
        toml::to_string(&c).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
version = 1
kernel = "fbm:0.6"
scheme = "first:phi=auto"
levels = [16, 32]

[mc]
replicates = 10
seed = 3
"#;

    #[test]
    fn parses_and_overrides() {
        let mut cfg = StudyConfig::from_toml(SAMPLE, Path::new(".")).unwrap();
        assert_eq!(cfg.horizon, 1.0);
        assert_eq!(cfg.partition, "uniform");
        assert_eq!(cfg.levels.resolve().unwrap(), vec![16, 32]);
        cfg.apply(&Overrides { seed: Some(9), levels: Some("2^3..2^4".into()), ..Default::default() });
        assert_eq!(cfg.mc, Some(McSection { replicates: 10, seed: 9 }));
        assert_eq!(cfg.levels.resolve().unwrap(), vec![8, 16]);
        let again = StudyConfig::from_toml(&cfg.canonical(), Path::new(".")).unwrap();
        assert_eq!(again.canonical(), cfg.canonical());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(StudyConfig::from_toml("version = 2\nkernel='bm'\nscheme='first'\nlevels=[4]", Path::new(".")).is_err());
        assert!(StudyConfig::from_toml("version = 1\nkernel='bm'\nscheme='first'\nlevels=[4]\nbogus=1", Path::new(".")).is_err());
        assert!(StudyConfig::from_toml("kernel = ", Path::new(".")).is_err());
        let cfg = StudyConfig::from_toml("version = 1\nkernel='bm'\nscheme='first'\nlevels=[8, 4]", Path::new(".")).unwrap();
        assert!(cfg.levels.resolve().is_err());
    }
}
