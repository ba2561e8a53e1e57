//! Condition reports and Monte Carlo over a schedule of levels.
//!
//! Everything is computed before the first file is written, so a failing
//! study leaves no partial output behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qvar_core::kernels::KernelSpec;
use qvar_core::limits::{as_classify_norms, classify_trend, conditions_from, AsClassification, ConditionReport, Trend};
use qvar_core::montecarlo::{empirical_stats, factorize, DEFAULT_JITTER};
use qvar_core::schemes::{build_gamma, DifferenceScheme};
use qvar_core::spectral::norms_and_moments;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Format, StudyConfig};
use crate::io::{conditions_csv, pretty, write_file, McLevel, MomentLevel};
use crate::parallel::sample_v;
use crate::spec::{parse_kernel, parse_scheme, PartitionSpec};
use crate::{AppError, AppResult};

/// Parsed and validated pieces of a [`StudyConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub kernel: KernelSpec,
    pub scheme: DifferenceScheme,
    pub partition: PartitionSpec,
    pub levels: Vec<usize>,
}

pub fn resolve(cfg: &StudyConfig) -> AppResult<Resolved> {
    let kernel = parse_kernel(&cfg.kernel, cfg.horizon, &cfg.base_dir)?;
    let scheme = parse_scheme(&cfg.scheme, Some(&kernel), &cfg.base_dir)?;
    let partition = PartitionSpec::parse(&cfg.partition, &cfg.base_dir)?;
    let levels = cfg.levels.resolve()?;
    if matches!(partition, PartitionSpec::File(_)) && levels.len() > 1 {
        return Err(AppError::config("a file partition supports a single level only"));
    }
    Ok(Resolved { kernel, scheme, partition, levels })
}

/// Trend summaries across the schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// Needs at least two levels with `n ≥ 2`.
    pub almost_sure: Option<AsClassification>,
    pub clt_ratio: Option<Trend>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub conditions: Vec<ConditionReport>,
    pub moments: Vec<MomentLevel>,
    pub mc: Vec<McLevel>,
    pub summary: Summary,
}

/// Runs every level; numerical failures name the level.
pub fn compute(cfg: &StudyConfig, threads: Option<usize>) -> AppResult<StudyResult> {
    let r = resolve(cfg)?;
    let mc = cfg.mc.as_ref().filter(|m| m.replicates > 0);
    if mc.is_some_and(|m| m.replicates < 2) {
        return Err(AppError::config("Monte Carlo needs at least two replicates"));
    }
    let mut out = StudyResult {
        conditions: Vec::new(),
        moments: Vec::new(),
        mc: Vec::new(),
        summary: Summary { almost_sure: None, clt_ratio: None },
    };
    for &n in &r.levels {
        let at = AppError::at_level(n);
        let p = r.partition.build(Some(n), r.kernel.horizon())?;
        let g = build_gamma(&r.scheme, &p, &r.kernel).map_err(at)?;
        let (norms, moments) = norms_and_moments(&g).map_err(AppError::at_level(n))?;
        out.conditions.push(conditions_from(n, &norms, &moments).map_err(AppError::at_level(n))?);
        out.moments.push(MomentLevel::new(n, &norms, &moments));
        if let Some(m) = mc {
            let factor = factorize(&g, DEFAULT_JITTER).map_err(AppError::at_level(n))?;
            let vs = sample_v(&factor, m.seed, m.replicates, threads)?;
            let (center, scale) = (moments.mean_vn, moments.var_vn.sqrt());
            let result = empirical_stats(&vs, center, scale).map_err(AppError::at_level(n))?;
            out.mc.push(McLevel { n, seed: m.seed, center, scale, result });
        }
    }
    let usable: Vec<&ConditionReport> = out.conditions.iter().filter(|c| c.n >= 2).collect();
    if usable.len() >= 2 {
        let norms: Vec<(usize, f64)> = out
            .moments
            .iter()
            .filter(|m| m.n >= 2)
            .map(|m| (m.n, m.spectral))
            .collect();
        out.summary.almost_sure = as_classify_norms(&norms).ok();
        let ns: Vec<usize> = usable.iter().map(|c| c.n).collect();
        let clt: Vec<f64> = usable.iter().map(|c| c.clt_ratio).collect();
        out.summary.clt_ratio = classify_trend(&ns, &clt).ok();
    }
    Ok(out)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    seed: Option<u64>,
    levels: &'a [usize],
    files: BTreeMap<&'a str, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// File name → contents, manifest included.
pub fn render(cfg: &StudyConfig, result: &StudyResult) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let formats = cfg.formats();
    if formats.contains(&Format::Csv) {
        files.insert("conditions.csv".to_string(), conditions_csv(&result.conditions).into_bytes());
    }
    if formats.contains(&Format::Json) {
        files.insert("conditions.json".to_string(), pretty(&result.conditions).into_bytes());
    }
    files.insert("moments.json".to_string(), pretty(&result.moments).into_bytes());
    files.insert("summary.json".to_string(), pretty(&result.summary).into_bytes());
    if !result.mc.is_empty() {
        files.insert("mc.json".to_string(), pretty(&result.mc).into_bytes());
    }
    let levels: Vec<usize> = result.conditions.iter().map(|c| c.n).collect();
    let manifest = Manifest {
        tool: "qvar",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(cfg.canonical().as_bytes()),
        seed: cfg.mc.as_ref().map(|m| m.seed),
        levels: &levels,
        files: files.iter().map(|(k, v)| (k.as_str(), sha256_hex(v))).collect(),
    };
    let manifest = pretty(&manifest).into_bytes();
    files.insert("manifest.json".to_string(), manifest);
    files
}

pub fn write_all(dir: &Path, files: &BTreeMap<String, Vec<u8>>) -> AppResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    files
        .iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            write_file(&path, bytes)?;
            Ok(path)
        })
        .collect()
}

/// Compute, render and write a study; returns the written paths.
pub fn run_study(cfg: &StudyConfig, threads: Option<usize>) -> AppResult<Vec<PathBuf>> {
    let result = compute(cfg, threads)?;
    let files = render(cfg, &result);
    write_all(&cfg.out_dir(), &files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str, dir: &Path) -> StudyConfig {
        let mut cfg = StudyConfig::from_toml(text, Path::new(".")).unwrap();
        cfg.output.dir = Some(dir.to_path_buf());
        cfg
    }

    #[test]
    fn brownian_energy_column() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config("version = 1\nkernel = 'bm'\nscheme = 'first'\nlevels = [4, 16, 64]\n", dir.path());
        let r = compute(&cfg, Some(1)).unwrap();
        assert!(r.conditions.iter().all(|c| (c.energy - 1.0).abs() < 1e-14));
        assert_eq!(r.summary.almost_sure.as_ref().unwrap().verdict.as_str(), "as_sufficient");
        assert!(r.mc.is_empty());
    }

    #[test]
    fn numerical_failure_names_level() {
        let dir = tempfile::tempdir().unwrap();
        // Second differences of a tabulated constant-variance kernel vanish.
        let table = dir.path().join("k.csv");
        fs::write(&table, "0,0.5,1\n1,1,1\n1,1,1\n1,1,1\n").unwrap();
        let cfg = config(
            &format!("version = 1\nkernel = 'tab:{}'\nscheme = 'begyn2'\nlevels = [2]\n", table.display()),
            &dir.path().join("out"),
        );
        let err = run_study(&cfg, Some(1)).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
        assert!(err.to_string().contains("n = 2"));
        assert!(!dir.path().join("out").exists());
    }
}
