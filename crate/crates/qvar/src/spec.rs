//! Compact textual specs for kernels, schemes, partitions and level lists.
//!
//! ```text
//! kernel     bm | fbm:H | subfbm:H | bifbm:H:K | tab:<file>
//! scheme     first | first:phi=one | first:phi=pow:<γ> | first:phi=auto
//!            | first:phi=tab:<file> | begyn2 | gen-a:<a0,a1,…>[:<Δ>]
//! partition  uniform[:n] | perturbed[:n]:<cap>:<seed> | file:<file>
//! levels     4,16,64 | 2^6..2^12
//! ```
//!
//! `first:phi=auto` uses `φ(x) = x^{2H−1}` with `H` the kernel's
//! self-similarity index, the normalization for which the energy is `T`.

use std::path::{Path, PathBuf};

use qvar_core::kernels::KernelSpec;
use qvar_core::partitions::{make_perturbed, make_uniform, Partition};
use qvar_core::schemes::{DifferenceScheme, Phi};

use crate::io::{read_partition, read_phi_table, read_tabulated_gram};
use crate::{AppError, AppResult};

fn number(spec: &str, field: &str, what: &str) -> AppResult<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| AppError::config(format!("`{spec}`: {what} `{field}` is not a number")))
}

fn count(spec: &str, field: &str, what: &str) -> AppResult<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| AppError::config(format!("`{spec}`: {what} `{field}` is not a nonnegative integer")))
}

fn core(spec: &str) -> impl FnOnce(qvar_core::Error) -> AppError + '_ {
    move |e| AppError::config(format!("`{spec}`: {e}"))
}

/// Relative paths resolve against `base`.
fn resolve(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Builds a kernel; `horizon` is ignored by tabulated kernels.
pub fn parse_kernel(spec: &str, horizon: f64, base: &Path) -> AppResult<KernelSpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    let kernel = match parts.as_slice() {
        ["bm"] => KernelSpec::brownian(horizon),
        ["fbm", h] => KernelSpec::fbm(number(spec, h, "Hurst index")?, horizon),
        ["subfbm", h] => KernelSpec::sub_fbm(number(spec, h, "Hurst index")?, horizon),
        ["bifbm", h, k] => KernelSpec::bifbm(number(spec, h, "Hurst index")?, number(spec, k, "K")?, horizon),
        ["tab", ..] if parts.len() >= 2 => {
            let file = resolve(base, &spec[4..]);
            KernelSpec::tabulated(read_tabulated_gram(&file)?)
        }
        _ => return Err(AppError::config(format!("unknown kernel `{spec}`"))),
    };
    kernel.map_err(core(spec))
}

/// Builds a scheme. `kernel` is consulted only by `first:phi=auto`.
pub fn parse_scheme(spec: &str, kernel: Option<&KernelSpec>, base: &Path) -> AppResult<DifferenceScheme> {
    if spec == "first" || spec == "first:phi=one" {
        return Ok(DifferenceScheme::FirstOrder(Phi::One));
    }
    if spec == "begyn2" {
        return Ok(DifferenceScheme::SecondOrderBegyn);
    }
    if let Some(phi) = spec.strip_prefix("first:phi=") {
        if let Some(g) = phi.strip_prefix("pow:") {
            return DifferenceScheme::first_order_power(number(spec, g, "exponent")?).map_err(core(spec));
        }
        if phi == "auto" {
            let h = kernel
                .and_then(KernelSpec::scaling_exponent)
                .ok_or_else(|| AppError::config(format!("`{spec}` needs a self-similar built-in kernel")))?;
            return DifferenceScheme::first_order_power(2.0 * h - 1.0).map_err(core(spec));
        }
        if let Some(file) = phi.strip_prefix("tab:") {
            return Ok(DifferenceScheme::FirstOrder(Phi::Custom(read_phi_table(&resolve(base, file))?)));
        }
    }
    if let Some(rest) = spec.strip_prefix("gen-a:") {
        let mut fields = rest.split(':');
        let weights = fields
            .next()
            .unwrap_or("")
            .split(',')
            .map(|w| number(spec, w, "weight"))
            .collect::<AppResult<Vec<f64>>>()?;
        let step = fields.next().map(|d| number(spec, d, "step")).transpose()?;
        if fields.next().is_some() {
            return Err(AppError::config(format!("`{spec}`: too many fields")));
        }
        return DifferenceScheme::general_a(weights, step).map_err(core(spec));
    }
    Err(AppError::config(format!("unknown scheme `{spec}`")))
}

/// A partition family, instantiated per level.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionSpec {
    Uniform(Option<usize>),
    Perturbed { n: Option<usize>, cap: f64, seed: u64 },
    File(PathBuf),
}

impl PartitionSpec {
    pub fn parse(spec: &str, base: &Path) -> AppResult<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let seed = |s: &str| {
            s.trim().parse::<u64>().map_err(|_| AppError::config(format!("`{spec}`: seed `{s}` is not an integer")))
        };
        Ok(match parts.as_slice() {
            ["uniform"] => Self::Uniform(None),
            ["uniform", n] => Self::Uniform(Some(count(spec, n, "step count")?)),
            ["perturbed", cap, s] => Self::Perturbed { n: None, cap: number(spec, cap, "ratio cap")?, seed: seed(s)? },
            ["perturbed", n, cap, s] => Self::Perturbed {
                n: Some(count(spec, n, "step count")?),
                cap: number(spec, cap, "ratio cap")?,
                seed: seed(s)?,
            },
            ["file", ..] if parts.len() >= 2 => Self::File(resolve(base, &spec[5..])),
            _ => return Err(AppError::config(format!("unknown partition `{spec}`"))),
        })
    }

    /// Step count fixed by the spec itself, if any.
    pub fn fixed_steps(&self) -> Option<usize> {
        match self {
            Self::Uniform(n) | Self::Perturbed { n, .. } => *n,
            Self::File(_) => None,
        }
    }

    /// Partition of `[0, horizon]` with `n` steps. `n` overrides a count in
    /// the spec; file partitions ignore both and must end at `horizon`.
    pub fn build(&self, n: Option<usize>, horizon: f64) -> AppResult<Partition> {
        let steps = || {
            n.or(self.fixed_steps())
                .ok_or_else(|| AppError::config("partition needs a step count (`uniform:n` or --levels)"))
        };
        let p = match self {
            Self::Uniform(_) => make_uniform(steps()?, horizon),
            Self::Perturbed { cap, seed, .. } => make_perturbed(steps()?, horizon, *cap, *seed),
            Self::File(path) => {
                let p = read_partition(path)?;
                if (p.horizon() - horizon).abs() > 1e-12 * horizon {
                    return Err(AppError::config(format!(
                        "{}: partition ends at {}, kernel horizon is {horizon}",
                        path.display(),
                        p.horizon()
                    )));
                }
                return Ok(p);
            }
        };
        p.map_err(|e| AppError::config(e.to_string()))
    }
}

/// `4,16,64` or a dyadic range `2^6..2^12`; must be strictly increasing.
pub fn parse_levels(spec: &str) -> AppResult<Vec<usize>> {
    let levels = if let Some((lo, hi)) = spec.split_once("..") {
        let exponent = |s: &str| {
            s.trim()
                .strip_prefix("2^")
                .and_then(|e| e.parse::<u32>().ok())
                .filter(|e| *e < 40)
                .ok_or_else(|| AppError::config(format!("`{spec}`: range ends must look like 2^k")))
        };
        (exponent(lo)?..=exponent(hi)?).map(|j| 1usize << j).collect::<Vec<_>>()
    } else {
        spec.split(',').map(|s| count(spec, s, "level")).collect::<AppResult<Vec<_>>>()?
    };
    validate_levels(&levels)?;
    Ok(levels)
}

pub fn validate_levels(levels: &[usize]) -> AppResult<()> {
    if levels.is_empty() {
        return Err(AppError::config("level schedule is empty"));
    }
    if levels.contains(&0) {
        return Err(AppError::config("levels must be positive"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AppError::config(format!("levels {levels:?} are not strictly increasing")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qvar_core::kernels::Family;

    fn here() -> &'static Path {
        Path::new(".")
    }

    #[test]
    fn kernels() {
        assert_eq!(parse_kernel("bm", 2.0, here()).unwrap().horizon(), 2.0);
        assert_eq!(*parse_kernel("fbm:0.7", 1.0, here()).unwrap().family(), Family::FractionalBm { hurst: 0.7 });
        assert_eq!(
            *parse_kernel("bifbm:0.4:1.5", 1.0, here()).unwrap().family(),
            Family::BiFractionalBm { hurst: 0.4, k: 1.5 }
        );
        for bad in ["fbm", "fbm:1.2", "fbm:x", "bifbm:0.9:1.5", "gauss", "tab:/no/such/file.csv"] {
            assert_eq!(parse_kernel(bad, 1.0, here()).unwrap_err().exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn schemes() {
        let k = KernelSpec::fbm(0.6, 1.0).unwrap();
        assert_eq!(parse_scheme("first", None, here()).unwrap(), DifferenceScheme::FirstOrder(Phi::One));
        match parse_scheme("first:phi=auto", Some(&k), here()).unwrap() {
            DifferenceScheme::FirstOrder(Phi::PowerGamma(g)) => assert!((g - 0.2).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(parse_scheme("first:phi=auto", None, here()).is_err());
        assert_eq!(
            parse_scheme("gen-a:1,-2,1:0.25", None, here()).unwrap(),
            DifferenceScheme::GeneralA { weights: vec![1.0, -2.0, 1.0], step: Some(0.25) }
        );
        assert!(parse_scheme("gen-a:1,1", None, here()).is_err());
        assert!(parse_scheme("third", None, here()).is_err());
    }

    #[test]
    fn partitions_and_levels() {
        let u = PartitionSpec::parse("uniform:8", here()).unwrap();
        assert_eq!(u.build(None, 1.0).unwrap().steps(), 8);
        assert_eq!(u.build(Some(16), 1.0).unwrap().steps(), 16);
        assert!(PartitionSpec::parse("uniform", here()).unwrap().build(None, 1.0).is_err());
        let p = PartitionSpec::parse("perturbed:2:7", here()).unwrap();
        assert!(p.build(Some(64), 1.0).unwrap().ratio() <= 2.0);
        assert_eq!(parse_levels("4,16,64").unwrap(), vec![4, 16, 64]);
        assert_eq!(parse_levels("2^2..2^4").unwrap(), vec![4, 8, 16]);
        assert!(parse_levels("16,4").is_err());
        assert!(parse_levels("2^5..2^3").is_err());
    }
}
