//! Line-oriented configuration format: `[section]` headers and `key = value`
//! pairs, with `#` comments. Validation failures carry line references.

use crate::amalgam::AmalgamSpec;
use crate::genfun::SolverConfig;
use crate::group::{FactorGroup, FreeProduct};
use crate::simulator::OffspringDistribution;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub struct ConfigError(pub Vec<Diagnostic>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum FactorKindDecl {
    Cyclic(u32),
    Table(PathBuf),
    Lattice { rank: u32, depth: u32 },
    Ladder { depth: u32 },
}

#[derive(Debug, Clone)]
pub struct FactorDecl {
    pub line: usize,
    pub kind: FactorKindDecl,
    /// Explicit pmf over element indices; `None` means the constructor's
    /// uniform generator law.
    pub pmf: Option<Vec<(u32, f64)>>,
}

#[derive(Debug, Clone)]
pub enum OffspringDecl {
    Pmf(Vec<(u32, f64)>),
    Geometric { mean: f64, max: u32 },
}

#[derive(Debug, Clone)]
pub struct AmalgamDecl {
    pub line: usize,
    pub h_order: u32,
    /// phi_i images of 0..h_order per factor.
    pub embeds: Vec<Vec<u32>>,
}

/// Parsed and validated model description.
#[derive(Debug, Clone)]
pub struct Config {
    pub factors: Vec<FactorDecl>,
    pub weights: Vec<f64>,
    pub metric_base: f64,
    pub offspring: Option<OffspringDecl>,
    pub solver: SolverConfig,
    pub amalgam: Option<AmalgamDecl>,
    /// Directory table files are resolved against.
    pub base_dir: PathBuf,
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<Config, ConfigError> {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let mut factors: Vec<FactorDecl> = Vec::new();
    let mut weights: Option<Vec<f64>> = None;
    let mut metric_base: Option<f64> = None;
    let mut offspring: Option<OffspringDecl> = None;
    let mut solver = SolverConfig::default();
    let mut amalgam: Option<AmalgamDecl> = None;

    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Factor(usize),
        Weights,
        Metric,
        Offspring,
        Solver,
        Amalgam,
    }
    let mut section = Section::None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.trim() {
                "factor" => {
                    factors.push(FactorDecl {
                        line: lineno,
                        kind: FactorKindDecl::Cyclic(0),
                        pmf: None,
                    });
                    Section::Factor(factors.len() - 1)
                }
                "weights" => Section::Weights,
                "metric" => Section::Metric,
                "offspring" => Section::Offspring,
                "solver" => Section::Solver,
                "amalgam" => {
                    amalgam = Some(AmalgamDecl {
                        line: lineno,
                        h_order: 0,
                        embeds: Vec::new(),
                    });
                    Section::Amalgam
                }
                other => {
                    diags.push(Diagnostic {
                        line: lineno,
                        message: format!("unknown section [{other}]"),
                    });
                    Section::None
                }
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            diags.push(Diagnostic {
                line: lineno,
                message: "expected `key = value`".into(),
            });
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let mut bad = |msg: String| {
            diags.push(Diagnostic {
                line: lineno,
                message: msg,
            })
        };
        match section {
            Section::None => bad(format!("key `{key}` outside any section")),
            Section::Factor(i) => match key {
                "kind" => match parse_kind(value, base_dir) {
                    Ok(kind) => factors[i].kind = kind,
                    Err(m) => bad(m),
                },
                "pmf" => match parse_pairs(value) {
                    Ok(pairs) => factors[i].pmf = Some(pairs),
                    Err(m) => bad(m),
                },
                other => bad(format!("unknown factor key `{other}`")),
            },
            Section::Weights => match key {
                "alpha" => match parse_f64_list(value) {
                    Ok(v) => weights = Some(v),
                    Err(m) => bad(m),
                },
                other => bad(format!("unknown weights key `{other}`")),
            },
            Section::Metric => match key {
                "base" => match value.parse::<f64>() {
                    Ok(v) => metric_base = Some(v),
                    Err(_) => bad(format!("bad metric base `{value}`")),
                },
                other => bad(format!("unknown metric key `{other}`")),
            },
            Section::Offspring => match key {
                "pmf" => match parse_pairs(value) {
                    Ok(pairs) => offspring = Some(OffspringDecl::Pmf(pairs)),
                    Err(m) => bad(m),
                },
                "geometric" => match parse_geometric(value) {
                    Ok(o) => offspring = Some(o),
                    Err(m) => bad(m),
                },
                other => bad(format!("unknown offspring key `{other}`")),
            },
            Section::Solver => {
                let parsed = value.parse::<f64>();
                match (key, parsed) {
                    ("fixed_point_tol", Ok(v)) => solver.fixed_point_tol = v,
                    ("bisection_tol", Ok(v)) => solver.bisection_tol = v,
                    ("max_iter", Ok(v)) => solver.max_iter = v as u64,
                    ("divergence_threshold", Ok(v)) => solver.divergence_threshold = v,
                    ("growth_factor", Ok(v)) => solver.growth_factor = v,
                    ("accel_after", Ok(v)) => solver.accel_after = v as u64,
                    ("r_cap", Ok(v)) => solver.r_cap = v,
                    ("oracle_ball_cap", Ok(v)) => solver.oracle_ball_cap = v as u32,
                    (other, Ok(_)) => bad(format!("unknown solver key `{other}`")),
                    (_, Err(_)) => bad(format!("bad numeric value `{value}`")),
                }
            }
            Section::Amalgam => {
                let decl = amalgam.as_mut().expect("section implies declaration");
                match key {
                    "h" => match value.strip_prefix("cyclic") {
                        Some(rest) => match rest.trim().parse::<u32>() {
                            Ok(n) if n >= 2 => decl.h_order = n,
                            _ => bad(format!("bad subgroup order `{value}`")),
                        },
                        None => bad("only `h = cyclic n` subgroups are supported".into()),
                    },
                    "embed" => {
                        let mut embeds = Vec::new();
                        let mut ok = true;
                        for part in value.split(';') {
                            let images: Result<Vec<u32>, _> = part
                                .split_whitespace()
                                .map(|t| t.parse::<u32>())
                                .collect();
                            match images {
                                Ok(v) => embeds.push(v),
                                Err(_) => {
                                    bad(format!("bad embedding list `{part}`"));
                                    ok = false;
                                }
                            }
                        }
                        if ok {
                            decl.embeds = embeds;
                        }
                    }
                    other => bad(format!("unknown amalgam key `{other}`")),
                }
            }
        }
    }

    // Structural checks with line references.
    if factors.len() < 2 {
        diags.push(Diagnostic {
            line: 1,
            message: format!("need at least 2 [factor] sections, found {}", factors.len()),
        });
    }
    let weights = weights.unwrap_or_default();
    if !factors.is_empty() && weights.len() != factors.len() {
        diags.push(Diagnostic {
            line: 1,
            message: format!(
                "weights count {} does not match factor count {}",
                weights.len(),
                factors.len()
            ),
        });
    }
    let sum: f64 = weights.iter().sum();
    if !weights.is_empty() && (sum - 1.0).abs() > 1e-12 {
        diags.push(Diagnostic {
            line: 1,
            message: format!("weights must sum to 1, got {sum}"),
        });
    }
    let metric_base = metric_base.unwrap_or(0.5);
    if !(0.0 < metric_base && metric_base < 1.0) {
        diags.push(Diagnostic {
            line: 1,
            message: format!("metric base must lie in (0,1), got {metric_base}"),
        });
    }
    if !diags.is_empty() {
        return Err(ConfigError(diags));
    }
    let config = Config {
        factors,
        weights,
        metric_base,
        offspring,
        solver,
        amalgam,
        base_dir: base_dir.to_path_buf(),
    };
    // Surface the inner-module validation now, with factor line references.
    config.build_factors().map_err(ConfigError)?;
    if config.amalgam.is_none() {
        config.build_product().map_err(ConfigError)?;
    } else {
        config.build_amalgam().map_err(ConfigError)?;
    }
    if config.offspring.is_some() {
        config
            .build_offspring()
            .map_err(|m| ConfigError(vec![Diagnostic { line: 1, message: m }]))?;
    }
    Ok(config)
}

fn parse_kind(value: &str, base_dir: &Path) -> Result<FactorKindDecl, String> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    match tokens.as_slice() {
        ["cyclic", n] => n
            .parse::<u32>()
            .map(FactorKindDecl::Cyclic)
            .map_err(|_| format!("bad cyclic order `{n}`")),
        ["table", file] => Ok(FactorKindDecl::Table(base_dir.join(file))),
        ["lattice", k, "depth", d] => {
            let rank = k.parse::<u32>().map_err(|_| format!("bad rank `{k}`"))?;
            let depth = d.parse::<u32>().map_err(|_| format!("bad depth `{d}`"))?;
            Ok(FactorKindDecl::Lattice { rank, depth })
        }
        ["ladder", "depth", d] => {
            let depth = d.parse::<u32>().map_err(|_| format!("bad depth `{d}`"))?;
            Ok(FactorKindDecl::Ladder { depth })
        }
        _ => Err(format!(
            "unknown factor kind `{value}` (expected `cyclic n`, `table <file>`, \
             `lattice k depth d`, or `ladder depth d`)"
        )),
    }
}

fn parse_pairs(value: &str) -> Result<Vec<(u32, f64)>, String> {
    value
        .split(',')
        .map(|pair| {
            let (k, p) = pair
                .split_once(':')
                .ok_or_else(|| format!("expected `index:weight`, got `{pair}`"))?;
            let k = k
                .trim()
                .parse::<u32>()
                .map_err(|_| format!("bad index `{k}`"))?;
            let p = p
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("bad weight `{p}`"))?;
            Ok((k, p))
        })
        .collect()
}

fn parse_f64_list(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number `{t}`"))
        })
        .collect()
}

fn parse_geometric(value: &str) -> Result<OffspringDecl, String> {
    let mut mean = None;
    let mut max = None;
    for token in value.split_whitespace() {
        if let Some(v) = token.strip_prefix("mean=") {
            mean = Some(v.parse::<f64>().map_err(|_| format!("bad mean `{v}`"))?);
        } else if let Some(v) = token.strip_prefix("max=") {
            max = Some(v.parse::<u32>().map_err(|_| format!("bad max `{v}`"))?);
        } else {
            return Err(format!("unknown geometric token `{token}`"));
        }
    }
    Ok(OffspringDecl::Geometric {
        mean: mean.ok_or("geometric needs mean=")?,
        max: max.unwrap_or(8),
    })
}

impl Config {
    pub fn build_factors(&self) -> Result<Vec<FactorGroup>, Vec<Diagnostic>> {
        let mut out = Vec::new();
        let mut diags = Vec::new();
        for decl in &self.factors {
            let built = match &decl.kind {
                FactorKindDecl::Cyclic(n) => {
                    let pmf = match &decl.pmf {
                        Some(p) => p.clone(),
                        None => {
                            diags.push(Diagnostic {
                                line: decl.line,
                                message: "cyclic factors need an explicit pmf".into(),
                            });
                            continue;
                        }
                    };
                    FactorGroup::cyclic(*n, &pmf)
                }
                FactorKindDecl::Table(path) => match load_table(path) {
                    Ok((name, table)) => {
                        let pmf = decl.pmf.clone().unwrap_or_default();
                        FactorGroup::from_table(&name, &table, &pmf)
                    }
                    Err(m) => {
                        diags.push(Diagnostic {
                            line: decl.line,
                            message: m,
                        });
                        continue;
                    }
                },
                FactorKindDecl::Lattice { rank, depth } => FactorGroup::lattice(*rank, *depth),
                FactorKindDecl::Ladder { depth } => FactorGroup::ladder(*depth),
            };
            match built {
                Ok(f) => {
                    if decl.pmf.is_some()
                        && matches!(
                            decl.kind,
                            FactorKindDecl::Lattice { .. } | FactorKindDecl::Ladder { .. }
                        )
                    {
                        diags.push(Diagnostic {
                            line: decl.line,
                            message: "lattice/ladder factors use the uniform generator law"
                                .into(),
                        });
                    } else {
                        out.push(f);
                    }
                }
                Err(e) => diags.push(Diagnostic {
                    line: decl.line,
                    message: e.to_string(),
                }),
            }
        }
        if diags.is_empty() {
            Ok(out)
        } else {
            Err(diags)
        }
    }

    pub fn build_product(&self) -> Result<FreeProduct, Vec<Diagnostic>> {
        let factors = self.build_factors()?;
        FreeProduct::new(factors, self.weights.clone(), self.metric_base).map_err(|e| {
            vec![Diagnostic {
                line: 1,
                message: e.to_string(),
            }]
        })
    }

    pub fn build_amalgam(&self) -> Result<AmalgamSpec, Vec<Diagnostic>> {
        let decl = self.amalgam.as_ref().ok_or_else(|| {
            vec![Diagnostic {
                line: 1,
                message: "config has no [amalgam] section".into(),
            }]
        })?;
        let factors = self.build_factors()?;
        let n = decl.h_order as usize;
        if n < 2 {
            return Err(vec![Diagnostic {
                line: decl.line,
                message: "amalgam needs `h = cyclic n` with n >= 2".into(),
            }]);
        }
        let h_mult: Vec<Vec<u32>> = (0..n)
            .map(|a| (0..n).map(|b| ((a + b) % n) as u32).collect())
            .collect();
        AmalgamSpec::new(
            factors,
            h_mult,
            decl.embeds.clone(),
            self.weights.clone(),
            self.metric_base,
        )
        .map_err(|e| {
            vec![Diagnostic {
                line: decl.line,
                message: e.to_string(),
            }]
        })
    }

    pub fn build_offspring(&self) -> Result<OffspringDistribution, String> {
        match &self.offspring {
            Some(OffspringDecl::Pmf(pairs)) => {
                let max = pairs.iter().map(|&(k, _)| k).max().unwrap_or(0) as usize;
                let mut pmf = vec![0.0; max + 1];
                for &(k, p) in pairs {
                    pmf[k as usize] += p;
                }
                OffspringDistribution::new(pmf).map_err(|e| e.to_string())
            }
            Some(OffspringDecl::Geometric { mean, max }) => {
                OffspringDistribution::geometric_truncated(*mean, *max as usize)
                    .map_err(|e| e.to_string())
            }
            None => Err("config has no [offspring] section".into()),
        }
    }
}

fn load_table(path: &Path) -> Result<(String, Vec<Vec<u32>>), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read table file {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<u32>, _> = line.split_whitespace().map(|t| t.parse()).collect();
        rows.push(row.map_err(|e| format!("bad table row `{line}`: {e}"))?);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".into());
    Ok((name, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z3Z2: &str = "\
# simple random walk on the free product
[factor]
kind = cyclic 3
pmf = 1:0.5, 2:0.5

[factor]
kind = cyclic 2
pmf = 1:1.0

[weights]
alpha = 0.5, 0.5

[metric]
base = 0.5

[offspring]
geometric = mean=1.05 max=8
";

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config(Z3Z2, Path::new(".")).unwrap();
        assert_eq!(cfg.factors.len(), 2);
        let spec = cfg.build_product().unwrap();
        assert_eq!(spec.factor_count(), 2);
        let nu = cfg.build_offspring().unwrap();
        assert!((nu.mean() - 1.05).abs() < 1e-9);
    }

    #[test]
    fn weight_sum_error() {
        let text = Z3Z2.replace("alpha = 0.5, 0.5", "alpha = 0.6, 0.6");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.0.iter().any(|d| d.message.contains("sum to 1")));
    }

    #[test]
    fn degenerate_product_cited() {
        let text = "\
[factor]
kind = cyclic 2
pmf = 1:1.0
[factor]
kind = cyclic 2
pmf = 1:1.0
[weights]
alpha = 0.5, 0.5
[metric]
base = 0.5
";
        let err = parse_config(text, Path::new(".")).unwrap_err();
        assert!(err.0.iter().any(|d| d.message.contains("order-2")));
    }

    #[test]
    fn offspring_zero_mass_rejected() {
        let text = Z3Z2.replace("geometric = mean=1.05 max=8", "pmf = 0:0.1, 1:0.9");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.0.iter().any(|d| d.message.contains("nu(0)")));
    }

    #[test]
    fn unknown_keys_flagged_with_lines() {
        let text = Z3Z2.replace("base = 0.5", "bass = 0.5");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.0.iter().any(|d| d.message.contains("bass") && d.line > 1));
    }

    #[test]
    fn amalgam_config_builds() {
        let text = "\
[factor]
kind = cyclic 6
pmf = 1:0.5, 5:0.5
[factor]
kind = cyclic 6
pmf = 1:0.5, 5:0.5
[weights]
alpha = 0.5, 0.5
[metric]
base = 0.5
[amalgam]
h = cyclic 2
embed = 0 3 ; 0 3
";
        let cfg = parse_config(text, Path::new(".")).unwrap();
        let amalgam = cfg.build_amalgam().unwrap();
        assert_eq!(amalgam.h_order(), 2);
    }
}
