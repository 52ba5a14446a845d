//! Command implementations behind the `brwdim` binary: configuration
//! ingestion, dispatch into the analytic and simulation layers, and CSV
//! emission. All numbers are printed with 12 significant digits.

use crate::config::{parse_config, Config};
use crate::error::{AmalgamError, GenfunError, PfError};
use crate::genfun::{Analyzer, SolverConfig};
use crate::group::{FreeProduct, Word};
use crate::simulator;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> CliError {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> CliError {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<GenfunError> for CliError {
    fn from(e: GenfunError) -> CliError {
        match e {
            GenfunError::Group(_) | GenfunError::LambdaOutOfRange { .. } => {
                CliError::validation(e.to_string())
            }
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<PfError> for CliError {
    fn from(e: PfError) -> CliError {
        match e {
            PfError::InfiniteFactor(_) => CliError::validation(format!(
                "{e}; use the word-metric pipeline (`dim`) for truncated factors"
            )),
            PfError::Genfun(g) => g.into(),
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<AmalgamError> for CliError {
    fn from(e: AmalgamError) -> CliError {
        match e {
            AmalgamError::Diverged { .. } | AmalgamError::SlowConvergence { .. } => {
                CliError::numerical(e.to_string())
            }
            AmalgamError::Pf(p) => p.into(),
            _ => CliError::validation(e.to_string()),
        }
    }
}

/// 12 significant digits.
pub fn s12(x: f64) -> String {
    format!("{:.11e}", x)
}

pub fn load_config(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| CliError::validation(format!("{}:\n{e}", path.display())))
}

fn build_product(cfg: &Config) -> Result<FreeProduct, CliError> {
    cfg.build_product().map_err(|d| {
        CliError::validation(
            d.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("\n"),
        )
    })
}

pub fn parse_word(spec: &FreeProduct, text: &str) -> Result<Word, CliError> {
    if text.trim() == "e" {
        return Ok(spec.identity());
    }
    let mut blocks = Vec::new();
    for token in text.split(',') {
        let (f, g) = token
            .trim()
            .split_once('.')
            .ok_or_else(|| CliError::validation(format!("bad block `{token}`, want f.g")))?;
        let f: u16 = f
            .parse()
            .map_err(|_| CliError::validation(format!("bad factor `{f}`")))?;
        let g: u32 = g
            .parse()
            .map_err(|_| CliError::validation(format!("bad element `{g}`")))?;
        if f == 0 {
            return Err(CliError::validation("factors are 1-based".into()));
        }
        blocks.push((f - 1, g));
    }
    spec.word(&blocks)
        .map_err(|e| CliError::validation(e.to_string()))
}

fn flags_string(flags: &[bool]) -> String {
    flags.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_dim(config: &Path, lambda: f64, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let spec = build_product(&cfg)?;
    let analyzer = Analyzer::new(&spec, cfg.solver.clone());
    let report = analyzer.dimensions(lambda)?;
    println!("lambda        = {}", s12(report.lambda));
    println!("R             = {}", s12(report.radius.value));
    println!(
        "R_bracket     = [{}, {}]",
        s12(report.radius.lo),
        s12(report.radius.hi)
    );
    match &report.z_star {
        Some(z) => {
            println!("z_star        = {}", s12(z.value));
            println!("z_star_resid  = {}", s12(z.residual));
        }
        None => println!("z_star        = n/a (recurrent regime)"),
    }
    println!("z_star_S      = {}", s12(report.z_star_s.value));
    println!("phi           = {}", s12(report.phi));
    println!("hd_omega      = {}", s12(report.hd_omega));
    for flag in &report.flags {
        println!(
            "factor {}: xi = {}, hits_omega_piece = {}, finite = {}, omega_bound = {}",
            flag.factor + 1,
            flag.xi.map_or("n/a".into(), s12),
            flag.hits_omega_i,
            flag.factor_is_finite,
            s12(report.omega_piece_bounds[flag.factor]),
        );
    }
    for (i, d) in report.depths.iter().enumerate() {
        if let Some(d) = d {
            println!("factor {}: truncation depth {d}", i + 1);
        }
    }
    println!(
        "tolerances: fixed_point {}, bisection {}",
        s12(report.tolerances.fixed_point_tol),
        s12(report.tolerances.bisection_tol)
    );
    if let Some(path) = out {
        let mut csv = String::from("lambda,z_star,phi,hd_omega,phase_flags,R\n");
        let flags: Vec<bool> = report.flags.iter().map(|f| f.hits_omega_i).collect();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            s12(report.lambda),
            report.z_star.as_ref().map_or("nan".into(), |z| s12(z.value)),
            s12(report.phi),
            s12(report.hd_omega),
            flags_string(&flags),
            s12(report.radius.value)
        );
        write_file(path, &csv)?;
    }
    Ok(())
}

pub fn cmd_dim_omega(config: &Path) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let spec = build_product(&cfg)?;
    let analyzer = Analyzer::new(&spec, cfg.solver.clone());
    let z = analyzer.z_star_s()?;
    let hd = z.value.ln() / spec.metric_base().ln();
    println!("z_star_S = {}", s12(z.value));
    println!("residual = {}", s12(z.residual));
    println!("HD(Omega) = {}", s12(hd));
    if !z.tails_used.is_empty() {
        let list: Vec<String> = z.tails_used.iter().map(|i| (i + 1).to_string()).collect();
        println!("closed-form sphere tails used for factors: {}", list.join(", "));
    }
    Ok(())
}

pub fn cmd_phase(config: &Path, lambda: f64) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let spec = build_product(&cfg)?;
    let analyzer = Analyzer::new(&spec, cfg.solver.clone());
    let report = analyzer.phase_classify(lambda)?;
    println!("lambda = {}", s12(report.lambda));
    println!("R      = {}", s12(report.radius.value));
    println!(
        "regime = {}",
        if report.transient { "transient" } else { "recurrent" }
    );
    for flag in &report.flags {
        let status = if flag.factor_is_finite {
            "no ends of its own".to_string()
        } else if flag.hits_omega_i {
            "accumulates in its boundary copies".to_string()
        } else {
            "boundary copies stay empty".to_string()
        };
        println!(
            "factor {}: xi = {}, {status}",
            flag.factor + 1,
            flag.xi.map_or("n/a".into(), s12),
        );
    }
    Ok(())
}

pub fn cmd_sweep(
    config: &Path,
    grid: &str,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let spec = build_product(&cfg)?;
    let analyzer = Analyzer::new(&spec, cfg.solver.clone());
    let grid = parse_grid(&analyzer, grid)?;
    let report = analyzer.phi_sweep(&grid)?;
    let mut csv = String::from("lambda,z_star,phi,hd_omega,phase_flags,R\n");
    for row in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            s12(row.lambda),
            s12(row.z_star),
            s12(row.phi),
            s12(report.hd_omega),
            flags_string(&row.flags),
            s12(report.radius)
        );
    }
    write_file(out, &csv)?;
    println!("rows          = {}", report.rows.len());
    println!("monotone      = {}", report.monotone);
    println!("continuous    = {}", report.continuous);
    println!("half_gap_end  = {}", s12(report.half_gap_at_end));
    println!("wrote {}", out.display());
    Ok(())
}

/// `a:b:n` with `R` allowed for `b`; clamped to the resolvable edge.
fn parse_grid(analyzer: &Analyzer, text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::validation(format!(
            "bad grid `{text}`, want a:b:n"
        )));
    }
    let a: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::validation(format!("bad grid start `{}`", parts[0])))?;
    let b: f64 = if parts[1] == "R" {
        analyzer.resolvable_edge()?
    } else {
        parts[1]
            .parse()
            .map_err(|_| CliError::validation(format!("bad grid end `{}`", parts[1])))?
    };
    let n: usize = parts[2]
        .parse()
        .map_err(|_| CliError::validation(format!("bad grid count `{}`", parts[2])))?;
    if n < 1 || b < a {
        return Err(CliError::validation("grid must be nonempty and increasing".into()));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect())
}

pub fn cmd_exponent(config: &Path) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let spec = build_product(&cfg)?;
    let analyzer = Analyzer::new(&spec, cfg.solver.clone());
    let fit = analyzer.critical_exponent_fit(None)?;
    println!("R_used    = {}", s12(fit.r_used));
    println!("phi_at_R  = {}", s12(fit.phi_at_r));
    println!("exponent  = {}", s12(fit.exponent));
    println!("intercept = {}", s12(fit.intercept));
    println!("residual  = {}", s12(fit.residual));
    println!("points    = {}", fit.points.len());
    Ok(())
}

pub fn cmd_finite_dim(config: &Path, lambda: f64) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let spec = build_product(&cfg)?;
    let analyzer = Analyzer::new(&spec, cfg.solver.clone());
    let dims = analyzer.hd_fin(lambda)?;
    println!("lambda      = {}", s12(dims.lambda));
    println!("theta       = {}", s12(dims.theta));
    println!("rho         = {}", s12(dims.rho));
    println!("HD_fin(L)   = {}", s12(dims.hd_lambda));
    println!("HD_fin(O)   = {}", s12(dims.hd_omega));
    for (i, xi) in dims.xi.iter().enumerate() {
        println!("factor {}: xi = {}{}", i + 1, s12(*xi), if *xi < 1.0 { "" } else { "  (ge 1!)" });
    }
    Ok(())
}

pub fn cmd_amalgam_dim(config: &Path, lambda: f64) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let spec = cfg.build_amalgam().map_err(|d| {
        CliError::validation(
            d.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("\n"),
        )
    })?;
    let dims = spec.hd_amalgam(lambda, &cfg.solver)?;
    println!("lambda     = {}", s12(dims.lambda));
    println!("theta_H    = {}", s12(dims.theta_h));
    println!("rho_H      = {}", s12(dims.rho_h));
    println!("HD_H(L)    = {}", s12(dims.hd_lambda));
    println!("HD_H(O)    = {}", s12(dims.hd_omega));
    for (i, pos, h, v) in dims.table.entries() {
        println!("F_H(factor {} rep {} h {}) = {}", i + 1, pos, h, s12(v));
    }
    let onset = spec.fh_divergence_onset(&cfg.solver)?;
    println!("empirical divergence onset of the coset system = {}", s12(onset));
    Ok(())
}

pub fn cmd_oracle(
    config: &Path,
    word: &str,
    terms: u32,
    lambda: f64,
    ball_cap: Option<u32>,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let spec = build_product(&cfg)?;
    let analyzer = Analyzer::new(&spec, cfg.solver.clone());
    let target = parse_word(&spec, word)?;
    if target.is_identity() {
        return Err(CliError::validation("the identity is visited at time 0".into()));
    }
    let cap = ball_cap.unwrap_or(cfg.solver.oracle_ball_cap);
    let series = crate::oracle::first_visit_series(&spec, &target, terms, Some(cap))
        .map_err(|e| CliError::validation(e.to_string()))?;
    let partial = series.partial_sum(lambda);
    println!("word          = {target}");
    println!("terms         = {terms}");
    println!("ball_cap      = {cap}");
    println!("series_sum    = {}", s12(partial));
    if series.clamped > 0 {
        println!(
            "clamped       = {} coefficients (min raw {})",
            series.clamped,
            s12(series.min_raw)
        );
        if series.min_raw < crate::oracle::CANCELLATION_WARN {
            eprintln!(
                "warning: cancellation below {} in the first-visit recursion",
                s12(crate::oracle::CANCELLATION_WARN)
            );
        }
    }
    match analyzer.xi_converged(lambda) {
        Ok(xi) => {
            let analytic = analyzer.f_word(&xi, &target)?;
            println!("analytic      = {}", s12(analytic));
            println!("gap           = {}", s12(analytic - partial));
            println!("lower_bound   = {}", partial <= analytic + 1e-12);
        }
        Err(e) => println!("analytic      = n/a ({e})"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    config: &Path,
    mode: &str,
    reps: u64,
    seed: u64,
    out: Option<&Path>,
    gens: u32,
    stages: u32,
    factor: usize,
    words: &[String],
    cap: u64,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let spec = build_product(&cfg)?;
    let nu = cfg
        .build_offspring()
        .map_err(CliError::validation)?;
    let analyzer = Analyzer::new(&spec, cfg.solver.clone());
    let lambda = nu.mean();
    let sim_err = |e: crate::error::SimError| CliError::validation(e.to_string());
    match mode {
        "zinfty" => {
            let targets: Vec<Word> = if words.is_empty() {
                spec.ball_enumerate(2)
                    .map_err(|e| CliError::validation(e.to_string()))?
                    .into_iter()
                    .filter(|w| !w.is_identity())
                    .collect()
            } else {
                words
                    .iter()
                    .map(|w| parse_word(&spec, w))
                    .collect::<Result<_, _>>()?
            };
            let xi = analyzer.xi_converged(lambda).ok();
            let mut csv = String::from("word,mean,stderr,analytic\n");
            for target in &targets {
                let est = simulator::estimate_z_infty(
                    &spec,
                    &nu,
                    std::slice::from_ref(target),
                    reps,
                    gens,
                    cap,
                    seed,
                )
                .map_err(sim_err)?;
                let analytic = match &xi {
                    Some(xi) => s12(analyzer.f_word(xi, target)?),
                    None => "nan".into(),
                };
                println!(
                    "{target}: mean = {} +- {} (analytic {analytic}, stabilization {:.4}, excluded {})",
                    s12(est.mean),
                    s12(est.stderr),
                    est.stabilization,
                    est.excluded
                );
                let _ = writeln!(csv, "{target},{},{},{analytic}", s12(est.mean), s12(est.stderr));
            }
            if let Some(path) = out {
                write_file(path, &csv)?;
            }
        }
        "gw" => {
            let report =
                simulator::embedded_gw(&spec, &nu, factor, stages, reps, gens, cap, seed)
                    .map_err(sim_err)?;
            let analytic = analyzer
                .xi_converged(lambda)
                .map(|xi| xi.xi[factor])
                .ok();
            println!(
                "stage-1 offspring mean = {} +- {} (analytic xi = {})",
                s12(report.stage1_mean),
                s12(report.stage1_stderr),
                analytic.map_or("n/a".into(), s12)
            );
            println!("survival fraction      = {}", s12(report.survival_fraction));
            println!("replicas               = {} ({} excluded)", report.replicas, report.excluded);
            let mut csv = String::from("stage,parents,children,offspring_mean\n");
            for (k, &(p, c)) in report.stages.iter().enumerate() {
                let mean = if p > 0 { c as f64 / p as f64 } else { f64::NAN };
                let _ = writeln!(csv, "{},{p},{c},{}", k + 1, s12(mean));
            }
            if let Some(path) = out {
                write_file(path, &csv)?;
            }
        }
        "trace" => {
            let report = simulator::trace_spheres(&spec, &nu, reps, gens, cap, seed)
                .map_err(sim_err)?;
            let inv_z = analyzer
                .z_star(lambda)
                .map(|z| 1.0 / z.value)
                .ok();
            let mut csv = String::from("m,mean_count,root,inv_z_star\n");
            for &(m, mean, root) in &report.per_m {
                let _ = writeln!(
                    csv,
                    "{m},{},{},{}",
                    s12(mean),
                    s12(root),
                    inv_z.map_or("nan".into(), s12)
                );
            }
            print!("{csv}");
            if let Some(path) = out {
                write_file(path, &csv)?;
            }
        }
        "marginal" => {
            let hist = simulator::generation_marginal(&spec, &nu, gens, reps, cap, seed)
                .map_err(sim_err)?;
            let conv = crate::oracle::convolution_powers(&spec, gens)
                .map_err(|e| CliError::validation(e.to_string()))?;
            let tv = conv.tv_distance(gens as usize, &hist);
            let total: u64 = hist.values().sum();
            println!("generation  = {gens}");
            println!("particles   = {total}");
            println!("tv_distance = {}", s12(tv));
            if let Some(path) = out {
                let mut csv = String::from("word,count,empirical,exact\n");
                let mut rows: Vec<(&Word, u64)> = hist.iter().map(|(w, &c)| (w, c)).collect();
                rows.sort_by_key(|&(w, _)| (spec.word_length(w), format!("{w}")));
                for (w, c) in rows {
                    let _ = writeln!(
                        csv,
                        "{w},{c},{},{}",
                        s12(c as f64 / total as f64),
                        s12(conv.prob(gens as usize, w))
                    );
                }
                write_file(path, &csv)?;
            }
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown mode `{other}` (want zinfty|gw|trace|marginal)"
            )))
        }
    }
    Ok(())
}

pub fn cmd_truncation(config: &Path, depths: &str, lambda: f64) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let spec = build_product(&cfg)?;
    let depths: Vec<u32> = depths
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| CliError::validation(format!("bad depth `{t}`")))
        })
        .collect::<Result<_, _>>()?;
    let rows = crate::genfun::truncation_convergence(&spec, &depths, lambda, &cfg.solver)?;
    println!("depth,z_star_d,gap_to_previous");
    let mut prev: Option<f64> = None;
    for &(d, z) in &rows {
        let gap = prev.map_or("".to_string(), |p| s12(p - z));
        println!("{d},{},{gap}", s12(z));
        prev = Some(z);
    }
    Ok(())
}

/// Shared solver-config accessor for tests.
pub fn solver_of(cfg: &Config) -> &SolverConfig {
    &cfg.solver
}
