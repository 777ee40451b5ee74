//! Command-line entry point: one subcommand per pipeline.
//!
//! Exit codes: `0` success, `1` usage or config error, `2` convergence
//! failure (results are still written, with flags).  `MATHERKIT_THREADS`
//! caps worker parallelism (`0` or unset picks the core count).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use serde_json::json;

use crate::config::RunConfig;
use crate::critical::{self, CriticalValueReport};
use crate::error::{Error, Result};
use crate::experiments::{
    analyze_class, flat_detector, scan_c, semicontinuity_probe, step1_perturbation,
    ProbeStep, ScanRow,
};
use crate::grids::build_kernel;
use crate::model::{CohomologyClass, Potential};
use crate::potential::{d_c, mane_potential, peierls_barrier};
use crate::sets::graph_check;

#[derive(Parser)]
#[command(
    name = "matherkit",
    about = "Variational invariant sets of mechanical Lagrangians on the circle",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Lax,
    Lp,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TableArg {
    Phi,
    Barrier,
}

/// Flag overrides; command-line wins over config, config over defaults.
#[derive(Args, Clone, Debug)]
struct Overrides {
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nv: Option<usize>,
    #[arg(long)]
    vmax: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lift_window: Option<i32>,
    #[arg(long)]
    fourier_order: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(nx) = self.nx {
            config.grid.nx = nx;
        }
        if let Some(nv) = self.nv {
            config.grid.nv = nv;
        }
        if let Some(vmax) = self.vmax {
            config.grid.vmax = vmax;
        }
        if let Some(tau) = self.tau {
            config.grid.tau = tau;
        }
        if let Some(w) = self.lift_window {
            config.grid.lift_window = w;
        }
        if let Some(k) = self.fourier_order {
            config.fourier_order = k;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.output {
            config.output = out.clone();
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Critical value α(c) by value iteration, occupation LP, or both.
    Alpha {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
        /// Write the minimizing measure as CSV (columns x, v, weight).
        #[arg(long)]
        measure_out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// β(h) as the Fenchel conjugate of α sampled over a class range.
    Beta {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        h: f64,
        /// Sample range as lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        c_range: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Mañé potential or Peierls barrier table as CSV.
    Potential {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, value_enum, default_value_t = TableArg::Phi)]
        kind: TableArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Mather/Aubry/Mañé clouds with Hausdorff distances and graph report.
    Sets {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Full pipeline over a uniform class range, one CSV row per class.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        c_range: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Collapse perturbation: bump off the Mather set, re-run, compare.
    Perturb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Detect the flat of α around a class.
    Flat {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, default_value_t = 1.6)]
        probe_radius: f64,
        #[arg(long, default_value_t = 129)]
        n_probes: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Semicontinuity probe along a shrinking perturbation sequence.
    Semicont {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        /// Comma-separated classes c_k; defaults to the base class repeated.
        #[arg(long, allow_hyphen_values = true)]
        c_seq: Option<String>,
        /// Comma-separated bump amplitudes; default 0.1/2^k, k = 1..4.
        #[arg(long)]
        amplitudes: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Render a float with 12 significant digits for CSV output.
fn sig(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.11e}")
    }
}

fn parse_range(text: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "range must be lo:hi:n, got {text:?}"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad range bound {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad range bound {:?}", parts[1])))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad range count {:?}", parts[2])))?;
    Ok((lo, hi, n))
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad list entry {s:?}")))
        })
        .collect()
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn lax_summary(report: &CriticalValueReport) -> serde_json::Value {
    json!({
        "alpha": report.alpha,
        "method": "lax_oleinik",
        "residual": report.residual,
        "converged": report.converged,
        "iterations": report.iterations,
    })
}

fn lp_summary(report: &CriticalValueReport) -> serde_json::Value {
    let measure = report.measure.as_ref();
    json!({
        "alpha": report.alpha,
        "method": "lp",
        "residual": report.residual,
        "converged": report.converged,
        "pivots": report.iterations,
        "rotation": measure.map(|m| m.rotation),
        "support_size": measure.map(|m| m.support_cells().len()),
    })
}

fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from("c,alpha,d_h_mather_aubry,d_h_aubry_mane,measure_support_size,flags\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            sig(row.c),
            sig(row.alpha),
            sig(row.d_h_mather_aubry),
            sig(row.d_h_aubry_mane),
            row.measure_support_size,
            row.flags.join(";")
        );
    }
    out
}

fn cloud_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("x,v\n");
    for &(x, v) in points {
        let _ = writeln!(out, "{},{}", sig(crate::model::wrap_position(x)), sig(v));
    }
    out
}

fn configure_threads() {
    let threads = std::env::var("MATHERKIT_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // ignore the error when a pool already exists (tests, repeat calls)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

/// Parse and execute; returns the process exit code.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    configure_threads();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    0
                }
                _ => {
                    eprint!("{err}");
                    1
                }
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Alpha {
            config,
            c,
            method,
            measure_out,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let params = config.params();
            let class = CohomologyClass(c);
            let kernel = build_kernel(&config.spec, &config.grid, class)?;

            let lax = if method != MethodArg::Lp {
                Some(critical::alpha_lax_oleinik(
                    &kernel,
                    &config.grid,
                    params.lax_max_iters,
                    params.alpha_tol,
                )?)
            } else {
                None
            };
            let lp = if method != MethodArg::Lax {
                Some(critical::alpha_lp(
                    &config.spec,
                    &config.grid,
                    class,
                    params.fourier_order,
                )?)
            } else {
                None
            };

            if let (Some(path), Some(report)) = (&measure_out, &lp) {
                if let Some(measure) = &report.measure {
                    let mut csv = String::from("x,v,weight\n");
                    for (i, j, w) in measure.support_cells() {
                        let _ = writeln!(
                            csv,
                            "{},{},{}",
                            sig(config.grid.position(i)),
                            sig(config.grid.velocity(j)),
                            sig(w)
                        );
                    }
                    if let Some(parent) = path.parent() {
                        std::fs::create_dir_all(parent)?;
                    }
                    std::fs::write(path, csv)?;
                }
            }

            let report = json!({
                "c": c,
                "lax": lax.as_ref().map(lax_summary),
                "lp": lp.as_ref().map(lp_summary),
                "config": serde_json::to_value(&config)?,
            });
            write_json(&config.output.join("alpha.json"), &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);

            let trouble = lax.map_or(false, |r| !r.converged)
                || lp.map_or(false, |r| !r.converged);
            Ok(if trouble { 2 } else { 0 })
        }

        Command::Beta {
            config,
            h,
            c_range,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let params = config.params();
            let (lo, hi, n) = parse_range(&c_range)?;
            if n < 2 {
                return Err(Error::Config("beta needs at least 2 samples".to_string()));
            }
            use rayon::prelude::*;
            let classes: Vec<f64> = (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect();
            let samples: Vec<(f64, f64)> = classes
                .par_iter()
                .map(|&ck| {
                    let kernel = build_kernel(&config.spec, &config.grid, CohomologyClass(ck))?;
                    let report = critical::alpha_lax_oleinik(
                        &kernel,
                        &config.grid,
                        params.lax_max_iters,
                        params.alpha_tol,
                    )?;
                    Ok((ck, report.alpha))
                })
                .collect::<Result<_>>()?;
            let beta = critical::beta_fenchel(&samples, h)?;
            let report = json!({
                "h": h,
                "beta": beta.value,
                "attained_at": beta.attained_at,
                "at_boundary": beta.at_boundary,
                "samples": samples.len(),
                "config": serde_json::to_value(&config)?,
            });
            write_json(&config.output.join("beta.json"), &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if beta.at_boundary { 2 } else { 0 })
        }

        Command::Potential {
            config,
            c,
            kind,
            out,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let params = config.params();
            let class = CohomologyClass(c);
            let kernel = build_kernel(&config.spec, &config.grid, class)?;
            let lax = critical::alpha_lax_oleinik(
                &kernel,
                &config.grid,
                params.lax_max_iters,
                params.alpha_tol,
            )?;
            let (t_min, t_max) = params.barrier_steps(&config.grid);
            let table = match kind {
                TableArg::Phi => {
                    mane_potential(&kernel, &config.grid, lax.alpha, t_max, params.eps_pot)?
                }
                TableArg::Barrier => {
                    peierls_barrier(&kernel, &config.grid, lax.alpha, t_min, t_max)?
                }
            };
            let mut csv = String::from("i,j,x_i,x_j,value\n");
            for i in 0..config.grid.nx {
                for j in 0..config.grid.nx {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{}",
                        i,
                        j,
                        sig(config.grid.position(i)),
                        sig(config.grid.position(j)),
                        sig(table.at(i, j))
                    );
                }
            }
            let path = out.unwrap_or_else(|| config.output.join("table.csv"));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, csv)?;
            println!(
                "wrote {} ({} kind, alpha_used = {:.6})",
                path.display(),
                match kind {
                    TableArg::Phi => "mane_potential",
                    TableArg::Barrier => "barrier",
                },
                table.alpha_used
            );
            Ok(if lax.converged { 0 } else { 2 })
        }

        Command::Sets {
            config,
            c,
            out,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let params = config.params();
            let analysis = analyze_class(&config.spec, &config.grid, &params, c)?;
            let dir = out.unwrap_or_else(|| config.output.clone());
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("mather.csv"), cloud_csv(&analysis.mather.points))?;
            std::fs::write(dir.join("aubry.csv"), cloud_csv(&analysis.aubry.points))?;
            std::fs::write(dir.join("mane.csv"), cloud_csv(&analysis.mane.points))?;

            let graph = graph_check(
                &analysis.aubry,
                &config.grid,
                &config.spec,
                params.lipschitz_bound,
            )
            .ok();

            // seeded sample of the d_c positivity margin, recorded for audit
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
            let mut d_c_min = f64::INFINITY;
            for _ in 0..1000 {
                let i = rng.gen_range(0..config.grid.nx);
                let j = rng.gen_range(0..config.grid.nx);
                d_c_min = d_c_min.min(d_c(&analysis.phi, i, j)?);
            }

            let summary = json!({
                "c": c,
                "alpha_lax": analysis.alpha_lax.alpha,
                "alpha_lp": analysis.alpha_lp.alpha,
                "d_H_MA": analysis.d_mather_aubry,
                "d_H_AN": analysis.d_aubry_mane,
                "graph_report": graph,
                "cloud_sizes": {
                    "mather": analysis.mather.len(),
                    "aubry": analysis.aubry.len(),
                    "mane": analysis.mane.len(),
                },
                "mane_rejected_out_of_box": analysis.mane_rejected_out_of_box,
                "d_c_min_sampled": d_c_min,
                "seed": config.seed,
                "tolerances": serde_json::to_value(config.tolerances)?,
                "flags": analysis.flags,
                "config": serde_json::to_value(&config)?,
            });
            write_json(&dir.join("summary.json"), &summary)?;
            println!(
                "sets at c = {c}: |M| = {}, |A| = {}, |N| = {}, d_H(M,A) = {:.4}, d_H(A,N) = {:.4}",
                analysis.mather.len(),
                analysis.aubry.len(),
                analysis.mane.len(),
                analysis.d_mather_aubry,
                analysis.d_aubry_mane
            );
            Ok(if analysis.flags.iter().any(|f| f.contains("converged")) {
                2
            } else {
                0
            })
        }

        Command::Scan {
            config,
            c_range,
            out,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let params = config.params();
            let (lo, hi, n) = parse_range(&c_range)?;
            let rows = scan_c(&config.spec, &config.grid, &params, lo, hi, n)?;
            let path = out.unwrap_or_else(|| config.output.join("scan.csv"));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, scan_csv(&rows))?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
            let trouble = rows.iter().any(|r| {
                r.flags
                    .iter()
                    .any(|f| f.contains("converged") || f.contains("error"))
            });
            Ok(if trouble { 2 } else { 0 })
        }

        Command::Perturb {
            config,
            c,
            eps,
            out,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let params = config.params();
            let (perturbed, report) =
                step1_perturbation(&config.spec, &config.grid, &params, c, eps)?;
            let dir = out.unwrap_or_else(|| config.output.clone());
            std::fs::create_dir_all(&dir)?;
            write_json(
                &dir.join("perturbed_spec.json"),
                &serde_json::to_value(&perturbed)?,
            )?;
            let value = json!({
                "report": serde_json::to_value(&report)?,
                "config": serde_json::to_value(&config)?,
            });
            write_json(&dir.join("report.json"), &value)?;
            println!(
                "perturb c = {c}, eps = {eps}: d_H(M,A) {:.4} -> {:.4}, mather shift {:.4}",
                report.d_mather_aubry_before, report.d_mather_aubry_after, report.mather_shift
            );
            Ok(if report.flags.iter().any(|f| f.contains("converged")) {
                2
            } else {
                0
            })
        }

        Command::Flat {
            config,
            c,
            probe_radius,
            n_probes,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let params = config.params();
            let report = flat_detector(
                &config.spec,
                &config.grid,
                &params,
                c,
                probe_radius,
                n_probes,
            )?;
            let value = json!({
                "report": serde_json::to_value(&report)?,
                "config": serde_json::to_value(&config)?,
            });
            write_json(&config.output.join("flat.json"), &value)?;
            println!("{}", serde_json::to_string_pretty(&value)?);
            Ok(0)
        }

        Command::Semicont {
            config,
            c,
            c_seq,
            amplitudes,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let params = config.params();
            let amps = match amplitudes {
                Some(text) => parse_list(&text)?,
                None => (1..=4).map(|k| 0.1 / (1u32 << k) as f64).collect(),
            };
            let classes = match c_seq {
                Some(text) => parse_list(&text)?,
                None => vec![c; amps.len()],
            };
            if classes.len() != amps.len() {
                return Err(Error::Config(
                    "c_seq and amplitudes must have equal length".to_string(),
                ));
            }
            let steps: Vec<ProbeStep> = classes
                .iter()
                .zip(&amps)
                .map(|(&ck, &amp)| ProbeStep {
                    perturbation: if amp == 0.0 {
                        None
                    } else {
                        // amp·(1 − cos x), the shrinking model perturbation
                        Some(Potential::Fourier {
                            constant: amp,
                            coefficients: vec![(-amp, 0.0)],
                        })
                    },
                    c: ck,
                })
                .collect();
            let report = semicontinuity_probe(&config.spec, &config.grid, &params, c, &steps)?;
            let value = json!({
                "report": serde_json::to_value(&report)?,
                "config": serde_json::to_value(&config)?,
            });
            write_json(&config.output.join("semicont.json"), &value)?;
            println!("{}", serde_json::to_string_pretty(&value)?);
            Ok(if report.flags.is_empty() { 0 } else { 2 })
        }
    }
}
