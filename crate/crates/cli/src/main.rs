//! `fnn`: batch front end for ideal evaluation, noise sweeps, bound
//! certification and Monte Carlo runs.

mod args;
mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use fnn_core::bounds::{
    enumerate_deterministic, optimize_bilocal, optimize_hybrid, AscentOptions, BoundCertificate,
    Side,
};
use fnn_core::mc::CountsSidecar;
use fnn_core::numfmt::{g17, ser_f64, ser_opt_f64};
use fnn_core::{
    bootstrap_witness, build_scenario, compute_correlations, evaluate, run_sweep, sample_counts,
    McConfig, NoiseConfig, SweepAxis, Witness, WitnessEstimate,
};

use args::{Cli, Command, FamilyArg, Format};
use output::{emit, json, write_atomic};

#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn io(path: &str, e: std::io::Error) -> Self {
        Self {
            kind: "io",
            message: format!("{path}: {e}"),
        }
    }

    fn usage(message: String) -> Self {
        Self {
            kind: "usage",
            message,
        }
    }
}

impl From<fnn_core::Error> for CliError {
    fn from(e: fnn_core::Error) -> Self {
        let kind = match e {
            fnn_core::Error::OutOfRange { .. } => "out_of_range",
            fnn_core::Error::EmptySetting { .. } => "empty_setting",
            _ => "invalid_input",
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::usage(first_line(&e.to_string()).to_string())),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("").trim_start_matches("error: ")
}

fn fail(e: CliError) -> ExitCode {
    let body = serde_json::json!({ "error": e });
    eprintln!("{body}");
    ExitCode::FAILURE
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Ideal { noise, output } => {
            cmd_ideal(&noise.config(), output.out.as_deref(), output.format)
        }
        Command::Sweep {
            noise,
            output,
            axis,
            grid,
        } => cmd_sweep(
            &noise.config(),
            axis.into(),
            &grid,
            output.out.as_deref(),
            output.format,
        ),
        Command::Bounds {
            output,
            restarts,
            seed,
            family,
            k,
        } => cmd_bounds(
            family,
            restarts,
            seed,
            k,
            output.out.as_deref(),
            output.format,
        ),
        Command::Mc {
            noise,
            output,
            trials,
            seed,
            resamples,
            counts,
        } => {
            let noise = noise.config();
            let cfg = McConfig {
                trials_per_setting: trials,
                seed,
                detector_efficiency: noise.detector_efficiency,
                bootstrap_resamples: resamples,
            };
            cmd_mc(&noise, &cfg, counts, output.out.as_deref(), output.format)
        }
    }
}

fn cmd_ideal(noise: &NoiseConfig, out: Option<&Path>, format: Format) -> Result<(), CliError> {
    noise.validate()?;
    let report = evaluate(&compute_correlations(&build_scenario(noise)?));
    let text = match format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut s = String::from("quantity,value\n");
            s.push_str(&format!(
                "r_cns,{}\nr_nsc,{}\n",
                g17(report.r_cns),
                g17(report.r_nsc)
            ));
            s.push_str(&format!("fnn_violated,{}\n", report.fnn_violated));
            for (name, v) in &report.correlators {
                s.push_str(&format!("{name},{}\n", g17(*v)));
            }
            s
        }
    };
    emit(out, &text)
}

#[derive(Serialize)]
struct SweepMeta {
    axis: SweepAxis,
    base: NoiseConfig,
    points: usize,
    #[serde(serialize_with = "ser_opt_f64")]
    smallest_violating: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    threshold: Option<f64>,
}

fn cmd_sweep(
    noise: &NoiseConfig,
    axis: SweepAxis,
    grid: &[f64],
    out: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    let res = run_sweep(axis, grid, noise)?;
    match format {
        Format::Json => emit(out, &json(&res)),
        Format::Csv => {
            emit(out, &res.to_csv())?;
            if let Some(path) = out {
                let meta = SweepMeta {
                    axis,
                    base: res.base,
                    points: res.rows.len(),
                    smallest_violating: res.smallest_violating,
                    threshold: res.threshold,
                };
                write_atomic(&path.with_extension("meta.json"), &json(&meta))?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct BoundsOutput {
    restarts: usize,
    seed: u64,
    k: usize,
    certificates: Vec<BoundCertificate>,
}

fn cmd_bounds(
    family: FamilyArg,
    restarts: usize,
    seed: u64,
    k: usize,
    out: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    if restarts == 0 || k == 0 {
        return Err(CliError::usage("restarts and k must be positive".into()));
    }
    let opts = AscentOptions::default();
    let (det, hyb, bil) = match family {
        FamilyArg::Standard => (true, true, false),
        FamilyArg::Deterministic => (true, false, false),
        FamilyArg::Hybrid => (false, true, false),
        FamilyArg::Bilocal => (false, false, true),
        FamilyArg::All => (true, true, true),
    };
    let mut certificates = Vec::new();
    for w in Witness::ALL {
        if det {
            certificates.push(enumerate_deterministic(w));
        }
        if hyb {
            for side in Side::ALL {
                certificates.push(optimize_hybrid(w, side, k, restarts, seed, &opts));
            }
        }
        if bil {
            certificates.push(optimize_bilocal(w, k, k, restarts, seed, &opts));
        }
    }
    let text = match format {
        Format::Json => json(&BoundsOutput {
            restarts,
            seed,
            k,
            certificates,
        }),
        Format::Csv => {
            let mut s =
                String::from("family,witness,best_value,restarts,converged_fraction,heuristic\n");
            for c in &certificates {
                let family = serde_json::to_value(c.family).expect("enum");
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    family.as_str().unwrap_or_default(),
                    c.witness,
                    g17(c.best_value),
                    c.restarts,
                    g17(c.converged_fraction),
                    c.heuristic
                ));
            }
            s
        }
    };
    emit(out, &text)
}

#[derive(Serialize)]
struct ModelValues {
    #[serde(serialize_with = "ser_f64")]
    r_cns: f64,
    #[serde(serialize_with = "ser_f64")]
    r_nsc: f64,
}

#[derive(Serialize)]
struct McOutput {
    config: McConfig,
    noise: NoiseConfig,
    model: ModelValues,
    detected: [[u64; 2]; 2],
    attempted: [[u64; 2]; 2],
    estimates: BTreeMap<String, WitnessEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts_file: Option<PathBuf>,
}

fn cmd_mc(
    noise: &NoiseConfig,
    cfg: &McConfig,
    counts_path: Option<PathBuf>,
    out: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    noise.validate()?;
    cfg.validate()?;
    let table = compute_correlations(&build_scenario(noise)?);
    let model = evaluate(&table);
    let counts = sample_counts(&table, cfg)?;
    let mut estimates = BTreeMap::new();
    for w in Witness::ALL {
        estimates.insert(
            w.to_string(),
            bootstrap_witness(&counts, w, cfg.bootstrap_resamples, cfg.seed)?,
        );
    }

    let counts_path = counts_path.or_else(|| out.map(|p| p.with_extension("counts.csv")));
    if let Some(path) = &counts_path {
        write_atomic(path, &counts.to_csv())?;
        let sidecar = CountsSidecar {
            attempted: counts.attempted,
            config: *cfg,
        };
        write_atomic(&path.with_extension("json"), &json(&sidecar))?;
    }

    let mut detected = [[0; 2]; 2];
    for (x, row) in detected.iter_mut().enumerate() {
        for (z, d) in row.iter_mut().enumerate() {
            *d = counts.detected(x, z);
        }
    }
    let text = match format {
        Format::Json => json(&McOutput {
            config: *cfg,
            noise: *noise,
            model: ModelValues {
                r_cns: model.r_cns,
                r_nsc: model.r_nsc,
            },
            detected,
            attempted: counts.attempted,
            estimates,
            counts_file: counts_path,
        }),
        Format::Csv => {
            let mut s = String::from("witness,model_value,value,std_error,z_score_vs_3\n");
            for w in Witness::ALL {
                let e = &estimates[&w.to_string()];
                let m = w.evaluate(&table);
                let z = e.z_score_vs_3.map(g17).unwrap_or_default();
                s.push_str(&format!(
                    "{w},{},{},{},{z}\n",
                    g17(m),
                    g17(e.value),
                    g17(e.std_error)
                ));
            }
            s
        }
    };
    emit(out, &text)
}
