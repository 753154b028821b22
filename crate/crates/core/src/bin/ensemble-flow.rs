use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use ensemble_flow::bridge::{solve_chain, BridgeOptions};
use ensemble_flow::divergence::likelihood_bounds;
use ensemble_flow::estimator::{estimate_flow_multi, sweep_cost_probe, EstimatorOptions, Stabilization};
use ensemble_flow::experiments::inputs::{BridgeInput, LikelihoodInput, MlPlanInput};
use ensemble_flow::experiments::output::{read_json, state_columns, OutputDir};
use ensemble_flow::experiments::{run_experiment, ExperimentConfig, SimulationSpec};
use ensemble_flow::model::{ensure_valid, Marginal, ProblemInstance};
use ensemble_flow::oracle::{brute_force_ml_plan, generic_kl_solver, OracleProblem};
use ensemble_flow::simulate::simulate;
use ensemble_flow::{Error, Result};

#[derive(Parser)]
#[command(name = "ensemble-flow", version, about = "Flow estimation for ensembles observed in aggregate")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Convergence tolerance (relative to total mass).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_sweeps: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = clap::value_parser!(Stabilization))]
    log_domain: Option<Stabilization>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Hmm,
    Bridge,
    MlPlan,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a trajectory from a simulation spec.
    Simulate { spec: PathBuf },
    /// Estimate the most likely flow for a problem instance.
    Estimate { instance: PathBuf },
    /// Most likely evolution between two marginals.
    Bridge { input: PathBuf },
    /// Reference solution by a generic solver or by enumeration.
    Oracle {
        #[arg(long, value_enum)]
        problem: OracleKind,
        input: PathBuf,
    },
    /// Exact log-likelihood of an integer plan and its asymptotic bounds.
    Likelihood { input: PathBuf },
    /// Time estimator sweeps over a grid of sizes.
    Probe {
        #[arg(long, value_delimiter = ',', default_values_t = [50, 100])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [25, 50, 100, 200])]
        horizons: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        sweeps: usize,
    },
    /// Run an experiment described by a config file.
    Experiment { config: PathBuf },
}

impl Common {
    fn estimator(&self) -> EstimatorOptions {
        let d = EstimatorOptions::default();
        EstimatorOptions {
            tol: self.tol.unwrap_or(d.tol),
            max_sweeps: self.max_sweeps.unwrap_or(d.max_sweeps),
            log_domain: self.log_domain.unwrap_or(d.log_domain),
            initial_duals: None,
        }
    }

    fn bridge(&self) -> BridgeOptions {
        let d = BridgeOptions::default();
        BridgeOptions {
            tol: self.tol.unwrap_or(d.tol),
            max_iters: self.max_sweeps.unwrap_or(d.max_iters),
        }
    }

    fn out_dir(&self) -> Result<OutputDir> {
        OutputDir::create(self.out.as_deref().unwrap_or(Path::new(".")))
    }
}

fn marginal_rows(marginals: &[Marginal]) -> Vec<Vec<f64>> {
    marginals.iter().map(|m| m.mass().to_vec()).collect()
}

#[derive(Serialize)]
struct TraceRow {
    update: usize,
    dual_objective: f64,
}

#[derive(Serialize)]
struct ProbeCsvRow {
    n: usize,
    m: usize,
    horizon: usize,
    timed_sweeps: usize,
    median_sweep_seconds: f64,
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    let common = &cli.common;
    match cli.command {
        Command::Simulate { spec } => {
            let spec: SimulationSpec = read_json(&spec)?;
            let seed = common.seed.unwrap_or(1);
            let traj = simulate(&spec.prior, &spec.transition, &spec.sensors, spec.horizon, seed)?;
            let instance = traj.to_instance(spec.prior.clone(), spec.transition.clone(), spec.sensors.clone());
            let mut dir = common.out_dir()?;
            dir.json("trajectory.json", &traj)?;
            dir.json("instance.json", &instance)?;
            let n = spec.prior.len();
            let truth: Vec<Vec<f64>> = traj.marginals.iter().map(|r| r.iter().map(|&c| c as f64).collect()).collect();
            dir.grid("marginals.csv", "t", &state_columns("x", n), 0, &truth)?;
            for (s, sensor) in spec.sensors.iter().enumerate() {
                let rows: Vec<Vec<f64>> = traj.observations.iter().map(|r| r[s].iter().map(|&c| c as f64).collect()).collect();
                dir.grid(&format!("observations_s{}.csv", s + 1), "t", &state_columns("y", sensor.m()), 1, &rows)?;
            }
            Ok(json!({ "seed": seed, "horizon": traj.horizon(), "files": dir.written() }))
        }
        Command::Estimate { instance } => {
            let instance: ProblemInstance = read_json(&instance)?;
            ensure_valid(&instance)?;
            let est = estimate_flow_multi(&instance, &common.estimator())?;
            let mut dir = common.out_dir()?;
            dir.json("estimate.json", &est)?;
            dir.grid("marginals.csv", "t", &state_columns("x", instance.n()), 1, &marginal_rows(&est.marginals))?;
            let trace: Vec<TraceRow> = est
                .dual_objective_trace
                .iter()
                .enumerate()
                .map(|(update, &dual_objective)| TraceRow { update, dual_objective })
                .collect();
            dir.records("dual_trace.csv", &trace)?;
            Ok(json!({
                "objective": est.objective,
                "sweeps": est.sweeps,
                "residual": est.residual,
                "files": dir.written(),
            }))
        }
        Command::Bridge { input } => {
            let input: BridgeInput = read_json(&input)?;
            let sol = solve_chain(&input.mu0, &input.mu_t, &input.transition, input.horizon, &common.bridge())?;
            let mut dir = common.out_dir()?;
            dir.json("bridge.json", &sol)?;
            dir.grid("marginals.csv", "t", &state_columns("x", input.mu0.len()), 0, &marginal_rows(&sol.marginals))?;
            Ok(json!({
                "objective": sol.objective,
                "iterations": sol.iterations,
                "residual": sol.residual,
                "files": dir.written(),
            }))
        }
        Command::Oracle { problem, input } => {
            let result = match problem {
                OracleKind::Hmm => {
                    let instance: ProblemInstance = read_json(&input)?;
                    ensure_valid(&instance)?;
                    generic_kl_solver(&OracleProblem::Hmm(instance))?
                }
                OracleKind::Bridge => {
                    let b: BridgeInput = read_json(&input)?;
                    generic_kl_solver(&OracleProblem::Chain {
                        mu0: b.mu0,
                        mu_t: b.mu_t,
                        transition: b.transition,
                        horizon: b.horizon,
                    })?
                }
                OracleKind::MlPlan => {
                    let p: MlPlanInput = read_json(&input)?;
                    brute_force_ml_plan(&p.prior, &p.transition, &p.target)?
                }
            };
            let mut dir = common.out_dir()?;
            dir.json("oracle.json", &result)?;
            Ok(json!({ "objective": result.objective, "method": result.method, "files": dir.written() }))
        }
        Command::Likelihood { input } => {
            let input: LikelihoodInput = read_json(&input)?;
            let report = likelihood_bounds(&input.prior, &input.transition, &input.transfer_plan())?;
            let mut dir = common.out_dir()?;
            dir.json("likelihood.json", &report)?;
            Ok(json!({ "report": report, "files": dir.written() }))
        }
        Command::Probe { n, m, horizons, sweeps } => {
            let rows = sweep_cost_probe(&n, m, &horizons, sweeps)?;
            let rows: Vec<ProbeCsvRow> = rows
                .into_iter()
                .map(|r| ProbeCsvRow {
                    n: r.n,
                    m: r.m,
                    horizon: r.horizon,
                    timed_sweeps: r.timed_sweeps,
                    median_sweep_seconds: r.median_sweep_seconds,
                })
                .collect();
            let mut dir = common.out_dir()?;
            dir.records("probe.csv", &rows)?;
            Ok(json!({ "rows": rows.len(), "files": dir.written() }))
        }
        Command::Experiment { config } => {
            let mut config = ExperimentConfig::from_file(&config)?;
            if let Some(seed) = common.seed {
                config.seed = seed;
            }
            if let Some(tol) = common.tol {
                config.tol = tol;
            }
            if let Some(k) = common.max_sweeps {
                config.max_sweeps = k;
            }
            if let Some(mode) = common.log_domain {
                config.log_domain = mode;
            }
            if let Some(out) = &common.out {
                config.output_dir = out.clone();
            }
            config.validate()?;
            let out = config.output_dir.clone();
            let summary = run_experiment(&config, &out)?;
            let mut dir = OutputDir::create(&out)?;
            dir.json("config.json", &config)?;
            Ok(summary)
        }
    }
}

fn error_document(e: &Error) -> serde_json::Value {
    let mut doc = json!({ "kind": e.kind(), "message": e.to_string() });
    if let Error::Schema { path, .. } = e {
        doc["path"] = json!(path);
    }
    doc
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_document(&e));
            ExitCode::FAILURE
        }
    }
}
