//! Configuration-driven experiment drivers: the drifting particle cloud,
//! agents on the reference road network, and user-supplied models.

pub mod inputs;
pub mod output;

use std::path::{Path, PathBuf};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_flow_multi, EstimatorOptions, FlowEstimate, Stabilization};
use crate::model::{forward_propagate, Marginal, ObservationModel, TransitionModel};
use crate::network::{build_network_transitions, build_sensor_models, reference_network, NetworkModel, WeightMode};
use crate::simulate::{build_binned_observation, build_gaussian_chain, largest_remainder, simulate, Trajectory};
use crate::svg;
use output::{read_json, state_columns, OutputDir};

pub const CONFIG_SCHEMA: &str = "ensemble-flow/experiment-config/v1";
pub const SIMULATION_SCHEMA: &str = "ensemble-flow/simulation-spec/v1";
pub const THREADS_ENV: &str = "ENSEMBLE_FLOW_THREADS";

/// Mean per-step total variation between truth and estimate on the
/// reference network, averaged over seeds 1 to 5 when the fixture was built.
pub const NETWORK_TV_REFERENCE: f64 = 0.2731;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ParticleCloud,
    Network,
    Custom,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    #[default]
    True,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleCloudParams {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub particles: u64,
    pub sigma_true: f64,
    pub drift_true: f64,
    pub sigma_model: f64,
    pub drift_model: f64,
    pub sigma_obs: f64,
    /// Initial cloud: discretized Gaussian over the 1-based states.
    pub cloud_center: f64,
    pub cloud_std: f64,
}

impl Default for ParticleCloudParams {
    fn default() -> Self {
        Self {
            n: 100,
            m: 5,
            horizon: 50,
            particles: 1000,
            sigma_true: 0.5,
            drift_true: 1.0,
            sigma_model: 2.0,
            drift_model: 0.0,
            sigma_obs: 0.5,
            cloud_center: 10.0,
            cloud_std: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub horizon: usize,
    pub agents: u64,
    /// Number of fixture sensors used, taken in file order.
    pub sensors: usize,
    /// Network description; the bundled reference network when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network_file: Option<PathBuf>,
    pub snapshot_times: Vec<usize>,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            horizon: 20,
            agents: 100,
            sensors: 7,
            network_file: None,
            snapshot_times: vec![0, 5, 10, 15, 20],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomParams {
    /// Simulation spec for the hidden truth.
    pub truth: PathBuf,
    /// Model used for estimation; the truth model when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

fn config_schema() -> String {
    CONFIG_SCHEMA.to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "config_schema")]
    pub schema: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub particle_cloud: ParticleCloudParams,
    #[serde(default)]
    pub network: NetworkParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomParams>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    /// Prior handed to the estimator in network and custom runs.
    #[serde(default)]
    pub prior_mode: PriorMode,
    #[serde(default)]
    pub log_domain: Stabilization,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seed() -> u64 {
    1
}
fn default_tol() -> f64 {
    1e-9
}
fn default_max_sweeps() -> usize {
    100_000
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn bad(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            schema: config_schema(),
            kind,
            particle_cloud: ParticleCloudParams::default(),
            network: NetworkParams::default(),
            custom: None,
            seed: default_seed(),
            tol: default_tol(),
            max_sweeps: default_max_sweeps(),
            prior_mode: PriorMode::True,
            log_domain: Stabilization::Auto,
            output_dir: default_output_dir(),
        }
    }

    /// Reads and validates a config. Relative input paths inside it are
    /// taken relative to the config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut config: Self = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(custom) = &mut config.custom {
            resolve(&mut custom.truth);
            if let Some(model) = &mut custom.model {
                resolve(model);
            }
        }
        if let Some(file) = &mut config.network.network_file {
            resolve(file);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(bad("schema", format!("expected {CONFIG_SCHEMA:?}, found {:?}", self.schema)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(bad("tol", "must lie in (0, 1)"));
        }
        if self.max_sweeps == 0 {
            return Err(bad("max_sweeps", "must be at least 1"));
        }
        let p = &self.particle_cloud;
        let positive = [
            ("particle_cloud.sigma_true", p.sigma_true),
            ("particle_cloud.sigma_model", p.sigma_model),
            ("particle_cloud.sigma_obs", p.sigma_obs),
            ("particle_cloud.cloud_std", p.cloud_std),
        ];
        for (path, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(bad(path, "must be positive and finite"));
            }
        }
        for (path, x) in [
            ("particle_cloud.drift_true", p.drift_true),
            ("particle_cloud.drift_model", p.drift_model),
            ("particle_cloud.cloud_center", p.cloud_center),
        ] {
            if !x.is_finite() {
                return Err(bad(path, "must be finite"));
            }
        }
        for (path, x) in [
            ("particle_cloud.n", p.n as u64),
            ("particle_cloud.m", p.m as u64),
            ("particle_cloud.horizon", p.horizon as u64),
            ("particle_cloud.particles", p.particles),
            ("network.horizon", self.network.horizon as u64),
            ("network.agents", self.network.agents),
            ("network.sensors", self.network.sensors as u64),
        ] {
            if x == 0 {
                return Err(bad(path, "must be at least 1"));
            }
        }
        if self.kind == ExperimentKind::Custom && self.custom.is_none() {
            return Err(bad("custom", "custom experiments need a `custom` section"));
        }
        Ok(())
    }

    fn estimator_options(&self) -> EstimatorOptions {
        EstimatorOptions {
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            log_domain: self.log_domain,
            initial_duals: None,
        }
    }
}

/// A model to simulate from: the `simulate` subcommand input and the
/// truth/model files of custom experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    #[serde(default = "simulation_schema")]
    pub schema: String,
    pub horizon: usize,
    pub prior: Marginal,
    pub transition: TransitionModel,
    pub sensors: Vec<ObservationModel>,
}

fn simulation_schema() -> String {
    SIMULATION_SCHEMA.to_string()
}

/// Upper bound on worker threads from `ENSEMBLE_FLOW_THREADS`.
pub fn thread_cap() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| Error::Precondition(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |k| k.get())),
    }
}

fn both<A: Send, B: Send>(a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> Result<(A, B)> {
    if thread_cap()? < 2 {
        return Ok((a(), b()));
    }
    Ok(std::thread::scope(|scope| {
        let hb = scope.spawn(b);
        let ra = a();
        (ra, hb.join().expect("estimation thread panicked"))
    }))
}

fn rows(marginals: &[Marginal]) -> Vec<Vec<f64>> {
    marginals.iter().map(|m| m.mass().to_vec()).collect()
}

fn count_rows(counts: &[Vec<u64>]) -> Vec<Vec<f64>> {
    counts.iter().map(|r| r.iter().map(|&c| c as f64).collect()).collect()
}

fn l1(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `μ₀ … μ_T` of an estimate, with the prior it started from.
fn estimate_path(prior: &Marginal, est: &FlowEstimate) -> Vec<Marginal> {
    std::iter::once(prior.clone()).chain(est.marginals.iter().cloned()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub sweeps: usize,
    pub residual: f64,
    pub objective: f64,
    /// Largest `|Σ_i (μ_t)_i − N|` over `t`.
    pub mass_error: f64,
}

impl EstimateSummary {
    fn of(est: &FlowEstimate, total: f64) -> Self {
        Self {
            sweeps: est.sweeps,
            residual: est.residual,
            objective: est.objective,
            mass_error: est.marginals.iter().map(|m| (m.total() - total).abs()).fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloudSummary {
    pub seed: u64,
    pub particles: u64,
    pub true_prior: EstimateSummary,
    pub uniform_prior: EstimateSummary,
    /// `‖μ̂_t^uniform − μ̂_t^true‖₁ / N` for `t = 1 … T`.
    pub relative_l1_between_estimates: Vec<f64>,
    /// `‖μ̂_t − μ_t‖₁` against the hidden truth for `t = 1 … T`.
    pub l1_error_true_prior: Vec<f64>,
    pub l1_error_uniform_prior: Vec<f64>,
    pub l1_error_forward_propagation: Vec<f64>,
}

pub struct ParticleCloudRun {
    pub summary: ParticleCloudSummary,
    pub trajectory: Trajectory,
    /// `μ₀ … μ_T`, starting from the prior each estimate was given.
    pub estimate_true_prior: Vec<Marginal>,
    pub estimate_uniform_prior: Vec<Marginal>,
    pub files: Vec<PathBuf>,
}

/// Gaussian cloud of `particles` particles rounded by largest remainder.
pub fn cloud_prior(p: &ParticleCloudParams) -> Marginal {
    let weights: Vec<f64> = (1..=p.n)
        .map(|i| (-(i as f64 - p.cloud_center).powi(2) / (2.0 * p.cloud_std * p.cloud_std)).exp())
        .collect();
    Marginal::from_counts(&largest_remainder(&weights, p.particles))
}

/// Simulates the drifting cloud, then estimates it with the wider
/// non-drifting model from the true prior and from a uniform prior.
pub fn run_particle_cloud(config: &ExperimentConfig, out: &Path) -> Result<ParticleCloudRun> {
    config.validate()?;
    let p = &config.particle_cloud;
    let truth = build_gaussian_chain(p.n, p.sigma_true, p.drift_true)?;
    let model = build_gaussian_chain(p.n, p.sigma_model, p.drift_model)?;
    let sensor = build_binned_observation(p.n, p.m, p.sigma_obs)?;
    let prior = cloud_prior(p);
    let total = p.particles as f64;
    let trajectory = simulate(&prior, &truth, std::slice::from_ref(&sensor), p.horizon, config.seed)?;

    let opts = config.estimator_options();
    let uniform = Marginal::uniform(p.n, total);
    let true_instance = trajectory.to_instance(prior.clone(), model.clone(), vec![sensor.clone()]);
    let uniform_instance = true_instance.with_prior(uniform.clone());
    let (est_true, est_uniform) = both(
        || estimate_flow_multi(&true_instance, &opts),
        || estimate_flow_multi(&uniform_instance, &opts),
    )?;
    let (est_true, est_uniform) = (est_true?, est_uniform?);

    let path_true = estimate_path(&prior, &est_true);
    let path_uniform = estimate_path(&uniform, &est_uniform);
    let forward = forward_propagate(&prior, &model, p.horizon)?;
    let hidden: Vec<Marginal> = (0..=p.horizon).map(|t| trajectory.marginal(t)).collect();
    let per_step = |path: &[Marginal], scale: f64| -> Vec<f64> {
        (1..=p.horizon).map(|t| l1(path[t].mass(), hidden[t].mass()) / scale).collect()
    };
    let summary = ParticleCloudSummary {
        seed: config.seed,
        particles: p.particles,
        true_prior: EstimateSummary::of(&est_true, total),
        uniform_prior: EstimateSummary::of(&est_uniform, total),
        relative_l1_between_estimates: (1..=p.horizon)
            .map(|t| l1(path_true[t].mass(), path_uniform[t].mass()) / total)
            .collect(),
        l1_error_true_prior: per_step(&path_true, 1.0),
        l1_error_uniform_prior: per_step(&path_uniform, 1.0),
        l1_error_forward_propagation: per_step(&forward, 1.0),
    };

    let mut dir = OutputDir::create(out)?;
    let states = state_columns("x", p.n);
    let truth_rows = count_rows(&trajectory.marginals);
    let obs_rows: Vec<Vec<f64>> = trajectory
        .observations
        .iter()
        .map(|per_sensor| per_sensor[0].iter().map(|&c| c as f64).collect())
        .collect();
    let panels = [
        ("truth", "hidden truth", 0, truth_rows, states.clone()),
        ("observations", "observations", 1, obs_rows, state_columns("y", p.m)),
        ("estimate_true_prior", "estimate, true prior", 0, rows(&path_true), states.clone()),
        ("estimate_uniform_prior", "estimate, uniform prior", 0, rows(&path_uniform), states),
    ];
    for (name, title, first, grid, columns) in &panels {
        dir.grid(&format!("{name}.csv"), "t", columns, *first, grid)?;
        dir.text(&format!("{name}.svg"), &svg::heatmap(title, grid))?;
    }
    dir.json("summary.json", &summary)?;

    Ok(ParticleCloudRun {
        summary,
        trajectory,
        estimate_true_prior: path_true,
        estimate_uniform_prior: path_uniform,
        files: dir.into_written(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub seed: u64,
    pub agents: u64,
    pub estimate: EstimateSummary,
    /// `½‖μ̂_t − μ_t‖₁ / N` for `t = 1 … T`.
    pub total_variation: Vec<f64>,
    pub mean_total_variation: f64,
    pub reference_total_variation: f64,
}

pub struct NetworkRun {
    pub summary: NetworkSummary,
    pub trajectory: Trajectory,
    /// `μ₀ … μ_T` of the estimate.
    pub estimate: Vec<Marginal>,
    pub files: Vec<PathBuf>,
}

fn load_network(params: &NetworkParams) -> Result<NetworkModel> {
    let mut net = match &params.network_file {
        Some(path) => NetworkModel::from_json(&std::fs::read_to_string(path)?)?,
        None => reference_network(),
    };
    if params.sensors > net.sensors.len() {
        return Err(bad(
            "network.sensors",
            format!("the network has only {} sensors", net.sensors.len()),
        ));
    }
    net.sensors.truncate(params.sensors);
    net.agents = params.agents;
    Ok(net)
}

/// Agents released on the initial edge move under the preferred-route
/// dynamics and are tracked with a model that weighs all turns equally.
pub fn run_network(config: &ExperimentConfig, out: &Path) -> Result<NetworkRun> {
    config.validate()?;
    let params = &config.network;
    let net = load_network(params)?;
    let truth = build_network_transitions(&net, WeightMode::Weighted)?;
    let model = build_network_transitions(&net, WeightMode::Uniform)?;
    let sensors = build_sensor_models(&net)?;
    let prior = net.initial_marginal();
    let total = prior.total();
    let trajectory = simulate(&prior, &truth, &sensors, params.horizon, config.seed)?;
    let start = match config.prior_mode {
        PriorMode::True => prior.clone(),
        PriorMode::Uniform => Marginal::uniform(net.n(), total),
    };
    let est = estimate_flow_multi(&trajectory.to_instance(start.clone(), model, sensors), &config.estimator_options())?;
    let path = estimate_path(&start, &est);
    let tv: Vec<f64> = (1..=params.horizon)
        .map(|t| 0.5 * l1(path[t].mass(), trajectory.marginal(t).mass()) / total)
        .collect();
    let summary = NetworkSummary {
        seed: config.seed,
        agents: net.agents,
        estimate: EstimateSummary::of(&est, total),
        mean_total_variation: tv.iter().sum::<f64>() / tv.len() as f64,
        total_variation: tv,
        reference_total_variation: NETWORK_TV_REFERENCE,
    };

    let mut dir = OutputDir::create(out)?;
    let edges: Vec<String> = net.edges.iter().map(|(a, b)| format!("e{a}_{b}")).collect();
    let truth_rows = count_rows(&trajectory.marginals);
    let estimate_rows = rows(&path);
    dir.grid("truth.csv", "t", &edges, 0, &truth_rows)?;
    dir.grid("estimate.csv", "t", &edges, 0, &estimate_rows)?;
    let obs_columns: Vec<String> = (1..=net.sensors.len())
        .flat_map(|s| [format!("s{s}_detected"), format!("s{s}_missed")])
        .collect();
    let obs_rows: Vec<Vec<f64>> = trajectory
        .observations
        .iter()
        .map(|row| row.iter().flatten().map(|&c| c as f64).collect())
        .collect();
    dir.grid("observations.csv", "t", &obs_columns, 1, &obs_rows)?;
    for &t in params.snapshot_times.iter().filter(|&&t| t <= params.horizon) {
        dir.text(
            &format!("network_truth_t{t:02}.svg"),
            &svg::network(&format!("truth, t = {t}"), &net, &truth_rows[t], total),
        )?;
        dir.text(
            &format!("network_estimate_t{t:02}.svg"),
            &svg::network(&format!("estimate, t = {t}"), &net, &estimate_rows[t], total),
        )?;
    }
    dir.json("summary.json", &summary)?;

    Ok(NetworkRun {
        summary,
        trajectory,
        estimate: path,
        files: dir.into_written(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomSummary {
    pub seed: u64,
    pub estimate: EstimateSummary,
    pub l1_error: Vec<f64>,
}

/// Simulates from a user-supplied truth and estimates with a possibly
/// different model.
pub fn run_custom(config: &ExperimentConfig, out: &Path) -> Result<CustomSummary> {
    config.validate()?;
    let custom = config.custom.as_ref().ok_or_else(|| bad("custom", "missing section"))?;
    let truth: SimulationSpec = read_json(&custom.truth)?;
    let model: SimulationSpec = match &custom.model {
        Some(path) => read_json(path)?,
        None => truth.clone(),
    };
    let trajectory = simulate(&truth.prior, &truth.transition, &truth.sensors, truth.horizon, config.seed)?;
    let total = truth.prior.total();
    let start = match config.prior_mode {
        PriorMode::True => truth.prior.clone(),
        PriorMode::Uniform => Marginal::uniform(truth.prior.len(), total),
    };
    let est = estimate_flow_multi(
        &trajectory.to_instance(start.clone(), model.transition, model.sensors),
        &config.estimator_options(),
    )?;
    let path = estimate_path(&start, &est);
    let summary = CustomSummary {
        seed: config.seed,
        estimate: EstimateSummary::of(&est, total),
        l1_error: (1..=truth.horizon)
            .map(|t| l1(path[t].mass(), trajectory.marginal(t).mass()))
            .collect(),
    };
    let mut dir = OutputDir::create(out)?;
    let states = state_columns("x", truth.prior.len());
    dir.grid("truth.csv", "t", &states, 0, &count_rows(&trajectory.marginals))?;
    dir.grid("estimate.csv", "t", &states, 0, &rows(&path))?;
    dir.text("estimate.svg", &svg::heatmap("estimate", &rows(&path)))?;
    dir.json("summary.json", &summary)?;
    Ok(summary)
}

/// Runs the configured experiment into `out`, returning the files written.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<serde_json::Value> {
    Ok(match config.kind {
        ExperimentKind::ParticleCloud => serde_json::to_value(run_particle_cloud(config, out)?.summary)?,
        ExperimentKind::Network => serde_json::to_value(run_network(config, out)?.summary)?,
        ExperimentKind::Custom => serde_json::to_value(run_custom(config, out)?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use output::parse_json;

    #[test]
    fn config_defaults_snapshot() {
        let config: ExperimentConfig = parse_json(r#"{"kind": "particle_cloud"}"#).unwrap();
        assert_eq!(config, ExperimentConfig::new(ExperimentKind::ParticleCloud));
        let snapshot = serde_json::json!({
            "schema": "ensemble-flow/experiment-config/v1",
            "kind": "particle_cloud",
            "particle_cloud": {
                "n": 100, "m": 5, "horizon": 50, "particles": 1000,
                "sigma_true": 0.5, "drift_true": 1.0,
                "sigma_model": 2.0, "drift_model": 0.0,
                "sigma_obs": 0.5, "cloud_center": 10.0, "cloud_std": 3.0
            },
            "network": {"horizon": 20, "agents": 100, "sensors": 7, "snapshot_times": [0, 5, 10, 15, 20]},
            "seed": 1, "tol": 1e-9, "max_sweeps": 100000,
            "prior_mode": "true", "log_domain": "auto", "output_dir": "out"
        });
        assert_eq!(serde_json::to_value(&config).unwrap(), snapshot);
    }

    #[test]
    fn unknown_field_is_a_schema_error() {
        let err = parse_json::<ExperimentConfig>(r#"{"kind": "network", "network": {"agnets": 5}}"#).unwrap_err();
        match err {
            Error::Schema { path, .. } => assert_eq!(path, "network.agnets"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_values_name_their_field() {
        let mut config = ExperimentConfig::new(ExperimentKind::ParticleCloud);
        config.particle_cloud.sigma_obs = 0.0;
        assert!(matches!(config.validate(), Err(Error::Schema { path, .. }) if path == "particle_cloud.sigma_obs"));
        let mut config = ExperimentConfig::new(ExperimentKind::Network);
        config.network.sensors = 9;
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(run_network(&config, dir.path()), Err(Error::Schema { path, .. }) if path == "network.sensors"));
        let config = ExperimentConfig::new(ExperimentKind::Custom);
        assert!(matches!(config.validate(), Err(Error::Schema { path, .. }) if path == "custom"));
    }

    #[test]
    fn default_cloud_holds_all_particles() {
        let prior = cloud_prior(&ParticleCloudParams::default());
        assert_eq!(prior.total(), 1000.0);
        let peak = prior.mass().iter().cloned().fold(0.0, f64::max);
        assert_eq!(prior.mass()[9], peak);
    }

    #[test]
    fn small_particle_cloud_writes_every_panel() {
        let mut config = ExperimentConfig::new(ExperimentKind::ParticleCloud);
        config.particle_cloud = ParticleCloudParams {
            n: 20,
            horizon: 6,
            particles: 200,
            cloud_center: 4.0,
            ..ParticleCloudParams::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let run = run_particle_cloud(&config, dir.path()).unwrap();
        assert_eq!(run.files.len(), 9);
        let truth = std::fs::read_to_string(dir.path().join("truth.csv")).unwrap();
        assert_eq!(truth.lines().count(), 8);
        assert!(truth.starts_with("t,x1,x2,"));
        assert!(run.summary.true_prior.mass_error < 1e-6);
        assert_eq!(run.estimate_uniform_prior[0].mass()[0], 10.0);
    }

    #[test]
    fn network_run_is_deterministic() {
        let mut config = ExperimentConfig::new(ExperimentKind::Network);
        config.network.horizon = 5;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run_network(&config, a.path()).unwrap();
        run_network(&config, b.path()).unwrap();
        for f in &ra.files {
            let name = f.file_name().unwrap();
            assert_eq!(std::fs::read(f).unwrap(), std::fs::read(b.path().join(name)).unwrap());
        }
        assert!(ra.summary.estimate.residual <= 1e-8);
        assert!(ra.files.iter().any(|f| f.ends_with("network_estimate_t05.svg")));
    }
}
