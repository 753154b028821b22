//! Domain types shared by every solver: marginals, kernels, plans,
//! aggregate observations and the problem instance that ties them together.
//!
//! Constructors only enforce what is needed to hold the data (finite,
//! nonnegative entries and consistent shapes). Stochasticity, mass
//! conservation and cross-object dimensions are reported by
//! [`validate_instance`], which never fails and never mutates.

use std::fmt;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, ensure_len};

/// Rows of a stochastic kernel must sum to one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Relative tolerance for comparing total masses.
pub const MASS_TOL: f64 = 1e-9;

pub const INSTANCE_SCHEMA: &str = "ensemble-flow/problem-instance/v1";

fn check_entries<'a>(what: &str, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    for (k, &x) in values.enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Precondition(format!(
                "{what} entry {k} must be finite and nonnegative, got {x}"
            )));
        }
    }
    Ok(())
}

/// Agent mass per hidden state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Marginal {
    mass: Array1<f64>,
}

impl Marginal {
    pub fn new(mass: impl Into<Array1<f64>>) -> Result<Self> {
        let mass = mass.into();
        check_entries("marginal", mass.iter())?;
        Ok(Self { mass })
    }

    /// Integer counts, converted to reals.
    pub fn from_counts(counts: &[u64]) -> Self {
        Self {
            mass: counts.iter().map(|&c| c as f64).collect(),
        }
    }

    /// `total` spread evenly over `n` states.
    pub fn uniform(n: usize, total: f64) -> Self {
        Self {
            mass: Array1::from_elem(n, total / n as f64),
        }
    }

    pub fn mass(&self) -> &Array1<f64> {
        &self.mass
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.mass.sum()
    }

    pub fn is_integral(&self) -> bool {
        self.mass.iter().all(|x| is_integral(*x))
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.mass.iter().all(|&x| x > 0.0)
    }
}

impl TryFrom<Vec<f64>> for Marginal {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Marginal::new(v)
    }
}

impl From<Marginal> for Vec<f64> {
    fn from(m: Marginal) -> Self {
        m.mass.to_vec()
    }
}

pub(crate) fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0)
}

#[derive(Serialize, Deserialize)]
struct RawKernel {
    rows: usize,
    cols: usize,
    kernel: Vec<Vec<f64>>,
}

fn raw_kernel(kernel: &Array2<f64>) -> RawKernel {
    RawKernel {
        rows: kernel.nrows(),
        cols: kernel.ncols(),
        kernel: matrix::to_rows(kernel),
    }
}

fn kernel_from_raw(raw: RawKernel) -> Result<Array2<f64>> {
    ensure_len("kernel rows", raw.rows, raw.kernel.len())?;
    let m = matrix::from_rows(&raw.kernel)?;
    if raw.rows > 0 {
        ensure_len("kernel cols", raw.cols, m.ncols())?;
    }
    Ok(m)
}

fn renormalize_rows(mut kernel: Array2<f64>) -> Array2<f64> {
    for mut row in kernel.outer_iter_mut() {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
    kernel
}

fn row_sum_errors(kernel: &Array2<f64>) -> Vec<(usize, f64)> {
    kernel
        .outer_iter()
        .enumerate()
        .filter_map(|(i, row)| {
            let s = row.sum();
            ((s - 1.0).abs() > ROW_SUM_TOL).then_some((i, s))
        })
        .collect()
}

/// Row-stochastic `n × n` state transition kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel", into = "RawKernel")]
pub struct TransitionModel {
    kernel: Array2<f64>,
}

impl TransitionModel {
    /// Takes the kernel as given; row sums are checked by [`validate_instance`].
    pub fn new(kernel: Array2<f64>) -> Result<Self> {
        ensure_len("transition kernel (square)", kernel.nrows(), kernel.ncols())?;
        check_entries("transition kernel", kernel.iter())?;
        Ok(Self { kernel })
    }

    /// Divides every nonzero row by its sum before storing it.
    pub fn renormalized(kernel: Array2<f64>) -> Result<Self> {
        Self::new(renormalize_rows(kernel))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            kernel: Array2::eye(n),
        }
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn n(&self) -> usize {
        self.kernel.nrows()
    }

    /// Rows whose sum is off by more than [`ROW_SUM_TOL`], with their sums.
    pub fn row_sum_errors(&self) -> Vec<(usize, f64)> {
        row_sum_errors(&self.kernel)
    }
}

impl TryFrom<RawKernel> for TransitionModel {
    type Error = Error;

    fn try_from(raw: RawKernel) -> Result<Self> {
        Self::new(kernel_from_raw(raw)?)
    }
}

impl From<TransitionModel> for RawKernel {
    fn from(t: TransitionModel) -> Self {
        raw_kernel(&t.kernel)
    }
}

/// Row-stochastic `n × m` emission kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel", into = "RawKernel")]
pub struct ObservationModel {
    kernel: Array2<f64>,
}

impl ObservationModel {
    pub fn new(kernel: Array2<f64>) -> Result<Self> {
        check_entries("observation kernel", kernel.iter())?;
        Ok(Self { kernel })
    }

    pub fn renormalized(kernel: Array2<f64>) -> Result<Self> {
        Self::new(renormalize_rows(kernel))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix::from_rows(rows)?)
    }

    /// Exact state observation (`m = n`).
    pub fn identity(n: usize) -> Self {
        Self {
            kernel: Array2::eye(n),
        }
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn n(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn m(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn row_sum_errors(&self) -> Vec<(usize, f64)> {
        row_sum_errors(&self.kernel)
    }
}

impl TryFrom<RawKernel> for ObservationModel {
    type Error = Error;

    fn try_from(raw: RawKernel) -> Result<Self> {
        Self::new(kernel_from_raw(raw)?)
    }
}

impl From<ObservationModel> for RawKernel {
    fn from(o: ObservationModel) -> Self {
        raw_kernel(&o.kernel)
    }
}

/// Mass moved between consecutive time steps: `flow[i][j]` leaves state `i`
/// at `t - 1` and arrives in state `j` at `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    pub time_index: usize,
    #[serde(with = "matrix::nested")]
    pub flow: Array2<f64>,
}

/// Assignment of hidden-state mass at time `t` to the symbols of one sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationPlan {
    pub time_index: usize,
    pub sensor_index: usize,
    #[serde(with = "matrix::nested")]
    pub assignment: Array2<f64>,
}

/// Per-symbol counts reported by one sensor at one time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateObservation {
    pub time_index: usize,
    pub sensor_index: usize,
    #[serde(with = "matrix::flat")]
    pub counts: Array1<f64>,
}

fn default_schema() -> String {
    INSTANCE_SCHEMA.to_string()
}

/// Everything needed to estimate a flow: the known initial marginal, the
/// model kernels and a `horizon × sensors` grid of aggregate observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub horizon: usize,
    pub prior: Marginal,
    pub transition: TransitionModel,
    pub sensors: Vec<ObservationModel>,
    /// `observations[t - 1][s]` is the observation of sensor `s` at time `t`.
    pub observations: Vec<Vec<AggregateObservation>>,
}

impl ProblemInstance {
    /// Builds an instance from a `T × S` grid of count vectors, filling in
    /// the time and sensor indices.
    pub fn new(
        prior: Marginal,
        transition: TransitionModel,
        sensors: Vec<ObservationModel>,
        counts: Vec<Vec<Array1<f64>>>,
    ) -> Self {
        let horizon = counts.len();
        let observations = counts
            .into_iter()
            .enumerate()
            .map(|(t, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(s, counts)| AggregateObservation {
                        time_index: t + 1,
                        sensor_index: s,
                        counts,
                    })
                    .collect()
            })
            .collect();
        Self {
            schema: default_schema(),
            horizon,
            prior,
            transition,
            sensors,
            observations,
        }
    }

    /// Single-sensor convenience constructor.
    pub fn single_sensor(
        prior: Marginal,
        transition: TransitionModel,
        sensor: ObservationModel,
        counts: Vec<Array1<f64>>,
    ) -> Self {
        Self::new(
            prior,
            transition,
            vec![sensor],
            counts.into_iter().map(|c| vec![c]).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.prior.len()
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.prior.total()
    }

    /// Counts of sensor `s` at time `t` (`1 ≤ t ≤ horizon`).
    pub fn counts(&self, t: usize, s: usize) -> &Array1<f64> {
        &self.observations[t - 1][s].counts
    }

    pub fn with_prior(&self, prior: Marginal) -> Self {
        Self {
            prior,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NegativeOrNonFinite,
    ZeroTotalMass,
    RowSum,
    ZeroRowWithMass,
    Dimension,
    MassMismatch,
    IndexMismatch,
    MissingSensor,
}

/// One broken invariant: which field, at which index, and what was found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub index: Vec<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}: {:?} ({})", self.field, self.index, self.kind, self.detail)
    }
}

fn violation(field: &str, index: Vec<usize>, kind: ViolationKind, detail: String) -> Violation {
    Violation {
        field: field.to_string(),
        index,
        kind,
        detail,
    }
}

fn entry_violations<'a>(
    field: &str,
    shape: &[usize],
    values: impl Iterator<Item = &'a f64>,
    out: &mut Vec<Violation>,
) {
    for (k, &x) in values.enumerate() {
        if !x.is_finite() || x < 0.0 {
            let index = if shape.len() == 2 {
                vec![k / shape[1], k % shape[1]]
            } else {
                vec![k]
            };
            out.push(violation(
                field,
                index,
                ViolationKind::NegativeOrNonFinite,
                format!("entry is {x}"),
            ));
        }
    }
}

fn kernel_violations(
    field: &str,
    kernel: &Array2<f64>,
    prior: &Array1<f64>,
    out: &mut Vec<Violation>,
) {
    entry_violations(field, kernel.shape(), kernel.iter(), out);
    for (i, row) in kernel.outer_iter().enumerate() {
        let s = row.sum();
        if s == 0.0 {
            if prior.get(i).is_some_and(|&m| m > 0.0) {
                out.push(violation(
                    field,
                    vec![i],
                    ViolationKind::ZeroRowWithMass,
                    format!("row {i} is zero but the prior puts mass {} there", prior[i]),
                ));
            }
        } else if (s - 1.0).abs() > ROW_SUM_TOL {
            out.push(violation(
                field,
                vec![i],
                ViolationKind::RowSum,
                format!("row {i} sums to {s}"),
            ));
        }
    }
}

/// Lists every broken invariant of `instance`. An empty list means the
/// instance is well formed.
pub fn validate_instance(instance: &ProblemInstance) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    let prior = instance.prior.mass();
    let n = prior.len();

    entry_violations("prior", &[n], prior.iter(), &mut out);
    let total = prior.sum();
    if !(total > 0.0) {
        out.push(violation("prior", vec![], ZeroTotalMass, format!("total mass {total}")));
    }

    let a = instance.transition.kernel();
    if a.nrows() != n || a.ncols() != n {
        out.push(violation(
            "transition",
            vec![],
            Dimension,
            format!("kernel is {}x{}, prior has {n} states", a.nrows(), a.ncols()),
        ));
    } else {
        kernel_violations("transition", a, prior, &mut out);
    }

    if instance.sensors.is_empty() {
        out.push(violation("sensors", vec![], MissingSensor, "at least one sensor is required".into()));
    }
    for (s, sensor) in instance.sensors.iter().enumerate() {
        let b = sensor.kernel();
        let field = format!("sensors[{s}]");
        if b.nrows() != n {
            out.push(violation(
                &field,
                vec![s],
                Dimension,
                format!("kernel has {} rows, expected {n}", b.nrows()),
            ));
            continue;
        }
        // zero rows in B are only harmless where no mass can ever be
        kernel_violations(&field, b, &Array1::from_elem(n, 1.0), &mut out);
    }

    if instance.observations.len() != instance.horizon {
        out.push(violation(
            "observations",
            vec![],
            Dimension,
            format!(
                "{} time steps of observations for horizon {}",
                instance.observations.len(),
                instance.horizon
            ),
        ));
    }
    for (t0, row) in instance.observations.iter().enumerate() {
        if row.len() != instance.sensors.len() {
            out.push(violation(
                "observations",
                vec![t0 + 1],
                Dimension,
                format!("{} sensor readings, expected {}", row.len(), instance.sensors.len()),
            ));
        }
        for (s, obs) in row.iter().enumerate() {
            let field = format!("observations[{}][{s}]", t0 + 1);
            if obs.time_index != t0 + 1 || obs.sensor_index != s {
                out.push(violation(
                    &field,
                    vec![t0 + 1, s],
                    IndexMismatch,
                    format!(
                        "labelled (t = {}, s = {}), stored at (t = {}, s = {s})",
                        obs.time_index,
                        obs.sensor_index,
                        t0 + 1
                    ),
                ));
            }
            if let Some(sensor) = instance.sensors.get(s) {
                if obs.counts.len() != sensor.m() {
                    out.push(violation(
                        &field,
                        vec![t0 + 1, s],
                        Dimension,
                        format!("{} symbols, sensor has {}", obs.counts.len(), sensor.m()),
                    ));
                }
            }
            entry_violations(&field, &[obs.counts.len()], obs.counts.iter(), &mut out);
            let observed = obs.counts.sum();
            if (observed - total).abs() > MASS_TOL * total.abs().max(1.0) {
                out.push(violation(
                    &field,
                    vec![t0 + 1, s],
                    MassMismatch,
                    format!("observed mass {observed} differs from prior mass {total}"),
                ));
            }
        }
    }
    out
}

/// Fails with [`Error::InvalidInstance`] unless the instance is well formed.
pub fn ensure_valid(instance: &ProblemInstance) -> Result<()> {
    let violations = validate_instance(instance);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidInstance(violations))
    }
}

/// Expected marginals under the prior dynamics: `result[t] = (Aᵀ)ᵗ μ₀`.
pub fn forward_propagate(
    prior: &Marginal,
    transition: &TransitionModel,
    steps: usize,
) -> Result<Vec<Marginal>> {
    ensure_len("forward_propagate prior", transition.n(), prior.len())?;
    let at = transition.kernel().t();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(prior.clone());
    for _ in 0..steps {
        let next = at.dot(out.last().unwrap().mass());
        out.push(Marginal { mass: next });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_state() -> ProblemInstance {
        let prior = Marginal::new(array![2.0, 1.0]).unwrap();
        let a = TransitionModel::from_rows(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let b = ObservationModel::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        ProblemInstance::single_sensor(prior, a, b, vec![array![1.5, 1.5], array![2.0, 1.0]])
    }

    #[test]
    fn well_formed_instance_has_no_violations() {
        assert_eq!(validate_instance(&two_state()), vec![]);
    }

    #[test]
    fn short_row_is_reported_with_its_index() {
        let mut inst = two_state();
        inst.transition = TransitionModel::from_rows(&[vec![0.7, 0.3], vec![0.4, 0.5]]).unwrap();
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::RowSum);
        assert_eq!(v[0].field, "transition");
        assert_eq!(v[0].index, vec![1]);
    }

    #[test]
    fn observation_mass_mismatch_is_reported() {
        let mut inst = two_state();
        inst.observations[1][0].counts = array![2.0, 2.0];
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::MassMismatch);
        assert_eq!(v[0].index, vec![2, 0]);
    }

    #[test]
    fn zero_row_is_flagged_only_with_prior_mass() {
        let mut inst = two_state();
        inst.transition = TransitionModel::from_rows(&[vec![0.7, 0.3], vec![0.0, 0.0]]).unwrap();
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::ZeroRowWithMass);

        let inst = inst.with_prior(Marginal::new(array![3.0, 0.0]).unwrap());
        assert_eq!(validate_instance(&inst), vec![]);
    }

    #[test]
    fn dimension_and_index_problems_are_reported() {
        let mut inst = two_state();
        inst.observations[0][0].time_index = 7;
        inst.observations[1][0].counts = array![1.0, 1.0, 1.0];
        inst.horizon = 3;
        let kinds: Vec<_> = validate_instance(&inst).iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::IndexMismatch));
        assert!(kinds.contains(&ViolationKind::Dimension));
    }

    #[test]
    fn validation_is_idempotent() {
        let mut inst = two_state();
        inst.transition = TransitionModel::from_rows(&[vec![0.5, 0.3], vec![0.4, 0.6]]).unwrap();
        let before = inst.clone();
        let first = validate_instance(&inst);
        let second = validate_instance(&inst);
        assert_eq!(first, second);
        assert_eq!(inst, before);
    }

    #[test]
    fn renormalization_is_opt_in() {
        let raw = array![[1.0, 3.0], [0.0, 0.0]];
        let strict = TransitionModel::new(raw.clone()).unwrap();
        assert_eq!(strict.row_sum_errors(), vec![(0, 4.0), (1, 0.0)]);
        let fixed = TransitionModel::renormalized(raw).unwrap();
        assert_eq!(fixed.kernel(), &array![[0.25, 0.75], [0.0, 0.0]]);
    }

    #[test]
    fn negative_entries_rejected_at_construction() {
        assert!(Marginal::new(array![1.0, -1.0]).is_err());
        assert!(TransitionModel::new(array![[1.0, f64::NAN], [0.0, 1.0]]).is_err());
        assert!(TransitionModel::new(Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn forward_identity_kernel() {
        let p = Marginal::new(array![1.0, 0.0]).unwrap();
        let out = forward_propagate(&p, &TransitionModel::identity(2), 3).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|m| m.mass() == &array![1.0, 0.0]));
    }

    #[test]
    fn forward_mixing_kernel() {
        let p = Marginal::new(array![2.0, 0.0]).unwrap();
        let a = TransitionModel::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let out = forward_propagate(&p, &a, 1).unwrap();
        assert_eq!(out[0].mass(), &array![2.0, 0.0]);
        assert_eq!(out[1].mass(), &array![1.0, 1.0]);
    }

    #[test]
    fn forward_uniform_fixed_point() {
        let p = Marginal::new(array![1.0, 1.0, 1.0]).unwrap();
        let a = TransitionModel::new(Array2::from_elem((3, 3), 1.0 / 3.0)).unwrap();
        for m in forward_propagate(&p, &a, 5).unwrap() {
            assert!(m.mass().iter().all(|x| (x - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let p = Marginal::new(array![1.0, 1.0, 1.0]).unwrap();
        assert!(forward_propagate(&p, &TransitionModel::identity(2), 1).is_err());
    }

    #[test]
    fn json_round_trip_keeps_dimensions_explicit() {
        let inst = two_state();
        let text = serde_json::to_string(&inst).unwrap();
        assert!(text.contains("\"rows\":2"));
        assert!(text.contains(INSTANCE_SCHEMA));
        let back: ProblemInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn json_rejects_inconsistent_declared_shape() {
        let text = r#"{"rows":2,"cols":3,"kernel":[[1.0,0.0],[0.0,1.0]]}"#;
        assert!(serde_json::from_str::<TransitionModel>(text).is_err());
    }
}
