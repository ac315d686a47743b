//! Domain types shared by every stage: problem instances, parameterized
//! families, solutions and strategies (reduced models).

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Row sense. `Le` rows read `a·x <= b`; `Eq` rows are tight at every feasible point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: rows.len(), cols, data }
    }

    /// Builds a matrix from raw parts, leaving dimension checks to `validate_instance`.
    pub fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    fn is_consistent(&self) -> bool {
        self.data.len() == self.rows * self.cols
    }
}

/// Closed interval `[lo, hi]`; either end may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    #[serde(with = "extended_f64")]
    pub lo: f64,
    #[serde(with = "extended_f64")]
    pub hi: f64,
}

impl Bound {
    pub const FREE: Bound = Bound { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn nonneg() -> Self {
        Self { lo: 0.0, hi: f64::INFINITY }
    }

    pub fn binary() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn is_free(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }
}

/// JSON has no infinities; they travel as the strings `"inf"` / `"-inf"`.
pub(crate) mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// One concrete MILP: minimize `c·x` subject to `A x (<=|=) b`, variable
/// bounds and integrality of the variables listed in `integers`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    pub name: String,
    pub c: Vec<f64>,
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub row_sense: Vec<RowSense>,
    /// Sorted indices of integer variables.
    pub integers: Vec<usize>,
    pub bounds: Vec<Bound>,
}

impl MilpInstance {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// Number of integer variables.
    pub fn d(&self) -> usize {
        self.integers.len()
    }

    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m()).map(|i| dot(self.a.row(i), x)).collect()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    pub fn eq_rows(&self) -> Vec<usize> {
        (0..self.m()).filter(|&i| self.row_sense[i] == RowSense::Eq).collect()
    }

    /// Rewrites every finite variable bound as an explicit `Le` row
    /// (`x_j <= hi`, then `-x_j <= -lo`), appended after the existing rows, and
    /// leaves all variables free. Existing row indices are unchanged.
    pub fn materialize_bounds(&self) -> MilpInstance {
        let n = self.n();
        let mut out = self.clone();
        let mut unit = vec![0.0; n];
        for (j, bound) in self.bounds.iter().enumerate() {
            if bound.hi.is_finite() {
                unit[j] = 1.0;
                out.a.push_row(&unit);
                out.b.push(bound.hi);
                out.row_sense.push(RowSense::Le);
            }
            if bound.lo.is_finite() {
                unit[j] = -1.0;
                out.a.push_row(&unit);
                out.b.push(-bound.lo);
                out.row_sense.push(RowSense::Le);
            }
            unit[j] = 0.0;
        }
        out.bounds = vec![Bound::FREE; n];
        out
    }

    pub fn is_integer(&self, j: usize) -> bool {
        self.integers.binary_search(&j).is_ok()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ValidationIssue {
    DimensionMismatch { what: String, expected: usize, found: usize },
    NoVariables,
    DuplicateIntegerIndex(usize),
    UnsortedIntegerIndices,
    IntegerIndexOutOfRange(usize),
    InvertedBound { var: usize, lo: f64, hi: f64 },
    NonFinite { what: String, index: usize },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::DimensionMismatch { what, expected, found } => {
                write!(f, "dimension mismatch in {what}: expected {expected}, found {found}")
            }
            ValidationIssue::NoVariables => write!(f, "instance has no variables"),
            ValidationIssue::DuplicateIntegerIndex(j) => write!(f, "duplicate integer index {j}"),
            ValidationIssue::UnsortedIntegerIndices => write!(f, "integer indices not sorted"),
            ValidationIssue::IntegerIndexOutOfRange(j) => write!(f, "integer index {j} out of range"),
            ValidationIssue::InvertedBound { var, lo, hi } => {
                write!(f, "variable {var} has lo {lo} > hi {hi}")
            }
            ValidationIssue::NonFinite { what, index } => write!(f, "non-finite entry in {what} at {index}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msgs: Vec<String> = self.issues.iter().map(ToString::to_string).collect();
            Err(Error::InvalidInstance(msgs.join("; ")))
        }
    }
}

/// Collects every invariant violation of `inst`. Never fails.
pub fn validate_instance(inst: &MilpInstance) -> ValidationReport {
    let mut issues = Vec::new();
    let n = inst.n();
    let m = inst.m();
    let mismatch = |what: &str, expected: usize, found: usize| ValidationIssue::DimensionMismatch {
        what: what.to_string(),
        expected,
        found,
    };
    if n == 0 {
        issues.push(ValidationIssue::NoVariables);
    }
    if inst.a.cols() != n {
        issues.push(mismatch("A columns vs |c|", n, inst.a.cols()));
    }
    if inst.a.rows() != m {
        issues.push(mismatch("A rows vs |b|", m, inst.a.rows()));
    }
    if !inst.a.is_consistent() {
        issues.push(mismatch("A storage", inst.a.rows() * inst.a.cols(), inst.a.data().len()));
    }
    if inst.row_sense.len() != m {
        issues.push(mismatch("row senses", m, inst.row_sense.len()));
    }
    if inst.bounds.len() != n {
        issues.push(mismatch("variable bounds", n, inst.bounds.len()));
    }
    for w in inst.integers.windows(2) {
        if w[0] == w[1] {
            issues.push(ValidationIssue::DuplicateIntegerIndex(w[0]));
        } else if w[0] > w[1] {
            issues.push(ValidationIssue::UnsortedIntegerIndices);
        }
    }
    for &j in &inst.integers {
        if j >= n {
            issues.push(ValidationIssue::IntegerIndexOutOfRange(j));
        }
    }
    for (j, bd) in inst.bounds.iter().enumerate() {
        if bd.lo > bd.hi || bd.lo.is_nan() || bd.hi.is_nan() {
            issues.push(ValidationIssue::InvertedBound { var: j, lo: bd.lo, hi: bd.hi });
        }
        if bd.lo == f64::INFINITY || bd.hi == f64::NEG_INFINITY {
            issues.push(ValidationIssue::NonFinite { what: "bounds".into(), index: j });
        }
    }
    let mut check = |what: &str, vals: &[f64]| {
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            issues.push(ValidationIssue::NonFinite { what: what.into(), index: i });
        }
    };
    check("c", &inst.c);
    check("b", &inst.b);
    check("A", inst.a.data());
    ValidationReport { issues }
}

/// A single perturbable entry of `θ = <A, c, b>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coordinate {
    Rhs { row: usize },
    Cost { var: usize },
    Matrix { row: usize, col: usize },
}

impl Coordinate {
    pub fn read(&self, inst: &MilpInstance) -> f64 {
        match *self {
            Coordinate::Rhs { row } => inst.b[row],
            Coordinate::Cost { var } => inst.c[var],
            Coordinate::Matrix { row, col } => inst.a.get(row, col),
        }
    }

    pub fn write(&self, inst: &mut MilpInstance, value: f64) {
        match *self {
            Coordinate::Rhs { row } => inst.b[row] = value,
            Coordinate::Cost { var } => inst.c[var] = value,
            Coordinate::Matrix { row, col } => inst.a.set(row, col, value),
        }
    }

    fn in_range(&self, inst: &MilpInstance) -> bool {
        match *self {
            Coordinate::Rhs { row } => row < inst.m(),
            Coordinate::Cost { var } => var < inst.n(),
            Coordinate::Matrix { row, col } => row < inst.a.rows() && col < inst.a.cols(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    UniformBall,
}

/// A fixed MILP structure whose `varying` coordinates are drawn from the
/// Euclidean ball of radius `radius` around the base instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterizedFamily {
    pub base: MilpInstance,
    pub varying: Vec<Coordinate>,
    pub radius: f64,
    #[serde(default)]
    pub sampling: Sampling,
}

impl ParameterizedFamily {
    /// Checks indices and the radius; zero-valued varying entries are reported
    /// by [`ParameterizedFamily::issues`] but do not prevent construction.
    pub fn new(base: MilpInstance, varying: Vec<Coordinate>, radius: f64) -> Result<Self> {
        let family = Self { base, varying, radius, sampling: Sampling::UniformBall };
        let hard: Vec<String> = family
            .issues()
            .into_iter()
            .filter(|issue| !issue.starts_with("zero"))
            .collect();
        if hard.is_empty() {
            Ok(family)
        } else {
            Err(Error::InvalidFamily(hard.join("; ")))
        }
    }

    pub fn issues(&self) -> Vec<String> {
        let mut out: Vec<String> = validate_instance(&self.base)
            .issues
            .iter()
            .map(|i| format!("base instance: {i}"))
            .collect();
        if !(self.radius >= 0.0) || !self.radius.is_finite() {
            out.push(format!("radius must be a nonnegative finite number, got {}", self.radius));
        }
        let mut seen = std::collections::HashSet::new();
        for coord in &self.varying {
            if !coord.in_range(&self.base) {
                out.push(format!("varying coordinate {coord:?} out of range"));
            } else if coord.read(&self.base) == 0.0 {
                out.push(format!("zero base value at varying coordinate {coord:?}"));
            }
            if !seen.insert(*coord) {
                out.push(format!("duplicate varying coordinate {coord:?}"));
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.varying.len()
    }

    /// The varying parameter vector of `inst`.
    pub fn theta_of(&self, inst: &MilpInstance) -> Vec<f64> {
        self.varying.iter().map(|c| c.read(inst)).collect()
    }

    pub fn with_theta(&self, theta: &[f64]) -> MilpInstance {
        let mut inst = self.base.clone();
        for (coord, &v) in self.varying.iter().zip(theta) {
            coord.write(&mut inst, v);
        }
        inst
    }
}

/// Draws `u` uniformly from the ball of radius `r` (Gaussian direction scaled
/// by `r * U^(1/dim)`).
pub fn sample_ball(dim: usize, radius: f64, seed: u64) -> Vec<f64> {
    if dim == 0 || radius == 0.0 {
        return vec![0.0; dim];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dir: Vec<f64> = Vec::with_capacity(dim);
    loop {
        dir.clear();
        dir.extend((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-300 {
            dir.iter_mut().for_each(|v| *v /= norm);
            break;
        }
    }
    let u: f64 = rng.random();
    let scale = radius * u.powf(1.0 / dim as f64);
    dir.into_iter().map(|v| v * scale).collect()
}

/// Deterministic instance draw for `seed`.
pub fn sample_instance(family: &ParameterizedFamily, seed: u64) -> MilpInstance {
    if family.radius == 0.0 || family.varying.is_empty() {
        return family.base.clone();
    }
    let u = sample_ball(family.dim(), family.radius, seed);
    let mut inst = family.base.clone();
    for (coord, du) in family.varying.iter().zip(u) {
        let v = coord.read(&family.base) + du;
        coord.write(&mut inst, v);
    }
    inst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Limit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
}

impl Solution {
    pub fn without_point(status: SolveStatus) -> Self {
        Self { x: Vec::new(), objective: f64::NAN, status }
    }
}

/// A reduced model: the tight rows plus the values of the integer variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    pub tight_set: Vec<usize>,
    pub integer_values: Vec<i64>,
    pub key: String,
}

impl Strategy {
    pub fn new(mut tight_set: Vec<usize>, integer_values: Vec<i64>) -> Self {
        tight_set.sort_unstable();
        tight_set.dedup();
        let key = key_of(&tight_set, &integer_values);
        Self { tight_set, integer_values, key }
    }
}

fn key_of(sorted_tight: &[usize], values: &[i64]) -> String {
    let mut h = Sha256::new();
    h.update(b"T:");
    for i in sorted_tight {
        h.update(i.to_string().as_bytes());
        h.update(b",");
    }
    h.update(b"|I:");
    for v in values {
        h.update(v.to_string().as_bytes());
        h.update(b",");
    }
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Key depending only on the sorted tight set and the exact integer values.
pub fn canonical_strategy_key(s: &Strategy) -> String {
    let mut t = s.tight_set.clone();
    t.sort_unstable();
    t.dedup();
    key_of(&t, &s.integer_values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LibraryOrigin {
    Raw,
    Pruned,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LibraryRepr {
    origin: LibraryOrigin,
    strategies: Vec<Strategy>,
    counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_indices: Option<Vec<usize>>,
}

/// Deduplicated strategy set with stable indices.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "LibraryRepr", into = "LibraryRepr")]
pub struct StrategyLibrary {
    pub origin: LibraryOrigin,
    strategies: Vec<Strategy>,
    /// Number of instances labeled with each strategy.
    counts: Vec<usize>,
    /// For a pruned library, the index of each strategy in the raw library.
    source_indices: Option<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl From<LibraryRepr> for StrategyLibrary {
    fn from(r: LibraryRepr) -> Self {
        let index = r.strategies.iter().enumerate().map(|(i, s)| (s.key.clone(), i)).collect();
        Self {
            origin: r.origin,
            strategies: r.strategies,
            counts: r.counts,
            source_indices: r.source_indices,
            index,
        }
    }
}

impl From<StrategyLibrary> for LibraryRepr {
    fn from(l: StrategyLibrary) -> Self {
        Self {
            origin: l.origin,
            strategies: l.strategies,
            counts: l.counts,
            source_indices: l.source_indices,
        }
    }
}

impl PartialEq for StrategyLibrary {
    fn eq(&self, other: &Self) -> bool {
        self.origin == other.origin
            && self.strategies == other.strategies
            && self.counts == other.counts
            && self.source_indices == other.source_indices
    }
}

impl StrategyLibrary {
    pub fn new_raw() -> Self {
        Self {
            origin: LibraryOrigin::Raw,
            strategies: Vec::new(),
            counts: Vec::new(),
            source_indices: None,
            index: HashMap::new(),
        }
    }

    /// Builds a pruned library from `selected` indices of `raw`, in selection order.
    pub fn pruned_from(raw: &StrategyLibrary, selected: &[usize], counts: Vec<usize>) -> Self {
        let strategies: Vec<Strategy> = selected.iter().map(|&j| raw.strategies[j].clone()).collect();
        let index = strategies.iter().enumerate().map(|(i, s)| (s.key.clone(), i)).collect();
        Self {
            origin: LibraryOrigin::Pruned,
            strategies,
            counts,
            source_indices: Some(selected.to_vec()),
            index,
        }
    }

    /// Adds `s` if unseen and bumps its label count. Returns `(index, newly_added)`.
    pub fn insert(&mut self, s: Strategy) -> (usize, bool) {
        if let Some(&i) = self.index.get(&s.key) {
            self.counts[i] += 1;
            return (i, false);
        }
        let i = self.strategies.len();
        self.index.insert(s.key.clone(), i);
        self.strategies.push(s);
        self.counts.push(1);
        (i, true)
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn get(&self, i: usize) -> &Strategy {
        &self.strategies[i]
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn source_indices(&self) -> Option<&[usize]> {
        self.source_indices.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn knapsack() -> MilpInstance {
        MilpInstance {
            name: "knap2".into(),
            c: vec![-3.0, -2.0],
            a: DenseMatrix::from_rows(&[vec![2.0, 1.0]]),
            b: vec![2.0],
            row_sense: vec![RowSense::Le],
            integers: vec![0, 1],
            bounds: vec![Bound::binary(); 2],
        }
    }

    #[test]
    fn well_formed_instance_has_empty_report() {
        assert!(validate_instance(&knapsack()).is_ok());
    }

    #[test]
    fn short_cost_vector_is_reported() {
        let mut inst = knapsack();
        inst.c.pop();
        let report = validate_instance(&inst);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::DimensionMismatch { .. })));
    }

    #[test]
    fn duplicate_integer_index_is_reported() {
        let mut inst = knapsack();
        inst.integers = vec![0, 0];
        let report = validate_instance(&inst);
        assert!(report.issues.contains(&ValidationIssue::DuplicateIntegerIndex(0)));
    }

    #[test]
    fn inverted_bound_and_nan_are_reported() {
        let mut inst = knapsack();
        inst.bounds[1] = Bound::new(2.0, 1.0);
        inst.b[0] = f64::NAN;
        let report = validate_instance(&inst);
        assert_eq!(report.issues.len(), 2);
    }

    fn family(radius: f64) -> ParameterizedFamily {
        let mut base = knapsack();
        base.b[0] = 2.5;
        ParameterizedFamily::new(
            base,
            vec![Coordinate::Rhs { row: 0 }, Coordinate::Cost { var: 1 }],
            radius,
        )
        .unwrap()
    }

    #[test]
    fn zero_radius_sampling_is_identity() {
        let fam = family(0.0);
        for seed in 0..20 {
            assert_eq!(sample_instance(&fam, seed), fam.base);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let fam = family(0.3);
        let a = sample_instance(&fam, 42);
        let b = sample_instance(&fam, 42);
        assert_eq!(a.b[0].to_bits(), b.b[0].to_bits());
        assert_eq!(a.c[1].to_bits(), b.c[1].to_bits());
        assert_ne!(a, sample_instance(&fam, 43));
    }

    #[test]
    fn ball_samples_match_closed_form_radius_mean() {
        // E||u|| for the uniform 2-D ball of radius r is 2r/3.
        let fam = family(0.1);
        let mut max_norm: f64 = 0.0;
        let mut sum = 0.0;
        let draws = 10_000;
        for seed in 0..draws {
            let inst = sample_instance(&fam, seed);
            let du = [inst.b[0] - fam.base.b[0], inst.c[1] - fam.base.c[1]];
            let norm = (du[0] * du[0] + du[1] * du[1]).sqrt();
            max_norm = max_norm.max(norm);
            sum += norm;
        }
        let mean = sum / draws as f64;
        let expected = 2.0 * 0.1 / 3.0;
        assert!(max_norm <= 0.1 + 1e-12, "max {max_norm}");
        assert!((mean - expected).abs() / expected < 0.02, "mean {mean} vs {expected}");
    }

    #[test]
    fn family_rejects_out_of_range_coordinates() {
        let err = ParameterizedFamily::new(knapsack(), vec![Coordinate::Rhs { row: 7 }], 0.1);
        assert!(err.is_err());
        let err = ParameterizedFamily::new(knapsack(), vec![], -1.0);
        assert!(err.is_err());
    }

    #[test]
    fn zero_entries_are_flagged_not_rejected() {
        let mut base = knapsack();
        base.c[0] = 0.0;
        let fam = ParameterizedFamily::new(base, vec![Coordinate::Cost { var: 0 }], 0.1).unwrap();
        assert_eq!(fam.issues().len(), 1);
    }

    #[test]
    fn strategy_keys_ignore_tight_set_order() {
        let s1 = Strategy::new(vec![0, 3], vec![1, 0]);
        let s2 = Strategy::new(vec![3, 0], vec![1, 0]);
        let s3 = Strategy::new(vec![0, 3], vec![1, 1]);
        assert_eq!(canonical_strategy_key(&s1), canonical_strategy_key(&s2));
        assert_ne!(canonical_strategy_key(&s1), canonical_strategy_key(&s3));
        let unsorted = Strategy { tight_set: vec![3, 0], integer_values: vec![1, 0], key: String::new() };
        assert_eq!(canonical_strategy_key(&unsorted), s1.key);
    }

    #[test]
    fn strategy_key_collision_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = std::collections::HashSet::new();
        let mut keys = std::collections::HashSet::new();
        while seen.len() < 1000 {
            let t: Vec<usize> = (0..50).filter(|_| rng.random_bool(0.2)).collect();
            let v: Vec<i64> = (0..5).map(|_| rng.random_range(-2..3)).collect();
            if seen.insert((t.clone(), v.clone())) {
                keys.insert(Strategy::new(t, v).key);
            }
        }
        assert_eq!(keys.len(), 1000);
    }

    #[test]
    fn materialized_bounds_become_rows() {
        let inst = knapsack().materialize_bounds();
        assert_eq!(inst.m(), 5);
        assert!(inst.bounds.iter().all(Bound::is_free));
        assert_eq!(inst.a.row(1), &[1.0, 0.0]);
        assert_eq!(inst.a.row(2), &[-1.0, 0.0]);
        assert_eq!(inst.b[1..], [1.0, -0.0, 1.0, -0.0]);
    }

    #[test]
    fn library_deduplicates_and_roundtrips() {
        let mut lib = StrategyLibrary::new_raw();
        assert_eq!(lib.insert(Strategy::new(vec![1], vec![0])), (0, true));
        assert_eq!(lib.insert(Strategy::new(vec![2], vec![0])), (1, true));
        assert_eq!(lib.insert(Strategy::new(vec![1], vec![0])), (0, false));
        assert_eq!(lib.counts(), &[2, 1]);
        let text = serde_json::to_string(&lib).unwrap();
        let back: StrategyLibrary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, lib);
        assert_eq!(back.index_of(&lib.get(1).key), Some(1));
    }

    #[test]
    fn infinite_bounds_survive_json() {
        let bd = Bound::new(f64::NEG_INFINITY, 3.0);
        let text = serde_json::to_string(&bd).unwrap();
        assert_eq!(text, r#"{"lo":"-inf","hi":3.0}"#);
        assert_eq!(serde_json::from_str::<Bound>(&text).unwrap(), bd);
    }
}
