//! The two synthetic problem families and their samplers.
//!
//! Both problems share one hidden parameter: a product distribution on the
//! hypercube `{±1}^d` with coordinate means `p`, plus one target coordinate
//! `j_i` per person. For *indexed mean estimation* each datum is a raw draw
//! `(x, j)`; for *indexed classification* the label `y` is carried by the
//! target coordinate only: `x_j = w_j * y` for a hidden draw `w`, so `y`
//! correlates with feature `j` and nothing else.
//!
//! Hard instances draw `p` uniformly from `[-lambda, +lambda]^d` and indices
//! uniformly from `[d]`; these are the distributions the tracing attacks are
//! analyzed against. Indices are 0-based everywhere, including serialized
//! records.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("dimension and person count must be positive")]
    EmptyInstance,
    #[error("coordinate mean {value} at position {pos} lies outside [-1, 1]")]
    MeanOutOfRange { pos: usize, value: f64 },
    #[error("index {value} at position {pos} is out of range for dimension {d}")]
    IndexOutOfRange { pos: usize, value: usize, d: usize },
    #[error("lambda must lie in (0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("sample count n must be positive")]
    ZeroSamples,
}

/// Ground truth for both problems: coordinate means `p` in `[-1,1]^d` and
/// per-person target indices `j` in `[d]^t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeanInstanceRecord", into = "MeanInstanceRecord")]
pub struct MeanInstance {
    p: Vec<f64>,
    j: Vec<usize>,
}

impl MeanInstance {
    pub fn new(p: Vec<f64>, j: Vec<usize>) -> Result<Self, TaskError> {
        if p.is_empty() || j.is_empty() {
            return Err(TaskError::EmptyInstance);
        }
        let d = p.len();
        for (pos, &value) in p.iter().enumerate() {
            if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
                return Err(TaskError::MeanOutOfRange { pos, value });
            }
        }
        for (pos, &value) in j.iter().enumerate() {
            if value >= d {
                return Err(TaskError::IndexOutOfRange { pos, value, d });
            }
        }
        Ok(Self { p, j })
    }

    /// Fixed-mean instance: every coordinate mean equals `value`, person `i`
    /// targets coordinate `i mod d`. The deterministic index layout keeps
    /// fixed-mean trials replayable without an instance draw.
    pub fn constant(d: usize, t: usize, value: f64) -> Result<Self, TaskError> {
        if d == 0 || t == 0 {
            return Err(TaskError::EmptyInstance);
        }
        Self::new(vec![value; d], (0..t).map(|i| i % d).collect())
    }

    pub fn d(&self) -> usize {
        self.p.len()
    }

    pub fn t(&self) -> usize {
        self.j.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn j(&self) -> &[usize] {
        &self.j
    }
}

/// Flat serialized form of [`MeanInstance`]; indices are 0-based and floats
/// round-trip bit-exactly (shortest round-trip decimal encoding).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanInstanceRecord {
    pub d: usize,
    pub t: usize,
    pub p: Vec<f64>,
    pub j: Vec<usize>,
}

impl From<MeanInstance> for MeanInstanceRecord {
    fn from(inst: MeanInstance) -> Self {
        Self {
            d: inst.d(),
            t: inst.t(),
            p: inst.p,
            j: inst.j,
        }
    }
}

impl TryFrom<MeanInstanceRecord> for MeanInstance {
    type Error = TaskError;

    fn try_from(rec: MeanInstanceRecord) -> Result<Self, TaskError> {
        if rec.p.len() != rec.d || rec.j.len() != rec.t {
            return Err(TaskError::EmptyInstance);
        }
        MeanInstance::new(rec.p, rec.j)
    }
}

/// One mean-estimation datum: a hypercube point and the owner's target index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstSample {
    pub x: Vec<i8>,
    pub j: usize,
}

/// One classification datum: hypercube point, target index, and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSample {
    pub x: Vec<i8>,
    pub j: usize,
    pub y: i8,
}

/// A metalearning instance: shared means, `t` training indices plus one test
/// index (the last entry), and the half-width `lambda` of the mean range.
/// The t+1 task slots are exchangeable by construction (i.i.d. indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetaInstanceRecord", into = "MetaInstanceRecord")]
pub struct MetaInstance {
    p: Vec<f64>,
    j: Vec<usize>,
    lambda: f64,
}

impl MetaInstance {
    pub fn new(p: Vec<f64>, j: Vec<usize>, lambda: f64) -> Result<Self, TaskError> {
        check_lambda(lambda)?;
        if j.len() < 2 {
            return Err(TaskError::EmptyInstance);
        }
        let inst = MeanInstance::new(p, j)?;
        for (pos, &value) in inst.p.iter().enumerate() {
            if value.abs() > lambda {
                return Err(TaskError::MeanOutOfRange { pos, value });
            }
        }
        Ok(Self {
            p: inst.p,
            j: inst.j,
            lambda,
        })
    }

    pub fn d(&self) -> usize {
        self.p.len()
    }

    /// Number of training tasks (one less than the stored index count).
    pub fn t(&self) -> usize {
        self.j.len() - 1
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn j(&self) -> &[usize] {
        &self.j
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn test_index(&self) -> usize {
        *self.j.last().expect("at least two indices")
    }

    /// The training tasks as a plain mean-estimation instance.
    pub fn train_instance(&self) -> MeanInstance {
        MeanInstance {
            p: self.p.clone(),
            j: self.j[..self.t()].to_vec(),
        }
    }
}

/// Flat serialized form of [`MetaInstance`]; `t` counts training tasks, `j`
/// holds `t + 1` 0-based indices with the test index last.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaInstanceRecord {
    pub d: usize,
    pub t: usize,
    pub lambda: f64,
    pub p: Vec<f64>,
    pub j: Vec<usize>,
}

impl From<MetaInstance> for MetaInstanceRecord {
    fn from(inst: MetaInstance) -> Self {
        Self {
            d: inst.d(),
            t: inst.t(),
            lambda: inst.lambda,
            p: inst.p,
            j: inst.j,
        }
    }
}

impl TryFrom<MetaInstanceRecord> for MetaInstance {
    type Error = TaskError;

    fn try_from(rec: MetaInstanceRecord) -> Result<Self, TaskError> {
        if rec.p.len() != rec.d || rec.j.len() != rec.t + 1 {
            return Err(TaskError::EmptyInstance);
        }
        MetaInstance::new(rec.p, rec.j, rec.lambda)
    }
}

fn check_lambda(lambda: f64) -> Result<(), TaskError> {
    if !lambda.is_finite() || lambda <= 0.0 || lambda > 1.0 {
        return Err(TaskError::InvalidLambda(lambda));
    }
    Ok(())
}

/// Per-coordinate draw rule; exact at the endpoints p = ±1.
enum CoordRule {
    AlwaysPlus,
    AlwaysMinus,
    Threshold(u64),
}

fn coord_rules(p: &[f64]) -> Vec<CoordRule> {
    p.iter()
        .map(|&pk| {
            if pk >= 1.0 {
                CoordRule::AlwaysPlus
            } else if pk <= -1.0 {
                CoordRule::AlwaysMinus
            } else {
                // P(x = +1) = (1 + p)/2, mapped onto the u64 range.
                CoordRule::Threshold((((1.0 + pk) / 2.0) * 2f64.powi(64)) as u64)
            }
        })
        .collect()
}

/// Draws one point of the product distribution with coordinate means `p`.
pub fn sample_x<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Vec<i8> {
    let mut x = vec![0i8; p.len()];
    fill_x(&coord_rules(p), &mut x, rng);
    x
}

fn fill_x<R: Rng + ?Sized>(rules: &[CoordRule], x: &mut [i8], rng: &mut R) {
    for (v, rule) in x.iter_mut().zip(rules) {
        *v = match rule {
            CoordRule::AlwaysPlus => 1,
            CoordRule::AlwaysMinus => -1,
            CoordRule::Threshold(thr) => {
                if rng.next_u64() < *thr {
                    1
                } else {
                    -1
                }
            }
        };
    }
}

/// Zero-mean coordinates are fair bits; packing 64 per RNG word makes the
/// dominant fixed-mean acceptance runs cheap.
fn fill_x_unbiased<R: Rng + ?Sized>(x: &mut [i8], rng: &mut R) {
    for chunk in x.chunks_mut(64) {
        let mut bits = rng.next_u64();
        for v in chunk.iter_mut() {
            *v = if bits & 1 == 1 { 1 } else { -1 };
            bits >>= 1;
        }
    }
}

fn sample_points<R: Rng + ?Sized>(inst: &MeanInstance, count: usize, rng: &mut R) -> Vec<Vec<i8>> {
    let d = inst.d();
    let mut out = Vec::with_capacity(count);
    if inst.p.iter().all(|&v| v == 0.0) {
        for _ in 0..count {
            let mut x = vec![0i8; d];
            fill_x_unbiased(&mut x, rng);
            out.push(x);
        }
    } else {
        let rules = coord_rules(&inst.p);
        for _ in 0..count {
            let mut x = vec![0i8; d];
            fill_x(&rules, &mut x, rng);
            out.push(x);
        }
    }
    out
}

/// Draws `n` mean-estimation samples per person: person `i`'s rows are i.i.d.
/// points of the product distribution, each tagged with `j = inst.j[i]`.
pub fn sample_est_data<R: Rng + ?Sized>(
    inst: &MeanInstance,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<EstSample>>, TaskError> {
    if n == 0 {
        return Err(TaskError::ZeroSamples);
    }
    let t = inst.t();
    let mut points = sample_points(inst, t * n, rng).into_iter();
    Ok((0..t)
        .map(|i| {
            (0..n)
                .map(|_| EstSample {
                    x: points.next().expect("sized above"),
                    j: inst.j[i],
                })
                .collect()
        })
        .collect())
}

/// One sample per person, flattened; the shape the n=1 learners consume.
pub fn sample_est_one<R: Rng + ?Sized>(inst: &MeanInstance, rng: &mut R) -> Vec<EstSample> {
    let points = sample_points(inst, inst.t(), rng);
    points
        .into_iter()
        .zip(inst.j.iter())
        .map(|(x, &j)| EstSample { x, j })
        .collect()
}

/// Draws `n` classification samples per person. Per sample: a hidden draw
/// `w` of the product distribution, a uniform label `y`, and the visible
/// point `x` equal to `w` except at the target coordinate where
/// `x_j = w_j * y`.
pub fn sample_class_data<R: Rng + ?Sized>(
    inst: &MeanInstance,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<ClassSample>>, TaskError> {
    if n == 0 {
        return Err(TaskError::ZeroSamples);
    }
    let t = inst.t();
    let mut points = sample_points(inst, t * n, rng).into_iter();
    Ok((0..t)
        .map(|i| {
            let j = inst.j[i];
            (0..n)
                .map(|_| {
                    let mut x = points.next().expect("sized above");
                    let y: i8 = if rng.next_u64() & 1 == 1 { 1 } else { -1 };
                    x[j] *= y;
                    ClassSample { x, j, y }
                })
                .collect()
        })
        .collect())
}

/// One classification sample per person, flattened.
pub fn sample_class_one<R: Rng + ?Sized>(inst: &MeanInstance, rng: &mut R) -> Vec<ClassSample> {
    sample_class_data(inst, 1, rng)
        .expect("n = 1")
        .into_iter()
        .map(|mut row| row.pop().expect("n = 1"))
        .collect()
}

/// Hard instance for the tracing attacks: coordinate means i.i.d. uniform on
/// `[-lambda, +lambda]`, indices i.i.d. uniform on `[d]`.
pub fn draw_hard_mean_instance<R: Rng + ?Sized>(
    d: usize,
    t: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<MeanInstance, TaskError> {
    check_lambda(lambda)?;
    if d == 0 || t == 0 {
        return Err(TaskError::EmptyInstance);
    }
    let p = (0..d)
        .map(|_| lambda * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let j = (0..t).map(|_| rng.random_range(0..d)).collect();
    MeanInstance::new(p, j)
}

/// Hard metalearning instance: as [`draw_hard_mean_instance`] with `t + 1`
/// i.i.d. indices; the last index belongs to the held-out test task.
pub fn draw_meta_instance<R: Rng + ?Sized>(
    d: usize,
    t: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<MetaInstance, TaskError> {
    let base = draw_hard_mean_instance(d, t + 1, lambda, rng)?;
    MetaInstance::new(base.p, base.j, lambda)
}

/// True iff some index occurs twice.
pub fn has_duplicate_indices(j: &[usize]) -> bool {
    let mut sorted = j.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Exact probability that `t` i.i.d. uniform indices over `[d]` collide:
/// `1 - prod_{i=1}^{t-1} (1 - i/d)`.
pub fn birthday_collision_probability(t: usize, d: usize) -> f64 {
    if t > d {
        return 1.0;
    }
    let mut no_collision = 1.0_f64;
    for i in 1..t {
        no_collision *= 1.0 - i as f64 / d as f64;
    }
    1.0 - no_collision
}
