//! Branch-and-bound verification of safety properties.
//!
//! A property's input box is bisected recursively. Each subarea is checked
//! by propagating interval bounds through the network and comparing the
//! output intervals with Moore's order: it is *proved* when every unsafe
//! output is provably beaten by some safe output, *violated* when an unsafe
//! output provably beats every safe one and a concrete counterexample is
//! found inside it, and split further otherwise. Subareas that reach the
//! minimum width in every dimension stay *undecided*.
//!
//! The violation rate is the violated plus undecided volume over the volume
//! of the property's box. Undecided mass is counted as violating, so the rate
//! is an upper bound on the probability that a uniformly drawn input from
//! the box selects an unsafe action.
//!
//! Subareas are stored as dyadic cells, a level and an index per dimension,
//! and processed breadth-first, one depth level at a time, in a canonical
//! order. Worker threads only evaluate cells; all accumulation happens
//! sequentially in that canonical order, so reports do not depend on the
//! number of workers.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{BoundScratch, Interval, IntervalBox};
use crate::network::{argmax, Network};
use crate::property::{Condition, PropertyError, SafetyProperty};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error("subarea is not inside the property's input box")]
    OutsideDomain,
    #[error("every dimension is at the minimum width; cannot split")]
    CannotSplit,
    #[error("grid of {points} points exceeds the limit of {limit}")]
    GridTooLarge { points: f64, limit: f64 },
    #[error("invalid verifier configuration: {0}")]
    InvalidConfig(String),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

/// Largest grid [`grid_oracle`] will evaluate.
pub const GRID_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Proved,
    Violated,
    Undecided,
}

/// How the next bisection dimension is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitHeuristic {
    /// Widest dimension relative to the root box; lowest index on ties.
    #[default]
    WidestNormalized,
    /// Cycle through splittable dimensions by depth.
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Smallest subarea width, as a fraction of the root width per dimension.
    pub min_width_fraction: f64,
    /// Budget on the number of subareas checked.
    pub max_subareas: u64,
    /// Random points tried (after the centre) to confirm a violation.
    pub confirm_samples: usize,
    pub workers: usize,
    pub split_heuristic: SplitHeuristic,
    /// Seed for counterexample sampling.
    pub seed: u64,
    /// Counterexamples kept in the report (the first ones in canonical order).
    pub max_counterexamples: usize,
    /// Keep every resolved subarea in the report.
    pub record_subareas: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            min_width_fraction: 1.0 / 1024.0,
            max_subareas: 1 << 22,
            confirm_samples: 32,
            workers: 1,
            split_heuristic: SplitHeuristic::WidestNormalized,
            seed: 0,
            max_counterexamples: 1000,
            record_subareas: false,
        }
    }
}

impl VerifyConfig {
    fn validate(&self) -> Result<(), VerifyError> {
        let f = self.min_width_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(VerifyError::InvalidConfig(format!("min_width_fraction {f} not in (0, 1]")));
        }
        if f < 2f64.powi(-(MAX_LEVEL as i32)) {
            return Err(VerifyError::InvalidConfig(format!(
                "min_width_fraction {f} is below 2^-{MAX_LEVEL}"
            )));
        }
        if self.max_subareas == 0 {
            return Err(VerifyError::InvalidConfig("max_subareas must be positive".into()));
        }
        if self.workers == 0 {
            return Err(VerifyError::InvalidConfig("workers must be positive".into()));
        }
        Ok(())
    }

    /// Number of bisections after which a dimension is at minimum width.
    fn min_width_level(&self) -> u8 {
        (0..=MAX_LEVEL)
            .find(|&l| 2f64.powi(-(l as i32)) <= self.min_width_fraction * (1.0 + WIDTH_TOLERANCE))
            .unwrap_or(MAX_LEVEL)
    }
}

const MAX_LEVEL: u8 = 31;
const WIDTH_TOLERANCE: f64 = 1e-9;

/// A concrete input at which the property fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub input: Vec<f64>,
    pub outputs: Vec<f64>,
    /// Greedy action at `input`.
    pub action: usize,
    /// Subarea the counterexample was found in.
    pub subarea: IntervalBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubareaVerdict {
    #[serde(rename = "box")]
    pub subarea: IntervalBox,
    pub verdict: Verdict,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub property_name: String,
    /// `violated_rate + undecided_rate`.
    pub violation_rate: f64,
    pub proved_rate: f64,
    pub violated_rate: f64,
    pub undecided_rate: f64,
    /// Kept counterexamples in canonical (subarea lower-corner) order.
    pub counterexamples: Vec<Counterexample>,
    /// All counterexamples found, including ones not kept.
    pub counterexample_count: u64,
    pub subareas_examined: u64,
    pub max_depth_reached: u32,
    /// The subarea budget ran out; unexamined mass counts as undecided.
    pub exhausted: bool,
    pub wall_time_secs: f64,
    pub min_width_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subareas: Option<Vec<SubareaVerdict>>,
}

impl VerificationReport {
    pub const CSV_HEADER: &'static str =
        "property,proved,violated,undecided,violation_rate,counterexamples,subareas,time_s";

    /// One CSV row matching [`Self::CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.3}",
            self.property_name,
            self.proved_rate,
            self.violated_rate,
            self.undecided_rate,
            self.violation_rate,
            self.counterexample_count,
            self.subareas_examined,
            self.wall_time_secs
        )
    }
}

/// Output-interval test for one subarea, before concrete confirmation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoundVerdict {
    Proved,
    /// The condition fails everywhere in the subarea if the bounds hold.
    Refuted,
    Unknown,
}

/// Condition compiled for fast checks on output bounds.
enum CompiledCondition {
    Output { index: usize, required: Interval },
    Actions { is_unsafe: Vec<bool> },
}

impl CompiledCondition {
    fn new(condition: &Condition, output_dim: usize) -> Self {
        match condition {
            Condition::OutputBound { output_index, required } => CompiledCondition::Output {
                index: *output_index,
                required: *required,
            },
            Condition::ActionNotSelected { unsafe_actions } => CompiledCondition::Actions {
                is_unsafe: (0..output_dim).map(|i| unsafe_actions.contains(&i)).collect(),
            },
        }
    }

    fn check(&self, lo: &[f64], hi: &[f64]) -> BoundVerdict {
        match self {
            CompiledCondition::Output { index, required } => {
                let y = Interval::from_ordered(lo[*index], hi[*index]);
                if y.is_subset_of(required) {
                    BoundVerdict::Proved
                } else if y.is_disjoint_from(required) {
                    BoundVerdict::Refuted
                } else {
                    BoundVerdict::Unknown
                }
            }
            CompiledCondition::Actions { is_unsafe } => {
                // Proved: every unsafe i has a safe j with hi_i < lo_j, i.e.
                // max unsafe hi < max safe lo. Refuted: some unsafe i has
                // lo_i > hi_j for every safe j, i.e. max unsafe lo > max safe hi.
                let mut unsafe_hi = f64::NEG_INFINITY;
                let mut unsafe_lo = f64::NEG_INFINITY;
                let mut safe_hi = f64::NEG_INFINITY;
                let mut safe_lo = f64::NEG_INFINITY;
                for (i, &u) in is_unsafe.iter().enumerate() {
                    if u {
                        unsafe_hi = unsafe_hi.max(hi[i]);
                        unsafe_lo = unsafe_lo.max(lo[i]);
                    } else {
                        safe_hi = safe_hi.max(hi[i]);
                        safe_lo = safe_lo.max(lo[i]);
                    }
                }
                if unsafe_hi < safe_lo {
                    BoundVerdict::Proved
                } else if unsafe_lo > safe_hi {
                    BoundVerdict::Refuted
                } else {
                    BoundVerdict::Unknown
                }
            }
        }
    }
}

fn check_dims(network: &Network, property: &SafetyProperty) -> Result<(), VerifyError> {
    property.check_dimensions(network.input_dim(), network.output_dim())?;
    Ok(())
}

/// Classifies one subarea. A refuting bound becomes `Violated` only when the
/// box centre concretely selects an unsafe action (or breaks the output
/// bound); otherwise the subarea is `Undecided`.
pub fn check_subarea(network: &Network, subarea: &IntervalBox, property: &SafetyProperty) -> Result<Verdict, VerifyError> {
    check_dims(network, property)?;
    if !subarea.is_subset_of(&property.input_box) {
        return Err(VerifyError::OutsideDomain);
    }
    let compiled = CompiledCondition::new(&property.condition, network.output_dim());
    let mut scratch = BoundScratch::default();
    let (lo, hi) = scratch.propagate(network, &subarea.lower(), &subarea.upper());
    Ok(match compiled.check(lo, hi) {
        BoundVerdict::Proved => Verdict::Proved,
        BoundVerdict::Unknown => Verdict::Undecided,
        BoundVerdict::Refuted => {
            if find_counterexample(network, subarea, property, 0, 0).is_some() {
                Verdict::Violated
            } else {
                Verdict::Undecided
            }
        }
    })
}

/// Evaluates the box centre, then up to `confirm_samples` uniform points
/// drawn with `seed`, and returns the first one that fails the property.
pub fn find_counterexample(
    network: &Network,
    subarea: &IntervalBox,
    property: &SafetyProperty,
    confirm_samples: usize,
    seed: u64,
) -> Option<Counterexample> {
    let test = |x: Vec<f64>| {
        let outputs = network.forward_unchecked(&x);
        property.condition.violated_by(&outputs).then(|| Counterexample {
            action: argmax(&outputs),
            input: x,
            outputs,
            subarea: subarea.clone(),
        })
    };
    if let Some(c) = test(subarea.center()) {
        return Some(c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..confirm_samples {
        let x = sample_point(subarea, &mut rng);
        if let Some(c) = test(x) {
            return Some(c);
        }
    }
    None
}

/// Uniform point in a box; zero-width dimensions take their single value.
pub fn sample_point(b: &IntervalBox, rng: &mut impl Rng) -> Vec<f64> {
    b.dims()
        .iter()
        .map(|d| {
            if d.width() > 0.0 {
                (d.lo() + d.width() * rng.random::<f64>()).clamp(d.lo(), d.hi())
            } else {
                d.lo()
            }
        })
        .collect()
}

/// Chooses the bisection dimension from normalized widths (`None` for
/// dimensions that may not be split). Returns `None` when nothing can be split.
fn choose_split_dim(normalized: &[Option<f64>], heuristic: SplitHeuristic, depth: u32) -> Option<usize> {
    match heuristic {
        SplitHeuristic::WidestNormalized => {
            let mut best: Option<(usize, f64)> = None;
            for (d, w) in normalized.iter().enumerate() {
                if let Some(w) = *w {
                    match best {
                        Some((_, bw)) if w <= bw * (1.0 + WIDTH_TOLERANCE) => {}
                        _ => best = Some((d, w)),
                    }
                }
            }
            best.map(|(d, _)| d)
        }
        SplitHeuristic::RoundRobin => {
            let n = normalized.len();
            let start = depth as usize % n;
            (0..n).map(|k| (start + k) % n).find(|&d| normalized[d].is_some())
        }
    }
}

/// Bisects `subarea` at the midpoint of its widest dimension relative to
/// `original` (lowest index on ties). Dimensions whose normalized width is
/// already at or below `min_width_fraction`, or whose original width is zero,
/// are never split.
pub fn split(
    subarea: &IntervalBox,
    original: &IntervalBox,
    min_width_fraction: f64,
) -> Result<(IntervalBox, IntervalBox), VerifyError> {
    if subarea.dim() != original.dim() {
        return Err(VerifyError::OutsideDomain);
    }
    let normalized: Vec<Option<f64>> = subarea
        .dims()
        .iter()
        .zip(original.dims())
        .map(|(s, o)| {
            if o.width() > 0.0 {
                let w = s.width() / o.width();
                (w > min_width_fraction * (1.0 + WIDTH_TOLERANCE)).then_some(w)
            } else {
                None
            }
        })
        .collect();
    let d = choose_split_dim(&normalized, SplitHeuristic::WidestNormalized, 0).ok_or(VerifyError::CannotSplit)?;
    let iv = subarea.get(d);
    let mid = iv.midpoint();
    let mut left = subarea.clone();
    let mut right = subarea.clone();
    left.set(d, Interval::from_ordered(iv.lo(), mid));
    right.set(d, Interval::from_ordered(mid, iv.hi()));
    Ok((left, right))
}

/// Dyadic subareas of a root box, stored flat: `levels[c * dim + d]` and
/// `indices[c * dim + d]` give cell `c`'s extent in dimension `d` as
/// `[idx, idx + 1] / 2^level` of the root interval.
#[derive(Default)]
struct Frontier {
    dim: usize,
    levels: Vec<u8>,
    indices: Vec<u32>,
}

impl Frontier {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            levels: Vec::new(),
            indices: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.levels.len() / self.dim.max(1)
    }

    fn push(&mut self, levels: &[u8], indices: &[u32]) {
        self.levels.extend_from_slice(levels);
        self.indices.extend_from_slice(indices);
    }

    fn cell(&self, c: usize) -> (&[u8], &[u32]) {
        let r = c * self.dim..(c + 1) * self.dim;
        (&self.levels[r.clone()], &self.indices[r])
    }
}

/// Root geometry shared by all cells.
struct Root {
    lo: Vec<f64>,
    hi: Vec<f64>,
    splittable: Vec<bool>,
    min_level: u8,
}

impl Root {
    fn new(b: &IntervalBox, min_level: u8) -> Self {
        Self {
            lo: b.lower(),
            hi: b.upper(),
            splittable: b.dims().iter().map(|d| d.width() > 0.0).collect(),
            min_level,
        }
    }

    fn bounds_into(&self, levels: &[u8], indices: &[u32], lo: &mut [f64], hi: &mut [f64]) {
        for d in 0..self.lo.len() {
            if !self.splittable[d] || levels[d] == 0 {
                lo[d] = self.lo[d];
                hi[d] = self.hi[d];
                continue;
            }
            let denom = 2f64.powi(i32::from(levels[d]));
            let w = self.hi[d] - self.lo[d];
            let at = |k: u64| {
                if k as f64 >= denom {
                    self.hi[d]
                } else {
                    self.lo[d] + w * (k as f64 / denom)
                }
            };
            let i = u64::from(indices[d]);
            lo[d] = at(i);
            hi[d] = at(i + 1).max(lo[d]);
        }
    }

    fn cell_box(&self, levels: &[u8], indices: &[u32]) -> IntervalBox {
        let mut lo = vec![0.0; self.lo.len()];
        let mut hi = vec![0.0; self.lo.len()];
        self.bounds_into(levels, indices, &mut lo, &mut hi);
        IntervalBox::from_lo_hi(&lo, &hi)
    }

    fn split_dim(&self, levels: &[u8], heuristic: SplitHeuristic) -> Option<usize> {
        let normalized: Vec<Option<f64>> = (0..levels.len())
            .map(|d| {
                (self.splittable[d] && levels[d] < self.min_level).then(|| 2f64.powi(-i32::from(levels[d])))
            })
            .collect();
        choose_split_dim(&normalized, heuristic, depth_of(levels))
    }

    fn volume_fraction(&self, levels: &[u8]) -> f64 {
        let total: i32 = levels
            .iter()
            .zip(&self.splittable)
            .filter(|(_, &s)| s)
            .map(|(&l, _)| i32::from(l))
            .sum();
        2f64.powi(-total)
    }
}

fn depth_of(levels: &[u8]) -> u32 {
    levels.iter().map(|&l| u32::from(l)).sum()
}

fn cell_seed(base: u64, levels: &[u8], indices: &[u32]) -> u64 {
    let mut h = splitmix(base);
    for (&l, &i) in levels.iter().zip(indices) {
        h = splitmix(h ^ (u64::from(l) << 32 | u64::from(i)));
    }
    h
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum CellOutcome {
    Proved,
    Violated(Box<Counterexample>),
    /// At minimum width in every dimension, or refuted without confirmation
    /// at minimum width.
    Undecided,
    Split(usize),
}

struct Worker {
    scratch: BoundScratch,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

struct Job<'a> {
    network: &'a Network,
    property: &'a SafetyProperty,
    compiled: CompiledCondition,
    root: Root,
    config: &'a VerifyConfig,
}

impl Job<'_> {
    fn process(&self, w: &mut Worker, levels: &[u8], indices: &[u32]) -> CellOutcome {
        self.root.bounds_into(levels, indices, &mut w.lo, &mut w.hi);
        let (olo, ohi) = w.scratch.propagate(self.network, &w.lo, &w.hi);
        let verdict = self.compiled.check(olo, ohi);
        match verdict {
            BoundVerdict::Proved => return CellOutcome::Proved,
            BoundVerdict::Refuted => {
                let b = IntervalBox::from_lo_hi(&w.lo, &w.hi);
                let seed = cell_seed(self.config.seed, levels, indices);
                if let Some(c) = find_counterexample(self.network, &b, self.property, self.config.confirm_samples, seed) {
                    return CellOutcome::Violated(Box::new(c));
                }
            }
            BoundVerdict::Unknown => {}
        }
        match self.root.split_dim(levels, self.config.split_heuristic) {
            Some(d) => CellOutcome::Split(d),
            None => CellOutcome::Undecided,
        }
    }
}

/// Max-heap entry ordered by the subarea's lower corner, so the heap top is
/// the canonically *last* kept counterexample.
struct Canonical(Counterexample);

fn canonical_cmp(a: &Counterexample, b: &Counterexample) -> Ordering {
    let key = |c: &Counterexample| (c.subarea.lower(), c.subarea.upper());
    let (al, au) = key(a);
    let (bl, bu) = key(b);
    al.iter()
        .zip(&bl)
        .chain(au.iter().zip(&bu))
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl PartialEq for Canonical {
    fn eq(&self, other: &Self) -> bool {
        canonical_cmp(&self.0, &other.0).is_eq()
    }
}
impl Eq for Canonical {}
impl PartialOrd for Canonical {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Canonical {
    fn cmp(&self, other: &Self) -> Ordering {
        canonical_cmp(&self.0, &other.0)
    }
}

const CHUNK: usize = 1 << 15;

/// Runs branch-and-bound verification of `property` over its input box.
pub fn verify(network: &Network, property: &SafetyProperty, config: &VerifyConfig) -> Result<VerificationReport, VerifyError> {
    config.validate()?;
    check_dims(network, property)?;
    let started = Instant::now();
    let dim = property.input_box.dim();
    let job = Job {
        network,
        property,
        compiled: CompiledCondition::new(&property.condition, network.output_dim()),
        root: Root::new(&property.input_box, config.min_width_level()),
        config,
    };
    let pool = if config.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| VerifyError::Pool(e.to_string()))?,
        )
    } else {
        None
    };
    let new_worker = || Worker {
        scratch: BoundScratch::default(),
        lo: vec![0.0; dim],
        hi: vec![0.0; dim],
    };

    let mut frontier = Frontier::new(dim);
    frontier.push(&vec![0; dim], &vec![0; dim]);
    let (mut proved, mut violated, mut undecided) = (0.0f64, 0.0f64, 0.0f64);
    let mut examined: u64 = 0;
    let mut max_depth = 0u32;
    let mut exhausted = false;
    let mut kept: BinaryHeap<Canonical> = BinaryHeap::new();
    let mut cex_count: u64 = 0;
    let mut subareas = config.record_subareas.then(Vec::new);

    while frontier.len() > 0 {
        let budget = (config.max_subareas - examined).min(frontier.len() as u64) as usize;
        let mut next = Frontier::new(dim);
        let mut start = 0;
        while start < budget {
            let end = (start + CHUNK).min(budget);
            let eval = |w: &mut Worker, c: usize| {
                let (l, i) = frontier.cell(c);
                job.process(w, l, i)
            };
            let outcomes: Vec<CellOutcome> = match &pool {
                Some(pool) => pool.install(|| (start..end).into_par_iter().map_init(new_worker, eval).collect()),
                None => {
                    let mut w = new_worker();
                    (start..end).map(|c| eval(&mut w, c)).collect()
                }
            };
            for (c, outcome) in (start..end).zip(outcomes) {
                let (levels, indices) = frontier.cell(c);
                let depth = depth_of(levels);
                max_depth = max_depth.max(depth);
                let vol = job.root.volume_fraction(levels);
                let mut record = |verdict| {
                    if let Some(s) = subareas.as_mut() {
                        s.push(SubareaVerdict {
                            subarea: job.root.cell_box(levels, indices),
                            verdict,
                            depth,
                        });
                    }
                };
                match outcome {
                    CellOutcome::Proved => {
                        proved += vol;
                        record(Verdict::Proved);
                    }
                    CellOutcome::Undecided => {
                        undecided += vol;
                        record(Verdict::Undecided);
                    }
                    CellOutcome::Violated(cex) => {
                        violated += vol;
                        cex_count += 1;
                        record(Verdict::Violated);
                        if config.max_counterexamples > 0 {
                            kept.push(Canonical(*cex));
                            if kept.len() > config.max_counterexamples {
                                kept.pop();
                            }
                        }
                    }
                    CellOutcome::Split(d) => {
                        let mut l = levels.to_vec();
                        let mut i = indices.to_vec();
                        l[d] += 1;
                        i[d] *= 2;
                        next.push(&l, &i);
                        i[d] += 1;
                        next.push(&l, &i);
                    }
                }
            }
            start = end;
        }
        examined += budget as u64;
        if budget < frontier.len() {
            exhausted = true;
            for c in budget..frontier.len() {
                let (levels, indices) = frontier.cell(c);
                undecided += job.root.volume_fraction(levels);
                if let Some(s) = subareas.as_mut() {
                    s.push(SubareaVerdict {
                        subarea: job.root.cell_box(levels, indices),
                        verdict: Verdict::Undecided,
                        depth: depth_of(levels),
                    });
                }
            }
            // Cells already split this level are unexamined mass too.
            for c in 0..next.len() {
                undecided += job.root.volume_fraction(next.cell(c).0);
            }
            break;
        }
        frontier = next;
    }

    let mut counterexamples: Vec<Counterexample> = kept.into_vec().into_iter().map(|c| c.0).collect();
    counterexamples.sort_by(canonical_cmp);
    Ok(VerificationReport {
        property_name: property.name.clone(),
        violation_rate: violated + undecided,
        proved_rate: proved,
        violated_rate: violated,
        undecided_rate: undecided,
        counterexamples,
        counterexample_count: cex_count,
        subareas_examined: examined,
        max_depth_reached: max_depth,
        exhausted,
        wall_time_secs: started.elapsed().as_secs_f64(),
        min_width_fraction: config.min_width_fraction,
        subareas,
    })
}

/// Fraction of a dense grid over the property's box at which the property
/// fails. Zero-width dimensions contribute a single point; the others use
/// `points_per_dim` evenly spaced points including both endpoints.
pub fn grid_oracle(network: &Network, property: &SafetyProperty, points_per_dim: usize) -> Result<f64, VerifyError> {
    check_dims(network, property)?;
    if points_per_dim == 0 {
        return Err(VerifyError::InvalidConfig("points_per_dim must be positive".into()));
    }
    let b = &property.input_box;
    let free: Vec<usize> = (0..b.dim()).filter(|&d| b.get(d).width() > 0.0).collect();
    let points = (points_per_dim as f64).powi(free.len() as i32);
    if points > GRID_LIMIT {
        return Err(VerifyError::GridTooLarge {
            points,
            limit: GRID_LIMIT,
        });
    }
    let coord = |d: usize, k: usize| {
        let iv = b.get(d);
        if points_per_dim == 1 {
            iv.midpoint()
        } else if k + 1 == points_per_dim {
            iv.hi()
        } else {
            iv.lo() + iv.width() * (k as f64 / (points_per_dim - 1) as f64)
        }
    };
    let mut x = b.lower();
    let mut counter = vec![0usize; free.len()];
    let mut bad: u64 = 0;
    let total = points as u64;
    for _ in 0..total {
        for (slot, &d) in free.iter().enumerate() {
            x[d] = coord(d, counter[slot]);
        }
        if property.condition.violated_by(&network.forward_unchecked(&x)) {
            bad += 1;
        }
        for c in counter.iter_mut() {
            *c += 1;
            if *c < points_per_dim {
                break;
            }
            *c = 0;
        }
    }
    Ok(bad as f64 / total as f64)
}
