//! Point and grid comparison of two kernel models.
//!
//! A comparison at a basepoint extracts both models' jets, normalizes them,
//! builds the invariant tuples, and decides joint unitary equivalence. An
//! equivalent verdict at `(z, k)` means the order-`k` localizations of the
//! two modeled tuples at `z` are unitarily equivalent; sweeping a grid at
//! `k = n+1` samples the global criterion point by point.

use crate::kernels::{KernelError, KernelModel};
use crate::localization::{extract_invariants, normalize, LocalizationError};
use crate::multiindex::MultiIndex;
use crate::specht::{
    compare_tuples, sufficiency_bound, word_count, EquivalenceVerdict, MatrixTuple, SpechtError,
    SpechtOptions, Status,
};
use crate::{CMatrix, C64};
use rayon::prelude::*;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("models have different ranks: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("models have different variable counts: {0} vs {1}")]
    VarsMismatch(usize, usize),
    #[error("localization order must be at least 2, got {0}")]
    OrderTooSmall(u32),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error(transparent)]
    Specht(#[from] SpechtError),
}

/// Comparison and certificate tolerances.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub comparison: f64,
    pub certificate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            comparison: 1e-8,
            certificate: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CompareOptions {
    pub tolerances: Tolerances,
    /// Trace-word enumeration depth; `None` uses the sufficiency bound for
    /// the model rank (the enumeration is budget-clamped for large tuples).
    pub max_word_len: Option<usize>,
    pub seed: u64,
    /// Attach the invariant matrices to the per-point record.
    pub dump_invariants: bool,
}

impl CompareOptions {
    fn specht_options(&self, rank: usize, members: usize) -> SpechtOptions {
        let defaults = SpechtOptions::default();
        // prove by trace-word bound when the enumeration fits the budget;
        // otherwise screen shallowly and let the certificate search decide
        let auto_len = {
            let bound = sufficiency_bound(rank);
            if word_count(members, bound) <= defaults.word_budget {
                bound
            } else {
                3
            }
        };
        SpechtOptions {
            max_word_len: self.max_word_len.unwrap_or(auto_len),
            trace_tol: self.tolerances.comparison,
            cert_tol: self.tolerances.certificate,
            seed: self.seed,
            ..defaults
        }
    }
}

/// Result of one comparison at one basepoint.
#[derive(Clone, Debug)]
pub struct PointComparison {
    pub basepoint: Vec<C64>,
    pub order_k: u32,
    pub verdict: EquivalenceVerdict,
    /// Best conjugation distance `max ‖M - U M̃ U*‖_F` seen by the search.
    pub distance: f64,
    /// Invariant members `(I, J, matrix)` of both models, when requested.
    pub invariants_a: Option<Vec<(MultiIndex, MultiIndex, CMatrix)>>,
    pub invariants_b: Option<Vec<(MultiIndex, MultiIndex, CMatrix)>>,
    pub timing_ms: f64,
}

fn check_pair(a: &KernelModel, b: &KernelModel, k: u32) -> Result<(), PipelineError> {
    if a.rank() != b.rank() {
        return Err(PipelineError::RankMismatch(a.rank(), b.rank()));
    }
    if a.vars() != b.vars() {
        return Err(PipelineError::VarsMismatch(a.vars(), b.vars()));
    }
    if k < 2 {
        return Err(PipelineError::OrderTooSmall(k));
    }
    Ok(())
}

/// Compare the order-`k` localizations at `z` through the invariant tuples.
pub fn compare_localizations(
    model_a: &KernelModel,
    model_b: &KernelModel,
    z: &[C64],
    k: u32,
    opts: &CompareOptions,
) -> Result<PointComparison, PipelineError> {
    check_pair(model_a, model_b, k)?;
    let start = Instant::now();
    let (norm_a, _) = normalize(&model_a.jet_at(z, k - 1)?)?;
    let (norm_b, _) = normalize(&model_b.jet_at(z, k - 1)?)?;
    let inv_a = extract_invariants(&norm_a, k)?;
    let inv_b = extract_invariants(&norm_b, k)?;
    let tuple_a = inv_a.to_matrix_tuple();
    let tuple_b = inv_b.to_matrix_tuple();
    let out = compare_tuples(
        &tuple_a,
        &tuple_b,
        &opts.specht_options(model_a.rank(), tuple_a.len()),
    )?;
    let collect = |inv: &crate::localization::InvariantSet| {
        inv.members()
            .map(|(i, j, m)| (i.clone(), j.clone(), m.clone()))
            .collect::<Vec<_>>()
    };
    Ok(PointComparison {
        basepoint: z.to_vec(),
        order_k: k,
        verdict: out.verdict,
        distance: out.distance,
        invariants_a: opts.dump_invariants.then(|| collect(&inv_a)),
        invariants_b: opts.dump_invariants.then(|| collect(&inv_b)),
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Alternative route: compare the normalized metric derivatives directly.
///
/// Tests for one constant unitary conjugating every block
/// `D[I][J], (I,J) ≠ (0,0)` of the two normalized jets; must agree in status
/// with [`compare_localizations`].
pub fn compare_via_metric(
    model_a: &KernelModel,
    model_b: &KernelModel,
    z: &[C64],
    k: u32,
    opts: &CompareOptions,
) -> Result<PointComparison, PipelineError> {
    check_pair(model_a, model_b, k)?;
    let start = Instant::now();
    let (norm_a, _) = normalize(&model_a.jet_at(z, k - 1)?)?;
    let (norm_b, _) = normalize(&model_b.jet_at(z, k - 1)?)?;
    let tuple_of = |jet: &crate::jets::GramJet| {
        let ord = jet.ordering();
        let mut members = Vec::new();
        let mut labels = Vec::new();
        for (pi, i) in ord.iter().enumerate() {
            for (pj, j) in ord.iter().enumerate() {
                if pi == 0 && pj == 0 {
                    continue;
                }
                members.push(jet.entry_at(pi, pj).clone());
                labels.push(format!("D{i}{j}"));
            }
        }
        MatrixTuple::with_labels(members, labels).expect("non-empty jet tuple")
    };
    let tuple_a = tuple_of(&norm_a);
    let tuple_b = tuple_of(&norm_b);
    let out = compare_tuples(
        &tuple_a,
        &tuple_b,
        &opts.specht_options(model_a.rank(), tuple_a.len()),
    )?;
    Ok(PointComparison {
        basepoint: z.to_vec(),
        order_k: k,
        verdict: out.verdict,
        distance: out.distance,
        invariants_a: None,
        invariants_b: None,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Evenly spaced real values; a single-count range sits at `min`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn single(value: f64) -> Self {
        AxisRange {
            min: value,
            max: value,
            count: 1,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// One complex coordinate axis of a rectangular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    pub re: AxisRange,
    pub im: AxisRange,
}

impl GridAxis {
    pub fn points(&self) -> Vec<C64> {
        let mut out = Vec::new();
        for re in self.re.values() {
            for im in self.im.values() {
                out.push(C64::new(re, im));
            }
        }
        out
    }
}

/// Basepoints of a comparison: one point, an explicit list, or a grid.
#[derive(Clone, Debug, PartialEq)]
pub enum PointSet {
    Single(Vec<C64>),
    List(Vec<Vec<C64>>),
    Grid(Vec<GridAxis>),
}

impl PointSet {
    /// Deterministic expansion; grid order is axis-0 outermost, real part
    /// before imaginary part within an axis.
    pub fn expand(&self) -> Vec<Vec<C64>> {
        match self {
            PointSet::Single(p) => vec![p.clone()],
            PointSet::List(ps) => ps.clone(),
            PointSet::Grid(axes) => {
                let per_axis: Vec<Vec<C64>> = axes.iter().map(|a| a.points()).collect();
                if per_axis.iter().any(|v| v.is_empty()) {
                    return Vec::new();
                }
                let mut out: Vec<Vec<C64>> = vec![Vec::new()];
                for axis in per_axis {
                    let mut next = Vec::with_capacity(out.len() * axis.len());
                    for prefix in &out {
                        for &value in &axis {
                            let mut p = prefix.clone();
                            p.push(value);
                            next.push(p);
                        }
                    }
                    out = next;
                }
                out
            }
        }
    }
}

/// A full comparison job: two models, basepoints, order and options.
#[derive(Clone, Debug)]
pub struct ComparisonRequest {
    pub model_a: KernelModel,
    pub model_b: KernelModel,
    pub points: PointSet,
    /// Localization order; `None` defaults to rank + 1.
    pub order_k: Option<u32>,
    pub options: CompareOptions,
}

impl ComparisonRequest {
    pub fn resolved_k(&self) -> u32 {
        self.order_k.unwrap_or(self.model_a.rank() as u32 + 1)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let k = self.resolved_k();
        check_pair(&self.model_a, &self.model_b, k)?;
        for (idx, p) in self.points.expand().iter().enumerate() {
            if p.len() != self.model_a.vars() {
                return Err(PipelineError::InvalidRequest(format!(
                    "point {idx} has {} coordinates, models have {} variables",
                    p.len(),
                    self.model_a.vars()
                )));
            }
            if !self.model_a.contains(p) || !self.model_b.contains(p) {
                return Err(PipelineError::InvalidRequest(format!(
                    "point {idx} lies outside a model domain"
                )));
            }
        }
        Ok(())
    }
}

/// Per-point outcome; failures are recorded, not fatal to the sweep.
#[derive(Clone, Debug)]
pub struct PointOutcome {
    pub index: usize,
    pub basepoint: Vec<C64>,
    pub result: Result<PointComparison, String>,
}

#[derive(Clone, Debug, Default)]
pub struct ReportSummary {
    pub total: usize,
    pub equivalent: usize,
    pub inequivalent: usize,
    pub inconclusive: usize,
    pub errors: usize,
    /// True when every evaluated point is equivalent; a sampled statement
    /// about the grid only, vacuously true for an empty grid.
    pub all_equivalent_sampled: bool,
    pub first_inequivalent: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub order_k: u32,
    pub seed: u64,
    pub points: Vec<PointOutcome>,
    pub summary: ReportSummary,
}

/// Run the comparison at every basepoint; points are independent and
/// evaluated in parallel, output order follows the grid index.
pub fn sweep(request: &ComparisonRequest) -> Result<ComparisonReport, PipelineError> {
    request.validate()?;
    let k = request.resolved_k();
    let points = request.points.expand();
    let outcomes: Vec<PointOutcome> = points
        .par_iter()
        .enumerate()
        .map(|(index, z)| PointOutcome {
            index,
            basepoint: z.clone(),
            result: compare_localizations(
                &request.model_a,
                &request.model_b,
                z,
                k,
                &request.options,
            )
            .map_err(|e| e.to_string()),
        })
        .collect();

    let mut summary = ReportSummary {
        total: outcomes.len(),
        all_equivalent_sampled: true,
        ..ReportSummary::default()
    };
    for outcome in &outcomes {
        match &outcome.result {
            Ok(c) => match c.verdict.status {
                Status::Equivalent => summary.equivalent += 1,
                Status::Inequivalent => {
                    summary.inequivalent += 1;
                    summary.all_equivalent_sampled = false;
                    if summary.first_inequivalent.is_none() {
                        summary.first_inequivalent = Some(outcome.index);
                    }
                }
                Status::Inconclusive => {
                    summary.inconclusive += 1;
                    summary.all_equivalent_sampled = false;
                }
            },
            Err(_) => {
                summary.errors += 1;
                summary.all_equivalent_sampled = false;
            }
        }
    }
    Ok(ComparisonReport {
        order_k: k,
        seed: request.options.seed,
        points: outcomes,
        summary,
    })
}

fn format_point(z: &[C64]) -> String {
    let parts: Vec<String> = z
        .iter()
        .map(|c| format!("{:+.4}{:+.4}i", c.re, c.im))
        .collect();
    format!("({})", parts.join(", "))
}

/// Human-readable report summary.
pub fn render_text(report: &ComparisonReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "localization comparison at order k = {} over {} point(s)\n",
        report.order_k, report.summary.total
    ));
    for outcome in &report.points {
        match &outcome.result {
            Ok(c) => out.push_str(&format!(
                "  [{:>3}] z = {:<28} {:<13} distance {:.3e}  ({:.1} ms)\n      {}\n",
                outcome.index,
                format_point(&outcome.basepoint),
                c.verdict.status.to_string(),
                c.distance,
                c.timing_ms,
                c.verdict.reason
            )),
            Err(e) => out.push_str(&format!(
                "  [{:>3}] z = {:<28} error: {}\n",
                outcome.index,
                format_point(&outcome.basepoint),
                e
            )),
        }
    }
    out.push_str(&format!(
        "summary: {} equivalent, {} inequivalent, {} inconclusive, {} error(s)\n",
        report.summary.equivalent,
        report.summary.inequivalent,
        report.summary.inconclusive,
        report.summary.errors
    ));
    out.push_str(&format!(
        "all points equivalent (sampled): {}\n",
        report.summary.all_equivalent_sampled
    ));
    if let Some(first) = report.summary.first_inequivalent {
        out.push_str(&format!("first inequivalent point index: {first}\n"));
    }
    out
}

/// Plot-ready CSV: one row per point with the scalar conjugation distance.
pub fn to_csv(report: &ComparisonReport) -> String {
    let vars = report
        .points
        .first()
        .map(|p| p.basepoint.len())
        .unwrap_or(0);
    let mut out = String::from("index");
    for v in 0..vars {
        out.push_str(&format!(",z{v}_re,z{v}_im"));
    }
    out.push_str(",k,status,distance\n");
    for outcome in &report.points {
        out.push_str(&format!("{}", outcome.index));
        for c in &outcome.basepoint {
            out.push_str(&format!(",{},{}", c.re, c.im));
        }
        match &outcome.result {
            Ok(c) => out.push_str(&format!(
                ",{},{},{}\n",
                report.order_k, c.verdict.status, c.distance
            )),
            Err(_) => out.push_str(&format!(",{},error,\n", report.order_k)),
        }
    }
    out
}
