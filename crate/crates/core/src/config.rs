//! Serde-facing descriptors for models, comparison requests, tuple files
//! and reports.
//!
//! Interchange conventions: complex numbers are `[re, im]` pairs, matrices
//! are arrays of rows of pairs, multi-indices are arrays of non-negative
//! integers.

use crate::jets::GramJet;
use crate::kernels::{FrameMap, KernelError, KernelModel, MatrixPolynomial, PowerSeriesKernel};
use crate::localization::InvariantSet;
use crate::multiindex::MultiIndex;
use crate::pipeline::{
    AxisRange, CompareOptions, ComparisonReport, ComparisonRequest, GridAxis, PointComparison,
    PointSet, Tolerances,
};
use crate::specht::{EquivalenceVerdict, MatrixTuple, SpechtOptions};
use crate::{CMatrix, C64};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid matrix data: {0}")]
    InvalidMatrix(String),
    #[error("invalid point data: {0}")]
    InvalidPoint(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Specht(#[from] crate::specht::SpechtError),
}

/// Matrix as rows of `[re, im]` pairs.
pub type MatrixData = Vec<Vec<[f64; 2]>>;

pub fn encode_complex(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn decode_complex(pair: [f64; 2]) -> C64 {
    C64::new(pair[0], pair[1])
}

pub fn encode_matrix(m: &CMatrix) -> MatrixData {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| encode_complex(m[(r, c)])).collect())
        .collect()
}

pub fn decode_matrix(data: &MatrixData) -> Result<CMatrix, ConfigError> {
    if data.is_empty() {
        return Err(ConfigError::InvalidMatrix("empty matrix".into()));
    }
    let cols = data[0].len();
    if cols == 0 {
        return Err(ConfigError::InvalidMatrix("empty matrix row".into()));
    }
    if data.iter().any(|row| row.len() != cols) {
        return Err(ConfigError::InvalidMatrix("ragged rows".into()));
    }
    Ok(CMatrix::from_fn(data.len(), cols, |r, c| {
        decode_complex(data[r][c])
    }))
}

pub fn encode_point(z: &[C64]) -> Vec<[f64; 2]> {
    z.iter().map(|&c| encode_complex(c)).collect()
}

pub fn decode_point(data: &[[f64; 2]]) -> Vec<C64> {
    data.iter().map(|&p| decode_complex(p)).collect()
}

/// One coefficient of a power-series kernel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerTermSpec {
    pub z_exponents: Vec<u32>,
    pub w_exponents: Vec<u32>,
    pub matrix: MatrixData,
}

/// One coefficient of a polynomial frame change.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyTermSpec {
    pub exponents: Vec<u32>,
    pub matrix: MatrixData,
}

/// Declarative kernel-model descriptor; `variant` selects the shape,
/// composites nest.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ModelSpec {
    ProductPolydisc {
        weights: Vec<f64>,
    },
    Ball {
        vars: usize,
        weight: f64,
    },
    PowerSeries {
        vars: usize,
        rank: usize,
        terms: Vec<PowerTermSpec>,
    },
    DirectSum {
        first: Box<ModelSpec>,
        second: Box<ModelSpec>,
    },
    ConjugateBy {
        inner: Box<ModelSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<MatrixData>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        polynomial: Option<Vec<PolyTermSpec>>,
    },
    Scale {
        inner: Box<ModelSpec>,
        factor: f64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<KernelModel, ConfigError> {
        match self {
            ModelSpec::ProductPolydisc { weights } => {
                Ok(KernelModel::product_polydisc(weights.clone())?)
            }
            ModelSpec::Ball { vars, weight } => Ok(KernelModel::ball(*vars, *weight)?),
            ModelSpec::PowerSeries { vars, rank, terms } => {
                let terms = terms
                    .iter()
                    .map(|t| {
                        Ok((
                            MultiIndex::new(t.z_exponents.clone()),
                            MultiIndex::new(t.w_exponents.clone()),
                            decode_matrix(&t.matrix)?,
                        ))
                    })
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                Ok(KernelModel::PowerSeries(PowerSeriesKernel::new(
                    *vars, *rank, terms,
                )?))
            }
            ModelSpec::DirectSum { first, second } => {
                Ok(KernelModel::direct_sum(first.build()?, second.build()?)?)
            }
            ModelSpec::ConjugateBy {
                inner,
                matrix,
                polynomial,
            } => {
                let inner = inner.build()?;
                let frame = match (matrix, polynomial) {
                    (Some(m), None) => FrameMap::Constant(decode_matrix(m)?),
                    (None, Some(terms)) => {
                        let rank = inner.rank();
                        let terms = terms
                            .iter()
                            .map(|t| {
                                Ok((
                                    MultiIndex::new(t.exponents.clone()),
                                    decode_matrix(&t.matrix)?,
                                ))
                            })
                            .collect::<Result<Vec<_>, ConfigError>>()?;
                        FrameMap::Polynomial(MatrixPolynomial::new(inner.vars(), rank, terms)?)
                    }
                    _ => {
                        return Err(ConfigError::InvalidRequest(
                            "conjugate_by needs exactly one of `matrix` or `polynomial`".into(),
                        ))
                    }
                };
                Ok(KernelModel::conjugate_by(inner, frame)?)
            }
            ModelSpec::Scale { inner, factor } => Ok(KernelModel::scale(inner.build()?, *factor)?),
        }
    }

    pub fn from_model(model: &KernelModel) -> ModelSpec {
        match model {
            KernelModel::ProductPolydisc { weights } => ModelSpec::ProductPolydisc {
                weights: weights.clone(),
            },
            KernelModel::Ball { vars, weight } => ModelSpec::Ball {
                vars: *vars,
                weight: *weight,
            },
            KernelModel::PowerSeries(ps) => ModelSpec::PowerSeries {
                vars: ps.vars(),
                rank: ps.rank(),
                terms: ps
                    .terms()
                    .iter()
                    .map(|(p, q, a)| PowerTermSpec {
                        z_exponents: p.entries().to_vec(),
                        w_exponents: q.entries().to_vec(),
                        matrix: encode_matrix(a),
                    })
                    .collect(),
            },
            KernelModel::DirectSum(a, b) => ModelSpec::DirectSum {
                first: Box::new(Self::from_model(a)),
                second: Box::new(Self::from_model(b)),
            },
            KernelModel::ConjugateBy { inner, frame } => {
                let (matrix, polynomial) = match frame {
                    FrameMap::Constant(m) => (Some(encode_matrix(m)), None),
                    FrameMap::Polynomial(p) => (
                        None,
                        Some(
                            p.terms()
                                .iter()
                                .map(|(e, c)| PolyTermSpec {
                                    exponents: e.entries().to_vec(),
                                    matrix: encode_matrix(c),
                                })
                                .collect(),
                        ),
                    ),
                };
                ModelSpec::ConjugateBy {
                    inner: Box::new(Self::from_model(inner)),
                    matrix,
                    polynomial,
                }
            }
            KernelModel::Scale { inner, factor } => ModelSpec::Scale {
                inner: Box::new(Self::from_model(inner)),
                factor: *factor,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RangeSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxisSpec {
    pub re: RangeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<RangeSpec>,
}

/// Basepoint declaration: a single point, an explicit list, or a grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointsSpec {
    Single { point: Vec<[f64; 2]> },
    List { list: Vec<Vec<[f64; 2]>> },
    Grid { axes: Vec<AxisSpec> },
}

impl PointsSpec {
    pub fn build(&self) -> PointSet {
        match self {
            PointsSpec::Single { point } => PointSet::Single(decode_point(point)),
            PointsSpec::List { list } => {
                PointSet::List(list.iter().map(|p| decode_point(p)).collect())
            }
            PointsSpec::Grid { axes } => PointSet::Grid(
                axes.iter()
                    .map(|a| GridAxis {
                        re: AxisRange {
                            min: a.re.min,
                            max: a.re.max,
                            count: a.re.count,
                        },
                        im: a
                            .im
                            .map(|r| AxisRange {
                                min: r.min,
                                max: r.max,
                                count: r.count,
                            })
                            .unwrap_or_else(|| AxisRange::single(0.0)),
                    })
                    .collect(),
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct TolerancesSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<f64>,
}

/// Top-level configuration document for the comparison commands.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RequestSpec {
    pub model_a: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_b: Option<ModelSpec>,
    pub points: PointsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_invariants: Option<bool>,
}

impl RequestSpec {
    pub fn compare_options(&self) -> CompareOptions {
        let tol = self.tolerances.unwrap_or_default();
        CompareOptions {
            tolerances: Tolerances {
                comparison: tol.comparison.unwrap_or(1e-8),
                certificate: tol.certificate.unwrap_or(1e-6),
            },
            max_word_len: self.word_bound,
            seed: self.seed.unwrap_or(0),
            dump_invariants: self.dump_invariants.unwrap_or(false),
        }
    }

    /// Build the two-model comparison request; `model_b` is required.
    pub fn build_request(&self) -> Result<ComparisonRequest, ConfigError> {
        let model_b = self
            .model_b
            .as_ref()
            .ok_or_else(|| ConfigError::InvalidRequest("`model_b` is required".into()))?;
        Ok(ComparisonRequest {
            model_a: self.model_a.build()?,
            model_b: model_b.build()?,
            points: self.points.build(),
            order_k: self.k,
            options: self.compare_options(),
        })
    }

    /// First declared basepoint, for single-point commands.
    pub fn first_point(&self) -> Result<Vec<C64>, ConfigError> {
        self.points
            .build()
            .expand()
            .into_iter()
            .next()
            .ok_or_else(|| ConfigError::InvalidPoint("no basepoints declared".into()))
    }
}

/// Raw matrix-tuple comparison file for the `specht` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TupleFileSpec {
    pub tuple_a: Vec<MatrixData>,
    pub tuple_b: Vec<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_word_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TupleFileSpec {
    pub fn build(&self) -> Result<(MatrixTuple, MatrixTuple, SpechtOptions), ConfigError> {
        let decode_tuple = |data: &[MatrixData], labels: &Option<Vec<String>>| {
            let members = data
                .iter()
                .map(decode_matrix)
                .collect::<Result<Vec<_>, _>>()?;
            let tuple = match labels {
                Some(l) => MatrixTuple::with_labels(members, l.clone())?,
                None => MatrixTuple::new(members)?,
            };
            Ok::<_, ConfigError>(tuple)
        };
        let a = decode_tuple(&self.tuple_a, &self.labels)?;
        let b = decode_tuple(&self.tuple_b, &self.labels)?;
        let dim = a.dim();
        let opts = SpechtOptions {
            max_word_len: self
                .max_word_len
                .unwrap_or_else(|| crate::specht::sufficiency_bound(dim)),
            trace_tol: self.tol.unwrap_or(1e-8),
            cert_tol: self.certificate_tol.unwrap_or(1e-6),
            seed: self.seed.unwrap_or(0),
            ..SpechtOptions::default()
        };
        Ok((a, b, opts))
    }
}

fn multiindex_json(i: &MultiIndex) -> Value {
    json!(i.entries())
}

pub fn jet_to_json(jet: &GramJet) -> Value {
    let entries: Vec<Value> = jet
        .ordering()
        .iter()
        .flat_map(|i| {
            jet.ordering().iter().map(move |j| {
                json!({
                    "i": multiindex_json(i),
                    "j": multiindex_json(j),
                    "matrix": encode_matrix(jet.entry(i, j)),
                })
            })
        })
        .collect();
    json!({
        "vars": jet.vars(),
        "rank": jet.rank(),
        "order": jet.order(),
        "basepoint": encode_point(jet.basepoint()),
        "entries": entries,
    })
}

pub fn invariants_to_json(inv: &InvariantSet) -> Value {
    let entries: Vec<Value> = inv
        .members()
        .map(|(i, j, m)| {
            json!({
                "i": multiindex_json(i),
                "j": multiindex_json(j),
                "matrix": encode_matrix(m),
            })
        })
        .collect();
    json!({
        "basepoint": encode_point(inv.basepoint()),
        "k": inv.order_k(),
        "vars": inv.vars(),
        "rank": inv.rank(),
        "invariants": entries,
    })
}

pub fn verdict_to_json(verdict: &EquivalenceVerdict) -> Value {
    json!({
        "status": verdict.status.to_string(),
        "reason": verdict.reason,
        "certificate": verdict.certificate.as_ref().map(|c| json!({
            "unitary": encode_matrix(&c.unitary),
            "residual": c.residual,
        })),
        "witness": verdict.witness.as_ref().map(|w| json!({
            "word": w.word.letters().iter()
                .map(|l| json!({"member": l.member, "starred": l.starred}))
                .collect::<Vec<_>>(),
            "value_a": encode_complex(w.value_a),
            "value_b": encode_complex(w.value_b),
        })),
    })
}

pub fn point_comparison_to_json(point: &PointComparison) -> Value {
    let dump = |inv: &Option<Vec<(MultiIndex, MultiIndex, CMatrix)>>| {
        inv.as_ref().map(|entries| {
            entries
                .iter()
                .map(|(i, j, m)| {
                    json!({
                        "i": multiindex_json(i),
                        "j": multiindex_json(j),
                        "matrix": encode_matrix(m),
                    })
                })
                .collect::<Vec<_>>()
        })
    };
    json!({
        "basepoint": encode_point(&point.basepoint),
        "k": point.order_k,
        "verdict": verdict_to_json(&point.verdict),
        "distance": point.distance,
        "invariants_a": dump(&point.invariants_a),
        "invariants_b": dump(&point.invariants_b),
        "timing_ms": point.timing_ms,
    })
}

pub fn report_to_json(report: &ComparisonReport) -> Value {
    json!({
        "k": report.order_k,
        "seed": report.seed,
        "points": report.points.iter().map(|p| json!({
            "index": p.index,
            "basepoint": encode_point(&p.basepoint),
            "result": match &p.result {
                Ok(c) => json!({"ok": point_comparison_to_json(c)}),
                Err(e) => json!({"error": e}),
            },
        })).collect::<Vec<_>>(),
        "summary": {
            "total": report.summary.total,
            "equivalent": report.summary.equivalent,
            "inequivalent": report.summary.inequivalent,
            "inconclusive": report.summary.inconclusive,
            "errors": report.summary.errors,
            "all_equivalent_sampled": report.summary.all_equivalent_sampled,
            "first_inequivalent": report.summary.first_inequivalent,
        },
    })
}
