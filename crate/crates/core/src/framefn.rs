//! Frame functions on product states.
//!
//! A frame function assigns a real number to every product state and sums to
//! a constant weight over every product basis. Three kinds are supported:
//! functions induced by an operator (`f(v) = <v|t|v>`), tables sampled on a
//! finite design, and a smooth family that has constant weight but signals.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bases::{ProductBasis, ProductState};
use crate::error::{usage, Error, Result};
use crate::wire::ProductStateJson;
use crate::{ComplexVector, HermitianOperator};

/// Values below `-NONNEG_TOL` violate declared non-negativity; values in
/// `(-NONNEG_TOL, 0)` are clipped to zero.
pub const NONNEG_TOL: f64 = 1e-10;

/// Constant-weight but signalling frame function on `C^{d1} ⊗ C^{d2}`:
/// `f(v ⊗ w) = |<v|e1>|² · |<w|R(v) e1>|²`, where `R(v)` rotates the
/// `(e1, e2)` plane of site 2 by `theta · |<v|e2>|²`.
///
/// For each fixed `v` the second factor sums to one over any basis of site 2,
/// so the weight over product bases is one; the site-2 marginal depends on the
/// site-1 basis whenever `theta != 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignallingFamily {
    pub dims: [usize; 2],
    pub theta: f64,
}

impl SignallingFamily {
    fn value(&self, v: &ComplexVector, w: &ComplexVector) -> f64 {
        let a = v[0].norm_sqr();
        let angle = self.theta * v[1].norm_sqr();
        let (s, c) = angle.sin_cos();
        let b = (w[0].conj() * c + w[1].conj() * s).norm_sqr();
        a * b
    }
}

/// Frame function values tabulated on a finite set of product states.
#[derive(Clone, Debug)]
pub struct SampleTable {
    dims: Vec<usize>,
    samples: Vec<(ProductState, f64)>,
    index: HashMap<Vec<u64>, usize>,
    nonnegative: bool,
}

impl SampleTable {
    /// Builds a table; duplicates keep the first value. With `nonnegative`
    /// set, values below `-NONNEG_TOL` are rejected and small negatives clipped.
    pub fn new(dims: Vec<usize>, samples: Vec<(ProductState, f64)>, nonnegative: bool) -> Result<Self> {
        let mut index = HashMap::with_capacity(samples.len());
        let mut kept = Vec::with_capacity(samples.len());
        for (s, mut value) in samples {
            if s.dims() != dims {
                return Err(Error::DimensionMismatch { expected: dims, got: s.dims() });
            }
            if !value.is_finite() {
                return Err(Error::Validation("non-finite tabulated value".into()));
            }
            if nonnegative {
                if value < -NONNEG_TOL {
                    return Err(Error::Validation(format!("tabulated value {value:e} is negative")));
                }
                value = value.max(0.0);
            }
            let key = s.key();
            if !index.contains_key(&key) {
                index.insert(key, kept.len());
                kept.push((s, value));
            }
        }
        Ok(Self { dims, samples: kept, index, nonnegative })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn samples(&self) -> &[(ProductState, f64)] {
        &self.samples
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn lookup(&self, s: &ProductState) -> Option<f64> {
        self.index.get(&s.key()).map(|&i| self.samples[i].1)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_json(&self) -> SampleTableJson {
        SampleTableJson {
            dims: self.dims.clone(),
            nonnegative: self.nonnegative,
            samples: self.samples.iter().map(|(s, v)| SampleJson { state: s.into(), value: *v }).collect(),
        }
    }

    pub fn from_json(j: &SampleTableJson) -> Result<Self> {
        let samples = j
            .samples
            .iter()
            .map(|s| Ok((ProductState::try_from(&s.state)?, s.value)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(j.dims.clone(), samples, j.nonnegative)
    }

    /// CSV with header `state,value`; `state` holds the product-state JSON.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "value"])?;
        for (s, v) in &self.samples {
            let state = serde_json::to_string(&ProductStateJson::from(s))?;
            w.write_record([state, format!("{v:?}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, nonnegative: bool) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return usage(format!("expected 2 CSV columns, got {}", rec.len()));
            }
            let state: ProductStateJson = serde_json::from_str(&rec[0])?;
            let value: f64 = rec[1].trim().parse().map_err(|e| Error::Validation(format!("bad value {:?}: {e}", &rec[1])))?;
            samples.push((ProductState::try_from(&state)?, value));
        }
        let Some(first) = samples.first() else {
            return usage("empty sample table");
        };
        let dims = first.0.dims();
        Self::new(dims, samples, nonnegative)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleJson {
    pub state: ProductStateJson,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleTableJson {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub nonnegative: bool,
    pub samples: Vec<SampleJson>,
}

#[derive(Clone, Debug)]
pub enum FrameFunction {
    OperatorInduced { t: HermitianOperator, nonnegative: bool },
    Tabulated(SampleTable),
    Signalling(SignallingFamily),
}

impl FrameFunction {
    pub fn from_operator(t: HermitianOperator) -> Self {
        Self::OperatorInduced { t, nonnegative: false }
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            Self::OperatorInduced { t, .. } => t.dims().to_vec(),
            Self::Tabulated(table) => table.dims.clone(),
            Self::Signalling(s) => s.dims.to_vec(),
        }
    }

    /// The weight the function is expected to have over every product basis.
    pub fn declared_weight(&self) -> Option<f64> {
        match self {
            Self::OperatorInduced { t, .. } => Some(t.trace()),
            Self::Tabulated(_) => None,
            Self::Signalling(_) => Some(1.0),
        }
    }
}

/// `f(s)`.
pub fn evaluate(f: &FrameFunction, s: &ProductState) -> Result<f64> {
    let dims = f.dims();
    if s.dims() != dims {
        return Err(Error::DimensionMismatch { expected: dims, got: s.dims() });
    }
    match f {
        FrameFunction::OperatorInduced { t, nonnegative } => {
            let v = s.vector();
            let z = v.inner(&t.matrix().apply(&v));
            debug_assert!(z.im.abs() <= 1e-10 * (1.0 + t.frobenius_norm()));
            if *nonnegative && z.re < -NONNEG_TOL {
                return Err(Error::Validation(format!("declared non-negative operator takes value {:e}", z.re)));
            }
            Ok(z.re)
        }
        FrameFunction::Tabulated(table) => table.lookup(s).ok_or(Error::LookupMiss),
        FrameFunction::Signalling(sf) => Ok(sf.value(s.factor(0), s.factor(1))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightReport {
    pub sums: Vec<f64>,
    pub spread: f64,
    pub declared_weight: f64,
}

impl WeightReport {
    /// Whether the spread certifies constant weight over the tested bases.
    pub fn is_constant(&self, tol: f64) -> bool {
        self.spread <= tol
    }
}

/// Sums `f` over every element of each product basis.
pub fn weight_check(f: &FrameFunction, bases: &[ProductBasis]) -> Result<WeightReport> {
    if bases.is_empty() {
        return usage("weight check needs at least one basis");
    }
    let sums = bases
        .iter()
        .map(|b| b.elements().iter().map(|e| evaluate(f, e)).sum::<Result<f64>>())
        .collect::<Result<Vec<f64>>>()?;
    let max = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let declared_weight = f.declared_weight().unwrap_or(sums[0]);
    Ok(WeightReport { spread: max - min, sums, declared_weight })
}

#[derive(Clone, Debug)]
pub struct SignallingExample {
    pub f: FrameFunction,
    /// `theta == 0` gives a product, hence non-signalling, member.
    pub degenerate: bool,
}

pub fn make_signalling_example(dims: &[usize], theta: f64) -> Result<SignallingExample> {
    if dims.len() != 2 || dims.iter().any(|&d| d < 2) {
        return usage(format!("signalling family needs two sites of dimension >= 2, got {dims:?}"));
    }
    if !theta.is_finite() {
        return usage("theta must be finite");
    }
    Ok(SignallingExample {
        f: FrameFunction::Signalling(SignallingFamily { dims: [dims[0], dims[1]], theta }),
        degenerate: theta == 0.0,
    })
}

/// Tabulates `<v|t|v>` over the design. With `nonnegative` set, values below
/// `-NONNEG_TOL` are an error.
pub fn sample_from_operator(t: &HermitianOperator, design: &[ProductState], nonnegative: bool) -> Result<FrameFunction> {
    let f = FrameFunction::OperatorInduced { t: t.clone(), nonnegative: false };
    let samples = design.iter().map(|s| Ok((s.clone(), evaluate(&f, s)?))).collect::<Result<Vec<_>>>()?;
    Ok(FrameFunction::Tabulated(SampleTable::new(t.dims().to_vec(), samples, nonnegative)?))
}
