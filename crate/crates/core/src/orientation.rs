//! Maps on operators induced by bipartite operators, and their orientation
//! class under the per-site transpose.
//!
//! Convention: `t` on `C^{d1} ⊗ C^{d2}` induces `φ_t(a) = tr_1(t (aᵀ ⊗ I))`,
//! so `Choi(φ_t) = Σ E_ij ⊗ φ_t(E_ij)` equals `t` entry for entry. With this
//! convention `|Φ+><Φ+|` induces the identity channel divided by `d` and
//! `SWAP/d` the transpose divided by `d`.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{usage, Error, Result};
use crate::random::{hermitian, substream};
use crate::wire::Pair;
use crate::{HermitianOperator, Matrix, C64};

pub const PSD_TOL: f64 = 1e-10;

/// The map `φ_t : L(C^{d1}) → L(C^{d2})`.
#[derive(Clone, Debug)]
pub struct LinearMapOnOperators {
    pub input_dim: usize,
    pub output_dim: usize,
    t: HermitianOperator,
}

impl LinearMapOnOperators {
    pub fn new(t: &HermitianOperator) -> Result<Self> {
        let &[d1, d2] = t.dims() else {
            return usage(format!("a map needs a two-site operator, got dims {:?}", t.dims()));
        };
        Ok(Self { input_dim: d1, output_dim: d2, t: t.clone() })
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.t
    }

    /// `φ(a)_{rs} = Σ_ij a_ij t_{(i,r),(j,s)}`.
    pub fn apply(&self, a: &Matrix) -> Result<Matrix> {
        let (d1, d2) = (self.input_dim, self.output_dim);
        if a.rows() != d1 || a.cols() != d1 {
            return Err(Error::DimensionMismatch { expected: vec![d1, d1], got: vec![a.rows(), a.cols()] });
        }
        let t = self.t.matrix();
        Ok(Matrix::from_fn(d2, d2, |r, s| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d1 {
                for j in 0..d1 {
                    let x = a[(i, j)];
                    if x != C64::new(0.0, 0.0) {
                        acc += x * t[(i * d2 + r, j * d2 + s)];
                    }
                }
            }
            acc
        }))
    }

    /// Largest deviation from `φ(αx + βy) = αφ(x) + βφ(y)` over random panels.
    pub fn linearity_defect(&self, trials: usize, seed: u64) -> f64 {
        (0..trials)
            .into_par_iter()
            .map(|k| {
                let mut rng = substream(seed, k as u64);
                let x: HermitianOperator = hermitian(&[self.input_dim], &mut rng);
                let y: HermitianOperator = hermitian(&[self.input_dim], &mut rng);
                let (alpha, beta) = (C64::new(0.7, -0.2), C64::new(-1.3, 0.4));
                let lhs = self.apply(&x.matrix().scale(alpha).add(&y.matrix().scale(beta))).expect("shape");
                let rhs = self.apply(x.matrix()).expect("shape").scale(alpha).add(&self.apply(y.matrix()).expect("shape").scale(beta));
                lhs.max_abs_diff(&rhs)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Choi matrix `Σ E_ij ⊗ φ_t(E_ij)` of the induced map.
pub fn choi_of(t: &HermitianOperator) -> Result<HermitianOperator> {
    let map = LinearMapOnOperators::new(t)?;
    let (d1, d2) = (map.input_dim, map.output_dim);
    let mut m = Matrix::zeros(d1 * d2, d1 * d2);
    for i in 0..d1 {
        for j in 0..d1 {
            let mut e = Matrix::zeros(d1, d1);
            e[(i, j)] = C64::new(1.0, 0.0);
            let img = map.apply(&e)?;
            for r in 0..d2 {
                for s in 0..d2 {
                    m[(i * d2 + r, j * d2 + s)] = img[(r, s)];
                }
            }
        }
    }
    HermitianOperator::new(t.dims().to_vec(), m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OrientationClass {
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "CO_CP")]
    CoCp,
    #[serde(rename = "BOTH")]
    Both,
    #[serde(rename = "NEITHER")]
    Neither,
}

impl OrientationClass {
    pub fn label(self) -> &'static str {
        match self {
            Self::Cp => "CP",
            Self::CoCp => "CO_CP",
            Self::Both => "BOTH",
            Self::Neither => "NEITHER",
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrientationReport {
    pub class: OrientationClass,
    /// Spectrum of `Choi(t)`, descending.
    pub choi_spectrum: Vec<f64>,
    /// Spectrum of `Choi(t^{T_1})`, descending.
    pub flipped_spectrum: Vec<f64>,
}

impl OrientationReport {
    pub fn choi_min(&self) -> f64 {
        self.choi_spectrum.last().copied().unwrap_or(0.0)
    }

    pub fn flipped_min(&self) -> f64 {
        self.flipped_spectrum.last().copied().unwrap_or(0.0)
    }

    /// The flip that makes the Choi matrix PSD, if any (`Some(None)` when no
    /// flip is needed).
    pub fn psd_flip(&self) -> Option<Option<usize>> {
        match self.class {
            OrientationClass::Cp | OrientationClass::Both => Some(None),
            OrientationClass::CoCp => Some(Some(0)),
            OrientationClass::Neither => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let flip = match self.psd_flip() {
            Some(None) => json!("none"),
            Some(Some(site)) => json!({"transpose_site": site}),
            None => Value::Null,
        };
        json!({
            "class": self.class.label(),
            "choi_min_eigenvalue": self.choi_min(),
            "flipped_min_eigenvalue": self.flipped_min(),
            "tolerance": PSD_TOL,
            "choi_spectrum": self.choi_spectrum,
            "flipped_spectrum": self.flipped_spectrum,
            "psd_flip": flip,
        })
    }
}

pub fn classify_orientation(t: &HermitianOperator) -> Result<OrientationReport> {
    let choi = choi_of(t)?;
    let flipped = choi_of(&t.partial_transpose(0)?)?;
    let choi_spectrum = choi.spectrum().eigenvalues;
    let flipped_spectrum = flipped.spectrum().eigenvalues;
    let cp = choi_spectrum.last().map_or(true, |&l| l >= -PSD_TOL);
    let co = flipped_spectrum.last().map_or(true, |&l| l >= -PSD_TOL);
    let class = match (cp, co) {
        (true, true) => OrientationClass::Both,
        (true, false) => OrientationClass::Cp,
        (false, true) => OrientationClass::CoCp,
        (false, false) => OrientationClass::Neither,
    };
    Ok(OrientationReport { class, choi_spectrum, flipped_spectrum })
}

/// Kraus operators (`d2 × d1`) of `φ_t`, or of `a ↦ φ_t(aᵀ)` when the
/// transpose flip was needed.
#[derive(Clone, Debug)]
pub struct KrausSet {
    pub operators: Vec<Matrix>,
    /// Whether inputs must be transposed: `φ_t(a) = Σ K aᵀ K*`.
    pub flipped: bool,
}

impl KrausSet {
    pub fn apply(&self, a: &Matrix) -> Matrix {
        let input = if self.flipped { a.transpose() } else { a.clone() };
        let d2 = self.operators.first().map_or(0, Matrix::rows);
        self.operators
            .iter()
            .fold(Matrix::zeros(d2, d2), |acc, k| acc.add(&k.matmul(&input).matmul(&k.adjoint())))
    }

    /// `Σ K* K`.
    pub fn gram(&self) -> Matrix {
        let d1 = self.operators.first().map_or(0, Matrix::cols);
        self.operators.iter().fold(Matrix::zeros(d1, d1), |acc, k| acc.add(&k.adjoint().matmul(k)))
    }

    /// Max deviation between this set and `φ_t` on random Hermitian inputs.
    pub fn reconstruction_error(&self, t: &HermitianOperator, trials: usize, seed: u64) -> Result<f64> {
        let map = LinearMapOnOperators::new(t)?;
        (0..trials)
            .into_par_iter()
            .map(|k| {
                let mut rng = substream(seed, k as u64);
                let a: HermitianOperator = hermitian(&[map.input_dim], &mut rng);
                Ok::<f64, Error>(self.apply(a.matrix()).max_abs_diff(&map.apply(a.matrix())?))
            })
            .try_reduce(|| 0.0, |x, y| Ok(x.max(y)))
    }

    pub fn to_json(&self) -> Value {
        let ops: Vec<Vec<Vec<Pair>>> = self
            .operators
            .iter()
            .map(|k| (0..k.rows()).map(|r| (0..k.cols()).map(|c| [k[(r, c)].re, k[(r, c)].im]).collect()).collect())
            .collect();
        json!({"flipped": self.flipped, "operators": ops})
    }
}

/// Kraus form from the eigendecomposition of the (flipped if needed) Choi
/// matrix: `K[r][i] = sqrt(λ) u[i·d2 + r]`.
pub fn kraus_factorize(t: &HermitianOperator) -> Result<KrausSet> {
    let report = classify_orientation(t)?;
    let flipped = match report.class {
        OrientationClass::Cp | OrientationClass::Both => false,
        OrientationClass::CoCp => true,
        OrientationClass::Neither => {
            return Err(Error::Unsupported(format!(
                "no orientation gives a completely positive map (Choi minima {:e}, {:e})",
                report.choi_min(),
                report.flipped_min()
            )))
        }
    };
    let source = if flipped { t.partial_transpose(0)? } else { t.clone() };
    let choi = choi_of(&source)?;
    let (d1, d2) = (t.dims()[0], t.dims()[1]);
    let spec = choi.spectrum();
    let cutoff = PSD_TOL.max(1e-14 * spec.max_abs());
    let operators = spec
        .eigenvalues
        .iter()
        .zip(&spec.eigenvectors)
        .filter(|(l, _)| **l > cutoff)
        .map(|(l, u)| {
            let s = l.sqrt();
            Matrix::from_fn(d2, d1, |r, i| u[i * d2 + r] * s)
        })
        .collect();
    Ok(KrausSet { operators, flipped })
}

#[derive(Clone, Debug, Serialize)]
pub struct JordanReport {
    pub trials: usize,
    pub max_disagreement: f64,
}

/// Compares `φ_t(a) + φ_t(aᵀ)` with the same expression for `t^{T_1}` on
/// random Hermitian `a`, each side evaluated from its own operator.
pub fn jordan_symmetrization_check(t: &HermitianOperator, trials: usize, seed: u64) -> Result<JordanReport> {
    let map = LinearMapOnOperators::new(t)?;
    let flipped = LinearMapOnOperators::new(&t.partial_transpose(0)?)?;
    let max_disagreement = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let a: HermitianOperator = hermitian(&[map.input_dim], &mut rng);
            let at = a.matrix().transpose();
            let lhs = map.apply(a.matrix())?.add(&map.apply(&at)?);
            let rhs = flipped.apply(a.matrix())?.add(&flipped.apply(&at)?);
            Ok::<f64, Error>(lhs.max_abs_diff(&rhs))
        })
        .try_reduce(|| 0.0, |x: f64, y: f64| Ok(x.max(y)))?;
    Ok(JordanReport { trials, max_disagreement })
}
