//! JSON wire formats shared by the library and the CLI.
//!
//! Complex numbers travel as `[re, im]` pairs; operators are row-major.

use std::path::Path;

use num_complex::Complex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bases::{ProductBasis, ProductState, TwistCertificate, TwistMove, UnentangledBasis};
use crate::error::Result;
use crate::{ComplexVector, HermitianOperator, Matrix, C64};

pub type Pair = [f64; 2];

fn pair(z: &C64) -> Pair {
    [z.re, z.im]
}

fn complex(p: &Pair) -> C64 {
    Complex::new(p[0], p[1])
}

fn pairs(v: &ComplexVector) -> Vec<Pair> {
    v.entries().iter().map(pair).collect()
}

fn vector(p: &[Pair]) -> Result<ComplexVector> {
    ComplexVector::new(p.iter().map(complex).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorJson {
    pub entries: Vec<Pair>,
}

impl From<&ComplexVector> for VectorJson {
    fn from(v: &ComplexVector) -> Self {
        Self { entries: pairs(v) }
    }
}

impl TryFrom<&VectorJson> for ComplexVector {
    type Error = crate::Error;
    fn try_from(j: &VectorJson) -> Result<Self> {
        vector(&j.entries)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dims: Vec<usize>,
    pub entries: Vec<Pair>,
}

impl From<&HermitianOperator> for OperatorJson {
    fn from(t: &HermitianOperator) -> Self {
        Self { dims: t.dims().to_vec(), entries: t.matrix().data().iter().map(pair).collect() }
    }
}

impl TryFrom<&OperatorJson> for HermitianOperator {
    type Error = crate::Error;
    fn try_from(j: &OperatorJson) -> Result<Self> {
        let d: usize = j.dims.iter().product();
        let m = Matrix::from_rows(d, d, j.entries.iter().map(complex).collect())?;
        HermitianOperator::new(j.dims.clone(), m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductStateJson {
    pub factors: Vec<Vec<Pair>>,
}

impl From<&ProductState> for ProductStateJson {
    fn from(s: &ProductState) -> Self {
        Self { factors: s.factors().iter().map(pairs).collect() }
    }
}

impl TryFrom<&ProductStateJson> for ProductState {
    type Error = crate::Error;
    fn try_from(j: &ProductStateJson) -> Result<Self> {
        ProductState::new(j.factors.iter().map(|f| vector(f)).collect::<Result<_>>()?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisJson {
    pub dims: Vec<usize>,
    pub elements: Vec<ProductStateJson>,
}

impl From<&UnentangledBasis> for BasisJson {
    fn from(b: &UnentangledBasis) -> Self {
        Self { dims: b.dims().to_vec(), elements: b.elements().iter().map(Into::into).collect() }
    }
}

impl TryFrom<&BasisJson> for UnentangledBasis {
    type Error = crate::Error;
    fn try_from(j: &BasisJson) -> Result<Self> {
        UnentangledBasis::new(j.dims.clone(), j.elements.iter().map(ProductState::try_from).collect::<Result<_>>()?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductBasisJson {
    pub local_bases: Vec<Vec<Vec<Pair>>>,
}

impl From<&ProductBasis> for ProductBasisJson {
    fn from(b: &ProductBasis) -> Self {
        Self { local_bases: b.local_bases().iter().map(|lb| lb.iter().map(pairs).collect()).collect() }
    }
}

impl TryFrom<&ProductBasisJson> for ProductBasis {
    type Error = crate::Error;
    fn try_from(j: &ProductBasisJson) -> Result<Self> {
        ProductBasis::new(
            j.local_bases
                .iter()
                .map(|lb| lb.iter().map(|v| vector(v)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?,
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoveJson {
    pub site: usize,
    pub pair: [usize; 2],
    pub rotation: [[Pair; 2]; 2],
}

impl From<&TwistMove> for MoveJson {
    fn from(m: &TwistMove) -> Self {
        let r = &m.rotation;
        Self {
            site: m.site,
            pair: [m.pair.0, m.pair.1],
            rotation: [[pair(&r[0][0]), pair(&r[0][1])], [pair(&r[1][0]), pair(&r[1][1])]],
        }
    }
}

impl From<&MoveJson> for TwistMove {
    fn from(j: &MoveJson) -> Self {
        let r = &j.rotation;
        TwistMove {
            site: j.site,
            pair: (j.pair[0], j.pair[1]),
            rotation: [[complex(&r[0][0]), complex(&r[0][1])], [complex(&r[1][0]), complex(&r[1][1])]],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateJson {
    pub moves: Vec<MoveJson>,
    pub initial: BasisJson,
    #[serde(rename = "final")]
    pub final_basis: ProductBasisJson,
}

impl From<&TwistCertificate> for CertificateJson {
    fn from(c: &TwistCertificate) -> Self {
        Self {
            moves: c.moves.iter().map(Into::into).collect(),
            initial: (&c.initial).into(),
            final_basis: (&c.final_basis).into(),
        }
    }
}

impl TryFrom<&CertificateJson> for TwistCertificate {
    type Error = crate::Error;
    fn try_from(j: &CertificateJson) -> Result<Self> {
        Ok(TwistCertificate {
            moves: j.moves.iter().map(Into::into).collect(),
            initial: (&j.initial).try_into()?,
            final_basis: (&j.final_basis).try_into()?,
        })
    }
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_operator(path: impl AsRef<Path>) -> Result<HermitianOperator> {
    let j: OperatorJson = read_json(path)?;
    (&j).try_into()
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::twisted_qutrit_certificate;

    #[test]
    fn certificate_json_shape() {
        let j = CertificateJson::from(&twisted_qutrit_certificate());
        let text = serde_json::to_string(&j).unwrap();
        assert!(text.contains("\"site\":1") && text.contains("\"pair\":[7,8]") && text.contains("\"final\""));
        let back: CertificateJson = serde_json::from_str(&text).unwrap();
        let c = TwistCertificate::try_from(&back).unwrap();
        assert!(c.verify().unwrap());
    }

    #[test]
    fn operator_json_rejects_non_hermitian() {
        let j = OperatorJson { dims: vec![2], entries: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]] };
        assert!(HermitianOperator::try_from(&j).is_err());
        let j = OperatorJson { dims: vec![2], entries: vec![[0.0, 0.0]; 3] };
        assert!(HermitianOperator::try_from(&j).is_err());
    }
}
