pub mod bases;
pub mod coords;
pub mod error;
pub mod fixtures;
pub mod framefn;
pub mod gleason;
pub mod hilbert;
pub mod keller;
pub mod linalg;
pub mod nosig;
pub mod orientation;
pub mod presheaf;
pub mod lp;
pub mod random;
pub mod scalar;
pub mod seesaw;
pub mod wire;

pub use error::{Error, Result};
pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type ComplexVector = hilbert::ComplexVector<f64>;
pub type Matrix = hilbert::Matrix<f64>;
pub type HermitianOperator = hilbert::HermitianOperator<f64>;
pub type Spectrum = hilbert::Spectrum<f64>;

pub type ComplexVector32 = hilbert::ComplexVector<f32>;
pub type Matrix32 = hilbert::Matrix<f32>;
pub type HermitianOperator32 = hilbert::HermitianOperator<f32>;
