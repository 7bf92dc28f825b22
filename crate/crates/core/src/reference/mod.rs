//! Reference triangle: Raviart-Thomas vector basis, orthonormal scalar basis,
//! polynomial helpers and the affine/Piola element maps.

pub mod geometry;
pub mod polynomial;
pub mod rt;
pub mod scalar;

pub use geometry::ElementGeometry;
pub use rt::{RtBasis, RtTable};
pub use scalar::ScalarBasis;

use crate::error::ElementError;

/// Velocity and pressure bases of the RT_k / P_k^dc pair.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub rt: RtBasis,
    pub scalar: ScalarBasis,
}

impl ReferenceElement {
    pub fn new(k: usize) -> Result<Self, ElementError> {
        Ok(Self { rt: RtBasis::new(k)?, scalar: ScalarBasis::new(k) })
    }

    pub fn degree(&self) -> usize {
        self.rt.degree()
    }
}
