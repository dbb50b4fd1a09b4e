//! Maps that can be applied pointwise to the sphere: rational maps and linearizers.

use crate::error::Result;
use crate::linearization::{GeneralizedLinearizer, Linearizer};
use crate::rational::RationalMap;
use crate::sphere::{Cx, SpherePoint};

/// Pullback depth beyond which a linearizer evaluation is not considered certified.
const MAX_PULLBACK: usize = 256;

pub trait SphereMap: Sync {
    fn apply(&self, z: &SpherePoint) -> Result<SpherePoint>;

    /// Whether `z` lies in the domain where the map is trusted.
    fn certified(&self, _z: &SpherePoint) -> bool {
        true
    }
}

impl SphereMap for RationalMap {
    fn apply(&self, z: &SpherePoint) -> Result<SpherePoint> {
        self.eval(z)
    }
}

impl SphereMap for Linearizer {
    fn apply(&self, z: &SpherePoint) -> Result<SpherePoint> {
        let zeta = z.to_finite().ok_or_else(|| crate::Error::Precondition("linearizer at infinity".into()))?;
        self.eval(zeta)
    }

    fn certified(&self, z: &SpherePoint) -> bool {
        z.to_finite().map(|w| self.pullback_steps(w) <= MAX_PULLBACK).unwrap_or(false)
    }
}

impl SphereMap for GeneralizedLinearizer {
    fn apply(&self, z: &SpherePoint) -> Result<SpherePoint> {
        let zeta = z.to_finite().ok_or_else(|| crate::Error::Precondition("linearizer at infinity".into()))?;
        self.eval(zeta)
    }

    fn certified(&self, z: &SpherePoint) -> bool {
        z.to_finite()
            .map(|w| self.inner.pullback_steps(self.beta * w.powu(self.ell)) <= MAX_PULLBACK)
            .unwrap_or(false)
    }
}

/// Adapter for closures `Cx -> Cx` on finite points.
pub struct FnMap<F>(pub F);

impl<F: Fn(Cx) -> Cx + Sync> SphereMap for FnMap<F> {
    fn apply(&self, z: &SpherePoint) -> Result<SpherePoint> {
        let w = z.to_finite().ok_or_else(|| crate::Error::Precondition("closure map at infinity".into()))?;
        Ok(SpherePoint::finite((self.0)(w)))
    }

    fn certified(&self, z: &SpherePoint) -> bool {
        !z.is_infinity()
    }
}
