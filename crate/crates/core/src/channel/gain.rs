use crate::error::{Error, Result};

/// Cosines at or below this value have a zero gain derivative.
pub const DELTA_BOUNDARY: f64 = 1e-6;

/// Cosine-power element pattern `G_0 cos^{2p}` on the front hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPattern {
    exponent: f64,
    peak: f64,
    sqrt_peak: f64,
}

impl GainPattern {
    /// Builds a pattern with `G_0 = 2(2p + 1)`; requires `p ≥ 1/2`.
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent >= 0.5) || !exponent.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gain exponent must be finite and at least 0.5, got {exponent}"
            )));
        }
        let peak = 2.0 * (2.0 * exponent + 1.0);
        Ok(Self {
            exponent,
            peak,
            sqrt_peak: peak.sqrt(),
        })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Peak gain `G_0`.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// Gain for a given cosine between boresight and (reversed) propagation direction.
    pub fn gain(&self, cosine: f64) -> f64 {
        if cosine > 0.0 {
            self.peak * cosine.powf(2.0 * self.exponent)
        } else {
            0.0
        }
    }

    /// `√G`, evaluated without squaring and rooting.
    pub fn sqrt_gain(&self, cosine: f64) -> f64 {
        if cosine > 0.0 {
            self.sqrt_peak * cosine.powf(self.exponent)
        } else {
            0.0
        }
    }

    /// `d√G/dc = p √G_0 c^{p−1}`, zero for `c ≤ δ`.
    pub fn sqrt_gain_derivative(&self, cosine: f64) -> f64 {
        if cosine > DELTA_BOUNDARY {
            self.exponent * self.sqrt_peak * cosine.powf(self.exponent - 1.0)
        } else {
            0.0
        }
    }

    /// `(√G, d√G/dc)` in one call.
    pub fn sqrt_gain_with_derivative(&self, cosine: f64) -> (f64, f64) {
        if cosine > DELTA_BOUNDARY {
            let lower = cosine.powf(self.exponent - 1.0);
            let s = self.sqrt_peak * lower * cosine;
            (s, self.exponent * self.sqrt_peak * lower)
        } else {
            (self.sqrt_gain(cosine), 0.0)
        }
    }
}

pub fn element_gain(pattern: &GainPattern, cosine: f64) -> f64 {
    pattern.gain(cosine)
}

pub fn element_gain_sqrt_derivative_factor(pattern: &GainPattern, cosine: f64) -> f64 {
    pattern.sqrt_gain_derivative(cosine)
}
