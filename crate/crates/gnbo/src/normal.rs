//! Numerically stable scalar Gaussian utilities.
//!
//! Everything downstream (EI, LogEI, the whitened stationarity term) is built
//! from these four quantities, so the tails matter: `log_cdf` and the inverse
//! Mills ratio stay finite and accurate far beyond where naive `pdf/cdf`
//! arithmetic underflows.

use libm::erfc;

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// Standard normal CDF via the complementary error function, which keeps full
/// relative accuracy in the lower tail.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `ln Phi(z)`, finite for all finite `z`.
///
/// The erfc route is exact to rounding until `Phi(z)` approaches the
/// subnormal range (z ~ -37); below -30 the classic tail expansion
/// `Phi(z) = phi(z)/(-z) (1 - 1/z^2 + 3/z^4 - ...)` takes over.
pub fn norm_log_cdf(z: f64) -> f64 {
    if z > -30.0 {
        norm_cdf(z).ln()
    } else {
        let inv2 = 1.0 / (z * z);
        let series = inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * 105.0)));
        -0.5 * z * z - LN_SQRT_2PI - (-z).ln() + series.ln_1p()
    }
}

/// Inverse Mills ratio `phi(z) / Phi(-z)`, the hazard function of the
/// standard normal. Evaluated in log space above z = 5 so that `w ~ z` holds
/// without underflow for arbitrarily large z.
pub fn mills_ratio(z: f64) -> f64 {
    if z <= 5.0 {
        norm_pdf(z) / norm_cdf(-z)
    } else {
        (-0.5 * z * z - LN_SQRT_2PI - norm_log_cdf(-z)).exp()
    }
}

/// Bundle returned by [`normal_pdf_cdf`].
#[derive(Debug, Clone, Copy)]
pub struct NormalParts {
    pub pdf: f64,
    pub cdf: f64,
    pub log_cdf: f64,
    /// `phi(z)/Phi(-z)`.
    pub mills: f64,
}

/// All four scalar Gaussian quantities at once.
pub fn normal_pdf_cdf(z: f64) -> NormalParts {
    NormalParts {
        pdf: norm_pdf(z),
        cdf: norm_cdf(z),
        log_cdf: norm_log_cdf(z),
        mills: mills_ratio(z),
    }
}

/// `ln h(u)` for `h(u) = u Phi(u) + phi(u)`, the unit-variance EI kernel.
///
/// Direct evaluation is accurate down to u ~ -30 (erfc carries the tail);
/// below that the asymptotic series `h(u) = phi(u)(u^-2 - 3u^-4 + ...)`
/// avoids the total cancellation of the two terms.
pub fn log_ei_kernel(u: f64) -> f64 {
    if u > -30.0 {
        let h = u * norm_cdf(u) + norm_pdf(u);
        if h > 0.0 {
            h.ln()
        } else {
            f64::NEG_INFINITY
        }
    } else {
        let inv2 = 1.0 / (u * u);
        let series = inv2 * (1.0 + inv2 * (-3.0 + inv2 * (15.0 + inv2 * (-105.0 + inv2 * 945.0))));
        -0.5 * u * u - LN_SQRT_2PI + series.ln()
    }
}
