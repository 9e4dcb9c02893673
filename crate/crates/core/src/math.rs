//! Scalar helpers over `libm` plus the zero-rate-safe integrals used by assembly.

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

const TAYLOR_CUTOFF: f64 = 1e-4;

/// `∫_0^Δ e^{-q τ} dτ = (1 - e^{-qΔ}) / q`, equal to `Δ` at `q = 0`.
pub(crate) fn phi(q: f64, width: f64) -> f64 {
    let x = q * width;
    if x < TAYLOR_CUTOFF {
        width * (1.0 - x / 2.0 + x * x / 6.0)
    } else {
        -expm1(-x) / q
    }
}

/// `∫_0^Δ ∫_{τ0}^Δ e^{-q(τ1-τ0)} dτ1 dτ0 = (e^{-qΔ} + qΔ - 1) / q²`, equal to `Δ²/2` at `q = 0`.
pub(crate) fn psi(q: f64, width: f64) -> f64 {
    let x = q * width;
    if x < TAYLOR_CUTOFF {
        width * width * (0.5 - x / 6.0 + x * x / 24.0)
    } else {
        (expm1(-x) + x) / (q * q)
    }
}

/// Uniform draw in the open interval `(0, 1)`: the midpoint of one of 2^52 equal bins.
pub(crate) fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) / (1u64 << 52) as f64
}
