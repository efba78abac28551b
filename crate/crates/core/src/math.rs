//! Float helpers that behave identically with and without `std`.

/// Round half to even.
#[inline]
pub(crate) fn round_even(x: f64) -> f64 {
    libm::rint(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
