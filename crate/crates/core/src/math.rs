//! Float functions routed through `libm` so the crate builds without `std`.

pub(crate) use libm::{cos, exp, expm1, fabs as abs, sqrt, tanh};

pub(crate) const PI: f64 = core::f64::consts::PI;
