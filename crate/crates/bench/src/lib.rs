//! Shared inputs for the benchmarks.

use bundle_lab::{BlaschkeProduct, FunctionSpec};
use num_complex::Complex64 as C;

pub fn pair() -> BlaschkeProduct {
    BlaschkeProduct::new(vec![C::new(0.0, 0.0), C::new(0.5, 0.0)], 0.0).unwrap()
}

/// `(z + 2z³)∘B` with `B` vanishing at `0` and `0.4`.
pub fn composite() -> FunctionSpec {
    let g = FunctionSpec::Poly(vec![C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(2.0, 0.0)]);
    let b = BlaschkeProduct::new(vec![C::new(0.0, 0.0), C::new(0.4, 0.0)], 0.0).unwrap();
    FunctionSpec::compose(g, FunctionSpec::Blaschke(b))
}

pub fn figure_polynomial() -> FunctionSpec {
    FunctionSpec::Poly(vec![C::new(2.0, 0.0), C::new(1.0, 0.0), C::new(1.0, 0.0)])
}
