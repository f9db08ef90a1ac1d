//! Small numerical building blocks shared by the analysis modules.

pub mod interp;
pub mod linalg;
pub mod ode;
pub mod quad;
pub mod sequence;

pub use interp::HermiteTable;
pub use ode::{dopri5, OdeError, OdeOptions, OdeSolution};
pub use quad::{gauss_kronrod, gauss_legendre, GaussLegendre};
pub use sequence::Halton;

/// Max-norm of a slice.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Logarithmic mean `(a - b) / (ln a - ln b)` with the limits `L(a, a) = a`
/// and `L(a, 0) = L(0, b) = 0`.
pub fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let r = b / a - 1.0;
    if r.abs() < 1e-4 {
        // a * r / ln(1 + r), expanded about r = 0
        a * (1.0 + r / 2.0 - r * r / 12.0 + r * r * r / 24.0)
    } else {
        (a - b) / (a.ln() - b.ln())
    }
}
