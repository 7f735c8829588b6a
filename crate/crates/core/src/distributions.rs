//! Seeded sampling and density evaluation for the distributions the samplers
//! need.
//!
//! Wishart and inverse Wishart use the shape/rate style parameterization in
//! which `W(alpha, A)` has density proportional to
//! `|X|^(alpha-(r+1)/2) exp(-tr(A X))` and mean `alpha * A^-1`, and
//! `IW(alpha, A)` has mean `A / (alpha - (r+1)/2)`. This maps onto the
//! textbook degrees-of-freedom convention via `W(alpha, A) = W_df(2 alpha,
//! A^-1 / 2)`; the inverse of a `W(alpha, A)` draw is an `IW(alpha, A)` draw.
//! Gamma uses shape and rate with mean `shape / rate`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::spd::SpdMatrix;

/// Gamma(shape, rate) draw. Shape zero is the limiting point mass at zero,
/// which is what lets Dirichlet draws carry exact zeros.
pub fn draw_gamma(shape: f64, rate: f64, rng: &mut RandomSource) -> Result<f64> {
    if !(shape >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma shape must be >= 0, got {shape}")));
    }
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma rate must be > 0, got {rate}")));
    }
    if shape == 0.0 {
        return Ok(0.0);
    }
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::InvalidParameter(format!("gamma: {e}")))?;
    Ok(g.sample(rng))
}

/// Dirichlet draw by normalized independent gammas; entries with
/// `alpha_j = 0` come out exactly zero.
pub fn draw_dirichlet(alpha: &[f64], rng: &mut RandomSource) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(Error::InvalidParameter("dirichlet: empty alpha".into()));
    }
    if alpha.iter().any(|&a| !(a >= 0.0)) {
        return Err(Error::InvalidParameter("dirichlet: negative or NaN alpha entry".into()));
    }
    if !alpha.iter().any(|&a| a > 0.0) {
        return Err(Error::InvalidParameter("dirichlet: all alpha entries are zero".into()));
    }
    // Tiny shapes can underflow every positive gamma draw to zero; retry.
    for _ in 0..100 {
        let draws: Vec<f64> = alpha
            .iter()
            .map(|&a| draw_gamma(a, 1.0, rng))
            .collect::<Result<_>>()?;
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 {
            return Ok(draws.into_iter().map(|g| g / sum).collect());
        }
    }
    Err(Error::Numerical("dirichlet: gamma draws underflowed to zero repeatedly".into()))
}

/// Draw an index with probability proportional to the (unnormalized)
/// weights. Returns a zero-based index into `weights`.
pub fn draw_categorical(weights: &[f64], rng: &mut RandomSource) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter("categorical: empty weights".into()));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidParameter("categorical: negative or NaN weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "categorical: weights must have positive finite sum, got {total}"
        )));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Ok(k);
        }
    }
    // Fell through on rounding; return the last positive-weight index.
    Ok(weights.iter().rposition(|&w| w > 0.0).unwrap())
}

/// Multivariate normal draw `mean + L z` with `L` the lower Cholesky factor.
pub fn draw_mvn(mean: &DVector<f64>, cov: &SpdMatrix, rng: &mut RandomSource) -> Result<DVector<f64>> {
    let r = cov.dim();
    if mean.len() != r {
        return Err(Error::InvalidParameter(format!(
            "mvn: mean length {} does not match covariance dim {r}",
            mean.len()
        )));
    }
    let z = DVector::from_iterator(r, (0..r).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok(mean + cov.chol_lower() * z)
}

/// Wishart draw under the convention with mean `alpha * A^-1`, via the
/// Bartlett decomposition of the equivalent `W_df(2 alpha, A^-1 / 2)`.
pub fn draw_wishart(alpha: f64, scale: &SpdMatrix, rng: &mut RandomSource) -> Result<SpdMatrix> {
    let r = scale.dim();
    if !(alpha > (r as f64 - 1.0) / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "wishart: alpha must exceed (r-1)/2 = {}, got {alpha}",
            (r as f64 - 1.0) / 2.0
        )));
    }
    let dof = 2.0 * alpha;
    let s = SpdMatrix::from_nearly_symmetric(scale.inverse()?.matrix() * 0.5)?;
    let mut t = DMatrix::zeros(r, r);
    for i in 0..r {
        let chi2 = draw_gamma((dof - i as f64) / 2.0, 0.5, rng)?;
        t[(i, i)] = chi2.sqrt();
        for j in 0..i {
            t[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let lt = s.chol_lower() * t;
    SpdMatrix::from_nearly_symmetric(&lt * lt.transpose())
}

/// Inverse Wishart draw under the convention with mean
/// `A / (alpha - (r+1)/2)`: the inverse of a `W(alpha, A)` draw.
pub fn draw_inv_wishart(alpha: f64, scale: &SpdMatrix, rng: &mut RandomSource) -> Result<SpdMatrix> {
    draw_wishart(alpha, scale, rng)?.inverse()
}

/// Log pmf of the beta-negative-binomial distribution with mean
/// `a c / (b - 1)` for `b > 1`. Log-gamma arithmetic throughout, so it stays
/// finite for very large `k`.
pub fn bnb_log_pmf(k: u64, a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bnb: parameters must be positive, got a={a}, b={b}, c={c}"
        )));
    }
    let kf = k as f64;
    Ok(ln_gamma(a + kf) - ln_gamma(a) - ln_gamma(kf + 1.0) + ln_gamma(a + b) + ln_gamma(kf + c)
        - ln_gamma(a + b + kf + c)
        - (ln_gamma(b) + ln_gamma(c) - ln_gamma(b + c)))
}
