//! Inverted dropout: the keep mask is scaled by 1/(1-p) at training time so
//! inference applies no mask at all.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Builds a dropout mask of `len` entries. In training mode each entry is
/// `1/(1-p)` with probability `1-p` and `0.0` otherwise; in inference mode
/// the mask is all ones.
pub fn dropout_mask(p: f64, len: usize, rng: &mut Rng, training: bool) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {p}"
        )));
    }
    if !training || p == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let scale = 1.0 / (1.0 - p);
    Ok((0..len)
        .map(|_| if rng.bernoulli(p) { 0.0 } else { scale })
        .collect())
}
