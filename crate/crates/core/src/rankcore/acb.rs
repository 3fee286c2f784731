use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 5;

/// One circular window: `members[k] = (index + k) mod n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub index: usize,
    pub members: Vec<usize>,
}

/// Splits `n` proposals into `n` circular windows of `window` consecutive
/// indices, so every index appears in exactly `window` windows.
pub fn acb_sequences(n: usize, window: usize) -> Result<Vec<Window>> {
    if window == 0 || n < window {
        return Err(Error::InvalidWindow { n, window });
    }
    Ok((0..n)
        .map(|i| Window {
            index: i,
            members: (0..window).map(|k| (i + k) % n).collect(),
        })
        .collect())
}
