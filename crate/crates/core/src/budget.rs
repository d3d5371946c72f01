use crate::error::{Error, Result};

/// Cap on enumeration sizes ((2d+1)^k strings) and lattice volumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget(pub u128);

impl Budget {
    pub const DEFAULT: Budget = Budget(1_000_000_000);

    pub fn check(self, what: &str, required: u128) -> Result<()> {
        if required > self.0 {
            return Err(Error::ResourceLimit {
                what: what.to_string(),
                required,
                budget: self.0,
            });
        }
        Ok(())
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// base^exp, saturating at u128::MAX.
pub(crate) fn saturating_pow(base: u128, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
    }
    acc
}
