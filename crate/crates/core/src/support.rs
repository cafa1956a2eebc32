use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fock indices a signal state may occupy, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSupport("support must be non-empty".into()));
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSupport(format!(
                "indices must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { indices })
    }

    /// `{0, 1, …, d − 1}`.
    pub fn contiguous(d: usize) -> Result<Self> {
        Self::new((0..d).collect())
    }

    /// `{0, step, 2·step, …, (d − 1)·step}`.
    pub fn arithmetic(d: usize, step: usize) -> Result<Self> {
        if step == 0 && d > 1 {
            return Err(Error::InvalidSupport("step must be positive".into()));
        }
        Self::new((0..d).map(|k| k * step).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max(&self) -> usize {
        *self.indices.last().expect("non-empty")
    }

    /// True for `{0, …, d − 1}`.
    pub fn is_contiguous_from_zero(&self) -> bool {
        self.indices.iter().enumerate().all(|(k, &n)| k == n)
    }

    /// Largest Fock-index difference `max − min`.
    pub fn span(&self) -> usize {
        self.max() - self.indices[0]
    }

    /// Greatest common divisor of all index differences (0 for a single level).
    pub fn difference_gcd(&self) -> usize {
        let first = self.indices[0];
        self.indices[1..].iter().fold(0, |g, &n| gcd(g, n - first))
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl TryFrom<Vec<usize>> for SupportSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SupportSet> for Vec<usize> {
    fn from(s: SupportSet) -> Self {
        s.indices
    }
}
