//! The double integral
//!
//! ```text
//! phi(m, n) = int_0^inf l1^m e^{-l1} int_0^{l1} l2^n e^{-l2} dl2 dl1
//! ```
//!
//! evaluated exactly in rational arithmetic. The edge rows have closed forms
//! `phi(m, 0) = m! (1 - 2^{-(m+1)})` and `phi(0, n) = n! 2^{-(n+1)}`; interior
//! values follow `phi(m, n) = m n phi(m-1, n-1) - (m-n)(m+n-1)! / 2^{m+n+1}`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub const PHI_INDEX_CAP: u32 = 200;

/// Memoized exact values, shared by all threads.
#[derive(Debug, Default)]
pub struct PhiTable {
    cache: RwLock<HashMap<(u32, u32), Arc<BigRational>>>,
}

impl PhiTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn global() -> &'static PhiTable {
        static TABLE: OnceLock<PhiTable> = OnceLock::new();
        TABLE.get_or_init(PhiTable::new)
    }

    pub fn len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, m: u32, n: u32) -> Result<Arc<BigRational>> {
        if m > PHI_INDEX_CAP || n > PHI_INDEX_CAP {
            return Err(Error::Domain(format!(
                "phi({m}, {n}) exceeds the index cap {PHI_INDEX_CAP}"
            )));
        }
        if let Some(v) = self.cache.read().unwrap().get(&(m, n)) {
            return Ok(v.clone());
        }
        // Walk down the diagonal to the edge row, then build back up.
        let steps = m.min(n);
        let (m0, n0) = (m - steps, n - steps);
        let mut value = if n0 == 0 {
            base_row_m(m0)
        } else {
            base_row_n(n0)
        };
        let mut fresh = vec![((m0, n0), value.clone())];
        for j in 1..=steps {
            let (mi, ni) = (m0 + j, n0 + j);
            value = recurrence_step(mi, ni, &value);
            fresh.push(((mi, ni), value.clone()));
        }
        let mut cache = self.cache.write().unwrap();
        for (key, v) in fresh {
            cache.entry(key).or_insert_with(|| Arc::new(v));
        }
        Ok(cache[&(m, n)].clone())
    }
}

pub(crate) fn factorial(n: u32) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn pow2(e: u32) -> BigInt {
    BigInt::one() << e as usize
}

/// phi(m, 0) = m! (1 - 2^{-(m+1)})
fn base_row_m(m: u32) -> BigRational {
    let f = factorial(m);
    let p = pow2(m + 1);
    BigRational::new(f * (&p - BigInt::one()), p)
}

/// phi(0, n) = n! / 2^{n+1}
fn base_row_n(n: u32) -> BigRational {
    BigRational::new(factorial(n), pow2(n + 1))
}

/// phi(m, n) from phi(m-1, n-1), for m, n >= 1.
pub(crate) fn recurrence_step(m: u32, n: u32, prev: &BigRational) -> BigRational {
    let mn = BigRational::from_integer(BigInt::from(m) * BigInt::from(n));
    let diff = BigInt::from(m as i64 - n as i64);
    let corr = BigRational::new(diff * factorial(m + n - 1), pow2(m + n + 1));
    mn * prev - corr
}

pub fn phi_exact(m: u32, n: u32) -> Result<BigRational> {
    PhiTable::global().get(m, n).map(|v| (*v).clone())
}

pub fn phi(m: u32, n: u32) -> Result<f64> {
    Ok(to_f64(&*PhiTable::global().get(m, n)?))
}

pub(crate) fn to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    x.to_f64().unwrap_or(f64::NAN)
}

/// `E[lambda_max]` of the 2x2 Gram spectrum when the other dimension is `n`
/// (a `2 x n` or `n x 2` channel), exactly.
pub fn mean_top_eigenvalue_exact(n: u32) -> Result<BigRational> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    let t = PhiTable::global();
    let s1 = &*t.get(n + 1, n - 2)? - &*t.get(n, n - 1)? * BigRational::from_integer(2.into())
        + &*t.get(n - 1, n)?;
    Ok(s1 / BigRational::from_integer(factorial(n - 1) * factorial(n - 2)))
}

pub fn mean_top_eigenvalue(n: u32) -> Result<f64> {
    mean_top_eigenvalue_exact(n).map(|v| to_f64(&v))
}
