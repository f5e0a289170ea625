use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Transfer time in seconds, kept as an exact rational so that sums are
/// order-independent and oracle comparisons can use `==`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TransferTime(BigRational);

impl TransferTime {
    pub fn zero() -> Self {
        TransferTime(BigRational::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// size_mb / bandwidth, with the bandwidth passed as seconds-per-MB.
    pub fn from_mb_at(size_mb: u64, seconds_per_mb: &BigRational) -> Self {
        TransferTime(BigRational::from_integer(BigInt::from(size_mb)) * seconds_per_mb)
    }

    pub fn from_secs(secs: u64) -> Self {
        TransferTime(BigRational::from_integer(BigInt::from(secs)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        TransferTime(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn seconds_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn ratio(&self) -> &BigRational {
        &self.0
    }

    /// Average over `n` observations; `n = 0` yields zero.
    pub fn div_count(&self, n: usize) -> Self {
        if n == 0 {
            return TransferTime::zero();
        }
        TransferTime(&self.0 / BigRational::from_integer(BigInt::from(n)))
    }

    pub fn scale(&self, num: u64, den: u64) -> Self {
        assert!(den > 0);
        TransferTime(&self.0 * BigRational::new(BigInt::from(num), BigInt::from(den)))
    }
}

impl Default for TransferTime {
    fn default() -> Self {
        TransferTime::zero()
    }
}

impl Add for TransferTime {
    type Output = TransferTime;
    fn add(self, rhs: TransferTime) -> TransferTime {
        TransferTime(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a TransferTime> for TransferTime {
    type Output = TransferTime;
    fn add(self, rhs: &'a TransferTime) -> TransferTime {
        TransferTime(self.0 + &rhs.0)
    }
}

impl AddAssign for TransferTime {
    fn add_assign(&mut self, rhs: TransferTime) {
        self.0 += rhs.0;
    }
}

impl<'a> AddAssign<&'a TransferTime> for TransferTime {
    fn add_assign(&mut self, rhs: &'a TransferTime) {
        self.0 += &rhs.0;
    }
}

impl Sum for TransferTime {
    fn sum<I: Iterator<Item = TransferTime>>(iter: I) -> TransferTime {
        let mut acc = TransferTime::zero();
        for t in iter {
            acc += t;
        }
        acc
    }
}

impl fmt::Display for TransferTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.seconds_f64())
    }
}
