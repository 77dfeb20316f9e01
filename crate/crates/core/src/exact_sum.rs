//! Correctly rounded floating-point summation.
//!
//! Terms whose magnitude lies in `[2^-12, 2^52)` are accumulated exactly in
//! an `i128` with 64 fractional bits; anything else goes into a
//! non-overlapping expansion of partial sums (Shewchuk). The final value is
//! the exact sum rounded once, so it does not depend on the order in which
//! terms were added. Betweenness accumulation relies on this to stay
//! bit-identical under vertex relabeling and across worker counts.

const FIXED_SCALE: f64 = 1.0 / 18_446_744_073_709_551_616.0; // 2^-64

#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    fixed: i128,
    partials: Vec<f64>,
}

/// `x * 2^64` as an exact integer when that fits comfortably in an `i128`.
pub fn to_fixed(x: f64) -> Option<i128> {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    // x = mantissa * 2^(biased - 1075); scaled by 2^64 the shift is
    // biased - 1011, which must be a left shift of at most 63 bits.
    let shift = biased - 1011;
    if !(0..=63).contains(&shift) {
        return if x == 0.0 { Some(0) } else { None };
    }
    let mantissa = ((bits & ((1u64 << 52) - 1)) | (1u64 << 52)) as i128;
    let v = mantissa << shift;
    Some(if x.is_sign_negative() { -v } else { v })
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.fixed = 0;
        self.partials.clear();
    }

    pub fn add(&mut self, x: f64) {
        self.add_prepared(to_fixed(x), x);
    }

    /// Same as [`ExactSum::add`] with `fixed == to_fixed(x)` computed by the
    /// caller, for hot loops that add the same term many times.
    #[inline]
    pub fn add_prepared(&mut self, fixed: Option<i128>, x: f64) {
        match fixed {
            Some(v) => match self.fixed.checked_add(v) {
                Some(sum) => self.fixed = sum,
                None => {
                    self.flush_fixed();
                    self.fixed = v;
                }
            },
            None => self.add_partial(x),
        }
    }

    /// Moves the fixed-point register into the partials, exactly, as three
    /// 48-bit chunks.
    fn flush_fixed(&mut self) {
        let fixed = std::mem::take(&mut self.fixed);
        if fixed == 0 {
            return;
        }
        let sign = if fixed < 0 { -1.0 } else { 1.0 };
        let mag = fixed.unsigned_abs();
        let mask = (1u128 << 48) - 1;
        for (shift, scale) in [(96, 2f64.powi(32)), (48, 2f64.powi(-16)), (0, FIXED_SCALE)] {
            let chunk = (mag >> shift) & mask;
            if chunk != 0 {
                self.add_partial(sign * chunk as f64 * scale);
            }
        }
    }

    fn add_partial(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Adds every partial of `other`; exact, so merge order is irrelevant.
    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
        match self.fixed.checked_add(other.fixed) {
            Some(sum) => self.fixed = sum,
            None => {
                self.flush_fixed();
                self.fixed = other.fixed;
            }
        }
    }

    pub fn value(&self) -> f64 {
        if self.partials.is_empty() {
            // Integer -> f64 casts round to nearest-even; the power-of-two
            // scale is exact.
            return match i64::try_from(self.fixed) {
                Ok(small) => small as f64 * FIXED_SCALE,
                Err(_) => self.fixed as f64 * FIXED_SCALE,
            };
        }
        if self.fixed == 0 {
            return round_partials(&self.partials);
        }
        let mut all = self.clone();
        all.flush_fixed();
        round_partials(&all.partials)
    }
}

fn round_partials(p: &[f64]) -> f64 {
    let mut n = p.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = p[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = p[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // Round-half-even correction when the remaining tail pushes the
    // discarded part past the halfway point.
    if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}
