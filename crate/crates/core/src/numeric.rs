//! Summation helpers shared by the floating-point reductions.

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Sums per-index partials in index order. Partials are produced in
/// parallel but always collected into a vector first, so the result does
/// not depend on the worker count.
pub(crate) fn ordered_sum(partials: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for &p in partials {
        acc.add(p);
    }
    acc.value()
}

pub(crate) fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    if a == 0 {
        return b;
    }
    if b == 0 {
        return a;
    }
    // binary gcd; falls back to 64-bit when both operands fit
    if a <= u64::MAX as u128 && b <= u64::MAX as u128 {
        return num_integer::Integer::gcd(&(a as u64), &(b as u64)) as u128;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}
