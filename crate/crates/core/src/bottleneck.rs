//! The exponentially small gap past the level crossing, resolved beyond f64.
//!
//! The single-particle energies of the real odd-sector Hamiltonian are the
//! singular values of `M = A + B`, i.e. the positive eigenvalues of the
//! chiral matrix `[[0, M], [M^T, 0]]`. For the ring that matrix is a periodic
//! Jacobi matrix with zero diagonal and hoppings alternating between
//! `(1 - s) h` and `-s J_j`, so eigenvalues can be counted with a Sturm
//! sequence and bisected in fixed-point arithmetic of any width. Near the
//! bottleneck the two lowest levels agree to `~N log2(1/r) / 2` bits, far more
//! than a dense f64 eigensolver resolves.

use alloc::vec::Vec;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::model::RingModel;
use crate::nambu::{interpolate, real_vacuum_parity};

/// Guard bits on top of the width needed to resolve the gap.
const GUARD_BITS: usize = 64;

/// Fixed-point numbers `v / 2^bits` held in a `BigInt`.
#[derive(Debug, Clone, Copy)]
struct Fixed {
    bits: usize,
}

impl Fixed {
    fn fixed(&self, x: f64) -> BigInt {
        if x == 0.0 {
            return BigInt::from(0);
        }
        let raw = x.to_bits();
        let exp = ((raw >> 52) & 0x7ff) as i64;
        let frac = raw & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        let shift = e + self.bits as i64;
        let m = BigInt::from(mant);
        let v = if shift >= 0 { m << shift as usize } else { m >> (-shift) as usize };
        if x < 0.0 {
            -v
        } else {
            v
        }
    }

    fn float(&self, v: &BigInt) -> f64 {
        let drop = v.bits().saturating_sub(62);
        let top = i64::try_from(&(v >> drop as usize)).unwrap_or(0);
        scale(top as f64, drop as i64 - self.bits as i64)
    }

    fn one(&self) -> BigInt {
        BigInt::from(1) << self.bits
    }

    fn ulp(&self) -> BigInt {
        BigInt::from(1)
    }

    fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        (a * b) >> self.bits
    }

    fn div(&self, a: &BigInt, b: &BigInt) -> BigInt {
        (a << self.bits) / b
    }
}

/// `x * 2^k` without overflowing the intermediate power.
fn scale(mut x: f64, mut k: i64) -> f64 {
    while k != 0 {
        let step = k.clamp(-1000, 1000);
        x *= f64::from_bits(((1023 + step) as u64) << 52);
        k -= step;
    }
    x
}

/// Working width for a ring: `ceil(log2(1/r))` bits per site, which covers
/// the `r^(N/2)` gap twice over, plus guard bits.
pub fn precision_bits(model: &RingModel) -> usize {
    let r = model.bottleneck_gap_ratio();
    let mut per_site = 1;
    if r > 0.0 && r < 1.0 {
        let mut x = r;
        while x < 1.0 {
            x *= 2.0;
            per_site += 1;
        }
    }
    model.n() * per_site + GUARD_BITS
}

/// Hoppings of the periodic Jacobi chain at `s`, with the corner last.
struct Chain {
    hops: Vec<BigInt>,
    corner: BigInt,
}

fn chain(model: &RingModel, fx: Fixed, s: &BigInt) -> Chain {
    let one_minus = fx.one() - s;
    let diag = fx.mul(&one_minus, &fx.fixed(model.h()));
    let mut hops = Vec::with_capacity(2 * model.n());
    for &j in model.couplings().as_slice() {
        hops.push(diag.clone());
        hops.push(-fx.mul(s, &fx.fixed(j)));
    }
    let corner = hops.pop().unwrap_or_default();
    Chain { hops, corner }
}

/// Eigenvalues of the chiral matrix below `lambda`, by bordered LDL^T
/// elimination of the periodic Jacobi matrix shifted by `-lambda`.
fn count_below(fx: Fixed, c: &Chain, lambda: &BigInt) -> usize {
    let m = c.hops.len() + 1;
    let nudge = |p: BigInt| if p == BigInt::from(0) { fx.ulp() } else { p };
    let zero = BigInt::from(0);
    let mut p = -lambda.clone();
    let mut f = c.corner.clone();
    let mut last = -lambda.clone();
    let mut neg = 0;
    for i in 0..m - 2 {
        p = nudge(p);
        if p < zero {
            neg += 1;
        }
        last -= fx.div(&fx.mul(&f, &f), &p);
        let border = if i + 1 == m - 2 { c.hops[m - 2].clone() } else { zero.clone() };
        let f_next = border - fx.div(&fx.mul(&c.hops[i], &f), &p);
        p = -lambda.clone() - fx.div(&fx.mul(&c.hops[i], &c.hops[i]), &p);
        f = f_next;
    }
    p = nudge(p);
    if p < zero {
        neg += 1;
    }
    last -= fx.div(&fx.mul(&f, &f), &p);
    if last < zero {
        neg += 1;
    }
    neg
}

/// `k`-th smallest single-particle energy (1-based) by bisection.
fn level(fx: Fixed, c: &Chain, n: usize, k: usize, upper: &BigInt) -> BigInt {
    let mut lo = BigInt::from(0);
    let mut hi = upper.clone();
    let stop = BigInt::from(16);
    while &hi - &lo > stop {
        let mid: BigInt = (&lo + &hi) >> 1usize;
        if count_below(fx, c, &mid) >= n + k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) >> 1usize
}

fn upper_bound(model: &RingModel, fx: Fixed) -> BigInt {
    let jmax = model.couplings().as_slice().iter().fold(0.0f64, |a, j| a.max(j.abs()));
    fx.fixed(2.0 * (model.h().abs() + jmax) + 1.0)
}

/// Lowest `count` single-particle energies at `s`, each accurate to a few
/// units of `2^-bits`.
pub fn levels(model: &RingModel, s: f64, count: usize) -> Result<Vec<f64>> {
    model.require_odd_sector()?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange(s));
    }
    if count > model.n() {
        return Err(Error::InvalidArgument("more levels than sites requested".into()));
    }
    let fx = Fixed { bits: precision_bits(model) };
    let c = chain(model, fx, &fx.fixed(s));
    let upper = upper_bound(model, fx);
    Ok((1..=count).map(|k| fx.float(&level(fx, &c, model.n(), k, &upper))).collect())
}

/// Location and size of the smallest gap `2 (e_2 - e_1)` inside a bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bottleneck {
    pub s: f64,
    pub gap: f64,
    pub epsilon1: f64,
    pub epsilon2: f64,
    /// Fixed-point width used.
    pub bits: usize,
    /// Gap evaluations spent by the search.
    pub evaluations: usize,
}

/// Golden-section search for the minimum gap on `[lo, hi]`. The bracket must
/// lie past the zero crossing (even Bogoliubov vacuum) and hold a single
/// minimum; the f64 grid minimum plus one grid step either side does.
pub fn refine_bottleneck(model: &RingModel, lo: f64, hi: f64) -> Result<Bottleneck> {
    model.require_odd_sector()?;
    if !(0.0 < lo && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidArgument("bracket must satisfy 0 < lo < hi <= 1".into()));
    }
    for s in [lo, hi] {
        if real_vacuum_parity(&interpolate(model, s)?)? != 0 {
            return Err(Error::InvalidArgument("bracket reaches back before the level crossing".into()));
        }
    }
    let fx = Fixed { bits: precision_bits(model) };
    let n = model.n();
    let upper = upper_bound(model, fx);
    let mut evaluations = 0;
    let mut eval = |s: &BigInt| {
        evaluations += 1;
        let c = chain(model, fx, s);
        let e1 = level(fx, &c, n, 1, &upper);
        let e2 = level(fx, &c, n, 2, &upper);
        ((&e2 - &e1) << 1usize, e1, e2)
    };
    // (sqrt 5 - 1) / 2 at full width; an f64 ratio drifts once the bracket
    // has shrunk by more than 16 digits
    let golden: BigInt = ((BigInt::from(5) << (2 * fx.bits)).sqrt() - fx.one()) >> 1usize;
    let mut a = fx.fixed(lo);
    let mut b = fx.fixed(hi);
    let mut x1 = &b - fx.mul(&golden, &(&b - &a));
    let mut x2 = &a + fx.mul(&golden, &(&b - &a));
    let mut f1 = eval(&x1);
    let mut f2 = eval(&x2);
    let floor = BigInt::from(1) << 10usize;
    for _ in 0..4 * fx.bits {
        let best = if f1.0 < f2.0 { &f1.0 } else { &f2.0 };
        // stop once the bracket is narrow against the dip, whose width in s
        // is of the order of the gap itself
        if &b - &a <= (best >> 10usize) + &floor {
            break;
        }
        if f1.0 < f2.0 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = &b - fx.mul(&golden, &(&b - &a));
            f1 = eval(&x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = &a + fx.mul(&golden, &(&b - &a));
            f2 = eval(&x2);
        }
    }
    let (x, (gap, e1, e2)) = if f1.0 < f2.0 { (x1, f1) } else { (x2, f2) };
    Ok(Bottleneck {
        s: fx.float(&x),
        gap: fx.float(&gap),
        epsilon1: fx.float(&e1),
        epsilon2: fx.float(&e2),
        bits: fx.bits,
        evaluations,
    })
}
