//! Fixed-precision p-adic scalars and the matrix invariants built on them.
//!
//! A [`PadicScalar`] is either exactly zero, a value `unit · p^val` whose
//! unit is known modulo `p^prec`, or an "all known digits cancelled" residue
//! that only carries a valuation floor. Arithmetic tracks precision loss
//! honestly: adding two elements whose leading digits cancel bumps the
//! valuation and spends precision; when every known digit cancels the result
//! degrades to the floor-only state, and any operation that then needs a
//! valuation or a unit fails with [`PadicError::PrecisionExhausted`] instead
//! of guessing.
//!
//! Every matrix-level invariant exists twice:
//!
//! * at working precision on [`PadicMat`] — the fallible, honest layer;
//! * exactly, on rational matrices, where `p`-adic valuations of nonzero
//!   rationals are computed without any precision at all.
//!
//! The exact layer produces multiply-back certificates (the transform
//! matrices are returned and can be checked by exact multiplication); the
//! fixed-precision layer must agree with it whenever it succeeds, which is
//! what the test suites check. Callers with exact rational inputs who hit a
//! precision error can simply re-run at doubled precision via
//! [`with_precision_retry`]; genuine cancellations terminate because the
//! underlying values are rational.
//!
//! Matrix entries arrive from JSON as strings like `"p^-1*2"`, `"p^3"`,
//! `"7/9"`, or `"-12"`; [`parse_scalar`] turns them into exact rationals
//! with the prime substituted in.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

use crate::exact::{mat_apply_i64, mat_inverse, mat_mul, rat, sqrt_upper, transpose, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PadicError {
    #[error("not an odd prime: {0}")]
    BadPrime(u64),
    #[error("precision {0} is out of range for this prime")]
    BadPrecision(u32),
    #[error("all digits cancelled: valuation known only to be ≥ {floor}")]
    PrecisionExhausted { floor: i64 },
    #[error("division by exact zero")]
    DivisionByZero,
    #[error("matrix is singular at working precision")]
    NotInvertible,
    #[error("matrix shape mismatch")]
    BadShape,
    #[error("special linear input must have determinant one, found valuation {0}")]
    DetNotOne(i64),
    #[error("block-diagonal input required for the product group")]
    NonBlockDiagonal,
    #[error("chamber matrix must be a permutation for GL/SL invariants")]
    NotAPermutation,
    #[error("cannot parse p-adic scalar from {0:?}")]
    Parse(String),
}

/// Prime and working precision. Precision counts significant base-`p`
/// digits of the unit part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadicCtx {
    pub p: u64,
    pub prec: u32,
}

pub const DEFAULT_PRECISION: u32 = 8;

/// Retry cap used by [`with_precision_retry`].
pub const MAX_RETRY_PRECISION: u32 = 64;

impl PadicCtx {
    pub fn new(p: u64, prec: u32) -> Result<Self, PadicError> {
        if p < 3 || !is_prime(p) {
            return Err(PadicError::BadPrime(p));
        }
        let ctx = PadicCtx { p, prec };
        if prec == 0 || ctx.checked_pk(prec).is_none() {
            return Err(PadicError::BadPrecision(prec));
        }
        Ok(ctx)
    }

    fn checked_pk(&self, k: u32) -> Option<u64> {
        let mut acc: u64 = 1;
        for _ in 0..k {
            acc = acc.checked_mul(self.p)?;
            if acc > (1 << 62) {
                return None;
            }
        }
        Some(acc)
    }

    /// `p^k` for `k ≤ self.prec` (validated at construction).
    fn pk(&self, k: u32) -> u64 {
        debug_assert!(k <= self.prec);
        (0..k).fold(1u64, |acc, _| acc * self.p)
    }

    /// Largest precision this prime supports under the retry cap.
    pub fn max_precision(p: u64) -> u32 {
        let mut k = 0;
        let mut acc: u64 = 1;
        while k < MAX_RETRY_PRECISION {
            match acc.checked_mul(p) {
                Some(v) if v <= (1 << 62) => {
                    acc = v;
                    k += 1;
                }
                _ => break,
            }
        }
        k
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadicScalar {
    /// Exactly zero (valuation +∞).
    Zero,
    /// `unit · p^val`, with `unit` invertible and known mod `p^prec`,
    /// `1 ≤ prec`.
    Elem { val: i64, unit: u64, prec: u32 },
    /// Every known digit cancelled: the value has valuation ≥ `min_val` but
    /// nothing else is known — it may even be zero.
    Unknown { min_val: i64 },
}

impl PadicScalar {
    /// Certified valuation: `Ok(None)` for exact zero, error when the digits
    /// are exhausted.
    pub fn try_valuation(&self) -> Result<Option<i64>, PadicError> {
        match self {
            PadicScalar::Zero => Ok(None),
            PadicScalar::Elem { val, .. } => Ok(Some(*val)),
            PadicScalar::Unknown { min_val } => {
                Err(PadicError::PrecisionExhausted { floor: *min_val })
            }
        }
    }

    /// Lower bound on the valuation that every state can certify.
    fn val_floor(&self) -> Option<i64> {
        match self {
            PadicScalar::Zero => None,
            PadicScalar::Elem { val, .. } => Some(*val),
            PadicScalar::Unknown { min_val } => Some(*min_val),
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self, PadicScalar::Zero)
    }
}

/// p-adic valuation of a nonzero integer.
fn val_i128(mut x: i128, p: i128) -> i64 {
    debug_assert!(x != 0);
    let mut v = 0;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    v
}

/// Exact p-adic valuation of a rational; `None` for zero.
pub fn rat_valuation(x: &Rat, p: u64) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let p = p as i128;
    Some(val_i128(*x.numer(), p) - val_i128(*x.denom(), p))
}

fn egcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = egcd(b, a.rem_euclid(b));
        (g, y, x - (a / b) * y)
    }
}

/// Inverse of `a` modulo `m` (`gcd(a, m) = 1`).
fn mod_inv(a: u64, m: u64) -> u64 {
    let (g, x, _) = egcd(a as i128, m as i128);
    debug_assert_eq!(g, 1);
    x.rem_euclid(m as i128) as u64
}

impl PadicCtx {
    /// Ingest an exact rational at working precision. The unit part is the
    /// full rational unit reduced mod `p^prec`, so no information beyond the
    /// precision cap is lost.
    pub fn scalar_from_rat(&self, x: &Rat) -> PadicScalar {
        if x.is_zero() {
            return PadicScalar::Zero;
        }
        let p = self.p as i128;
        let vn = val_i128(*x.numer(), p);
        let vd = val_i128(*x.denom(), p);
        let pk = self.pk(self.prec) as i128;
        let un = (x.numer() / p.pow(vn as u32)).rem_euclid(pk) as u64;
        let ud = (x.denom() / p.pow(vd as u32)).rem_euclid(pk) as u64;
        let unit = mulmod(un, mod_inv(ud, pk as u64), pk as u64);
        PadicScalar::Elem { val: vn - vd, unit, prec: self.prec }
    }

    pub fn scalar_from_int(&self, x: i64) -> PadicScalar {
        self.scalar_from_rat(&rat(x as i128))
    }

    pub fn neg(&self, a: &PadicScalar) -> PadicScalar {
        match *a {
            PadicScalar::Zero => PadicScalar::Zero,
            PadicScalar::Elem { val, unit, prec } => {
                let pk = self.pk(prec);
                PadicScalar::Elem { val, unit: pk - unit, prec }
            }
            u @ PadicScalar::Unknown { .. } => u,
        }
    }

    pub fn add(&self, a: &PadicScalar, b: &PadicScalar) -> PadicScalar {
        use PadicScalar::*;
        match (*a, *b) {
            (Zero, x) | (x, Zero) => x,
            (Unknown { min_val: m1 }, Unknown { min_val: m2 }) => {
                Unknown { min_val: m1.min(m2) }
            }
            (Unknown { min_val }, Elem { val, unit, prec })
            | (Elem { val, unit, prec }, Unknown { min_val }) => {
                if min_val <= val {
                    Unknown { min_val }
                } else {
                    // Digits of the element below the unknown's floor stay.
                    let keep = ((min_val - val) as u64).min(prec as u64) as u32;
                    let pk = self.pk(keep);
                    let u = unit % pk;
                    if u == 0 {
                        // The element's surviving digits start above its own
                        // valuation — cannot happen: unit is a unit.
                        unreachable!("unit divisible by p");
                    }
                    Elem { val, unit: u, prec: keep }
                }
            }
            (Elem { val: v1, unit: u1, prec: p1 }, Elem { val: v2, unit: u2, prec: p2 }) => {
                let (va, ua, pa, vb, ub, pb) = if v1 <= v2 {
                    (v1, u1, p1, v2, u2, p2)
                } else {
                    (v2, u2, p2, v1, u1, p1)
                };
                let delta = (vb - va) as u64;
                // Result digits are trustworthy up to min(pa, pb + delta).
                let pres = (pa as u64).min(pb as u64 + delta).min(self.prec as u64) as u32;
                let pk = self.pk(pres);
                let shifted = if delta >= pres as u64 {
                    0
                } else {
                    mulmod(ub % pk, self.pk(delta as u32) % pk, pk)
                };
                let s = (ua % pk + shifted) % pk;
                if s == 0 {
                    return Unknown { min_val: va + pres as i64 };
                }
                let m = val_u64(s, self.p);
                let rest_prec = pres - m;
                let unit = s / self.p.pow(m);
                Elem { val: va + m as i64, unit: unit % self.pk(rest_prec), prec: rest_prec }
            }
        }
    }

    pub fn sub(&self, a: &PadicScalar, b: &PadicScalar) -> PadicScalar {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &PadicScalar, b: &PadicScalar) -> PadicScalar {
        use PadicScalar::*;
        match (*a, *b) {
            (Zero, _) | (_, Zero) => Zero,
            (Unknown { min_val: m1 }, Unknown { min_val: m2 }) => {
                Unknown { min_val: m1 + m2 }
            }
            (Unknown { min_val }, Elem { val, .. }) | (Elem { val, .. }, Unknown { min_val }) => {
                Unknown { min_val: min_val + val }
            }
            (Elem { val: v1, unit: u1, prec: p1 }, Elem { val: v2, unit: u2, prec: p2 }) => {
                let prec = p1.min(p2);
                let pk = self.pk(prec);
                Elem { val: v1 + v2, unit: mulmod(u1 % pk, u2 % pk, pk), prec }
            }
        }
    }

    pub fn inv(&self, a: &PadicScalar) -> Result<PadicScalar, PadicError> {
        match *a {
            PadicScalar::Zero => Err(PadicError::DivisionByZero),
            PadicScalar::Unknown { min_val } => {
                Err(PadicError::PrecisionExhausted { floor: min_val })
            }
            PadicScalar::Elem { val, unit, prec } => {
                let pk = self.pk(prec);
                Ok(PadicScalar::Elem { val: -val, unit: mod_inv(unit, pk), prec })
            }
        }
    }

    pub fn div(&self, a: &PadicScalar, b: &PadicScalar) -> Result<PadicScalar, PadicError> {
        Ok(self.mul(a, &self.inv(b)?))
    }
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn val_u64(mut x: u64, p: u64) -> u32 {
    debug_assert!(x != 0);
    let mut v = 0;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    v
}

/// Square matrix over [`PadicScalar`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicMat {
    pub n: usize,
    pub entries: Vec<Vec<PadicScalar>>,
}

impl PadicMat {
    pub fn from_rat(ctx: &PadicCtx, m: &[Vec<Rat>]) -> Result<Self, PadicError> {
        let n = m.len();
        if m.iter().any(|r| r.len() != n) {
            return Err(PadicError::BadShape);
        }
        Ok(PadicMat {
            n,
            entries: m
                .iter()
                .map(|row| row.iter().map(|x| ctx.scalar_from_rat(x)).collect())
                .collect(),
        })
    }

    pub fn identity(ctx: &PadicCtx, n: usize) -> Self {
        PadicMat {
            n,
            entries: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if i == j {
                                ctx.scalar_from_int(1)
                            } else {
                                PadicScalar::Zero
                            }
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn mul(&self, ctx: &PadicCtx, other: &PadicMat) -> Result<Self, PadicError> {
        if self.n != other.n {
            return Err(PadicError::BadShape);
        }
        let n = self.n;
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut acc = PadicScalar::Zero;
                        for k in 0..n {
                            let term = ctx.mul(&self.entries[i][k], &other.entries[k][j]);
                            acc = ctx.add(&acc, &term);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(PadicMat { n, entries })
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        PadicMat {
            n,
            entries: (0..n)
                .map(|j| (0..n).map(|i| self.entries[i][j]).collect())
                .collect(),
        }
    }

    /// Inverse by Gauss–Jordan with valuation pivoting. Fails when a pivot
    /// cannot be certified.
    pub fn inverse(&self, ctx: &PadicCtx) -> Result<Self, PadicError> {
        let n = self.n;
        let mut a = self.entries.clone();
        let mut b = PadicMat::identity(ctx, n).entries;
        for col in 0..n {
            let pivot = certified_min_row(&a, col, col)?;
            a.swap(col, pivot);
            b.swap(col, pivot);
            let inv = ctx.inv(&a[col][col])?;
            for j in 0..n {
                a[col][j] = ctx.mul(&a[col][j], &inv);
                b[col][j] = ctx.mul(&b[col][j], &inv);
            }
            a[col][col] = ctx.scalar_from_int(1);
            for i in 0..n {
                if i == col || a[i][col].is_exact_zero() {
                    continue;
                }
                let f = a[i][col];
                for j in 0..n {
                    let ta = ctx.mul(&f, &a[col][j]);
                    a[i][j] = ctx.sub(&a[i][j], &ta);
                    let tb = ctx.mul(&f, &b[col][j]);
                    b[i][j] = ctx.sub(&b[i][j], &tb);
                }
                a[i][col] = PadicScalar::Zero;
            }
        }
        Ok(PadicMat { n, entries: b })
    }

    /// Lower bound over all entries of `val(self − other)`; `None` when the
    /// matrices agree exactly.
    pub fn diff_floor(&self, ctx: &PadicCtx, other: &PadicMat) -> Option<i64> {
        let mut floor: Option<i64> = None;
        for i in 0..self.n {
            for j in 0..self.n {
                let d = ctx.sub(&self.entries[i][j], &other.entries[i][j]);
                if let Some(v) = d.val_floor() {
                    floor = Some(floor.map_or(v, |f| f.min(v)));
                }
            }
        }
        floor
    }
}

/// Pick the row index `i ≥ from` minimizing the certified valuation of
/// column `col`. Entries with exhausted digits are legal only if their floor
/// proves they cannot beat the winner.
fn certified_min_row(
    a: &[Vec<PadicScalar>],
    col: usize,
    from: usize,
) -> Result<usize, PadicError> {
    let mut best: Option<(i64, usize)> = None;
    let mut unknown_floor: Option<i64> = None;
    for (i, row) in a.iter().enumerate().skip(from) {
        match row[col] {
            PadicScalar::Zero => {}
            PadicScalar::Elem { val, .. } => {
                if best.is_none_or(|(bv, _)| val < bv) {
                    best = Some((val, i));
                }
            }
            PadicScalar::Unknown { min_val } => {
                unknown_floor = Some(unknown_floor.map_or(min_val, |f| f.min(min_val)));
            }
        }
    }
    match (best, unknown_floor) {
        (Some((bv, bi)), Some(floor)) => {
            if floor >= bv {
                Ok(bi)
            } else {
                Err(PadicError::PrecisionExhausted { floor })
            }
        }
        (Some((_, bi)), None) => Ok(bi),
        (None, Some(floor)) => Err(PadicError::PrecisionExhausted { floor }),
        (None, None) => Err(PadicError::NotInvertible),
    }
}

/// Which matrix group the invariants are computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Gl(usize),
    Sl(usize),
    /// Two block-diagonal 2×2 special linear factors inside 4×4 matrices.
    Sl2Sl2,
}

impl GroupKind {
    pub fn n(&self) -> usize {
        match self {
            GroupKind::Gl(n) | GroupKind::Sl(n) => *n,
            GroupKind::Sl2Sl2 => 4,
        }
    }
}

// ---------------------------------------------------------------------------
// Exact-rational layer.
// ---------------------------------------------------------------------------

/// Exact Cartan data: `u · g · v = diag(p^inv)` with `u, v` p-integral of
/// unit determinant.
#[derive(Debug, Clone)]
pub struct CartanCert {
    pub invariant: Vec<i64>,
    pub u: Vec<Vec<Rat>>,
    pub v: Vec<Vec<Rat>>,
}

impl CartanCert {
    /// Multiply-back check, all exact: transforms are p-integral with unit
    /// determinant and `u·g·v` is exactly the diagonal `p^inv`.
    pub fn verify(&self, p: u64, g: &[Vec<Rat>]) -> bool {
        if !is_p_integral_unimodular(&self.u, p) || !is_p_integral_unimodular(&self.v, p) {
            return false;
        }
        let prod = mat_mul(&mat_mul(&self.u, g), &self.v);
        let n = g.len();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { pow_rat(p, self.invariant[i]) } else { Rat::zero() };
                if prod[i][j] != expect {
                    return false;
                }
            }
        }
        true
    }
}

pub(crate) fn pow_rat(p: u64, e: i64) -> Rat {
    let base = rat(p as i128);
    if e >= 0 {
        (0..e).fold(Rat::one(), |acc, _| acc * &base)
    } else {
        (0..-e).fold(Rat::one(), |acc, _| acc / &base)
    }
}

fn is_p_integral_unimodular(m: &[Vec<Rat>], p: u64) -> bool {
    let ok_entries = m
        .iter()
        .flatten()
        .all(|x| x.is_zero() || rat_valuation(x, p).unwrap() >= 0);
    if !ok_entries {
        return false;
    }
    match det_rat(m) {
        Some(d) => rat_valuation(&d, p) == Some(0),
        None => false,
    }
}

fn det_rat(m: &[Vec<Rat>]) -> Option<Rat> {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = Rat::one();
    for col in 0..n {
        let piv = (col..n).find(|&i| !a[i][col].is_zero())?;
        if piv != col {
            a.swap(col, piv);
            det = -det;
        }
        det *= &a[col][col];
        let inv = a[col][col].recip();
        for i in col + 1..n {
            if a[i][col].is_zero() {
                continue;
            }
            let f = &a[i][col] * &inv;
            for j in col..n {
                let s = &a[col][j] * &f;
                a[i][j] -= s;
            }
        }
    }
    Some(det)
}

fn validate_group_input(kind: GroupKind, p: u64, g: &[Vec<Rat>]) -> Result<(), PadicError> {
    let n = kind.n();
    if g.len() != n || g.iter().any(|r| r.len() != n) {
        return Err(PadicError::BadShape);
    }
    match kind {
        GroupKind::Gl(_) => {
            if det_rat(g).map_or(true, |d| d.is_zero()) {
                return Err(PadicError::NotInvertible);
            }
        }
        GroupKind::Sl(_) => {
            let d = det_rat(g).ok_or(PadicError::NotInvertible)?;
            if d != Rat::one() {
                let v = rat_valuation(&d, p).ok_or(PadicError::NotInvertible)?;
                return Err(PadicError::DetNotOne(v));
            }
        }
        GroupKind::Sl2Sl2 => {
            for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)] {
                if !g[i][j].is_zero() {
                    return Err(PadicError::NonBlockDiagonal);
                }
            }
            for b in 0..2 {
                let block = sub_block(g, b);
                let d = det_rat(&block).ok_or(PadicError::NotInvertible)?;
                if d != Rat::one() {
                    let v = rat_valuation(&d, p).ok_or(PadicError::NotInvertible)?;
                    return Err(PadicError::DetNotOne(v));
                }
            }
        }
    }
    Ok(())
}

fn sub_block(g: &[Vec<Rat>], b: usize) -> Vec<Vec<Rat>> {
    let o = 2 * b;
    (0..2)
        .map(|i| (0..2).map(|j| g[o + i][o + j].clone()).collect())
        .collect()
}

/// Exact Cartan invariant: sorted elementary-divisor valuations, dominant
/// order (largest first for GL/SL; per block for the product group).
pub fn cartan_exact(kind: GroupKind, p: u64, g: &[Vec<Rat>]) -> Result<CartanCert, PadicError> {
    validate_group_input(kind, p, g)?;
    match kind {
        GroupKind::Gl(_) | GroupKind::Sl(_) => cartan_exact_full(p, g),
        GroupKind::Sl2Sl2 => {
            let a = cartan_exact_full(p, &sub_block(g, 0))?;
            let b = cartan_exact_full(p, &sub_block(g, 1))?;
            let mut invariant = a.invariant.clone();
            invariant.extend(&b.invariant);
            Ok(CartanCert {
                invariant,
                u: block_diag(&a.u, &b.u),
                v: block_diag(&a.v, &b.v),
            })
        }
    }
}

fn block_diag(a: &[Vec<Rat>], b: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let n = a.len() + b.len();
    let mut m = vec![vec![Rat::zero(); n]; n];
    for (i, row) in a.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            m[i][j] = x.clone();
        }
    }
    for (i, row) in b.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            m[a.len() + i][a.len() + j] = x.clone();
        }
    }
    m
}

fn cartan_exact_full(p: u64, g: &[Vec<Rat>]) -> Result<CartanCert, PadicError> {
    let n = g.len();
    let mut a = g.to_vec();
    let mut u: Vec<Vec<Rat>> = identity_rat(n);
    let mut v: Vec<Vec<Rat>> = identity_rat(n);
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        // Global minimum valuation in the remaining block.
        let mut best: Option<(i64, usize, usize)> = None;
        for i in k..n {
            for j in k..n {
                if a[i][j].is_zero() {
                    continue;
                }
                let val = rat_valuation(&a[i][j], p).unwrap();
                if best.is_none_or(|(bv, _, _)| val < bv) {
                    best = Some((val, i, j));
                }
            }
        }
        let Some((val, pi, pj)) = best else {
            return Err(PadicError::NotInvertible);
        };
        swap_rows(&mut a, &mut u, k, pi);
        swap_cols(&mut a, &mut v, k, pj);
        // Scale the pivot row so the pivot becomes exactly p^val.
        let scale = pow_rat(p, val) / &a[k][k];
        scale_row(&mut a, &mut u, k, &scale);
        // Clear the rest of row k and column k.
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = &a[i][k] / &a[k][k];
            sub_row(&mut a, &mut u, i, k, &f);
        }
        for j in k + 1..n {
            if a[k][j].is_zero() {
                continue;
            }
            let f = &a[k][j] / &a[k][k];
            sub_col(&mut a, &mut v, j, k, &f);
        }
        vals.push(val);
    }
    // Valuations come out ascending; dominant order is descending.
    let mut invariant = vals;
    invariant.sort_unstable_by(|x, y| y.cmp(x));
    // The recorded transforms produced the ascending diagonal; re-sorting
    // the diagonal is a simultaneous row/col permutation.
    let asc: Vec<i64> = {
        let mut s = invariant.clone();
        s.sort_unstable();
        s
    };
    let perm = permutation_sorting(&asc, &invariant);
    let (u, v) = apply_diag_permutation(&u, &v, &perm);
    Ok(CartanCert { invariant, u, v })
}

fn identity_rat(n: usize) -> Vec<Vec<Rat>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rat::one() } else { Rat::zero() }).collect())
        .collect()
}

fn swap_rows(a: &mut [Vec<Rat>], u: &mut [Vec<Rat>], i: usize, j: usize) {
    if i != j {
        a.swap(i, j);
        u.swap(i, j);
    }
}

fn swap_cols(a: &mut [Vec<Rat>], v: &mut [Vec<Rat>], i: usize, j: usize) {
    if i != j {
        for row in a.iter_mut() {
            row.swap(i, j);
        }
        for row in v.iter_mut() {
            row.swap(i, j);
        }
    }
}

fn scale_row(a: &mut [Vec<Rat>], u: &mut [Vec<Rat>], i: usize, c: &Rat) {
    for x in a[i].iter_mut() {
        *x *= c;
    }
    for x in u[i].iter_mut() {
        *x *= c;
    }
}

fn sub_row(a: &mut [Vec<Rat>], u: &mut [Vec<Rat>], i: usize, from: usize, f: &Rat) {
    for j in 0..a[i].len() {
        let s = &a[from][j] * f;
        a[i][j] -= s;
        let t = &u[from][j] * f;
        u[i][j] -= t;
    }
}

fn sub_col(a: &mut [Vec<Rat>], v: &mut [Vec<Rat>], j: usize, from: usize, f: &Rat) {
    for i in 0..a.len() {
        let s = &a[i][from] * f;
        a[i][j] -= s;
    }
    for i in 0..v.len() {
        let s = &v[i][from] * f;
        v[i][j] -= s;
    }
}

/// Permutation `perm` with `from[perm[i]] = to[i]`, consuming duplicates
/// left to right.
fn permutation_sorting(from: &[i64], to: &[i64]) -> Vec<usize> {
    let mut used = vec![false; from.len()];
    to.iter()
        .map(|t| {
            let i = from
                .iter()
                .enumerate()
                .position(|(i, f)| !used[i] && f == t)
                .expect("same multiset");
            used[i] = true;
            i
        })
        .collect()
}

fn apply_diag_permutation(
    u: &[Vec<Rat>],
    v: &[Vec<Rat>],
    perm: &[usize],
) -> (Vec<Vec<Rat>>, Vec<Vec<Rat>>) {
    let n = perm.len();
    let new_u: Vec<Vec<Rat>> = (0..n).map(|i| u[perm[i]].clone()).collect();
    let new_v: Vec<Vec<Rat>> = v
        .iter()
        .map(|row| (0..n).map(|j| row[perm[j]].clone()).collect())
        .collect();
    (new_u, new_v)
}

/// Exact Iwasawa data for the chamber `w`: `(ẇ⁻¹ g) · k` is upper
/// triangular with diagonal valuations `diag`, and the reported retraction
/// is `h = w · diag`.
#[derive(Debug, Clone)]
pub struct IwasawaCert {
    pub h: Vec<i64>,
    pub diag: Vec<i64>,
    pub k: Vec<Vec<Rat>>,
    pub triangular: Vec<Vec<Rat>>,
}

impl IwasawaCert {
    pub fn verify(&self, p: u64, g: &[Vec<Rat>], w_mat: &[Vec<i64>]) -> bool {
        if !is_p_integral_unimodular(&self.k, p) {
            return false;
        }
        let wg = perm_apply_rows_inv(w_mat, g);
        if mat_mul(&wg, &self.k) != self.triangular {
            return false;
        }
        let n = g.len();
        for i in 0..n {
            for j in 0..i {
                if !self.triangular[i][j].is_zero() {
                    return false;
                }
            }
            if rat_valuation(&self.triangular[i][i], p) != Some(self.diag[i]) {
                return false;
            }
        }
        self.h == mat_apply_i64(w_mat, &self.diag)
    }
}

fn is_permutation_matrix(m: &[Vec<i64>]) -> bool {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return false;
    }
    let rows_ok = m
        .iter()
        .all(|r| r.iter().filter(|&&x| x == 1).count() == 1 && r.iter().all(|&x| x == 0 || x == 1));
    let cols_ok = (0..n).all(|j| (0..n).filter(|&i| m[i][j] == 1).count() == 1);
    rows_ok && cols_ok
}

/// Rows of `g` permuted by `w⁻¹` for a permutation matrix `w`:
/// `(w⁻¹ g)[i][j] = g[σ(i)][j]` where `w[σ(i)][i] = 1`.
fn perm_apply_rows_inv(w_mat: &[Vec<i64>], g: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let n = g.len();
    (0..n)
        .map(|i| {
            let src = (0..n).find(|&r| w_mat[r][i] == 1).expect("permutation matrix");
            g[src].clone()
        })
        .collect()
}

/// Exact Iwasawa retraction for the Borel attached to the chamber `w` (a
/// permutation matrix for GL/SL): the diagonal valuations of the triangular
/// factor of `ẇ⁻¹ g`, pushed back through `w`.
pub fn iwasawa_exact(
    kind: GroupKind,
    p: u64,
    g: &[Vec<Rat>],
    w_mat: &[Vec<i64>],
) -> Result<IwasawaCert, PadicError> {
    validate_group_input(kind, p, g)?;
    if !is_permutation_matrix(w_mat) || w_mat.len() != g.len() {
        return Err(PadicError::NotAPermutation);
    }
    let mut a = perm_apply_rows_inv(w_mat, g);
    let n = a.len();
    let mut k = identity_rat(n);
    // Bottom-up: row i must end up supported on columns ≥ i, with the pivot
    // at the diagonal.
    for i in (0..n).rev() {
        let mut best: Option<(i64, usize)> = None;
        for j in 0..=i {
            if a[i][j].is_zero() {
                continue;
            }
            let val = rat_valuation(&a[i][j], p).unwrap();
            if best.is_none_or(|(bv, _)| val < bv) {
                best = Some((val, j));
            }
        }
        let Some((_, pj)) = best else {
            return Err(PadicError::NotInvertible);
        };
        col_swap_pair(&mut a, &mut k, pj, i);
        for j in 0..i {
            if a[i][j].is_zero() {
                continue;
            }
            let f = &a[i][j] / &a[i][i];
            // c_j := c_j − f·c_i
            for r in 0..n {
                let s = &a[r][i] * &f;
                a[r][j] -= s;
                let t = &k[r][i] * &f;
                k[r][j] -= t;
            }
        }
    }
    let diag: Vec<i64> = (0..n)
        .map(|i| rat_valuation(&a[i][i], p).ok_or(PadicError::NotInvertible))
        .collect::<Result<_, _>>()?;
    let h = mat_apply_i64(w_mat, &diag);
    Ok(IwasawaCert { h, diag, k, triangular: a })
}

fn col_swap_pair(a: &mut [Vec<Rat>], k: &mut [Vec<Rat>], i: usize, j: usize) {
    if i != j {
        for row in a.iter_mut() {
            row.swap(i, j);
        }
        for row in k.iter_mut() {
            row.swap(i, j);
        }
    }
}

// ---------------------------------------------------------------------------
// Fixed-precision layer.
// ---------------------------------------------------------------------------

/// Cartan invariant at working precision: Smith reduction with certified
/// pivoting, dominant (descending) order, per block for the product group.
pub fn cartan_invariant(
    ctx: &PadicCtx,
    kind: GroupKind,
    g: &PadicMat,
) -> Result<Vec<i64>, PadicError> {
    if g.n != kind.n() {
        return Err(PadicError::BadShape);
    }
    match kind {
        GroupKind::Gl(_) | GroupKind::Sl(_) => cartan_precision_full(ctx, &g.entries),
        GroupKind::Sl2Sl2 => {
            for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)] {
                if !g.entries[i][j].is_exact_zero() {
                    return Err(PadicError::NonBlockDiagonal);
                }
            }
            let mut out = Vec::new();
            for b in 0..2 {
                let o = 2 * b;
                let block: Vec<Vec<PadicScalar>> = (0..2)
                    .map(|i| (0..2).map(|j| g.entries[o + i][o + j]).collect())
                    .collect();
                out.extend(cartan_precision_full(ctx, &block)?);
            }
            Ok(out)
        }
    }
}

/// Dominant valuation invariant of `a · diag(p^ν) · b`, in arbitrary-
/// precision rational arithmetic. Conjugating a shift through a pair of
/// fixed matrices forces eliminations whose cancellation depth grows with
/// ‖ν‖₁, past anything the fixed-width unit can absorb, and `p^ν` itself
/// overflows machine-width rationals long before the shifts of interest run
/// out — so this one product is evaluated over big integers.
pub fn cartan_shifted_exact(
    kind: GroupKind,
    p: u64,
    a: &[Vec<Rat>],
    nu: &[i64],
    b: &[Vec<Rat>],
) -> Result<Vec<i64>, PadicError> {
    let n = kind.n();
    if a.len() != n || b.len() != n || nu.len() != n {
        return Err(PadicError::BadShape);
    }
    let pb = BigInt::from(p);
    let pw: Vec<BigRational> = nu.iter().map(|&e| pow_big(&pb, e)).collect();
    let mut m = vec![vec![BigRational::zero(); n]; n];
    for (i, arow) in a.iter().enumerate() {
        for (k, aik) in arow.iter().enumerate() {
            if aik.is_zero() {
                continue;
            }
            let scaled = big_rat(aik) * &pw[k];
            for (j, bkj) in b[k].iter().enumerate() {
                if bkj.is_zero() {
                    continue;
                }
                let term = &scaled * big_rat(bkj);
                m[i][j] += term;
            }
        }
    }
    match kind {
        GroupKind::Gl(_) | GroupKind::Sl(_) => {
            let mut vals = smith_vals_big(&pb, &mut m)?;
            vals.reverse();
            Ok(vals)
        }
        GroupKind::Sl2Sl2 => {
            for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)] {
                if !m[i][j].is_zero() {
                    return Err(PadicError::NonBlockDiagonal);
                }
            }
            let mut out = Vec::new();
            for blk in 0..2 {
                let o = 2 * blk;
                let mut block: Vec<Vec<BigRational>> = (0..2)
                    .map(|i| (0..2).map(|j| m[o + i][o + j].clone()).collect())
                    .collect();
                let mut vals = smith_vals_big(&pb, &mut block)?;
                vals.reverse();
                out.extend(vals);
            }
            Ok(out)
        }
    }
}

fn big_rat(x: &Rat) -> BigRational {
    BigRational::new(BigInt::from(*x.numer()), BigInt::from(*x.denom()))
}

fn pow_big(p: &BigInt, e: i64) -> BigRational {
    let mag = p.pow(e.unsigned_abs() as u32);
    if e >= 0 {
        BigRational::from_integer(mag)
    } else {
        BigRational::new(BigInt::one(), mag)
    }
}

fn val_big(x: &BigRational, p: &BigInt) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let mut v = 0i64;
    let mut num = x.numer().clone();
    while (&num % p).is_zero() {
        num /= p;
        v += 1;
    }
    let mut den = x.denom().clone();
    while (&den % p).is_zero() {
        den /= p;
        v -= 1;
    }
    Some(v)
}

/// Valuations of the elementary divisors of a nonsingular rational matrix,
/// ascending: global minimum-valuation pivoting makes every elimination
/// factor integral, so each Schur complement carries the remaining divisors.
fn smith_vals_big(p: &BigInt, m: &mut [Vec<BigRational>]) -> Result<Vec<i64>, PadicError> {
    let n = m.len();
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        let mut best: Option<(i64, usize, usize)> = None;
        for i in k..n {
            for j in k..n {
                if let Some(v) = val_big(&m[i][j], p) {
                    if best.is_none_or(|(bv, _, _)| v < bv) {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let Some((v, pi, pj)) = best else {
            return Err(PadicError::NotInvertible);
        };
        vals.push(v);
        m.swap(k, pi);
        for row in m.iter_mut() {
            row.swap(k, pj);
        }
        let pivot = m[k][k].clone();
        let prow = m[k].clone();
        for i in k + 1..n {
            if m[i][k].is_zero() {
                continue;
            }
            let f = &m[i][k] / &pivot;
            for j in k + 1..n {
                let s = &f * &prow[j];
                m[i][j] -= s;
            }
            m[i][k] = BigRational::zero();
        }
    }
    Ok(vals)
}

fn cartan_precision_full(
    ctx: &PadicCtx,
    g: &[Vec<PadicScalar>],
) -> Result<Vec<i64>, PadicError> {
    let n = g.len();
    let mut a = g.to_vec();
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        // Certified global minimum valuation in the remaining block.
        let mut best: Option<(i64, usize, usize)> = None;
        let mut floor: Option<i64> = None;
        for i in k..n {
            for j in k..n {
                match a[i][j] {
                    PadicScalar::Zero => {}
                    PadicScalar::Elem { val, .. } => {
                        if best.is_none_or(|(bv, _, _)| val < bv) {
                            best = Some((val, i, j));
                        }
                    }
                    PadicScalar::Unknown { min_val } => {
                        floor = Some(floor.map_or(min_val, |f| f.min(min_val)));
                    }
                }
            }
        }
        let (val, pi, pj) = match (best, floor) {
            (Some((bv, i, j)), Some(f)) if f >= bv => (bv, i, j),
            (Some(_), Some(f)) => return Err(PadicError::PrecisionExhausted { floor: f }),
            (Some((bv, i, j)), None) => (bv, i, j),
            (None, Some(f)) => return Err(PadicError::PrecisionExhausted { floor: f }),
            (None, None) => return Err(PadicError::NotInvertible),
        };
        a.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        let pivot = a[k][k];
        let pivot_inv = ctx.inv(&pivot)?;
        for i in k + 1..n {
            if a[i][k].is_exact_zero() {
                continue;
            }
            let f = ctx.mul(&a[i][k], &pivot_inv);
            for j in k + 1..n {
                let s = ctx.mul(&f, &a[k][j]);
                a[i][j] = ctx.sub(&a[i][j], &s);
            }
            a[i][k] = PadicScalar::Zero;
        }
        for j in k + 1..n {
            a[k][j] = PadicScalar::Zero;
        }
        vals.push(val);
    }
    vals.sort_unstable_by(|x, y| y.cmp(x));
    Ok(vals)
}

/// Iwasawa retraction at working precision (same column reduction as the
/// exact layer, with certified pivots).
pub fn iwasawa_hb(
    ctx: &PadicCtx,
    kind: GroupKind,
    g: &PadicMat,
    w_mat: &[Vec<i64>],
) -> Result<Vec<i64>, PadicError> {
    if g.n != kind.n() {
        return Err(PadicError::BadShape);
    }
    if !is_permutation_matrix(w_mat) || w_mat.len() != g.n {
        return Err(PadicError::NotAPermutation);
    }
    let n = g.n;
    let mut a: Vec<Vec<PadicScalar>> = (0..n)
        .map(|i| {
            let src = (0..n).find(|&r| w_mat[r][i] == 1).expect("permutation");
            g.entries[src].clone()
        })
        .collect();
    for i in (0..n).rev() {
        let mut best: Option<(i64, usize)> = None;
        let mut floor: Option<i64> = None;
        for j in 0..=i {
            match a[i][j] {
                PadicScalar::Zero => {}
                PadicScalar::Elem { val, .. } => {
                    if best.is_none_or(|(bv, _)| val < bv) {
                        best = Some((val, j));
                    }
                }
                PadicScalar::Unknown { min_val } => {
                    floor = Some(floor.map_or(min_val, |f| f.min(min_val)));
                }
            }
        }
        let pj = match (best, floor) {
            (Some((bv, j)), Some(f)) if f >= bv => j,
            (Some(_), Some(f)) => return Err(PadicError::PrecisionExhausted { floor: f }),
            (Some((_, j)), None) => j,
            (None, Some(f)) => return Err(PadicError::PrecisionExhausted { floor: f }),
            (None, None) => return Err(PadicError::NotInvertible),
        };
        if pj != i {
            for row in a.iter_mut() {
                row.swap(pj, i);
            }
        }
        let pivot_inv = ctx.inv(&a[i][i])?;
        for j in 0..i {
            if a[i][j].is_exact_zero() {
                continue;
            }
            let f = ctx.mul(&a[i][j], &pivot_inv);
            for r in 0..i {
                let s = ctx.mul(&a[r][i], &f);
                a[r][j] = ctx.sub(&a[r][j], &s);
            }
            a[i][j] = PadicScalar::Zero;
        }
    }
    let diag: Vec<i64> = (0..n)
        .map(|i| {
            a[i][i]
                .try_valuation()?
                .ok_or(PadicError::NotInvertible)
        })
        .collect::<Result<_, _>>()?;
    Ok(mat_apply_i64(w_mat, &diag))
}

// ---------------------------------------------------------------------------
// Involutions and τ.
// ---------------------------------------------------------------------------

/// Matrix-level involution: inner conjugation by ε (ε² central) or the
/// twisted transpose-inverse g ↦ J(gᵀ)⁻¹J⁻¹.
#[derive(Debug, Clone)]
pub enum MatrixInvolution {
    InnerByEpsilon(Vec<Vec<Rat>>),
    TransposeInverseTwist(Vec<Vec<Rat>>),
}

impl MatrixInvolution {
    pub fn inner(eps: Vec<Vec<Rat>>) -> Self {
        MatrixInvolution::InnerByEpsilon(eps)
    }

    /// Plain transpose-inverse (J = identity).
    pub fn transpose_inverse(n: usize) -> Self {
        MatrixInvolution::TransposeInverseTwist(identity_rat(n))
    }

    /// Exact application to a rational matrix.
    pub fn apply_exact(&self, g: &[Vec<Rat>]) -> Result<Vec<Vec<Rat>>, PadicError> {
        match self {
            MatrixInvolution::InnerByEpsilon(eps) => {
                let eps_inv = mat_inverse(eps).ok_or(PadicError::NotInvertible)?;
                Ok(mat_mul(&mat_mul(eps, g), &eps_inv))
            }
            MatrixInvolution::TransposeInverseTwist(j) => {
                let j_inv = mat_inverse(j).ok_or(PadicError::NotInvertible)?;
                let g_t_inv = mat_inverse(&transpose(g)).ok_or(PadicError::NotInvertible)?;
                Ok(mat_mul(&mat_mul(j, &g_t_inv), &j_inv))
            }
        }
    }

    /// τ(g) = θ(g)⁻¹ · g, exactly.
    pub fn tau_exact(&self, g: &[Vec<Rat>]) -> Result<Vec<Vec<Rat>>, PadicError> {
        let th = self.apply_exact(g)?;
        let th_inv = mat_inverse(&th).ok_or(PadicError::NotInvertible)?;
        Ok(mat_mul(&th_inv, g))
    }

    /// Application at working precision.
    pub fn apply(&self, ctx: &PadicCtx, g: &PadicMat) -> Result<PadicMat, PadicError> {
        match self {
            MatrixInvolution::InnerByEpsilon(eps) => {
                let e = PadicMat::from_rat(ctx, eps)?;
                let e_inv = e.inverse(ctx)?;
                e.mul(ctx, g)?.mul(ctx, &e_inv)
            }
            MatrixInvolution::TransposeInverseTwist(j) => {
                let jm = PadicMat::from_rat(ctx, j)?;
                let j_inv = jm.inverse(ctx)?;
                let g_t_inv = g.transpose().inverse(ctx)?;
                jm.mul(ctx, &g_t_inv)?.mul(ctx, &j_inv)
            }
        }
    }

    /// τ(g) = θ(g)⁻¹ · g at working precision.
    pub fn tau(&self, ctx: &PadicCtx, g: &PadicMat) -> Result<PadicMat, PadicError> {
        let th = self.apply(ctx, g)?;
        th.inverse(ctx)?.mul(ctx, g)
    }
}

// ---------------------------------------------------------------------------
// Building distance.
// ---------------------------------------------------------------------------

/// Exact squared Euclidean length of the Cartan invariant.
pub fn building_distance_sq(kind: GroupKind, p: u64, g: &[Vec<Rat>]) -> Result<Rat, PadicError> {
    let cert = cartan_exact(kind, p, g)?;
    Ok(rat(cert.invariant.iter().map(|&v| (v as i128) * (v as i128)).sum()))
}

/// Certified rational upper bound on the building distance d(g). Zero
/// exactly when `g` has trivial Cartan invariant (g ∈ K up to the group's
/// conventions).
pub fn building_distance_upper(
    kind: GroupKind,
    p: u64,
    g: &[Vec<Rat>],
) -> Result<Rat, PadicError> {
    Ok(sqrt_upper(&building_distance_sq(kind, p, g)?))
}

// ---------------------------------------------------------------------------
// Im τ membership.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImTauVerdict {
    Yes,
    No,
    /// Search exhausted without a witness — not a "No".
    Unknown,
}

/// Declared description of `X_* ∩ Im τ`: a sublattice plus coset
/// representatives (all in ambient coweight coordinates).
#[derive(Debug, Clone)]
pub struct DeclaredImTau {
    pub basis: Vec<Vec<i64>>,
    pub cosets: Vec<Vec<i64>>,
}

impl DeclaredImTau {
    /// Transpose-inverse on GL₂: τ(g) = gᵀg, so p^ν must be a Gram matrix
    /// of the standard form. Over Q_p the rank-2 classification leaves the
    /// even-sum coweights when −1 is a square mod p and the doubly-even ones
    /// otherwise.
    pub fn gl2_transpose_inverse(p: u64) -> Self {
        if p % 4 == 1 {
            DeclaredImTau { basis: vec![vec![1, 1], vec![1, -1]], cosets: vec![vec![0, 0]] }
        } else {
            DeclaredImTau { basis: vec![vec![2, 0], vec![0, 2]], cosets: vec![vec![0, 0]] }
        }
    }

    /// Factor-swap on SL₂×SL₂: τ(g₁,g₂) = (g₂⁻¹g₁, g₁⁻¹g₂) reaches every
    /// split coweight (take g₂ = 1).
    pub fn sl2sl2_swap() -> Self {
        DeclaredImTau { basis: vec![vec![1, -1, -1, 1]], cosets: vec![vec![0, 0, 0, 0]] }
    }

    pub fn contains(&self, nu: &[i64]) -> bool {
        self.cosets.iter().any(|c| {
            let shifted: Vec<i64> = nu.iter().zip(c).map(|(&a, &b)| a - b).collect();
            in_integer_span(&self.basis, &shifted)
        })
    }
}

fn in_integer_span(basis: &[Vec<i64>], v: &[i64]) -> bool {
    // Solve over the rationals, then demand integrality.
    let dim = v.len();
    let a: Vec<Vec<Rat>> = (0..dim)
        .map(|r| basis.iter().map(|b| rat(b[r] as i128)).collect())
        .collect();
    let b: Vec<Rat> = v.iter().map(|&x| rat(x as i128)).collect();
    match crate::exact::solve_unique(&a, &b) {
        Some(c) => c.iter().all(|x| x.is_integer()),
        None => false,
    }
}

#[derive(Debug, Clone)]
pub enum ImTauStrategy {
    Declared(DeclaredImTau),
    /// Search g = M / p^m over integer matrices M with entries in
    /// [−radius, radius] and m ≤ power_bound for an exact witness
    /// τ(g) = p^ν.
    BruteForce { radius: i64, power_bound: u32 },
}

/// Decide whether the coweight `ν` has a torus lift in the image of τ.
pub fn imtau_membership(
    p: u64,
    nu: &[i64],
    theta: &MatrixInvolution,
    strategy: &ImTauStrategy,
) -> ImTauVerdict {
    if nu.iter().all(|&x| x == 0) {
        return ImTauVerdict::Yes; // witness g = identity
    }
    match strategy {
        ImTauStrategy::Declared(decl) => {
            if decl.contains(nu) {
                ImTauVerdict::Yes
            } else {
                ImTauVerdict::No
            }
        }
        ImTauStrategy::BruteForce { radius, power_bound } => {
            brute_force_imtau(p, nu, theta, *radius, *power_bound)
        }
    }
}

fn diag_p_nu(p: u64, nu: &[i64]) -> Vec<Vec<Rat>> {
    let n = nu.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { pow_rat(p, nu[i]) } else { Rat::zero() })
                .collect()
        })
        .collect()
}

fn brute_force_imtau(
    p: u64,
    nu: &[i64],
    theta: &MatrixInvolution,
    radius: i64,
    power_bound: u32,
) -> ImTauVerdict {
    let n = nu.len();
    if n != 2 {
        // The exhaustive witness search is only wired for 2×2 groups.
        return ImTauVerdict::Unknown;
    }
    let target = diag_p_nu(p, nu);
    for m in 0..=power_bound {
        let scale = pow_rat(p, -(m as i64));
        let mut entries = [0i64; 4];
        loop {
            let g: Vec<Vec<Rat>> = vec![
                vec![rat(entries[0] as i128) * &scale, rat(entries[1] as i128) * &scale],
                vec![rat(entries[2] as i128) * &scale, rat(entries[3] as i128) * &scale],
            ];
            let det = &g[0][0] * &g[1][1] - &g[0][1] * &g[1][0];
            if !det.is_zero() {
                if let Ok(t) = theta.tau_exact(&g) {
                    if t == target {
                        return ImTauVerdict::Yes;
                    }
                }
            }
            // Odometer over [−radius, radius]^4.
            let mut k = 0;
            loop {
                if k == 4 {
                    break;
                }
                entries[k] += 1;
                if entries[k] <= radius {
                    break;
                }
                entries[k] = -radius;
                k += 1;
            }
            if k == 4 {
                break;
            }
        }
    }
    ImTauVerdict::Unknown
}

// ---------------------------------------------------------------------------
// Precision retry and parsing.
// ---------------------------------------------------------------------------

/// Re-run a precision-bound computation at doubled precision until it stops
/// failing with digit exhaustion. Sound for inputs that are exact rationals:
/// their cancellations bottom out at finite depth.
pub fn with_precision_retry<T>(
    ctx: &PadicCtx,
    mut f: impl FnMut(&PadicCtx) -> Result<T, PadicError>,
) -> Result<T, PadicError> {
    let cap = PadicCtx::max_precision(ctx.p);
    let mut prec = ctx.prec;
    loop {
        let attempt = PadicCtx::new(ctx.p, prec)?;
        match f(&attempt) {
            Err(PadicError::PrecisionExhausted { .. }) if prec < cap => {
                prec = (prec * 2).min(cap);
            }
            other => return other,
        }
    }
}

/// Parse a matrix entry: either a rational literal (`"7"`, `"-7/9"`) or a
/// power of the prime with an optional rational cofactor
/// (`"p^2"`, `"p^-1*2"`, `"-3*p^4"`, `"p"`).
pub fn parse_scalar(text: &str, p: u64) -> Result<Rat, PadicError> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || PadicError::Parse(text.to_string());
    if s.is_empty() {
        return Err(err());
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.as_str()),
    };
    let mut value = Rat::one();
    let mut saw_p = false;
    for factor in body.split('*') {
        if let Some(rest) = factor.strip_prefix('p') {
            if saw_p {
                return Err(err());
            }
            saw_p = true;
            let e: i64 = if rest.is_empty() {
                1
            } else {
                rest.strip_prefix('^').ok_or_else(err)?.parse().map_err(|_| err())?
            };
            value *= pow_rat(p, e);
        } else {
            value *= parse_rat(factor).ok_or_else(err)?;
        }
    }
    Ok(if neg { -value } else { value })
}

fn parse_rat(s: &str) -> Option<Rat> {
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.parse().ok()?;
        let d: i128 = d.parse().ok()?;
        if d == 0 {
            return None;
        }
        Some(Rat::new(n, d))
    } else {
        let n: i128 = s.parse().ok()?;
        Some(rat(n))
    }
}

/// Parse a full matrix of entry strings.
pub fn parse_matrix(rows: &[Vec<String>], p: u64) -> Result<Vec<Vec<Rat>>, PadicError> {
    rows.iter()
        .map(|r| r.iter().map(|e| parse_scalar(e, p)).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Random matrix generators (deterministic under a seeded RNG).
// ---------------------------------------------------------------------------

/// Random element of GL_n(Z_p) — integer entries with unit determinant mod
/// p, by rejection.
pub fn random_k_matrix<R: Rng>(p: u64, n: usize, rng: &mut R) -> Vec<Vec<Rat>> {
    loop {
        let m: Vec<Vec<Rat>> = (0..n)
            .map(|_| (0..n).map(|_| rat(rng.gen_range(0..(p * p) as i128))).collect())
            .collect();
        if let Some(d) = det_rat(&m) {
            if rat_valuation(&d, p) == Some(0) {
                return m;
            }
        }
    }
}

/// Random invertible matrix with entries `u · p^v`, `v` in the given range.
pub fn random_group_matrix<R: Rng>(
    p: u64,
    n: usize,
    val_range: std::ops::RangeInclusive<i64>,
    rng: &mut R,
) -> Vec<Vec<Rat>> {
    loop {
        let m: Vec<Vec<Rat>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        if rng.gen_ratio(1, 6) {
                            return Rat::zero();
                        }
                        let u = rng.gen_range(1..(p * p) as i128);
                        let v = rng.gen_range(*val_range.start()..=*val_range.end());
                        rat(u) * pow_rat(p, v)
                    })
                    .collect()
            })
            .collect();
        if det_rat(&m).map_or(false, |d| !d.is_zero()) {
            return m;
        }
    }
}

/// Random SL₂ matrix over Q_p: scale a random GL₂ pick to determinant one
/// when possible, otherwise retry.
pub fn random_sl2_matrix<R: Rng>(
    p: u64,
    val_range: std::ops::RangeInclusive<i64>,
    rng: &mut R,
) -> Vec<Vec<Rat>> {
    loop {
        let mut m = random_group_matrix(p, 2, val_range.clone(), rng);
        let d = det_rat(&m).unwrap();
        // Divide one column by the determinant.
        for row in m.iter_mut() {
            row[1] /= &d;
        }
        if det_rat(&m).map_or(false, |d| d.is_one()) {
            return m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{identity_i64, ratio};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx3() -> PadicCtx {
        PadicCtx::new(3, 8).unwrap()
    }

    fn rmat(entries: &[&[i64]]) -> Vec<Vec<Rat>> {
        entries
            .iter()
            .map(|r| r.iter().map(|&x| rat(x as i128)).collect())
            .collect()
    }

    #[test]
    fn scalar_ingestion_frozen_values() {
        let ctx = ctx3();
        match ctx.scalar_from_rat(&rat(18)) {
            PadicScalar::Elem { val, unit, prec } => {
                assert_eq!((val, unit, prec), (2, 2, 8));
            }
            other => panic!("{other:?}"),
        }
        match ctx.scalar_from_rat(&ratio(-1, 3)) {
            PadicScalar::Elem { val, unit, prec } => {
                assert_eq!(val, -1);
                assert_eq!(unit, 3u64.pow(8) - 1);
                assert_eq!(prec, 8);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(ctx.scalar_from_rat(&Rat::zero()), PadicScalar::Zero);
    }

    #[test]
    fn addition_tracks_cancellation() {
        let ctx = ctx3();
        let four = ctx.scalar_from_int(4);
        let minus_one = ctx.scalar_from_int(-1);
        match ctx.add(&four, &minus_one) {
            PadicScalar::Elem { val, unit, prec } => {
                assert_eq!((val, unit), (1, 1));
                assert_eq!(prec, 7, "one digit spent on the cancellation");
            }
            other => panic!("{other:?}"),
        }
        // Total cancellation of all known digits.
        let a = PadicScalar::Elem { val: 0, unit: 1, prec: 2 };
        let b = ctx.neg(&a);
        assert_eq!(ctx.add(&a, &b), PadicScalar::Unknown { min_val: 2 });
    }

    #[test]
    fn multiplication_and_inverse() {
        let ctx = ctx3();
        let two = ctx.scalar_from_int(2);
        let inv = ctx.inv(&two).unwrap();
        match ctx.mul(&two, &inv) {
            PadicScalar::Elem { val, unit, .. } => {
                assert_eq!((val, unit), (0, 1));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(ctx.inv(&PadicScalar::Zero), Err(PadicError::DivisionByZero));
        assert!(matches!(
            ctx.inv(&PadicScalar::Unknown { min_val: 3 }),
            Err(PadicError::PrecisionExhausted { floor: 3 })
        ));
    }

    #[test]
    fn cartan_frozen_examples() {
        let ctx = ctx3();
        let kind = GroupKind::Gl(2);
        let diag31 = rmat(&[&[3, 0], &[0, 1]]);
        let g = PadicMat::from_rat(&ctx, &diag31).unwrap();
        assert_eq!(cartan_invariant(&ctx, kind, &g).unwrap(), vec![1, 0]);

        let anti = rmat(&[&[0, 9], &[1, 0]]);
        let g = PadicMat::from_rat(&ctx, &anti).unwrap();
        assert_eq!(cartan_invariant(&ctx, kind, &g).unwrap(), vec![2, 0]);

        // Unit-determinant integral matrix is in K.
        let k = rmat(&[&[2, 1], &[1, 1]]);
        let g = PadicMat::from_rat(&ctx, &k).unwrap();
        assert_eq!(cartan_invariant(&ctx, kind, &g).unwrap(), vec![0, 0]);
    }

    #[test]
    fn cartan_exact_certificates() {
        let p = 3;
        for m in [
            rmat(&[&[0, 9], &[1, 0]]),
            rmat(&[&[3, 0], &[0, 1]]),
            vec![vec![ratio(1, 3), rat(2)], vec![rat(5), rat(9)]],
        ] {
            let cert = cartan_exact(GroupKind::Gl(2), p, &m).unwrap();
            assert!(cert.verify(p, &m), "certificate fails for {m:?}");
        }
        let cert = cartan_exact(GroupKind::Gl(2), p, &rmat(&[&[0, 9], &[1, 0]])).unwrap();
        assert_eq!(cert.invariant, vec![2, 0]);
    }

    #[test]
    fn cartan_precision_agrees_with_exact_on_random_samples() {
        let ctx = PadicCtx::new(5, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = random_group_matrix(5, 3, -2..=2, &mut rng);
            let exact = cartan_exact(GroupKind::Gl(3), 5, &m).unwrap();
            let g = PadicMat::from_rat(&ctx, &m).unwrap();
            match cartan_invariant(&ctx, GroupKind::Gl(3), &g) {
                Ok(inv) => assert_eq!(inv, exact.invariant),
                Err(PadicError::PrecisionExhausted { .. }) => {
                    // Allowed; the retry wrapper must then land on the exact
                    // answer.
                    let again = with_precision_retry(&ctx, |c| {
                        let g = PadicMat::from_rat(c, &m).unwrap();
                        cartan_invariant(c, GroupKind::Gl(3), &g)
                    })
                    .unwrap();
                    assert_eq!(again, exact.invariant);
                }
                Err(e) => panic!("unexpected {e:?}"),
            }
        }
    }

    #[test]
    fn designed_cancellation_errors_then_retries() {
        // At two digits the lower-right entry cancels to the precision
        // floor; the honest answer is an error, and doubling the precision
        // resolves it.
        let p = 3;
        let m = rmat(&[&[1, 1], &[1, 10]]); // det = 9
        let low = PadicCtx::new(p, 2).unwrap();
        let g = PadicMat::from_rat(&low, &m).unwrap();
        assert!(matches!(
            cartan_invariant(&low, GroupKind::Gl(2), &g),
            Err(PadicError::PrecisionExhausted { .. })
        ));
        let inv = with_precision_retry(&low, |c| {
            let g = PadicMat::from_rat(c, &m).unwrap();
            cartan_invariant(c, GroupKind::Gl(2), &g)
        })
        .unwrap();
        assert_eq!(inv, vec![2, 0]);
        assert_eq!(cartan_exact(GroupKind::Gl(2), p, &m).unwrap().invariant, vec![2, 0]);
    }

    #[test]
    fn iwasawa_frozen_examples() {
        let p = 3;
        let id2 = identity_i64(2);
        // Torus element.
        let t = vec![vec![rat(9), Rat::zero()], vec![Rat::zero(), ratio(1, 3)]];
        let cert = iwasawa_exact(GroupKind::Gl(2), p, &t, &id2).unwrap();
        assert_eq!(cert.h, vec![2, -1]);
        assert!(cert.verify(p, &t, &id2));
        // K element.
        let k = rmat(&[&[2, 1], &[1, 1]]);
        let cert = iwasawa_exact(GroupKind::Gl(2), p, &k, &id2).unwrap();
        assert_eq!(cert.h, vec![0, 0]);
        // Lower-triangular with a pole.
        let g = vec![vec![rat(1), Rat::zero()], vec![ratio(1, 3), rat(1)]];
        let cert = iwasawa_exact(GroupKind::Sl(2), p, &g, &id2).unwrap();
        assert_eq!(cert.h, vec![1, -1]);
        assert!(cert.verify(p, &g, &id2));
    }

    #[test]
    fn iwasawa_opposite_chamber() {
        // For the lower-triangular Borel (w = the swap), the same g is
        // already triangular: H = (−1, 1) read through the swap.
        let p = 3;
        let swap = vec![vec![0, 1], vec![1, 0]];
        let g = vec![vec![rat(1), Rat::zero()], vec![ratio(1, 3), rat(1)]];
        let cert = iwasawa_exact(GroupKind::Sl(2), p, &g, &swap).unwrap();
        assert_eq!(cert.h, vec![0, 0]);
        assert!(cert.verify(p, &g, &swap));
    }

    #[test]
    fn iwasawa_precision_matches_exact() {
        let ctx = PadicCtx::new(5, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let id3 = identity_i64(3);
        for _ in 0..40 {
            let m = random_group_matrix(5, 3, -2..=2, &mut rng);
            let exact = iwasawa_exact(GroupKind::Gl(3), 5, &m, &id3).unwrap();
            let g = PadicMat::from_rat(&ctx, &m).unwrap();
            match iwasawa_hb(&ctx, GroupKind::Gl(3), &g, &id3) {
                Ok(h) => assert_eq!(h, exact.h),
                Err(PadicError::PrecisionExhausted { .. }) => {
                    let again = with_precision_retry(&ctx, |c| {
                        let g = PadicMat::from_rat(c, &m).unwrap();
                        iwasawa_hb(c, GroupKind::Gl(3), &g, &id3)
                    })
                    .unwrap();
                    assert_eq!(again, exact.h);
                }
                Err(e) => panic!("unexpected {e:?}"),
            }
        }
    }

    #[test]
    fn iwasawa_left_torus_equivariance() {
        let p = 3;
        let id2 = identity_i64(2);
        let g = vec![vec![rat(2), rat(7)], vec![ratio(1, 3), rat(1)]];
        let base = iwasawa_exact(GroupKind::Gl(2), p, &g, &id2).unwrap().h;
        let a = vec![vec![rat(27), Rat::zero()], vec![Rat::zero(), ratio(1, 9)]];
        let ag = mat_mul(&a, &g);
        let shifted = iwasawa_exact(GroupKind::Gl(2), p, &ag, &id2).unwrap().h;
        assert_eq!(shifted, vec![base[0] + 3, base[1] - 2]);
    }

    #[test]
    fn tau_frozen_examples() {
        // Inner involution by diag(−1, 1) on the unipotent.
        let eps = rmat(&[&[-1, 0], &[0, 1]]);
        let theta = MatrixInvolution::inner(eps);
        let g = rmat(&[&[1, 1], &[0, 1]]);
        let t = theta.tau_exact(&g).unwrap();
        assert_eq!(t, rmat(&[&[1, 2], &[0, 1]]));

        // Transpose-inverse: τ(g) = gᵀ g, symmetric, with the inversion
        // identity θ(τ(g)) τ(g) = 1.
        let theta = MatrixInvolution::transpose_inverse(2);
        let g = vec![vec![rat(1), rat(2)], vec![ratio(1, 3), rat(5)]];
        let t = theta.tau_exact(&g).unwrap();
        assert_eq!(t, mat_mul(&transpose(&g), &g));
        assert_eq!(t[0][1], t[1][0]);
        let inv_identity = mat_mul(&theta.apply_exact(&t).unwrap(), &t);
        assert_eq!(inv_identity, identity_rat(2));
    }

    #[test]
    fn tau_precision_layer_matches_exact() {
        let ctx = PadicCtx::new(5, 8).unwrap();
        let theta = MatrixInvolution::transpose_inverse(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_group_matrix(5, 2, -1..=1, &mut rng);
            let exact = theta.tau_exact(&m).unwrap();
            let g = PadicMat::from_rat(&ctx, &m).unwrap();
            if let Ok(t) = theta.tau(&ctx, &g) {
                let expect = PadicMat::from_rat(&ctx, &exact).unwrap();
                // Certified agreement: difference has high valuation floor.
                let floor = t.diff_floor(&ctx, &expect);
                assert!(floor.is_none_or(|f| f >= 3), "floor {floor:?}");
            }
        }
    }

    #[test]
    fn building_distance_values_and_triangle() {
        let p = 3;
        let kind = GroupKind::Gl(2);
        assert_eq!(
            building_distance_sq(kind, p, &rmat(&[&[3, 0], &[0, 1]])).unwrap(),
            rat(1)
        );
        assert_eq!(
            building_distance_sq(kind, p, &rmat(&[&[2, 1], &[1, 1]])).unwrap(),
            rat(0)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..30 {
            let a = random_group_matrix(3, 2, -2..=2, &mut rng);
            let b = random_group_matrix(3, 2, -2..=2, &mut rng);
            let ab = mat_mul(&a, &b);
            let da = building_distance_sq(kind, p, &a).unwrap();
            let db = building_distance_sq(kind, p, &b).unwrap();
            let dab = building_distance_sq(kind, p, &ab).unwrap();
            assert!(
                crate::exact::sqrt_triangle_le(&dab, &da, &db),
                "triangle fails: {a:?} {b:?}"
            );
        }
    }

    #[test]
    fn imtau_declared_and_brute_force() {
        let theta = MatrixInvolution::transpose_inverse(2);
        // Parity obstruction holds for every prime.
        for p in [3u64, 5] {
            let decl = ImTauStrategy::Declared(DeclaredImTau::gl2_transpose_inverse(p));
            assert_eq!(imtau_membership(p, &[1, 0], &theta, &decl), ImTauVerdict::No);
            assert_eq!(imtau_membership(p, &[0, 0], &theta, &decl), ImTauVerdict::Yes);
            assert_eq!(imtau_membership(p, &[2, 0], &theta, &decl), ImTauVerdict::Yes);
        }
        // p = 5: (1,1) is reachable, witness [[1,2],[−2,1]].
        let decl5 = ImTauStrategy::Declared(DeclaredImTau::gl2_transpose_inverse(5));
        assert_eq!(imtau_membership(5, &[1, 1], &theta, &decl5), ImTauVerdict::Yes);
        let brute = ImTauStrategy::BruteForce { radius: 3, power_bound: 0 };
        assert_eq!(imtau_membership(5, &[1, 1], &theta, &brute), ImTauVerdict::Yes);
        // p = 3: (1,1) is ruled out by the declared oracle; the search can
        // only say "no witness found".
        let decl3 = ImTauStrategy::Declared(DeclaredImTau::gl2_transpose_inverse(3));
        assert_eq!(imtau_membership(3, &[1, 1], &theta, &decl3), ImTauVerdict::No);
        let brute3 = ImTauStrategy::BruteForce { radius: 2, power_bound: 0 };
        assert_eq!(imtau_membership(3, &[1, 1], &theta, &brute3), ImTauVerdict::Unknown);
    }

    #[test]
    fn imtau_brute_force_agrees_with_declared_on_a_box() {
        let theta = MatrixInvolution::transpose_inverse(2);
        for p in [3u64, 5] {
            let decl = DeclaredImTau::gl2_transpose_inverse(p);
            for a in -2..=2i64 {
                for b in -2..=2i64 {
                    let nu = [a, b];
                    let brute = imtau_membership(
                        p,
                        &nu,
                        &theta,
                        &ImTauStrategy::BruteForce { radius: p as i64, power_bound: 1 },
                    );
                    match brute {
                        ImTauVerdict::Yes => {
                            assert!(decl.contains(&nu), "brute Yes vs declared No at {nu:?} p={p}")
                        }
                        ImTauVerdict::No => unreachable!("brute force never answers No"),
                        ImTauVerdict::Unknown => {}
                    }
                }
            }
        }
    }

    #[test]
    fn parse_scalar_forms() {
        assert_eq!(parse_scalar("p^2", 3).unwrap(), rat(9));
        assert_eq!(parse_scalar("p^-1*2", 3).unwrap(), ratio(2, 3));
        assert_eq!(parse_scalar("-3*p^1", 5).unwrap(), rat(-15));
        assert_eq!(parse_scalar("7/9", 3).unwrap(), ratio(7, 9));
        assert_eq!(parse_scalar("-12", 3).unwrap(), rat(-12));
        assert_eq!(parse_scalar("p", 7).unwrap(), rat(7));
        assert!(parse_scalar("q^2", 3).is_err());
        assert!(parse_scalar("p^x", 3).is_err());
        assert!(parse_scalar("1/0", 3).is_err());
    }

    #[test]
    fn sl_validation() {
        let p = 3;
        let g = vec![vec![rat(1), Rat::zero()], vec![ratio(1, 3), rat(1)]];
        assert!(cartan_exact(GroupKind::Sl(2), p, &g).is_ok());
        let bad = rmat(&[&[3, 0], &[0, 1]]);
        assert!(matches!(
            cartan_exact(GroupKind::Sl(2), p, &bad),
            Err(PadicError::DetNotOne(1))
        ));
    }

    #[test]
    fn sl2sl2_blockwise_cartan() {
        let p = 3;
        let mut g = identity_rat(4);
        g[0][0] = rat(9);
        g[1][1] = ratio(1, 9);
        let cert = cartan_exact(GroupKind::Sl2Sl2, p, &g).unwrap();
        // Per-block dominance, not globally sorted.
        assert_eq!(cert.invariant, vec![2, -2, 0, 0]);
        assert!(cert.verify(p, &g));
        let mut off = identity_rat(4);
        off[0][2] = rat(1);
        assert!(matches!(
            cartan_exact(GroupKind::Sl2Sl2, p, &off),
            Err(PadicError::NonBlockDiagonal)
        ));
    }

    #[test]
    fn random_k_matrices_have_trivial_cartan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for p in [3u64, 5] {
            for _ in 0..20 {
                let k = random_k_matrix(p, 2, &mut rng);
                let cert = cartan_exact(GroupKind::Gl(2), p, &k).unwrap();
                assert_eq!(cert.invariant, vec![0, 0]);
            }
        }
    }

    #[test]
    fn bi_k_invariance_of_cartan() {
        let p = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..25 {
            let g = random_group_matrix(p, 2, -2..=2, &mut rng);
            let k1 = random_k_matrix(p, 2, &mut rng);
            let k2 = random_k_matrix(p, 2, &mut rng);
            let conj = mat_mul(&mat_mul(&k1, &g), &k2);
            assert_eq!(
                cartan_exact(GroupKind::Gl(2), p, &g).unwrap().invariant,
                cartan_exact(GroupKind::Gl(2), p, &conj).unwrap().invariant
            );
        }
    }

    #[test]
    fn cartan_inverse_duality() {
        let p = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let g = random_group_matrix(p, 3, -2..=2, &mut rng);
            let ginv = mat_inverse(&g).unwrap();
            let a = cartan_exact(GroupKind::Gl(3), p, &g).unwrap().invariant;
            let mut b = cartan_exact(GroupKind::Gl(3), p, &ginv).unwrap().invariant;
            // −w₀(a) made dominant is the reversed negation.
            b.iter_mut().for_each(|x| *x = -*x);
            b.reverse();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn shifted_cartan_matches_materialized_products() {
        let p = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let a = random_group_matrix(p, 2, -2..=2, &mut rng);
            let b = random_group_matrix(p, 2, -2..=2, &mut rng);
            for nu in [[0i64, 0], [3, -2], [-4, 4], [7, 1]] {
                let d = rmat(&[&[0, 0], &[0, 0]]);
                let mut d = d;
                d[0][0] = pow_rat(p, nu[0]);
                d[1][1] = pow_rat(p, nu[1]);
                let prod = mat_mul(&mat_mul(&a, &d), &b);
                let want = cartan_exact(GroupKind::Gl(2), p, &prod).unwrap().invariant;
                let got = cartan_shifted_exact(GroupKind::Gl(2), p, &a, &nu, &b).unwrap();
                assert_eq!(got, want, "nu = {nu:?}");
            }
        }
    }

    #[test]
    fn shifted_cartan_survives_shifts_past_machine_width() {
        // 5^±80 is far outside an i128 rational, and conjugating the shift
        // through a non-diagonal pair forces eliminations ~160 digits deep.
        let p = 5;
        let a = rmat(&[&[1, 1], &[1, 2]]);
        let b = rmat(&[&[2, 1], &[1, 1]]);
        let nu = [80i64, -80];
        let got = cartan_shifted_exact(GroupKind::Gl(2), p, &a, &nu, &b).unwrap();
        // det(a·diag·b) = det(a)det(b) = 1·1, min entry valuation −80.
        assert_eq!(got, vec![80, -80]);
        let swap = cartan_shifted_exact(GroupKind::Sl2Sl2, p, &eye4(), &[9, -9, -9, 9], &eye4())
            .unwrap();
        assert_eq!(swap, vec![9, -9, 9, -9]);
    }

    fn eye4() -> Vec<Vec<Rat>> {
        (0..4)
            .map(|i| (0..4).map(|j| if i == j { rat(1) } else { Rat::zero() }).collect())
            .collect()
    }
}
