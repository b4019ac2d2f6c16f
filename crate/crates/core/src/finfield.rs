//! Finite shadows of the two integration identities, checked exhaustively.
//!
//! Working over `Z/p^k` replaces every integral with a finite sum, so the
//! structural content of the identities can be verified exactly, with
//! counting measure standing in for any choice of normalization:
//!
//! * [`fibration_check`] — over `F_p`, the θ-regular locus of 𝔥⊥ is the
//!   disjoint union of the H-saturations of the Cartan subspaces 𝔞_c, and
//!   the saturation map from each is exactly |N_H(𝔞)/Z_H(𝔞)|-to-one. The
//!   check enumerates everything: orbits, normalizers, fibers, totals.
//! * [`plancherel_check`] — for the trace-form duality on 𝔤(Z/p^k), summing
//!   the Fourier transform of a function over a conjugate of 𝔥 equals |𝔥|
//!   times the sum of the function over the matching conjugate of 𝔥⊥.
//!   Verified in exact cyclotomic arithmetic: values live in ℤ[ζ] with
//!   ζ a primitive p^k-th root of unity, and the reported deviation is an
//!   integer that must be exactly zero.
//!
//! Only 2×2 matrix algebras with the two fixture involutions are realized;
//! the prime is always odd so that 1/2 exists and the trace form splits
//! 𝔤 = 𝔥 ⊕ 𝔥⊥ exactly.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FinError {
    #[error("modulus base must be an odd prime, got {0}")]
    BadPrime(u64),
    #[error("level {k} at prime {p} exceeds the supported table sizes")]
    LevelTooLarge { p: u64, k: u32 },
    #[error("matrix determinant is not a unit at this level")]
    NonUnitDeterminant,
    #[error("function table has {got} entries, algebra has {want} elements")]
    WrongTableSize { want: usize, got: usize },
    #[error("fibration check is defined for sl₂ at level one with the diagonal involution")]
    UnsupportedFibration,
}

/// 2×2 matrix over `Z/p^k`, entries reduced.
pub type FinMat = [[u64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgebraKind {
    Sl2,
    Gl2,
}

/// The two fixture involutions, at the algebra level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiniteInvolution {
    /// X ↦ εXε⁻¹ with ε = diag(−1, 1); fixes the diagonal.
    IntDiag,
    /// X ↦ −Xᵀ, the derivative of the transpose-inverse; fixes the
    /// antisymmetric part.
    NegTranspose,
}

/// 𝔤(Z/p^k) for 𝔤 ∈ {sl₂, gl₂} with a trace-form-compatible involution and
/// the exact eigenspace decomposition 𝔤 = 𝔥 ⊕ 𝔥⊥.
#[derive(Debug, Clone)]
pub struct FiniteLieAlgebra {
    p: u64,
    k: u32,
    m: u64,
    kind: AlgebraKind,
    theta: FiniteInvolution,
    basis: Vec<FinMat>,
    h_basis: Vec<FinMat>,
    hperp_basis: Vec<FinMat>,
}

fn is_odd_prime(p: u64) -> bool {
    if p < 3 || p % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

impl FiniteLieAlgebra {
    pub fn new(
        p: u64,
        k: u32,
        kind: AlgebraKind,
        theta: FiniteInvolution,
    ) -> Result<Self, FinError> {
        if !is_odd_prime(p) {
            return Err(FinError::BadPrime(p));
        }
        let mut m: u64 = 1;
        for _ in 0..k {
            m = m.checked_mul(p).filter(|&v| v <= 512).ok_or(FinError::LevelTooLarge { p, k })?;
        }
        if k == 0 {
            return Err(FinError::LevelTooLarge { p, k });
        }
        let neg = m - 1; // −1 mod m
        let basis: Vec<FinMat> = match kind {
            AlgebraKind::Sl2 => vec![
                [[1, 0], [0, neg]], // h
                [[0, 1], [0, 0]],   // e
                [[0, 0], [1, 0]],   // f
            ],
            AlgebraKind::Gl2 => vec![
                [[1, 0], [0, 0]],
                [[0, 1], [0, 0]],
                [[0, 0], [1, 0]],
                [[0, 0], [0, 1]],
            ],
        };
        let (h_basis, hperp_basis): (Vec<FinMat>, Vec<FinMat>) = match (kind, theta) {
            (AlgebraKind::Sl2, FiniteInvolution::IntDiag) => (
                vec![[[1, 0], [0, neg]]],
                vec![[[0, 1], [0, 0]], [[0, 0], [1, 0]]],
            ),
            (AlgebraKind::Sl2, FiniteInvolution::NegTranspose) => (
                vec![[[0, 1], [neg, 0]]],
                vec![[[1, 0], [0, neg]], [[0, 1], [1, 0]]],
            ),
            (AlgebraKind::Gl2, FiniteInvolution::IntDiag) => (
                vec![[[1, 0], [0, 0]], [[0, 0], [0, 1]]],
                vec![[[0, 1], [0, 0]], [[0, 0], [1, 0]]],
            ),
            (AlgebraKind::Gl2, FiniteInvolution::NegTranspose) => (
                vec![[[0, 1], [neg, 0]]],
                vec![[[1, 0], [0, 0]], [[0, 0], [0, 1]], [[0, 1], [1, 0]]],
            ),
        };
        let alg = FiniteLieAlgebra { p, k, m, kind, theta, basis, h_basis, hperp_basis };
        // The decomposition is data above; make it a checked invariant here.
        for b in &alg.h_basis {
            debug_assert_eq!(alg.theta_of(b), *b);
        }
        for b in &alg.hperp_basis {
            debug_assert_eq!(alg.theta_of(b), alg.neg_mat(b));
        }
        for x in &alg.h_basis {
            for y in &alg.hperp_basis {
                debug_assert_eq!(alg.trace_form(x, y), 0);
            }
        }
        debug_assert_eq!(alg.h_basis.len() + alg.hperp_basis.len(), alg.basis.len());
        Ok(alg)
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn level(&self) -> u32 {
        self.k
    }

    /// The modulus p^k.
    pub fn modulus(&self) -> u64 {
        self.m
    }

    pub fn kind(&self) -> AlgebraKind {
        self.kind
    }

    pub fn involution(&self) -> FiniteInvolution {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn h_dim(&self) -> usize {
        self.h_basis.len()
    }

    pub fn hperp_dim(&self) -> usize {
        self.hperp_basis.len()
    }

    pub fn element_count(&self) -> usize {
        (self.m as usize).pow(self.dim() as u32)
    }

    fn neg_mat(&self, x: &FinMat) -> FinMat {
        let m = self.m;
        let mut out = [[0u64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (m - x[i][j]) % m;
            }
        }
        out
    }

    pub fn add(&self, x: &FinMat, y: &FinMat) -> FinMat {
        let mut out = [[0u64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (x[i][j] + y[i][j]) % self.m;
            }
        }
        out
    }

    pub fn scale(&self, c: u64, x: &FinMat) -> FinMat {
        let mut out = [[0u64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (c % self.m) * x[i][j] % self.m;
            }
        }
        out
    }

    pub fn mat_mul(&self, x: &FinMat, y: &FinMat) -> FinMat {
        let m = self.m;
        let mut out = [[0u64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (x[i][0] * y[0][j] + x[i][1] * y[1][j]) % m;
            }
        }
        out
    }

    pub fn bracket(&self, x: &FinMat, y: &FinMat) -> FinMat {
        self.add(&self.mat_mul(x, y), &self.neg_mat(&self.mat_mul(y, x)))
    }

    /// ⟨X, Y⟩ = tr(XY) in Z/p^k.
    pub fn trace_form(&self, x: &FinMat, y: &FinMat) -> u64 {
        let xy = self.mat_mul(x, y);
        (xy[0][0] + xy[1][1]) % self.m
    }

    pub fn theta_of(&self, x: &FinMat) -> FinMat {
        let m = self.m;
        match self.theta {
            FiniteInvolution::IntDiag => {
                // diag(−1,1)·X·diag(−1,1) flips the off-diagonal signs.
                [
                    [x[0][0], (m - x[0][1]) % m],
                    [(m - x[1][0]) % m, x[1][1]],
                ]
            }
            FiniteInvolution::NegTranspose => [
                [(m - x[0][0]) % m, (m - x[1][0]) % m],
                [(m - x[0][1]) % m, (m - x[1][1]) % m],
            ],
        }
    }

    fn coords_of(&self, x: &FinMat) -> Vec<u64> {
        match self.kind {
            AlgebraKind::Sl2 => vec![x[0][0], x[0][1], x[1][0]],
            AlgebraKind::Gl2 => vec![x[0][0], x[0][1], x[1][0], x[1][1]],
        }
    }

    /// Index of an algebra element in the canonical enumeration.
    pub fn index_of(&self, x: &FinMat) -> usize {
        let mut idx = 0usize;
        for c in self.coords_of(x).iter().rev() {
            idx = idx * self.m as usize + *c as usize;
        }
        idx
    }

    pub fn element_at(&self, mut idx: usize) -> FinMat {
        let m = self.m as usize;
        let mut out = [[0u64; 2]; 2];
        let mut coords = Vec::with_capacity(self.dim());
        for _ in 0..self.dim() {
            coords.push((idx % m) as u64);
            idx /= m;
        }
        match self.kind {
            AlgebraKind::Sl2 => {
                out[0][0] = coords[0];
                out[0][1] = coords[1];
                out[1][0] = coords[2];
                out[1][1] = (self.m - coords[0]) % self.m;
            }
            AlgebraKind::Gl2 => {
                out[0][0] = coords[0];
                out[0][1] = coords[1];
                out[1][0] = coords[2];
                out[1][1] = coords[3];
            }
        }
        out
    }

    fn span(&self, basis: &[FinMat]) -> Vec<FinMat> {
        let m = self.m;
        let mut out = vec![[[0u64; 2]; 2]];
        for b in basis {
            let mut next = Vec::with_capacity(out.len() * m as usize);
            for x in &out {
                for t in 0..m {
                    next.push(self.add(x, &self.scale(t, b)));
                }
            }
            out = next;
        }
        out
    }

    /// All elements of 𝔥.
    pub fn h_elements(&self) -> Vec<FinMat> {
        self.span(&self.h_basis)
    }

    /// All elements of 𝔥⊥.
    pub fn hperp_elements(&self) -> Vec<FinMat> {
        self.span(&self.hperp_basis)
    }

    pub fn det(&self, g: &FinMat) -> u64 {
        (g[0][0] * g[1][1] % self.m + self.m * self.m - g[0][1] * g[1][0] % self.m) % self.m
    }

    fn unit_inverse(&self, a: u64) -> Option<u64> {
        let e = (a as i128).extended_gcd(&(self.m as i128));
        if e.gcd != 1 {
            return None;
        }
        Some(e.x.rem_euclid(self.m as i128) as u64)
    }

    pub fn mat_inverse(&self, g: &FinMat) -> Result<FinMat, FinError> {
        let d = self.unit_inverse(self.det(g)).ok_or(FinError::NonUnitDeterminant)?;
        let m = self.m;
        Ok([
            [g[1][1] * d % m, (m - g[0][1] % m) % m * d % m],
            [(m - g[1][0] % m) % m * d % m, g[0][0] * d % m],
        ])
    }

    /// Ad g (X) = gXg⁻¹.
    pub fn adjoint(&self, g: &FinMat, x: &FinMat) -> Result<FinMat, FinError> {
        let ginv = self.mat_inverse(g)?;
        Ok(self.mat_mul(&self.mat_mul(g, x), &ginv))
    }
}

// ---------------------------------------------------------------------------
// The fibration of the θ-regular locus.
// ---------------------------------------------------------------------------

/// One Cartan subspace class 𝔞_c = {(0, ct; t, 0)} with its saturation and
/// orbit data over F_p. Two parameters give H-conjugate subspaces exactly
/// when their ratio is a fourth power, and the saturation map
/// H/Z_H(𝔞) × 𝔞ʳᵉᵍ → U(𝔞) is |N_H(𝔞)/Z_H(𝔞)|-to-one.
#[derive(Debug, Clone)]
pub struct CartanSubspaceRecord {
    /// Smallest parameter in the class.
    pub parameter: u64,
    /// All parameters conjugate to it.
    pub class_parameters: Vec<u64>,
    /// Size of the saturation U(𝔞).
    pub u_size: usize,
    /// Sizes of the H-orbits making up U(𝔞), ascending.
    pub orbit_sizes: Vec<usize>,
    pub normalizer_size: usize,
    pub centralizer_size: usize,
    /// Verified uniform fiber size of the saturation map — the Weyl number
    /// of the subspace.
    pub fiber_size: usize,
}

#[derive(Debug, Clone)]
pub struct FibrationReport {
    pub p: u64,
    pub theta_regular: usize,
    pub records: Vec<CartanSubspaceRecord>,
    /// Saturations are pairwise disjoint.
    pub disjoint: bool,
    /// Saturations cover the θ-regular locus.
    pub covers: bool,
    /// Every fiber of every saturation map had the record's size.
    pub fibers_uniform: bool,
}

impl FibrationReport {
    pub fn ok(&self) -> bool {
        self.disjoint
            && self.covers
            && self.fibers_uniform
            && self.records.iter().map(|r| r.u_size).sum::<usize>() == self.theta_regular
    }
}

/// Exhaustively verify, over F_p, that the θ-regular antidiagonal elements
/// fall into Cartan-subspace saturations that are disjoint, covering, and
/// uniformly fibered by the explicit normalizer quotient.
pub fn fibration_check(alg: &FiniteLieAlgebra) -> Result<FibrationReport, FinError> {
    if alg.kind != AlgebraKind::Sl2 || alg.theta != FiniteInvolution::IntDiag || alg.k != 1 {
        return Err(FinError::UnsupportedFibration);
    }
    let p = alg.p;
    let units: Vec<u64> = (1..p).collect();
    let sq = |a: u64| a * a % p;
    let quart = |a: u64| sq(a) * sq(a) % p;
    let fourth_powers: BTreeSet<u64> = units.iter().map(|&a| quart(a)).collect();

    // θ-regular locus: antidiagonal (b, c) with invertible product.
    let regular: BTreeSet<(u64, u64)> =
        units.iter().flat_map(|&b| units.iter().map(move |&c| (b, c))).collect();

    // H-orbit partition: (b, c) ↦ (a²b, a⁻²c).
    let mut orbit_of: BTreeMap<(u64, u64), (u64, u64)> = BTreeMap::new();
    for &(b, c) in &regular {
        let mut rep = (b, c);
        for &a in &units {
            let s = sq(a);
            let sinv = alg.unit_inverse(s).expect("unit square");
            rep = rep.min((s * b % p, sinv * c % p));
        }
        orbit_of.insert((b, c), rep);
    }

    // Class representatives of the Cartan parameters.
    let mut class_of: BTreeMap<u64, u64> = BTreeMap::new();
    for &c in &units {
        let rep = fourth_powers.iter().map(|&q| q * c % p).min().unwrap();
        class_of.insert(c, rep);
    }
    let reps: BTreeSet<u64> = class_of.values().copied().collect();

    let centralizer_size = units.iter().filter(|&&a| sq(a) == 1).count();
    let normalizer_size = units.iter().filter(|&&a| quart(a) == 1).count();

    let mut records = Vec::new();
    let mut seen: BTreeSet<(u64, u64)> = BTreeSet::new();
    let mut disjoint = true;
    let mut fibers_uniform = true;
    for &rep in &reps {
        // Saturation of 𝔞_rep with raw (a, t) multiplicities.
        let mut tally: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        for &a in &units {
            let s = sq(a);
            let sinv = alg.unit_inverse(s).expect("unit square");
            for &t in &units {
                let y = (rep * t % p * s % p, t * sinv % p);
                *tally.entry(y).or_insert(0) += 1;
            }
        }
        if tally.values().any(|&n| n != normalizer_size) {
            fibers_uniform = false;
        }
        let u: BTreeSet<(u64, u64)> = tally.keys().copied().collect();
        for y in &u {
            if !seen.insert(*y) {
                disjoint = false;
            }
        }
        // The saturation must consist of whole H-orbits.
        let mut orbit_sizes: Vec<usize> = u
            .iter()
            .map(|y| orbit_of[y])
            .collect::<BTreeSet<_>>()
            .iter()
            .map(|r| orbit_of.values().filter(|&&o| o == *r).count())
            .collect();
        orbit_sizes.sort_unstable();
        if orbit_sizes.iter().sum::<usize>() != u.len() {
            disjoint = false;
        }
        records.push(CartanSubspaceRecord {
            parameter: rep,
            class_parameters: units.iter().copied().filter(|&c| class_of[&c] == rep).collect(),
            u_size: u.len(),
            orbit_sizes,
            normalizer_size,
            centralizer_size,
            fiber_size: normalizer_size / centralizer_size,
        });
    }
    let covers = seen == regular;
    Ok(FibrationReport {
        p,
        theta_regular: regular.len(),
        records,
        disjoint,
        covers,
        fibers_uniform,
    })
}

// ---------------------------------------------------------------------------
// Exact cyclotomic arithmetic.
// ---------------------------------------------------------------------------

/// Element of ℤ[x]/(x^m − 1): the additive character ψ(t) = x^t lives here,
/// and identities are decided after reduction modulo the p^k-th cyclotomic
/// polynomial, which cuts the ring down to ℤ[ζ].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycVec {
    pub coeffs: Vec<i128>,
}

impl CycVec {
    pub fn zero(m: u64) -> Self {
        CycVec { coeffs: vec![0; m as usize] }
    }

    pub fn add_monomial(&mut self, exponent: u64, weight: i128) {
        let m = self.coeffs.len() as u64;
        self.coeffs[(exponent % m) as usize] += weight;
    }

    pub fn sub_assign(&mut self, other: &CycVec) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= b;
        }
    }

    /// Remainder modulo Φ_{p^k}(x) = Σ_{j<p} x^{j·p^{k−1}}, as an integer
    /// polynomial of degree < (p−1)p^{k−1}. Zero here is zero in ℤ[ζ].
    pub fn reduce_cyclotomic(&self, p: u64) -> Vec<i128> {
        let m = self.coeffs.len() as u64;
        let step = (m / p) as usize;
        let deg = step * (p as usize - 1);
        let mut v = self.coeffs.clone();
        for i in (deg..v.len()).rev() {
            let c = v[i];
            if c == 0 {
                continue;
            }
            v[i] = 0;
            // c·x^i ≡ c·x^{i−deg}·(x^deg − Φ) = −c·Σ_{j<p−1} x^{i−deg+j·step}
            for j in 0..p as usize - 1 {
                v[i - deg + j * step] -= c;
            }
        }
        v.truncate(deg);
        v
    }

    pub fn max_abs_reduced(&self, p: u64) -> i128 {
        self.reduce_cyclotomic(p).iter().map(|c| c.abs()).max().unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// The modified Plancherel identity.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PlancherelReport {
    /// Largest |coefficient| of LHS − RHS after cyclotomic reduction;
    /// the identity holds exactly iff this is zero.
    pub deviation: i128,
    /// Number of points the transform's adjoint-equivariance was checked at.
    pub equivariance_checked: usize,
    pub equivariance_ok: bool,
}

impl PlancherelReport {
    pub fn ok(&self) -> bool {
        self.deviation == 0 && self.equivariance_ok
    }
}

/// Fourier transform of `f` at `y`: Σ_X f(X)·x^{⟨X,y⟩}, in the group
/// algebra of Z/p^k.
fn transform_at(alg: &FiniteLieAlgebra, f: &[i64], y: &FinMat) -> CycVec {
    let mut out = CycVec::zero(alg.modulus());
    for (i, &fi) in f.iter().enumerate() {
        if fi != 0 {
            let x = alg.element_at(i);
            out.add_monomial(alg.trace_form(&x, y), fi as i128);
        }
    }
    out
}

/// Verify Σ_{Y ∈ 𝔥} f̂(g⁻¹Yg) = |𝔥| · Σ_{X ∈ 𝔥⊥} f(g⁻¹Xg) exactly, for a
/// function table on 𝔤(Z/p^k) and a unit-determinant g, together with the
/// adjoint-equivariance of the transform.
pub fn plancherel_check(
    alg: &FiniteLieAlgebra,
    f: &[i64],
    g: &FinMat,
) -> Result<PlancherelReport, FinError> {
    if f.len() != alg.element_count() {
        return Err(FinError::WrongTableSize { want: alg.element_count(), got: f.len() });
    }
    let ginv = alg.mat_inverse(g)?;
    let conj = |x: &FinMat| alg.mat_mul(&alg.mat_mul(&ginv, x), g);

    let mut lhs = CycVec::zero(alg.modulus());
    for y in alg.h_elements() {
        let z = conj(&y);
        for (i, &fi) in f.iter().enumerate() {
            if fi != 0 {
                let x = alg.element_at(i);
                lhs.add_monomial(alg.trace_form(&x, &z), fi as i128);
            }
        }
    }
    let h_count = alg.h_elements().len() as i128;
    let mut rhs: i128 = 0;
    for x in alg.hperp_elements() {
        rhs += f[alg.index_of(&conj(&x))] as i128;
    }
    lhs.add_monomial(0, -h_count * rhs);
    let deviation = lhs.max_abs_reduced(alg.p);

    // (f ∘ Ad g)^ = f̂ ∘ Ad g, checked on the basis and all of 𝔥. Both
    // sides are plain reindexings of the same character sum, so equality
    // already holds coefficientwise in the group algebra.
    let mut f_conj = vec![0i64; f.len()];
    for (i, slot) in f_conj.iter_mut().enumerate() {
        let x = alg.element_at(i);
        *slot = f[alg.index_of(&alg.adjoint(g, &x)?)];
    }
    let mut equivariance_ok = true;
    let mut checked = 0;
    let mut probes = alg.basis.clone();
    probes.extend(alg.h_elements());
    for y in &probes {
        let left = transform_at(alg, &f_conj, y);
        let right = transform_at(alg, f, &alg.adjoint(g, y)?);
        checked += 1;
        if left != right {
            equivariance_ok = false;
        }
    }
    Ok(PlancherelReport { deviation, equivariance_checked: checked, equivariance_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn alg(p: u64, k: u32, kind: AlgebraKind, theta: FiniteInvolution) -> FiniteLieAlgebra {
        FiniteLieAlgebra::new(p, k, kind, theta).unwrap()
    }

    fn all_pairs() -> Vec<(AlgebraKind, FiniteInvolution)> {
        vec![
            (AlgebraKind::Sl2, FiniteInvolution::IntDiag),
            (AlgebraKind::Sl2, FiniteInvolution::NegTranspose),
            (AlgebraKind::Gl2, FiniteInvolution::IntDiag),
            (AlgebraKind::Gl2, FiniteInvolution::NegTranspose),
        ]
    }

    fn random_unit_matrix<R: Rng>(a: &FiniteLieAlgebra, rng: &mut R) -> FinMat {
        loop {
            let m = a.modulus();
            let g = [[rng.gen_range(0..m), rng.gen_range(0..m)], [
                rng.gen_range(0..m),
                rng.gen_range(0..m),
            ]];
            if a.mat_inverse(&g).is_ok() {
                return g;
            }
        }
    }

    #[test]
    fn decomposition_splits_every_fixture_pair() {
        for (p, k) in [(3, 1), (3, 2), (5, 1), (7, 1)] {
            for (kind, theta) in all_pairs() {
                let a = alg(p, k, kind, theta);
                assert_eq!(a.h_dim() + a.hperp_dim(), a.dim());
                // θ is an involution and an isometry of the trace form.
                for i in 0..a.element_count().min(200) {
                    let x = a.element_at(i * 7 % a.element_count());
                    assert_eq!(a.theta_of(&a.theta_of(&x)), x);
                    let y = a.element_at(i * 13 % a.element_count());
                    assert_eq!(
                        a.trace_form(&a.theta_of(&x), &a.theta_of(&y)),
                        a.trace_form(&x, &y)
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_bad_moduli() {
        assert_eq!(
            FiniteLieAlgebra::new(4, 1, AlgebraKind::Sl2, FiniteInvolution::IntDiag).unwrap_err(),
            FinError::BadPrime(4)
        );
        assert_eq!(
            FiniteLieAlgebra::new(2, 1, AlgebraKind::Sl2, FiniteInvolution::IntDiag).unwrap_err(),
            FinError::BadPrime(2)
        );
        assert_eq!(
            FiniteLieAlgebra::new(3, 0, AlgebraKind::Sl2, FiniteInvolution::IntDiag).unwrap_err(),
            FinError::LevelTooLarge { p: 3, k: 0 }
        );
        assert!(FiniteLieAlgebra::new(3, 9, AlgebraKind::Sl2, FiniteInvolution::IntDiag).is_err());
    }

    #[test]
    fn element_indexing_round_trips() {
        for (kind, theta) in all_pairs() {
            let a = alg(3, 2, kind, theta);
            for i in 0..a.element_count() {
                assert_eq!(a.index_of(&a.element_at(i)), i);
            }
        }
    }

    #[test]
    fn cartan_subspaces_are_abelian_and_antifixed() {
        let a = alg(7, 1, AlgebraKind::Sl2, FiniteInvolution::IntDiag);
        for c in 1..7u64 {
            for t in 1..7u64 {
                for s in 1..7u64 {
                    let x = [[0, c * t % 7], [t, 0]];
                    let y = [[0, c * s % 7], [s, 0]];
                    assert_eq!(a.bracket(&x, &y), [[0, 0], [0, 0]]);
                    assert_eq!(a.theta_of(&x), a.neg_mat(&x));
                }
            }
        }
    }

    #[test]
    fn fibration_structure_at_the_three_small_primes() {
        // p = 3: every unit is a fourth power's inverse image — two
        // parameter classes, trivial Weyl number, singleton orbits.
        let r3 = fibration_check(&alg(3, 1, AlgebraKind::Sl2, FiniteInvolution::IntDiag)).unwrap();
        assert!(r3.ok());
        assert_eq!(r3.theta_regular, 4);
        assert_eq!(r3.records.len(), 2);
        for rec in &r3.records {
            assert_eq!(rec.u_size, 2);
            assert_eq!(rec.fiber_size, 1);
            assert_eq!(rec.orbit_sizes, vec![1, 1]);
        }

        // p = 5: a⁴ = 1 for every unit, so each parameter is its own class
        // and the Weyl number is 2.
        let r5 = fibration_check(&alg(5, 1, AlgebraKind::Sl2, FiniteInvolution::IntDiag)).unwrap();
        assert!(r5.ok());
        assert_eq!(r5.theta_regular, 16);
        assert_eq!(r5.records.len(), 4);
        for rec in &r5.records {
            assert_eq!(rec.u_size, 4);
            assert_eq!(rec.fiber_size, 2);
            assert_eq!(rec.normalizer_size, 4);
            assert_eq!(rec.orbit_sizes, vec![2, 2]);
        }

        // p = 7: fourth powers coincide with squares — two classes of
        // three parameters, orbits of size three.
        let r7 = fibration_check(&alg(7, 1, AlgebraKind::Sl2, FiniteInvolution::IntDiag)).unwrap();
        assert!(r7.ok());
        assert_eq!(r7.theta_regular, 36);
        assert_eq!(r7.records.len(), 2);
        for rec in &r7.records {
            assert_eq!(rec.class_parameters.len(), 3);
            assert_eq!(rec.u_size, 18);
            assert_eq!(rec.fiber_size, 1);
            assert_eq!(rec.orbit_sizes, vec![3; 6]);
        }
    }

    #[test]
    fn fibration_rejects_other_setups() {
        let gl = alg(3, 1, AlgebraKind::Gl2, FiniteInvolution::IntDiag);
        assert_eq!(fibration_check(&gl).unwrap_err(), FinError::UnsupportedFibration);
        let level2 = alg(3, 2, AlgebraKind::Sl2, FiniteInvolution::IntDiag);
        assert_eq!(fibration_check(&level2).unwrap_err(), FinError::UnsupportedFibration);
        let twist = alg(3, 1, AlgebraKind::Sl2, FiniteInvolution::NegTranspose);
        assert_eq!(fibration_check(&twist).unwrap_err(), FinError::UnsupportedFibration);
    }

    #[test]
    fn character_sums_reduce_to_zero_exactly() {
        // Full character sum over Z/9 vanishes in ℤ[ζ₉]…
        let mut full = CycVec::zero(9);
        for t in 0..9 {
            full.add_monomial(t, 1);
        }
        assert_eq!(full.max_abs_reduced(3), 0);
        // …as does the sum over the index-3 subgroup…
        let mut sub = CycVec::zero(9);
        for t in [0, 3, 6] {
            sub.add_monomial(t, 1);
        }
        assert_eq!(sub.max_abs_reduced(3), 0);
        // …while a single root of unity does not.
        let mut one = CycVec::zero(9);
        one.add_monomial(3, 1);
        assert_ne!(one.max_abs_reduced(3), 0);
    }

    #[test]
    fn delta_and_indicator_functions_balance_exactly() {
        for (kind, theta) in all_pairs() {
            let a = alg(3, 1, kind, theta);
            let id = [[1, 0], [0, 1]];
            // Delta at zero.
            let mut delta = vec![0i64; a.element_count()];
            delta[a.index_of(&[[0, 0], [0, 0]])] = 1;
            let rep = plancherel_check(&a, &delta, &id).unwrap();
            assert!(rep.ok(), "delta failed for {kind:?}/{theta:?}");
            // Indicator of 𝔥⊥.
            let mut ind = vec![0i64; a.element_count()];
            for x in a.hperp_elements() {
                ind[a.index_of(&x)] = 1;
            }
            let rep = plancherel_check(&a, &ind, &id).unwrap();
            assert!(rep.ok(), "indicator failed for {kind:?}/{theta:?}");
        }
    }

    #[test]
    fn random_tables_balance_at_all_fixture_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for (p, k) in [(3u64, 1u32), (3, 2), (5, 1)] {
            for (kind, theta) in
                [(AlgebraKind::Sl2, FiniteInvolution::IntDiag), (AlgebraKind::Gl2, FiniteInvolution::NegTranspose)]
            {
                if k > 1 && kind == AlgebraKind::Gl2 {
                    continue; // keep the slow 6561-element case out of unit tests
                }
                let a = alg(p, k, kind, theta);
                for _ in 0..3 {
                    let f: Vec<i64> =
                        (0..a.element_count()).map(|_| rng.gen_range(-9..=9)).collect();
                    let g = random_unit_matrix(&a, &mut rng);
                    let rep = plancherel_check(&a, &f, &g).unwrap();
                    assert_eq!(rep.deviation, 0);
                    assert!(rep.equivariance_ok);
                    assert!(rep.equivariance_checked >= a.modulus() as usize);
                }
            }
        }
    }

    #[test]
    fn plancherel_rejects_bad_inputs() {
        let a = alg(3, 1, AlgebraKind::Sl2, FiniteInvolution::IntDiag);
        let id = [[1, 0], [0, 1]];
        assert_eq!(
            plancherel_check(&a, &[0; 5], &id).unwrap_err(),
            FinError::WrongTableSize { want: 27, got: 5 }
        );
        let f = vec![0i64; a.element_count()];
        let singular = [[1, 2], [2, 1]]; // det = 1·1 − 2·2 = −3 ≡ 0 mod 3
        assert_eq!(plancherel_check(&a, &f, &singular).unwrap_err(), FinError::NonUnitDeterminant);
    }
}
