//! Truncation weight factors attached to a matrix symmetric pair.
//!
//! Everything here is indexed by a [`Realization`] — a based root datum for
//! the maximal split torus, the ambient matrix group, a matrix involution θ,
//! its induced action θ⋆ on the cocharacter lattice, and an oracle for the
//! torus part of the image of the symmetrization map τ(g) = θ(g)⁻¹g — and by
//! a [`TruncationContext`], which fixes a facet (naming a Levi through the
//! central torus of its stabilizer) and a dominant parameter μ.
//!
//! Three weight factors are computed, all as exact integer counts:
//!
//! * `omega_bar` — does the elementary-divisor invariant of τ(g) lie in the
//!   Λ-restricted orbit hull of μ?
//! * `omega_m` — how many shifts ν in the split central cocharacter lattice
//!   of the Levi move τ(g) into that hull? The shifted invariant
//!   `Cartan(θ(g)⁻¹ · p^ν · g)` is evaluated in arbitrary-precision exact
//!   arithmetic, so shifts far outside the machine-width range stay exact.
//! * `omega_m_asymp` / `theta_split_asymp` — the asymptotic replacement:
//!   triangular-retraction heights of g and θ(g) deform the orbit hull into
//!   the height family, and shifts are counted inside its restricted hull,
//!   either directly or after folding into the θ-split cone.
//!
//! The degree sweeps ([`sweep_weights`], [`verify_geometric_lemma`],
//! [`nu_m_fit`], [`main_limit_check`]) exploit that along μ₁ + d·μ₂ every
//! membership coefficient is an affine function of d: each candidate shift
//! contributes an exact integer interval of degrees, so a whole degree range
//! costs one scan of the candidate box rather than one scan per degree.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use thiserror::Error;

use crate::exact::{
    dot, integer_kernel, mat_inverse, pair, rat, solve_unique, sqrt_upper, vec_add, vec_rat,
    vec_scale, vec_sub, Rat,
};
use crate::latcount::{self, LatError, PolyFit};
use crate::orthoset::{
    hull_member_vertex, minus_set, orbit_set, restricted_hull_member, star_hull_member, validate,
    validate_restricted, OrthoError,
};
use crate::padic::{
    building_distance_upper, cartan_exact, cartan_shifted_exact, imtau_membership, iwasawa_exact,
    pow_rat, random_group_matrix, random_sl2_matrix, DeclaredImTau, GroupKind, ImTauStrategy,
    ImTauVerdict, MatrixInvolution, PadicCtx, PadicError, DEFAULT_PRECISION,
};
use crate::rootdata::{standard, FacetIndex, InvolutionSpec, RootDatum, RootDatumError};

#[derive(Debug, Error, PartialEq)]
pub enum TruncError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Ortho(#[from] OrthoError),
    #[error(transparent)]
    Rootdata(#[from] RootDatumError),
    #[error(transparent)]
    Lat(#[from] LatError),
    #[error("matrix group does not act on a space of the ambient dimension")]
    KindMismatch,
    #[error("matrix involution and declared torus involution disagree on a basis coweight")]
    ThetaMismatch,
    #[error("facet index out of range for this root datum")]
    BadFacet,
    #[error("truncation parameter must be a dominant vector of the cocharacter span")]
    MuNotDominant,
    #[error("dilation direction must be strictly dominant")]
    Mu2NotRegular,
    #[error("dilation direction must be a lattice vector of the coroot span with trivial class")]
    SlopeNotCentered,
    #[error(
        "facet names a Levi that is not split: a root vanishes on the split part of its \
         central torus without vanishing on all of it"
    )]
    LeviNotSplit,
    #[error("height family degenerates for this element")]
    BelowRegularityThreshold,
    #[error("membership oracle for the symmetrization image was inconclusive on the scanned box")]
    ImTauInconclusive,
    #[error("degree window must contain at least {need} consecutive degrees")]
    WindowTooShort { need: usize },
    #[error("need at least {need} held-out degrees, got {got}")]
    HoldoutTooSmall { need: usize, got: usize },
    #[error("degree range is empty, starts below zero, or precedes the fit window")]
    BadDegreeRange,
    #[error("count at degree {first_failing} deviates from the fitted polynomial")]
    NotYetPolynomial { first_failing: i64 },
    #[error("weight of sample {sample} still deviates from its polynomial at degree {d}")]
    NonVanishingTail { sample: usize, d: i64 },
}

// ---------------------------------------------------------------------------
// Realization of a symmetric pair.
// ---------------------------------------------------------------------------

/// A matrix realization of a symmetric pair: root datum, ambient matrix
/// group, matrix involution, its action on the cocharacter lattice, and an
/// oracle for the torus part of the image of τ(g) = θ(g)⁻¹g.
#[derive(Debug, Clone)]
pub struct Realization {
    datum: RootDatum,
    kind: GroupKind,
    p: u64,
    prec: u32,
    theta_mat: MatrixInvolution,
    theta_star: InvolutionSpec,
    imtau: ImTauStrategy,
}

impl Realization {
    /// Assemble and cross-check a realization. The matrix involution must
    /// act on diagonal one-parameter subgroups exactly as the declared
    /// lattice involution does: θ(p^ν) = p^{θ⋆ν} for every basis coweight ν.
    pub fn new(
        datum: RootDatum,
        kind: GroupKind,
        p: u64,
        prec: u32,
        theta_mat: MatrixInvolution,
        theta_star: InvolutionSpec,
        imtau: ImTauStrategy,
    ) -> Result<Self, TruncError> {
        if datum.dim() != kind.n() {
            return Err(TruncError::KindMismatch);
        }
        PadicCtx::new(p, prec)?;
        for row in datum.lattice_rows() {
            let image = theta_mat.apply_exact(&diag_prime_powers(p, row))?;
            let trow: Vec<i64> = theta_star
                .apply(&vec_rat(row))
                .iter()
                .map(|c| c.to_integer() as i64)
                .collect();
            if image != diag_prime_powers(p, &trow) {
                return Err(TruncError::ThetaMismatch);
            }
        }
        Ok(Realization { datum, kind, p, prec, theta_mat, theta_star, imtau })
    }

    /// GL₂ with θ(g) = (gᵀ)⁻¹: the torus involution is t ↦ t⁻¹, the whole
    /// cocharacter lattice is split, and the torus part of Im τ is the
    /// declared sublattice for this pair.
    pub fn gl2_transpose_inverse(p: u64) -> Result<Self, TruncError> {
        let datum = standard::gl(2);
        let theta_star = standard::theta_minus_one(&datum);
        Self::new(
            datum,
            GroupKind::Gl(2),
            p,
            DEFAULT_PRECISION,
            MatrixInvolution::transpose_inverse(2),
            theta_star,
            ImTauStrategy::Declared(DeclaredImTau::gl2_transpose_inverse(p)),
        )
    }

    /// SL₂ × SL₂ with θ swapping the factors, realized inside 4×4 matrices
    /// as conjugation by the block-swap permutation.
    pub fn sl2sl2_swap(p: u64) -> Result<Self, TruncError> {
        let datum = standard::sl2_x_sl2();
        let theta_star = standard::theta_swap_halves(&datum);
        let mut eps = vec![vec![Rat::zero(); 4]; 4];
        for (i, j) in [(0, 2), (1, 3), (2, 0), (3, 1)] {
            eps[i][j] = rat(1);
        }
        Self::new(
            datum,
            GroupKind::Sl2Sl2,
            p,
            DEFAULT_PRECISION,
            MatrixInvolution::inner(eps),
            theta_star,
            ImTauStrategy::Declared(DeclaredImTau::sl2sl2_swap()),
        )
    }

    pub fn with_precision(mut self, prec: u32) -> Result<Self, TruncError> {
        PadicCtx::new(self.p, prec)?;
        self.prec = prec;
        Ok(self)
    }

    pub fn with_imtau(mut self, imtau: ImTauStrategy) -> Self {
        self.imtau = imtau;
        self
    }

    pub fn datum(&self) -> &RootDatum {
        &self.datum
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn theta_star(&self) -> &InvolutionSpec {
        &self.theta_star
    }

    pub fn theta_mat(&self) -> &MatrixInvolution {
        &self.theta_mat
    }

    pub fn imtau(&self) -> &ImTauStrategy {
        &self.imtau
    }

    /// θ(g), exactly.
    pub fn theta_apply(&self, g: &[Vec<Rat>]) -> Result<Vec<Vec<Rat>>, TruncError> {
        Ok(self.theta_mat.apply_exact(g)?)
    }

    /// τ(g) = θ(g)⁻¹g, exactly.
    pub fn tau(&self, g: &[Vec<Rat>]) -> Result<Vec<Vec<Rat>>, TruncError> {
        Ok(self.theta_mat.tau_exact(g)?)
    }

    /// Certified upper bound on `1 + d(g) + d(θ(g))` — the size proxy every
    /// growth statement in this module is measured against.
    pub fn size_bound(&self, g: &[Vec<Rat>]) -> Result<Rat, TruncError> {
        let tg = self.theta_mat.apply_exact(g)?;
        Ok(rat(1)
            + building_distance_upper(self.kind, self.p, g)?
            + building_distance_upper(self.kind, self.p, &tg)?)
    }

    /// Random element of the realized group with entry valuations drawn from
    /// the given range.
    pub fn random_element<R: Rng>(
        &self,
        val_range: RangeInclusive<i64>,
        rng: &mut R,
    ) -> Vec<Vec<Rat>> {
        match self.kind {
            GroupKind::Gl(n) => random_group_matrix(self.p, n, val_range, rng),
            GroupKind::Sl(2) => random_sl2_matrix(self.p, val_range, rng),
            GroupKind::Sl(n) => random_shear_product(self.p, n, val_range, rng),
            GroupKind::Sl2Sl2 => {
                let a = random_sl2_matrix(self.p, val_range.clone(), rng);
                let b = random_sl2_matrix(self.p, val_range, rng);
                let mut m = vec![vec![Rat::zero(); 4]; 4];
                for i in 0..2 {
                    for j in 0..2 {
                        m[i][j] = a[i][j].clone();
                        m[2 + i][2 + j] = b[i][j].clone();
                    }
                }
                m
            }
        }
    }
}

fn diag_prime_powers(p: u64, vals: &[i64]) -> Vec<Vec<Rat>> {
    let n = vals.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { pow_rat(p, vals[i]) } else { Rat::zero() })
                .collect()
        })
        .collect()
}

/// Determinant-one matrix built as a product of random elementary shears.
fn random_shear_product<R: Rng>(
    p: u64,
    n: usize,
    val_range: RangeInclusive<i64>,
    rng: &mut R,
) -> Vec<Vec<Rat>> {
    let mut m: Vec<Vec<Rat>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { rat(1) } else { Rat::zero() }).collect())
        .collect();
    for _ in 0..3 * n * n {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let u = rng.gen_range(1..(p * p) as i128);
        let v = rng.gen_range(*val_range.start()..=*val_range.end());
        let x = rat(u) * pow_rat(p, v);
        for c in 0..n {
            let add = &x * &m[j][c];
            m[i][c] += add;
        }
    }
    m
}

// ---------------------------------------------------------------------------
// Truncation contexts.
// ---------------------------------------------------------------------------

/// A truncation problem: a realization, the facet whose stabilizer names the
/// Levi, and a dominant parameter μ. Construction computes the central
/// cocharacter lattice of the Levi and its θ-split part, and rejects facets
/// whose Levi is not split for the involution.
#[derive(Debug, Clone)]
pub struct TruncationContext {
    real: Realization,
    levi: FacetIndex,
    mu: Vec<Rat>,
    center: Vec<Vec<i64>>,
    split_center: Vec<Vec<i64>>,
}

impl TruncationContext {
    pub fn new(real: &Realization, levi: FacetIndex, mu: Vec<Rat>) -> Result<Self, TruncError> {
        let datum = real.datum();
        if levi.chamber >= datum.weyl_order() || levi.zeroed.iter().any(|&i| i >= datum.rank()) {
            return Err(TruncError::BadFacet);
        }
        if mu.len() != datum.dim() || !datum.in_span(&mu) || !datum.is_dominant(&mu) {
            return Err(TruncError::MuNotDominant);
        }
        let center = facet_center(datum, &levi, None);
        let split_center = facet_center(datum, &levi, Some(real.theta_star()));
        // Split Levi test: a root trivial on the split part of the central
        // torus must be trivial on the whole central torus.
        for gamma in datum.positive_roots() {
            let kills_minus = split_center.iter().all(|b| functional_i64(gamma, b) == 0);
            let kills_full = center.iter().all(|b| functional_i64(gamma, b) == 0);
            if kills_minus && !kills_full {
                return Err(TruncError::LeviNotSplit);
            }
        }
        Ok(TruncationContext { real: real.clone(), levi, mu, center, split_center })
    }

    pub fn realization(&self) -> &Realization {
        &self.real
    }

    pub fn facet(&self) -> &FacetIndex {
        &self.levi
    }

    pub fn mu(&self) -> &[Rat] {
        &self.mu
    }

    /// Basis of the central cocharacter lattice of the Levi.
    pub fn center(&self) -> &[Vec<i64>] {
        &self.center
    }

    /// Basis of its θ-split part — the lattice all weight factors sum over.
    pub fn split_center(&self) -> &[Vec<i64>] {
        &self.split_center
    }

    /// Same facet and realization, new parameter.
    pub fn with_mu(&self, mu: Vec<Rat>) -> Result<Self, TruncError> {
        Self::new(&self.real, self.levi.clone(), mu)
    }
}

/// Lattice basis of the central cocharacters of a facet stabilizer,
/// optionally intersected with the (−1)-eigenlattice of an involution.
fn facet_center(
    datum: &RootDatum,
    facet: &FacetIndex,
    minus: Option<&InvolutionSpec>,
) -> Vec<Vec<i64>> {
    let lat = datum.lattice_rows();
    let cols = lat.len();
    let roots = datum.chamber_simple_roots(facet.chamber);
    let mut rows: Vec<Vec<i128>> = Vec::new();
    for &i in &facet.zeroed {
        rows.push(lat.iter().map(|l| functional_i64(&roots[i], l) as i128).collect());
    }
    if let Some(theta) = minus {
        let tm = theta.matrix();
        for r in 0..datum.dim() {
            // (θ + 1)·x = 0 expressed in lattice coordinates.
            rows.push(
                lat.iter()
                    .map(|l| {
                        let tl: i64 = (0..datum.dim()).map(|c| tm[r][c] * l[c]).sum();
                        (tl + l[r]) as i128
                    })
                    .collect(),
            );
        }
    }
    if rows.is_empty() {
        rows.push(vec![0; cols]);
    }
    integer_kernel(&rows)
        .iter()
        .map(|coords| {
            datum.from_lattice_coords(coords).iter().map(|c| c.to_integer() as i64).collect()
        })
        .collect()
}

fn functional_i64(f: &[i64], v: &[i64]) -> i64 {
    f.iter().zip(v).map(|(a, b)| a * b).sum()
}

// ---------------------------------------------------------------------------
// Counts with certified bounds.
// ---------------------------------------------------------------------------

/// An integer count with certified bounds: `lower` counts the shifts every
/// oracle confirmed, `upper` additionally counts the ones the image oracle
/// could not rule out. The two agree whenever the oracle is decisive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountOutcome {
    pub lower: u64,
    pub upper: u64,
}

impl CountOutcome {
    fn absorb(&mut self, verdict: ImTauVerdict) {
        match verdict {
            ImTauVerdict::Yes => {
                self.lower += 1;
                self.upper += 1;
            }
            ImTauVerdict::Unknown => self.upper += 1,
            ImTauVerdict::No => {}
        }
    }

    pub fn exact(&self) -> Option<u64> {
        (self.lower == self.upper).then_some(self.lower)
    }
}

// ---------------------------------------------------------------------------
// The indicator weight.
// ---------------------------------------------------------------------------

/// Basic truncation indicator: does the elementary-divisor invariant of
/// τ(g) = θ(g)⁻¹g lie in the Λ-restricted orbit hull of μ?
pub fn omega_bar(ctx: &TruncationContext, g: &[Vec<Rat>]) -> Result<bool, TruncError> {
    let real = ctx.realization();
    let tau = real.theta_mat.tau_exact(g)?;
    let cert = cartan_exact(real.kind, real.p, &tau)?;
    let hull = orbit_set(real.datum(), ctx.mu())?;
    Ok(star_hull_member(real.datum(), &hull, &vec_rat(&cert.invariant))?)
}

// ---------------------------------------------------------------------------
// Shifted-invariant scanning.
// ---------------------------------------------------------------------------

/// Per-element scanner: holds θ(g)⁻¹ and g and caches the invariant of
/// θ(g)⁻¹·p^ν·g per shift ν. The eliminations behind that invariant cancel
/// to a depth that grows with ‖ν‖₁, so each one is computed exactly in
/// arbitrary precision rather than through the fixed-width layer.
struct NuScan<'a> {
    real: &'a Realization,
    g: Vec<Vec<Rat>>,
    theta_g_inv: Vec<Vec<Rat>>,
    cache: BTreeMap<Vec<i64>, Vec<i64>>,
}

impl<'a> NuScan<'a> {
    fn new(real: &'a Realization, g: &[Vec<Rat>]) -> Result<Self, TruncError> {
        let tg = real.theta_mat.apply_exact(g)?;
        let theta_g_inv = mat_inverse(&tg).ok_or(PadicError::NotInvertible)?;
        Ok(NuScan { real, g: g.to_vec(), theta_g_inv, cache: BTreeMap::new() })
    }

    fn cartan(&mut self, nu: &[i64]) -> Result<Vec<i64>, TruncError> {
        if let Some(c) = self.cache.get(nu) {
            return Ok(c.clone());
        }
        let inv =
            cartan_shifted_exact(self.real.kind, self.real.p, &self.theta_g_inv, nu, &self.g)?;
        self.cache.insert(nu.to_vec(), inv.clone());
        Ok(inv)
    }
}

/// Coefficient box certified to contain every `ν = Σ kᵢbᵢ` with ‖ν‖ ≤ R:
/// Cauchy–Schwarz against the rows of the pseudo-inverse of the basis.
fn radius_box(basis: &[Vec<i64>], radius: &Rat) -> Vec<RangeInclusive<i64>> {
    if basis.is_empty() {
        return Vec::new();
    }
    let r = basis.len();
    let dim = basis[0].len();
    let gram: Vec<Vec<Rat>> = (0..r)
        .map(|i| (0..r).map(|j| rat(functional_i64(&basis[i], &basis[j]) as i128)).collect())
        .collect();
    let ginv = mat_inverse(&gram).expect("independent basis has invertible Gram matrix");
    (0..r)
        .map(|i| {
            let row: Vec<Rat> = (0..dim)
                .map(|d| (0..r).map(|j| &ginv[i][j] * rat(basis[j][d] as i128)).sum())
                .collect();
            let norm2: Rat = row.iter().map(|c| c * c).sum();
            let k = (sqrt_upper(&norm2) * radius).floor().to_integer() as i64;
            -k..=k
        })
        .collect()
}

/// Visit every integer coefficient vector of a box; the empty box contributes
/// the single empty vector.
fn for_each_in_box<E>(
    ranges: &[RangeInclusive<i64>],
    mut f: impl FnMut(&[i64]) -> Result<(), E>,
) -> Result<(), E> {
    if ranges.iter().any(|r| r.is_empty()) {
        return Ok(());
    }
    let mut k: Vec<i64> = ranges.iter().map(|r| *r.start()).collect();
    loop {
        f(&k)?;
        let mut axis = ranges.len();
        loop {
            if axis == 0 {
                return Ok(());
            }
            axis -= 1;
            if k[axis] < *ranges[axis].end() {
                k[axis] += 1;
                for j in axis + 1..k.len() {
                    k[j] = *ranges[j].start();
                }
                break;
            }
        }
    }
}

fn combine(basis: &[Vec<i64>], k: &[i64], dim: usize) -> Vec<i64> {
    let mut v = vec![0i64; dim];
    for (ki, b) in k.iter().zip(basis) {
        for (vj, bj) in v.iter_mut().zip(b) {
            *vj += ki * bj;
        }
    }
    v
}

// ---------------------------------------------------------------------------
// The Levi-relative weight and its asymptotic forms.
// ---------------------------------------------------------------------------

/// Levi-relative weight: the number of shifts ν in the split central lattice
/// of the Levi, lying in the image oracle's sublattice, whose shifted
/// invariant `Cartan(θ(g)⁻¹ p^ν g)` lies in the Λ-restricted orbit hull of μ.
pub fn omega_m(ctx: &TruncationContext, g: &[Vec<Rat>]) -> Result<CountOutcome, TruncError> {
    let real = ctx.realization();
    let datum = real.datum();
    let hull = orbit_set(datum, ctx.mu())?;
    let radius = real.size_bound(g)? - rat(1) + sqrt_upper(&dot(ctx.mu(), ctx.mu()));
    let r2 = &radius * &radius;
    let ranges = radius_box(&ctx.split_center, &radius);
    let mut scan = NuScan::new(real, g)?;
    let mut out = CountOutcome::default();
    for_each_in_box(&ranges, |k| -> Result<(), TruncError> {
        let nu = combine(&ctx.split_center, k, datum.dim());
        // ‖Cartan(θ(g)⁻¹p^νg)‖ ≥ ‖ν‖ − d(g) − d(θ(g)), so shifts outside the
        // certified radius can never reach the hull; skip without computing.
        let norm2: i128 = nu.iter().map(|&x| (x as i128) * (x as i128)).sum();
        if rat(norm2) > r2 {
            return Ok(());
        }
        let verdict = imtau_membership(real.p, &nu, &real.theta_mat, &real.imtau);
        if verdict == ImTauVerdict::No {
            return Ok(());
        }
        let inv = scan.cartan(&nu)?;
        if star_hull_member(datum, &hull, &vec_rat(&inv))? {
            out.absorb(verdict);
        }
        Ok(())
    })?;
    Ok(out)
}

/// The height family of g relative to μ: chamber B receives
/// `B·μ⁺ − H_B(g) + H_{B̄}(θ(g))`, with H_B the triangular-retraction height
/// in the Borel of B and B̄ the opposite chamber.
pub fn height_family(ctx: &TruncationContext, g: &[Vec<Rat>]) -> Result<Vec<Vec<Rat>>, TruncError> {
    let real = ctx.realization();
    let orb = orbit_set(real.datum(), ctx.mu())?;
    let shifts = height_shifts(real, g)?;
    Ok(orb.iter().zip(&shifts).map(|(x, s)| vec_add(x, s)).collect())
}

/// Per-chamber height corrections `−H_B(g) + H_{B̄}(θ(g))`, independent of μ.
fn height_shifts(real: &Realization, g: &[Vec<Rat>]) -> Result<Vec<Vec<Rat>>, TruncError> {
    let datum = real.datum();
    let tg = real.theta_mat.apply_exact(g)?;
    let mut shifts = Vec::with_capacity(datum.weyl_order());
    for b in 0..datum.weyl_order() {
        let hb = iwasawa_exact(real.kind, real.p, g, &datum.weyl()[b].mat)?.h;
        let opp = datum.opposite_chamber(b);
        let hbar = iwasawa_exact(real.kind, real.p, &tg, &datum.weyl()[opp].mat)?.h;
        shifts.push(vec_sub(&vec_rat(&hbar), &vec_rat(&hb)));
    }
    Ok(shifts)
}

fn degenerate_family(e: OrthoError) -> TruncError {
    match e {
        OrthoError::NotOrthogonal { .. } => TruncError::BelowRegularityThreshold,
        other => other.into(),
    }
}

fn family_box(points: &[Vec<Rat>], basis: &[Vec<i64>]) -> Option<Vec<RangeInclusive<i64>>> {
    let dim = points[0].len();
    let basis_rat: Vec<Vec<Rat>> = basis.iter().map(|b| vec_rat(b)).collect();
    let base = vec![Rat::zero(); dim];
    latcount::slice_coordinate_ranges(points, &basis_rat, &base, dim)
}

/// Mirror of the Λ-class gate of `star_hull_member`: a probe whose class is
/// undefined or different never counts.
fn same_class_gate(datum: &RootDatum, x: &[Rat], anchor: &[Rat]) -> Result<bool, TruncError> {
    match datum.same_lambda_class(x, anchor) {
        Ok(b) => Ok(b),
        Err(RootDatumError::NotInLattice) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

/// Asymptotic form of the Levi-relative weight: count split-central shifts
/// inside the Λ-restricted hull of the height family.
pub fn omega_m_asymp(ctx: &TruncationContext, g: &[Vec<Rat>]) -> Result<CountOutcome, TruncError> {
    let real = ctx.realization();
    let datum = real.datum();
    let fam = height_family(ctx, g)?;
    validate(datum, &fam).map_err(degenerate_family)?;
    let mut out = CountOutcome::default();
    let Some(ranges) = family_box(&fam, &ctx.split_center) else {
        return Ok(out);
    };
    for_each_in_box(&ranges, |k| -> Result<(), TruncError> {
        let nu = combine(&ctx.split_center, k, datum.dim());
        let verdict = imtau_membership(real.p, &nu, &real.theta_mat, &real.imtau);
        if verdict == ImTauVerdict::No {
            return Ok(());
        }
        if star_hull_member(datum, &fam, &vec_rat(&nu))? {
            out.absorb(verdict);
        }
        Ok(())
    })?;
    Ok(out)
}

/// θ-split route to the asymptotic weight: fold the height family into the
/// split cone and count inside the restricted hull there. For positive
/// folded families the restricted cone test is used; otherwise membership
/// falls back to the convex hull of the folded points.
pub fn theta_split_asymp(
    ctx: &TruncationContext,
    g: &[Vec<Rat>],
) -> Result<CountOutcome, TruncError> {
    let real = ctx.realization();
    let datum = real.datum();
    let theta = real.theta_star();
    let fam = height_family(ctx, g)?;
    validate(datum, &fam).map_err(degenerate_family)?;
    let folded = minus_set(datum, theta, &fam)?;
    let report = validate_restricted(datum, theta, &folded)?;
    let fold_pts: Vec<Vec<Rat>> = folded.values().cloned().collect();
    let mut box_pts = fam.clone();
    box_pts.extend(fold_pts.iter().cloned());
    let mut out = CountOutcome::default();
    let Some(ranges) = family_box(&box_pts, &ctx.split_center) else {
        return Ok(out);
    };
    for_each_in_box(&ranges, |k| -> Result<(), TruncError> {
        let nu = combine(&ctx.split_center, k, datum.dim());
        let verdict = imtau_membership(real.p, &nu, &real.theta_mat, &real.imtau);
        if verdict == ImTauVerdict::No {
            return Ok(());
        }
        let nur = vec_rat(&nu);
        if !same_class_gate(datum, &nur, &fam[0])? {
            return Ok(());
        }
        let inside = if report.positive {
            restricted_hull_member(datum, theta, &folded, &nur)?
        } else {
            hull_member_vertex(datum, &fold_pts, &nur)?
        };
        if inside {
            out.absorb(verdict);
        }
        Ok(())
    })?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Side-by-side weight report.
// ---------------------------------------------------------------------------

/// All weight factors of one element, with the regularity margin that
/// controls when they must agree.
#[derive(Debug, Clone)]
pub struct WeightReport {
    pub tau_invariant: Vec<i64>,
    pub omega_bar: bool,
    pub omega_m: CountOutcome,
    pub omega_m_asymp: CountOutcome,
    pub theta_split_asymp: CountOutcome,
    /// Lower bound on `min_α⟨α, μ⟩ − c·(1 + d(g) + d(θ(g)))`; when positive,
    /// the three counts above must coincide.
    pub regularity_margin: Rat,
}

pub fn weight_report(
    ctx: &TruncationContext,
    g: &[Vec<Rat>],
    c: &Rat,
) -> Result<WeightReport, TruncError> {
    let real = ctx.realization();
    let datum = real.datum();
    let tau = real.theta_mat.tau_exact(g)?;
    let cert = cartan_exact(real.kind, real.p, &tau)?;
    let hull = orbit_set(datum, ctx.mu())?;
    let omega_bar = star_hull_member(datum, &hull, &vec_rat(&cert.invariant))?;
    let min_pair = datum
        .simple_roots()
        .iter()
        .map(|a| pair(a, ctx.mu()))
        .min()
        .unwrap_or_else(Rat::zero);
    let margin = min_pair - c * &real.size_bound(g)?;
    Ok(WeightReport {
        tau_invariant: cert.invariant,
        omega_bar,
        omega_m: omega_m(ctx, g)?,
        omega_m_asymp: omega_m_asymp(ctx, g)?,
        theta_split_asymp: theta_split_asymp(ctx, g)?,
        regularity_margin: margin,
    })
}

// ---------------------------------------------------------------------------
// Degree sweeps along μ₁ + d·μ₂.
// ---------------------------------------------------------------------------

/// Exact per-degree table of both weight routes along μ_d = μ₁ + d·μ₂.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub start: i64,
    pub omega: Vec<CountOutcome>,
    pub asymp: Vec<CountOutcome>,
}

impl SweepTable {
    pub fn degrees(&self) -> RangeInclusive<i64> {
        self.start..=self.start + self.omega.len() as i64 - 1
    }

    pub fn omega_at(&self, d: i64) -> CountOutcome {
        self.omega[(d - self.start) as usize]
    }

    pub fn asymp_at(&self, d: i64) -> CountOutcome {
        self.asymp[(d - self.start) as usize]
    }

    /// Least degree from which the two routes agree through the end of the
    /// table — `None` when they still disagree at the last degree.
    pub fn agreement_degree(&self) -> Option<i64> {
        let last_bad = (0..self.omega.len()).rev().find(|&i| self.omega[i] != self.asymp[i]);
        match last_bad {
            None => Some(self.start),
            Some(i) if i + 1 < self.omega.len() => Some(self.start + i as i64 + 1),
            Some(_) => None,
        }
    }
}

/// Integer degree interval, possibly unbounded on either side.
#[derive(Clone, Copy)]
struct DegreeInterval {
    lo: Option<i64>,
    hi: Option<i64>,
    empty: bool,
}

impl DegreeInterval {
    const EMPTY: DegreeInterval = DegreeInterval { lo: None, hi: None, empty: true };
    const FULL: DegreeInterval = DegreeInterval { lo: None, hi: None, empty: false };

    fn intersect(self, other: DegreeInterval) -> DegreeInterval {
        if self.empty || other.empty {
            return DegreeInterval::EMPTY;
        }
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let empty = matches!((lo, hi), (Some(l), Some(h)) if l > h);
        DegreeInterval { lo, hi, empty }
    }

    fn clip(&self, start: i64, end: i64) -> Option<RangeInclusive<i64>> {
        if self.empty {
            return None;
        }
        let lo = self.lo.map_or(start, |l| l.max(start));
        let hi = self.hi.map_or(end, |h| h.min(end));
        (lo <= hi).then_some(lo..=hi)
    }
}

/// Degrees d with `v₀ + d·(v₁ − v₀) ≥ 0` coordinatewise.
fn affine_nonneg(v0: &[Rat], v1: &[Rat]) -> DegreeInterval {
    let mut iv = DegreeInterval::FULL;
    for (a, b) in v0.iter().zip(v1) {
        let step = b - a;
        if step.is_zero() {
            if a.is_negative() {
                return DegreeInterval::EMPTY;
            }
            continue;
        }
        let root = -a / &step;
        if step.is_positive() {
            let lo = root.ceil().to_integer() as i64;
            iv = iv.intersect(DegreeInterval { lo: Some(lo), hi: None, empty: false });
        } else {
            let hi = root.floor().to_integer() as i64;
            iv = iv.intersect(DegreeInterval { lo: None, hi: Some(hi), empty: false });
        }
        if iv.empty {
            return iv;
        }
    }
    iv
}

/// Degrees where `t₀ + d·(t₁ − t₀)` vanishes identically.
fn affine_zero_interval(t0: &[Rat], t1: &[Rat]) -> DegreeInterval {
    let mut pin: Option<Rat> = None;
    for (a, b) in t0.iter().zip(t1) {
        let step = b - a;
        if step.is_zero() {
            if !a.is_zero() {
                return DegreeInterval::EMPTY;
            }
        } else {
            let root = -a / &step;
            match &pin {
                None => pin = Some(root),
                Some(r) if *r == root => {}
                _ => return DegreeInterval::EMPTY,
            }
        }
    }
    match pin {
        None => DegreeInterval::FULL,
        Some(r) if r.is_integer() => {
            let d = r.to_integer() as i64;
            DegreeInterval { lo: Some(d), hi: Some(d), empty: false }
        }
        Some(_) => DegreeInterval::EMPTY,
    }
}

/// Degrees where the affine target `t₀ + d·(t₁ − t₀)` is a nonnegative
/// combination of the column directions. The target's span component is
/// degree-independent for the sweeps in this module (the slope lies in the
/// coroot span), so solvability at d = 0 and d = 1 decides it everywhere.
fn cone_interval(cols: &[Vec<Rat>], ncols: usize, t0: &[Rat], t1: &[Rat]) -> DegreeInterval {
    if ncols == 0 {
        return affine_zero_interval(t0, t1);
    }
    let c0 = solve_unique(cols, t0);
    let c1 = solve_unique(cols, t1);
    debug_assert_eq!(c0.is_some(), c1.is_some());
    match (c0, c1) {
        (Some(a), Some(b)) => affine_nonneg(&a, &b),
        _ => DegreeInterval::EMPTY,
    }
}

fn columnize(dirs: &[Vec<i64>], dim: usize) -> Vec<Vec<Rat>> {
    (0..dim).map(|r| dirs.iter().map(|d| rat(d[r] as i128)).collect()).collect()
}

fn affine_point(p0: &[Rat], p1: &[Rat], d: i64) -> Vec<Rat> {
    let dd = rat(d as i128);
    p0.iter().zip(p1).map(|(a, b)| a + &dd * &(b - a)).collect()
}

/// Validate a sweep slope: strictly dominant, a lattice vector of trivial
/// class, and inside the rational coroot span — the combination that keeps
/// every degree in one Λ-class and every membership coefficient affine in d.
fn check_slope(datum: &RootDatum, mu2: &[Rat]) -> Result<(), TruncError> {
    if mu2.len() != datum.dim() || !datum.in_span(mu2) || !datum.is_strictly_dominant(mu2) {
        return Err(TruncError::Mu2NotRegular);
    }
    let zero = vec![Rat::zero(); datum.dim()];
    match datum.same_lambda_class(mu2, &zero) {
        Ok(true) => {}
        _ => return Err(TruncError::SlopeNotCentered),
    }
    if datum.rank() > 0 {
        let cols = columnize(datum.simple_coroots(), datum.dim());
        if solve_unique(&cols, mu2).is_none() {
            return Err(TruncError::SlopeNotCentered);
        }
    } else if mu2.iter().any(|c| !c.is_zero()) {
        return Err(TruncError::SlopeNotCentered);
    }
    Ok(())
}

/// Compute both weight routes for every degree in one box scan.
pub fn sweep_weights(
    ctx: &TruncationContext,
    mu2: &[Rat],
    g: &[Vec<Rat>],
    degrees: RangeInclusive<i64>,
) -> Result<SweepTable, TruncError> {
    sweep_internal(ctx, mu2, g, degrees, true)
}

fn sweep_internal(
    ctx: &TruncationContext,
    mu2: &[Rat],
    g: &[Vec<Rat>],
    degrees: RangeInclusive<i64>,
    with_omega: bool,
) -> Result<SweepTable, TruncError> {
    let real = ctx.realization();
    let datum = real.datum();
    let (start, end) = (*degrees.start(), *degrees.end());
    if start < 0 || end < start {
        return Err(TruncError::BadDegreeRange);
    }
    check_slope(datum, mu2)?;
    let len = (end - start + 1) as usize;
    let dim = datum.dim();
    let order = datum.weyl_order();
    let split = &ctx.split_center;

    let mu_at = |d: i64| vec_add(ctx.mu(), &vec_scale(&rat(d as i128), mu2));

    // Both chamber families are affine in the degree, so everything below is
    // interpolated exactly from the values at d = 0 and d = 1.
    let orb0 = orbit_set(datum, &mu_at(0))?;
    let orb1 = orbit_set(datum, &mu_at(1))?;
    let shifts = height_shifts(real, g)?;
    let fam0: Vec<Vec<Rat>> = orb0.iter().zip(&shifts).map(|(x, s)| vec_add(x, s)).collect();
    let fam1: Vec<Vec<Rat>> = orb1.iter().zip(&shifts).map(|(x, s)| vec_add(x, s)).collect();
    let fam_at = |d: i64| -> Vec<Vec<Rat>> {
        (0..order).map(|b| affine_point(&fam0[b], &fam1[b], d)).collect()
    };

    // Positivity of the height family is an affine condition on its wall
    // coefficients: the cone route applies on an integer interval of degrees
    // and the remaining degrees fall back to the vertex route.
    let rep0 = validate(datum, &fam0).map_err(degenerate_family)?;
    let rep1 = validate(datum, &fam1).map_err(degenerate_family)?;
    let flat0: Vec<Rat> = rep0.wall_coeffs.iter().flatten().cloned().collect();
    let flat1: Vec<Rat> = rep1.wall_coeffs.iter().flatten().cloned().collect();
    let positive_ds = affine_nonneg(&flat0, &flat1).clip(start, end);
    let fallback: Vec<(usize, Vec<Vec<Rat>>)> = (start..=end)
        .filter(|d| positive_ds.as_ref().is_none_or(|r| !r.contains(d)))
        .map(|d| ((d - start) as usize, fam_at(d)))
        .collect();

    // Scan box: the radius ball bounds every shift the direct route can
    // accept up to the top degree; the family vertex boxes bound the
    // asymptotic routes (coordinates are affine, so the range endpoints
    // dominate every intermediate degree).
    let r_max = {
        let n0 = dot(&mu_at(start), &mu_at(start));
        let n1 = dot(&mu_at(end), &mu_at(end));
        real.size_bound(g)? - rat(1) + sqrt_upper(&n0.max(n1))
    };
    let r2_max = &r_max * &r_max;
    let mut kranges = radius_box(split, &r_max);
    let mut end_pts = fam0.clone();
    end_pts.extend(fam_at(end));
    if let Some(famranges) = family_box(&end_pts, split) {
        for (a, b) in kranges.iter_mut().zip(famranges) {
            *a = (*a.start()).min(*b.start())..=(*a.end()).max(*b.end());
        }
    }

    // Degree-independent gates.
    let mut scan = if with_omega { Some(NuScan::new(real, g)?) } else { None };
    let omega_anchor =
        datum.lattice_coords_int(ctx.mu()).is_ok().then(|| ctx.mu().to_vec());
    let asymp_anchor = datum.lattice_coords_int(&fam0[0]).is_ok().then(|| fam0[0].clone());
    let coroot_cols = columnize(datum.simple_coroots(), dim);
    let chamber_cols: Vec<Vec<Vec<Rat>>> =
        (0..order).map(|b| columnize(&datum.chamber_simple_coroots(b), dim)).collect();
    let rank = datum.rank();
    let mu0 = mu_at(0);
    let mu1 = mu_at(1);

    // Difference arrays over degrees, one pair per route.
    let mut diffs: [Vec<i64>; 4] =
        [vec![0; len + 1], vec![0; len + 1], vec![0; len + 1], vec![0; len + 1]];
    let mark = |arr: &mut Vec<i64>, lo: i64, hi: i64| {
        arr[(lo - start) as usize] += 1;
        arr[(hi - start + 1) as usize] -= 1;
    };

    for_each_in_box(&kranges, |k| -> Result<(), TruncError> {
        let nu = combine(split, k, dim);
        let verdict = imtau_membership(real.p, &nu, &real.theta_mat, &real.imtau);
        if verdict == ImTauVerdict::No {
            return Ok(());
        }
        let nur = vec_rat(&nu);

        // Direct route: the shifted invariant is degree-independent; its
        // membership in the orbit hull of μ_d is a cone condition with
        // affine coefficients.
        if let (Some(scan), Some(anchor)) = (scan.as_mut(), omega_anchor.as_ref()) {
            let norm2: i128 = nu.iter().map(|&x| (x as i128) * (x as i128)).sum();
            if rat(norm2) <= r2_max {
                let inv = scan.cartan(&nu)?;
                let invr = vec_rat(&inv);
                if same_class_gate(datum, &invr, anchor)? {
                    let iv = cone_interval(
                        &coroot_cols,
                        rank,
                        &vec_sub(&mu0, &invr),
                        &vec_sub(&mu1, &invr),
                    );
                    if let Some(r) = iv.clip(start, end) {
                        mark(&mut diffs[0], *r.start(), *r.end());
                        mark(&mut diffs[1], *r.start(), *r.end());
                        if verdict == ImTauVerdict::Unknown {
                            diffs[0][(*r.start() - start) as usize] -= 1;
                            diffs[0][(*r.end() - start + 1) as usize] += 1;
                        }
                    }
                }
            }
        }

        // Asymptotic route: chamber-by-chamber cone intervals on the
        // positive degrees, vertex membership on the rest.
        if let Some(anchor) = asymp_anchor.as_ref() {
            if same_class_gate(datum, &nur, anchor)? {
                if let Some(prange) = &positive_ds {
                    let mut iv = DegreeInterval::FULL;
                    for b in 0..order {
                        iv = iv.intersect(cone_interval(
                            &chamber_cols[b],
                            rank,
                            &vec_sub(&fam0[b], &nur),
                            &vec_sub(&fam1[b], &nur),
                        ));
                        if iv.empty {
                            break;
                        }
                    }
                    if let Some(r) = iv.clip(*prange.start(), *prange.end()) {
                        mark(&mut diffs[2], *r.start(), *r.end());
                        mark(&mut diffs[3], *r.start(), *r.end());
                        if verdict == ImTauVerdict::Unknown {
                            diffs[2][(*r.start() - start) as usize] -= 1;
                            diffs[2][(*r.end() - start + 1) as usize] += 1;
                        }
                    }
                }
                for (idx, famd) in &fallback {
                    if hull_member_vertex(datum, famd, &nur)? {
                        let d = start + *idx as i64;
                        mark(&mut diffs[2], d, d);
                        mark(&mut diffs[3], d, d);
                        if verdict == ImTauVerdict::Unknown {
                            diffs[2][*idx] -= 1;
                            diffs[2][idx + 1] += 1;
                        }
                    }
                }
            }
        }
        Ok(())
    })?;

    let accumulate = |lo: &[i64], up: &[i64]| -> Vec<CountOutcome> {
        let mut out = Vec::with_capacity(len);
        let (mut a, mut b) = (0i64, 0i64);
        for i in 0..len {
            a += lo[i];
            b += up[i];
            out.push(CountOutcome { lower: a as u64, upper: b as u64 });
        }
        out
    };
    Ok(SweepTable {
        start,
        omega: accumulate(&diffs[0], &diffs[1]),
        asymp: accumulate(&diffs[2], &diffs[3]),
    })
}

fn require_exact(table: &SweepTable) -> Result<(), TruncError> {
    if table.omega.iter().chain(&table.asymp).any(|c| c.exact().is_none()) {
        return Err(TruncError::ImTauInconclusive);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// The two-route comparison over a sample suite.
// ---------------------------------------------------------------------------

/// One sample row of the two-route comparison.
#[derive(Debug, Clone)]
pub struct LemmaRow {
    /// Least degree from which the two routes agree through the top of the
    /// sweep, when they agree there at all.
    pub threshold: Option<i64>,
    /// Certified size bound `1 + d(g) + d(θ(g))` of the sample.
    pub size_bound: Rat,
}

#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
    /// Maximum over rows of `threshold / size_bound` — the empirical growth
    /// slope of the agreement threshold.
    pub growth: Rat,
}

impl LemmaReport {
    pub fn all_agree(&self) -> bool {
        self.rows.iter().all(|r| r.threshold.is_some())
    }

    /// Does every threshold satisfy `threshold ≤ c · size_bound`?
    pub fn within(&self, c: &Rat) -> bool {
        self.rows.iter().all(|r| match r.threshold {
            Some(t) => rat(t as i128) <= c * &r.size_bound,
            None => false,
        })
    }
}

fn lemma_row(
    ctx: &TruncationContext,
    mu2: &[Rat],
    g: &[Vec<Rat>],
    d_max: i64,
) -> Result<LemmaRow, TruncError> {
    let table = sweep_internal(ctx, mu2, g, 0..=d_max, true)?;
    require_exact(&table)?;
    Ok(LemmaRow { threshold: table.agreement_degree(), size_bound: ctx.realization().size_bound(g)? })
}

/// Sweep both weight routes for every sample and report the degree from
/// which they agree, normalized by the sample's size bound.
pub fn verify_geometric_lemma(
    ctx: &TruncationContext,
    mu2: &[Rat],
    samples: &[Vec<Vec<Rat>>],
    d_max: i64,
) -> Result<LemmaReport, TruncError> {
    verify_geometric_lemma_jobs(ctx, mu2, samples, d_max, 1)
}

/// Parallel variant: samples are processed in `jobs` worker threads.
pub fn verify_geometric_lemma_jobs(
    ctx: &TruncationContext,
    mu2: &[Rat],
    samples: &[Vec<Vec<Rat>>],
    d_max: i64,
    jobs: usize,
) -> Result<LemmaReport, TruncError> {
    let rows = map_samples(samples, jobs, |g| lemma_row(ctx, mu2, g, d_max))?;
    let mut growth = Rat::zero();
    for row in &rows {
        if let Some(t) = row.threshold {
            growth = growth.max(rat(t as i128) / &row.size_bound);
        }
    }
    Ok(LemmaReport { rows, growth })
}

/// Order-preserving parallel map over samples.
fn map_samples<T: Send>(
    samples: &[Vec<Vec<Rat>>],
    jobs: usize,
    f: impl Fn(&[Vec<Rat>]) -> Result<T, TruncError> + Sync,
) -> Result<Vec<T>, TruncError> {
    if jobs <= 1 || samples.len() <= 1 {
        return samples.iter().map(|g| f(g)).collect();
    }
    let chunk = samples.len().div_ceil(jobs);
    let fref = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|c| {
                scope.spawn(move || c.iter().map(|g| fref(g)).collect::<Result<Vec<_>, _>>())
            })
            .collect();
        let mut out = Vec::with_capacity(samples.len());
        for h in handles {
            out.extend(h.join().expect("sweep worker panicked")?);
        }
        Ok(out)
    })
}

// ---------------------------------------------------------------------------
// The counting polynomial and the vanishing-difference limit.
// ---------------------------------------------------------------------------

/// Fit the asymptotic weight's counting polynomial on a degree window and
/// verify it on the window tail plus at least five held-out degrees. The fit
/// uses one more node than the split-center rank, so its degree can never
/// exceed that rank; verification makes the fit a theorem about the table.
pub fn nu_m_fit(
    ctx: &TruncationContext,
    mu2: &[Rat],
    g: &[Vec<Rat>],
    window: RangeInclusive<i64>,
    holdout: &[i64],
) -> Result<PolyFit, TruncError> {
    let start = *window.start();
    let wlen = (*window.end() - start + 1).max(0) as usize;
    let nodes = ctx.split_center.len() + 1;
    if start < 0 {
        return Err(TruncError::BadDegreeRange);
    }
    if wlen < nodes {
        return Err(TruncError::WindowTooShort { need: nodes });
    }
    if holdout.len() < 5 {
        return Err(TruncError::HoldoutTooSmall { need: 5, got: holdout.len() });
    }
    if holdout.iter().any(|d| *d < start) {
        return Err(TruncError::BadDegreeRange);
    }
    let top = holdout.iter().copied().max().unwrap().max(*window.end());
    let table = sweep_internal(ctx, mu2, g, start..=top, false)?;
    require_exact(&table)?;
    fit_from_table(&table, window, holdout, nodes)
}

fn fit_from_table(
    table: &SweepTable,
    window: RangeInclusive<i64>,
    holdout: &[i64],
    nodes: usize,
) -> Result<PolyFit, TruncError> {
    let start = *window.start();
    let count_at = |d: i64| table.asymp_at(d).lower;
    let vals: Vec<i128> =
        (start..start + nodes as i64).map(|d| count_at(d) as i128).collect();
    let mut fit = latcount::newton_fit(start, &vals);
    fit.counts = window.clone().map(|d| (d, count_at(d))).collect();
    for d in (start + nodes as i64)..=*window.end() {
        if fit.eval(d) != count_at(d) as i128 {
            return Err(TruncError::NotYetPolynomial { first_failing: d });
        }
        fit.checked.push(d);
    }
    for &d in holdout {
        if fit.eval(d) != count_at(d) as i128 {
            return Err(TruncError::NotYetPolynomial { first_failing: d });
        }
        fit.checked.push(d);
    }
    Ok(fit)
}

/// One sample row of the vanishing-difference check.
#[derive(Debug, Clone)]
pub struct LimitRow {
    /// First degree from which the direct weight equals the fitted
    /// polynomial for the rest of the table.
    pub settle_degree: i64,
    /// Largest |direct − polynomial| over the transient degrees.
    pub peak_deviation: i128,
    /// max over degrees of |direct − polynomial| / (size_bound + ‖μ_d‖)^r.
    pub envelope_ratio: Rat,
    pub size_bound: Rat,
}

#[derive(Debug, Clone)]
pub struct LimitReport {
    pub rows: Vec<LimitRow>,
    /// Smallest coefficient making the envelope bound true on this suite.
    pub envelope_coeff: Rat,
    /// Envelope exponent: the split-center rank.
    pub envelope_power: usize,
}

impl LimitReport {
    /// Does a previously fitted coefficient still bound this suite?
    pub fn within(&self, coeff: &Rat) -> bool {
        self.rows.iter().all(|r| r.envelope_ratio <= *coeff)
    }

    pub fn max_settle(&self) -> i64 {
        self.rows.iter().map(|r| r.settle_degree).max().unwrap_or(0)
    }
}

/// For every sample: sweep both routes up to `d_max`, fit the counting
/// polynomial on a top window of the asymptotic route, and check that the
/// direct weight minus the polynomial vanishes from some degree on, with the
/// transient bounded by `a·(1 + d(g) + d(θ(g)) + ‖μ_d‖)^r`.
pub fn main_limit_check(
    ctx: &TruncationContext,
    mu2: &[Rat],
    samples: &[Vec<Vec<Rat>>],
    d_max: i64,
    jobs: usize,
) -> Result<LimitReport, TruncError> {
    let r = ctx.split_center.len();
    let nodes = r + 1;
    let wstart = d_max - 5 - nodes as i64 - 2;
    if wstart < 0 {
        return Err(TruncError::BadDegreeRange);
    }
    let window = wstart..=(d_max - 5);
    let holdout: Vec<i64> = (d_max - 4..=d_max).collect();
    let mu_at = |d: i64| vec_add(ctx.mu(), &vec_scale(&rat(d as i128), mu2));
    let rows = map_samples(samples, jobs, |g| -> Result<LimitRow, TruncError> {
        let table = sweep_internal(ctx, mu2, g, 0..=d_max, true)?;
        require_exact(&table)?;
        let fit = fit_from_table(&table, window.clone(), &holdout, nodes)?;
        let size = ctx.realization().size_bound(g)?;
        let mut settle = 0i64;
        let mut peak = 0i128;
        let mut ratio = Rat::zero();
        for d in 0..=d_max {
            let delta = table.omega_at(d).lower as i128 - fit.eval(d);
            if delta != 0 {
                settle = d + 1;
                peak = peak.max(delta.abs());
                let mu_d = mu_at(d);
                let denom_base = &size + &sqrt_upper(&dot(&mu_d, &mu_d));
                let denom = (0..r).fold(Rat::one(), |acc, _| acc * &denom_base);
                ratio = ratio.max(rat(delta.abs()) / denom);
            }
        }
        Ok(LimitRow { settle_degree: settle, peak_deviation: peak, envelope_ratio: ratio, size_bound: size })
    })?;
    for (sample, row) in rows.iter().enumerate() {
        if row.settle_degree > d_max {
            return Err(TruncError::NonVanishingTail { sample, d: d_max });
        }
    }
    let envelope_coeff =
        rows.iter().map(|r| r.envelope_ratio.clone()).max().unwrap_or_else(Rat::zero);
    Ok(LimitReport { rows, envelope_coeff, envelope_power: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{mat_mul, ratio};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn gl2(p: u64) -> Realization {
        Realization::gl2_transpose_inverse(p).unwrap()
    }

    fn swap_pair(p: u64) -> Realization {
        Realization::sl2sl2_swap(p).unwrap()
    }

    fn torus_facet() -> FacetIndex {
        FacetIndex::chamber_of(0)
    }

    fn full_facet(rank: usize) -> FacetIndex {
        FacetIndex { chamber: 0, zeroed: (0..rank).collect::<BTreeSet<_>>() }
    }

    fn ctx(real: &Realization, facet: FacetIndex, mu: &[i64]) -> TruncationContext {
        TruncationContext::new(real, facet, vec_rat(mu)).unwrap()
    }

    fn eye(n: usize) -> Vec<Vec<Rat>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { rat(1) } else { Rat::zero() }).collect())
            .collect()
    }

    fn rdiag(vals: &[Rat]) -> Vec<Vec<Rat>> {
        let n = vals.len();
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { vals[i].clone() } else { Rat::zero() }).collect())
            .collect()
    }

    #[test]
    fn realizations_validate_their_torus_action() {
        gl2(5);
        swap_pair(3);
        let datum = standard::gl(2);
        let wrong = Realization::new(
            datum.clone(),
            GroupKind::Gl(2),
            5,
            8,
            MatrixInvolution::transpose_inverse(2),
            standard::theta_identity(&datum),
            ImTauStrategy::Declared(DeclaredImTau::gl2_transpose_inverse(5)),
        );
        assert_eq!(wrong.unwrap_err(), TruncError::ThetaMismatch);
    }

    #[test]
    fn center_lattices_for_torus_and_full_levis() {
        let real = gl2(5);
        let a = ctx(&real, torus_facet(), &[0, 0]);
        assert_eq!(a.split_center().len(), 2);
        let det = a.split_center()[0][0] * a.split_center()[1][1]
            - a.split_center()[0][1] * a.split_center()[1][0];
        assert_eq!(det.abs(), 1);
        let g = ctx(&real, full_facet(1), &[0, 0]);
        assert_eq!(g.center().len(), 1);
        let c0 = &g.center()[0];
        assert!(*c0 == vec![1, 1] || *c0 == vec![-1, -1]);
        assert_eq!(g.split_center(), g.center());
    }

    #[test]
    fn swap_involution_rejects_a_one_sided_levi() {
        let real = swap_pair(3);
        let one_sided = FacetIndex { chamber: 0, zeroed: BTreeSet::from([0]) };
        let err = TruncationContext::new(&real, one_sided, vec_rat(&[0, 0, 0, 0])).unwrap_err();
        assert_eq!(err, TruncError::LeviNotSplit);
        let a = ctx(&real, torus_facet(), &[0, 0, 0, 0]);
        assert_eq!(a.split_center().len(), 1);
        let b = &a.split_center()[0];
        assert!(*b == vec![1, -1, -1, 1] || *b == vec![-1, 1, 1, -1]);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let real = gl2(5);
        assert_eq!(
            TruncationContext::new(&real, torus_facet(), vec_rat(&[0, 1])).unwrap_err(),
            TruncError::MuNotDominant
        );
        assert_eq!(
            TruncationContext::new(
                &real,
                FacetIndex { chamber: 5, zeroed: BTreeSet::new() },
                vec_rat(&[0, 0])
            )
            .unwrap_err(),
            TruncError::BadFacet
        );
        let c = ctx(&real, torus_facet(), &[2, 0]);
        let g = eye(2);
        assert_eq!(
            sweep_weights(&c, &vec_rat(&[1, 1]), &g, 0..=3).unwrap_err(),
            TruncError::Mu2NotRegular
        );
        assert_eq!(
            sweep_weights(&c, &vec_rat(&[2, 0]), &g, 0..=3).unwrap_err(),
            TruncError::SlopeNotCentered
        );
        assert_eq!(
            sweep_weights(&c, &vec_rat(&[1, -1]), &g, 3..=1).unwrap_err(),
            TruncError::BadDegreeRange
        );
    }

    #[test]
    fn indicator_weight_at_small_elements() {
        let real = gl2(5);
        let c1 = ctx(&real, torus_facet(), &[1, -1]);
        assert!(omega_bar(&c1, &eye(2)).unwrap());
        let c2 = ctx(&real, torus_facet(), &[1, 0]);
        assert!(!omega_bar(&c2, &eye(2)).unwrap());
        let g = rdiag(&[rat(25), rat(1)]);
        assert!(!omega_bar(&c1, &g).unwrap());
        let c3 = ctx(&real, torus_facet(), &[4, 0]);
        assert!(omega_bar(&c3, &g).unwrap());
        let c4 = ctx(&real, torus_facet(), &[3, 1]);
        assert!(!omega_bar(&c4, &g).unwrap());
    }

    #[test]
    fn torus_weight_counts_small_hulls() {
        let real = gl2(5);
        let c = ctx(&real, torus_facet(), &[2, 0]);
        assert_eq!(omega_m(&c, &eye(2)).unwrap().exact(), Some(3));
        let odd = ctx(&real, torus_facet(), &[1, 0]);
        assert_eq!(omega_m(&odd, &eye(2)).unwrap().exact(), Some(0));
        let g = ctx(&real, full_facet(1), &[0, 0]);
        assert_eq!(omega_m(&g, &eye(2)).unwrap().exact(), Some(1));
    }

    #[test]
    fn weight_monotone_under_hull_inclusion() {
        let real = gl2(5);
        let small = ctx(&real, torus_facet(), &[2, 0]);
        let large = ctx(&real, torus_facet(), &[3, -1]);
        assert_eq!(omega_m(&small, &eye(2)).unwrap().exact(), Some(3));
        assert_eq!(omega_m(&large, &eye(2)).unwrap().exact(), Some(5));
    }

    #[test]
    fn height_family_of_shifted_torus_element() {
        let real = gl2(5);
        let c = ctx(&real, torus_facet(), &[2, 0]);
        let g = rdiag(&[rat(5), rat(1)]);
        let fam = height_family(&c, &g).unwrap();
        assert_eq!(fam, vec![vec_rat(&[0, 0]), vec_rat(&[-2, 2])]);
    }

    #[test]
    fn asymptotic_routes_match_direct_weight_on_shifted_torus_element() {
        let real = gl2(5);
        let c = ctx(&real, torus_facet(), &[2, 0]);
        let g = rdiag(&[rat(5), rat(1)]);
        assert_eq!(omega_m(&c, &g).unwrap().exact(), Some(3));
        assert_eq!(omega_m_asymp(&c, &g).unwrap().exact(), Some(3));
        assert_eq!(theta_split_asymp(&c, &g).unwrap().exact(), Some(3));
    }

    #[test]
    fn swap_pair_weights_on_a_block_shift() {
        let real = swap_pair(3);
        let c = ctx(&real, torus_facet(), &[1, -1, 1, -1]);
        let g = rdiag(&[rat(3), ratio(1, 3), rat(1), rat(1)]);
        assert!(omega_bar(&c, &g).unwrap());
        assert_eq!(omega_m(&c, &g).unwrap().exact(), Some(3));
        assert_eq!(omega_m_asymp(&c, &g).unwrap().exact(), Some(3));
        assert_eq!(theta_split_asymp(&c, &g).unwrap().exact(), Some(3));
    }

    #[test]
    fn right_unimodular_factors_leave_all_weights_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let real = gl2(3);
        let c = ctx(&real, torus_facet(), &[2, 0]);
        let g = real.random_element(-1..=1, &mut rng);
        let k = crate::padic::random_k_matrix(3, 2, &mut rng);
        let gk = mat_mul(&g, &k);
        assert_eq!(omega_bar(&c, &g).unwrap(), omega_bar(&c, &gk).unwrap());
        assert_eq!(omega_m(&c, &g).unwrap(), omega_m(&c, &gk).unwrap());
        assert_eq!(omega_m_asymp(&c, &g).unwrap(), omega_m_asymp(&c, &gk).unwrap());
        assert_eq!(theta_split_asymp(&c, &g).unwrap(), theta_split_asymp(&c, &gk).unwrap());
    }

    #[test]
    fn left_rotation_fixed_by_theta_preserves_tau_and_indicator() {
        let real = gl2(3);
        let c = ctx(&real, torus_facet(), &[2, 0]);
        let h = vec![
            vec![ratio(3, 5), ratio(4, 5)],
            vec![ratio(-4, 5), ratio(3, 5)],
        ];
        let g = vec![vec![rat(3), rat(1)], vec![rat(0), ratio(1, 3)]];
        let hg = mat_mul(&h, &g);
        assert_eq!(real.tau(&g).unwrap(), real.tau(&hg).unwrap());
        assert_eq!(omega_bar(&c, &g).unwrap(), omega_bar(&c, &hg).unwrap());
    }

    #[test]
    fn brute_force_oracle_brackets_the_declared_count() {
        let real = gl2(5).with_imtau(ImTauStrategy::BruteForce { radius: 2, power_bound: 2 });
        let c = ctx(&real, torus_facet(), &[2, 0]);
        let out = omega_m(&c, &eye(2)).unwrap();
        assert!(out.lower <= 3 && 3 <= out.upper);
    }

    #[test]
    fn sweep_table_matches_per_degree_scans() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let real = gl2(3);
        let c = ctx(&real, torus_facet(), &[2, 0]);
        let mu2 = vec_rat(&[1, -1]);
        for _ in 0..2 {
            let g = real.random_element(-1..=1, &mut rng);
            let table = sweep_weights(&c, &mu2, &g, 0..=5).unwrap();
            for d in 0..=5i64 {
                let mu_d = vec_add(c.mu(), &vec_scale(&rat(d as i128), &mu2));
                let cd = c.with_mu(mu_d).unwrap();
                assert_eq!(table.omega_at(d), omega_m(&cd, &g).unwrap(), "omega at degree {d}");
                assert_eq!(
                    table.asymp_at(d),
                    omega_m_asymp(&cd, &g).unwrap(),
                    "asymp at degree {d}"
                );
            }
        }
        let real4 = swap_pair(3);
        let c4 = ctx(&real4, torus_facet(), &[1, -1, 1, -1]);
        let mu24 = vec_rat(&[1, -1, 1, -1]);
        let mut rng4 = ChaCha8Rng::seed_from_u64(9);
        let g4 = real4.random_element(-1..=1, &mut rng4);
        let table4 = sweep_weights(&c4, &mu24, &g4, 0..=3).unwrap();
        for d in 0..=3i64 {
            let mu_d = vec_add(c4.mu(), &vec_scale(&rat(d as i128), &mu24));
            let cd = c4.with_mu(mu_d).unwrap();
            assert_eq!(table4.omega_at(d), omega_m(&cd, &g4).unwrap());
            assert_eq!(table4.asymp_at(d), omega_m_asymp(&cd, &g4).unwrap());
        }
    }

    #[test]
    fn lemma_report_on_a_small_suite() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let real = gl2(5);
        let c = ctx(&real, torus_facet(), &[2, 0]);
        let mu2 = vec_rat(&[1, -1]);
        let samples: Vec<_> = (0..4).map(|_| real.random_element(-2..=2, &mut rng)).collect();
        let report = verify_geometric_lemma(&c, &mu2, &samples, 14).unwrap();
        assert!(report.all_agree());
        assert!(report.within(&report.growth));
        let par = verify_geometric_lemma_jobs(&c, &mu2, &samples, 14, 3).unwrap();
        assert_eq!(par.rows.len(), report.rows.len());
        for (a, b) in par.rows.iter().zip(&report.rows) {
            assert_eq!(a.threshold, b.threshold);
        }
    }

    #[test]
    fn fitted_polynomial_reproduces_line_and_constant() {
        let real = gl2(5);
        let a = ctx(&real, torus_facet(), &[0, 0]);
        let mu2 = vec_rat(&[1, -1]);
        let fit = nu_m_fit(&a, &mu2, &eye(2), 0..=6, &[8, 10, 12, 15, 20]).unwrap();
        assert_eq!(fit.degree, 1);
        assert_eq!(fit.eval(0), 1);
        assert_eq!(fit.eval(20), 41);
        let g = ctx(&real, full_facet(1), &[0, 0]);
        let fit_g = nu_m_fit(&g, &mu2, &eye(2), 0..=6, &[7, 9, 11, 13, 15]).unwrap();
        assert_eq!(fit_g.degree, 0);
        assert_eq!(fit_g.eval(7), 1);
    }

    #[test]
    fn fit_rejects_short_windows_and_holdouts() {
        let real = gl2(5);
        let a = ctx(&real, torus_facet(), &[0, 0]);
        let mu2 = vec_rat(&[1, -1]);
        assert_eq!(
            nu_m_fit(&a, &mu2, &eye(2), 0..=1, &[8, 10, 12, 15, 20]).unwrap_err(),
            TruncError::WindowTooShort { need: 3 }
        );
        assert_eq!(
            nu_m_fit(&a, &mu2, &eye(2), 0..=6, &[8, 10]).unwrap_err(),
            TruncError::HoldoutTooSmall { need: 5, got: 2 }
        );
    }

    #[test]
    fn limit_check_on_a_small_suite() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let real = gl2(5);
        let c = ctx(&real, torus_facet(), &[2, 0]);
        let mu2 = vec_rat(&[1, -1]);
        let samples: Vec<_> = (0..3).map(|_| real.random_element(-1..=1, &mut rng)).collect();
        let report = main_limit_check(&c, &mu2, &samples, 18, 2).unwrap();
        assert!(report.within(&report.envelope_coeff));
        assert!(report.max_settle() <= 18);
        assert_eq!(report.envelope_power, 2);
    }

    #[test]
    fn weight_report_margin_forces_three_way_agreement() {
        let real = gl2(5);
        let c = ctx(&real, torus_facet(), &[3, -3]);
        let report = weight_report(&c, &eye(2), &rat(1)).unwrap();
        assert!(report.regularity_margin.is_positive());
        assert!(report.omega_bar);
        assert_eq!(report.omega_m.exact(), Some(7));
        assert_eq!(report.omega_m_asymp, report.omega_m);
        assert_eq!(report.theta_split_asymp, report.omega_m);
    }
}
