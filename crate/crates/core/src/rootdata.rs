//! Based root data with materialized Weyl groups.
//!
//! A [`RootDatum`] fixes an ambient coordinate space ℤ^dim, a list of simple
//! roots (integer functionals) and simple coroots (integer vectors), and a
//! basis of the cocharacter lattice X ⊆ ℤ^dim it acts on. The Weyl group is
//! generated by the simple reflections and materialized as an explicit
//! element list — practical for rank ≤ 4, which is the regime every consumer
//! of this crate works in.
//!
//! Chambers are indexed by Weyl elements (`w` ↔ `w·C₀` for the standard
//! positive chamber `C₀`); facets by a chamber plus the subset of its walls
//! the facet lies on. Facets of the chamber fan are canonicalized through the
//! sign pattern they induce on the positive roots, so the same geometric cone
//! reached through different `(chamber, walls)` descriptions deduplicates.
//!
//! [`InvolutionSpec`] wraps an integral involution θ of the ambient space
//! that preserves the lattice and permutes the coroots. It knows its split
//! subspace (the −1 eigenspace), decides which facets `C` satisfy
//! `θ(C) = −C`, and computes, chamber by chamber, the permutation of chamber
//! rays induced by `−θ` — the ingredient for folding chamber coordinates in
//! [`crate::orthoset::minus_set`].

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{
    functional_compose, identity_i64, integer_kernel, mat_apply, mat_apply_i64, mat_mul_i64,
    pair, rat, smith_normal_form, solve_unique, vec_rat, Rat,
};

/// Hard cap on the materialized Weyl group (F₄ has 1152 elements; nothing in
/// scope is larger).
pub const WEYL_CAP: usize = 1200;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RootDatumError {
    #[error("dimension mismatch in roots, coroots, or lattice")]
    DimensionMismatch,
    #[error("pairing ⟨α_{0}, α̌_{0}⟩ = {1}, expected 2")]
    DiagonalPairingNotTwo(usize, i64),
    #[error("off-diagonal pairing ⟨α_{0}, α̌_{1}⟩ = {2} must be ≤ 0, with ⟨α_i,α̌_j⟩ = 0 iff ⟨α_j,α̌_i⟩ = 0")]
    BadOffDiagonalPairing(usize, usize, i64),
    #[error("simple roots (or coroots) are linearly dependent")]
    DependentSimples,
    #[error("lattice basis is not linearly independent")]
    DegenerateLattice,
    #[error("coroot {0} does not lie in the cocharacter lattice")]
    CorootOutsideLattice(usize),
    #[error("Weyl group exceeds the materialization cap of {0} elements")]
    WeylTooLarge(usize),
    #[error("supplied inner product is not Weyl-invariant")]
    InnerProductNotInvariant,
    #[error("point does not lie in the span of the cocharacter lattice")]
    NotInSpan,
    #[error("point is not a lattice point")]
    NotInLattice,
    #[error("mu is not dominant for the facet's chamber")]
    FacetChamberMismatch,
    #[error("facet refers to an unknown chamber or wall index")]
    BadFacetIndex,
    #[error("involution matrix is not an involution of the ambient space")]
    NotInvolutive,
    #[error("involution does not preserve the cocharacter lattice")]
    LatticeNotPreserved,
    #[error("involution does not permute the set of coroots")]
    CorootsNotPermuted,
    #[error("involution does not permute the set of roots")]
    RootsNotPermuted,
    #[error("chamber {0} is not θ-split")]
    ChamberNotSplit(usize),
    #[error("−θ does not permute the rays of chamber {0} (non-simplicial or unsplit central part)")]
    RaysNotPermuted(usize),
}

/// JSON-facing description of a root datum. Everything derived (Weyl group,
/// Λ quotient, ray systems) is rebuilt by [`RootDatum::from_spec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RootDatumSpec {
    pub name: String,
    pub dim: usize,
    pub simple_roots: Vec<Vec<i64>>,
    pub simple_coroots: Vec<Vec<i64>>,
    /// Rows form a basis of the cocharacter lattice in ambient coordinates.
    /// Defaults to the standard basis of ℤ^dim.
    #[serde(default)]
    pub lattice: Option<Vec<Vec<i64>>>,
}

/// One Weyl group element: its matrix on the ambient space, the inverse
/// matrix, and a reduced-ish word in the simple reflections (the BFS word).
#[derive(Debug, Clone)]
pub struct WeylElt {
    pub mat: Vec<Vec<i64>>,
    pub inv: Vec<Vec<i64>>,
    pub word: Vec<usize>,
}

/// Class in Λ = X / (coroot lattice): residues against the nontrivial
/// elementary divisors plus the free quotient coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LambdaClass {
    /// (modulus, residue) pairs for each torsion invariant, fixed order.
    pub torsion: Vec<(i64, i64)>,
    pub free: Vec<i64>,
}

#[derive(Debug, Clone)]
struct LambdaData {
    /// Left SNF transform of the coroot matrix (lattice coords), r×r.
    u: Vec<Vec<i128>>,
    /// Divisor assigned to each of the r quotient coordinates (0 = free).
    divisors: Vec<i128>,
}

/// Facet of the chamber fan: the face of the closed chamber `chamber` lying
/// on the walls listed in `zeroed` (indices into the simple roots). The empty
/// wall set is the open chamber itself.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FacetIndex {
    pub chamber: usize,
    pub zeroed: BTreeSet<usize>,
}

impl FacetIndex {
    pub fn chamber_of(w: usize) -> Self {
        FacetIndex { chamber: w, zeroed: BTreeSet::new() }
    }
}

#[derive(Clone)]
pub struct RootDatum {
    name: String,
    dim: usize,
    simple_roots: Vec<Vec<i64>>,
    simple_coroots: Vec<Vec<i64>>,
    lattice: Vec<Vec<i64>>,
    weyl: Vec<WeylElt>,
    index: BTreeMap<Vec<i64>, usize>,
    adjacency: Vec<Vec<usize>>,
    w0: usize,
    positive_roots: Vec<Vec<i64>>,
    /// Expansion of each positive root in the simple-root basis.
    root_expansions: Vec<Vec<Rat>>,
    fundamental_rays: Vec<Vec<Rat>>,
    lineality: Vec<Vec<Rat>>,
    lambda: LambdaData,
    lambda_free_rank: usize,
    qform: Vec<Vec<Rat>>,
}

impl std::fmt::Debug for RootDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RootDatum")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("rank", &self.simple_roots.len())
            .field("weyl_order", &self.weyl.len())
            .finish()
    }
}

impl RootDatum {
    pub fn from_spec(spec: &RootDatumSpec) -> Result<Self, RootDatumError> {
        Self::new(
            &spec.name,
            spec.dim,
            spec.simple_roots.clone(),
            spec.simple_coroots.clone(),
            spec.lattice.clone(),
        )
    }

    pub fn new(
        name: &str,
        dim: usize,
        simple_roots: Vec<Vec<i64>>,
        simple_coroots: Vec<Vec<i64>>,
        lattice: Option<Vec<Vec<i64>>>,
    ) -> Result<Self, RootDatumError> {
        let s = simple_roots.len();
        if simple_coroots.len() != s
            || simple_roots.iter().any(|r| r.len() != dim)
            || simple_coroots.iter().any(|r| r.len() != dim)
        {
            return Err(RootDatumError::DimensionMismatch);
        }
        let lattice = lattice.unwrap_or_else(|| identity_i64(dim));
        if lattice.is_empty() || lattice.iter().any(|r| r.len() != dim) {
            return Err(RootDatumError::DimensionMismatch);
        }
        // Pairing matrix sanity.
        for i in 0..s {
            for j in 0..s {
                let c: i64 = simple_roots[i]
                    .iter()
                    .zip(&simple_coroots[j])
                    .map(|(&a, &b)| a * b)
                    .sum();
                if i == j && c != 2 {
                    return Err(RootDatumError::DiagonalPairingNotTwo(i, c));
                }
                if i != j {
                    let cji: i64 = simple_roots[j]
                        .iter()
                        .zip(&simple_coroots[i])
                        .map(|(&a, &b)| a * b)
                        .sum();
                    if c > 0 || (c == 0) != (cji == 0) {
                        return Err(RootDatumError::BadOffDiagonalPairing(i, j, c));
                    }
                }
            }
        }
        // Independence of simples and of the lattice basis.
        if rank_of(&simple_roots) != s || rank_of(&simple_coroots) != s {
            return Err(RootDatumError::DependentSimples);
        }
        let r = lattice.len();
        if rank_of(&lattice) != r {
            return Err(RootDatumError::DegenerateLattice);
        }

        let mut datum = RootDatum {
            name: name.to_string(),
            dim,
            simple_roots,
            simple_coroots,
            lattice,
            weyl: Vec::new(),
            index: BTreeMap::new(),
            adjacency: Vec::new(),
            w0: 0,
            positive_roots: Vec::new(),
            root_expansions: Vec::new(),
            fundamental_rays: Vec::new(),
            lineality: Vec::new(),
            lambda: LambdaData { u: Vec::new(), divisors: Vec::new() },
            lambda_free_rank: 0,
            qform: Vec::new(),
        };

        for j in 0..s {
            let coroot = vec_rat(&datum.simple_coroots[j]);
            if datum.lattice_coords_int(&coroot).is_err() {
                return Err(RootDatumError::CorootOutsideLattice(j));
            }
        }

        datum.build_weyl()?;
        datum.build_roots();
        datum.build_rays();
        datum.finish_w0();
        datum.build_lineality();
        datum.build_lambda();
        datum.build_qform()?;
        Ok(datum)
    }

    fn reflection_matrix(&self, i: usize) -> Vec<Vec<i64>> {
        let mut m = identity_i64(self.dim);
        for (row, mr) in m.iter_mut().enumerate() {
            for (col, x) in mr.iter_mut().enumerate() {
                *x -= self.simple_coroots[i][row] * self.simple_roots[i][col];
            }
        }
        m
    }

    fn build_weyl(&mut self) -> Result<(), RootDatumError> {
        let gens: Vec<Vec<Vec<i64>>> =
            (0..self.rank()).map(|i| self.reflection_matrix(i)).collect();
        let id = identity_i64(self.dim);
        self.weyl.push(WeylElt { mat: id.clone(), inv: id.clone(), word: Vec::new() });
        self.index.insert(flatten(&id), 0);
        let mut head = 0usize;
        while head < self.weyl.len() {
            for (g, gen) in gens.iter().enumerate() {
                let m = mat_mul_i64(&self.weyl[head].mat, gen);
                let key = flatten(&m);
                if !self.index.contains_key(&key) {
                    if self.weyl.len() >= WEYL_CAP {
                        return Err(RootDatumError::WeylTooLarge(WEYL_CAP));
                    }
                    let mut word = self.weyl[head].word.clone();
                    word.push(g);
                    // Generators are involutions, so the inverse is the
                    // reversed word.
                    let mut inv = identity_i64(self.dim);
                    for &k in word.iter().rev() {
                        inv = mat_mul_i64(&inv, &gens[k]);
                    }
                    let next = self.weyl.len();
                    self.index.insert(key, next);
                    self.weyl.push(WeylElt { mat: m, inv, word });
                }
            }
            head += 1;
        }
        self.adjacency = (0..self.weyl.len())
            .map(|i| {
                (0..self.rank())
                    .map(|g| {
                        let m = mat_mul_i64(&self.weyl[i].mat, &gens[g]);
                        self.index[&flatten(&m)]
                    })
                    .collect()
            })
            .collect();
        Ok(())
    }

    fn build_roots(&mut self) {
        // Orbit of the simple roots under the (dual) Weyl action.
        let mut seen: BTreeSet<Vec<i64>> = BTreeSet::new();
        for alpha in &self.simple_roots {
            for w in &self.weyl {
                seen.insert(functional_compose(alpha, &w.mat));
            }
        }
        for root in seen {
            if let Some(exp) = self.expand_in_simples(&root) {
                if exp.iter().all(|c| !c.is_negative()) && exp.iter().any(|c| c.is_positive()) {
                    self.root_expansions.push(exp);
                    self.positive_roots.push(root);
                }
            }
        }
    }

    fn expand_in_simples(&self, functional: &[i64]) -> Option<Vec<Rat>> {
        let s = self.rank();
        if s == 0 {
            return functional.iter().all(|&c| c == 0).then(Vec::new);
        }
        let a: Vec<Vec<Rat>> = (0..self.dim)
            .map(|c| (0..s).map(|k| rat(self.simple_roots[k][c] as i128)).collect())
            .collect();
        let b: Vec<Rat> = functional.iter().map(|&c| rat(c as i128)).collect();
        solve_unique(&a, &b)
    }

    fn build_rays(&mut self) {
        let s = self.rank();
        if s == 0 {
            return;
        }
        let cartan: Vec<Vec<Rat>> = (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| {
                        rat(self.simple_roots[i]
                            .iter()
                            .zip(&self.simple_coroots[j])
                            .map(|(&a, &b)| (a * b) as i128)
                            .sum())
                    })
                    .collect()
            })
            .collect();
        for i in 0..s {
            let mut e = vec![Rat::zero(); s];
            e[i] = rat(1);
            let c = solve_unique(&cartan, &e).expect("Cartan matrix is invertible");
            let mut ray = vec![Rat::zero(); self.dim];
            for (j, cj) in c.iter().enumerate() {
                for (x, &co) in ray.iter_mut().zip(&self.simple_coroots[j]) {
                    *x += cj * rat(co as i128);
                }
            }
            self.fundamental_rays.push(ray);
        }
    }

    fn build_lineality(&mut self) {
        let r = self.lattice.len();
        let s = self.rank();
        if s == 0 {
            // Whole space is central.
            self.lineality = (0..r).map(|i| vec_rat(&self.lattice[i])).collect();
            return;
        }
        let m: Vec<Vec<i128>> = (0..s)
            .map(|i| {
                (0..r)
                    .map(|j| pair_i128(&self.simple_roots[i], &self.lattice[j]))
                    .collect()
            })
            .collect();
        for k in integer_kernel(&m) {
            let mut v = vec![Rat::zero(); self.dim];
            for (j, &c) in k.iter().enumerate() {
                for (x, &b) in v.iter_mut().zip(&self.lattice[j]) {
                    *x += rat(c) * rat(b as i128);
                }
            }
            self.lineality.push(v);
        }
    }

    fn build_lambda(&mut self) {
        let r = self.lattice.len();
        let s = self.rank();
        let coroot_cols: Vec<Vec<i128>> = (0..s)
            .map(|j| {
                self.lattice_coords_int(&vec_rat(&self.simple_coroots[j]))
                    .expect("validated above")
            })
            .collect();
        let m: Vec<Vec<i128>> = (0..r)
            .map(|i| (0..s).map(|j| coroot_cols[j][i]).collect())
            .collect();
        let snf = smith_normal_form(&m);
        let mut divisors = vec![0i128; r];
        for (i, d) in divisors.iter_mut().enumerate().take(r.min(s)) {
            *d = snf.d[i][i];
        }
        self.lambda_free_rank = divisors.iter().filter(|&&d| d == 0).count();
        self.lambda = LambdaData { u: snf.u, divisors };
    }

    fn build_qform(&mut self) -> Result<(), RootDatumError> {
        // Try the standard dot product; fall back to the Gram average, which
        // is invariant by construction.
        let id: Vec<Vec<Rat>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| rat(i128::from(i == j))).collect())
            .collect();
        if self.q_invariant(&id) {
            self.qform = id;
            return Ok(());
        }
        let mut q = vec![vec![Rat::zero(); self.dim]; self.dim];
        for w in &self.weyl {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let mut acc = Rat::zero();
                    for k in 0..self.dim {
                        acc += rat(w.mat[k][i] as i128) * rat(w.mat[k][j] as i128);
                    }
                    q[i][j] += acc;
                }
            }
        }
        if !self.q_invariant(&q) {
            return Err(RootDatumError::InnerProductNotInvariant);
        }
        self.qform = q;
        Ok(())
    }

    fn q_invariant(&self, q: &[Vec<Rat>]) -> bool {
        for w in self.weyl.iter().take(1 + self.rank()) {
            // Checking the generators suffices.
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let mut lhs = Rat::zero();
                    for k in 0..self.dim {
                        for l in 0..self.dim {
                            lhs += rat(w.mat[k][i] as i128) * &q[k][l] * rat(w.mat[l][j] as i128);
                        }
                    }
                    if lhs != q[i][j] {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Ambient coordinate dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of simple roots.
    pub fn rank(&self) -> usize {
        self.simple_roots.len()
    }

    /// Rank of the cocharacter lattice (= dimension of the real span 𝔞).
    pub fn lattice_rank(&self) -> usize {
        self.lattice.len()
    }

    /// Basis rows of the cocharacter lattice in ambient coordinates.
    pub fn lattice_rows(&self) -> &[Vec<i64>] {
        &self.lattice
    }

    pub fn simple_roots(&self) -> &[Vec<i64>] {
        &self.simple_roots
    }

    pub fn simple_coroots(&self) -> &[Vec<i64>] {
        &self.simple_coroots
    }

    pub fn positive_roots(&self) -> &[Vec<i64>] {
        &self.positive_roots
    }

    pub fn weyl(&self) -> &[WeylElt] {
        &self.weyl
    }

    pub fn weyl_order(&self) -> usize {
        self.weyl.len()
    }

    pub fn fundamental_rays(&self) -> &[Vec<Rat>] {
        &self.fundamental_rays
    }

    pub fn lineality_basis(&self) -> &[Vec<Rat>] {
        &self.lineality
    }

    pub fn lambda_free_rank(&self) -> usize {
        self.lambda_free_rank
    }

    /// Index of the Weyl element sending the standard chamber to its
    /// negative.
    pub fn longest_element(&self) -> usize {
        self.w0
    }

    /// Chamber adjacent to `chamber` across its wall `gen`.
    pub fn adjacent_chamber(&self, chamber: usize, gen: usize) -> usize {
        self.adjacency[chamber][gen]
    }

    pub fn opposite_chamber(&self, chamber: usize) -> usize {
        let m = mat_mul_i64(&self.weyl[chamber].mat, &self.weyl[self.w0].mat);
        self.index[&flatten(&m)]
    }

    pub fn apply(&self, w: usize, v: &[Rat]) -> Vec<Rat> {
        mat_apply(&self.weyl[w].mat, v)
    }

    pub fn apply_inverse(&self, w: usize, v: &[Rat]) -> Vec<Rat> {
        mat_apply(&self.weyl[w].inv, v)
    }

    pub fn element_index(&self, mat: &[Vec<i64>]) -> Option<usize> {
        self.index.get(&flatten(mat)).copied()
    }

    /// Simple roots of the chamber `w·C₀`: functionals `α_i ∘ w⁻¹`.
    pub fn chamber_simple_roots(&self, w: usize) -> Vec<Vec<i64>> {
        self.simple_roots
            .iter()
            .map(|a| functional_compose(a, &self.weyl[w].inv))
            .collect()
    }

    /// Simple coroots of the chamber `w·C₀`: vectors `w·α̌_i`.
    pub fn chamber_simple_coroots(&self, w: usize) -> Vec<Vec<i64>> {
        self.simple_coroots
            .iter()
            .map(|c| mat_apply_i64(&self.weyl[w].mat, c))
            .collect()
    }

    /// Rational coordinates of `v` in the lattice basis, `Err` when `v` is
    /// outside the real span of the lattice.
    pub fn lattice_coords(&self, v: &[Rat]) -> Result<Vec<Rat>, RootDatumError> {
        if v.len() != self.dim {
            return Err(RootDatumError::DimensionMismatch);
        }
        let a: Vec<Vec<Rat>> = (0..self.dim)
            .map(|c| (0..self.lattice.len()).map(|k| rat(self.lattice[k][c] as i128)).collect())
            .collect();
        solve_unique(&a, v).ok_or(RootDatumError::NotInSpan)
    }

    /// Integer lattice coordinates, `Err` when `v` is not a lattice point.
    pub fn lattice_coords_int(&self, v: &[Rat]) -> Result<Vec<i128>, RootDatumError> {
        let coords = self.lattice_coords(v)?;
        coords
            .iter()
            .map(|c| c.is_integer().then(|| c.to_integer()).ok_or(RootDatumError::NotInLattice))
            .collect()
    }

    /// Ambient vector from lattice coordinates.
    pub fn from_lattice_coords(&self, coords: &[i128]) -> Vec<Rat> {
        let mut v = vec![Rat::zero(); self.dim];
        for (j, &c) in coords.iter().enumerate() {
            for (x, &b) in v.iter_mut().zip(&self.lattice[j]) {
                *x += rat(c) * rat(b as i128);
            }
        }
        v
    }

    pub fn in_span(&self, v: &[Rat]) -> bool {
        self.lattice_coords(v).is_ok()
    }

    /// Class of a lattice point in Λ = X / (coroot lattice).
    pub fn lambda_class(&self, v: &[Rat]) -> Result<LambdaClass, RootDatumError> {
        let x = self.lattice_coords_int(v)?;
        let y: Vec<i128> = self
            .lambda
            .u
            .iter()
            .map(|row| row.iter().zip(&x).map(|(&a, &b)| a * b).sum())
            .collect();
        let mut torsion = Vec::new();
        let mut free = Vec::new();
        for (i, &d) in self.lambda.divisors.iter().enumerate() {
            if d == 0 {
                free.push(y[i] as i64);
            } else if d > 1 {
                torsion.push((d as i64, y[i].rem_euclid(d) as i64));
            }
        }
        Ok(LambdaClass { torsion, free })
    }

    /// Two lattice points lie in the same Λ-class exactly when their
    /// difference is an integer combination of coroots.
    pub fn same_lambda_class(&self, a: &[Rat], b: &[Rat]) -> Result<bool, RootDatumError> {
        Ok(self.lambda_class(a)? == self.lambda_class(b)?)
    }

    pub fn norm_sq(&self, v: &[Rat]) -> Rat {
        let mut acc = Rat::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += &v[i] * &self.qform[i][j] * &v[j];
            }
        }
        acc
    }

    pub fn is_dominant(&self, v: &[Rat]) -> bool {
        self.simple_roots.iter().all(|a| !pair(a, v).is_negative())
    }

    pub fn is_strictly_dominant(&self, v: &[Rat]) -> bool {
        self.simple_roots.iter().all(|a| pair(a, v).is_positive())
    }

    pub fn is_dominant_for(&self, chamber: usize, v: &[Rat]) -> bool {
        self.chamber_simple_roots(chamber)
            .iter()
            .all(|a| !pair(a, v).is_negative())
    }

    /// Full Weyl orbit of `v`, sorted and deduplicated.
    pub fn weyl_orbit(&self, v: &[Rat]) -> Result<Vec<Vec<Rat>>, RootDatumError> {
        if !self.in_span(v) {
            return Err(RootDatumError::NotInSpan);
        }
        let mut orbit: BTreeSet<Vec<Rat>> = BTreeSet::new();
        for w in &self.weyl {
            orbit.insert(mat_apply(&w.mat, v));
        }
        Ok(orbit.into_iter().collect())
    }

    /// The dominant point of the orbit of `v` together with a Weyl element
    /// `w` such that `w(v)` is that point.
    pub fn dominant_representative(
        &self,
        v: &[Rat],
    ) -> Result<(Vec<Rat>, usize), RootDatumError> {
        if !self.in_span(v) {
            return Err(RootDatumError::NotInSpan);
        }
        let mut cur = v.to_vec();
        let mut acc = identity_i64(self.dim);
        let mut steps = 0usize;
        loop {
            let Some(i) = (0..self.rank()).find(|&i| pair(&self.simple_roots[i], &cur).is_negative())
            else {
                break;
            };
            let refl = self.reflection_matrix(i);
            cur = mat_apply(&refl, &cur);
            acc = mat_mul_i64(&refl, &acc);
            steps += 1;
            assert!(steps <= 4 * self.weyl.len(), "dominance recursion failed to terminate");
        }
        let w = self.index[&flatten(&acc)];
        Ok((cur, w))
    }

    /// Sign (−1, 0, +1) of the positive root `root_idx` on the facet.
    fn root_sign_on_facet(&self, root_idx: usize, facet: &FacetIndex) -> i8 {
        let composed = functional_compose(&self.positive_roots[root_idx], &self.weyl[facet.chamber].mat);
        self.sign_from_expansion(&composed, &facet.zeroed)
    }

    /// Sign of an arbitrary root-lattice functional on the standard facet
    /// with walls `zeroed`.
    fn sign_from_expansion(&self, functional: &[i64], zeroed: &BTreeSet<usize>) -> i8 {
        let exp = self
            .expand_in_simples(functional)
            .expect("root image must stay in the root span");
        let mut pos = false;
        let mut neg = false;
        for (k, c) in exp.iter().enumerate() {
            if zeroed.contains(&k) {
                continue;
            }
            if c.is_positive() {
                pos = true;
            }
            if c.is_negative() {
                neg = true;
            }
        }
        match (pos, neg) {
            (true, false) => 1,
            (false, true) => -1,
            (false, false) => 0,
            (true, true) => unreachable!("root changes sign on a facet of the chamber fan"),
        }
    }

    fn facet_signature(&self, facet: &FacetIndex) -> Vec<i8> {
        (0..self.positive_roots.len())
            .map(|r| self.root_sign_on_facet(r, facet))
            .collect()
    }

    /// All facets of the chamber fan, one canonical `(chamber, walls)`
    /// representative per geometric facet, in a deterministic order.
    pub fn all_facets(&self) -> Vec<FacetIndex> {
        let mut seen: BTreeSet<Vec<i8>> = BTreeSet::new();
        let mut out = Vec::new();
        let s = self.rank();
        for chamber in 0..self.weyl.len() {
            for mask in 0..(1u32 << s) {
                let zeroed: BTreeSet<usize> = (0..s).filter(|&i| mask >> i & 1 == 1).collect();
                let facet = FacetIndex { chamber, zeroed };
                let sig = self.facet_signature(&facet);
                if seen.insert(sig) {
                    out.push(facet);
                }
            }
        }
        out
    }

    /// Dimension of a facet as a cone in 𝔞 (lineality included).
    pub fn facet_dim(&self, facet: &FacetIndex) -> usize {
        self.lattice_rank() - facet.zeroed.len()
    }

    /// Whether `v` lies in the (relatively open) facet.
    pub fn facet_contains(&self, facet: &FacetIndex, v: &[Rat]) -> bool {
        if !self.in_span(v) {
            return false;
        }
        (0..self.positive_roots.len()).all(|r| {
            let val = pair(&self.positive_roots[r], v);
            let sign = if val.is_positive() {
                1
            } else if val.is_negative() {
                -1
            } else {
                0
            };
            sign == self.root_sign_on_facet(r, facet)
        })
    }

    /// Whether `v` lies in the closure of the facet.
    pub fn facet_closure_contains(&self, facet: &FacetIndex, v: &[Rat]) -> bool {
        if !self.in_span(v) {
            return false;
        }
        (0..self.positive_roots.len()).all(|r| {
            let val = pair(&self.positive_roots[r], v);
            match self.root_sign_on_facet(r, facet) {
                1 => !val.is_negative(),
                -1 => !val.is_positive(),
                _ => val.is_zero(),
            }
        })
    }

    /// Project `mu` (dominant for the facet's chamber) onto the linear span
    /// of the facet, orthogonally for every Weyl-invariant inner product: the
    /// component removed is the combination of the zeroed walls' coroots that
    /// kills the zeroed pairings.
    pub fn facet_projection(
        &self,
        facet: &FacetIndex,
        mu: &[Rat],
    ) -> Result<Vec<Rat>, RootDatumError> {
        if facet.chamber >= self.weyl.len() || facet.zeroed.iter().any(|&i| i >= self.rank()) {
            return Err(RootDatumError::BadFacetIndex);
        }
        if !self.in_span(mu) {
            return Err(RootDatumError::NotInSpan);
        }
        if !self.is_dominant_for(facet.chamber, mu) {
            return Err(RootDatumError::FacetChamberMismatch);
        }
        let mu0 = self.apply_inverse(facet.chamber, mu);
        let idx: Vec<usize> = facet.zeroed.iter().copied().collect();
        if idx.is_empty() {
            return Ok(mu.to_vec());
        }
        let a: Vec<Vec<Rat>> = idx
            .iter()
            .map(|&i| {
                idx.iter()
                    .map(|&j| {
                        rat(self.simple_roots[i]
                            .iter()
                            .zip(&self.simple_coroots[j])
                            .map(|(&x, &y)| (x * y) as i128)
                            .sum())
                    })
                    .collect()
            })
            .collect();
        let b: Vec<Rat> = idx.iter().map(|&i| pair(&self.simple_roots[i], &mu0)).collect();
        let c = solve_unique(&a, &b).expect("Levi Cartan matrix is invertible");
        let mut proj = mu0;
        for (&j, cj) in idx.iter().zip(&c) {
            for (x, &co) in proj.iter_mut().zip(&self.simple_coroots[j]) {
                *x -= cj * rat(co as i128);
            }
        }
        debug_assert!(idx
            .iter()
            .all(|&i| pair(&self.simple_roots[i], &proj).is_zero()));
        Ok(self.apply(facet.chamber, &proj))
    }

    /// Decompose `x` in the ray system of a chamber: coefficients on the
    /// chamber's fundamental rays plus coefficients on the lineality basis.
    pub fn ray_coordinates(
        &self,
        chamber: usize,
        x: &[Rat],
    ) -> Result<(Vec<Rat>, Vec<Rat>), RootDatumError> {
        if !self.in_span(x) {
            return Err(RootDatumError::NotInSpan);
        }
        let back = self.apply_inverse(chamber, x);
        let coeffs: Vec<Rat> = self
            .simple_roots
            .iter()
            .map(|a| pair(a, &back))
            .collect();
        let mut rest = back;
        for (i, c) in coeffs.iter().enumerate() {
            for (x, f) in rest.iter_mut().zip(&self.fundamental_rays[i]) {
                *x -= c * f;
            }
        }
        let lin = if self.lineality.is_empty() {
            debug_assert!(rest.iter().all(|c| c.is_zero()));
            Vec::new()
        } else {
            let a: Vec<Vec<Rat>> = (0..self.dim)
                .map(|r| self.lineality.iter().map(|z| z[r].clone()).collect())
                .collect();
            solve_unique(&a, &rest).expect("residual must lie in the lineality space")
        };
        Ok((coeffs, lin))
    }

    /// Rebuild a point from ray coordinates of a chamber.
    pub fn from_ray_coordinates(&self, chamber: usize, coeffs: &[Rat], lin: &[Rat]) -> Vec<Rat> {
        let mut x = vec![Rat::zero(); self.dim];
        for (c, f) in coeffs.iter().zip(&self.fundamental_rays) {
            for (xi, fi) in x.iter_mut().zip(f) {
                *xi += c * fi;
            }
        }
        for (c, z) in lin.iter().zip(&self.lineality) {
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi += c * zi;
            }
        }
        self.apply(chamber, &x)
    }

    fn finish_w0(&mut self) {
        if self.rank() == 0 {
            self.w0 = 0;
            return;
        }
        let mut t = vec![Rat::zero(); self.dim];
        for f in &self.fundamental_rays {
            for (x, fi) in t.iter_mut().zip(f) {
                *x += fi;
            }
        }
        let w0 = (0..self.weyl.len())
            .find(|&w| {
                let img = self.apply(w, &t);
                self.simple_roots.iter().all(|a| !pair(a, &img).is_positive())
            })
            .expect("longest element exists");
        self.w0 = w0;
    }
}

fn flatten(m: &[Vec<i64>]) -> Vec<i64> {
    m.iter().flatten().copied().collect()
}

fn pair_i128(f: &[i64], v: &[i64]) -> i128 {
    f.iter().zip(v).map(|(&a, &b)| (a as i128) * (b as i128)).sum()
}

fn rank_of(rows: &[Vec<i64>]) -> usize {
    let m: Vec<Vec<Rat>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| rat(x as i128)).collect())
        .collect();
    rank_rat(&m)
}

fn rank_rat(rows: &[Vec<Rat>]) -> usize {
    let mut m = rows.to_vec();
    let nrows = m.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = m[0].len();
    let mut rank = 0;
    for c in 0..ncols {
        let Some(pr) = (rank..nrows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(rank, pr);
        let inv = m[rank][c].recip();
        for x in m[rank].iter_mut() {
            *x *= &inv;
        }
        for i in 0..nrows {
            if i != rank && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..ncols {
                    let s = &m[rank][j] * &f;
                    m[i][j] -= s;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Integral involution of the ambient space, preserving the lattice and
/// permuting the coroots.
#[derive(Debug, Clone)]
pub struct InvolutionSpec {
    mat: Vec<Vec<i64>>,
    split_rank: usize,
    /// Basis (ambient coordinates) of the split sublattice
    /// `{ν ∈ X : θν = −ν}`; saturated.
    split_basis: Vec<Vec<i128>>,
}

impl InvolutionSpec {
    pub fn new(datum: &RootDatum, mat: Vec<Vec<i64>>) -> Result<Self, RootDatumError> {
        if mat.len() != datum.dim() || mat.iter().any(|r| r.len() != datum.dim()) {
            return Err(RootDatumError::DimensionMismatch);
        }
        let sq = mat_mul_i64(&mat, &mat);
        if sq != identity_i64(datum.dim()) {
            return Err(RootDatumError::NotInvolutive);
        }
        // Lattice preserved: θ·b_j has integer lattice coordinates.
        let mut theta_lat: Vec<Vec<i128>> = Vec::new();
        for b in &datum.lattice {
            let img = mat_apply(&mat, &vec_rat(b));
            let coords = datum
                .lattice_coords_int(&img)
                .map_err(|_| RootDatumError::LatticeNotPreserved)?;
            theta_lat.push(coords);
        }
        // Coroots permuted (as a set, over the full coroot system).
        let mut coroot_set: BTreeSet<Vec<i64>> = BTreeSet::new();
        for c in datum.simple_coroots() {
            for w in datum.weyl() {
                coroot_set.insert(mat_apply_i64(&w.mat, c));
            }
        }
        for c in &coroot_set {
            let img = mat_apply_i64(&mat, c);
            if !coroot_set.contains(&img) {
                return Err(RootDatumError::CorootsNotPermuted);
            }
        }
        // Roots permuted on the dual side: γ ∘ θ must again be a root.
        let mut root_set: BTreeSet<Vec<i64>> = BTreeSet::new();
        for a in datum.simple_roots() {
            for w in datum.weyl() {
                root_set.insert(functional_compose(a, &w.mat));
            }
        }
        for g in &root_set {
            if !root_set.contains(&functional_compose(g, &mat)) {
                return Err(RootDatumError::RootsNotPermuted);
            }
        }
        // Split sublattice: kernel of (θ + 1) in lattice coordinates.
        let r = datum.lattice_rank();
        let theta_plus: Vec<Vec<i128>> = (0..r)
            .map(|i| {
                (0..r)
                    .map(|j| theta_lat[j][i] + i128::from(i == j))
                    .collect()
            })
            .collect();
        let kernel = integer_kernel(&theta_plus);
        let split_basis: Vec<Vec<i128>> = kernel
            .iter()
            .map(|k| {
                let amb = datum.from_lattice_coords(k);
                amb.iter()
                    .map(|c| {
                        debug_assert!(c.is_integer());
                        c.to_integer()
                    })
                    .collect()
            })
            .collect();
        Ok(InvolutionSpec { mat, split_rank: split_basis.len(), split_basis })
    }

    pub fn matrix(&self) -> &[Vec<i64>] {
        &self.mat
    }

    pub fn split_rank(&self) -> usize {
        self.split_rank
    }

    /// Basis of the split sublattice `{ν ∈ X : θν = −ν}` in ambient
    /// coordinates.
    pub fn split_basis(&self) -> &[Vec<i128>] {
        &self.split_basis
    }

    pub fn apply(&self, v: &[Rat]) -> Vec<Rat> {
        mat_apply(&self.mat, v)
    }

    /// `−θ(v)`.
    pub fn minus_apply(&self, v: &[Rat]) -> Vec<Rat> {
        self.apply(v).iter().map(|x| -x).collect()
    }

    pub fn is_split_point(&self, v: &[Rat]) -> bool {
        self.apply(v) == crate::exact::vec_neg(v)
    }

    /// Does the facet `C` satisfy `θ(C) = −C` (as sets)?
    pub fn is_split_facet(&self, datum: &RootDatum, facet: &FacetIndex) -> bool {
        (0..datum.positive_roots.len()).all(|r| {
            // sign of γ on θ(C) is the sign of γ∘θ on C.
            let pulled = functional_compose(&datum.positive_roots[r], &self.mat);
            let composed = functional_compose(&pulled, &datum.weyl[facet.chamber].mat);
            let on_theta_c = datum.sign_from_expansion(&composed, &facet.zeroed);
            on_theta_c == -datum.root_sign_on_facet(r, facet)
        })
    }

    /// All facets with `θ(C) = −C`, in the deterministic facet order.
    pub fn split_facets(&self, datum: &RootDatum) -> Vec<FacetIndex> {
        datum
            .all_facets()
            .into_iter()
            .filter(|f| self.is_split_facet(datum, f))
            .collect()
    }

    /// Chambers (top-dimensional facets) with `θ(C) = −C`, as Weyl indices.
    pub fn split_chambers(&self, datum: &RootDatum) -> Vec<usize> {
        (0..datum.weyl_order())
            .filter(|&w| self.is_split_facet(datum, &FacetIndex::chamber_of(w)))
            .collect()
    }

    /// Permutation τ of the simple-ray indices of a split chamber with
    /// `−θ(ray_i) = ray_{τ(i)}`, requiring `−θ` to fix the central
    /// (lineality) directions pointwise. Chambers where `−θ` moves the
    /// central part or fails to permute the rays are rejected: their points
    /// admit no fold in ray coordinates.
    pub fn ray_permutation(
        &self,
        datum: &RootDatum,
        chamber: usize,
    ) -> Result<Vec<usize>, RootDatumError> {
        if !self.is_split_facet(datum, &FacetIndex::chamber_of(chamber)) {
            return Err(RootDatumError::ChamberNotSplit(chamber));
        }
        let rays: Vec<Vec<Rat>> = datum
            .fundamental_rays()
            .iter()
            .map(|f| datum.apply(chamber, f))
            .collect();
        let mut perm = Vec::with_capacity(rays.len());
        for ray in &rays {
            let img = self.minus_apply(ray);
            let Some(j) = rays.iter().position(|r| *r == img) else {
                return Err(RootDatumError::RaysNotPermuted(chamber));
            };
            perm.push(j);
        }
        for z in datum.lineality_basis() {
            if self.minus_apply(z) != *z {
                return Err(RootDatumError::RaysNotPermuted(chamber));
            }
        }
        Ok(perm)
    }
}

/// Convenience constructors for the realizations used throughout the test
/// suites and fixtures.
pub mod standard {
    use super::*;

    /// One-dimensional rank-one datum: α = (2), α̌ = (1).
    pub fn a1() -> RootDatum {
        RootDatum::new("A1", 1, vec![vec![2]], vec![vec![1]], None).unwrap()
    }

    /// Two orthogonal copies of `a1` on ℤ².
    pub fn a1_x_a1() -> RootDatum {
        RootDatum::new(
            "A1xA1",
            2,
            vec![vec![2, 0], vec![0, 2]],
            vec![vec![1, 0], vec![0, 1]],
            None,
        )
        .unwrap()
    }

    /// Rank-two type A in sum-zero coordinates on ℤ³.
    pub fn a2() -> RootDatum {
        RootDatum::new(
            "A2",
            3,
            vec![vec![1, -1, 0], vec![0, 1, -1]],
            vec![vec![1, -1, 0], vec![0, 1, -1]],
            Some(vec![vec![1, -1, 0], vec![0, 1, -1]]),
        )
        .unwrap()
    }

    /// Rank-two type B on ℤ²: long root e₁−e₂, short root e₂.
    pub fn b2() -> RootDatum {
        RootDatum::new(
            "B2",
            2,
            vec![vec![1, -1], vec![0, 1]],
            vec![vec![1, -1], vec![0, 2]],
            None,
        )
        .unwrap()
    }

    /// General linear group of rank `n`: coordinate cocharacters, roots
    /// `e_i − e_{i+1}`.
    pub fn gl(n: usize) -> RootDatum {
        let mut roots = Vec::new();
        for i in 0..n - 1 {
            let mut a = vec![0i64; n];
            a[i] = 1;
            a[i + 1] = -1;
            roots.push(a);
        }
        RootDatum::new(&format!("GL{n}"), n, roots.clone(), roots, None).unwrap()
    }

    /// Special linear group of rank `n` on the sum-zero sublattice of ℤⁿ.
    pub fn sl(n: usize) -> RootDatum {
        let mut roots = Vec::new();
        let mut lattice = Vec::new();
        for i in 0..n - 1 {
            let mut a = vec![0i64; n];
            a[i] = 1;
            a[i + 1] = -1;
            roots.push(a.clone());
            lattice.push(a);
        }
        RootDatum::new(&format!("SL{n}"), n, roots.clone(), roots, Some(lattice)).unwrap()
    }

    /// Two block-diagonal copies of SL₂ inside 4×4 matrices.
    pub fn sl2_x_sl2() -> RootDatum {
        RootDatum::new(
            "SL2xSL2",
            4,
            vec![vec![1, -1, 0, 0], vec![0, 0, 1, -1]],
            vec![vec![1, -1, 0, 0], vec![0, 0, 1, -1]],
            Some(vec![vec![1, -1, 0, 0], vec![0, 0, 1, -1]]),
        )
        .unwrap()
    }

    /// θ_star = −1.
    pub fn theta_minus_one(datum: &RootDatum) -> InvolutionSpec {
        let n = datum.dim();
        let mat: Vec<Vec<i64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { -1 } else { 0 }).collect())
            .collect();
        InvolutionSpec::new(datum, mat).unwrap()
    }

    /// θ_star = +1.
    pub fn theta_identity(datum: &RootDatum) -> InvolutionSpec {
        InvolutionSpec::new(datum, identity_i64(datum.dim())).unwrap()
    }

    /// θ_star swapping coordinates i ↔ dim/2 + i (factor swap).
    pub fn theta_swap_halves(datum: &RootDatum) -> InvolutionSpec {
        let n = datum.dim();
        assert!(n % 2 == 0);
        let h = n / 2;
        let mut mat = vec![vec![0i64; n]; n];
        for i in 0..h {
            mat[i][h + i] = 1;
            mat[h + i][i] = 1;
        }
        InvolutionSpec::new(datum, mat).unwrap()
    }

    /// θ_star swapping the two coordinates of a 2-dimensional ambient space.
    pub fn theta_swap_two(datum: &RootDatum) -> InvolutionSpec {
        assert_eq!(datum.dim(), 2);
        InvolutionSpec::new(datum, vec![vec![0, 1], vec![1, 0]]).unwrap()
    }
}
