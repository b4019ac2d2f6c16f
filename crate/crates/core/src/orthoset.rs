//! Chamber-indexed orthogonal sets and their hulls.
//!
//! An orthogonal set assigns a point `x_B` to every chamber `B` so that
//! adjacent chambers differ along the shared wall's coroot:
//! `x_B − x_{B'} = r · α̌` with `α̌` the coroot of the wall, oriented toward
//! `B`. The set is *positive* when all those coefficients are ≥ 0 and
//! *special* when each `x_B` is dominant for its own chamber.
//!
//! For positive sets, membership in the convex hull of the `x_B` has a wall
//! formulation: `x` lies in the hull exactly when, for every chamber `B`,
//! the difference `x_B − x` is a nonnegative combination of `B`'s simple
//! coroots. [`hull_member`] runs that cone test; an independent simplex
//! search ([`hull_member_vertex`]) decides membership directly from the
//! vertex description and works for arbitrary point sets. Keeping both
//! routes alive lets the test suites compare them point by point.
//!
//! The θ-side of the module folds a set along an involution: on every
//! θ-split chamber, ray coordinates are folded with the ray permutation of
//! `−θ` ([`minus_set`]), producing a set indexed by split chambers whose
//! points live in the split subspace 𝔞⁻. [`validate_restricted`] checks the
//! folded set is orthogonal for the restricted fan on 𝔞⁻, and
//! [`compare_hulls_on_split_probes`] confronts the two hulls on a lattice
//! grid in 𝔞⁻.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::exact::{primitive_direction, rat, solve_unique, vec_rat, vec_sub, Rat};
use crate::rootdata::{InvolutionSpec, RootDatum, RootDatumError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrthoError {
    #[error("expected {expected} points (one per chamber), got {got}")]
    WrongPointCount { expected: usize, got: usize },
    #[error("point for chamber {0} lies outside the cocharacter span")]
    PointOutsideSpan(usize),
    #[error("chambers {chamber} and its neighbor across wall {wall} do not differ by a multiple of the wall coroot")]
    NotOrthogonal { chamber: usize, wall: usize },
    #[error("cone membership test requires a positive orthogonal set")]
    NotPositive,
    #[error("probe point lies outside the cocharacter span")]
    ProbeOutsideSpan,
    #[error("folded point for split chamber {0} is not fixed by −θ")]
    PointOutsideSplitSpace(usize),
    #[error("restricted fan is not simplicial enough for this routine: {0}")]
    UnsupportedRestriction(&'static str),
    #[error(transparent)]
    Rootdata(#[from] RootDatumError),
}

/// Outcome of validating a chamber-indexed point family.
#[derive(Debug, Clone)]
pub struct OrthoReport {
    /// `wall_coeffs[B][i]` is the coefficient r in
    /// `x_B − x_{B·s_i} = r · (B-side coroot of wall i)`.
    pub wall_coeffs: Vec<Vec<Rat>>,
    pub positive: bool,
    pub special: bool,
}

/// Check the orthogonality relations for a full chamber family and report
/// positivity and specialness.
pub fn validate(datum: &RootDatum, points: &[Vec<Rat>]) -> Result<OrthoReport, OrthoError> {
    if points.len() != datum.weyl_order() {
        return Err(OrthoError::WrongPointCount {
            expected: datum.weyl_order(),
            got: points.len(),
        });
    }
    for (w, p) in points.iter().enumerate() {
        if !datum.in_span(p) {
            return Err(OrthoError::PointOutsideSpan(w));
        }
    }
    let mut wall_coeffs = Vec::with_capacity(points.len());
    let mut positive = true;
    for w in 0..points.len() {
        let coroots = datum.chamber_simple_coroots(w);
        let mut row = Vec::with_capacity(datum.rank());
        for g in 0..datum.rank() {
            let neighbor = datum.adjacent_chamber(w, g);
            let diff = vec_sub(&points[w], &points[neighbor]);
            let coroot = vec_rat(&coroots[g]);
            let r = proportionality(&diff, &coroot)
                .ok_or(OrthoError::NotOrthogonal { chamber: w, wall: g })?;
            if r.is_negative() {
                positive = false;
            }
            row.push(r);
        }
        wall_coeffs.push(row);
    }
    let special = points
        .iter()
        .enumerate()
        .all(|(w, p)| datum.is_dominant_for(w, p));
    Ok(OrthoReport { wall_coeffs, positive, special })
}

/// `diff = r · dir` for some scalar r, if one exists. `dir` must be nonzero.
fn proportionality(diff: &[Rat], dir: &[Rat]) -> Option<Rat> {
    let k = dir.iter().position(|c| !c.is_zero())?;
    let r = &diff[k] / &dir[k];
    diff.iter()
        .zip(dir)
        .all(|(d, c)| *d == &r * c)
        .then_some(r)
}

/// The orbit family of `mu`: chamber `B = w·C₀` gets `w · mu⁺` where `mu⁺`
/// is the dominant representative. Always positive and special.
pub fn orbit_set(datum: &RootDatum, mu: &[Rat]) -> Result<Vec<Vec<Rat>>, OrthoError> {
    let (dom, _) = datum.dominant_representative(mu)?;
    Ok((0..datum.weyl_order()).map(|w| datum.apply(w, &dom)).collect())
}

/// Pointwise sum of orbit families — still positive and special, and no
/// longer a single orbit once two distinct generators are mixed.
pub fn sum_of_orbit_sets(datum: &RootDatum, mus: &[Vec<Rat>]) -> Result<Vec<Vec<Rat>>, OrthoError> {
    let mut out = vec![vec![Rat::zero(); datum.dim()]; datum.weyl_order()];
    for mu in mus {
        let set = orbit_set(datum, mu)?;
        for (acc, p) in out.iter_mut().zip(&set) {
            for (a, c) in acc.iter_mut().zip(p) {
                *a += c;
            }
        }
    }
    Ok(out)
}

/// Shift every point by the same vector. Orthogonality and positivity are
/// untouched; specialness usually is not.
pub fn shift_set(points: &[Vec<Rat>], shift: &[Rat]) -> Vec<Vec<Rat>> {
    points
        .iter()
        .map(|p| p.iter().zip(shift).map(|(a, b)| a + b).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HullRoute {
    /// Wall formulation — valid for positive sets.
    ConeTest,
    /// Carathéodory simplex search over the vertex description.
    VertexSimplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MembershipVerdict {
    pub inside: bool,
    pub route: HullRoute,
}

/// Hull membership, choosing the wall formulation for positive sets and the
/// vertex search otherwise.
pub fn hull_member(
    datum: &RootDatum,
    points: &[Vec<Rat>],
    x: &[Rat],
) -> Result<MembershipVerdict, OrthoError> {
    let report = validate(datum, points)?;
    if report.positive {
        Ok(MembershipVerdict { inside: hull_member_cone(datum, points, x)?, route: HullRoute::ConeTest })
    } else {
        Ok(MembershipVerdict {
            inside: hull_member_vertex(datum, points, x)?,
            route: HullRoute::VertexSimplex,
        })
    }
}

/// Wall-formulation membership: `x ∈ Hull{x_B}` iff for every chamber `B`
/// the difference `x_B − x` is a nonnegative combination of `B`'s simple
/// coroots. Only valid for positive sets; this routine checks positivity.
pub fn hull_member_cone(
    datum: &RootDatum,
    points: &[Vec<Rat>],
    x: &[Rat],
) -> Result<bool, OrthoError> {
    let report = validate(datum, points)?;
    if !report.positive {
        return Err(OrthoError::NotPositive);
    }
    if !datum.in_span(x) {
        return Err(OrthoError::ProbeOutsideSpan);
    }
    Ok((0..points.len()).all(|w| below_in_chamber(datum, w, &points[w], x)))
}

/// Wall-formulation membership without revalidating the set — for callers
/// that have already checked positivity once and probe many points.
pub(crate) fn cone_member_prevalidated(
    datum: &RootDatum,
    points: &[Vec<Rat>],
    x: &[Rat],
) -> bool {
    (0..points.len()).all(|w| below_in_chamber(datum, w, &points[w], x))
}

/// `x ≤_B x_B`: the difference is a nonnegative combination of `B`'s simple
/// coroots.
fn below_in_chamber(datum: &RootDatum, chamber: usize, top: &[Rat], x: &[Rat]) -> bool {
    let diff = vec_sub(top, x);
    let coroots = datum.chamber_simple_coroots(chamber);
    nonneg_combination(&diff, &coroots.iter().map(|c| vec_rat(c)).collect::<Vec<_>>())
}

/// Does `target = Σ cᵢ dirᵢ` with all `cᵢ ≥ 0`? The directions must be
/// linearly independent (true for simple coroots and for the deduplicated
/// restricted directions this module produces).
fn nonneg_combination(target: &[Rat], dirs: &[Vec<Rat>]) -> bool {
    if dirs.is_empty() {
        return target.iter().all(|c| c.is_zero());
    }
    let dim = target.len();
    let a: Vec<Vec<Rat>> = (0..dim)
        .map(|r| dirs.iter().map(|d| d[r].clone()).collect())
        .collect();
    match solve_unique(&a, target) {
        Some(c) => c.iter().all(|ci| !ci.is_negative()),
        None => false,
    }
}

/// Convex-hull membership by Carathéodory search: `x` is in the hull of the
/// distinct points iff some affinely independent subset of size ≤ dim+1
/// carries it with nonnegative barycentric coordinates. Exact and valid for
/// arbitrary finite point sets.
pub fn hull_member_vertex(
    datum: &RootDatum,
    points: &[Vec<Rat>],
    x: &[Rat],
) -> Result<bool, OrthoError> {
    if !datum.in_span(x) {
        return Err(OrthoError::ProbeOutsideSpan);
    }
    let verts: Vec<Vec<Rat>> = points
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let dim = datum.dim();
    let max_size = (affine_dim(&verts) + 1).min(verts.len());
    // Subsets in increasing size; affinely dependent subsets fail the unique
    // solve and are covered by one of their faces anyway.
    for size in 1..=max_size {
        for idx in (0..verts.len()).combinations(size) {
            let a: Vec<Vec<Rat>> = (0..=dim)
                .map(|r| {
                    idx.iter()
                        .map(|&i| if r < dim { verts[i][r].clone() } else { rat(1) })
                        .collect()
                })
                .collect();
            let mut b: Vec<Rat> = x.to_vec();
            b.push(rat(1));
            if let Some(lambda) = solve_unique(&a, &b) {
                if lambda.iter().all(|l| !l.is_negative()) {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

fn affine_dim(verts: &[Vec<Rat>]) -> usize {
    if verts.len() <= 1 {
        return 0;
    }
    let rows: Vec<Vec<Rat>> = verts[1..]
        .iter()
        .map(|v| vec_sub(v, &verts[0]))
        .collect();
    rank_rat(&rows)
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

/// Hull membership restricted to lattice points in the class of the set's
/// vertices: `x` must be a lattice point, lie in the same coroot-lattice
/// class as the vertices, and pass the hull test.
pub fn star_hull_member(
    datum: &RootDatum,
    points: &[Vec<Rat>],
    x: &[Rat],
) -> Result<bool, OrthoError> {
    if datum.lattice_coords_int(x).is_err() {
        return Ok(false);
    }
    match datum.same_lambda_class(x, &points[0]) {
        Ok(true) => {}
        Ok(false) => return Ok(false),
        Err(RootDatumError::NotInLattice) => return Ok(false),
        Err(e) => return Err(e.into()),
    }
    Ok(hull_member(datum, points, x)?.inside)
}

/// Fold a full orthogonal set along θ: every θ-split chamber keeps the
/// minimum of each ray coefficient over its `−θ`-orbit, the central part is
/// carried through unchanged. The folded points all lie in 𝔞⁻ and are
/// indexed by the split chambers.
pub fn minus_set(
    datum: &RootDatum,
    theta: &InvolutionSpec,
    points: &[Vec<Rat>],
) -> Result<BTreeMap<usize, Vec<Rat>>, OrthoError> {
    if points.len() != datum.weyl_order() {
        return Err(OrthoError::WrongPointCount {
            expected: datum.weyl_order(),
            got: points.len(),
        });
    }
    let mut out = BTreeMap::new();
    for chamber in theta.split_chambers(datum) {
        let perm = theta.ray_permutation(datum, chamber)?;
        let (coeffs, lin) = datum.ray_coordinates(chamber, &points[chamber])?;
        let folded: Vec<Rat> = (0..coeffs.len())
            .map(|i| coeffs[i].clone().min(coeffs[perm[i]].clone()))
            .collect();
        let point = datum.from_ray_coordinates(chamber, &folded, &lin);
        debug_assert!(theta.is_split_point(&point));
        out.insert(chamber, point);
    }
    Ok(out)
}

/// Validation data for a folded family on the restricted fan.
#[derive(Debug, Clone)]
pub struct RestrictedReport {
    /// Coefficient on the restricted coroot direction for each adjacent pair
    /// of split chambers, keyed `(B, B')` with `B < B'`.
    pub wall_coeffs: BTreeMap<(usize, usize), Rat>,
    pub positive: bool,
}

/// Primitive generators of the trace cone `B̄ ∩ 𝔞⁻` of a split chamber:
/// the `−θ`-folded chamber rays (the central directions are left implicit).
fn folded_ray_directions(
    datum: &RootDatum,
    theta: &InvolutionSpec,
    chamber: usize,
) -> Result<BTreeSet<Vec<i128>>, OrthoError> {
    let perm = theta.ray_permutation(datum, chamber)?;
    let mut dirs = BTreeSet::new();
    for (i, &j) in perm.iter().enumerate() {
        let ray = datum.apply(chamber, &datum.fundamental_rays()[i]);
        let partner = datum.apply(chamber, &datum.fundamental_rays()[j]);
        let sum: Vec<Rat> = ray.iter().zip(&partner).map(|(a, b)| a + b).collect();
        dirs.insert(primitive_direction(&sum));
    }
    Ok(dirs)
}

/// Check that a folded family is an orthogonal set for the restricted fan on
/// 𝔞⁻: adjacent split chambers (their traces share a codimension-one face)
/// must differ by a multiple of the projected coroot of the separating wall.
pub fn validate_restricted(
    datum: &RootDatum,
    theta: &InvolutionSpec,
    folded: &BTreeMap<usize, Vec<Rat>>,
) -> Result<RestrictedReport, OrthoError> {
    let split = theta.split_chambers(datum);
    if folded.len() != split.len() || split.iter().any(|c| !folded.contains_key(c)) {
        return Err(OrthoError::WrongPointCount { expected: split.len(), got: folded.len() });
    }
    for (&c, p) in folded {
        if !theta.is_split_point(p) {
            return Err(OrthoError::PointOutsideSplitSpace(c));
        }
    }
    let ray_sets: BTreeMap<usize, BTreeSet<Vec<i128>>> = split
        .iter()
        .map(|&c| Ok((c, folded_ray_directions(datum, theta, c)?)))
        .collect::<Result<_, OrthoError>>()?;
    // Distinct split chambers must have distinct traces.
    let distinct: BTreeSet<_> = ray_sets.values().collect();
    if distinct.len() != ray_sets.len() {
        return Err(OrthoError::UnsupportedRestriction(
            "two split chambers share the same trace cone",
        ));
    }
    let mut wall_coeffs = BTreeMap::new();
    let mut positive = true;
    for (ai, &a) in split.iter().enumerate() {
        for &b in &split[ai + 1..] {
            let sa = &ray_sets[&a];
            let sb = &ray_sets[&b];
            let only_a: Vec<_> = sa.difference(sb).collect();
            let only_b: Vec<_> = sb.difference(sa).collect();
            if only_a.len() != 1 || only_b.len() != 1 {
                continue; // not adjacent in the restricted fan
            }
            let coroot = restricted_wall_coroot(datum, theta, a, b)?;
            let diff = vec_sub(&folded[&a], &folded[&b]);
            let r = proportionality(&diff, &coroot)
                .ok_or(OrthoError::NotOrthogonal { chamber: a, wall: b })?;
            if r.is_negative() {
                positive = false;
            }
            wall_coeffs.insert((a, b), r);
        }
    }
    Ok(RestrictedReport { wall_coeffs, positive })
}

/// The projected coroot attached to the wall between the traces of two
/// adjacent split chambers, oriented toward `a`: project the coroots of the
/// roots that separate the traces (positive on `a`'s side) into 𝔞⁻. All
/// separating roots must project to the same ray.
fn restricted_wall_coroot(
    datum: &RootDatum,
    theta: &InvolutionSpec,
    a: usize,
    b: usize,
) -> Result<Vec<Rat>, OrthoError> {
    let split_basis: Vec<Vec<Rat>> = theta
        .split_basis()
        .iter()
        .map(|v| v.iter().map(|&c| rat(c)).collect())
        .collect();
    let trace_a = trace_generators(datum, theta, a)?;
    let trace_b = trace_generators(datum, theta, b)?;
    let mut best: Option<Vec<Rat>> = None;
    for sign in [1i64, -1] {
        for (idx, root) in datum.positive_roots().iter().enumerate() {
            let signed: Vec<i64> = root.iter().map(|&c| sign * c).collect();
            // Restriction nonzero on 𝔞⁻, ≥ 0 on trace(a), ≤ 0 on trace(b),
            // zero on the shared face.
            let on_basis_zero = split_basis
                .iter()
                .all(|v| crate::exact::pair(&signed, v).is_zero());
            if on_basis_zero {
                continue;
            }
            if !trace_a.iter().all(|g| !crate::exact::pair(&signed, g).is_negative()) {
                continue;
            }
            if !trace_b.iter().all(|g| !crate::exact::pair(&signed, g).is_positive()) {
                continue;
            }
            let common_ok = trace_a
                .iter()
                .filter(|g| trace_b.contains(*g))
                .all(|g| crate::exact::pair(&signed, g).is_zero());
            if !common_ok {
                continue;
            }
            // Projected coroot ½(α̌ − θα̌) of the separating root.
            let alpha_check = coroot_of_root(datum, idx, sign);
            let proj = project_split(theta, &alpha_check);
            if proj.iter().all(|c| c.is_zero()) {
                continue;
            }
            match &best {
                None => best = Some(proj),
                Some(prev) => {
                    if primitive_direction(prev) != primitive_direction(&proj) {
                        return Err(OrthoError::UnsupportedRestriction(
                            "separating coroots project to different rays",
                        ));
                    }
                }
            }
        }
    }
    best.ok_or(OrthoError::UnsupportedRestriction("no separating root found for adjacent traces"))
}

/// Generators of the trace cone of a split chamber: folded rays plus ± the
/// central directions.
fn trace_generators(
    datum: &RootDatum,
    theta: &InvolutionSpec,
    chamber: usize,
) -> Result<Vec<Vec<Rat>>, OrthoError> {
    let mut gens: Vec<Vec<Rat>> = folded_ray_directions(datum, theta, chamber)?
        .into_iter()
        .map(|d| d.into_iter().map(rat).collect())
        .collect();
    for z in datum.lineality_basis() {
        gens.push(z.clone());
        gens.push(z.iter().map(|c| -c).collect());
    }
    Ok(gens)
}

fn coroot_of_root(datum: &RootDatum, positive_idx: usize, sign: i64) -> Vec<Rat> {
    // Coroot of w·α_i is w·α̌_i; recover it by locating a chamber/wall pair
    // whose wall root is the requested one.
    let root = &datum.positive_roots()[positive_idx];
    for w in 0..datum.weyl_order() {
        let roots = datum.chamber_simple_roots(w);
        for (g, cand) in roots.iter().enumerate() {
            if cand == root {
                let coroot = vec_rat(&datum.chamber_simple_coroots(w)[g]);
                return if sign >= 0 { coroot } else { coroot.iter().map(|c| -c).collect() };
            }
        }
    }
    unreachable!("every root is simple for some chamber");
}

fn project_split(theta: &InvolutionSpec, v: &[Rat]) -> Vec<Rat> {
    let img = theta.apply(v);
    v.iter()
        .zip(&img)
        .map(|(a, b)| (a - b) / rat(2))
        .collect()
}

/// Membership of `x ∈ 𝔞⁻` in the hull of a folded family, by the wall
/// formulation over split chambers: `x⁻_B − x` must be a nonnegative
/// combination of the projected simple coroots of `B`.
pub fn restricted_hull_member(
    datum: &RootDatum,
    theta: &InvolutionSpec,
    folded: &BTreeMap<usize, Vec<Rat>>,
    x: &[Rat],
) -> Result<bool, OrthoError> {
    if !theta.is_split_point(x) {
        return Err(OrthoError::ProbeOutsideSpan);
    }
    for (&chamber, point) in folded {
        let mut dirs: Vec<Vec<Rat>> = Vec::new();
        let mut seen = BTreeSet::new();
        for c in datum.chamber_simple_coroots(chamber) {
            let proj = project_split(theta, &vec_rat(&c));
            if proj.iter().all(|ci| ci.is_zero()) {
                return Err(OrthoError::UnsupportedRestriction(
                    "a simple coroot of a split chamber projects to zero",
                ));
            }
            if seen.insert(primitive_direction(&proj)) {
                dirs.push(proj);
            }
        }
        if rank_rat(&dirs) != dirs.len() {
            return Err(OrthoError::UnsupportedRestriction(
                "projected coroot directions are dependent",
            ));
        }
        let diff = vec_sub(point, x);
        if !nonneg_combination(&diff, &dirs) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Result of probing the two hull descriptions on a grid in 𝔞⁻.
#[derive(Debug, Clone)]
pub struct HullComparison {
    pub probes: usize,
    /// Probe points where the full-hull trace and the folded hull disagree.
    pub mismatches: Vec<Vec<Rat>>,
}

impl HullComparison {
    pub fn agree(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Lattice probe points in 𝔞⁻: integer combinations of the split basis with
/// coefficients bounded by the folded points' own coordinates plus `pad`.
pub fn split_lattice_probes(
    datum: &RootDatum,
    theta: &InvolutionSpec,
    folded: &BTreeMap<usize, Vec<Rat>>,
    pad: i128,
) -> Result<Vec<Vec<Rat>>, OrthoError> {
    let q = theta.split_rank();
    if q == 0 {
        return Ok(vec![vec![Rat::zero(); datum.dim()]]);
    }
    let basis: Vec<Vec<Rat>> = theta
        .split_basis()
        .iter()
        .map(|v| v.iter().map(|&c| rat(c)).collect())
        .collect();
    let mut radius = pad;
    for p in folded.values() {
        let coords = split_coords(&basis, p).ok_or(OrthoError::ProbeOutsideSpan)?;
        for c in coords {
            let bound = c.abs().ceil().to_integer();
            radius = radius.max(bound + pad);
        }
    }
    let mut probes = Vec::new();
    let mut counter = vec![-radius; q];
    loop {
        let mut point = vec![Rat::zero(); datum.dim()];
        for (t, b) in counter.iter().zip(&basis) {
            for (x, bc) in point.iter_mut().zip(b) {
                *x += rat(*t) * bc;
            }
        }
        probes.push(point);
        let mut k = 0;
        loop {
            if k == q {
                return Ok(probes);
            }
            counter[k] += 1;
            if counter[k] <= radius {
                break;
            }
            counter[k] = -radius;
            k += 1;
        }
    }
}

fn split_coords(basis: &[Vec<Rat>], v: &[Rat]) -> Option<Vec<Rat>> {
    let dim = v.len();
    let a: Vec<Vec<Rat>> = (0..dim)
        .map(|r| basis.iter().map(|b| b[r].clone()).collect())
        .collect();
    solve_unique(&a, v)
}

/// Probe the trace of the full hull against the folded hull on a lattice
/// grid in 𝔞⁻ and report any disagreement.
pub fn compare_hulls_on_split_probes(
    datum: &RootDatum,
    theta: &InvolutionSpec,
    points: &[Vec<Rat>],
    pad: i128,
) -> Result<HullComparison, OrthoError> {
    let folded = minus_set(datum, theta, points)?;
    let probes = split_lattice_probes(datum, theta, &folded, pad)?;
    let mut mismatches = Vec::new();
    for x in &probes {
        let full = hull_member_cone(datum, points, x)?;
        let restricted = restricted_hull_member(datum, theta, &folded, x)?;
        if full != restricted {
            mismatches.push(x.clone());
        }
    }
    Ok(HullComparison { probes: probes.len(), mismatches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;
    use crate::rootdata::standard::*;

    fn v(coords: &[i64]) -> Vec<Rat> {
        vec_rat(coords)
    }

    #[test]
    fn orbit_set_is_positive_and_special() {
        let d = a2();
        let set = orbit_set(&d, &v(&[1, 0, -1])).unwrap();
        let report = validate(&d, &set).unwrap();
        assert!(report.positive);
        assert!(report.special);
        // Wall coefficient at the standard chamber's first wall is 1.
        assert_eq!(report.wall_coeffs[0][0], rat(1));
    }

    #[test]
    fn non_orthogonal_family_is_rejected() {
        let d = gl(2);
        let points = vec![v(&[2, 0]), v(&[0, 1])];
        assert_eq!(
            validate(&d, &points).unwrap_err(),
            OrthoError::NotOrthogonal { chamber: 0, wall: 0 }
        );
    }

    #[test]
    fn gl2_hull_cone_and_vertex_agree_on_named_points() {
        let d = gl(2);
        let set = orbit_set(&d, &v(&[2, 0])).unwrap();
        for (probe, expect) in [
            (v(&[1, 1]), true),
            (v(&[2, 0]), true),
            (v(&[0, 2]), true),
            (vec![ratio(1, 2), ratio(3, 2)], true),
            (v(&[3, -1]), false),
            (v(&[1, 0]), false), // off the affine line of the orbit
        ] {
            assert_eq!(hull_member_cone(&d, &set, &probe).unwrap(), expect, "{probe:?}");
            assert_eq!(hull_member_vertex(&d, &set, &probe).unwrap(), expect, "{probe:?}");
        }
    }

    #[test]
    fn b2_hull_routes_agree_on_a_grid() {
        let d = b2();
        let set = orbit_set(&d, &v(&[2, 1])).unwrap();
        for x in -3..=3i64 {
            for y in -3..=3i64 {
                let probe = v(&[x, y]);
                assert_eq!(
                    hull_member_cone(&d, &set, &probe).unwrap(),
                    hull_member_vertex(&d, &set, &probe).unwrap(),
                    "({x},{y})"
                );
            }
        }
        assert!(hull_member_cone(&d, &set, &v(&[0, 0])).unwrap());
        assert!(!hull_member_cone(&d, &set, &v(&[2, 2])).unwrap());
    }

    #[test]
    fn cone_route_rejects_non_positive_sets() {
        let d = gl(2);
        // Reflected orbit: x_B on the wrong side — orthogonal but negative.
        let set = vec![v(&[0, 2]), v(&[2, 0])];
        let report = validate(&d, &set).unwrap();
        assert!(!report.positive);
        assert_eq!(hull_member_cone(&d, &set, &v(&[1, 1])).unwrap_err(), OrthoError::NotPositive);
        // The dispatching wrapper falls back to the vertex search.
        let verdict = hull_member(&d, &set, &v(&[1, 1])).unwrap();
        assert_eq!(verdict.route, HullRoute::VertexSimplex);
        assert!(verdict.inside);
    }

    #[test]
    fn star_membership_filters_lattice_and_class() {
        let d = gl(2);
        let set = orbit_set(&d, &v(&[2, 0])).unwrap();
        assert!(star_hull_member(&d, &set, &v(&[1, 1])).unwrap());
        assert!(star_hull_member(&d, &set, &v(&[2, 0])).unwrap());
        assert!(!star_hull_member(&d, &set, &v(&[1, 0])).unwrap()); // wrong class
        assert!(!star_hull_member(&d, &set, &v(&[3, -1])).unwrap()); // outside hull
        assert!(!star_hull_member(&d, &set, &[ratio(1, 2), ratio(3, 2)]).unwrap()); // not lattice
    }

    #[test]
    fn minus_set_under_theta_minus_one_is_identity() {
        let d = gl(2);
        let theta = theta_minus_one(&d);
        let set = orbit_set(&d, &v(&[3, 1])).unwrap();
        let folded = minus_set(&d, &theta, &set).unwrap();
        assert_eq!(folded.len(), d.weyl_order());
        for (c, p) in &folded {
            assert_eq!(*p, set[*c]);
        }
        let report = validate_restricted(&d, &theta, &folded).unwrap();
        assert!(report.positive);
    }

    #[test]
    fn a1xa1_swap_minus_set_folds_to_split_line() {
        let d = a1_x_a1();
        let theta = theta_swap_two(&d);
        let set = orbit_set(&d, &v(&[3, 1])).unwrap();
        let folded = minus_set(&d, &theta, &set).unwrap();
        assert_eq!(folded.len(), 2);
        let pts: BTreeSet<Vec<Rat>> = folded.values().cloned().collect();
        let expect: BTreeSet<Vec<Rat>> = [v(&[1, -1]), v(&[-1, 1])].into_iter().collect();
        assert_eq!(pts, expect);
        let report = validate_restricted(&d, &theta, &folded).unwrap();
        assert!(report.positive);
        assert_eq!(report.wall_coeffs.len(), 1);
    }

    #[test]
    fn a1xa1_swap_hulls_agree_on_probes() {
        let d = a1_x_a1();
        let theta = theta_swap_two(&d);
        let set = orbit_set(&d, &v(&[3, 1])).unwrap();
        let cmp = compare_hulls_on_split_probes(&d, &theta, &set, 2).unwrap();
        assert!(cmp.agree(), "mismatches at {:?}", cmp.mismatches);
        assert!(cmp.probes >= 7);
    }

    #[test]
    fn gl2_swap_minus_set_errors_on_moving_center() {
        let d = gl(2);
        let theta = theta_swap_two(&d);
        let set = orbit_set(&d, &v(&[2, 0])).unwrap();
        let err = minus_set(&d, &theta, &set).unwrap_err();
        assert!(matches!(err, OrthoError::Rootdata(RootDatumError::RaysNotPermuted(_))));
    }

    #[test]
    fn shifted_sets_stay_orthogonal() {
        let d = b2();
        let set = orbit_set(&d, &v(&[2, 1])).unwrap();
        let shifted = shift_set(&set, &v(&[0, 0]));
        assert_eq!(shifted, set);
        let report = validate(&d, &shift_set(&set, &v(&[5, 7]))).unwrap();
        assert!(report.positive);
        assert!(!report.special);
    }

    #[test]
    fn sum_of_orbits_is_orthogonal_and_positive() {
        let d = b2();
        let set = sum_of_orbit_sets(&d, &[v(&[2, 1]), v(&[1, 0]), v(&[1, 1])]).unwrap();
        let report = validate(&d, &set).unwrap();
        assert!(report.positive);
        assert!(report.special);
        // Vertex route agrees with the cone route on a small grid.
        for x in -5..=5i64 {
            for y in -5..=5i64 {
                let probe = v(&[x, y]);
                assert_eq!(
                    hull_member_cone(&d, &set, &probe).unwrap(),
                    hull_member_vertex(&d, &set, &probe).unwrap(),
                );
            }
        }
    }
}
