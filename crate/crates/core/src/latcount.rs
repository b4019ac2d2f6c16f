//! Exact lattice-point counts inside hulls of orthogonal sets.
//!
//! The countable region is the convex hull of a positive orthogonal set,
//! intersected with an affine slice `anchor + coset + L` where `L` is a
//! finite-index sublattice of a declared ambient lattice. Enumeration runs
//! over an integer box in slice coordinates derived from the hull's vertex
//! bounding box, so it terminates unconditionally; each candidate is passed
//! through the exact wall-formulation membership test.
//!
//! [`polynomiality_check`] stresses the count of a family of hulls whose
//! vertices move affinely with an integer dilation parameter: the counts
//! are interpolated by forward differences in the binomial-coefficient
//! basis (integer coordinates by construction) and the fit is verified
//! exactly on the remaining window and on held-out nodes.

use num_traits::{One, Signed, Zero};
use std::ops::RangeInclusive;
use thiserror::Error;

use crate::exact::{mat_inverse, rat, vec_add, vec_rat, vec_scale, Rat};
use crate::orthoset::{self, OrthoError};
use crate::rootdata::{RootDatum, RootDatumError};

#[derive(Debug, Error, PartialEq)]
pub enum LatError {
    #[error(transparent)]
    Ortho(#[from] OrthoError),
    #[error(transparent)]
    Rootdata(#[from] RootDatumError),
    #[error("sublattice basis vectors are linearly dependent")]
    DependentBasis,
    #[error("sublattice basis vector is not an integer combination of the ambient basis")]
    BasisOutsideAmbient,
    #[error("slice is unbounded along {0:?}: the sublattice misses this ambient direction")]
    UnboundedDirection(Vec<i64>),
    #[error("coset representatives collide modulo the sublattice")]
    DuplicateCoset,
    #[error("anchor is not a lattice point")]
    AnchorNotLattice,
    #[error("window has fewer nodes than the requested degree needs")]
    WindowTooSmall,
    #[error("counts are not polynomial on the window: first failure at d = {first_failing}")]
    NonPolynomialWindow { first_failing: i64 },
    #[error("family vertex tables have mismatched shapes")]
    FamilyShapeMismatch,
}

/// Finite-index sublattice `L` of a declared ambient lattice, together with
/// the coset representatives whose translates make up the counting slice.
/// All vectors are in ambient coordinates and must lie in the root datum's
/// integer lattice.
#[derive(Debug, Clone)]
pub struct CountingLattice {
    ambient: Vec<Vec<i64>>,
    basis: Vec<Vec<i64>>,
    cosets: Vec<Vec<i64>>,
    index: u64,
}

impl CountingLattice {
    /// Validate the presentation: the basis must be independent, contained
    /// in the ambient lattice, and of full rank in it (finite index —
    /// otherwise some ambient direction carries infinitely many cosets and
    /// the slice degenerates). Cosets must be distinct modulo `L`.
    pub fn new(
        datum: &RootDatum,
        ambient: Vec<Vec<i64>>,
        basis: Vec<Vec<i64>>,
        cosets: Vec<Vec<i64>>,
    ) -> Result<Self, LatError> {
        for v in ambient.iter().chain(&basis).chain(&cosets) {
            datum
                .lattice_coords_int(&vec_rat(v))
                .map_err(|_| LatError::AnchorNotLattice)
                .and(Ok(()))?;
        }
        if !basis.is_empty() {
            let cols: Vec<Vec<i128>> = (0..basis[0].len())
                .map(|r| basis.iter().map(|b| b[r] as i128).collect())
                .collect();
            if !crate::exact::integer_kernel(&cols).is_empty() {
                return Err(LatError::DependentBasis);
            }
        }
        // Each basis vector must be an integer combination of the ambient
        // basis; the coefficient matrix yields the index.
        let mut coeff_rows: Vec<Vec<Rat>> = Vec::new();
        for b in &basis {
            let c = in_rational_span(&ambient, b).ok_or(LatError::BasisOutsideAmbient)?;
            if c.iter().any(|x| !x.is_integer()) {
                return Err(LatError::BasisOutsideAmbient);
            }
            coeff_rows.push(c);
        }
        // Full rank in the ambient: every ambient vector must be a rational
        // combination of the basis.
        for a in &ambient {
            if in_rational_span(&basis, a).is_none() {
                return Err(LatError::UnboundedDirection(a.clone()));
            }
        }
        let index = if basis.is_empty() {
            1
        } else {
            let det = det_exact(&coeff_rows);
            det.abs().to_integer() as u64
        };
        let lat = CountingLattice { ambient, basis, cosets, index };
        for i in 0..lat.cosets.len() {
            for j in i + 1..lat.cosets.len() {
                let diff: Vec<i64> = lat.cosets[i]
                    .iter()
                    .zip(&lat.cosets[j])
                    .map(|(a, b)| a - b)
                    .collect();
                if lat.contains(&diff) {
                    return Err(LatError::DuplicateCoset);
                }
            }
        }
        Ok(lat)
    }

    /// Index of `L` in the ambient lattice (`|det|` of the basis in ambient
    /// coordinates).
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    /// How many translates of `L` the slice stacks on the anchor.
    pub fn slice_classes(&self) -> usize {
        self.cosets.len().max(1)
    }

    /// Is the integer vector in `L`?
    pub fn contains(&self, v: &[i64]) -> bool {
        match in_rational_span(&self.basis, v) {
            Some(c) => c.iter().all(|x| x.is_integer()),
            None => v.iter().all(|&x| x == 0),
        }
    }

    fn coset_offsets(&self) -> Vec<Vec<Rat>> {
        if self.cosets.is_empty() {
            vec![vec![Rat::zero(); self.dim()]]
        } else {
            self.cosets.iter().map(|c| vec_rat(c)).collect()
        }
    }

    fn dim(&self) -> usize {
        self.ambient
            .first()
            .or(self.basis.first())
            .map_or(0, |v| v.len())
    }
}

/// Solve `target = Σ cᵢ gens[i]` over the rationals.
fn in_rational_span(gens: &[Vec<i64>], target: &[i64]) -> Option<Vec<Rat>> {
    if gens.is_empty() {
        return if target.iter().all(|&x| x == 0) { Some(Vec::new()) } else { None };
    }
    let dim = target.len();
    let a: Vec<Vec<Rat>> = (0..dim)
        .map(|r| gens.iter().map(|g| rat(g[r] as i128)).collect())
        .collect();
    let b: Vec<Rat> = target.iter().map(|&x| rat(x as i128)).collect();
    crate::exact::solve_unique(&a, &b)
}

fn det_exact(m: &[Vec<Rat>]) -> Rat {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = Rat::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&i| !a[i][col].is_zero()) else {
            return Rat::zero();
        };
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
    det
}

/// Where the counting slice is pinned.
#[derive(Debug, Clone)]
pub enum StarAnchor {
    /// Through the set's first vertex (it must be a lattice point). For
    /// families this follows the moving vertex.
    FirstVertex,
    /// Through an explicit lattice point.
    At(Vec<Rat>),
}

fn resolve_anchor(
    datum: &RootDatum,
    points: &[Vec<Rat>],
    anchor: &StarAnchor,
) -> Result<Vec<Rat>, LatError> {
    let a = match anchor {
        StarAnchor::FirstVertex => points[0].clone(),
        StarAnchor::At(v) => v.clone(),
    };
    datum.lattice_coords_int(&a).map_err(|_| LatError::AnchorNotLattice)?;
    Ok(a)
}

/// Exact number of slice points inside the hull of a positive orthogonal
/// set.
pub fn count_points(
    datum: &RootDatum,
    points: &[Vec<Rat>],
    lat: &CountingLattice,
    anchor: &StarAnchor,
) -> Result<u64, LatError> {
    count_points_jobs(datum, points, lat, anchor, 1)
}

/// Slab-parallel version: the enumeration box is cut along its first axis
/// into per-thread slabs whose partial counts are summed.
pub fn count_points_jobs(
    datum: &RootDatum,
    points: &[Vec<Rat>],
    lat: &CountingLattice,
    anchor: &StarAnchor,
    jobs: usize,
) -> Result<u64, LatError> {
    let report = orthoset::validate(datum, points)?;
    if !report.positive {
        return Err(OrthoError::NotPositive.into());
    }
    let anchor = resolve_anchor(datum, points, anchor)?;
    let dim = datum.dim();
    let basis_rat: Vec<Vec<Rat>> = lat.basis.iter().map(|b| vec_rat(b)).collect();
    let mut total = 0u64;
    for coset in lat.coset_offsets() {
        let base = vec_add(&anchor, &coset);
        let Some(ranges) = slice_coordinate_ranges(points, &basis_rat, &base, dim) else {
            continue;
        };
        total += enumerate_box(datum, points, &basis_rat, &base, &ranges, jobs);
    }
    Ok(total)
}

/// Integer ranges for the slice coordinates `k` with
/// `base + Σ kᵢ bᵢ ∈ [vertex bounding box]`; `None` when some range is
/// empty. Bounds come from extremizing the Gram-pseudo-inverse functionals
/// over the box corners.
pub(crate) fn slice_coordinate_ranges(
    points: &[Vec<Rat>],
    basis: &[Vec<Rat>],
    base: &[Rat],
    dim: usize,
) -> Option<Vec<RangeInclusive<i64>>> {
    let r = basis.len();
    if r == 0 {
        return Some(Vec::new());
    }
    // Hull ⊆ per-coordinate vertex box.
    let lo: Vec<Rat> = (0..dim)
        .map(|j| points.iter().map(|p| p[j].clone()).min().unwrap())
        .collect();
    let hi: Vec<Rat> = (0..dim)
        .map(|j| points.iter().map(|p| p[j].clone()).max().unwrap())
        .collect();
    // P = (BᵀB)⁻¹ Bᵀ recovers slice coordinates from ambient ones.
    let gram: Vec<Vec<Rat>> = (0..r)
        .map(|i| {
            (0..r)
                .map(|j| (0..dim).map(|d| &basis[i][d] * &basis[j][d]).sum())
                .collect()
        })
        .collect();
    let gram_inv = mat_inverse(&gram).expect("independent basis has invertible Gram matrix");
    let p_rows: Vec<Vec<Rat>> = (0..r)
        .map(|i| {
            (0..dim)
                .map(|d| (0..r).map(|j| &gram_inv[i][j] * &basis[j][d]).sum())
                .collect()
        })
        .collect();
    let mut ranges = Vec::with_capacity(r);
    for row in &p_rows {
        let mut min: Option<Rat> = None;
        let mut max: Option<Rat> = None;
        for corner in 0..(1usize << dim) {
            let val: Rat = (0..dim)
                .map(|j| {
                    let c = if corner & (1 << j) == 0 { &lo[j] } else { &hi[j] };
                    &row[j] * &(c - &base[j])
                })
                .sum();
            if min.as_ref().is_none_or(|m| val < *m) {
                min = Some(val.clone());
            }
            if max.as_ref().is_none_or(|m| val > *m) {
                max = Some(val);
            }
        }
        let klo = min.unwrap().ceil().to_integer() as i64;
        let khi = max.unwrap().floor().to_integer() as i64;
        if klo > khi {
            return None;
        }
        ranges.push(klo..=khi);
    }
    Some(ranges)
}

fn enumerate_box(
    datum: &RootDatum,
    points: &[Vec<Rat>],
    basis: &[Vec<Rat>],
    base: &[Rat],
    ranges: &[RangeInclusive<i64>],
    jobs: usize,
) -> u64 {
    if ranges.is_empty() {
        return u64::from(orthoset::cone_member_prevalidated(datum, points, base));
    }
    let first = ranges[0].clone();
    if jobs <= 1 || first.clone().count() < 2 * jobs {
        return first
            .map(|k0| count_slab(datum, points, basis, base, ranges, k0))
            .sum();
    }
    let slots: Vec<i64> = first.collect();
    let chunk = slots.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = slots
            .chunks(chunk)
            .map(|slab| {
                scope.spawn(move || {
                    slab.iter()
                        .map(|&k0| count_slab(datum, points, basis, base, ranges, k0))
                        .sum::<u64>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("slab thread")).sum()
    })
}

/// Count within the slab `k₀ = fixed`, iterating the remaining axes with an
/// odometer.
fn count_slab(
    datum: &RootDatum,
    points: &[Vec<Rat>],
    basis: &[Vec<Rat>],
    base: &[Rat],
    ranges: &[RangeInclusive<i64>],
    k0: i64,
) -> u64 {
    let rest = &ranges[1..];
    let mut k: Vec<i64> = rest.iter().map(|r| *r.start()).collect();
    let mut count = 0u64;
    loop {
        let mut x = base.to_vec();
        x = vec_add(&x, &vec_scale(&rat(k0 as i128), &basis[0]));
        for (i, &ki) in k.iter().enumerate() {
            x = vec_add(&x, &vec_scale(&rat(ki as i128), &basis[i + 1]));
        }
        if orthoset::cone_member_prevalidated(datum, points, &x) {
            count += 1;
        }
        // Advance the odometer.
        let mut axis = 0;
        loop {
            if axis == k.len() {
                return count;
            }
            k[axis] += 1;
            if k[axis] <= *rest[axis].end() {
                break;
            }
            k[axis] = *rest[axis].start();
            axis += 1;
        }
    }
}

/// Vertices moving affinely with an integer dilation parameter:
/// `x_B(d) = base_B + d · slope_B`.
#[derive(Debug, Clone)]
pub struct AffineFamily {
    pub base: Vec<Vec<Rat>>,
    pub slope: Vec<Vec<Rat>>,
}

impl AffineFamily {
    pub fn dilation(slope: Vec<Vec<Rat>>) -> Self {
        let dim = slope.first().map_or(0, |v| v.len());
        AffineFamily { base: vec![vec![Rat::zero(); dim]; slope.len()], slope }
    }

    pub fn at(&self, d: i64) -> Result<Vec<Vec<Rat>>, LatError> {
        if self.base.len() != self.slope.len()
            || self.base.iter().zip(&self.slope).any(|(b, s)| b.len() != s.len())
        {
            return Err(LatError::FamilyShapeMismatch);
        }
        let t = rat(d as i128);
        Ok(self
            .base
            .iter()
            .zip(&self.slope)
            .map(|(b, s)| vec_add(b, &vec_scale(&t, s)))
            .collect())
    }
}

/// Exact interpolation of the counts, stored as forward differences at the
/// window start — the coordinates in the binomial-coefficient basis, which
/// are integers for integer-valued data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyFit {
    pub start: i64,
    pub diffs: Vec<i128>,
    pub degree: usize,
    pub counts: Vec<(i64, u64)>,
    /// Nodes (window tail and held-out) on which the fit was verified.
    pub checked: Vec<i64>,
}

impl PolyFit {
    /// Evaluate via `Σⱼ diffs[j] · C(d − start, j)` — exact, integer.
    pub fn eval(&self, d: i64) -> i128 {
        let t = (d - self.start) as i128;
        let mut value = 0i128;
        let mut binom = Rat::one();
        for (j, c) in self.diffs.iter().enumerate() {
            if j > 0 {
                binom = binom * rat(t - (j as i128 - 1)) / rat(j as i128);
            }
            debug_assert!(binom.is_integer());
            value += c * binom.to_integer();
        }
        value
    }
}

/// Newton forward-difference interpolation through `values` at consecutive
/// integer nodes starting at `start`. The degree is read off the last
/// nonvanishing difference.
pub(crate) fn newton_fit(start: i64, values: &[i128]) -> PolyFit {
    let n = values.len();
    let mut table = values.to_vec();
    let mut diffs = Vec::with_capacity(n);
    for level in 0..n {
        diffs.push(table[0]);
        for i in 0..n - 1 - level {
            table[i] = table[i + 1] - table[i];
        }
        table.truncate(n - 1 - level);
    }
    let degree = diffs.iter().rposition(|&c| c != 0).unwrap_or(0);
    PolyFit { start, diffs, degree, counts: Vec::new(), checked: Vec::new() }
}

/// Fit the counts of the family on a contiguous window with a polynomial of
/// degree at most `max_degree`, then verify the fit exactly on the rest of
/// the window and on the held-out nodes. The first node where the data
/// leaves the polynomial is reported in the error.
pub fn polynomiality_check(
    datum: &RootDatum,
    family: &AffineFamily,
    lat: &CountingLattice,
    anchor: &StarAnchor,
    window: RangeInclusive<i64>,
    holdout: &[i64],
    max_degree: usize,
) -> Result<PolyFit, LatError> {
    let nodes: Vec<i64> = window.collect();
    if nodes.len() < max_degree + 1 {
        return Err(LatError::WindowTooSmall);
    }
    let counts: Vec<(i64, u64)> = nodes
        .iter()
        .map(|&d| Ok((d, count_points(datum, &family.at(d)?, lat, anchor)?)))
        .collect::<Result<_, LatError>>()?;
    let values: Vec<i128> = counts[..max_degree + 1].iter().map(|&(_, c)| c as i128).collect();
    let mut fit = newton_fit(nodes[0], &values);
    fit.counts = counts.clone();
    let mut checked = Vec::new();
    for &(d, c) in &counts[max_degree + 1..] {
        if fit.eval(d) != c as i128 {
            return Err(LatError::NonPolynomialWindow { first_failing: d });
        }
        checked.push(d);
    }
    for &d in holdout {
        let c = count_points(datum, &family.at(d)?, lat, anchor)?;
        if fit.eval(d) != c as i128 {
            return Err(LatError::NonPolynomialWindow { first_failing: d });
        }
        checked.push(d);
    }
    Ok(PolyFit { checked, ..fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthoset::orbit_set;
    use crate::rootdata::standard;

    fn even_sum_lattice(datum: &RootDatum) -> CountingLattice {
        CountingLattice::new(
            datum,
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![1, 1], vec![1, -1]],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn segment_counts_over_sublattices() {
        let datum = standard::a1();
        let set = orbit_set(&datum, &[rat(4)]).unwrap();
        let two_z = CountingLattice::new(&datum, vec![vec![1]], vec![vec![2]], vec![]).unwrap();
        assert_eq!(two_z.index(), 2);
        let origin = StarAnchor::At(vec![rat(0)]);
        assert_eq!(count_points(&datum, &set, &two_z, &origin).unwrap(), 5);
        let z = CountingLattice::new(&datum, vec![vec![1]], vec![vec![1]], vec![]).unwrap();
        assert_eq!(count_points(&datum, &set, &z, &origin).unwrap(), 9);
        // Odd slice of [−4, 4].
        let odd = StarAnchor::At(vec![rat(1)]);
        assert_eq!(count_points(&datum, &set, &two_z, &odd).unwrap(), 4);
    }

    #[test]
    fn single_point_hull_counts_one() {
        let datum = standard::a1();
        let set = orbit_set(&datum, &[rat(0)]).unwrap();
        let two_z = CountingLattice::new(&datum, vec![vec![1]], vec![vec![2]], vec![]).unwrap();
        assert_eq!(
            count_points(&datum, &set, &two_z, &StarAnchor::At(vec![rat(0)])).unwrap(),
            1
        );
    }

    #[test]
    fn gl2_even_sum_slice_counts_three() {
        let datum = standard::gl(2);
        let set = orbit_set(&datum, &[rat(2), rat(0)]).unwrap();
        let lat = even_sum_lattice(&datum);
        assert_eq!(lat.index(), 2);
        assert_eq!(
            count_points(&datum, &set, &lat, &StarAnchor::FirstVertex).unwrap(),
            3
        );
    }

    #[test]
    fn presentation_validation_errors() {
        let datum = standard::gl(2);
        let ambient = vec![vec![1, 0], vec![0, 1]];
        assert_eq!(
            CountingLattice::new(
                &datum,
                ambient.clone(),
                vec![vec![1, 1], vec![2, 2]],
                vec![]
            )
            .unwrap_err(),
            LatError::DependentBasis
        );
        assert_eq!(
            CountingLattice::new(&datum, ambient.clone(), vec![vec![1, 1]], vec![]).unwrap_err(),
            LatError::UnboundedDirection(vec![1, 0])
        );
        assert_eq!(
            CountingLattice::new(
                &datum,
                vec![vec![2, 0], vec![0, 2]],
                vec![vec![1, 1], vec![1, -1]],
                vec![]
            )
            .unwrap_err(),
            LatError::BasisOutsideAmbient
        );
        assert_eq!(
            CountingLattice::new(
                &datum,
                ambient,
                vec![vec![1, 1], vec![1, -1]],
                vec![vec![0, 0], vec![1, 1]]
            )
            .unwrap_err(),
            LatError::DuplicateCoset
        );
    }

    #[test]
    fn anchor_must_be_a_lattice_point() {
        let datum = standard::a1();
        let set = orbit_set(&datum, &[rat(2)]).unwrap();
        let z = CountingLattice::new(&datum, vec![vec![1]], vec![vec![1]], vec![]).unwrap();
        let half = StarAnchor::At(vec![crate::exact::ratio(1, 2)]);
        assert_eq!(
            count_points(&datum, &set, &z, &half).unwrap_err(),
            LatError::AnchorNotLattice
        );
    }

    #[test]
    fn nonpositive_sets_are_rejected() {
        let datum = standard::a1();
        // x(+) = −1, x(−) = 1: wall coefficient negative.
        let set = vec![vec![rat(-1)], vec![rat(1)]];
        let z = CountingLattice::new(&datum, vec![vec![1]], vec![vec![1]], vec![]).unwrap();
        assert_eq!(
            count_points(&datum, &set, &z, &StarAnchor::At(vec![rat(0)])).unwrap_err(),
            LatError::Ortho(OrthoError::NotPositive)
        );
    }

    #[test]
    fn count_is_monotone_under_hull_inclusion() {
        let datum = standard::a1();
        let small = orbit_set(&datum, &[rat(2)]).unwrap();
        let large = orbit_set(&datum, &[rat(4)]).unwrap();
        let two_z = CountingLattice::new(&datum, vec![vec![1]], vec![vec![2]], vec![]).unwrap();
        let origin = StarAnchor::At(vec![rat(0)]);
        let a = count_points(&datum, &small, &two_z, &origin).unwrap();
        let b = count_points(&datum, &large, &two_z, &origin).unwrap();
        assert!(a <= b);
        assert_eq!((a, b), (3, 5));
    }

    #[test]
    fn cosets_partition_the_full_lattice_count() {
        let datum = standard::a1_x_a1();
        let set = orbit_set(&datum, &[rat(2), rat(1)]).unwrap();
        let origin = StarAnchor::At(vec![rat(0), rat(0)]);
        let full = CountingLattice::new(
            &datum,
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![1, 0], vec![0, 1]],
            vec![],
        )
        .unwrap();
        let whole = count_points(&datum, &set, &full, &origin).unwrap();
        assert_eq!(whole, 15);
        let even = CountingLattice::new(
            &datum,
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![1, 1], vec![1, -1]],
            vec![],
        )
        .unwrap();
        let even_part = count_points(&datum, &set, &even, &origin).unwrap();
        let odd_part =
            count_points(&datum, &set, &even, &StarAnchor::At(vec![rat(1), rat(0)])).unwrap();
        assert_eq!(even_part, 7);
        assert_eq!(even_part + odd_part, whole);
        // Same partition expressed through declared cosets.
        let both = CountingLattice::new(
            &datum,
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![1, 1], vec![1, -1]],
            vec![vec![0, 0], vec![1, 0]],
        )
        .unwrap();
        assert_eq!(count_points(&datum, &set, &both, &origin).unwrap(), whole);
    }

    #[test]
    fn reflection_symmetry() {
        let datum = standard::a1();
        // Hull [−1, 3] and its reflection [−3, 1].
        let set = vec![vec![rat(3)], vec![rat(-1)]];
        let neg = vec![vec![rat(1)], vec![rat(-3)]];
        let two_z = CountingLattice::new(&datum, vec![vec![1]], vec![vec![2]], vec![]).unwrap();
        let origin = StarAnchor::At(vec![rat(0)]);
        assert_eq!(
            count_points(&datum, &set, &two_z, &origin).unwrap(),
            count_points(&datum, &neg, &two_z, &origin).unwrap()
        );
        // Odd cosets map to negated odd cosets.
        let odd = CountingLattice::new(&datum, vec![vec![1]], vec![vec![2]], vec![vec![1]]).unwrap();
        let odd_neg =
            CountingLattice::new(&datum, vec![vec![1]], vec![vec![2]], vec![vec![-1]]).unwrap();
        assert_eq!(
            count_points(&datum, &set, &odd, &origin).unwrap(),
            count_points(&datum, &neg, &odd_neg, &origin).unwrap()
        );
        assert_eq!(count_points(&datum, &set, &odd, &origin).unwrap(), 3);
    }

    #[test]
    fn slab_parallel_count_matches_serial() {
        let datum = standard::b2();
        let set = orbit_set(&datum, &[rat(3), rat(2)]).unwrap();
        let full = CountingLattice::new(
            &datum,
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![1, 0], vec![0, 1]],
            vec![],
        )
        .unwrap();
        let origin = StarAnchor::At(vec![rat(0), rat(0)]);
        let serial = count_points(&datum, &set, &full, &origin).unwrap();
        let parallel = count_points_jobs(&datum, &set, &full, &origin, 3).unwrap();
        assert_eq!(serial, parallel);
        assert!(serial > 0);
    }

    #[test]
    fn dilated_segment_is_linear() {
        let datum = standard::a1();
        let family = AffineFamily {
            base: vec![vec![rat(0)], vec![rat(0)]],
            slope: vec![vec![rat(1)], vec![rat(-1)]],
        };
        let z = CountingLattice::new(&datum, vec![vec![1]], vec![vec![1]], vec![]).unwrap();
        let fit = polynomiality_check(
            &datum,
            &family,
            &z,
            &StarAnchor::At(vec![rat(0)]),
            0..=6,
            &[10],
            1,
        )
        .unwrap();
        assert_eq!(fit.degree, 1);
        assert_eq!(fit.eval(10), 21);
        assert_eq!(fit.counts[3], (3, 7));
        assert!(fit.checked.contains(&10));
    }

    #[test]
    fn dilated_square_is_quadratic() {
        let datum = standard::a1_x_a1();
        let family = AffineFamily::dilation(
            orbit_set(&datum, &[rat(1), rat(1)]).unwrap(),
        );
        let full = CountingLattice::new(
            &datum,
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![1, 0], vec![0, 1]],
            vec![],
        )
        .unwrap();
        let fit = polynomiality_check(
            &datum,
            &family,
            &full,
            &StarAnchor::At(vec![rat(0), rat(0)]),
            0..=5,
            &[7],
            2,
        )
        .unwrap();
        assert_eq!(fit.degree, 2);
        assert_eq!(fit.eval(7), 225);
    }

    #[test]
    fn dilated_weyl_hull_along_moving_slice_is_linear() {
        let datum = standard::gl(2);
        let family = AffineFamily::dilation(
            orbit_set(&datum, &[rat(1), rat(0)]).unwrap(),
        );
        let lat = even_sum_lattice(&datum);
        let fit = polynomiality_check(
            &datum,
            &family,
            &lat,
            &StarAnchor::FirstVertex,
            1..=8,
            &[12],
            1,
        )
        .unwrap();
        assert_eq!(fit.degree, 1);
        assert_eq!(fit.eval(12), 13);
        // Counts are d+1: the moving slice keeps every hull lattice point.
        assert!(fit.counts.iter().all(|&(d, c)| c as i64 == d + 1));
    }

    #[test]
    fn fixed_anchor_breaks_polynomiality_with_first_failure_reported() {
        let datum = standard::gl(2);
        let family = AffineFamily::dilation(
            orbit_set(&datum, &[rat(1), rat(0)]).unwrap(),
        );
        let lat = even_sum_lattice(&datum);
        let err = polynomiality_check(
            &datum,
            &family,
            &lat,
            &StarAnchor::At(vec![rat(0), rat(0)]),
            0..=4,
            &[],
            2,
        )
        .unwrap_err();
        assert_eq!(err, LatError::NonPolynomialWindow { first_failing: 3 });
    }

    #[test]
    fn window_must_cover_the_degree() {
        let datum = standard::a1();
        let family = AffineFamily {
            base: vec![vec![rat(0)], vec![rat(0)]],
            slope: vec![vec![rat(1)], vec![rat(-1)]],
        };
        let z = CountingLattice::new(&datum, vec![vec![1]], vec![vec![1]], vec![]).unwrap();
        assert_eq!(
            polynomiality_check(
                &datum,
                &family,
                &z,
                &StarAnchor::At(vec![rat(0)]),
                0..=1,
                &[],
                2
            )
            .unwrap_err(),
            LatError::WindowTooSmall
        );
    }
}
