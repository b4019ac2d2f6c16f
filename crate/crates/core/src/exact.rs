//! Small exact linear algebra over `Ratio<i128>` and `i128`.
//!
//! Every routine here works on dimensions ≤ 8 with coordinate sizes far below
//! the `i128` overflow threshold (inputs are single-digit roots and coroots,
//! hull vertices, and valuation vectors). `Ratio` reduces after each
//! operation, so intermediate growth is bounded by the size of the exact
//! answers themselves.

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

pub type Rat = Ratio<i128>;

/// `n` as an exact rational.
pub fn rat(n: i128) -> Rat {
    Rat::from_integer(n)
}

/// `n/d` as an exact rational.
pub fn ratio(n: i128, d: i128) -> Rat {
    Rat::new(n, d)
}

pub fn vec_rat(v: &[i64]) -> Vec<Rat> {
    v.iter().map(|&x| rat(x as i128)).collect()
}

pub fn vec_add(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vec_sub(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_neg(a: &[Rat]) -> Vec<Rat> {
    a.iter().map(|x| -x).collect()
}

pub fn vec_scale(c: &Rat, a: &[Rat]) -> Vec<Rat> {
    a.iter().map(|x| c * x).collect()
}

/// Pairing of an integer functional (row) against a rational vector.
pub fn pair(f: &[i64], v: &[Rat]) -> Rat {
    f.iter()
        .zip(v)
        .map(|(&c, x)| rat(c as i128) * x)
        .sum()
}

pub fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Matrix–vector product, integer matrix acting on a rational vector.
pub fn mat_apply(m: &[Vec<i64>], v: &[Rat]) -> Vec<Rat> {
    m.iter().map(|row| pair(row, v)).collect()
}

pub fn mat_apply_i64(m: &[Vec<i64>], v: &[i64]) -> Vec<i64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum())
        .collect()
}

pub fn mat_mul_i64(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum())
                .collect()
        })
        .collect()
}

/// Product of two rational matrices.
pub fn mat_mul(a: &[Vec<Rat>], b: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|t| &a[i][t] * &b[t][j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(m: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let rows = m.len();
    let cols = m[0].len();
    (0..cols)
        .map(|j| (0..rows).map(|i| m[i][j].clone()).collect())
        .collect()
}

/// Row functional composed with an integer matrix: x ↦ f(Mx).
pub fn functional_compose(f: &[i64], m: &[Vec<i64>]) -> Vec<i64> {
    let cols = m[0].len();
    (0..cols)
        .map(|j| f.iter().zip(m).map(|(&c, row)| c * row[j]).sum())
        .collect()
}

pub fn identity_i64(n: usize) -> Vec<Vec<i64>> {
    (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect()
}

/// Solve `A x = b` exactly. Returns `None` when the system is inconsistent
/// or the solution is not unique (rank-deficient in the columns).
pub fn solve_unique(a: &[Vec<Rat>], b: &[Rat]) -> Option<Vec<Rat>> {
    let rows = a.len();
    if rows == 0 {
        return Some(Vec::new());
    }
    let cols = a[0].len();
    let mut m: Vec<Vec<Rat>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let mut pivot_rows = Vec::new();
    let mut r = 0usize;
    for c in 0..cols {
        let Some(pr) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, pr);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..=cols {
                    let s = &m[r][j] * &f;
                    m[i][j] -= s;
                }
            }
        }
        pivot_rows.push((r, c));
        r += 1;
        if r == rows {
            break;
        }
    }
    // Inconsistent if a zero row has nonzero rhs.
    for i in r..rows {
        if !m[i][cols].is_zero() {
            return None;
        }
    }
    if pivot_rows.len() < cols {
        return None; // underdetermined
    }
    let mut x = vec![Rat::zero(); cols];
    for &(pr, pc) in &pivot_rows {
        x[pc] = m[pr][cols].clone();
    }
    Some(x)
}

/// Exact inverse of a square rational matrix, `None` when singular.
pub fn mat_inverse(a: &[Vec<Rat>]) -> Option<Vec<Vec<Rat>>> {
    let n = a.len();
    let mut m: Vec<Vec<Rat>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            for j in 0..n {
                r.push(if i == j { Rat::one() } else { Rat::zero() });
            }
            r
        })
        .collect();
    for c in 0..n {
        let pr = (c..n).find(|&i| !m[i][c].is_zero())?;
        m.swap(c, pr);
        let inv = m[c][c].recip();
        for x in m[c].iter_mut() {
            *x *= &inv;
        }
        for i in 0..n {
            if i != c && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..2 * n {
                    let s = &m[c][j] * &f;
                    m[i][j] -= s;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Basis of the integer kernel `{x ∈ ℤⁿ : M x = 0}`. The result generates a
/// saturated sublattice (a kernel of an integer matrix always is one).
pub fn integer_kernel(m: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let rows = m.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = m[0].len();
    let snf = smith_normal_form(m);
    // M = U⁻¹ D V⁻¹ with U M V = D; columns of V beyond the rank span the kernel.
    let rank = (0..rows.min(cols)).filter(|&i| snf.d[i][i] != 0).count();
    (rank..cols)
        .map(|j| (0..cols).map(|i| snf.v[i][j]).collect())
        .collect()
}

pub struct Snf {
    /// Left transform, unimodular rows×rows.
    pub u: Vec<Vec<i128>>,
    /// Diagonalized matrix, rows×cols, `d[i][i]` are the elementary divisors.
    pub d: Vec<Vec<i128>>,
    /// Right transform, unimodular cols×cols. `u · m · v = d`.
    pub v: Vec<Vec<i128>>,
}

/// Smith normal form with transforms, by pivoting on the smallest nonzero
/// entry and clearing its row and column. Divisors come out nonnegative and
/// ordered by divisibility.
pub fn smith_normal_form(m: &[Vec<i128>]) -> Snf {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut d: Vec<Vec<i128>> = m.to_vec();
    let mut u: Vec<Vec<i128>> = (0..rows)
        .map(|i| (0..rows).map(|j| i128::from(i == j)).collect())
        .collect();
    let mut v: Vec<Vec<i128>> = (0..cols)
        .map(|i| (0..cols).map(|j| i128::from(i == j)).collect())
        .collect();

    let mut t = 0usize;
    while t < rows.min(cols) {
        // Find the smallest-magnitude nonzero entry in the trailing block.
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if d[i][j] != 0
                    && best.is_none_or(|(bi, bj)| d[i][j].abs() < d[bi][bj].abs())
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        d.swap(t, bi);
        u.swap(t, bi);
        for row in d.iter_mut() {
            row.swap(t, bj);
        }
        for row in v.iter_mut() {
            row.swap(t, bj);
        }
        // Reduce row and column against the pivot; repeat until clean.
        let mut dirty = true;
        while dirty {
            dirty = false;
            for i in t + 1..rows {
                if d[i][t] != 0 {
                    let q = d[i][t].div_euclid(d[t][t]);
                    if q != 0 {
                        for j in 0..cols {
                            d[i][j] -= q * d[t][j];
                        }
                        for j in 0..rows {
                            u[i][j] -= q * u[t][j];
                        }
                    }
                    if d[i][t] != 0 {
                        d.swap(t, i);
                        u.swap(t, i);
                        dirty = true;
                    }
                }
            }
            for j in t + 1..cols {
                if d[t][j] != 0 {
                    let q = d[t][j].div_euclid(d[t][t]);
                    if q != 0 {
                        for i in 0..rows {
                            d[i][j] -= q * d[i][t];
                        }
                        for i in 0..cols {
                            v[i][j] -= q * v[i][t];
                        }
                    }
                    if d[t][j] != 0 {
                        for row in d.iter_mut() {
                            row.swap(t, j);
                        }
                        for row in v.iter_mut() {
                            row.swap(t, j);
                        }
                        dirty = true;
                    }
                }
            }
        }
        t += 1;
    }
    // Sign-normalize and enforce the divisibility chain.
    for i in 0..rows.min(cols) {
        if d[i][i] < 0 {
            for j in 0..cols {
                d[i][j] = -d[i][j];
            }
            for j in 0..rows {
                u[i][j] = -u[i][j];
            }
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..rows.min(cols).saturating_sub(1) {
            let (a, b) = (d[i][i], d[i + 1][i + 1]);
            if a != 0 && b != 0 && b % a != 0 {
                // Fold d[i+1] into row/col i: add column i+1 to column i,
                // then re-clear with the Euclidean steps above.
                for r in 0..rows {
                    d[r][i] += d[r][i + 1];
                }
                for r in 0..cols {
                    v[r][i] += v[r][i + 1];
                }
                let sub = clear_pair(&mut d, &mut u, &mut v, i);
                debug_assert!(sub);
                changed = true;
            }
        }
    }
    Snf { u, d, v }
}

/// Re-diagonalize the 2×2 block at `(i..i+2, i..i+2)` after a fold; the rest
/// of the matrix is already diagonal. Returns true when it converged.
fn clear_pair(
    d: &mut [Vec<i128>],
    u: &mut [Vec<i128>],
    v: &mut [Vec<i128>],
    i: usize,
) -> bool {
    let rows = d.len();
    let cols = v.len();
    for _ in 0..256 {
        if d[i + 1][i] == 0 && d[i][i + 1] == 0 {
            if d[i][i] < 0 {
                for j in 0..cols {
                    d[i][j] = -d[i][j];
                }
                for j in 0..rows {
                    u[i][j] = -u[i][j];
                }
            }
            if d[i + 1][i + 1] < 0 {
                for j in 0..cols {
                    d[i + 1][j] = -d[i + 1][j];
                }
                for j in 0..rows {
                    u[i + 1][j] = -u[i + 1][j];
                }
            }
            return true;
        }
        if d[i][i] == 0 || (d[i + 1][i] != 0 && d[i + 1][i].abs() < d[i][i].abs()) {
            d.swap(i, i + 1);
            u.swap(i, i + 1);
        }
        if d[i + 1][i] != 0 {
            let q = d[i + 1][i].div_euclid(d[i][i]);
            for j in 0..cols {
                d[i + 1][j] -= q * d[i][j];
            }
            for j in 0..rows {
                u[i + 1][j] -= q * u[i][j];
            }
            if d[i + 1][i] != 0 {
                d.swap(i, i + 1);
                u.swap(i, i + 1);
            }
            continue;
        }
        if d[i][i + 1] != 0 {
            let q = d[i][i + 1].div_euclid(d[i][i]);
            for r in 0..rows {
                d[r][i + 1] -= q * d[r][i];
            }
            for r in 0..cols {
                v[r][i + 1] -= q * v[r][i];
            }
            if d[i][i + 1] != 0 {
                for row in d.iter_mut() {
                    row.swap(i, i + 1);
                }
                for row in v.iter_mut() {
                    row.swap(i, i + 1);
                }
            }
        }
    }
    false
}

/// Smallest integer `s` with `s² ≥ n` (n ≥ 0).
pub fn isqrt_ceil(n: i128) -> i128 {
    assert!(n >= 0);
    if n == 0 {
        return 0;
    }
    let mut s = (n as f64).sqrt() as i128;
    while s * s >= n {
        s -= 1;
    }
    while s * s < n {
        s += 1;
    }
    s
}

/// Tight rational upper bound for √q (q ≥ 0): ceil(√(num·den))/den.
pub fn sqrt_upper(q: &Rat) -> Rat {
    assert!(!q.is_negative());
    let (n, d) = (*q.numer(), *q.denom());
    Rat::new(isqrt_ceil(n * d), d)
}

/// Exact truth of √a ≤ √b + √c for nonnegative rationals.
pub fn sqrt_triangle_le(a: &Rat, b: &Rat, c: &Rat) -> bool {
    // √a ≤ √b + √c  ⟺  a ≤ b + c + 2√(bc)  ⟺  a − b − c ≤ 2√(bc).
    let lhs = a - b - c;
    if !lhs.is_positive() {
        return true;
    }
    &lhs * &lhs <= rat(4) * b * c
}

/// Scale a nonzero rational vector to a primitive integer vector with the
/// same direction.
pub fn primitive_direction(v: &[Rat]) -> Vec<i128> {
    use num_integer::Integer;
    let lcm = v
        .iter()
        .fold(1i128, |acc, x| acc.lcm(x.denom()));
    let ints: Vec<i128> = v
        .iter()
        .map(|x| x.numer() * (lcm / x.denom()))
        .collect();
    let g = ints.iter().fold(0i128, |acc, &x| acc.gcd(&x));
    assert!(g != 0, "zero vector has no primitive direction");
    ints.iter().map(|&x| x / g).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_unique_consistent_and_inconsistent() {
        let a = vec![
            vec![rat(1), rat(0)],
            vec![rat(0), rat(1)],
            vec![rat(1), rat(1)],
        ];
        let b = vec![rat(2), rat(3), rat(5)];
        assert_eq!(solve_unique(&a, &b), Some(vec![rat(2), rat(3)]));
        let b_bad = vec![rat(2), rat(3), rat(6)];
        assert_eq!(solve_unique(&a, &b_bad), None);
    }

    #[test]
    fn solve_unique_rejects_underdetermined() {
        let a = vec![vec![rat(1), rat(1)]];
        assert_eq!(solve_unique(&a, &[rat(2)]), None);
    }

    #[test]
    fn snf_transforms_multiply_back() {
        let m = vec![vec![2i128, 4, 4], vec![-6, 6, 12], vec![10, 4, 16]];
        let snf = smith_normal_form(&m);
        // u·m·v = d, divisibility chain, nonnegative divisors.
        let um: Vec<Vec<i128>> = (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| (0..3).map(|k| snf.u[i][k] * m[k][j]).sum())
                    .collect()
            })
            .collect();
        let umv: Vec<Vec<i128>> = (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| (0..3).map(|k| um[i][k] * snf.v[k][j]).sum())
                    .collect()
            })
            .collect();
        assert_eq!(umv, snf.d);
        let divs: Vec<i128> = (0..3).map(|i| snf.d[i][i]).collect();
        for w in divs.windows(2) {
            if w[0] != 0 && w[1] != 0 {
                assert_eq!(w[1] % w[0], 0);
            }
        }
        for (i, row) in snf.d.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(x, 0);
                }
            }
        }
    }

    #[test]
    fn integer_kernel_of_sum_functional() {
        let k = integer_kernel(&[vec![1, 1, 1]]);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert_eq!(v.iter().sum::<i128>(), 0);
        }
    }

    #[test]
    fn sqrt_bounds() {
        assert_eq!(isqrt_ceil(0), 0);
        assert_eq!(isqrt_ceil(1), 1);
        assert_eq!(isqrt_ceil(2), 2);
        assert_eq!(isqrt_ceil(4), 2);
        assert_eq!(isqrt_ceil(5), 3);
        let q = ratio(2, 1);
        let ub = sqrt_upper(&q);
        assert!(&ub * &ub >= q);
        // √8 ≤ √2 + √2 is exactly true (equality), √9 ≤ √2 + √2 is false.
        assert!(sqrt_triangle_le(&rat(8), &rat(2), &rat(2)));
        assert!(!sqrt_triangle_le(&rat(9), &rat(2), &rat(2)));
    }

    #[test]
    fn primitive_direction_clears_denominators() {
        let v = vec![ratio(1, 2), ratio(-3, 4), rat(0)];
        assert_eq!(primitive_direction(&v), vec![2, -3, 0]);
    }
}
