//! Smith normal form over the integers and classification of similitude
//! matrices into Cartan double cosets at a prime p.
//!
//! Matrices with p-power denominators are stored as an integer matrix plus a
//! denominator exponent, so every valuation below is computed exactly.  The
//! coset label is read off the similitude exponent and the valuations of the
//! gcds of m-by-m minors: the m-th Cartan exponent is the difference of
//! consecutive minor valuations.

use crate::error::{Error, Result};
use crate::root_data::Coweight;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;

// ---- Integer matrices ----

/// Dense integer matrix with arbitrary-precision entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMat {
    rows: usize,
    cols: usize,
    a: Vec<BigInt>,
}

impl IntMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMat {
            rows,
            cols,
            a: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::Dim("empty matrix".into()));
        }
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dim("ragged rows".into()));
        }
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                m.set(i, j, BigInt::from(x));
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.a[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.a[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> IntMat {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(j, i, self.get(i, j).clone());
            }
        }
        m
    }

    pub fn mul(&self, o: &IntMat) -> IntMat {
        assert_eq!(self.cols, o.rows, "shape mismatch in matrix product");
        let mut m = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let v = m.get(i, j) + aik * o.get(k, j);
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    pub fn scale(&self, c: &BigInt) -> IntMat {
        let mut m = self.clone();
        for v in &mut m.a {
            *v *= c;
        }
        m
    }

    pub fn diag(entries: &[BigInt]) -> IntMat {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, e) in entries.iter().enumerate() {
            m.set(i, i, e.clone());
        }
        m
    }

    /// Fraction-free Bareiss determinant.
    pub fn det(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut m: Vec<Vec<BigInt>> = (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j).clone()).collect())
            .collect();
        let mut sign = 1i32;
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m[k][k].is_zero() {
                let Some(r) = (k + 1..n).find(|&r| !m[r][k].is_zero()) else {
                    return BigInt::zero();
                };
                m.swap(k, r);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                    m[i][j] = num / &prev;
                }
            }
            prev = m[k][k].clone();
        }
        if sign < 0 {
            -m[n - 1][n - 1].clone()
        } else {
            m[n - 1][n - 1].clone()
        }
    }

    /// The standard alternating form, `[[0, I], [-I, 0]]`.
    pub fn standard_symplectic_form(n: usize) -> IntMat {
        let mut j = Self::zeros(2 * n, 2 * n);
        for i in 0..n {
            j.set(i, n + i, BigInt::one());
            j.set(n + i, i, -BigInt::one());
        }
        j
    }

    /// `t(self) * J * self = r * J` for some scalar r, returned if it exists.
    pub fn similitude_scalar(&self) -> Result<BigInt> {
        if self.rows != self.cols || self.rows % 2 != 0 {
            return Err(Error::Dim("similitude needs an even square matrix".into()));
        }
        let n = self.rows / 2;
        let j = Self::standard_symplectic_form(n);
        let s = self.transpose().mul(&j).mul(self);
        let r = s.get(0, n).clone();
        for i in 0..2 * n {
            for k in 0..2 * n {
                let expect = j.get(i, k) * &r;
                if *s.get(i, k) != expect {
                    return Err(Error::NotSimilitude(format!(
                        "entry ({i},{k}) of tM J M is {} but r*J needs {}",
                        s.get(i, k),
                        expect
                    )));
                }
            }
        }
        Ok(r)
    }
}

// ---- Valuations ----

/// p-adic valuation with an explicit value for the zero element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinity => None,
        }
    }
}

pub fn int_valuation(x: &BigInt, p: u64) -> Valuation {
    if x.is_zero() {
        return Valuation::Infinity;
    }
    let p = BigInt::from(p);
    let mut v = 0i64;
    let mut x = x.abs();
    loop {
        let (q, r) = x.div_rem(&p);
        if !r.is_zero() {
            return Valuation::Finite(v);
        }
        v += 1;
        x = q;
    }
}

/// Minimum p-adic valuation over all m-by-m minors of `mat`, offset by
/// `-(m as i64) * denom_exp` for a matrix scaled by `p^-denom_exp`.
///
/// Exits early once the floor `-m * denom_exp` is reached.
pub fn minor_valuation(mat: &IntMat, m: usize, p: u64, denom_exp: u32) -> Valuation {
    assert!(m >= 1 && m <= mat.rows().min(mat.cols()));
    let floor = -(m as i64) * denom_exp as i64;
    let rows_sel = subsets(mat.rows(), m);
    let cols_sel = subsets(mat.cols(), m);
    let mut best = Valuation::Infinity;
    for rs in &rows_sel {
        for cs in &cols_sel {
            let mut sub = IntMat::zeros(m, m);
            for (i, &r) in rs.iter().enumerate() {
                for (j, &c) in cs.iter().enumerate() {
                    sub.set(i, j, mat.get(r, c).clone());
                }
            }
            let d = sub.det();
            let v = match int_valuation(&d, p) {
                Valuation::Infinity => continue,
                Valuation::Finite(v) => v - (m as i64) * denom_exp as i64,
            };
            if best == Valuation::Infinity || Valuation::Finite(v) < best {
                best = Valuation::Finite(v);
                if v == floor {
                    return best;
                }
            }
        }
    }
    best
}

fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur = Vec::with_capacity(m);
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    rec(0, n, m, &mut cur, &mut out);
    out
}

// ---- Smith normal form ----

/// `a = u * d * v` with `u`, `v` unimodular and `d` diagonal with a
/// nonnegative divisibility chain `d1 | d2 | ...`.
#[derive(Clone, Debug)]
pub struct SnfDecomposition {
    pub u: IntMat,
    pub d: IntMat,
    pub v: IntMat,
}

impl SnfDecomposition {
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.d.rows()).map(|i| self.d.get(i, i).clone()).collect()
    }
}

pub fn smith_normal_form(a: &IntMat) -> Result<SnfDecomposition> {
    if a.rows() != a.cols() {
        return Err(Error::Dim("Smith normal form input must be square here".into()));
    }
    let n = a.rows();
    if a.det().is_zero() {
        return Err(Error::Singular);
    }
    let mut d = a.clone();
    let mut u = IntMat::identity(n);
    let mut v = IntMat::identity(n);

    // invariant maintained throughout: a == u * d * v
    for k in 0..n {
        loop {
            // move a minimal-magnitude nonzero entry of the trailing block to (k, k)
            let mut pivot: Option<(usize, usize)> = None;
            for i in k..n {
                for j in k..n {
                    if d.get(i, j).is_zero() {
                        continue;
                    }
                    match pivot {
                        None => pivot = Some((i, j)),
                        Some((pi, pj)) => {
                            if d.get(i, j).abs() < d.get(pi, pj).abs() {
                                pivot = Some((i, j));
                            }
                        }
                    }
                }
            }
            let (pi, pj) = pivot.expect("nonsingular matrix has a pivot in every block");
            if pi != k {
                swap_rows(&mut d, &mut u, k, pi);
            }
            if pj != k {
                swap_cols(&mut d, &mut v, k, pj);
            }

            // reduce column k and row k by the pivot
            let mut dirty = false;
            for i in k + 1..n {
                if d.get(i, k).is_zero() {
                    continue;
                }
                let q = div_nearest(d.get(i, k), d.get(k, k));
                if !q.is_zero() {
                    row_sub(&mut d, &mut u, i, k, &q);
                }
                if !d.get(i, k).is_zero() {
                    dirty = true;
                }
            }
            for j in k + 1..n {
                if d.get(k, j).is_zero() {
                    continue;
                }
                let q = div_nearest(d.get(k, j), d.get(k, k));
                if !q.is_zero() {
                    col_sub(&mut d, &mut v, j, k, &q);
                }
                if !d.get(k, j).is_zero() {
                    dirty = true;
                }
            }
            if dirty {
                continue; // remainders became new, smaller pivot candidates
            }

            // pivot must divide the whole trailing block for the chain property
            let mut fixed = true;
            'scan: for i in k + 1..n {
                for j in k + 1..n {
                    if !d.get(i, j).mod_floor(d.get(k, k)).is_zero() {
                        row_add(&mut d, &mut u, k, i);
                        fixed = false;
                        break 'scan;
                    }
                }
            }
            if fixed {
                break;
            }
        }
    }
    for i in 0..n {
        if d.get(i, i).is_negative() {
            negate_row(&mut d, &mut u, i);
        }
    }
    let snf = SnfDecomposition { u, d, v };
    debug_assert_eq!(snf.u.mul(&snf.d).mul(&snf.v), *a);
    debug_assert!(snf.u.det().abs().is_one() && snf.v.det().abs().is_one());
    Ok(snf)
}

fn div_nearest(a: &BigInt, b: &BigInt) -> BigInt {
    // quotient minimizing |a - q b|
    let (q, r) = a.div_rem(b);
    let two_r = BigInt::from(2) * r.abs();
    if two_r > b.abs() {
        if (a.is_negative()) ^ (b.is_negative()) {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

// Elementary operations on d, mirrored on u or v to keep a = u d v.

fn swap_rows(d: &mut IntMat, u: &mut IntMat, i: usize, j: usize) {
    let n = d.cols();
    for c in 0..n {
        let t = d.get(i, c).clone();
        d.set(i, c, d.get(j, c).clone());
        d.set(j, c, t);
    }
    for r in 0..u.rows() {
        let t = u.get(r, i).clone();
        u.set(r, i, u.get(r, j).clone());
        u.set(r, j, t);
    }
}

fn swap_cols(d: &mut IntMat, v: &mut IntMat, i: usize, j: usize) {
    for r in 0..d.rows() {
        let t = d.get(r, i).clone();
        d.set(r, i, d.get(r, j).clone());
        d.set(r, j, t);
    }
    let n = v.cols();
    for c in 0..n {
        let t = v.get(i, c).clone();
        v.set(i, c, v.get(j, c).clone());
        v.set(j, c, t);
    }
}

/// d_row_i -= q * d_row_j; u_col_j += q * u_col_i.
fn row_sub(d: &mut IntMat, u: &mut IntMat, i: usize, j: usize, q: &BigInt) {
    for c in 0..d.cols() {
        let vnew = d.get(i, c) - q * d.get(j, c);
        d.set(i, c, vnew);
    }
    for r in 0..u.rows() {
        let vnew = u.get(r, j) + q * u.get(r, i);
        u.set(r, j, vnew);
    }
}

/// d_col_j -= q * d_col_i; v_row_i += q * v_row_j.
fn col_sub(d: &mut IntMat, v: &mut IntMat, j: usize, i: usize, q: &BigInt) {
    for r in 0..d.rows() {
        let vnew = d.get(r, j) - q * d.get(r, i);
        d.set(r, j, vnew);
    }
    for c in 0..v.cols() {
        let vnew = v.get(i, c) + q * v.get(j, c);
        v.set(i, c, vnew);
    }
}

/// d_row_k += d_row_i; u_col_i -= u_col_k.
fn row_add(d: &mut IntMat, u: &mut IntMat, k: usize, i: usize) {
    for c in 0..d.cols() {
        let vnew = d.get(k, c) + d.get(i, c);
        d.set(k, c, vnew);
    }
    for r in 0..u.rows() {
        let vnew = u.get(r, i) - u.get(r, k);
        u.set(r, i, vnew);
    }
}

fn negate_row(d: &mut IntMat, u: &mut IntMat, i: usize) {
    for c in 0..d.cols() {
        let vnew = -d.get(i, c);
        d.set(i, c, vnew);
    }
    for r in 0..u.rows() {
        let vnew = -u.get(r, i);
        u.set(r, i, vnew);
    }
}

// ---- Coset classification ----

/// An integer matrix divided by `p^denom_exp`.
#[derive(Clone, Debug)]
pub struct PadicMat {
    pub num: IntMat,
    pub denom_exp: u32,
}

impl PadicMat {
    pub fn integral(num: IntMat) -> Self {
        PadicMat { num, denom_exp: 0 }
    }
}

/// Label of the integral Cartan double coset containing a similitude matrix:
/// the adjoint cocharacter class, the similitude exponent pinning the central
/// twist, and the full exponent tuple `(l0, l1, ..., ln)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosetLabel {
    pub lam: Coweight,
    pub r_exponent: i64,
    pub exponents: Vec<i64>,
}

/// Classify `g` into its Cartan double coset at `p`.
///
/// Requires the similitude scalar of the numerator to be an exact power of p;
/// the m-th exponent is then the valuation gap of consecutive minor gcds.
pub fn classify_coset(g: &PadicMat, p: u64) -> Result<CosetLabel> {
    if p < 2 {
        return Err(Error::Invalid("p must be a prime".into()));
    }
    let m = &g.num;
    if m.rows() != m.cols() || m.rows() % 2 != 0 || m.rows() < 4 {
        return Err(Error::Dim(format!(
            "need a 2n x 2n matrix with n >= 2, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows() / 2;
    let r = m.similitude_scalar()?;
    if !r.is_positive() {
        return Err(Error::SimilitudeNotPrimePower(format!("r = {r}")));
    }
    let vr = int_valuation(&r, p).finite().expect("r is nonzero");
    let unit = r / BigInt::from(p).pow(vr as u32);
    if !unit.is_one() {
        return Err(Error::SimilitudeNotPrimePower(format!(
            "similitude has unit part {unit}"
        )));
    }
    let ell0 = vr - 2 * g.denom_exp as i64;

    let mut exponents = vec![ell0];
    let mut prev = 0i64;
    for k in 1..=n {
        let dk = match minor_valuation(m, k, p, g.denom_exp) {
            Valuation::Finite(v) => v,
            Valuation::Infinity => return Err(Error::Singular),
        };
        exponents.push(dk - prev);
        prev = dk;
    }
    for k in 1..n {
        if exponents[k] > exponents[k + 1] {
            return Err(Error::Invalid(format!(
                "minor valuations are not a Cartan chain: {exponents:?}"
            )));
        }
    }
    if 2 * exponents[n] > ell0 {
        return Err(Error::Invalid(format!(
            "exponents exceed the similitude bound: {exponents:?}"
        )));
    }
    let lam = Coweight::new(exponents.clone())?;
    debug_assert!(lam.is_dominant());
    Ok(CosetLabel {
        lam,
        r_exponent: ell0,
        exponents,
    })
}

/// The diagonal representative of the coset with exponents
/// `(l0, l1, ..., ln)`: `diag(p^l1, ..., p^ln, p^(l0-l1), ..., p^(l0-ln))`.
pub fn cartan_representative(p: u64, exponents: &[i64]) -> PadicMat {
    let n = exponents.len() - 1;
    let l0 = exponents[0];
    let mut exps: Vec<i64> = Vec::with_capacity(2 * n);
    exps.extend_from_slice(&exponents[1..]);
    exps.extend(exponents[1..].iter().map(|l| l0 - l));
    let shift = -exps.iter().copied().min().unwrap().min(0);
    let p = BigInt::from(p);
    let entries: Vec<BigInt> = exps.iter().map(|&e| p.pow((e + shift) as u32)).collect();
    PadicMat {
        num: IntMat::diag(&entries),
        denom_exp: shift as u32,
    }
}

// ---- Random integral symplectic words ----

/// A random product of elementary integral symplectic generators: unipotent
/// upper and lower blocks with small symmetric parameter, GL(n,Z) block
/// embeddings, and the Weyl involution.
pub fn random_integral_symplectic<R: Rng>(n: usize, word_length: usize, rng: &mut R) -> IntMat {
    let mut g = IntMat::identity(2 * n);
    for _ in 0..word_length {
        let f = random_generator(n, rng);
        g = g.mul(&f);
    }
    debug_assert!(g.similitude_scalar().map(|r| r.is_one()).unwrap_or(false));
    g
}

fn random_generator<R: Rng>(n: usize, rng: &mut R) -> IntMat {
    let kind = rng.random_range(0..4u32);
    match kind {
        0 | 1 => {
            // unipotent block with random symmetric S, entries in {-1, 0, 1}
            let mut s = IntMat::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = BigInt::from(rng.random_range(-1i64..=1));
                    s.set(i, j, v.clone());
                    s.set(j, i, v);
                }
            }
            let mut g = IntMat::identity(2 * n);
            for i in 0..n {
                for j in 0..n {
                    if kind == 0 {
                        g.set(i, n + j, s.get(i, j).clone());
                    } else {
                        g.set(n + i, j, s.get(i, j).clone());
                    }
                }
            }
            g
        }
        2 => {
            // [[U, 0], [0, tU^-1]] for a transvection U = 1 + c E_ij
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let c = if rng.random_bool(0.5) { 1i64 } else { -1 };
            let mut g = IntMat::identity(2 * n);
            g.set(i, j, BigInt::from(c));
            g.set(n + j, n + i, BigInt::from(-c));
            g
        }
        _ => IntMat::standard_symplectic_form(n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_mat<R: Rng>(n: usize, rng: &mut R) -> IntMat {
        loop {
            let rows: Vec<Vec<i64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(-9i64..=9)).collect())
                .collect();
            let m = IntMat::from_rows(&rows).unwrap();
            if !m.det().is_zero() {
                return m;
            }
        }
    }

    #[test]
    fn det_matches_cofactor_small() {
        let m = IntMat::from_rows(&[vec![2, 3], vec![5, 7]]).unwrap();
        assert_eq!(m.det(), BigInt::from(-1));
        let m = IntMat::from_rows(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 10]]).unwrap();
        assert_eq!(m.det(), BigInt::from(-3));
    }

    #[test]
    fn snf_reconstructs_and_divides() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=4 {
            for _ in 0..40 {
                let a = rand_mat(n, &mut rng);
                let snf = smith_normal_form(&a).unwrap();
                assert_eq!(snf.u.mul(&snf.d).mul(&snf.v), a);
                assert!(snf.u.det().abs().is_one());
                assert!(snf.v.det().abs().is_one());
                let diag = snf.diagonal();
                for i in 0..n - 1 {
                    assert!(!diag[i].is_negative());
                    assert!(
                        diag[i + 1].mod_floor(&diag[i]).is_zero(),
                        "chain broken: {:?}",
                        diag
                    );
                }
            }
        }
    }

    #[test]
    fn snf_rejects_singular() {
        let a = IntMat::from_rows(&[vec![1, 2], vec![2, 4]]).unwrap();
        assert!(matches!(smith_normal_form(&a), Err(Error::Singular)));
    }

    #[test]
    fn minor_valuation_diag() {
        // diag(1, p, p^3, p^2) at p = 3: d1 = 0, d2 = 1, d3 = 3, d4 = 6
        let p = 3u64;
        let e = [0u32, 1, 3, 2];
        let entries: Vec<BigInt> = e.iter().map(|&k| BigInt::from(p).pow(k)).collect();
        let m = IntMat::diag(&entries);
        let got: Vec<i64> = (1..=4)
            .map(|k| minor_valuation(&m, k, p, 0).finite().unwrap())
            .collect();
        assert_eq!(got, vec![0, 1, 3, 6]);
    }

    #[test]
    fn classify_diagonal_representative() {
        for p in [2u64, 3, 5] {
            for (l0, t) in [(0i64, 0i64), (1, 0), (2, 1), (3, 1), (4, 2), (4, 0)] {
                let g = cartan_representative(p, &[l0, 0, t]);
                let label = classify_coset(&g, p).unwrap();
                assert_eq!(label.exponents, vec![l0, 0, t]);
                assert_eq!(label.r_exponent, l0);
                assert_eq!(label.lam, Coweight::new(vec![l0, 0, t]).unwrap());
            }
        }
    }

    #[test]
    fn classify_is_bi_invariant_under_integral_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [2u64, 3, 5] {
            for (l0, t) in [(2i64, 1), (3, 1), (4, 2)] {
                let lam = cartan_representative(p, &[l0, 0, t]);
                for _ in 0..10 {
                    let k1 = random_integral_symplectic(2, 8, &mut rng);
                    let k2 = random_integral_symplectic(2, 8, &mut rng);
                    let g = PadicMat {
                        num: k1.mul(&lam.num).mul(&k2),
                        denom_exp: lam.denom_exp,
                    };
                    let label = classify_coset(&g, p).unwrap();
                    assert_eq!(label.exponents, vec![l0, 0, t]);
                }
            }
        }
    }

    #[test]
    fn classify_central_twist_shifts_r_exponent_only() {
        let p = 3u64;
        let base = cartan_representative(p, &[2, 0, 1]);
        let twisted = PadicMat {
            num: base.num.scale(&BigInt::from(p)),
            denom_exp: 0,
        };
        let a = classify_coset(&base, p).unwrap();
        let b = classify_coset(&twisted, p).unwrap();
        assert_eq!(a.lam, b.lam);
        assert_eq!(b.r_exponent, a.r_exponent + 2);
        assert_eq!(b.exponents, vec![4, 1, 2]);
    }

    #[test]
    fn classify_rejects_non_similitude() {
        let mut m = IntMat::identity(4);
        m.set(0, 1, BigInt::from(1));
        m.set(1, 0, BigInt::from(1));
        m.set(0, 0, BigInt::from(2));
        let g = PadicMat::integral(m);
        assert!(classify_coset(&g, 3).is_err());
    }

    #[test]
    fn classify_rejects_non_power_similitude() {
        // diag(1, 1, 6, 6) has similitude 6, not a power of 5
        let entries: Vec<BigInt> = [1, 1, 6, 6].iter().map(|&x| BigInt::from(x)).collect();
        let g = PadicMat::integral(IntMat::diag(&entries));
        assert!(matches!(
            classify_coset(&g, 5),
            Err(Error::SimilitudeNotPrimePower(_))
        ));
    }

    #[test]
    fn random_words_are_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=3 {
            for _ in 0..20 {
                let g = random_integral_symplectic(n, 10, &mut rng);
                assert!(g.similitude_scalar().unwrap().is_one());
                assert!(g.det().is_one());
            }
        }
    }

    #[test]
    fn scaled_input_classifies_like_integral() {
        let p = 3u64;
        let base = cartan_representative(p, &[4, 0, 2]);
        let scaled = PadicMat {
            num: base.num.scale(&BigInt::from(27)),
            denom_exp: base.denom_exp + 3,
        };
        assert_eq!(
            classify_coset(&base, p).unwrap(),
            classify_coset(&scaled, p).unwrap()
        );
    }
}
