//! Root datum of the similitude symplectic group and its adjoint quotient.
//!
//! Characters of the diagonal torus are written in the basis `(k0, k1, ..., kn)`
//! where `k0` is the exponent of the similitude factor and `ki` the exponent of
//! the i-th diagonal entry.  Cocharacters `(l0, l1, ..., ln)` send `a` to
//! `diag(a^l1, ..., a^ln, a^(l0-l1), ..., a^(l0-ln))`.  For the adjoint group
//! the cocharacter lattice is the quotient by `Z*(2,1,...,1)`; every class has
//! a unique representative with `l1 = 0` ("the chart") and all class arithmetic
//! below is done on that representative.

use crate::error::{Error, Result};
use num_rational::Rational64;
use std::collections::HashMap;

/// Direction of the central cocharacter `a -> a*Id`, the kernel of the
/// projection to the adjoint cocharacter lattice.
pub fn center_direction(n: usize) -> Vec<i64> {
    let mut v = vec![1i64; n + 1];
    v[0] = 2;
    v
}

// ---- Characters ----

/// A character of the diagonal torus, `t -> r^k0 * a1^k1 * ... * an^kn`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Character {
    k: Vec<i64>,
}

impl Character {
    pub fn new(k: Vec<i64>) -> Result<Self> {
        if k.len() < 3 {
            return Err(Error::Dim(format!(
                "character needs n >= 2 coordinates after the similitude slot, got {}",
                k.len()
            )));
        }
        Ok(Character { k })
    }

    pub fn n(&self) -> usize {
        self.k.len() - 1
    }

    pub fn coords(&self) -> &[i64] {
        &self.k
    }

    /// Whether the character kills the center, i.e. descends to the adjoint group.
    pub fn is_adjoint(&self) -> bool {
        2 * self.k[0] + self.k[1..].iter().sum::<i64>() == 0
    }

    /// The Weyl-invariant symmetric form `sum_{i>=1} ki*ki'` on adjoint characters.
    pub fn invariant_form(&self, other: &Character) -> i64 {
        assert_eq!(self.n(), other.n());
        (1..=self.n()).map(|i| self.k[i] * other.k[i]).sum()
    }
}

// ---- Half-integral characters ----

/// A character with half-integral coordinates, stored doubled.  The half-sum
/// of the positive roots has `k0 = n(n+1)/4`, which is a proper half-integer
/// when n = 1, 2 mod 4, so it lives here rather than in [`Character`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HalfWeight {
    two_k: Vec<i64>,
}

impl HalfWeight {
    pub fn from_doubled(two_k: Vec<i64>) -> Result<Self> {
        if two_k.len() < 3 {
            return Err(Error::Dim("half-weight needs n >= 2".into()));
        }
        Ok(HalfWeight { two_k })
    }

    pub fn from_character(chi: &Character) -> Self {
        HalfWeight {
            two_k: chi.k.iter().map(|x| 2 * x).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.two_k.len() - 1
    }

    pub fn doubled_coords(&self) -> &[i64] {
        &self.two_k
    }

    pub fn coord(&self, i: usize) -> Rational64 {
        Rational64::new(self.two_k[i], 2)
    }
}

/// Half-sum of the positive roots: `(n(n+1)/4, -n, -(n-1), ..., -1)`.
pub fn half_sum_positive_roots(n: usize) -> HalfWeight {
    let mut two_k = Vec::with_capacity(n + 1);
    two_k.push((n * (n + 1) / 2) as i64);
    for i in 1..=n {
        two_k.push(-2 * ((n + 1 - i) as i64));
    }
    HalfWeight { two_k }
}

// ---- Cocharacter classes ----

/// A cocharacter class of the adjoint group, stored as the unique
/// representative with `l1 = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coweight {
    ell: Vec<i64>,
}

impl Coweight {
    /// Build from any representative; reduces to the `l1 = 0` chart.
    pub fn new(full: Vec<i64>) -> Result<Self> {
        if full.len() < 3 {
            return Err(Error::Dim("coweight needs n >= 2".into()));
        }
        Ok(Self::rechart(full))
    }

    fn rechart(mut full: Vec<i64>) -> Self {
        let l1 = full[1];
        if l1 != 0 {
            let n = full.len() - 1;
            let c = center_direction(n);
            for (x, d) in full.iter_mut().zip(c.iter()) {
                *x -= l1 * d;
            }
        }
        debug_assert_eq!(full[1], 0);
        Coweight { ell: full }
    }

    pub fn zero(n: usize) -> Self {
        Coweight { ell: vec![0; n + 1] }
    }

    pub fn n(&self) -> usize {
        self.ell.len() - 1
    }

    /// Chart coordinates `(l0, 0, l2, ..., ln)`.
    pub fn coords(&self) -> &[i64] {
        &self.ell
    }

    pub fn ell0(&self) -> i64 {
        self.ell[0]
    }

    /// Dominance: `0 = l1 <= l2 <= ... <= ln <= l0/2` on the chart.
    pub fn is_dominant(&self) -> bool {
        let n = self.n();
        for i in 1..n {
            if self.ell[i] > self.ell[i + 1] {
                return false;
            }
        }
        self.ell[1] >= 0 && 2 * self.ell[n] <= self.ell[0]
    }

    pub fn add(&self, other: &Coweight) -> Coweight {
        assert_eq!(self.n(), other.n());
        let v = self
            .ell
            .iter()
            .zip(&other.ell)
            .map(|(a, b)| a + b)
            .collect();
        Coweight::rechart(v)
    }

    pub fn sub(&self, other: &Coweight) -> Coweight {
        assert_eq!(self.n(), other.n());
        let v = self
            .ell
            .iter()
            .zip(&other.ell)
            .map(|(a, b)| a - b)
            .collect();
        Coweight::rechart(v)
    }

    pub fn neg(&self) -> Coweight {
        Coweight::rechart(self.ell.iter().map(|a| -a).collect())
    }

    pub fn scale(&self, c: i64) -> Coweight {
        Coweight::rechart(self.ell.iter().map(|a| c * a).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.ell.iter().all(|&x| x == 0)
    }
}

/// Canonical pairing of an adjoint character with a cocharacter class.
/// Well defined because adjoint characters kill the central direction.
pub fn pair(chi: &Character, lam: &Coweight) -> i64 {
    assert!(chi.is_adjoint(), "pairing with a class needs an adjoint character");
    assert_eq!(chi.n(), lam.n());
    chi.k.iter().zip(lam.coords()).map(|(a, b)| a * b).sum()
}

/// Pairing with a half-integral character; exact rational result.
pub fn pair_half(chi: &HalfWeight, lam: &Coweight) -> Rational64 {
    assert_eq!(chi.n(), lam.n());
    let s: i64 = chi
        .two_k
        .iter()
        .zip(lam.coords())
        .map(|(a, b)| a * b)
        .sum();
    Rational64::new(s, 2)
}

// ---- Weyl group ----

/// An element of the Weyl group `S_n x (Z/2)^n` of type C_n.
///
/// Acting on a cocharacter, position `i` (1-based) of the result reads
/// coordinate `perm[i-1]+1` of the input, negated through `l0 - l` when
/// `flip[i-1]` is set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeylElement {
    perm: Vec<usize>,
    flip: Vec<bool>,
}

impl WeylElement {
    pub fn identity(n: usize) -> Self {
        WeylElement {
            perm: (0..n).collect(),
            flip: vec![false; n],
        }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Transposition of coordinates i and i+1 (1-based, 1 <= i < n).
    pub fn transposition(n: usize, i: usize) -> Self {
        assert!((1..n).contains(&i));
        let mut w = Self::identity(n);
        w.perm.swap(i - 1, i);
        w
    }

    /// Sign flip in coordinate i (1-based).
    pub fn sign_flip(n: usize, i: usize) -> Self {
        assert!((1..=n).contains(&i));
        let mut w = Self::identity(n);
        w.flip[i - 1] = true;
        w
    }

    /// Group law: `(a.compose(b))(x) = a(b(x))`.
    pub fn compose(&self, other: &WeylElement) -> WeylElement {
        let n = self.n();
        assert_eq!(n, other.n());
        let mut perm = Vec::with_capacity(n);
        let mut flip = Vec::with_capacity(n);
        for i in 0..n {
            perm.push(other.perm[self.perm[i]]);
            flip.push(self.flip[i] ^ other.flip[self.perm[i]]);
        }
        WeylElement { perm, flip }
    }

    pub fn inverse(&self) -> WeylElement {
        let n = self.n();
        let mut perm = vec![0; n];
        let mut flip = vec![false; n];
        for i in 0..n {
            perm[self.perm[i]] = i;
            flip[self.perm[i]] = self.flip[i];
        }
        WeylElement { perm, flip }
    }

    pub fn is_identity(&self) -> bool {
        self.flip.iter().all(|&f| !f) && self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// Determinant of the reflection representation: permutation parity times
    /// one `-1` per flipped coordinate.
    pub fn sign(&self) -> i64 {
        let mut seen = vec![false; self.n()];
        let mut parity = 0usize;
        for start in 0..self.n() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                j = self.perm[j];
                len += 1;
            }
            parity += len - 1;
        }
        let flips = self.flip.iter().filter(|&&f| f).count();
        if (parity + flips) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// All `2^n n!` elements.
    pub fn all(n: usize) -> Vec<WeylElement> {
        let mut perms = vec![];
        let mut cur: Vec<usize> = (0..n).collect();
        heap_permutations(&mut cur, n, &mut perms);
        let mut out = Vec::with_capacity((1 << n) * perms.len());
        for p in &perms {
            for mask in 0u32..(1 << n) {
                out.push(WeylElement {
                    perm: p.clone(),
                    flip: (0..n).map(|i| mask & (1 << i) != 0).collect(),
                });
            }
        }
        out
    }
}

fn heap_permutations(cur: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(cur.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(cur, k - 1, out);
        if k % 2 == 0 {
            cur.swap(i, k - 1);
        } else {
            cur.swap(0, k - 1);
        }
    }
}

/// Action on a full cocharacter tuple (the similitude exponent `l0` is fixed).
pub fn weyl_apply_full(w: &WeylElement, ell: &[i64]) -> Vec<i64> {
    let n = w.n();
    assert_eq!(ell.len(), n + 1);
    let mut out = Vec::with_capacity(n + 1);
    out.push(ell[0]);
    for i in 0..n {
        let v = ell[w.perm[i] + 1];
        out.push(if w.flip[i] { ell[0] - v } else { v });
    }
    out
}

/// Action on a cocharacter class; the result is re-charted.
pub fn weyl_apply(w: &WeylElement, lam: &Coweight) -> Coweight {
    Coweight::rechart(weyl_apply_full(w, lam.coords()))
}

/// The dual action on characters, fixed by `<w.chi, w.lam> = <chi, lam>`.
pub fn weyl_apply_char(w: &WeylElement, chi: &Character) -> Character {
    let n = w.n();
    assert_eq!(chi.n(), n);
    let k = chi.coords();
    let mut out = vec![0i64; n + 1];
    out[0] = k[0];
    for i in 0..n {
        let v = k[w.perm[i] + 1];
        if w.flip[i] {
            out[i + 1] = -v;
            out[0] += v;
        } else {
            out[i + 1] = v;
        }
    }
    Character { k: out }
}

pub fn weyl_apply_half(w: &WeylElement, chi: &HalfWeight) -> HalfWeight {
    let n = w.n();
    assert_eq!(chi.n(), n);
    let k = &chi.two_k;
    let mut out = vec![0i64; n + 1];
    out[0] = k[0];
    for i in 0..n {
        let v = k[w.perm[i] + 1];
        if w.flip[i] {
            out[i + 1] = -v;
            out[0] += v;
        } else {
            out[i + 1] = v;
        }
    }
    HalfWeight { two_k: out }
}

// ---- Roots and coroots ----

/// All roots, as characters: `e_j - e_i` (i != j) and `e_0 - e_j - e_i` with
/// its negative, including the long roots `e_0 - 2e_j`.
pub fn roots(n: usize) -> Vec<Character> {
    let mut out = vec![];
    for alpha in positive_roots(n) {
        let neg = Character {
            k: alpha.k.iter().map(|x| -x).collect(),
        };
        out.push(alpha);
        out.push(neg);
    }
    out
}

pub fn positive_roots(n: usize) -> Vec<Character> {
    let mut out = vec![];
    // e_j - e_i for i < j
    for i in 1..=n {
        for j in (i + 1)..=n {
            let mut k = vec![0i64; n + 1];
            k[j] = 1;
            k[i] = -1;
            out.push(Character { k });
        }
    }
    // e_0 - e_j - e_i for i <= j
    for i in 1..=n {
        for j in i..=n {
            let mut k = vec![0i64; n + 1];
            k[0] = 1;
            k[i] -= 1;
            k[j] -= 1;
            out.push(Character { k });
        }
    }
    out
}

/// Simple roots: `e_{j+1} - e_j` (j < n) and `e_0 - 2 e_n`.
pub fn simple_roots(n: usize) -> Vec<Character> {
    let mut out = vec![];
    for j in 1..n {
        let mut k = vec![0i64; n + 1];
        k[j + 1] = 1;
        k[j] = -1;
        out.push(Character { k });
    }
    let mut k = vec![0i64; n + 1];
    k[0] = 1;
    k[n] = -2;
    out.push(Character { k });
    out
}

/// The coroot of a root, as a cocharacter class.
///
/// `(e_j - e_i)^v = f_j - f_i`, `(e_0 - e_j - e_i)^v = -f_j - f_i` for i != j,
/// `(e_0 - 2e_j)^v = -f_j`, extended by negation.
pub fn coroot(alpha: &Character) -> Coweight {
    let n = alpha.n();
    let k = alpha.coords();
    let mut v = vec![0i64; n + 1];
    match k[0] {
        0 => {
            // +-(e_j - e_i): coroot has the same tail
            for i in 1..=n {
                v[i] = k[i];
            }
        }
        s @ (1 | -1) => {
            // +-(e_0 - e_j - e_i): tail entries are -1 (or -2 on the long root),
            // coroot tail is sign * (-1) per index occurrence, halved on the
            // long root
            for i in 1..=n {
                let c = k[i] * s; // -1, -2 or 0
                v[i] = match c {
                    0 => 0,
                    -1 => -s,
                    -2 => -s,
                    _ => panic!("not a root: {:?}", k),
                };
            }
        }
        _ => panic!("not a root: {:?}", k),
    }
    Coweight::rechart(v)
}

pub fn positive_coroots(n: usize) -> Vec<Coweight> {
    positive_roots(n).iter().map(coroot).collect()
}

/// Half-sum of the positive coroots.  As a class this is integral; the chart
/// representative is `(2n-1, 0, 1, 2, ..., n-1)`.
pub fn half_sum_positive_coroots(n: usize) -> Coweight {
    let mut v = Vec::with_capacity(n + 1);
    v.push(2 * n as i64 - 1);
    for i in 1..=n {
        v.push(i as i64 - 1);
    }
    Coweight { ell: v }
}

// ---- Dominant representatives ----

/// The dominant representative of the Weyl orbit of `lam`, together with a
/// Weyl element `w` such that `weyl_apply(&w, lam)` is the result.
///
/// Descends by simple reflections: while some simple root pairs negatively,
/// reflect.  Terminates because each step raises the pairing with the
/// half-sum of positive roots.
pub fn dominant_rep(lam: &Coweight) -> (Coweight, WeylElement) {
    let n = lam.n();
    let simples = simple_roots(n);
    let mut cur = lam.clone();
    let mut w = WeylElement::identity(n);
    loop {
        let mut progressed = false;
        for (idx, alpha) in simples.iter().enumerate() {
            if pair(alpha, &cur) < 0 {
                let s = if idx + 1 < n {
                    WeylElement::transposition(n, idx + 1)
                } else {
                    WeylElement::sign_flip(n, n)
                };
                cur = weyl_apply(&s, &cur);
                w = s.compose(&w);
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    debug_assert!(cur.is_dominant(), "descent ended off the dominant cone");
    debug_assert_eq!(weyl_apply(&w, lam), cur);
    (cur, w)
}

// ---- Dominance order ----

/// Dominance order: `mu <= lam` iff `lam - mu` is a nonnegative integer
/// combination of positive coroots.  DFS over coroot multiplicities with
/// memoization; both inputs must be dominant.
pub fn leq(mu: &Coweight, lam: &Coweight) -> bool {
    assert!(mu.is_dominant() && lam.is_dominant(), "dominance order needs dominant inputs");
    let delta = lam.sub(mu);
    in_coroot_cone(&delta)
}

/// Whether a class is a nonnegative integer combination of positive coroots.
pub fn in_coroot_cone(delta: &Coweight) -> bool {
    let n = delta.n();
    let coroots = positive_coroots(n);
    let rho2 = half_sum_positive_roots(n);
    // Height function: twice the pairing with the half-sum of positive roots.
    // Positive on every positive coroot, so it bounds multiplicities.
    let height = |c: &Coweight| -> i64 {
        c.coords()
            .iter()
            .zip(rho2.doubled_coords())
            .map(|(a, b)| a * b)
            .sum()
    };
    let heights: Vec<i64> = coroots.iter().map(height).collect();
    debug_assert!(heights.iter().all(|&h| h > 0));
    let mut memo: HashMap<(usize, Vec<i64>), bool> = HashMap::new();
    fn dfs(
        idx: usize,
        delta: &Coweight,
        h: i64,
        coroots: &[Coweight],
        heights: &[i64],
        memo: &mut HashMap<(usize, Vec<i64>), bool>,
    ) -> bool {
        if h < 0 {
            return false;
        }
        if delta.is_zero() {
            return true;
        }
        if idx == coroots.len() {
            return false;
        }
        let key = (idx, delta.coords().to_vec());
        if let Some(&r) = memo.get(&key) {
            return r;
        }
        let mut cur = delta.clone();
        let mut hh = h;
        let mut found = dfs(idx + 1, &cur, hh, coroots, heights, memo);
        while !found && hh >= heights[idx] {
            cur = cur.sub(&coroots[idx]);
            hh -= heights[idx];
            found = dfs(idx + 1, &cur, hh, coroots, heights, memo);
        }
        memo.insert(key, found);
        found
    }
    let h0 = height(delta);
    dfs(0, delta, h0, &coroots, &heights, &mut memo)
}

/// All dominant classes with a given chart `l0`: nondecreasing tails
/// `0 <= l2 <= ... <= ln <= l0/2`.
pub fn dominant_with_ell0(n: usize, l0: i64) -> Vec<Coweight> {
    let mut out = vec![];
    if l0 < 0 {
        return out;
    }
    let mut tail = Vec::with_capacity(n - 1);
    fn rec(n: usize, l0: i64, lo: i64, tail: &mut Vec<i64>, out: &mut Vec<Coweight>) {
        if tail.len() == n - 1 {
            let mut v = Vec::with_capacity(n + 1);
            v.push(l0);
            v.push(0);
            v.extend_from_slice(tail);
            out.push(Coweight { ell: v });
            return;
        }
        for x in lo..=(l0 / 2) {
            tail.push(x);
            rec(n, l0, x, tail, out);
            tail.pop();
        }
    }
    rec(n, l0, 0, &mut tail, &mut out);
    out
}

/// All dominant classes `mu <= lam`.  Coroot charts have `l0` in {0, 2}, so
/// only `l0` values of the same parity as `lam` can occur.
pub fn dominant_below(lam: &Coweight) -> Vec<Coweight> {
    assert!(lam.is_dominant());
    let n = lam.n();
    let mut out = vec![];
    let mut l0 = lam.ell0();
    while l0 >= 0 {
        for mu in dominant_with_ell0(n, l0) {
            if leq(&mu, lam) {
                out.push(mu);
            }
        }
        l0 -= 2;
    }
    out.sort();
    out
}
