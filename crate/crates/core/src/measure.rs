//! Exact Weyl-character calculus on the dual torus, the Sato–Tate density,
//! Kostant partition counts, Kazhdan–Lusztig polynomials, the change of
//! basis from characters to Hecke unit cosets, and truncated density
//! expansions of the weighted local measures.
//!
//! Lattice elements are keyed by doubled chart coordinates `(2l0, 0, 2l2,
//! ...)` so half-integral classes stay integral; canonical representatives
//! (second slot zero) add componentwise, which makes the group algebra a
//! genuine Laurent-polynomial ring.

use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::geom_side::{normalized_l_exact, HalfIntegralSymMat, SimilitudeSpec};
use crate::local_gsp4::{pow_rational, rational_to_f64};
use crate::root_data::{
    center_direction, dominant_below, dominant_with_ell0, half_sum_positive_coroots,
    half_sum_positive_roots, pair, pair_half, positive_coroots, positive_roots, weyl_apply_full,
    Coweight, WeylElement,
};

// ---- doubled chart keys ----

/// Canonicalize a doubled chart vector: subtract the slot-1 entry times the
/// center direction so the representative has second coordinate zero.
fn canon_key(mut v: Vec<i64>) -> Vec<i64> {
    let a = v[1];
    if a != 0 {
        let c = center_direction(v.len() - 1);
        for (vi, ci) in v.iter_mut().zip(c.iter()) {
            *vi -= a * ci;
        }
    }
    v
}

fn coweight_key(lam: &Coweight) -> Vec<i64> {
    lam.coords().iter().map(|x| 2 * x).collect()
}

fn weyl_key(w: &WeylElement, key: &[i64]) -> Vec<i64> {
    canon_key(weyl_apply_full(w, key))
}

// ---- torus points ----

/// A point of the dual torus, stored through its chart angles: the
/// coordinate tuple is `(e^{i theta_0}, e^{i theta_2}, ..., e^{i theta_n})`.
#[derive(Clone, Debug)]
pub struct TorusPoint {
    angles: Vec<f64>,
}

impl TorusPoint {
    /// From unit-modulus coordinates; moduli must be 1 within 1e-12.
    pub fn new(coords: &[Complex64]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Dim("torus point needs at least one coordinate".into()));
        }
        for z in coords {
            if (z.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!(
                    "coordinate {z} is off the unit circle"
                )));
            }
        }
        Ok(TorusPoint {
            angles: coords.iter().map(|z| z.arg()).collect(),
        })
    }

    pub fn from_angles(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Dim("torus point needs at least one angle".into()));
        }
        Ok(TorusPoint { angles })
    }

    pub fn identity(n: usize) -> Self {
        TorusPoint { angles: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn coords(&self) -> Vec<Complex64> {
        self.angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect()
    }

    pub fn conj(&self) -> TorusPoint {
        TorusPoint { angles: self.angles.iter().map(|a| -a).collect() }
    }

    /// Value of the monomial with the given doubled chart key.
    fn eval_key(&self, key: &[i64]) -> Complex64 {
        debug_assert_eq!(key.len(), self.angles.len() + 1);
        debug_assert_eq!(key[1], 0);
        let mut phase = key[0] as f64 * self.angles[0];
        for j in 2..key.len() {
            phase += key[j] as f64 * self.angles[j - 1];
        }
        Complex64::from_polar(1.0, phase / 2.0)
    }
}

// ---- Laurent elements ----

/// A finitely supported rational combination of torus monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentElement {
    n: usize,
    coeffs: BTreeMap<Vec<i64>, BigRational>,
}

impl LaurentElement {
    pub fn zero(n: usize) -> Self {
        LaurentElement { n, coeffs: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: BigRational) -> Self {
        let mut e = LaurentElement::zero(n);
        e.insert_term(vec![0; n + 1], c);
        e
    }

    pub fn monomial(lam: &Coweight, c: BigRational) -> Self {
        let mut e = LaurentElement::zero(lam.n());
        e.insert_term(coweight_key(lam), c);
        e
    }

    fn insert_term(&mut self, key: Vec<i64>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.coeffs.entry(key) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i64>, &BigRational)> {
        self.coeffs.iter()
    }

    /// Coefficient of the monomial indexed by an (integral) class.
    pub fn coeff_of(&self, lam: &Coweight) -> BigRational {
        self.coeffs.get(&coweight_key(lam)).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add(&self, other: &LaurentElement) -> LaurentElement {
        let mut out = self.clone();
        for (k, c) in &other.coeffs {
            out.insert_term(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &LaurentElement) -> LaurentElement {
        let mut out = self.clone();
        for (k, c) in &other.coeffs {
            out.insert_term(k.clone(), -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &LaurentElement) -> LaurentElement {
        let mut out = LaurentElement::zero(self.n);
        for (k1, c1) in &self.coeffs {
            for (k2, c2) in &other.coeffs {
                let key: Vec<i64> = k1.iter().zip(k2.iter()).map(|(a, b)| a + b).collect();
                out.insert_term(key, c1 * c2);
            }
        }
        out
    }

    /// Multiply by a single monomial `c * x^key`.
    fn mul_monomial(&self, key: &[i64], c: &BigRational) -> LaurentElement {
        let mut out = LaurentElement::zero(self.n);
        for (k, v) in &self.coeffs {
            let kk: Vec<i64> = k.iter().zip(key.iter()).map(|(a, b)| a + b).collect();
            out.insert_term(kk, v * c);
        }
        out
    }

    /// The lexicographically largest term.
    fn leading(&self) -> Option<(&Vec<i64>, &BigRational)> {
        self.coeffs.last_key_value()
    }

    pub fn evaluate(&self, t: &TorusPoint) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (k, c) in &self.coeffs {
            s += t.eval_key(k) * rational_to_f64(c);
        }
        s
    }

    /// Whether every Weyl image of the support carries the same coefficient.
    pub fn is_weyl_symmetric(&self) -> bool {
        for w in WeylElement::all(self.n) {
            for (k, c) in &self.coeffs {
                let wk = weyl_key(&w, k);
                if self.coeffs.get(&wk) != Some(c) {
                    return false;
                }
            }
        }
        true
    }

    /// Whether all coefficients are nonnegative integers.
    pub fn has_nonneg_integer_coeffs(&self) -> bool {
        self.coeffs.values().all(|c| c.is_integer() && !c.is_negative())
    }
}

// ---- alternating sums and characters ----

/// The alternating orbit sum `A_mu = sum_w sgn(w) x^{w(mu)}`.
pub fn alternating_sum(mu: &Coweight) -> LaurentElement {
    alternating_sum_doubled(mu.n(), &coweight_key(mu))
}

/// Alternating orbit sum for a doubled chart vector (odd entries encode
/// half-integral classes).
pub fn alternating_sum_doubled(n: usize, key: &[i64]) -> LaurentElement {
    let key = canon_key(key.to_vec());
    let mut e = LaurentElement::zero(n);
    for w in WeylElement::all(n) {
        let sign = BigRational::from_integer(w.sign().into());
        e.insert_term(weyl_key(&w, &key), sign);
    }
    e
}

/// Iteration cap for the Laurent division loop; reaching it signals a bug
/// (exact character quotients terminate far earlier).
const DIVISION_CAP: usize = 200_000;

/// Exact Laurent division `num / den`, requiring zero remainder.
fn laurent_divide_exact(num: &LaurentElement, den: &LaurentElement) -> Result<LaurentElement> {
    let (dk, dc) = den
        .leading()
        .ok_or_else(|| Error::CharacterDivision("division by the zero element".into()))?;
    let dk = dk.clone();
    let dc = dc.clone();
    let mut rem = num.clone();
    let mut quo = LaurentElement::zero(num.n());
    let mut steps = 0usize;
    while let Some((rk, rc)) = rem.leading() {
        steps += 1;
        if steps > DIVISION_CAP {
            return Err(Error::CharacterDivision(format!(
                "no termination after {DIVISION_CAP} steps; remainder has {} terms",
                rem.num_terms()
            )));
        }
        let mk: Vec<i64> = rk.iter().zip(dk.iter()).map(|(a, b)| a - b).collect();
        let mc = rc / &dc;
        quo.insert_term(mk.clone(), mc.clone());
        rem = rem.sub(&den.mul_monomial(&mk, &mc));
    }
    Ok(quo)
}

/// The irreducible character with the given dominant highest class, as an
/// exact quotient of alternating sums.
pub fn weyl_character(lam: &Coweight) -> Result<LaurentElement> {
    if !lam.is_dominant() {
        return Err(Error::Invalid("highest class must be dominant".into()));
    }
    let n = lam.n();
    let rho = half_sum_positive_coroots(n);
    let num = alternating_sum(&lam.add(&rho));
    let den = alternating_sum(&rho);
    let quo = laurent_divide_exact(&num, &den)?;
    debug_assert_eq!(quo.mul(&den), num, "division must be exact");
    Ok(quo)
}

/// The dimension through the product formula `prod <lam+rho, alpha> /
/// <rho, alpha>` over positive pairings.
pub fn weyl_dimension(lam: &Coweight) -> Result<BigRational> {
    if !lam.is_dominant() {
        return Err(Error::Invalid("dimension needs a dominant class".into()));
    }
    let n = lam.n();
    let rho = half_sum_positive_coroots(n);
    let shifted = lam.add(&rho);
    let mut val = BigRational::one();
    for alpha in positive_roots(n) {
        let num = pair(&alpha, &shifted);
        let den = pair(&alpha, &rho);
        val *= BigRational::new(num.into(), den.into());
    }
    Ok(val)
}

/// Character value at a torus point: the ratio of alternating sums away
/// from the zeros of the denominator, the full polynomial at degenerate
/// points.
pub fn char_eval(lam: &Coweight, t: &TorusPoint) -> Result<Complex64> {
    if !lam.is_dominant() {
        return Err(Error::Invalid("character needs a dominant class".into()));
    }
    if t.n() != lam.n() {
        return Err(Error::Dim("torus point rank differs from class rank".into()));
    }
    let rho = half_sum_positive_coroots(lam.n());
    let den = alternating_sum(&rho).evaluate(t);
    if den.norm() > 1e-6 {
        let num = alternating_sum(&lam.add(&rho)).evaluate(t);
        Ok(num / den)
    } else {
        Ok(weyl_character(lam)?.evaluate(t))
    }
}

fn weyl_order(n: usize) -> f64 {
    let mut w = 1f64;
    for k in 1..=n {
        w *= 2.0 * k as f64;
    }
    w
}

/// Density of the Sato–Tate measure with respect to normalized Haar measure
/// on the full torus: `|A_rho(t)|^2 / |W|` (the `1/|W|` folds the torus onto
/// the quotient by the Weyl group).
pub fn sato_tate_density(t: &TorusPoint) -> f64 {
    let rho = half_sum_positive_coroots(t.n());
    alternating_sum(&rho).evaluate(t).norm_sqr() / weyl_order(t.n())
}

/// The same density computed from the adjoint determinant
/// `prod_{gamma > 0} |1 - t^gamma|^2 / |W|`.
pub fn sato_tate_density_adjoint(t: &TorusPoint) -> f64 {
    let mut val = 1.0;
    for gamma in positive_coroots(t.n()) {
        let z = Complex64::new(1.0, 0.0) - t.eval_key(&coweight_key(&gamma));
        val *= z.norm_sqr();
    }
    val / weyl_order(t.n())
}

// ---- Kostant partition counts ----

/// Number of expressions of the class as a sum of `k` positive coroots,
/// listed as a map `k -> count`.
pub fn kostant_counts(mu: &Coweight) -> BTreeMap<u32, u64> {
    let n = mu.n();
    let coroots = positive_coroots(n);
    let two_rho = half_sum_positive_roots(n);
    let height = |c: &Coweight| -> i64 {
        c.coords()
            .iter()
            .zip(two_rho.doubled_coords())
            .map(|(a, b)| a * b)
            .sum()
    };
    let heights: Vec<i64> = coroots.iter().map(height).collect();
    debug_assert!(heights.iter().all(|&h| h > 0));
    let mut out: BTreeMap<u32, u64> = BTreeMap::new();
    fn dfs(
        idx: usize,
        rem: Coweight,
        h: i64,
        used: u32,
        coroots: &[Coweight],
        heights: &[i64],
        out: &mut BTreeMap<u32, u64>,
    ) {
        if h < 0 {
            return;
        }
        if rem.is_zero() {
            *out.entry(used).or_insert(0) += 1;
            return;
        }
        if idx == coroots.len() || h == 0 {
            return;
        }
        let mut cur = rem;
        let mut hh = h;
        let mut count = used;
        loop {
            dfs(idx + 1, cur.clone(), hh, count, coroots, heights, out);
            hh -= heights[idx];
            if hh < 0 {
                break;
            }
            cur = cur.sub(&coroots[idx]);
            count += 1;
        }
    }
    let h0 = height(mu);
    dfs(0, mu.clone(), h0, 0, &coroots, &heights, &mut out);
    out
}

/// The Kostant-type generating value `sum over expressions p^{-(number of
/// coroots used)}`; zero when the class is outside the coroot cone.
pub fn kostant_phat(mu: &Coweight, p: u64) -> BigRational {
    let mut val = BigRational::zero();
    for (k, count) in kostant_counts(mu) {
        val += pow_rational(p, -(k as i64)) * BigRational::from_integer(count.into());
    }
    val
}

// ---- Kazhdan–Lusztig polynomials ----

/// One evaluated polynomial value with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct KlData {
    pub mu: Coweight,
    pub lam: Coweight,
    pub p: u64,
    pub value: BigRational,
}

/// Integer pairing of a class with the half-sum of positive roots.
fn rho_pairing(lam: &Coweight) -> Result<i64> {
    let rho = half_sum_positive_roots(lam.n());
    let v = pair_half(&rho, lam);
    if *v.denom() != 1 {
        return Err(Error::Invalid(format!("pairing {v} is not an integer")));
    }
    Ok(*v.numer())
}

/// The evaluated polynomial
/// `P_{mu,lam}(p) = p^{<lam-mu, rho>} sum_w sgn(w) Phat(w(lam+rho^v) - (mu+rho^v))`.
pub fn kl_poly(mu: &Coweight, lam: &Coweight, p: u64) -> Result<BigRational> {
    if !mu.is_dominant() || !lam.is_dominant() {
        return Err(Error::Invalid("both classes must be dominant".into()));
    }
    if !crate::root_data::leq(mu, lam) {
        return Err(Error::Invalid("first class must be below the second".into()));
    }
    let n = lam.n();
    let rho_v = half_sum_positive_coroots(n);
    let shift_lam = lam.add(&rho_v);
    let shift_mu = mu.add(&rho_v);
    let mut sum = BigRational::zero();
    for w in WeylElement::all(n) {
        let arg = crate::root_data::weyl_apply(&w, &shift_lam).sub(&shift_mu);
        let phat = kostant_phat(&arg, p);
        if w.sign() > 0 {
            sum += phat;
        } else {
            sum -= phat;
        }
    }
    let e = rho_pairing(&lam.sub(mu))?;
    Ok(pow_rational(p, e) * sum)
}

pub fn kl_data(mu: &Coweight, lam: &Coweight, p: u64) -> Result<KlData> {
    Ok(KlData { mu: mu.clone(), lam: lam.clone(), p, value: kl_poly(mu, lam, p)? })
}

/// The change of basis from the character to the unit-coset symbols: the
/// coefficient of the symbol at `mu` is `p^{-<lam,rho>} P_{mu,lam}(p)`,
/// listed over all dominant `mu <= lam` in sorted order.
pub fn kato_lusztig_expand(lam: &Coweight, p: u64) -> Result<Vec<(Coweight, f64)>> {
    if !lam.is_dominant() {
        return Err(Error::Invalid("expansion needs a dominant class".into()));
    }
    let rho = half_sum_positive_roots(lam.n());
    let exp = pair_half(&rho, lam);
    let prefactor = (p as f64).powf(-(*exp.numer() as f64) / (*exp.denom() as f64));
    let mut out = Vec::new();
    for mu in dominant_below(lam) {
        let val = kl_poly(&mu, lam, p)?;
        out.push((mu, prefactor * rational_to_f64(&val)));
    }
    Ok(out)
}

// ---- the linear functional and its cache ----

/// Concurrent cache of exact normalized averages, keyed by rank, form,
/// prime data, and weight.
pub struct LValueCache {
    map: RwLock<HashMap<String, BigRational>>,
}

impl Default for LValueCache {
    fn default() -> Self {
        Self::new()
    }
}

impl LValueCache {
    pub fn new() -> Self {
        LValueCache { map: RwLock::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries, sorted by key, for persistence.
    pub fn snapshot(&self) -> Vec<(String, BigRational)> {
        let map = self.map.read().expect("cache lock");
        let mut out: Vec<(String, BigRational)> =
            map.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Seed one entry, e.g. when reloading a persisted cache.
    pub fn restore(&self, key: String, value: BigRational) {
        self.map.write().expect("cache lock").insert(key, value);
    }

    /// Whether the exact value for this request is already cached.
    pub fn contains(&self, sigma: &HalfIntegralSymMat, spec: &SimilitudeSpec, kappa: i64) -> bool {
        let key = Self::key(sigma, spec, kappa);
        self.map.read().expect("cache lock").contains_key(&key)
    }

    fn key(sigma: &HalfIntegralSymMat, spec: &SimilitudeSpec, kappa: i64) -> String {
        format!(
            "n={};{};{};kappa={}",
            sigma.n(),
            sigma.canonical_label(),
            spec.canonical_label(),
            kappa
        )
    }

    /// Exact normalized average, memoized.  The stored value does not
    /// depend on the weight, but the weight participates in the key so
    /// entries remain self-describing.
    pub fn normalized_l(
        &self,
        sigma: &HalfIntegralSymMat,
        spec: &SimilitudeSpec,
        kappa: i64,
    ) -> Result<BigRational> {
        let key = Self::key(sigma, spec, kappa);
        if let Some(v) = self.map.read().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let val = normalized_l_exact(sigma, spec)?;
        self.map.write().expect("cache lock").insert(key, val.clone());
        Ok(val)
    }
}

/// The linear functional applied to a product of characters, one dominant
/// class per prime: expand each factor in unit-coset symbols and evaluate
/// the symbols through the normalized geometric average.
pub fn l_of_f(
    lams: &[(u64, Coweight)],
    sigma: &HalfIntegralSymMat,
    kappa: i64,
    cache: &LValueCache,
) -> Result<f64> {
    if kappa <= 2 * sigma.n() as i64 {
        return Err(Error::Invalid("weight must exceed twice the rank".into()));
    }
    let mut expansions: Vec<(u64, Vec<(Coweight, f64)>)> = Vec::with_capacity(lams.len());
    for (p, lam) in lams {
        expansions.push((*p, kato_lusztig_expand(lam, *p)?));
    }
    let mut total = 0.0;
    let mut tuple: Vec<(u64, Coweight)> = Vec::with_capacity(lams.len());
    fn rec(
        idx: usize,
        coeff: f64,
        expansions: &[(u64, Vec<(Coweight, f64)>)],
        tuple: &mut Vec<(u64, Coweight)>,
        sigma: &HalfIntegralSymMat,
        kappa: i64,
        cache: &LValueCache,
        total: &mut f64,
    ) -> Result<()> {
        if idx == expansions.len() {
            let entries: Vec<(u64, i64, Coweight)> =
                tuple.iter().map(|(p, mu)| (*p, mu.ell0(), mu.clone())).collect();
            let spec = SimilitudeSpec::new(entries)?;
            let val = cache.normalized_l(sigma, &spec, kappa)?;
            *total += coeff * rational_to_f64(&val);
            return Ok(());
        }
        let (p, ref terms) = expansions[idx];
        for (mu, c) in terms {
            tuple.push((p, mu.clone()));
            rec(idx + 1, coeff * c, expansions, tuple, sigma, kappa, cache, total)?;
            tuple.pop();
        }
        Ok(())
    }
    rec(0, 1.0, &expansions, &mut tuple, sigma, kappa, cache, &mut total)?;
    Ok(total)
}

// ---- truncated measure expansion and densities ----

/// Coefficients of the truncated density expansion together with the
/// truncation context.
#[derive(Clone, Debug)]
pub struct MeasureExpansion {
    pub sigma_label: String,
    pub kappa: i64,
    pub primes: Vec<u64>,
    pub lambda_max: i64,
    /// `(per-prime classes, coefficient)` per retained tuple.
    pub coeffs: Vec<(Vec<(u64, Coweight)>, f64)>,
    pub tail_bound: f64,
}

/// All dominant classes with leading coordinate at most the bound.
pub fn dominant_up_to(n: usize, lambda_max: i64) -> Vec<Coweight> {
    let mut out = Vec::new();
    for l0 in 0..=lambda_max {
        out.extend(dominant_with_ell0(n, l0));
    }
    out
}

/// Closed-form bound for the discarded coefficient mass
/// `sum over tuples beyond the truncation of prod_p p^{-eps <lam_p, rho>}`.
pub fn expansion_tail_bound(primes: &[u64], lambda_max: i64, eps: f64) -> f64 {
    let mut full = 1.0;
    let mut trunc = 1.0;
    for &p in primes {
        let pf = p as f64;
        let mut s = 0.0;
        for tau in 0..=lambda_max {
            for t in 0..=(tau / 2) {
                s += pf.powf(-eps * (1.5 * tau as f64 - t as f64));
            }
        }
        // sum_{tau > L} sum_t p^{-eps(1.5 tau - t)}
        //   <= p^eps/(p^eps - 1) * p^{-eps(L+1)} / (1 - p^{-eps}).
        let a = pf.powf(eps);
        let rem = a / (a - 1.0) * pf.powf(-eps * (lambda_max + 1) as f64) / (1.0 - 1.0 / a);
        full *= s + rem;
        trunc *= s;
    }
    full - trunc
}

/// Builds the truncated expansion: one coefficient per tuple of dominant
/// classes with leading coordinate at most `lambda_max` at each prime.
pub fn measure_expansion(
    sigma: &HalfIntegralSymMat,
    kappa: i64,
    primes: &[u64],
    lambda_max: i64,
    cache: &LValueCache,
) -> Result<MeasureExpansion> {
    if lambda_max < 0 {
        return Err(Error::Invalid("truncation radius must be nonnegative".into()));
    }
    let n = sigma.n();
    let per_prime: Vec<Vec<Coweight>> =
        primes.iter().map(|_| dominant_up_to(n, lambda_max)).collect();
    let mut coeffs = Vec::new();
    let mut tuple: Vec<(u64, Coweight)> = Vec::with_capacity(primes.len());
    fn rec(
        idx: usize,
        primes: &[u64],
        per_prime: &[Vec<Coweight>],
        tuple: &mut Vec<(u64, Coweight)>,
        sigma: &HalfIntegralSymMat,
        kappa: i64,
        cache: &LValueCache,
        coeffs: &mut Vec<(Vec<(u64, Coweight)>, f64)>,
    ) -> Result<()> {
        if idx == primes.len() {
            let val = l_of_f(tuple, sigma, kappa, cache)?;
            coeffs.push((tuple.clone(), val));
            return Ok(());
        }
        for lam in &per_prime[idx] {
            tuple.push((primes[idx], lam.clone()));
            rec(idx + 1, primes, per_prime, tuple, sigma, kappa, cache, coeffs)?;
            tuple.pop();
        }
        Ok(())
    }
    rec(0, primes, &per_prime, &mut tuple, sigma, kappa, cache, &mut coeffs)?;
    Ok(MeasureExpansion {
        sigma_label: sigma.canonical_label(),
        kappa,
        primes: primes.to_vec(),
        lambda_max,
        coeffs,
        tail_bound: expansion_tail_bound(primes, lambda_max, 0.01),
    })
}

/// One evaluated density sample: the grid angles (concatenated per prime),
/// the real density value, and the imaginary residue diagnostic.
#[derive(Clone, Debug)]
pub struct DensitySample {
    pub angles: Vec<f64>,
    pub density: f64,
    pub imag: f64,
}

/// Per-class evaluator: the shifted orbits drive the generic ratio path,
/// and the precomputed full characters handle degenerate grid points.
struct CharTable {
    rho_orbit: Vec<(f64, Vec<i64>)>,
    per_class: Vec<(Vec<(f64, Vec<i64>)>, LaurentElement)>,
}

impl CharTable {
    fn build(n: usize, classes: &[Coweight]) -> Result<CharTable> {
        let rho = half_sum_positive_coroots(n);
        let orbit = |lam: &Coweight| -> Vec<(f64, Vec<i64>)> {
            let key = coweight_key(lam);
            WeylElement::all(n)
                .iter()
                .map(|w| (w.sign() as f64, weyl_key(w, &key)))
                .collect()
        };
        let rho_orbit = orbit(&rho);
        let mut per_class = Vec::with_capacity(classes.len());
        for lam in classes {
            per_class.push((orbit(&lam.add(&rho)), weyl_character(lam)?));
        }
        Ok(CharTable { rho_orbit, per_class })
    }

    fn eval_orbit(t: &TorusPoint, orbit: &[(f64, Vec<i64>)]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (sign, key) in orbit {
            s += t.eval_key(key) * *sign;
        }
        s
    }

    /// Values of every class character at one point.
    fn eval_all(&self, t: &TorusPoint) -> Vec<Complex64> {
        let den = Self::eval_orbit(t, &self.rho_orbit);
        self.per_class
            .iter()
            .map(|(orbit, full)| {
                if den.norm() > 1e-6 {
                    Self::eval_orbit(t, orbit) / den
                } else {
                    full.evaluate(t)
                }
            })
            .collect()
    }
}

/// Evaluates the truncated density on a uniform tensor grid in the angles,
/// one torus factor per prime.  The density is reported relative to the
/// product Sato–Tate measure: the all-zero tuple contributes the constant 1.
pub fn density_samples(
    expansion: &MeasureExpansion,
    grid: usize,
) -> Result<Vec<DensitySample>> {
    if grid < 4 {
        return Err(Error::Invalid("grid too small".into()));
    }
    let nprimes = expansion.primes.len();
    if nprimes == 0 {
        return Err(Error::Invalid("density needs at least one prime".into()));
    }
    let n = expansion
        .coeffs
        .first()
        .and_then(|(tuple, _)| tuple.first().map(|(_, lam)| lam.n()))
        .ok_or_else(|| Error::Invalid("empty expansion".into()))?;
    let axes = nprimes * n;
    let total_points = (grid as f64).powi(axes as i32);
    if total_points > 5e6 {
        return Err(Error::Invalid(format!(
            "tensor grid of {total_points} points is too large"
        )));
    }
    // Distinct classes across the expansion, then a value table per prime
    // factor to share orbit evaluations.
    let mut classes: Vec<Coweight> = Vec::new();
    for (tuple, _) in &expansion.coeffs {
        for (_, lam) in tuple {
            if !classes.contains(lam) {
                classes.push(lam.clone());
            }
        }
    }
    classes.sort();
    let index_of = |lam: &Coweight| classes.iter().position(|c| c == lam).unwrap();
    let table = CharTable::build(n, &classes)?;
    // Tuple coefficients resolved to class indices.
    let tuples: Vec<(Vec<usize>, f64)> = expansion
        .coeffs
        .iter()
        .map(|(tuple, c)| (tuple.iter().map(|(_, lam)| index_of(lam)).collect(), *c))
        .collect();

    let step = 2.0 * std::f64::consts::PI / grid as f64;
    // Per-prime-factor grid of character values on the 2-D angle grid.
    let factor_points = grid.pow(n as u32);
    let mut factor_values: Vec<Vec<Complex64>> = Vec::with_capacity(factor_points);
    let mut angle_tuples: Vec<Vec<f64>> = Vec::with_capacity(factor_points);
    let mut idx = vec![0usize; n];
    loop {
        let angles: Vec<f64> = idx.iter().map(|&k| k as f64 * step).collect();
        let t = TorusPoint::from_angles(angles.clone())?;
        factor_values.push(table.eval_all(&t));
        angle_tuples.push(angles);
        // advance odometer
        let mut j = n;
        let mut done = true;
        while j > 0 {
            j -= 1;
            idx[j] += 1;
            if idx[j] < grid {
                done = false;
                break;
            }
            idx[j] = 0;
        }
        if done {
            break;
        }
    }

    // Assemble samples over the product of per-prime grids.
    let mut out = Vec::new();
    let mut sel = vec![0usize; nprimes];
    loop {
        let mut angles = Vec::with_capacity(axes);
        for &s in &sel {
            angles.extend_from_slice(&angle_tuples[s]);
        }
        let mut val = Complex64::new(0.0, 0.0);
        for (class_idx, coeff) in &tuples {
            let mut prod = Complex64::new(*coeff, 0.0);
            for (k, &s) in sel.iter().enumerate() {
                prod *= factor_values[s][class_idx[k]].conj();
            }
            val += prod;
        }
        out.push(DensitySample { angles, density: val.re, imag: val.im });
        let mut j = nprimes;
        let mut done = true;
        while j > 0 {
            j -= 1;
            sel[j] += 1;
            if sel[j] < factor_points {
                done = false;
                break;
            }
            sel[j] = 0;
        }
        if done {
            break;
        }
    }
    Ok(out)
}

/// Grid quadrature of `F_lam conj(F_mu)` against the Sato–Tate measure,
/// computed denominator-free as `A_{lam+rho} conj(A_{mu+rho}) / |W|`.
pub fn orthonormality_check(
    lam: &Coweight,
    mu: &Coweight,
    grid: usize,
) -> Result<Complex64> {
    if !lam.is_dominant() || !mu.is_dominant() {
        return Err(Error::Invalid("both classes must be dominant".into()));
    }
    if lam.n() != mu.n() {
        return Err(Error::Dim("classes must share one rank".into()));
    }
    if grid < 4 {
        return Err(Error::Invalid("grid too small".into()));
    }
    let n = lam.n();
    let rho = half_sum_positive_coroots(n);
    let a = alternating_sum(&lam.add(&rho));
    let b = alternating_sum(&mu.add(&rho));
    let step = 2.0 * std::f64::consts::PI / grid as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut idx = vec![0usize; n];
    loop {
        let t = TorusPoint::from_angles(idx.iter().map(|&k| k as f64 * step).collect())?;
        total += a.evaluate(&t) * b.evaluate(&t).conj();
        let mut j = n;
        let mut done = true;
        while j > 0 {
            j -= 1;
            idx[j] += 1;
            if idx[j] < grid {
                done = false;
                break;
            }
            idx[j] = 0;
        }
        if done {
            break;
        }
    }
    let points = (grid as f64).powi(n as i32);
    Ok(total / points / weyl_order(n))
}
