//! Machine-integer number theory shared by the residue-sum engines:
//! primality by trial division, extended gcd, modular inverses and powers,
//! and capped p-adic valuations of residues.

/// Trial-division primality, adequate for the small moduli used here.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// (g, s, t) with g = gcd(a, b) >= 0 and s*a + t*b = g.
pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, s, t) = ext_gcd(b, a.rem_euclid(b));
        (g, t, s - (a.div_euclid(b)) * t)
    }
}

/// Inverse of `a` modulo `m > 1`, if gcd(a, m) = 1.
pub fn inv_mod(a: i64, m: i64) -> Option<i64> {
    let (g, s, _) = ext_gcd(a.rem_euclid(m), m);
    if g == 1 {
        Some(s.rem_euclid(m))
    } else {
        None
    }
}

/// `base^exp mod m` with i128 intermediates.
pub fn pow_mod(base: i64, mut exp: u64, m: i64) -> i64 {
    debug_assert!(m > 0);
    let m128 = m as i128;
    let mut b = (base.rem_euclid(m)) as i128;
    let mut acc = 1i128 % m128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m128;
        }
        b = b * b % m128;
        exp >>= 1;
    }
    acc as i64
}

/// v_p(x) truncated at `cap`; the zero residue reports `cap`.
pub fn val_capped(x: i64, p: i64, cap: u32) -> u32 {
    debug_assert!(x >= 0);
    if x == 0 {
        return cap;
    }
    let mut x = x;
    let mut v = 0u32;
    while v < cap && x % p == 0 {
        x /= p;
        v += 1;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes_small() {
        let primes: Vec<u64> = (0..30).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn ext_gcd_bezout() {
        for a in -20i64..=20 {
            for b in -20i64..=20 {
                let (g, s, t) = ext_gcd(a, b);
                assert_eq!(g, s * a + t * b);
                assert!(g >= 0);
                if a != 0 || b != 0 {
                    assert_eq!(g, num_integer::gcd(a.abs(), b.abs()));
                }
            }
        }
    }

    #[test]
    fn inverses() {
        for m in [3i64, 9, 25, 49, 343] {
            for a in 1..m {
                match inv_mod(a, m) {
                    Some(i) => assert_eq!(a * i % m, 1),
                    None => assert!(num_integer::gcd(a, m) > 1),
                }
            }
        }
    }

    #[test]
    fn val_caps() {
        assert_eq!(val_capped(0, 3, 5), 5);
        assert_eq!(val_capped(18, 3, 5), 2);
        assert_eq!(val_capped(81, 3, 3), 3);
        assert_eq!(val_capped(7, 3, 5), 0);
    }
}
