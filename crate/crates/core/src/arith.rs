//! Elementary number theory on machine integers.

use num_integer::Integer;

/// Least nonnegative residue of `a` mod `m`.
#[inline]
pub fn rem(a: i64, m: i64) -> i64 {
    a.rem_euclid(m)
}

/// Least nonnegative residue of an `i128` mod `m`.
#[inline]
pub fn rem128(a: i128, m: i64) -> i64 {
    a.rem_euclid(m as i128) as i64
}

pub fn gcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

pub fn mul_mod(a: i64, b: i64, m: i64) -> i64 {
    rem128(a as i128 * b as i128, m)
}

pub fn pow_mod(mut base: i64, mut exp: u64, m: i64) -> i64 {
    if m == 1 {
        return 0;
    }
    base = rem(base, m);
    let mut acc = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` mod `m`, if it exists.
pub fn inv_mod(a: i64, m: i64) -> Option<i64> {
    if m == 1 {
        return Some(0);
    }
    let e = Integer::extended_gcd(&rem(a, m), &m);
    (e.gcd == 1).then(|| rem(e.x, m))
}

/// Jacobi symbol (a/n) for odd positive n.
pub fn jacobi(a: i64, n: i64) -> i32 {
    assert!(n > 0 && n % 2 == 1, "jacobi needs odd positive modulus");
    let mut a = rem(a, n);
    let mut n = n;
    let mut t = 1;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let r = n % 8;
            if r == 3 || r == 5 {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// Prime factorization as (prime, exponent) pairs, ascending.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && factorize(n) == vec![(n, 1)]
}

pub fn primes_up_to(n: u64) -> Vec<u64> {
    (2..=n).filter(|&p| is_prime(p)).collect()
}

pub fn mobius(n: u64) -> i64 {
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

/// Positive divisors of `n`, ascending.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factorize(n) {
        let len = ds.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                ds.push(ds[i] * pk);
            }
        }
    }
    ds.sort_unstable();
    ds
}

/// Solve x ≡ a1 (m1), x ≡ a2 (m2) for coprime moduli; result in [0, m1·m2).
pub fn crt(a1: i64, m1: i64, a2: i64, m2: i64) -> i64 {
    let inv = inv_mod(m1, m2).expect("crt needs coprime moduli");
    let k = mul_mod(rem(a2 - a1, m2), inv, m2);
    rem(a1 + m1 * k, m1 * m2)
}
