//! Exact scalars.
//!
//! Every probability, payment and utility in the crate is a
//! [`Rational`]: an arbitrary-precision fraction kept in lowest terms
//! with a positive denominator. Text form is always `p/q`, including
//! integers (`-1/1`), so serialized reports are unambiguous.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `"p/q"`, `"n"` or a finite decimal such as `"0.25"`.
pub fn parse(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::input("empty rational literal"));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("bad numerator in {text:?}")))?;
        let d: BigInt = d
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("bad denominator in {text:?}")))?;
        if d.is_zero() {
            return Err(Error::input(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.trim_start().starts_with('-');
        let digits = frac.len() as u32;
        if digits == 0 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::input(format!("bad decimal literal {text:?}")));
        }
        let w: BigInt = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            whole
                .parse()
                .map_err(|_| Error::input(format!("bad decimal literal {text:?}")))?
        };
        let f: BigInt = frac.parse().expect("digits checked");
        let scale = BigInt::from(10u32).pow(digits);
        let magnitude = w.abs() * &scale + f;
        let numer = if negative { -magnitude } else { magnitude };
        return Ok(Rational::new(numer, scale));
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::input(format!("bad rational literal {text:?}")))?;
    Ok(Rational::from_integer(n))
}

/// Canonical `p/q` text.
pub fn format(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn format_vec(v: &[Rational]) -> Vec<String> {
    v.iter().map(format).collect()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero() && !y.is_zero())
        .fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

pub fn sum(v: &[Rational]) -> Rational {
    v.iter().fold(Rational::zero(), |acc, x| acc + x)
}

/// Scales a nonzero vector to the primitive integer vector pointing the
/// same way, then flips it so the first nonzero entry is positive.
pub fn primitive_direction(v: &[Rational]) -> Vec<Rational> {
    use num_integer::Integer;
    let lcm = v
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Rational::from_integer(lcm.clone())).to_integer()).collect();
    let gcd = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if gcd.is_zero() {
        return v.to_vec();
    }
    let flip = ints.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative());
    ints.into_iter()
        .map(|x| {
            let y = Rational::from_integer(x / &gcd);
            if flip {
                -y
            } else {
                y
            }
        })
        .collect()
}
