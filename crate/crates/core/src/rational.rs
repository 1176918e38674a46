//! Exact rationals used for assignment fractions, loads and cost formulas.

use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

pub fn int(n: i128) -> Rational {
    Rational::from_integer(n)
}

pub fn frac(num: i128, den: i128) -> Rational {
    Rational::new(num, den)
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"3"`, `"3/2"` or `"1.5"`.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidParameter(format!("cannot parse {s:?} as a rational"));
    if let Some((n, d)) = s.split_once('/') {
        let n = i128::from_str(n.trim()).map_err(|_| bad())?;
        let d = i128::from_str(d.trim()).map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(frac(n, d));
    }
    if let Some((whole, fraction)) = s.split_once('.') {
        let neg = whole.starts_with('-');
        let whole = if whole.is_empty() || whole == "-" {
            0
        } else {
            i128::from_str(whole).map_err(|_| bad())?
        };
        if fraction.is_empty()
            || !fraction.bytes().all(|b| b.is_ascii_digit())
            || fraction.len() > 30
        {
            return Err(bad());
        }
        let den = 10i128.pow(fraction.len() as u32);
        let num = i128::from_str(fraction).map_err(|_| bad())?;
        let mag = frac(whole.abs() * den + num, den);
        return Ok(if neg { -mag } else { mag });
    }
    Ok(int(i128::from_str(s).map_err(|_| bad())?))
}

/// Least common multiple of the denominators, or 1 for an empty list.
pub fn lcm_of_denominators<'a>(xs: impl IntoIterator<Item = &'a Rational>) -> i128 {
    xs.into_iter()
        .filter(|x| !x.is_zero())
        .fold(1, |acc, x| acc.lcm(x.denom()))
}

/// Formats as `n/d`, or `n` when integral.
pub fn display(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Serde as `"n/d"` strings.
pub mod serde_str {
    use super::{display, parse, Rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&display(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(D::Error::custom)
    }
}

/// Serde for lists of rationals as `"n/d"` strings.
pub mod serde_vec {
    use super::{display, parse, Rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(display))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Rational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|x| parse(x).map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsing() {
        assert_eq!(parse("3").unwrap(), int(3));
        assert_eq!(parse("3/2").unwrap(), frac(3, 2));
        assert_eq!(parse("1.5").unwrap(), frac(3, 2));
        assert_eq!(parse(" 0.25 ").unwrap(), frac(1, 4));
        assert_eq!(parse("-0.5").unwrap(), frac(-1, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
        assert!(parse("1.").is_err());
    }

    #[test]
    fn lcm() {
        let xs = [frac(1, 4), frac(1, 6), int(0)];
        assert_eq!(lcm_of_denominators(&xs), 12);
    }
}
