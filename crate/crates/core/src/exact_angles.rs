//! Exact angle classification for lattice triples.
//!
//! The angle at `vertex` between rays to `a` and `b` is encoded by the sign
//! of `u·v` together with the reduced fraction `(u·v)^2 / (|u|^2 |v|^2)`,
//! where `u = a - vertex` and `v = b - vertex`. Two configurations have the
//! same angle iff their keys are equal.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::gcd_u128;

/// Canonical exact encoding of an angle in `[0, π]`.
///
/// Field order gives the lexicographic `(sign, num, den)` ordering used for
/// tie breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AngleKey {
    sign: i8,
    num: u128,
    den: u128,
}

impl AngleKey {
    /// θ = π/2
    pub const RIGHT: AngleKey = AngleKey {
        sign: 0,
        num: 0,
        den: 1,
    };
    /// θ = 0
    pub const ZERO: AngleKey = AngleKey {
        sign: 1,
        num: 1,
        den: 1,
    };
    /// θ = π
    pub const STRAIGHT: AngleKey = AngleKey {
        sign: -1,
        num: 1,
        den: 1,
    };

    /// Builds a key from an unreduced cos² fraction, checking invariants.
    pub fn new(sign: i8, num: u128, den: u128) -> Result<Self> {
        if !(-1..=1).contains(&sign) || den == 0 || num > den || ((sign == 0) != (num == 0)) {
            return Err(Error::Parse(format!(
                "invalid angle key {sign}:{num}/{den}"
            )));
        }
        Ok(Self::reduced(sign, num, den))
    }

    fn reduced(sign: i8, num: u128, den: u128) -> Self {
        if num == 0 {
            return Self::RIGHT;
        }
        let g = gcd_u128(num, den);
        AngleKey {
            sign,
            num: num / g,
            den: den / g,
        }
    }

    /// Key from the dot product and the two squared norms of a ray pair.
    pub fn from_dot_and_norms(dot: i128, norm_u: u128, norm_v: u128) -> Result<Self> {
        if norm_u == 0 || norm_v == 0 {
            return Err(Error::DegenerateVertex);
        }
        let num = dot.unsigned_abs().checked_pow(2).ok_or(Error::Overflow)?;
        let den = norm_u.checked_mul(norm_v).ok_or(Error::Overflow)?;
        Ok(Self::reduced(dot.signum() as i8, num, den))
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn num(&self) -> u128 {
        self.num
    }

    pub fn den(&self) -> u128 {
        self.den
    }

    pub fn is_right(&self) -> bool {
        self.sign == 0
    }

    /// `sign · sqrt(num/den)`.
    pub fn cosine(&self) -> f64 {
        if self.num == self.den {
            return self.sign as f64;
        }
        self.sign as f64 * (self.num as f64 / self.den as f64).sqrt()
    }
}

/// Exact comparison of `a/b` and `c/d` (nonzero denominators) by
/// continued-fraction expansion, free of overflow.
fn cmp_fraction(mut a: u128, mut b: u128, mut c: u128, mut d: u128) -> Ordering {
    let mut flipped = false;
    loop {
        let (q1, r1) = (a / b, a % b);
        let (q2, r2) = (c / d, c % d);
        let ord = match q1.cmp(&q2) {
            Ordering::Equal => match (r1 == 0, r2 == 0) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Less,
                (false, true) => Ordering::Greater,
                (false, false) => {
                    (a, b, c, d) = (b, r1, d, r2);
                    flipped = !flipped;
                    continue;
                }
            },
            o => o,
        };
        return if flipped { ord.reverse() } else { ord };
    }
}

/// Orders keys by cosine: obtuse keys first, then right, then acute.
impl Ord for AngleKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sign.cmp(&other.sign).then_with(|| {
            let by_square = cmp_fraction(self.num, self.den, other.num, other.den);
            if self.sign < 0 {
                by_square.reverse()
            } else {
                by_square
            }
        })
    }
}

impl PartialOrd for AngleKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for AngleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            1 => '+',
            -1 => '-',
            _ => '0',
        };
        write!(f, "{s}:{}/{}", self.num, self.den)
    }
}

impl FromStr for AngleKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid angle key {s:?}"));
        let (sign, frac) = s.split_once(':').ok_or_else(bad)?;
        let (num, den) = frac.split_once('/').ok_or_else(bad)?;
        let sign = match sign {
            "+" => 1,
            "-" => -1,
            "0" => 0,
            _ => return Err(bad()),
        };
        let num: u128 = num.parse().map_err(|_| bad())?;
        let den: u128 = den.parse().map_err(|_| bad())?;
        let key = AngleKey::new(sign, num, den)?;
        if key.num != num || key.den != den {
            return Err(Error::Parse(format!("angle key {s:?} is not reduced")));
        }
        Ok(key)
    }
}

impl Serialize for AngleKey {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AngleKey {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The two rays `u = a - vertex`, `v = b - vertex` of a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RayPair {
    pub u: Vec<i64>,
    pub v: Vec<i64>,
}

impl RayPair {
    pub fn new(vertex: &[i64], a: &[i64], b: &[i64]) -> Result<Self> {
        let expected = vertex.len();
        for p in [a, b] {
            if p.len() != expected {
                return Err(Error::Dimension {
                    expected,
                    got: p.len(),
                });
            }
        }
        let u = difference(a, vertex)?;
        let v = difference(b, vertex)?;
        if u.iter().all(|&c| c == 0) || v.iter().all(|&c| c == 0) {
            return Err(Error::DegenerateVertex);
        }
        Ok(Self { u, v })
    }

    pub fn dot(&self) -> Result<i128> {
        dot(&self.u, &self.v)
    }

    pub fn key(&self) -> Result<AngleKey> {
        AngleKey::from_dot_and_norms(self.dot()?, squared_norm(&self.u)?, squared_norm(&self.v)?)
    }
}

fn difference(a: &[i64], b: &[i64]) -> Result<Vec<i64>> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x.checked_sub(y).ok_or(Error::Overflow))
        .collect()
}

/// Exact `Σ v_i^2`.
pub fn squared_norm(v: &[i64]) -> Result<u128> {
    v.iter().try_fold(0u128, |acc, &c| {
        let sq = (c.unsigned_abs() as u128) * (c.unsigned_abs() as u128);
        acc.checked_add(sq).ok_or(Error::Overflow)
    })
}

/// Exact `u·v`.
pub fn dot(u: &[i64], v: &[i64]) -> Result<i128> {
    u.iter().zip(v).try_fold(0i128, |acc, (&x, &y)| {
        acc.checked_add(x as i128 * y as i128)
            .ok_or(Error::Overflow)
    })
}

pub fn angle_key(vertex: &[i64], a: &[i64], b: &[i64]) -> Result<AngleKey> {
    RayPair::new(vertex, a, b)?.key()
}

/// `(a - vertex)·(b - vertex) == 0`, exactly.
pub fn is_right(vertex: &[i64], a: &[i64], b: &[i64]) -> Result<bool> {
    Ok(RayPair::new(vertex, a, b)?.dot()? == 0)
}

pub fn cosine_value(vertex: &[i64], a: &[i64], b: &[i64]) -> Result<f64> {
    Ok(angle_key(vertex, a, b)?.cosine())
}

pub fn angle_radians(key: &AngleKey) -> f64 {
    key.cosine().clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn squared_norm_examples() {
        assert_eq!(squared_norm(&[3, 4]).unwrap(), 25);
        assert_eq!(squared_norm(&[0, 0]).unwrap(), 0);
        assert_eq!(squared_norm(&[1, 1, 1, 1]).unwrap(), 4);
        assert_eq!(squared_norm(&[i64::MIN; 5]), Err(Error::Overflow));
    }

    #[test]
    fn key_examples() {
        let k = angle_key(&[0, 0], &[1, 0], &[0, 1]).unwrap();
        assert_eq!(k, AngleKey::RIGHT);
        assert_eq!(k.to_string(), "0:0/1");
        let k = angle_key(&[0, 0], &[1, 0], &[1, 1]).unwrap();
        assert_eq!((k.sign(), k.num(), k.den()), (1, 1, 2));
        assert_eq!(k.to_string(), "+:1/2");
        assert_eq!(angle_key(&[0, 0], &[2, 0], &[2, 2]).unwrap(), k);
        assert_eq!(
            angle_key(&[0, 0], &[1, 0], &[1, 0]).unwrap(),
            AngleKey::ZERO
        );
        assert_eq!(
            angle_key(&[1, 0], &[0, 0], &[2, 0]).unwrap(),
            AngleKey::STRAIGHT
        );
    }

    #[test]
    fn degenerate_vertex() {
        assert_eq!(
            angle_key(&[0, 0], &[0, 0], &[1, 1]),
            Err(Error::DegenerateVertex)
        );
        assert_eq!(
            is_right(&[1, 1], &[0, 0], &[1, 1]),
            Err(Error::DegenerateVertex)
        );
        assert!(matches!(
            angle_key(&[0, 0], &[1], &[1, 1]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn right_angle_examples() {
        assert!(is_right(&[0, 0], &[1, 0], &[0, 1]).unwrap());
        assert!(!is_right(&[0, 0], &[1, 0], &[1, 1]).unwrap());
        assert!(is_right(&[1, 0], &[0, 0], &[1, 1]).unwrap());
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_value(&[0, 0], &[1, 0], &[0, 1]).unwrap(), 0.0);
        let c = cosine_value(&[0, 0], &[1, 0], &[1, 1]).unwrap();
        assert!((c - 0.7071067811865476).abs() < 1e-12);
        assert_eq!(AngleKey::STRAIGHT.cosine(), -1.0);
    }

    #[test]
    fn radians_examples() {
        assert!((angle_radians(&AngleKey::RIGHT) - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(angle_radians(&AngleKey::ZERO), 0.0);
        let k = AngleKey::new(-1, 1, 2).unwrap();
        assert!((angle_radians(&k) - 3.0 * FRAC_PI_4).abs() < 1e-12);
        assert!((angle_radians(&AngleKey::STRAIGHT) - PI).abs() < 1e-15);
    }

    #[test]
    fn key_string_parsing() {
        for s in ["0:0/1", "+:1/2", "-:1/1", "+:9/25"] {
            assert_eq!(s.parse::<AngleKey>().unwrap().to_string(), s);
        }
        for s in ["+:2/4", "0:1/2", "+:0/1", "x:1/2", "+:3/2", "+1/2"] {
            assert!(s.parse::<AngleKey>().is_err(), "{s}");
        }
        let json = serde_json::to_string(&AngleKey::RIGHT).unwrap();
        assert_eq!(json, "\"0:0/1\"");
        let back: AngleKey = serde_json::from_str(&json).unwrap();
        assert_eq!(back, AngleKey::RIGHT);
    }

    #[test]
    fn ordering_is_sign_then_fraction() {
        let a = AngleKey::new(-1, 1, 2).unwrap();
        let b = AngleKey::RIGHT;
        let c = AngleKey::new(1, 1, 4).unwrap();
        let d = AngleKey::new(1, 1, 2).unwrap();
        assert!(a < b && b < c && c < d);
        assert!(AngleKey::STRAIGHT < a && d < AngleKey::ZERO);
        let e = AngleKey::new(1, 49, 50).unwrap();
        let f = AngleKey::new(1, 48, 49).unwrap();
        assert!(f < e);
    }

    fn triple(d: usize) -> impl Strategy<Value = (Vec<i64>, Vec<i64>, Vec<i64>)> {
        let c = || prop::collection::vec(-50i64..50, d);
        (c(), c(), c()).prop_filter("distinct from vertex", |(v, a, b)| v != a && v != b)
    }

    proptest! {
        #[test]
        fn order_matches_cosine(sa in -1i8..=1, na in 0u128..1000, da in 1u128..1000,
                                sb in -1i8..=1, nb in 0u128..1000, db in 1u128..1000) {
            let mk = |s: i8, n: u128, d: u128| {
                if s == 0 { Some(AngleKey::RIGHT) } else if n == 0 || n > d { None } else { AngleKey::new(s, n, d).ok() }
            };
            if let (Some(a), Some(b)) = (mk(sa, na, da), mk(sb, nb, db)) {
                let exact = a.cmp(&b);
                let (x, y) = (a.cosine(), b.cosine());
                if (x - y).abs() > 1e-9 {
                    prop_assert_eq!(exact, x.partial_cmp(&y).unwrap());
                }
                prop_assert_eq!(exact == Ordering::Equal, a == b);
            }
        }

        #[test]
        fn symmetric_in_rays((v, a, b) in triple(3)) {
            prop_assert_eq!(angle_key(&v, &a, &b).unwrap(), angle_key(&v, &b, &a).unwrap());
        }

        #[test]
        fn isometry_invariant(
            (v, a, b) in triple(3),
            perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
            flips in prop::collection::vec(any::<bool>(), 3),
            shift in prop::collection::vec(-100i64..100, 3),
        ) {
            let map = |p: &[i64]| -> Vec<i64> {
                perm.iter()
                    .zip(&flips)
                    .zip(&shift)
                    .map(|((&i, &f), &t)| if f { -p[i] } else { p[i] } + t)
                    .collect()
            };
            prop_assert_eq!(
                angle_key(&v, &a, &b).unwrap(),
                angle_key(&map(&v), &map(&a), &map(&b)).unwrap()
            );
        }

        #[test]
        fn scale_invariant((v, a, b) in triple(4), lambda in 1i64..20) {
            let stretch = |p: &[i64]| -> Vec<i64> {
                p.iter().zip(&v).map(|(&c, &o)| o + lambda * (c - o)).collect()
            };
            prop_assert_eq!(
                angle_key(&v, &a, &b).unwrap(),
                angle_key(&v, &stretch(&a), &stretch(&b)).unwrap()
            );
        }

        #[test]
        fn right_iff_sign_zero((v, a, b) in triple(2)) {
            prop_assert_eq!(is_right(&v, &a, &b).unwrap(), angle_key(&v, &a, &b).unwrap().sign() == 0);
        }

        #[test]
        fn cosine_matches_float(
            (v, a, b) in (
                prop::collection::vec(-1_000_000i64..1_000_000, 3),
                prop::collection::vec(-1_000_000i64..1_000_000, 3),
                prop::collection::vec(-1_000_000i64..1_000_000, 3),
            ).prop_filter("distinct", |(v, a, b)| v != a && v != b)
        ) {
            let u: Vec<f64> = a.iter().zip(&v).map(|(x, y)| (x - y) as f64).collect();
            let w: Vec<f64> = b.iter().zip(&v).map(|(x, y)| (x - y) as f64).collect();
            let d: f64 = u.iter().zip(&w).map(|(x, y)| x * y).sum();
            let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nw: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let c = cosine_value(&v, &a, &b).unwrap();
            prop_assert!((c - d / (nu * nw)).abs() < 1e-9);
        }
    }
}
