//! Exact payoff arithmetic for the symmetric 2x2 game.
//!
//! A [`PayoffMatrix`] stores `(p1, p2, p3, p4)` as integer numerators over one
//! common positive denominator, so every payoff a node can earn is an integer
//! multiple of `1 / den` and all comparisons are exact integer comparisons.
//!
//! | row \ col | C  | D  |
//! |-----------|----|----|
//! | C         | p1 | p2 |
//! | D         | p3 | p4 |

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Parses `"3"`, `"-0.25"`, `"1/3"` or `"-7/20"` into an exact rational.
pub fn parse_rational(input: &str) -> Result<Rational> {
    let err = || Error::ParseRational { input: input.to_string() };
    let s = input.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n).map_err(|_| err())?;
        let d = parse_rational(d).map_err(|_| err())?;
        if *d.numer() == 0 {
            return Err(err());
        }
        return Ok(n / d);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    let digits_ok = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !digits_ok(int_part) || !digits_ok(frac_part) || frac_part.len() > 15 {
        return Err(err());
    }
    let mut numer: i64 = 0;
    for b in int_part.bytes().chain(frac_part.bytes()) {
        numer = numer
            .checked_mul(10)
            .and_then(|v| v.checked_add((b - b'0') as i64))
            .ok_or_else(err)?;
    }
    let denom = 10i64.pow(frac_part.len() as u32);
    let r = Rational::new(numer, denom);
    Ok(if neg { -r } else { r })
}

/// Formats a rational losslessly: `"3"`, `"-1/5"`.
pub fn format_rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A payoff value in units of `1 / den` of its matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Payoff(pub i64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GameClass {
    PrisonersDilemma,
    Snowdrift,
    StagHunt,
    Other,
}

impl fmt::Display for GameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GameClass::PrisonersDilemma => "prisoners-dilemma",
            GameClass::Snowdrift => "snowdrift",
            GameClass::StagHunt => "stag-hunt",
            GameClass::Other => "other",
        };
        f.write_str(s)
    }
}

/// Exact convergence and control conditions on `(p1, p2, p3, p4)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConditionReport {
    /// `p3 > p1 > p4 > p2`.
    pub thm1_ok: bool,
    /// Snowdrift ordering with `p1 + p2 < p3 + p4` and `4 p2 < p3 + 3 p4`.
    pub thm2_ok: bool,
    /// Stag-hunt ordering with `p1 + p2 > 2 p3`.
    pub thm3_ok: bool,
    /// Cooperator payoffs with a defector neighbor never equal defector payoffs
    /// with a cooperator neighbor.
    pub cor1_ok: bool,
    /// Prisoner's-dilemma ordering with `2 p1 + 2 p2 > p3 + 3 p4`.
    pub thm4_i_ok: bool,
    /// Snowdrift ordering with `2p3 + 2p4 > 2p1 + 2p2 > p3 + 3p4 > 4p2`.
    pub thm4_ii_ok: bool,
}

impl ConditionReport {
    /// Conditions under which every initial state converges to consensus.
    pub fn consensus_ok(&self) -> bool {
        (self.thm1_ok || self.thm2_ok) && self.cor1_ok
    }

    pub fn rect_control_ok(&self) -> bool {
        (self.thm4_i_ok || self.thm4_ii_ok) && self.cor1_ok
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "thm1_ok={} thm2_ok={} thm3_ok={} cor1_ok={} thm4_i_ok={} thm4_ii_ok={}",
            self.thm1_ok, self.thm2_ok, self.thm3_ok, self.cor1_ok, self.thm4_i_ok, self.thm4_ii_ok
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PayoffMatrix {
    num: [i64; 4],
    den: i64,
}

impl PayoffMatrix {
    pub fn new(p1: Rational, p2: Rational, p3: Rational, p4: Rational) -> Result<Self> {
        let entries = [p1, p2, p3, p4];
        let mut den: i64 = 1;
        for e in &entries {
            den = den.lcm(e.denom());
            // keep 4 * |entry| * den comfortably inside i64
            if den > 1 << 40 {
                return Err(Error::Overflow);
            }
        }
        let mut num = [0i64; 4];
        for (slot, e) in num.iter_mut().zip(entries.iter()) {
            let v = e.numer().checked_mul(den / e.denom()).ok_or(Error::Overflow)?;
            if v.abs() > 1 << 56 {
                return Err(Error::Overflow);
            }
            *slot = v;
        }
        Ok(Self { num, den })
    }

    pub fn from_integers(p1: i64, p2: i64, p3: i64, p4: i64) -> Result<Self> {
        Self::new(p1.into(), p2.into(), p3.into(), p4.into())
    }

    /// Parses four entries given as decimal or ratio strings.
    pub fn parse(entries: [&str; 4]) -> Result<Self> {
        let [a, b, c, d] = entries;
        Self::new(parse_rational(a)?, parse_rational(b)?, parse_rational(c)?, parse_rational(d)?)
    }

    /// `(1 - c/2, 1 - c, 1, 0)` for `0 < c < 1`.
    pub fn snowdrift_classic(c: Rational) -> Result<Self> {
        check_open_unit("snowdrift", c)?;
        let one = Rational::from(1);
        Self::new(one - c / 2, one - c, one, Rational::from(0))
    }

    /// `(b/2, 0, b, (b - 1)/2)` for `0 < b < 1`.
    pub fn hawk_dove(b: Rational) -> Result<Self> {
        check_open_unit("hawk-dove", b)?;
        let zero = Rational::from(0);
        Self::new(b / 2, zero, b, (b - 1) / 2)
    }

    /// `(b/2, 0, b, -1)` for `b > 0`.
    pub fn chicken(b: Rational) -> Result<Self> {
        if b <= Rational::from(0) {
            return Err(Error::ParameterOutOfRange {
                family: "chicken",
                value: format_rational(&b),
                range: "b > 0",
            });
        }
        Self::new(b / 2, Rational::from(0), b, Rational::from(-1))
    }

    /// `(1, -r, r, 0)` for `0 < r < 1`.
    pub fn stag_hunt(r: Rational) -> Result<Self> {
        check_open_unit("stag-hunt", r)?;
        Self::new(Rational::from(1), -r, r, Rational::from(0))
    }

    /// Builds a family member from its name and parameter string.
    pub fn family(name: &str, param: &str) -> Result<Self> {
        let x = parse_rational(param)?;
        match name {
            "snowdrift" | "snowdrift-classic" | "snowdrift_classic" => Self::snowdrift_classic(x),
            "hawk-dove" | "hawk_dove" | "hawkdove" => Self::hawk_dove(x),
            "chicken" => Self::chicken(x),
            "stag-hunt" | "stag_hunt" | "staghunt" => Self::stag_hunt(x),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    /// Entry `p_k` for `k` in `1..=4`.
    pub fn p(&self, k: usize) -> Rational {
        Rational::new(self.num[k - 1], self.den)
    }

    pub fn entries(&self) -> [Rational; 4] {
        [self.p(1), self.p(2), self.p(3), self.p(4)]
    }

    /// Numerators over [`PayoffMatrix::denominator`].
    pub fn numerators(&self) -> [i64; 4] {
        self.num
    }

    pub fn denominator(&self) -> i64 {
        self.den
    }

    pub fn to_rational(&self, p: Payoff) -> Rational {
        Rational::new(p.0, self.den)
    }

    pub fn to_f64(&self, p: Payoff) -> f64 {
        p.0 as f64 / self.den as f64
    }

    /// Payoff of a cooperator (`cooperates = true`) or defector with `k`
    /// cooperating neighbors.
    #[inline]
    pub fn payoff(&self, cooperates: bool, k: u32) -> Payoff {
        let k = k as i64;
        let [p1, p2, p3, p4] = self.num;
        if cooperates {
            Payoff(k * p1 + (4 - k) * p2)
        } else {
            Payoff(k * p3 + (4 - k) * p4)
        }
    }

    /// Payoff table indexed by `[strategy][k]` with strategy 0 = C, 1 = D.
    pub fn payoff_table(&self) -> [[i64; 5]; 2] {
        let mut t = [[0i64; 5]; 2];
        for k in 0..5u32 {
            t[0][k as usize] = self.payoff(true, k).0;
            t[1][k as usize] = self.payoff(false, k).0;
        }
        t
    }

    /// Every payoff value a node can earn.
    pub fn achievable_payoffs(&self) -> Vec<Payoff> {
        let mut v: Vec<Payoff> =
            (0..5).flat_map(|k| [self.payoff(true, k), self.payoff(false, k)]).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Every strictly positive payoff difference that can arise between two nodes.
    pub fn positive_gaps(&self) -> Vec<Payoff> {
        let vals = self.achievable_payoffs();
        let mut gaps: Vec<Payoff> = vals
            .iter()
            .flat_map(|a| vals.iter().filter(move |b| *b > a).map(move |b| Payoff(b.0 - a.0)))
            .collect();
        gaps.sort();
        gaps.dedup();
        gaps
    }

    pub fn classify(&self) -> GameClass {
        let [p1, p2, p3, p4] = self.num;
        if p3 > p1 && p1 > p4 && p4 > p2 {
            GameClass::PrisonersDilemma
        } else if p3 > p1 && p1 > p2 && p2 > p4 {
            GameClass::Snowdrift
        } else if p1 > p3 && p3 > p4 && p4 > p2 {
            GameClass::StagHunt
        } else {
            GameClass::Other
        }
    }

    pub fn check_conditions(&self) -> ConditionReport {
        let [p1, p2, p3, p4] = self.num;
        let class = self.classify();
        let pd = class == GameClass::PrisonersDilemma;
        let sd = class == GameClass::Snowdrift;
        let sh = class == GameClass::StagHunt;
        let coop_mixed = [p1 + 3 * p2, 2 * p1 + 2 * p2, 3 * p1 + p2];
        let def_mixed = [p3 + 3 * p4, 2 * p3 + 2 * p4];
        ConditionReport {
            thm1_ok: pd,
            thm2_ok: sd && p1 + p2 < p3 + p4 && 4 * p2 < p3 + 3 * p4,
            thm3_ok: sh && p1 + p2 > 2 * p3,
            cor1_ok: coop_mixed.iter().all(|c| !def_mixed.contains(c)),
            thm4_i_ok: pd && 2 * p1 + 2 * p2 > p3 + 3 * p4,
            thm4_ii_ok: sd
                && 2 * p3 + 2 * p4 > 2 * p1 + 2 * p2
                && 2 * p1 + 2 * p2 > p3 + 3 * p4
                && p3 + 3 * p4 > 4 * p2,
        }
    }
}

fn check_open_unit(family: &'static str, x: Rational) -> Result<()> {
    if x <= Rational::from(0) || x >= Rational::from(1) {
        return Err(Error::ParameterOutOfRange {
            family,
            value: format_rational(&x),
            range: "0 < x < 1",
        });
    }
    Ok(())
}

impl fmt::Display for PayoffMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.entries().map(|r| format_rational(&r));
        write!(f, "({}, {}, {}, {})", e[0], e[1], e[2], e[3])
    }
}

impl FromStr for PayoffMatrix {
    type Err = Error;

    /// Accepts `"p1,p2,p3,p4"`, optionally wrapped in parentheses.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::ParseRational { input: s.to_string() });
        }
        Self::parse([parts[0], parts[1], parts[2], parts[3]])
    }
}

impl Serialize for PayoffMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let e = self.entries().map(|r| format_rational(&r));
        e.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PayoffMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let e = <[String; 4]>::deserialize(deserializer)?;
        Self::parse([&e[0], &e[1], &e[2], &e[3]]).map_err(serde::de::Error::custom)
    }
}
