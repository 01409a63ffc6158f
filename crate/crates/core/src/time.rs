//! Exact time arithmetic.
//!
//! Every instant in a plan is a non-negative rational number of time units
//! or `+inf`. Arithmetic never rounds: `Ratio<i64>` is gcd-normalized after
//! each operation and overflow panics instead of wrapping. Instances are
//! screened at load time (see [`MAX_DENOMINATOR`]) so that the panic is
//! unreachable for anything the loaders accept.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Rational = Ratio<i64>;

/// Largest common denominator an instance may use.
pub const MAX_DENOMINATOR: i64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("negative time {0}")]
    Negative(String),
    #[error("cannot parse time from {0:?}")]
    Parse(String),
    #[error("invalid interval {0}")]
    InvalidInterval(String),
    #[error("intervals {0} and {1} do not overlap")]
    Disjoint(String, String),
    #[error("time arithmetic overflow: {0}")]
    Overflow(String),
}

/// A point on the time axis: a non-negative rational or infinity.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Time {
    Finite(Rational),
    Infinity,
}

impl Time {
    pub const ZERO: Time = Time::Finite(Ratio::new_raw(0, 1));
    pub const INFINITY: Time = Time::Infinity;

    pub fn new(numer: i64, denom: i64) -> Time {
        Time::try_from_rational(Ratio::new(numer, denom)).expect("negative time")
    }

    pub fn from_int(value: i64) -> Time {
        Time::new(value, 1)
    }

    pub fn try_from_rational(value: Rational) -> Result<Time, TimeError> {
        if value < Rational::zero() {
            Err(TimeError::Negative(value.to_string()))
        } else {
            Ok(Time::Finite(value))
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Time::Finite(_))
    }

    pub fn finite(&self) -> Option<Rational> {
        match self {
            Time::Finite(r) => Some(*r),
            Time::Infinity => None,
        }
    }

    /// Unwraps a finite value; panics on infinity.
    pub fn value(&self) -> Rational {
        self.finite().expect("infinite time has no finite value")
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Time::Finite(r) => r.to_f64().unwrap_or(f64::NAN),
            Time::Infinity => f64::INFINITY,
        }
    }

    pub fn checked_add(self, rhs: Time) -> Result<Time, TimeError> {
        match (self, rhs) {
            (Time::Finite(a), Time::Finite(b)) => a
                .checked_add(&b)
                .map(Time::Finite)
                .ok_or_else(|| TimeError::Overflow(format!("{a} + {b}"))),
            _ => Ok(Time::Infinity),
        }
    }

    /// `self - rhs`, or `None` when the result would be negative or the
    /// subtraction is `finite - inf`.
    pub fn checked_sub(self, rhs: Time) -> Option<Time> {
        match (self, rhs) {
            (Time::Infinity, Time::Finite(_)) => Some(Time::Infinity),
            (_, Time::Infinity) => None,
            (Time::Finite(a), Time::Finite(b)) => {
                let d = a.checked_sub(&b)?;
                (d >= Rational::zero()).then_some(Time::Finite(d))
            }
        }
    }

    /// `max(self - rhs, 0)`.
    pub fn saturating_sub(self, rhs: Time) -> Time {
        self.checked_sub(rhs).unwrap_or(Time::ZERO)
    }

    /// Exact decimal rendering with six fractional digits (display only).
    pub fn decimal(&self) -> String {
        match self {
            Time::Infinity => "inf".to_string(),
            Time::Finite(r) => {
                let scaled = (*r * Ratio::from_integer(1_000_000)).round().to_integer();
                let (int, frac) = scaled.div_rem(&1_000_000);
                format!("{int}.{frac:06}")
            }
        }
    }
}

impl Default for Time {
    fn default() -> Self {
        Time::ZERO
    }
}

impl From<Rational> for Time {
    fn from(value: Rational) -> Self {
        Time::try_from_rational(value).expect("negative time")
    }
}

impl Add for Time {
    type Output = Time;
    fn add(self, rhs: Time) -> Time {
        match self.checked_add(rhs) {
            Ok(t) => t,
            Err(e) => panic!("{e}"),
        }
    }
}

impl Sub for Time {
    type Output = Time;
    fn sub(self, rhs: Time) -> Time {
        self.checked_sub(rhs)
            .unwrap_or_else(|| panic!("time subtraction {self} - {rhs} is negative or undefined"))
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Time::Finite(r) => write!(f, "{r}"),
            Time::Infinity => f.write_str("inf"),
        }
    }
}

impl fmt::Debug for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Time {
    type Err = TimeError;

    /// Accepts `inf`, integers, `p/q` fractions and finite decimals (`2.3`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || TimeError::Parse(s.to_string());
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Time::Infinity);
        }
        let value = if let Some((p, q)) = s.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| err())?;
            let q: i64 = q.trim().parse().map_err(|_| err())?;
            if q == 0 {
                return Err(err());
            }
            Ratio::new(p, q)
        } else if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let denom = 10i64.pow(frac.len() as u32);
            let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| err())? };
            let frac: i64 = frac.parse().map_err(|_| err())?;
            Ratio::new(int * denom + frac, denom)
        } else {
            Ratio::from_integer(s.parse().map_err(|_| err())?)
        };
        Time::try_from_rational(value)
    }
}

impl Serialize for Time {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Time {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Lower end of an interval, ordered so that "starts earlier" is smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Lower {
    at: Time,
    closed: bool,
}

impl Ord for Lower {
    fn cmp(&self, other: &Self) -> Ordering {
        // A closed bound at t starts before an open one at t.
        self.at.cmp(&other.at).then(other.closed.cmp(&self.closed))
    }
}

impl PartialOrd for Lower {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Upper end of an interval, ordered so that "ends earlier" is smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Upper {
    at: Time,
    closed: bool,
}

impl Ord for Upper {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at.cmp(&other.at).then(self.closed.cmp(&other.closed))
    }
}

impl PartialOrd for Upper {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A non-empty interval of time with independently open or closed ends.
///
/// Either `lo < hi`, or `lo == hi` with both ends closed (a single point).
/// An infinite upper end is always open.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Time,
    hi: Time,
    lo_closed: bool,
    hi_closed: bool,
}

impl Interval {
    pub fn new(lo: Time, hi: Time, lo_closed: bool, hi_closed: bool) -> Result<Interval, TimeError> {
        Interval::make(lo, hi, lo_closed, hi_closed).ok_or_else(|| {
            TimeError::InvalidInterval(format!(
                "{}{lo}, {hi}{}",
                if lo_closed { '[' } else { '(' },
                if hi_closed { ']' } else { ')' }
            ))
        })
    }

    fn make(lo: Time, hi: Time, lo_closed: bool, hi_closed: bool) -> Option<Interval> {
        if !lo.is_finite() || (!hi.is_finite() && hi_closed) {
            return None;
        }
        let ok = match lo.cmp(&hi) {
            Ordering::Less => true,
            Ordering::Equal => lo_closed && hi_closed,
            Ordering::Greater => false,
        };
        ok.then_some(Interval { lo, hi, lo_closed, hi_closed })
    }

    fn from_bounds(lower: Lower, upper: Upper) -> Option<Interval> {
        Interval::make(lower.at, upper.at, lower.closed, upper.closed)
    }

    /// `[lo, hi)`.
    pub fn closed_open(lo: Time, hi: Time) -> Result<Interval, TimeError> {
        Interval::new(lo, hi, true, false)
    }

    /// `(lo, hi]`, or `(lo, inf)` when `hi` is infinite.
    pub fn open_closed(lo: Time, hi: Time) -> Result<Interval, TimeError> {
        Interval::new(lo, hi, false, hi.is_finite())
    }

    /// `[lo, hi]`, or `[lo, inf)` when `hi` is infinite.
    pub fn closed(lo: Time, hi: Time) -> Result<Interval, TimeError> {
        Interval::new(lo, hi, true, hi.is_finite())
    }

    /// `(lo, hi)`.
    pub fn open(lo: Time, hi: Time) -> Result<Interval, TimeError> {
        Interval::new(lo, hi, false, false)
    }

    /// `[t, t]`.
    pub fn point(t: Time) -> Interval {
        Interval::closed(t, t).expect("point interval at a finite time")
    }

    /// `[t, inf)`.
    pub fn from(t: Time) -> Interval {
        Interval::closed_open(t, Time::Infinity).expect("finite lower bound")
    }

    /// `[0, inf)`.
    pub const ALL: Interval = Interval { lo: Time::ZERO, hi: Time::Infinity, lo_closed: true, hi_closed: false };

    pub fn all() -> Interval {
        Interval::ALL
    }

    pub fn lo(&self) -> Time {
        self.lo
    }

    pub fn hi(&self) -> Time {
        self.hi
    }

    pub fn lo_closed(&self) -> bool {
        self.lo_closed
    }

    pub fn hi_closed(&self) -> bool {
        self.hi_closed
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    fn lower(&self) -> Lower {
        Lower { at: self.lo, closed: self.lo_closed }
    }

    fn upper(&self) -> Upper {
        Upper { at: self.hi, closed: self.hi_closed }
    }

    pub fn contains(&self, t: Time) -> bool {
        let above = if self.lo_closed { t >= self.lo } else { t > self.lo };
        let below = if self.hi_closed { t <= self.hi } else { t < self.hi };
        above && below
    }

    /// True when every point of `other` lies in `self`.
    pub fn covers(&self, other: &Interval) -> bool {
        self.lower() <= other.lower() && other.upper() <= self.upper()
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.intersect(other).is_some()
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::from_bounds(self.lower().max(other.lower()), self.upper().min(other.upper()))
    }

    /// `self \ cut` as zero, one or two maximal intervals in time order.
    pub fn subtract(&self, cut: &Interval) -> Vec<Interval> {
        if !self.overlaps(cut) {
            return vec![*self];
        }
        let mut out = Vec::with_capacity(2);
        let left_upper = Upper { at: cut.lo, closed: !cut.lo_closed };
        if let Some(left) = Interval::from_bounds(self.lower(), left_upper.min(self.upper())) {
            out.push(left);
        }
        if cut.hi.is_finite() {
            let right_lower = Lower { at: cut.hi, closed: !cut.hi_closed };
            if let Some(right) = Interval::from_bounds(right_lower.max(self.lower()), self.upper()) {
                out.push(right);
            }
        }
        out
    }

    /// Moves both ends by `+delta`.
    pub fn shift_later(&self, delta: Time) -> Interval {
        Interval { lo: self.lo + delta, hi: self.hi + delta, ..*self }
    }

    /// Moves both ends by `-delta`, clipping at zero. `None` when nothing of
    /// the interval survives at non-negative times.
    pub fn shift_earlier(&self, delta: Time) -> Option<Interval> {
        let hi = self.hi.checked_sub(delta)?;
        match self.lo.checked_sub(delta) {
            Some(lo) => Interval::make(lo, hi, self.lo_closed, self.hi_closed),
            None => Interval::make(Time::ZERO, hi, true, self.hi_closed),
        }
    }

    /// Earliest member, when one exists (an open lower end has none).
    pub fn earliest(&self) -> Option<Time> {
        self.lo_closed.then_some(self.lo)
    }
}

/// Whether the two intervals share at least one instant.
pub fn overlap(a: &Interval, b: &Interval) -> bool {
    a.overlaps(b)
}

/// `base \ cut`.
pub fn subtract(base: &Interval, cut: &Interval) -> Vec<Interval> {
    base.subtract(cut)
}

/// Greatest lower bound of `a ∩ b`.
pub fn infimum_of_intersection(a: &Interval, b: &Interval) -> Result<Time, TimeError> {
    a.intersect(b)
        .map(|i| i.lo)
        .ok_or_else(|| TimeError::Disjoint(a.to_string(), b.to_string()))
}

/// Sorted, pairwise disjoint set of intervals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntervalSet {
    parts: Vec<Interval>,
}

impl IntervalSet {
    pub fn new() -> Self {
        IntervalSet { parts: Vec::new() }
    }

    /// Union of `parts`, which may overlap.
    pub fn from_parts(parts: Vec<Interval>) -> Self {
        let mut set = IntervalSet::new();
        for p in parts {
            set.insert(p);
        }
        set
    }

    pub fn full() -> Self {
        IntervalSet { parts: vec![Interval::all()] }
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn contains(&self, t: Time) -> bool {
        self.parts.iter().any(|p| p.contains(t))
    }

    /// Removes `cut` from every member.
    pub fn remove(&mut self, cut: &Interval) {
        if !self.parts.iter().any(|p| p.overlaps(cut)) {
            return;
        }
        self.parts = self.parts.iter().flat_map(|p| p.subtract(cut)).collect();
    }

    /// Adds `extra`, merging with members it overlaps or touches.
    pub fn insert(&mut self, extra: Interval) {
        let mut merged = extra;
        let mut kept = Vec::with_capacity(self.parts.len() + 1);
        for p in self.parts.drain(..) {
            if let Some(u) = union_if_connected(&merged, &p) {
                merged = u;
            } else {
                kept.push(p);
            }
        }
        kept.push(merged);
        kept.sort_by_key(|a| a.lower());
        self.parts = kept;
    }

    /// Intersection with a single interval.
    pub fn clip(&self, window: &Interval) -> IntervalSet {
        IntervalSet { parts: self.parts.iter().filter_map(|p| p.intersect(window)).collect() }
    }

    /// Complement within `[0, inf)`.
    pub fn complement(&self) -> IntervalSet {
        let mut full = IntervalSet::full();
        for p in &self.parts {
            full.remove(p);
        }
        full
    }
}

/// Union of two intervals when it is itself an interval.
pub fn union_if_connected(a: &Interval, b: &Interval) -> Option<Interval> {
    let (first, second) = if a.lower() <= b.lower() { (a, b) } else { (b, a) };
    // Connected when `second` starts inside `first` or exactly where it stops
    // with at least one of the two touching ends closed.
    let connected = first.upper().at > second.lo
        || (first.hi == second.lo && (first.hi_closed || second.lo_closed));
    connected.then(|| {
        Interval::from_bounds(first.lower(), first.upper().max(second.upper()))
            .expect("union of connected intervals")
    })
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Interval {
    type Err = TimeError;

    /// Parses the `Display` form, e.g. `[0, 5/2)` or `(1, inf)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || TimeError::Parse(s.to_string());
        let lo_closed = match s.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(err()),
        };
        let hi_closed = match s.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(err()),
        };
        let (lo, hi) = s[1..s.len() - 1].split_once(',').ok_or_else(err)?;
        Interval::new(lo.parse()?, hi.parse()?, lo_closed, hi_closed)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
