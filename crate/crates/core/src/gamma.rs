//! Identified-set containers for the 20-component parameter vector.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Menu {
    /// Random assignment, exclusion and monotonicity.
    A1,
    /// Random assignment and exclusion.
    A2,
    /// Random assignment and monotonicity.
    A3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Compliance {
    Always,
    Complier,
    Defier,
    Never,
}

impl Compliance {
    pub const ALL: [Compliance; 4] = [
        Compliance::Always,
        Compliance::Complier,
        Compliance::Defier,
        Compliance::Never,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Compliance::Always => "a",
            Compliance::Complier => "c",
            Compliance::Defier => "df",
            Compliance::Never => "n",
        }
    }

    /// Type after flipping the instrument: compliers and defiers swap.
    pub fn flipped(self) -> Self {
        match self {
            Compliance::Complier => Compliance::Defier,
            Compliance::Defier => Compliance::Complier,
            t => t,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// One component of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    /// Treatment effect holding the instrument at `z`.
    Theta(u8, Compliance),
    /// Instrument effect holding treatment at `d`.
    Delta(u8, Compliance),
    Share(Compliance),
}

impl Param {
    pub fn all() -> Vec<Param> {
        let mut v = Vec::with_capacity(20);
        for z in 0..2 {
            for t in Compliance::ALL {
                v.push(Param::Theta(z, t));
            }
        }
        for d in 0..2 {
            for t in Compliance::ALL {
                v.push(Param::Delta(d, t));
            }
        }
        for t in Compliance::ALL {
            v.push(Param::Share(t));
        }
        v
    }

    fn index(self) -> usize {
        match self {
            Param::Theta(z, t) => z as usize * 4 + t.index(),
            Param::Delta(d, t) => 8 + d as usize * 4 + t.index(),
            Param::Share(t) => 16 + t.index(),
        }
    }

    /// Image under `z -> 1 - z` together with the sign the value picks up.
    fn flipped(self) -> (Param, f64) {
        match self {
            Param::Theta(z, t) => (Param::Theta(1 - z, t.flipped()), 1.0),
            Param::Delta(d, t) => (Param::Delta(d, t.flipped()), -1.0),
            Param::Share(t) => (Param::Share(t.flipped()), 1.0),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Theta(z, t) => write!(f, "theta_{z}{}", t.tag()),
            Param::Delta(d, t) => write!(f, "delta_{d}{}", t.tag()),
            Param::Share(t) => write!(f, "p_{}", t.tag()),
        }
    }
}

/// Closed interval or the empty set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaybeEmptyInterval {
    Empty,
    Interval { lo: f64, hi: f64 },
}

impl MaybeEmptyInterval {
    /// Interval `[lo, hi]`, or empty when `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Self {
        if lo <= hi {
            MaybeEmptyInterval::Interval { lo, hi }
        } else {
            MaybeEmptyInterval::Empty
        }
    }

    pub fn point(v: f64) -> Self {
        MaybeEmptyInterval::Interval { lo: v, hi: v }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            MaybeEmptyInterval::Empty => None,
            MaybeEmptyInterval::Interval { lo, hi } => Some((lo, hi)),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, MaybeEmptyInterval::Empty)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.bounds().is_some_and(|(lo, hi)| lo <= x && x <= hi)
    }

    pub fn lo(&self) -> Option<f64> {
        self.bounds().map(|b| b.0)
    }

    pub fn hi(&self) -> Option<f64> {
        self.bounds().map(|b| b.1)
    }

    pub fn width(&self) -> Option<f64> {
        self.bounds().map(|(lo, hi)| hi - lo)
    }

    pub fn shift(&self, by: f64) -> Self {
        match self.bounds() {
            Some((lo, hi)) => MaybeEmptyInterval::Interval {
                lo: lo + by,
                hi: hi + by,
            },
            None => MaybeEmptyInterval::Empty,
        }
    }

    /// `{c - x : x in self}`.
    pub fn reflect(&self, c: f64) -> Self {
        match self.bounds() {
            Some((lo, hi)) => MaybeEmptyInterval::Interval {
                lo: c - hi,
                hi: c - lo,
            },
            None => MaybeEmptyInterval::Empty,
        }
    }

    pub fn is_subset_of(&self, other: &Self, tol: f64) -> bool {
        match (self.bounds(), other.bounds()) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some((a, b)), Some((c, d))) => a >= c - tol && b <= d + tol,
        }
    }
}

/// Description of one component inside an identified set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entry {
    Point {
        value: f64,
    },
    Interval {
        lo: f64,
        hi: f64,
    },
    /// Only the logical outcome range restricts this component.
    FullRange {
        lo: f64,
        hi: f64,
    },
    Empty,
}

impl Entry {
    pub fn point(v: f64) -> Self {
        Entry::Point { value: v }
    }

    /// Collapses to a point when the endpoints coincide.
    pub fn interval(lo: f64, hi: f64) -> Self {
        if lo == hi {
            Entry::Point { value: lo }
        } else {
            Entry::Interval { lo, hi }
        }
    }

    pub fn from_interval(iv: MaybeEmptyInterval) -> Self {
        match iv.bounds() {
            Some((lo, hi)) => Entry::interval(lo, hi),
            None => Entry::Empty,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Entry::Point { value } => Some((value, value)),
            Entry::Interval { lo, hi } | Entry::FullRange { lo, hi } => Some((lo, hi)),
            Entry::Empty => None,
        }
    }

    pub fn as_interval(&self) -> MaybeEmptyInterval {
        match self.bounds() {
            Some((lo, hi)) => MaybeEmptyInterval::Interval { lo, hi },
            None => MaybeEmptyInterval::Empty,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Entry::Empty)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.bounds().is_some_and(|(lo, hi)| lo <= x && x <= hi)
    }

    fn scaled(&self, sign: f64) -> Self {
        if sign > 0.0 {
            return *self;
        }
        match *self {
            Entry::Point { value } => Entry::Point { value: -value },
            Entry::Interval { lo, hi } => Entry::Interval { lo: -hi, hi: -lo },
            Entry::FullRange { lo, hi } => Entry::FullRange { lo: -hi, hi: -lo },
            Entry::Empty => Entry::Empty,
        }
    }

    /// Interval hull of two entries and whether the union has a gap.
    pub fn hull(&self, other: &Entry) -> (Entry, bool) {
        match (self.bounds(), other.bounds()) {
            (None, _) => (*other, false),
            (_, None) => (*self, false),
            (Some((a, b)), Some((c, d))) => {
                let gap = b < c || d < a;
                let (lo, hi) = (a.min(c), b.max(d));
                let full = matches!(self, Entry::FullRange { .. })
                    && matches!(other, Entry::FullRange { .. });
                let e = if full {
                    Entry::FullRange { lo, hi }
                } else {
                    Entry::interval(lo, hi)
                };
                (e, gap)
            }
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Point { value } => write!(f, "{value:.6}"),
            Entry::Interval { lo, hi } => write!(f, "[{lo:.6}, {hi:.6}]"),
            Entry::FullRange { lo, hi } => write!(f, "range [{lo:.6}, {hi:.6}]"),
            Entry::Empty => write!(f, "empty"),
        }
    }
}

/// A linear restriction `sum(sign * param) in value` that holds inside the set.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub terms: Vec<(f64, Param)>,
    pub value: Entry,
}

impl Link {
    pub fn equal(a: Param, b: Param) -> Self {
        Self {
            terms: vec![(1.0, a), (-1.0, b)],
            value: Entry::point(0.0),
        }
    }

    pub fn sum(a: Param, b: Param, value: Entry) -> Self {
        Self {
            terms: vec![(1.0, a), (1.0, b)],
            value,
        }
    }

    fn flipped(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|&(s, p)| {
                    let (q, k) = p.flipped();
                    (s * k, q)
                })
                .collect(),
            value: self.value,
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (s, p)) in self.terms.iter().enumerate() {
            let sign = if *s < 0.0 { "-" } else { "+" };
            if i == 0 {
                if *s < 0.0 {
                    write!(f, "-")?;
                }
                write!(f, "{p}")?;
            } else {
                write!(f, " {sign} {p}")?;
            }
        }
        match self.value {
            Entry::Point { value } => write!(f, " = {value}"),
            e => write!(f, " in {e}"),
        }
    }
}

/// Identified set for the parameter vector under one menu.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    entries: [Entry; 20],
    pub menu: Menu,
    pub case_tag: String,
    pub links: Vec<Link>,
}

impl GammaSet {
    pub fn new(menu: Menu, case_tag: impl Into<String>) -> Self {
        Self {
            entries: [Entry::point(0.0); 20],
            menu,
            case_tag: case_tag.into(),
            links: Vec::new(),
        }
    }

    pub fn empty(menu: Menu, case_tag: impl Into<String>) -> Self {
        Self {
            entries: [Entry::Empty; 20],
            menu,
            case_tag: case_tag.into(),
            links: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().any(Entry::is_empty)
    }

    pub fn get(&self, p: Param) -> Entry {
        self.entries[p.index()]
    }

    pub fn set(&mut self, p: Param, e: Entry) {
        self.entries[p.index()] = e;
    }

    pub fn entries(&self) -> impl Iterator<Item = (Param, Entry)> + '_ {
        Param::all().into_iter().map(|p| (p, self.get(p)))
    }

    /// Image of the set under the instrument flip `z -> 1 - z`.
    pub fn flipped(&self, case_tag: impl Into<String>) -> Self {
        let mut out = GammaSet::new(self.menu, case_tag);
        for p in Param::all() {
            let (q, sign) = p.flipped();
            out.set(q, self.get(p).scaled(sign));
        }
        out.links = self.links.iter().map(Link::flipped).collect();
        out
    }
}

impl Serialize for GammaSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries: BTreeMap<String, Entry> =
            self.entries().map(|(p, e)| (p.to_string(), e)).collect();
        let links: Vec<String> = self.links.iter().map(|l| l.to_string()).collect();
        let mut st = s.serialize_struct("GammaSet", 5)?;
        st.serialize_field("menu", &self.menu)?;
        st.serialize_field("case", &self.case_tag)?;
        st.serialize_field("empty", &self.is_empty())?;
        st.serialize_field("entries", &entries)?;
        st.serialize_field("linked_constraints", &links)?;
        st.end()
    }
}

/// Outcome range used for components only the logical range restricts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeRange {
    pub lo: f64,
    pub hi: f64,
}

impl OutcomeRange {
    pub fn mean_range(&self) -> Entry {
        Entry::FullRange {
            lo: self.lo,
            hi: self.hi,
        }
    }

    pub fn difference_range(&self) -> Entry {
        let w = self.hi - self.lo;
        Entry::FullRange { lo: -w, hi: w }
    }
}
