//! Sparse, unnormalized multi-photon states over (path, OAM) modes.
//!
//! A state is a map from canonically sorted multisets of creation operators
//! to exact [`CycNum`] amplitudes. Repeated creation operators carry no
//! factorial factors in the stored amplitude; the physical inner product
//! restores them (`⟨n|n⟩ = n!` per mode), which only matters for bunched terms.

mod rank;
mod rules;
mod srv;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, ParseError, Result};
use crate::exact::{CycNum, Rational};

pub use rank::rank;
pub use rules::{CutoffPolicy, Rules, Substituted};
pub use srv::Srv;

/// A spatial path, rendered as a lowercase letter (`a` = 0).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path(pub u8);

pub const MAX_PATHS: u8 = 26;

impl Path {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn letter(self) -> char {
        (b'a' + self.0) as char
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Path {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let s = s.trim();
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c @ 'a'..='z'), None) => Ok(Path(c as u8 - b'a')),
            _ => Err(ParseError::new(format!("invalid path `{s}` (expected a..z)"))),
        }
    }
}

/// One photonic mode: a path and an OAM quantum number.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub path: Path,
    pub oam: i32,
}

impl ModeLabel {
    pub fn new(path: Path, oam: i32) -> Self {
        ModeLabel { path, oam }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.path, self.oam)
    }
}

impl fmt::Debug for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ModeLabel {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let (p, m) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| ParseError::new(format!("invalid mode `{s}` (expected path:oam)")))?;
        let oam =
            m.trim().trim_start_matches('+').parse().map_err(|_| ParseError::new(format!("invalid oam in `{s}`")))?;
        Ok(ModeLabel::new(p.parse()?, oam))
    }
}

/// A product of creation operators, kept sorted by (path, oam).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FockTerm(SmallVec<[ModeLabel; 4]>);

impl FockTerm {
    pub fn new(labels: impl IntoIterator<Item = ModeLabel>) -> Self {
        let mut v: SmallVec<[ModeLabel; 4]> = labels.into_iter().collect();
        v.sort_unstable();
        FockTerm(v)
    }

    pub(crate) fn from_sorted(v: SmallVec<[ModeLabel; 4]>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] <= w[1]));
        FockTerm(v)
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.0
    }

    pub fn photon_count(&self) -> usize {
        self.0.len()
    }

    /// Number of photons in `path`.
    pub fn count_in(&self, path: Path) -> usize {
        self.0.iter().filter(|l| l.path == path).count()
    }

    /// Π nₖ! over distinct modes: the squared norm of the unnormalized Fock ket.
    pub fn bosonic_weight(&self) -> i64 {
        let mut weight = 1i64;
        let mut run = 0i64;
        for (i, l) in self.0.iter().enumerate() {
            run = if i > 0 && self.0[i - 1] == *l { run + 1 } else { 1 };
            weight *= run;
        }
        weight
    }

    /// Concatenation of two multisets.
    pub fn merge(&self, other: &FockTerm) -> FockTerm {
        FockTerm::new(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn paths(&self) -> impl Iterator<Item = Path> + '_ {
        self.0.iter().map(|l| l.path)
    }
}

impl fmt::Display for FockTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("|")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("⟩")
    }
}

impl fmt::Debug for FockTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for FockTerm {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let inner = s
            .trim()
            .strip_prefix('|')
            .and_then(|r| r.strip_suffix('⟩').or_else(|| r.strip_suffix('>')))
            .ok_or_else(|| ParseError::new(format!("invalid ket `{s}`")))?;
        let labels = inner.split_whitespace().map(str::parse).collect::<Result<Vec<ModeLabel>, _>>()?;
        Ok(FockTerm::new(labels))
    }
}

macro_rules! serde_as_text {
    ($($t:ty),*) => {$(
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    )*};
}

serde_as_text!(Path, ModeLabel);

impl Serialize for FockTerm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FockTerm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Which photons count as a heralded event: one photon in each coincidence
/// path plus the trigger photon in its fixed mode, and nothing anywhere else.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectionSpec {
    pub trigger: ModeLabel,
    pub coincidence: Vec<Path>,
}

impl DetectionSpec {
    pub fn new(trigger: ModeLabel, coincidence: Vec<Path>) -> Result<Self> {
        let spec = DetectionSpec { trigger, coincidence };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coincidence.contains(&self.trigger.path) {
            return Err(Error::InvalidSetup(format!("trigger path {} is also a coincidence path", self.trigger.path)));
        }
        let distinct: BTreeSet<_> = self.coincidence.iter().collect();
        if distinct.len() != self.coincidence.len() {
            return Err(Error::InvalidSetup("duplicate coincidence path".into()));
        }
        Ok(())
    }

    /// All detector paths, coincidence first, trigger last.
    pub fn detector_paths(&self) -> impl Iterator<Item = Path> + '_ {
        self.coincidence.iter().copied().chain(std::iter::once(self.trigger.path))
    }
}

/// An unnormalized state of a fixed photon number.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct PhotonicState {
    order: usize,
    terms: BTreeMap<FockTerm, CycNum>,
}

impl PhotonicState {
    pub fn empty(order: usize) -> Self {
        PhotonicState { order, terms: BTreeMap::new() }
    }

    /// Builds a state from `(term, amplitude)` pairs, summing repeats.
    pub fn from_terms(order: usize, terms: impl IntoIterator<Item = (FockTerm, CycNum)>) -> Result<Self> {
        let mut st = Self::empty(order);
        for (t, a) in terms {
            st.add_term(t, a)?;
        }
        Ok(st)
    }

    /// Sum of unit-amplitude kets, e.g. `basis_sum(&[a, b, c], &[[0,0,0],[1,1,1]])`.
    pub fn basis_sum(paths: &[Path], rows: &[&[i32]]) -> Result<Self> {
        Self::from_terms(
            paths.len(),
            rows.iter().map(|row| {
                let term = FockTerm::new(paths.iter().zip(row.iter()).map(|(p, m)| ModeLabel::new(*p, *m)));
                (term, CycNum::one())
            }),
        )
    }

    pub fn add_term(&mut self, term: FockTerm, amp: CycNum) -> Result<()> {
        if term.photon_count() != self.order {
            return Err(Error::Precondition(format!(
                "term {term} has {} photons, state order is {}",
                term.photon_count(),
                self.order
            )));
        }
        if amp.is_zero() {
            return Ok(());
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(term) {
            Entry::Vacant(v) => {
                v.insert(amp);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += &amp;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
        Ok(())
    }

    pub(crate) fn from_map(order: usize, mut terms: BTreeMap<FockTerm, CycNum>) -> Self {
        terms.retain(|_, a| !a.is_zero());
        PhotonicState { order, terms }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FockTerm, &CycNum)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, term: &FockTerm) -> Option<&CycNum> {
        self.terms.get(term)
    }

    /// Multiplies every amplitude by `factor`.
    pub fn scaled(&self, factor: &CycNum) -> Self {
        Self::from_map(self.order, self.terms.iter().map(|(t, a)| (t.clone(), a * factor)).collect())
    }

    /// Operator product of two states (photon numbers add).
    pub fn product(&self, other: &PhotonicState) -> PhotonicState {
        let mut out: BTreeMap<FockTerm, CycNum> = BTreeMap::new();
        for (t1, a1) in &self.terms {
            for (t2, a2) in &other.terms {
                let amp = a1 * a2;
                out.entry(t1.merge(t2)).and_modify(|x| *x += &amp).or_insert(amp);
            }
        }
        Self::from_map(self.order + other.order, out)
    }

    /// Sum of two states of equal order.
    pub fn sum(&self, other: &PhotonicState) -> Result<PhotonicState> {
        let mut out = self.clone();
        for (t, a) in &other.terms {
            out.add_term(t.clone(), a.clone())?;
        }
        Ok(out)
    }

    /// Physical inner product ⟨self|other⟩ including bosonic factorials.
    pub fn inner(&self, other: &PhotonicState) -> CycNum {
        let mut acc = CycNum::zero();
        let (small, large, flip) = if self.len() <= other.len() { (self, other, false) } else { (other, self, true) };
        for (t, a) in &small.terms {
            if let Some(b) = large.terms.get(t) {
                let w = Rational::from_integer(t.bosonic_weight());
                let prod = if flip { b.conj() * a } else { a.conj() * b };
                acc += &prod.scale(&w);
            }
        }
        acc
    }

    /// ⟨ψ|ψ⟩ as an exact real field element.
    pub fn norm_sq(&self) -> CycNum {
        self.inner(self)
    }

    /// Rewrites every creation operator through `rules`, expanding products and
    /// combining like terms exactly.
    pub fn substitute(&self, rules: &Rules, cutoff: &CutoffPolicy) -> Result<Substituted> {
        rules::substitute(self, rules, cutoff)
    }

    /// `substitute` followed by `postselect`, pruning expansion branches that
    /// already break the detection pattern. Labels past the cutoff are dropped
    /// silently, so strict policies should use the two-step form.
    pub fn substitute_heralded(
        &self,
        rules: &Rules,
        cutoff: &CutoffPolicy,
        detection: &DetectionSpec,
    ) -> PhotonicState {
        rules::substitute_heralded(self, rules, cutoff, detection)
    }

    /// Keeps the heralded terms and strips the trigger photon.
    pub fn postselect(&self, detection: &DetectionSpec) -> PhotonicState {
        let wanted = detection.coincidence.len() + 1;
        let mut out = BTreeMap::new();
        'terms: for (t, a) in &self.terms {
            if t.photon_count() != wanted {
                continue;
            }
            let mut kept: SmallVec<[ModeLabel; 4]> = SmallVec::new();
            let mut trigger_seen = false;
            for l in t.labels() {
                if l.path == detection.trigger.path {
                    if trigger_seen || l.oam != detection.trigger.oam {
                        continue 'terms;
                    }
                    trigger_seen = true;
                } else if detection.coincidence.contains(&l.path) {
                    if kept.iter().any(|k| k.path == l.path) {
                        continue 'terms;
                    }
                    kept.push(*l);
                } else {
                    continue 'terms;
                }
            }
            if trigger_seen && kept.len() == detection.coincidence.len() {
                out.insert(FockTerm::from_sorted(kept), a.clone());
            }
        }
        PhotonicState { order: self.order.saturating_sub(1), terms: out }
    }

    /// The per-term path list when every term has exactly one photon per path
    /// and all terms share the same paths; otherwise a precondition error.
    pub fn slot_paths(&self) -> Result<Vec<Path>> {
        let first = self.terms.keys().next().ok_or(Error::EmptyState)?;
        let paths: Vec<Path> = first.paths().collect();
        for t in self.terms.keys() {
            let ps: Vec<Path> = t.paths().collect();
            if ps != paths || ps.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Precondition(format!(
                    "term {t} is not one-photon-per-path over {}",
                    paths.iter().map(ToString::to_string).collect::<String>()
                )));
            }
        }
        Ok(paths)
    }

    /// Distinct OAM values carried by each slot, in slot order.
    pub fn slot_modes(&self) -> Result<Vec<BTreeSet<i32>>> {
        let n = self.slot_paths()?.len();
        let mut modes = vec![BTreeSet::new(); n];
        for t in self.terms.keys() {
            for (slot, l) in t.labels().iter().enumerate() {
                modes[slot].insert(l.oam);
            }
        }
        Ok(modes)
    }

    /// Rank of the coefficient matrix across the bipartition `slots | rest`.
    pub fn bipartite_rank(&self, slots: &[usize]) -> Result<usize> {
        srv::bipartite_rank(self, slots)
    }

    /// Schmidt-rank vector, sorted descending.
    pub fn srv(&self) -> Result<Srv> {
        srv::srv(self)
    }

    /// |⟨target|self⟩|² / (⟨self|self⟩⟨target|target⟩) in floating point.
    pub fn fidelity(&self, target: &PhotonicState) -> Result<f64> {
        if self.order != target.order {
            return Err(Error::Precondition(format!("photon numbers differ ({} vs {})", self.order, target.order)));
        }
        let ns = self.norm_sq().to_complex().re;
        let nt = target.norm_sq().to_complex().re;
        if self.is_empty() || target.is_empty() || ns <= 0.0 || nt <= 0.0 {
            return Err(Error::EmptyState);
        }
        let overlap = target.inner(self).to_complex().norm_sqr();
        Ok((overlap / (ns * nt)).clamp(0.0, 1.0))
    }
}

impl fmt::Display for PhotonicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (t, a)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({a}) {t}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for PhotonicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhotonicState[{}]({self})", self.order)
    }
}

/// Parses `(amp) |a:0 b:0⟩ + (amp) |...⟩`; the amplitude is optional and a
/// leading `-` negates it. The photon number is taken from the first term.
impl FromStr for PhotonicState {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let mut rest = s.trim();
        if rest == "0" {
            return Ok(PhotonicState::empty(0));
        }
        let mut parsed: Vec<(FockTerm, CycNum)> = Vec::new();
        while !rest.is_empty() {
            let mut negate = false;
            if let Some(r) = rest.strip_prefix('+') {
                rest = r.trim_start();
            } else if let Some(r) = rest.strip_prefix('-') {
                negate = true;
                rest = r.trim_start();
            } else if !parsed.is_empty() {
                return Err(ParseError::new(format!("expected `+` before `{rest}`")));
            }
            let mut amp = CycNum::one();
            if rest.starts_with('(') {
                let close = rest.find(')').ok_or_else(|| ParseError::new("unbalanced `(` in state"))?;
                amp = rest[1..close].parse()?;
                rest = rest[close + 1..].trim_start();
            }
            if negate {
                amp = -amp;
            }
            if !rest.starts_with('|') {
                return Err(ParseError::new(format!("expected ket at `{rest}`")));
            }
            let end = rest
                .char_indices()
                .find(|(_, c)| *c == '⟩' || *c == '>')
                .map(|(i, c)| i + c.len_utf8())
                .ok_or_else(|| ParseError::new("unterminated ket"))?;
            parsed.push((rest[..end].parse()?, amp));
            rest = rest[end..].trim_start();
        }
        let order = parsed.first().map_or(0, |(t, _)| t.photon_count());
        PhotonicState::from_terms(order, parsed).map_err(|e| ParseError::new(e.to_string()))
    }
}

impl Serialize for PhotonicState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhotonicState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
