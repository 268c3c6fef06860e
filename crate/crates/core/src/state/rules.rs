use std::collections::BTreeMap;

use smallvec::SmallVec;

use super::{DetectionSpec, FockTerm, ModeLabel, PhotonicState};
use crate::error::{Error, Result};
use crate::exact::CycNum;

/// What happens to amplitude pushed outside `|m| <= max_oam`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CutoffPolicy {
    pub max_oam: i32,
    /// Error instead of silently dropping.
    pub strict: bool,
}

impl CutoffPolicy {
    pub fn new(max_oam: i32) -> Self {
        CutoffPolicy { max_oam, strict: false }
    }

    pub fn strict(max_oam: i32) -> Self {
        CutoffPolicy { max_oam, strict: true }
    }

    pub fn contains(&self, label: &ModeLabel) -> bool {
        label.oam.abs() <= self.max_oam
    }
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self::new(2)
    }
}

/// Linear single-photon substitution rules: `a†(m) ↦ Σ w·b†(m')`.
/// Labels without an entry are left untouched.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Rules {
    map: BTreeMap<ModeLabel, Vec<(CycNum, ModeLabel)>>,
}

impl Rules {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, from: ModeLabel, image: Vec<(CycNum, ModeLabel)>) {
        self.map.insert(from, image);
    }

    pub fn get(&self, label: &ModeLabel) -> Option<&[(CycNum, ModeLabel)]> {
        self.map.get(label).map(Vec::as_slice)
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().all(|(k, v)| v.len() == 1 && v[0].1 == *k && v[0].0.is_one())
    }

    pub fn domain(&self) -> impl Iterator<Item = &ModeLabel> {
        self.map.keys()
    }

    /// Image of one label as a combined, zero-free linear combination.
    pub fn image(&self, label: &ModeLabel) -> Vec<(CycNum, ModeLabel)> {
        match self.map.get(label) {
            Some(img) => img.clone(),
            None => vec![(CycNum::one(), *label)],
        }
    }

    /// Rules equivalent to applying `self` first and then `next`.
    pub fn then(&self, next: &Rules) -> Rules {
        let mut out = Rules::identity();
        let domain: std::collections::BTreeSet<ModeLabel> = self.map.keys().chain(next.map.keys()).copied().collect();
        for label in domain {
            let mut acc: BTreeMap<ModeLabel, CycNum> = BTreeMap::new();
            for (w1, mid) in self.image(&label) {
                for (w2, fin) in next.image(&mid) {
                    let w = &w1 * &w2;
                    acc.entry(fin).and_modify(|x| *x += &w).or_insert(w);
                }
            }
            let img: Vec<_> = acc.into_iter().filter(|(_, w)| !w.is_zero()).map(|(l, w)| (w, l)).collect();
            out.insert(label, img);
        }
        out
    }
}

/// Result of a substitution together with the number of expansion branches
/// dropped by the cutoff.
#[derive(Clone, Debug)]
pub struct Substituted {
    pub state: PhotonicState,
    pub dropped: u64,
}

pub(super) fn substitute(state: &PhotonicState, rules: &Rules, cutoff: &CutoffPolicy) -> Result<Substituted> {
    let mut acc: BTreeMap<FockTerm, CycNum> = BTreeMap::new();
    let mut dropped = 0u64;
    let mut partial: Vec<(CycNum, SmallVec<[ModeLabel; 4]>)> = Vec::new();
    let mut next = Vec::new();
    for (term, amp) in &state.terms {
        partial.clear();
        partial.push((amp.clone(), SmallVec::new()));
        for label in term.labels() {
            match rules.get(label) {
                None => partial.iter_mut().for_each(|(_, t)| t.push(*label)),
                Some(image) => {
                    next.clear();
                    for (a, t) in &partial {
                        for (w, l) in image {
                            if !cutoff.contains(l) {
                                if cutoff.strict {
                                    return Err(Error::CutoffExceeded {
                                        label: l.to_string(),
                                        max_oam: cutoff.max_oam,
                                    });
                                }
                                dropped += 1;
                                continue;
                            }
                            let mut t2 = t.clone();
                            t2.push(*l);
                            let a2 = if w.is_one() { a.clone() } else { a * w };
                            next.push((a2, t2));
                        }
                    }
                    std::mem::swap(&mut partial, &mut next);
                }
            }
        }
        for (a, mut t) in partial.drain(..) {
            t.sort_unstable();
            match acc.entry(FockTerm::from_sorted(t)) {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert(a);
                }
                std::collections::btree_map::Entry::Occupied(mut o) => *o.get_mut() += &a,
            }
        }
    }
    Ok(Substituted { state: PhotonicState::from_map(state.order, acc), dropped })
}

struct Herald<'a> {
    rules: &'a Rules,
    cutoff: &'a CutoffPolicy,
    detection: &'a DetectionSpec,
    acc: BTreeMap<FockTerm, CycNum>,
    labels: SmallVec<[ModeLabel; 4]>,
}

impl Herald<'_> {
    fn admits(&self, l: &ModeLabel, used: u32) -> bool {
        if used & (1 << l.path.0) != 0 || !self.cutoff.contains(l) {
            return false;
        }
        if l.path == self.detection.trigger.path {
            l.oam == self.detection.trigger.oam
        } else {
            self.detection.coincidence.contains(&l.path)
        }
    }

    fn expand(&mut self, inputs: &[ModeLabel], amp: &CycNum, used: u32) {
        let Some((first, rest)) = inputs.split_first() else {
            let mut kept: SmallVec<[ModeLabel; 4]> =
                self.labels.iter().filter(|l| l.path != self.detection.trigger.path).copied().collect();
            kept.sort_unstable();
            *self.acc.entry(FockTerm::from_sorted(kept)).or_insert_with(CycNum::zero) += amp;
            return;
        };
        let identity = [(CycNum::one(), *first)];
        let image = self.rules.get(first).unwrap_or(&identity);
        for (w, l) in image {
            if !self.admits(l, used) {
                continue;
            }
            let next = if w.is_one() { amp.clone() } else { amp * w };
            self.labels.push(*l);
            self.expand(rest, &next, used | (1 << l.path.0));
            self.labels.pop();
        }
    }
}

pub(super) fn substitute_heralded(
    state: &PhotonicState,
    rules: &Rules,
    cutoff: &CutoffPolicy,
    detection: &DetectionSpec,
) -> PhotonicState {
    let wanted = detection.coincidence.len() + 1;
    let mut h = Herald { rules, cutoff, detection, acc: BTreeMap::new(), labels: SmallVec::new() };
    if state.order == wanted {
        for (term, amp) in &state.terms {
            h.expand(term.labels(), amp, 0);
        }
    }
    PhotonicState::from_map(state.order.saturating_sub(1), h.acc)
}
