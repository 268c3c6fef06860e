use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::{rank, PhotonicState};
use crate::error::{Error, ParseError, Result};
use crate::exact::CycNum;

/// Schmidt-rank vector: one rank per single-photon-vs-rest bipartition,
/// sorted descending.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Srv(Vec<usize>);

impl Srv {
    pub fn new(mut ranks: Vec<usize>) -> Self {
        ranks.sort_unstable_by(|a, b| b.cmp(a));
        Srv(ranks)
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    /// Every party is entangled with the rest.
    pub fn all_at_least(&self, d: usize) -> bool {
        !self.0.is_empty() && self.0.iter().all(|&r| r >= d)
    }

    /// The largest rank may not exceed the product of the others.
    pub fn is_algebraically_valid(&self) -> bool {
        match self.0.split_first() {
            None => false,
            Some((max, rest)) => rest.is_empty() || *max <= rest.iter().product(),
        }
    }
}

impl fmt::Display for Srv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Srv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Srv{self}")
    }
}

impl FromStr for Srv {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let ranks = inner
            .split(',')
            .map(|x| x.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| ParseError::new(format!("invalid SRV `{s}`")))?;
        if ranks.contains(&0) {
            return Err(ParseError::new(format!("SRV ranks must be positive in `{s}`")));
        }
        Ok(Srv::new(ranks))
    }
}

impl From<Srv> for String {
    fn from(s: Srv) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Srv {
    type Error = ParseError;
    fn try_from(s: String) -> Result<Self, ParseError> {
        s.parse()
    }
}

pub(super) fn bipartite_rank(state: &PhotonicState, slots: &[usize]) -> Result<usize> {
    let paths = state.slot_paths()?;
    if let Some(&bad) = slots.iter().find(|&&s| s >= paths.len()) {
        return Err(Error::Precondition(format!("slot {bad} out of range")));
    }
    let in_row = |i: usize| slots.contains(&i);
    type Key = SmallVec<[i32; 4]>;
    let mut row_keys: BTreeMap<Key, usize> = BTreeMap::new();
    let mut col_keys: BTreeMap<Key, usize> = BTreeMap::new();
    let mut entries: Vec<(Key, Key, &CycNum)> = Vec::with_capacity(state.len());
    for (t, a) in state.iter() {
        let (mut rk, mut ck) = (Key::new(), Key::new());
        for (i, l) in t.labels().iter().enumerate() {
            if in_row(i) {
                rk.push(l.oam);
            } else {
                ck.push(l.oam);
            }
        }
        row_keys.insert(rk.clone(), 0);
        col_keys.insert(ck.clone(), 0);
        entries.push((rk, ck, a));
    }
    // Lexicographic row/column order.
    for (i, v) in row_keys.values_mut().enumerate() {
        *v = i;
    }
    for (i, v) in col_keys.values_mut().enumerate() {
        *v = i;
    }
    let mut m = vec![vec![CycNum::zero(); col_keys.len()]; row_keys.len()];
    for (rk, ck, a) in entries {
        m[row_keys[&rk]][col_keys[&ck]] = a.clone();
    }
    Ok(rank(m))
}

pub(super) fn srv(state: &PhotonicState) -> Result<Srv> {
    let n = state.slot_paths()?.len();
    let ranks = (0..n).map(|slot| bipartite_rank(state, &[slot])).collect::<Result<Vec<_>>>()?;
    let srv = Srv::new(ranks);
    debug_assert!(srv.is_algebraically_valid(), "impossible SRV {srv}");
    Ok(srv)
}
