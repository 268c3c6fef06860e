//! The optical toolbox.
//!
//! Every element except the SPDC source is a linear single-photon
//! substitution rule set over (path, OAM) modes. Conventions:
//!
//! | element | rule |
//! |---|---|
//! | `BS[a,b]` | a†(m) ↦ (b†(m) + i·a†(−m))/√2, b†(m) ↦ (a†(m) + i·b†(−m))/√2 |
//! | `REFL[a]` | a†(m) ↦ i·a†(−m) |
//! | `Dove[a,k]` | a†(m) ↦ ζ^(2km)·a†(−m) |
//! | `Holo[a,s]` | a†(m) ↦ a†(m+s) |
//! | `PS[a,k]` | a†(m) ↦ ζ^k·a†(m) |
//! | `LI[a,b]` | odd m swap paths a ↔ b, even m stay |
//!
//! Reflections flip the sign of OAM. Dove angles are restricted to multiples
//! of π/8 so that all phases stay on the π/4 lattice.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, ParseError, Result};
use crate::exact::CycNum;
use crate::state::{CutoffPolicy, FockTerm, ModeLabel, Path, PhotonicState, Rules};

/// A down-conversion crystal emitting Σₘ a†(m)·b†(−m) with unit amplitudes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Spdc {
    pub a: Path,
    pub b: Path,
    pub dim: u32,
    /// Optional inclusive OAM window applied to the `a` photon.
    pub window: Option<(i32, i32)>,
}

impl Spdc {
    pub fn new(a: Path, b: Path, dim: u32) -> Self {
        Spdc { a, b, dim, window: None }
    }

    pub fn with_window(mut self, lo: i32, hi: i32) -> Self {
        self.window = Some((lo, hi));
        self
    }

    /// OAM values of the `a` photon: `dim` consecutive integers centred on zero
    /// (`−⌊dim/2⌋ ..`), optionally restricted to the window.
    pub fn modes(&self) -> Vec<i32> {
        let lo = -(self.dim as i32 / 2);
        (lo..lo + self.dim as i32).filter(|m| self.window.is_none_or(|(a, b)| (a..=b).contains(m))).collect()
    }

    /// The single-pair emission operator as a two-photon state.
    pub fn emission(&self) -> PhotonicState {
        let terms = self
            .modes()
            .into_iter()
            .map(|m| (FockTerm::new([ModeLabel::new(self.a, m), ModeLabel::new(self.b, -m)]), CycNum::one()));
        PhotonicState::from_terms(2, terms).expect("two-photon terms")
    }
}

impl fmt::Display for Spdc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SPDC[{},{},dim={}", self.a, self.b, self.dim)?;
        if let Some((lo, hi)) = self.window {
            write!(f, ",modes={lo}..{hi}")?;
        }
        f.write_str("]")
    }
}

/// Four-photon state of two crystals: the cross term E₁E₂ plus, when
/// `double_emission` is set, the double pairs E₁² and E₂².
pub fn spdc_state(crystals: &[Spdc], double_emission: bool) -> Result<PhotonicState> {
    let [c1, c2] = crystals else {
        return Err(Error::InvalidSetup(format!(
            "four-photon sources need exactly two crystals, got {}",
            crystals.len()
        )));
    };
    let p1: BTreeSet<Path> = [c1.a, c1.b].into();
    let p2: BTreeSet<Path> = [c2.a, c2.b].into();
    if p1.len() != 2 || p2.len() != 2 || !p1.is_disjoint(&p2) {
        return Err(Error::InvalidSetup(format!("crystal paths must be distinct: {c1} and {c2}")));
    }
    let (e1, e2) = (c1.emission(), c2.emission());
    let mut state = e1.product(&e2);
    if double_emission {
        state = state.sum(&e1.product(&e1))?.sum(&e2.product(&e2))?;
    }
    Ok(state)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Element {
    Spdc(Spdc),
    BeamSplitter(Path, Path),
    Reflection(Path),
    DovePrism {
        path: Path,
        k: u8,
    },
    Hologram {
        path: Path,
        shift: i32,
    },
    PhaseShifter {
        path: Path,
        k: u8,
    },
    /// Leach interferometer: sorts odd OAM into the other path.
    ParitySorter(Path, Path),
    Composite {
        name: String,
        inner: Vec<Element>,
    },
}

impl Element {
    /// Paths touched, in first-use order, without repeats.
    pub fn paths(&self) -> Vec<Path> {
        let mut out = Vec::new();
        self.collect_paths(&mut out);
        out
    }

    fn collect_paths(&self, out: &mut Vec<Path>) {
        let mut push = |p: Path| {
            if !out.contains(&p) {
                out.push(p);
            }
        };
        match self {
            Element::Spdc(s) => {
                push(s.a);
                push(s.b);
            }
            Element::BeamSplitter(a, b) | Element::ParitySorter(a, b) => {
                push(*a);
                push(*b);
            }
            Element::Reflection(p)
            | Element::DovePrism { path: p, .. }
            | Element::Hologram { path: p, .. }
            | Element::PhaseShifter { path: p, .. } => push(*p),
            Element::Composite { inner, .. } => inner.iter().for_each(|e| e.collect_paths(out)),
        }
    }

    /// Two-path couplings in encounter order (composites flattened).
    pub fn couplings(&self) -> Vec<(Path, Path)> {
        match self {
            Element::BeamSplitter(a, b) | Element::ParitySorter(a, b) => vec![(*a, *b)],
            Element::Composite { inner, .. } => inner.iter().flat_map(Element::couplings).collect(),
            _ => Vec::new(),
        }
    }

    /// Same element with every path renamed through `f`.
    pub fn map_paths(&self, f: &impl Fn(Path) -> Path) -> Element {
        match self {
            Element::Spdc(s) => Element::Spdc(Spdc { a: f(s.a), b: f(s.b), ..s.clone() }),
            Element::BeamSplitter(a, b) => Element::BeamSplitter(f(*a), f(*b)),
            Element::ParitySorter(a, b) => Element::ParitySorter(f(*a), f(*b)),
            Element::Reflection(p) => Element::Reflection(f(*p)),
            Element::DovePrism { path, k } => Element::DovePrism { path: f(*path), k: *k },
            Element::Hologram { path, shift } => Element::Hologram { path: f(*path), shift: *shift },
            Element::PhaseShifter { path, k } => Element::PhaseShifter { path: f(*path), k: *k },
            Element::Composite { name, inner } => {
                Element::Composite { name: name.clone(), inner: inner.iter().map(|e| e.map_paths(f)).collect() }
            }
        }
    }

    /// The primitive elements in encounter order, composites inlined.
    pub fn flatten(&self) -> Vec<Element> {
        match self {
            Element::Composite { inner, .. } => inner.iter().flat_map(Element::flatten).collect(),
            other => vec![other.clone()],
        }
    }

    pub fn validate(&self, n_paths: u8, max_oam: i32) -> Result<()> {
        if let Some(p) = self.paths().into_iter().find(|p| p.0 >= n_paths) {
            return Err(Error::InvalidSetup(format!("{self}: path {p} is not in the setup")));
        }
        match self {
            Element::BeamSplitter(a, b) | Element::ParitySorter(a, b) if a == b => {
                Err(Error::InvalidSetup(format!("{self}: a two-path element needs distinct paths")))
            }
            Element::DovePrism { k, .. } | Element::PhaseShifter { k, .. } if *k >= 8 => {
                Err(Error::InvalidSetup(format!("{self}: phase step must be in 0..7")))
            }
            Element::Hologram { shift, .. } if shift.abs() > 2 * max_oam => {
                Err(Error::InvalidSetup(format!("{self}: |shift| exceeds {}", 2 * max_oam)))
            }
            Element::Spdc(s) if s.dim == 0 || s.modes().iter().any(|m| m.abs() > max_oam) => {
                Err(Error::InvalidSetup(format!("{self}: emission modes exceed the encoding space")))
            }
            Element::Spdc(s) if s.a == s.b => Err(Error::InvalidSetup(format!("{self}: crystal paths must differ"))),
            Element::Composite { inner, .. } => inner.iter().try_for_each(|e| match e {
                Element::Spdc(_) => Err(Error::InvalidSetup("a composite cannot contain a source".into())),
                _ => e.validate(n_paths, max_oam),
            }),
            _ => Ok(()),
        }
    }

    /// Substitution rules over the in-range modes `|m| <= cutoff.max_oam`.
    pub fn rules(&self, cutoff: &CutoffPolicy) -> Result<Rules> {
        let range = -cutoff.max_oam..=cutoff.max_oam;
        let lbl = ModeLabel::new;
        let mut r = Rules::identity();
        match self {
            Element::Spdc(_) => return Err(Error::Precondition("a source has no substitution rules".into())),
            Element::BeamSplitter(a, b) => {
                let h = CycNum::inv_sqrt2();
                let ih = &h * &CycNum::i();
                for m in range {
                    r.insert(lbl(*a, m), vec![(h.clone(), lbl(*b, m)), (ih.clone(), lbl(*a, -m))]);
                    r.insert(lbl(*b, m), vec![(h.clone(), lbl(*a, m)), (ih.clone(), lbl(*b, -m))]);
                }
            }
            Element::Reflection(p) => {
                for m in range {
                    r.insert(lbl(*p, m), vec![(CycNum::i(), lbl(*p, -m))]);
                }
            }
            Element::DovePrism { path, k } => {
                for m in range {
                    let phase = CycNum::phase((2 * *k as i64 * m as i64).rem_euclid(8));
                    r.insert(lbl(*path, m), vec![(phase, lbl(*path, -m))]);
                }
            }
            Element::Hologram { path, shift } => {
                for m in range {
                    r.insert(lbl(*path, m), vec![(CycNum::one(), lbl(*path, m + shift))]);
                }
            }
            Element::PhaseShifter { path, k } => {
                for m in range {
                    r.insert(lbl(*path, m), vec![(CycNum::phase(*k as i64), lbl(*path, m))]);
                }
            }
            Element::ParitySorter(a, b) => {
                for m in range {
                    let (ta, tb) = if m.rem_euclid(2) == 0 { (*a, *b) } else { (*b, *a) };
                    r.insert(lbl(*a, m), vec![(CycNum::one(), lbl(ta, m))]);
                    r.insert(lbl(*b, m), vec![(CycNum::one(), lbl(tb, m))]);
                }
            }
            Element::Composite { inner, .. } => {
                let key = (self.clone(), *cutoff);
                if let Some(hit) = COMPOSITE_RULES.with(|c| c.borrow().get(&key).cloned()) {
                    return Ok(hit);
                }
                for e in inner {
                    r = r.then(&e.rules(cutoff)?);
                }
                COMPOSITE_RULES.with(|c| {
                    let mut c = c.borrow_mut();
                    if c.len() >= COMPOSITE_CACHE_LIMIT {
                        c.clear();
                    }
                    c.insert(key, r.clone());
                });
            }
        }
        Ok(r)
    }
}

const COMPOSITE_CACHE_LIMIT: usize = 4096;

thread_local! {
    static COMPOSITE_RULES: RefCell<HashMap<(Element, CutoffPolicy), Rules>> = RefCell::new(HashMap::new());
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Spdc(s) => write!(f, "{s}"),
            Element::BeamSplitter(a, b) => write!(f, "BS[{a},{b}]"),
            Element::ParitySorter(a, b) => write!(f, "LI[{a},{b}]"),
            Element::Reflection(p) => write!(f, "REFL[{p}]"),
            Element::DovePrism { path, k } => write!(f, "Dove[{path},k={k}]"),
            Element::Hologram { path, shift } => write!(f, "Holo[{path},{shift:+}]"),
            Element::PhaseShifter { path, k } => write!(f, "PS[{path},k={k}]"),
            Element::Composite { name, inner } => {
                write!(f, "COMP[{name}]{{")?;
                for (i, e) in inner.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Splits on `sep` at bracket depth zero.
pub(crate) fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '[' | '{' | '(' => depth += 1,
            ']' | '}' | ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_k(arg: &str, ctx: &str) -> Result<u8, ParseError> {
    arg.trim()
        .strip_prefix("k=")
        .and_then(|k| k.parse::<u8>().ok())
        .filter(|k| *k < 8)
        .ok_or_else(|| ParseError::new(format!("invalid phase step in `{ctx}`")))
}

impl FromStr for Element {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let s = s.trim();
        let bad = |why: &str| ParseError::new(format!("invalid element `{s}`: {why}"));
        let open = s.find('[').ok_or_else(|| bad("missing `[`"))?;
        let close = s.find(']').ok_or_else(|| bad("missing `]`"))?;
        let kind = &s[..open];
        let args: Vec<&str> = s[open + 1..close].split(',').map(str::trim).collect();
        let tail = s[close + 1..].trim();
        if kind != "COMP" && !tail.is_empty() {
            return Err(bad("trailing characters"));
        }
        let path = |i: usize| -> Result<Path, ParseError> { args.get(i).ok_or_else(|| bad("missing path"))?.parse() };
        let arity = |n: usize| -> Result<(), ParseError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(bad(&format!("expected {n} arguments")))
            }
        };
        Ok(match kind {
            "BS" => {
                arity(2)?;
                Element::BeamSplitter(path(0)?, path(1)?)
            }
            "LI" => {
                arity(2)?;
                Element::ParitySorter(path(0)?, path(1)?)
            }
            "REFL" => {
                arity(1)?;
                Element::Reflection(path(0)?)
            }
            "Dove" => {
                arity(2)?;
                Element::DovePrism { path: path(0)?, k: parse_k(args[1], s)? }
            }
            "PS" => {
                arity(2)?;
                Element::PhaseShifter { path: path(0)?, k: parse_k(args[1], s)? }
            }
            "Holo" => {
                arity(2)?;
                let shift = args[1].trim_start_matches('+').parse().map_err(|_| bad("invalid shift"))?;
                Element::Hologram { path: path(0)?, shift }
            }
            "SPDC" => {
                if !(3..=4).contains(&args.len()) {
                    return Err(bad("expected SPDC[a,b,dim=n(,modes=lo..hi)]"));
                }
                let dim =
                    args[2].strip_prefix("dim=").and_then(|d| d.parse().ok()).ok_or_else(|| bad("invalid dim"))?;
                let mut spdc = Spdc::new(path(0)?, path(1)?, dim);
                if let Some(w) = args.get(3) {
                    let (lo, hi) = w
                        .strip_prefix("modes=")
                        .and_then(|r| r.split_once(".."))
                        .and_then(|(lo, hi)| Some((lo.parse().ok()?, hi.parse().ok()?)))
                        .ok_or_else(|| bad("invalid modes window"))?;
                    spdc = spdc.with_window(lo, hi);
                }
                Element::Spdc(spdc)
            }
            "COMP" => {
                arity(1)?;
                let name = args[0].to_string();
                if name.is_empty() || name.contains(|c: char| "[]{};,".contains(c) || c.is_whitespace()) {
                    return Err(bad("invalid composite name"));
                }
                let body = tail
                    .strip_prefix('{')
                    .and_then(|b| b.strip_suffix('}'))
                    .ok_or_else(|| bad("composite body must be `{...}`"))?;
                let inner = if body.trim().is_empty() {
                    Vec::new()
                } else {
                    split_top_level(body, ';').into_iter().map(str::parse).collect::<Result<Vec<Element>, _>>()?
                };
                Element::Composite { name, inner }
            }
            _ => return Err(bad("unknown element kind")),
        })
    }
}

/// A toolbox entry: an element kind plus the discrete parameter values to
/// draw from. Paths are drawn at instantiation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Template {
    BeamSplitter,
    ParitySorter,
    Reflection,
    DovePrism(Vec<u8>),
    Hologram(Vec<i32>),
    PhaseShifter(Vec<u8>),
    /// A stored chain, re-wired onto freshly drawn paths.
    Composite(Element),
}

impl Template {
    /// Number of distinct paths an instance needs.
    pub fn arity(&self) -> usize {
        match self {
            Template::BeamSplitter | Template::ParitySorter => 2,
            Template::Composite(e) => e.paths().len(),
            _ => 1,
        }
    }

    /// Every distinct placement on `n_paths` paths. Beam splitters and parity
    /// sorters act symmetrically on their two paths, so only `a < b` is listed.
    pub fn all_instances(&self, n_paths: u8) -> Vec<Element> {
        let paths = || (0..n_paths).map(Path);
        let pairs = || paths().flat_map(move |a| paths().filter(move |b| a < *b).map(move |b| (a, b)));
        match self {
            Template::BeamSplitter => pairs().map(|(a, b)| Element::BeamSplitter(a, b)).collect(),
            Template::ParitySorter => pairs().map(|(a, b)| Element::ParitySorter(a, b)).collect(),
            Template::Reflection => paths().map(Element::Reflection).collect(),
            Template::DovePrism(ks) => {
                paths().flat_map(|path| ks.iter().map(move |&k| Element::DovePrism { path, k })).collect()
            }
            Template::Hologram(ss) => {
                paths().flat_map(|path| ss.iter().map(move |&shift| Element::Hologram { path, shift })).collect()
            }
            Template::PhaseShifter(ks) => {
                paths().flat_map(|path| ks.iter().map(move |&k| Element::PhaseShifter { path, k })).collect()
            }
            Template::Composite(e) => {
                let ports = e.paths();
                (0..n_paths as usize)
                    .permutations(ports.len())
                    .map(|pick| e.map_paths(&|p: Path| Path(pick[ports.iter().position(|q| *q == p).unwrap()] as u8)))
                    .collect()
            }
        }
    }

    pub fn instantiate<R: Rng + ?Sized>(&self, n_paths: u8, rng: &mut R) -> Element {
        let picks = sample(rng, n_paths as usize, self.arity()).into_vec();
        let at = |i: usize| Path(picks[i] as u8);
        match self {
            Template::BeamSplitter => Element::BeamSplitter(at(0), at(1)),
            Template::ParitySorter => Element::ParitySorter(at(0), at(1)),
            Template::Reflection => Element::Reflection(at(0)),
            Template::DovePrism(ks) => Element::DovePrism { path: at(0), k: ks[rng.gen_range(0..ks.len())] },
            Template::Hologram(ss) => Element::Hologram { path: at(0), shift: ss[rng.gen_range(0..ss.len())] },
            Template::PhaseShifter(ks) => Element::PhaseShifter { path: at(0), k: ks[rng.gen_range(0..ks.len())] },
            Template::Composite(e) => {
                let ports = e.paths();
                e.map_paths(&|p: Path| at(ports.iter().position(|q| *q == p).expect("port")))
            }
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, name: &str, xs: &[T]) -> fmt::Result {
            write!(f, "{name}(")?;
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str("|")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str(")")
        }
        match self {
            Template::BeamSplitter => f.write_str("BS"),
            Template::ParitySorter => f.write_str("LI"),
            Template::Reflection => f.write_str("REFL"),
            Template::DovePrism(ks) => list(f, "Dove", ks),
            Template::Hologram(ss) => list(f, "Holo", ss),
            Template::PhaseShifter(ks) => list(f, "PS", ks),
            Template::Composite(e) => write!(f, "{e}"),
        }
    }
}

impl FromStr for Template {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let s = s.trim();
        if s.starts_with("COMP[") {
            return Ok(Template::Composite(s.parse()?));
        }
        let (name, params) = match s.split_once('(') {
            Some((n, rest)) => {
                (n, Some(rest.strip_suffix(')').ok_or_else(|| ParseError::new(format!("unbalanced `(` in `{s}`")))?))
            }
            None => (s, None),
        };
        fn values<T: FromStr>(p: &str, ctx: &str) -> Result<Vec<T>, ParseError> {
            let v = p
                .split('|')
                .map(|x| x.trim().trim_start_matches('+').parse::<T>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| ParseError::new(format!("invalid parameter list in `{ctx}`")))?;
            if v.is_empty() {
                return Err(ParseError::new(format!("empty parameter list in `{ctx}`")));
            }
            Ok(v)
        }
        let phase_steps = |p: Option<&str>, default: Vec<u8>| -> Result<Vec<u8>, ParseError> {
            let ks = p.map_or(Ok(default), |p| values::<u8>(p, s))?;
            if ks.iter().any(|k| *k >= 8) {
                return Err(ParseError::new(format!("phase steps must be in 0..7 in `{s}`")));
            }
            Ok(ks)
        };
        let no_params = |t: Template| match params {
            None => Ok(t),
            Some(_) => Err(ParseError::new(format!("`{name}` takes no parameters"))),
        };
        match name {
            "BS" => no_params(Template::BeamSplitter),
            "LI" => no_params(Template::ParitySorter),
            "REFL" => no_params(Template::Reflection),
            "Dove" => Ok(Template::DovePrism(phase_steps(params, (0..8).collect())?)),
            "PS" => Ok(Template::PhaseShifter(phase_steps(params, (1..8).collect())?)),
            "Holo" => Ok(Template::Hologram(params.map_or(Ok(vec![-2, -1, 1, 2]), |p| values::<i32>(p, s))?)),
            _ => Err(ParseError::new(format!("unknown toolbox entry `{s}`"))),
        }
    }
}

/// The ordered list of templates random setups draw from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Toolbox {
    templates: Vec<Template>,
}

impl Toolbox {
    pub fn new(templates: Vec<Template>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::Config("toolbox must not be empty".into()));
        }
        Ok(Toolbox { templates })
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Checks every template can be placed on `n_paths` paths.
    pub fn validate(&self, n_paths: u8, max_oam: i32) -> Result<()> {
        for t in &self.templates {
            if t.arity() > n_paths as usize {
                return Err(Error::Config(format!("toolbox entry {t} needs {} paths", t.arity())));
            }
            match t {
                Template::Hologram(ss) if ss.iter().any(|s| s.abs() > 2 * max_oam) => {
                    return Err(Error::Config(format!("{t}: shift exceeds {}", 2 * max_oam)))
                }
                Template::Composite(e) => e.validate(MAX_VALIDATE_PATHS, max_oam)?,
                _ => {}
            }
        }
        Ok(())
    }

    /// Appends a composite unless an identical chain is already present.
    /// Returns whether the toolbox changed.
    pub fn add_composite(&mut self, element: Element) -> bool {
        let Element::Composite { inner, .. } = &element else {
            return false;
        };
        let duplicate = self.templates.iter().any(|t| match t {
            Template::Composite(Element::Composite { inner: other, .. }) => same_chain(inner, other),
            _ => false,
        });
        if duplicate {
            return false;
        }
        self.templates.push(Template::Composite(element));
        true
    }
}

const MAX_VALIDATE_PATHS: u8 = crate::state::MAX_PATHS;

/// Equal up to a renaming of paths (composites are re-wired when placed).
fn same_chain(a: &[Element], b: &[Element]) -> bool {
    let canon = |chain: &[Element]| -> String {
        let wrapped = Element::Composite { name: String::new(), inner: chain.to_vec() };
        let ports = wrapped.paths();
        let renamed = wrapped.map_paths(&|p: Path| Path(ports.iter().position(|q| *q == p).unwrap() as u8));
        renamed.to_string()
    };
    canon(a) == canon(b)
}

impl Default for Toolbox {
    fn default() -> Self {
        Toolbox {
            templates: vec![
                Template::BeamSplitter,
                Template::ParitySorter,
                Template::Reflection,
                Template::DovePrism((0..8).collect()),
                Template::Hologram(vec![-2, -1, 1, 2]),
                Template::PhaseShifter((1..8).collect()),
            ],
        }
    }
}

impl fmt::Display for Toolbox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.templates.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for Toolbox {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let templates = split_top_level(s, ',')
            .into_iter()
            .flat_map(|chunk| chunk.lines())
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::parse)
            .collect::<Result<Vec<Template>, _>>()?;
        Toolbox::new(templates).map_err(|e| ParseError::new(e.to_string()))
    }
}
