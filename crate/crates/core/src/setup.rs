//! Experiments: two sources, an ordered element chain and a detection pattern.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::elements::{spdc_state, Element, Spdc};
use crate::error::{Error, ParseError, Result};
use crate::state::{CutoffPolicy, DetectionSpec, ModeLabel, Path, PhotonicState, Rules, MAX_PATHS};

pub const DEFAULT_MAX_ELEMENTS: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    pub max_oam: i32,
    /// Fail instead of dropping amplitude pushed past `max_oam`.
    pub strict: bool,
    /// Include the double-pair emissions of each crystal.
    pub double_emission: bool,
    pub max_elements: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { max_oam: 2, strict: false, double_emission: true, max_elements: DEFAULT_MAX_ELEMENTS }
    }
}

impl SimOptions {
    pub fn cutoff(&self) -> CutoffPolicy {
        CutoffPolicy { max_oam: self.max_oam, strict: self.strict }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Setup {
    pub n_paths: u8,
    pub options: SimOptions,
    pub sources: [Spdc; 2],
    pub elements: Vec<Element>,
    pub detection: DetectionSpec,
}

/// Full simulation output, kept for diagnostics.
#[derive(Clone, Debug)]
pub struct Simulation {
    /// Four-photon state before detection.
    pub full: PhotonicState,
    pub heralded: PhotonicState,
    pub dropped: u64,
}

impl Setup {
    /// Crystals on (a,b) and (c,d), trigger d:0, coincidences a,b,c.
    pub fn standard(dim: u32) -> Self {
        Setup {
            n_paths: 4,
            options: SimOptions::default(),
            sources: [Spdc::new(Path(0), Path(1), dim), Spdc::new(Path(2), Path(3), dim)],
            elements: Vec::new(),
            detection: DetectionSpec {
                trigger: ModeLabel::new(Path(3), 0),
                coincidence: vec![Path(0), Path(1), Path(2)],
            },
        }
    }

    pub fn with_elements(mut self, elements: Vec<Element>) -> Self {
        self.elements = elements;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_paths > MAX_PATHS {
            return Err(Error::InvalidSetup(format!("path count must be in 1..={MAX_PATHS}")));
        }
        if self.elements.len() > self.options.max_elements {
            return Err(Error::InvalidSetup(format!(
                "{} elements exceed the maximum of {}",
                self.elements.len(),
                self.options.max_elements
            )));
        }
        for s in &self.sources {
            Element::Spdc(s.clone()).validate(self.n_paths, self.options.max_oam)?;
        }
        for e in &self.elements {
            if matches!(e, Element::Spdc(_)) {
                return Err(Error::InvalidSetup(format!("{e}: sources belong in the header")));
            }
            e.validate(self.n_paths, self.options.max_oam)?;
        }
        self.detection.validate()?;
        if let Some(p) = self.detection.detector_paths().find(|p| p.0 >= self.n_paths) {
            return Err(Error::InvalidSetup(format!("detector path {p} is not in the setup")));
        }
        if self.detection.trigger.oam.abs() > self.options.max_oam {
            return Err(Error::InvalidSetup("trigger mode outside the encoding space".into()));
        }
        Ok(())
    }

    /// Rules of the whole chain composed into a single substitution.
    pub fn chain_rules(&self) -> Result<Rules> {
        let cutoff = self.options.cutoff();
        self.elements.iter().try_fold(Rules::identity(), |acc, e| Ok(acc.then(&e.rules(&cutoff)?)))
    }

    pub fn source_state(&self) -> Result<PhotonicState> {
        spdc_state(&self.sources, self.options.double_emission)
    }

    /// The heralded three-photon state (possibly empty).
    pub fn simulate(&self) -> Result<PhotonicState> {
        if self.options.strict {
            return Ok(self.simulate_stepwise()?.heralded);
        }
        self.validate()?;
        let rules = self.chain_rules()?;
        Ok(self.source_state()?.substitute_heralded(&rules, &self.options.cutoff(), &self.detection))
    }

    /// Element-by-element simulation keeping the pre-detection state and the
    /// cutoff drop count.
    pub fn simulate_stepwise(&self) -> Result<Simulation> {
        self.validate()?;
        let cutoff = self.options.cutoff();
        let mut state = self.source_state()?;
        let mut dropped = 0;
        for e in &self.elements {
            let out = state.substitute(&e.rules(&cutoff)?, &cutoff)?;
            dropped += out.dropped;
            state = out.state;
        }
        let heralded = state.postselect(&self.detection);
        Ok(Simulation { full: state, heralded, dropped })
    }

    /// For every path, a bit mask of the crystals (bit 0: first, bit 1:
    /// second) whose photons can reach it through the two-path couplings.
    pub fn path_sources(&self) -> Vec<u8> {
        let mut reach = vec![0u8; self.n_paths.max(MAX_PATHS) as usize];
        for (bit, s) in [1u8, 2].into_iter().zip(&self.sources) {
            reach[s.a.index()] |= bit;
            reach[s.b.index()] |= bit;
        }
        for (a, b) in self.elements.iter().flat_map(Element::couplings) {
            let both = reach[a.index()] | reach[b.index()];
            reach[a.index()] = both;
            reach[b.index()] = both;
        }
        reach.truncate(self.n_paths as usize);
        reach
    }

    /// Whether some detector path can receive photons from both crystals.
    /// Needs no state: only the order of two-path couplings matters.
    pub fn mixes_pairs(&self) -> bool {
        let reach = self.path_sources();
        self.detection.detector_paths().any(|p| reach.get(p.index()) == Some(&3))
    }

    /// Greedy single-element removal: drops the earliest element whose
    /// removal keeps `keeps` true, and repeats until nothing can go.
    pub fn simplify(&self, mut keeps: impl FnMut(&Setup) -> bool) -> Result<Setup> {
        if !keeps(self) {
            return Err(Error::ObjectiveNotSatisfied);
        }
        let mut cur = self.clone();
        'outer: loop {
            for i in 0..cur.elements.len() {
                let mut cand = cur.clone();
                cand.elements.remove(i);
                if keeps(&cand) {
                    cur = cand;
                    continue 'outer;
                }
            }
            return Ok(cur);
        }
    }

    /// The element chain as a reusable toolbox entry. Nested composites are
    /// inlined so that repeated augmentation does not deepen the nesting.
    pub fn to_composite(&self, name: &str) -> Element {
        Element::Composite { name: name.to_string(), inner: self.elements.iter().flat_map(Element::flatten).collect() }
    }

    /// Horizontal wiring diagram, one row per path, one column per element.
    pub fn render(&self) -> String {
        let tags: Vec<String> = self.elements.iter().map(short_tag).collect();
        let mut rows: Vec<String> = (0..self.n_paths)
            .map(|i| {
                let p = Path(i);
                let src = self
                    .sources
                    .iter()
                    .position(|s| s.a == p || s.b == p)
                    .map_or("──".to_string(), |k| format!("S{}", k + 1));
                format!("{p} {src}─")
            })
            .collect();
        for (e, tag) in self.elements.iter().zip(&tags) {
            let touched = e.paths();
            let width = tag.chars().count() + 2;
            for (i, row) in rows.iter_mut().enumerate() {
                if touched.contains(&Path(i as u8)) {
                    let _ = write!(row, "[{tag}]");
                } else {
                    row.push_str(&"─".repeat(width));
                }
                row.push('─');
            }
        }
        let mut out = String::new();
        for (i, row) in rows.into_iter().enumerate() {
            let p = Path(i as u8);
            let det = if p == self.detection.trigger.path {
                format!(" ▷ trigger {}", self.detection.trigger)
            } else if self.detection.coincidence.contains(&p) {
                " ▷ detector".to_string()
            } else {
                String::new()
            };
            let _ = writeln!(out, "{row}{det}");
        }
        out
    }
}

fn short_tag(e: &Element) -> String {
    match e {
        Element::Spdc(_) => "SPDC".into(),
        Element::BeamSplitter(..) => "BS".into(),
        Element::ParitySorter(..) => "LI".into(),
        Element::Reflection(_) => "R".into(),
        Element::DovePrism { k, .. } => format!("D{k}"),
        Element::Hologram { shift, .. } => format!("H{shift:+}"),
        Element::PhaseShifter { k, .. } => format!("P{k}"),
        Element::Composite { name, .. } => name.clone(),
    }
}

/// Line-oriented setup file: header lines `key value`, then one element
/// per line. Blank lines and `#` comments are skipped on input.
impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = &self.options;
        writeln!(f, "paths {}", self.n_paths)?;
        writeln!(f, "max_oam {}", o.max_oam)?;
        writeln!(f, "strict {}", o.strict)?;
        writeln!(f, "double_emission {}", o.double_emission)?;
        writeln!(f, "max_elements {}", o.max_elements)?;
        for s in &self.sources {
            writeln!(f, "source {s}")?;
        }
        writeln!(f, "trigger {}", self.detection.trigger)?;
        let coinc: Vec<String> = self.detection.coincidence.iter().map(Path::to_string).collect();
        writeln!(f, "coincidence {}", coinc.join(","))?;
        for e in &self.elements {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ParseError> {
    v.parse().map_err(|_| ParseError::new(format!("invalid value `{v}` for {key}")))
}

impl FromStr for Setup {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let mut options = SimOptions::default();
        let mut n_paths = None;
        let mut sources = Vec::new();
        let mut trigger = None;
        let mut coincidence = None;
        let mut elements = Vec::new();
        for (no, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |e: ParseError| ParseError::at_line(no + 1, e);
            let (key, value) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let value = value.trim();
            let flag =
                |v: &str| v.parse::<bool>().map_err(|_| at(ParseError::new(format!("invalid flag `{v}` for {key}"))));
            let header = matches!(
                key,
                "paths"
                    | "max_oam"
                    | "strict"
                    | "double_emission"
                    | "max_elements"
                    | "source"
                    | "trigger"
                    | "coincidence"
            );
            if header && !elements.is_empty() {
                return Err(at(ParseError::new("header lines must precede elements")));
            }
            match key {
                "paths" => n_paths = Some(num(key, value).map_err(at)?),
                "max_oam" => options.max_oam = num(key, value).map_err(at)?,
                "max_elements" => options.max_elements = num(key, value).map_err(at)?,
                "strict" => options.strict = flag(value)?,
                "double_emission" => options.double_emission = flag(value)?,
                "source" => match value.parse::<Element>().map_err(at)? {
                    Element::Spdc(spdc) => sources.push(spdc),
                    other => return Err(at(ParseError::new(format!("`{other}` is not a source")))),
                },
                "trigger" => trigger = Some(value.parse::<ModeLabel>().map_err(at)?),
                "coincidence" => {
                    coincidence = Some(value.split(',').map(str::parse).collect::<Result<Vec<Path>, _>>().map_err(at)?)
                }
                _ => elements.push(line.parse::<Element>().map_err(at)?),
            }
        }
        let missing = |what: &str| ParseError::new(format!("setup file lacks a `{what}` line"));
        let sources: [Spdc; 2] =
            sources.try_into().map_err(|_| ParseError::new("setup file needs exactly two `source` lines"))?;
        let setup = Setup {
            n_paths: n_paths.ok_or_else(|| missing("paths"))?,
            options,
            sources,
            elements,
            detection: DetectionSpec {
                trigger: trigger.ok_or_else(|| missing("trigger"))?,
                coincidence: coincidence.ok_or_else(|| missing("coincidence"))?,
            },
        };
        setup.validate().map_err(|e| ParseError::new(e.to_string()))?;
        Ok(setup)
    }
}
