//! Literature phase labels for parameter points.
//!
//! H3 has an analytic labeler. H1 and H2 labels come from label-map CSV files
//! generated from digitized boundary polygons (`data/*_boundaries.toml`).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{Model, Params};

/// Coordinate tolerance for matching map entries.
pub const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseLabel {
    Haldane,
    Neel,
    Ferromagnetic,
    LargeD,
    XY1,
    XY2,
    Dimer,
    Trimer,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 8] = [
        PhaseLabel::Haldane,
        PhaseLabel::Neel,
        PhaseLabel::Ferromagnetic,
        PhaseLabel::LargeD,
        PhaseLabel::XY1,
        PhaseLabel::XY2,
        PhaseLabel::Dimer,
        PhaseLabel::Trimer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::Haldane => "Haldane",
            PhaseLabel::Neel => "Neel",
            PhaseLabel::Ferromagnetic => "Ferromagnetic",
            PhaseLabel::LargeD => "LargeD",
            PhaseLabel::XY1 => "XY1",
            PhaseLabel::XY2 => "XY2",
            PhaseLabel::Dimer => "Dimer",
            PhaseLabel::Trimer => "Trimer",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhaseLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// Phases occurring in each model's diagram.
pub fn model_phases(model: Model) -> &'static [PhaseLabel] {
    use PhaseLabel::*;
    match model {
        Model::H1 => &[Haldane, Neel, Ferromagnetic, LargeD, XY1, XY2],
        Model::H2 => &[Haldane, Neel, Ferromagnetic, XY1, Dimer],
        Model::H3 => &[Haldane, Ferromagnetic, Dimer, Trimer],
    }
}

pub fn check_compatible(model: Model, label: PhaseLabel) -> Result<()> {
    if model_phases(model).contains(&label) {
        Ok(())
    } else {
        Err(Error::IncompatiblePhase { model, label })
    }
}

/// Reference per-phase point counts of the canonical grids.
pub fn table1(model: Model) -> Vec<(PhaseLabel, usize)> {
    use PhaseLabel::*;
    match model {
        Model::H1 => vec![(Haldane, 288), (Neel, 2081), (Ferromagnetic, 2168), (LargeD, 1623), (XY1, 207), (XY2, 33)],
        Model::H2 => vec![(Haldane, 473), (Neel, 1284), (Ferromagnetic, 800), (XY1, 1028), (Dimer, 2815)],
        Model::H3 => vec![(Haldane, 1150), (Trimer, 575), (Ferromagnetic, 1725), (Dimer, 1150)],
    }
}

/// Bilinear-biquadratic diagram, boundaries at π/4, π/2, 5π/4 and 7π/4.
/// Each boundary belongs to the segment that starts there.
pub fn builtin_h3_labeler(theta: f64) -> PhaseLabel {
    let mut s = theta.rem_euclid(2.0 * PI) * 4.0 / PI;
    if (s - s.round()).abs() < 1e-9 {
        s = s.round();
    }
    match s {
        s if s < 1.0 => PhaseLabel::Haldane,
        s if s < 2.0 => PhaseLabel::Trimer,
        s if s < 5.0 => PhaseLabel::Ferromagnetic,
        s if s < 7.0 => PhaseLabel::Dimer,
        s if s < 8.0 => PhaseLabel::Haldane,
        _ => PhaseLabel::Haldane,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    model: Model,
    /// Sorted by (p1, p2).
    entries: Vec<(Params, PhaseLabel)>,
    provenance: String,
}

fn cmp_params(a: &Params, b: &Params) -> std::cmp::Ordering {
    a.p1().total_cmp(&b.p1()).then(a.p2().unwrap_or(0.0).total_cmp(&b.p2().unwrap_or(0.0)))
}

impl LabelMap {
    pub fn new(model: Model, mut entries: Vec<(Params, PhaseLabel)>, provenance: impl Into<String>) -> Result<Self> {
        for (p, l) in &entries {
            if p.model() != model {
                return Err(Error::Format { what: "label map", detail: format!("{} point in {model} map", p.model()) });
            }
            check_compatible(model, *l)?;
        }
        entries.sort_by(|a, b| cmp_params(&a.0, &b.0));
        Ok(Self { model, entries, provenance: provenance.into() })
    }

    /// Labels every point with `f`.
    pub fn from_fn(
        model: Model,
        points: &[Params],
        f: impl Fn(&Params) -> PhaseLabel,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        Self::new(model, points.iter().map(|p| (*p, f(p))).collect(), provenance)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn entries(&self) -> &[(Params, PhaseLabel)] {
        &self.entries
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Per-phase counts over all entries.
    pub fn counts(&self) -> BTreeMap<PhaseLabel, usize> {
        let mut out = BTreeMap::new();
        for (_, l) in &self.entries {
            *out.entry(*l).or_insert(0) += 1;
        }
        out
    }

    pub fn set(&mut self, index: usize, label: PhaseLabel) -> Result<()> {
        check_compatible(self.model, label)?;
        self.entries[index].1 = label;
        Ok(())
    }
}

/// Stored label of `params`, matched to within [`MATCH_TOL`] per coordinate.
pub fn label_point(map: &LabelMap, params: &Params) -> Result<PhaseLabel> {
    let unlabeled = || Error::Unlabeled(format!("{params} in {} map", map.model));
    if params.model() != map.model {
        return Err(unlabeled());
    }
    let (x, y) = (params.p1(), params.p2().unwrap_or(0.0));
    let start = map.entries.partition_point(|(p, _)| p.p1() < x - MATCH_TOL);
    map.entries[start..]
        .iter()
        .take_while(|(p, _)| p.p1() <= x + MATCH_TOL)
        .find(|(p, _)| (p.p2().unwrap_or(0.0) - y).abs() <= MATCH_TOL)
        .map(|(_, l)| *l)
        .ok_or_else(unlabeled)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountDelta {
    pub label: PhaseLabel,
    pub expected: usize,
    pub actual: usize,
}

impl CountDelta {
    pub fn delta(&self) -> i64 {
        self.actual as i64 - self.expected as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub model: Model,
    pub rows: Vec<CountDelta>,
}

impl CountReport {
    pub fn is_exact(&self) -> bool {
        self.rows.iter().all(|r| r.delta() == 0)
    }

    pub fn total_expected(&self) -> usize {
        self.rows.iter().map(|r| r.expected).sum()
    }

    pub fn total_actual(&self) -> usize {
        self.rows.iter().map(|r| r.actual).sum()
    }
}

impl fmt::Display for CountReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>8} {:>8} {:>6}", "phase", "expected", "actual", "delta")?;
        for r in &self.rows {
            writeln!(f, "{:<14} {:>8} {:>8} {:>+6}", r.label.as_str(), r.expected, r.actual, r.delta())?;
        }
        write!(f, "{:<14} {:>8} {:>8}", "total", self.total_expected(), self.total_actual())
    }
}

/// Compares the map's per-phase counts with `expected`. Phases present in
/// the map but missing from `expected` are reported with expected 0.
pub fn validate_counts(map: &LabelMap, expected: &[(PhaseLabel, usize)]) -> CountReport {
    let mut counts = map.counts();
    let mut rows: Vec<CountDelta> = expected
        .iter()
        .map(|(l, e)| CountDelta { label: *l, expected: *e, actual: counts.remove(l).unwrap_or(0) })
        .collect();
    rows.extend(counts.into_iter().map(|(label, actual)| CountDelta { label, expected: 0, actual }));
    CountReport { model: map.model, rows }
}

/// Formats a float so that parsing it back is lossless.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn parse_float(s: &str, what: &'static str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Format { what, detail: format!("bad number {s:?}") })
}

pub(crate) fn format_params(p: &Params) -> [String; 2] {
    [format_float(p.p1()), p.p2().map(format_float).unwrap_or_default()]
}

pub(crate) fn parse_params(model: &str, p1: &str, p2: &str, what: &'static str) -> Result<Params> {
    let model: Model = model.parse()?;
    let p1 = parse_float(p1, what)?;
    let p2 = if p2.trim().is_empty() { None } else { Some(parse_float(p2, what)?) };
    Params::from_columns(model, p1, p2)
}

const MAP_HEADER: [&str; 4] = ["model", "p1", "p2", "label"];

pub fn write_label_map<W: Write>(out: W, map: &LabelMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MAP_HEADER)?;
    for (p, l) in &map.entries {
        let [a, b] = format_params(p);
        w.write_record([map.model.name(), &a, &b, l.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a label-map CSV. The file must hold a single model.
pub fn read_label_map<R: Read>(input: R, provenance: impl Into<String>) -> Result<LabelMap> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != MAP_HEADER {
        return Err(Error::Format { what: "label map", detail: format!("expected header {}", MAP_HEADER.join(",")) });
    }
    let mut model = None;
    let mut entries = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Format { what: "label map", detail: format!("{} columns at line {}", rec.len(), entries.len() + 2) });
        }
        let p = parse_params(&rec[0], &rec[1], &rec[2], "label map")?;
        if *model.get_or_insert(p.model()) != p.model() {
            return Err(Error::Format { what: "label map", detail: "mixed models".into() });
        }
        entries.push((p, rec[3].parse()?));
    }
    let model = model.ok_or_else(|| Error::Format { what: "label map", detail: "no entries".into() })?;
    LabelMap::new(model, entries, provenance)
}

pub fn provenance_path(map_path: &Path) -> PathBuf {
    let mut s = map_path.as_os_str().to_owned();
    s.push(".provenance.txt");
    PathBuf::from(s)
}

/// Writes the CSV and its provenance sidecar.
pub fn save_label_map(path: &Path, map: &LabelMap) -> Result<()> {
    write_label_map(std::fs::File::create(path)?, map)?;
    std::fs::write(provenance_path(path), format!("{}\n", map.provenance.trim_end()))?;
    Ok(())
}

/// Reads the CSV and, if present, its provenance sidecar.
pub fn load_label_map(path: &Path) -> Result<LabelMap> {
    let provenance = std::fs::read_to_string(provenance_path(path)).unwrap_or_default();
    read_label_map(std::fs::File::open(path)?, provenance.trim_end().to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub label: PhaseLabel,
    pub vertices: Vec<[f64; 2]>,
}

impl Region {
    /// Even-odd ray casting.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let ([xi, yi], [xj, yj]) = (v[i], v[j]);
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

/// Digitized phase diagram: a priority-ordered polygon list plus the phase
/// of every point not covered by any polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub model: Model,
    pub default: PhaseLabel,
    pub regions: Vec<Region>,
    pub provenance: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagramFile {
    model: String,
    default: String,
    provenance: String,
    region: Vec<RegionFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionFile {
    label: String,
    vertices: Vec<[f64; 2]>,
}

const H1_BOUNDARIES: &str = include_str!("../data/h1_boundaries.toml");
const H2_BOUNDARIES: &str = include_str!("../data/h2_boundaries.toml");

impl PhaseDiagram {
    pub fn from_toml(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Format { what: "boundary file", detail };
        let file: DiagramFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let model: Model = file.model.parse()?;
        let default: PhaseLabel = file.default.parse()?;
        check_compatible(model, default)?;
        let mut regions = Vec::new();
        for r in file.region {
            let label: PhaseLabel = r.label.parse()?;
            check_compatible(model, label)?;
            if r.vertices.len() < 3 {
                return Err(bad(format!("{label} polygon has {} vertices", r.vertices.len())));
            }
            regions.push(Region { label, vertices: r.vertices });
        }
        Ok(Self { model, default, regions, provenance: file.provenance })
    }

    /// Shipped diagram for H1 or H2.
    pub fn builtin(model: Model) -> Option<Self> {
        let text = match model {
            Model::H1 => H1_BOUNDARIES,
            Model::H2 => H2_BOUNDARIES,
            Model::H3 => return None,
        };
        Some(Self::from_toml(text).expect("shipped boundary file parses"))
    }

    pub fn label(&self, p1: f64, p2: f64) -> PhaseLabel {
        self.regions.iter().find(|r| r.contains(p1, p2)).map_or(self.default, |r| r.label)
    }

    pub fn label_params(&self, p: &Params) -> PhaseLabel {
        self.label(p.p1(), p.p2().unwrap_or(0.0))
    }
}

/// Builds the label map of `points` from the shipped labeler of `model`.
pub fn builtin_label_map(model: Model, points: &[Params]) -> Result<LabelMap> {
    match PhaseDiagram::builtin(model) {
        Some(d) => LabelMap::from_fn(model, points, |p| d.label_params(p), d.provenance.clone()),
        None => LabelMap::from_fn(
            model,
            points,
            |p| builtin_h3_labeler(p.p1()),
            "analytic bilinear-biquadratic diagram: Haldane | pi/4 | Trimer | pi/2 | Ferromagnetic | 5pi/4 | Dimer | 7pi/4 | Haldane",
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h3_grid() -> Vec<Params> {
        (0..4600).map(|i| Params::H3 { theta: 2.0 * PI * i as f64 / 4600.0 }).collect()
    }

    #[test]
    fn label_strings_round_trip() {
        for l in PhaseLabel::ALL {
            assert_eq!(l.as_str().parse::<PhaseLabel>().unwrap(), l);
        }
        assert!(matches!("Néel".parse::<PhaseLabel>(), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn h3_labeler_examples() {
        assert_eq!(builtin_h3_labeler(0.0), PhaseLabel::Haldane);
        assert_eq!(builtin_h3_labeler(PI), PhaseLabel::Ferromagnetic);
        assert_eq!(builtin_h3_labeler(1.5 * PI), PhaseLabel::Dimer);
        assert_eq!(builtin_h3_labeler(1.75 * PI - 1e-6), PhaseLabel::Dimer);
        assert_eq!(builtin_h3_labeler(1.75 * PI), PhaseLabel::Haldane);
        assert_eq!(builtin_h3_labeler(PI / 4.0), PhaseLabel::Trimer);
        assert_eq!(builtin_h3_labeler(PI / 2.0), PhaseLabel::Ferromagnetic);
        assert_eq!(builtin_h3_labeler(1.25 * PI), PhaseLabel::Dimer);
    }

    #[test]
    fn h3_canonical_counts_exact() {
        let map = builtin_label_map(Model::H3, &h3_grid()).unwrap();
        let report = validate_counts(&map, &table1(Model::H3));
        assert!(report.is_exact(), "{report}");
        assert_eq!(report.total_actual(), 4600);
    }

    #[test]
    fn table_totals() {
        let total = |m| table1(m).iter().map(|(_, c)| c).sum::<usize>();
        assert_eq!((total(Model::H1), total(Model::H2), total(Model::H3)), (6400, 6400, 4600));
    }

    #[test]
    fn flipped_point_shows_in_deltas() {
        let mut map = builtin_label_map(Model::H3, &h3_grid()).unwrap();
        map.set(0, PhaseLabel::Dimer).unwrap();
        let report = validate_counts(&map, &table1(Model::H3));
        let d: Vec<i64> = report.rows.iter().map(CountDelta::delta).collect();
        assert_eq!(d, vec![-1, 0, 0, 1]);
    }

    #[test]
    fn lookup_and_unlabeled() {
        let map = builtin_label_map(Model::H3, &h3_grid()).unwrap();
        assert_eq!(label_point(&map, &Params::H3 { theta: 0.0 }).unwrap(), PhaseLabel::Haldane);
        assert_eq!(label_point(&map, &Params::H3 { theta: 2.0 * PI * 10.0 / 4600.0 + 1e-11 }).unwrap(), PhaseLabel::Haldane);
        assert!(matches!(label_point(&map, &Params::H3 { theta: 0.0005 }), Err(Error::Unlabeled(_))));
        assert!(matches!(label_point(&map, &Params::H1 { jz: 0.0, d: 0.0 }), Err(Error::Unlabeled(_))));
    }

    #[test]
    fn incompatible_phase_rejected() {
        let e = LabelMap::new(Model::H1, vec![(Params::H1 { jz: 0.0, d: 0.0 }, PhaseLabel::Trimer)], "");
        assert!(matches!(e, Err(Error::IncompatiblePhase { .. })));
    }

    #[test]
    fn csv_round_trip_is_byte_exact() {
        let pts: Vec<Params> = (0..5).flat_map(|i| (0..3).map(move |j| Params::H1 { jz: -4.0 + i as f64 * 0.1, d: j as f64 / 3.0 })).collect();
        let map = LabelMap::from_fn(Model::H1, &pts, |p| if p.p1() < -3.8 { PhaseLabel::Ferromagnetic } else { PhaseLabel::Neel }, "test").unwrap();
        let mut a = Vec::new();
        write_label_map(&mut a, &map).unwrap();
        let back = read_label_map(a.as_slice(), "test").unwrap();
        assert_eq!(back, map);
        let mut b = Vec::new();
        write_label_map(&mut b, &back).unwrap();
        assert_eq!(a, b);
        assert_eq!(label_point(&back, &Params::H1 { jz: -3.7, d: 1.0 / 3.0 }).unwrap(), PhaseLabel::Neel);
    }

    #[test]
    fn csv_sidecar_and_header_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h3.csv");
        let map = builtin_label_map(Model::H3, &h3_grid()[..10]).unwrap();
        save_label_map(&path, &map).unwrap();
        assert_eq!(load_label_map(&path).unwrap(), map);
        assert!(read_label_map("model,p1,label\nH3,0,Haldane\n".as_bytes(), "").is_err());
        assert!(read_label_map("model,p1,p2,label\nH3,0,,Bogus\n".as_bytes(), "").is_err());
    }

    #[test]
    fn region_contains_unit_square() {
        let r = Region { label: PhaseLabel::Neel, vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] };
        assert!(r.contains(0.5, 0.5));
        assert!(!r.contains(1.5, 0.5));
        assert!(!r.contains(0.5, -0.1));
    }

    #[test]
    fn shipped_diagrams_cover_their_phases() {
        for model in [Model::H1, Model::H2] {
            let d = PhaseDiagram::builtin(model).unwrap();
            let pts: Vec<Params> = (0..80)
                .flat_map(|i| (0..80).map(move |j| (i, j)))
                .map(|(i, j)| {
                    let (a, b) = match model {
                        Model::H1 => (-4.0 + 8.0 * i as f64 / 79.0, -4.0 + 8.0 * j as f64 / 79.0),
                        _ => (-1.5 + 4.0 * i as f64 / 79.0, j as f64 / 79.0),
                    };
                    Params::from_columns(model, a, Some(b)).unwrap()
                })
                .collect();
            let map = LabelMap::from_fn(model, &pts, |p| d.label_params(p), d.provenance.clone()).unwrap();
            let counts = map.counts();
            for l in model_phases(model) {
                assert!(counts.get(l).copied().unwrap_or(0) > 0, "{model}: no {l}");
            }
        }
    }

    #[test]
    fn diagram_toml_rejects_bad_label() {
        let text = "model = \"H1\"\ndefault = \"Trimer\"\nprovenance = \"\"\nregion = []\n";
        assert!(PhaseDiagram::from_toml(text).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100_000))]
            #[test]
            fn h3_segments_partition_circle(theta in 0.0f64..(2.0 * PI)) {
                let l = builtin_h3_labeler(theta);
                let s = theta * 4.0 / PI;
                let want = if s < 1.0 || s >= 7.0 { PhaseLabel::Haldane }
                    else if s < 2.0 { PhaseLabel::Trimer }
                    else if s < 5.0 { PhaseLabel::Ferromagnetic }
                    else { PhaseLabel::Dimer };
                // away from the snapping window the two rules coincide
                if (s - s.round()).abs() > 1e-9 {
                    prop_assert_eq!(l, want);
                }
                prop_assert!(model_phases(Model::H3).contains(&l));
            }
        }
    }
}
