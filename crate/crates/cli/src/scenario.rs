//! `.scn` scenario files (TOML) and their conversion into core objects.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use branchform::branched::{BranchingStructure, Tolerances};
use branchform::expr::SmoothMap;
use branchform::forms::{DifferentialForm, ScalarField};
use branchform::geometry::{branch_from_graph, Branch, Chart, ChartDomain, Factor, GroupAction, Orientation, ParamDomain, Parametrization};
use branchform::measure::{CoverSet, PartitionOfUnity, Region};
use branchform::multisection::{Multisection, ToySection};
use branchform::{parse_rational, Rational};
use serde::Deserialize;

/// A number written as an integer, a float, or a string such as `"1/3"`,
/// `"0.25"`, `"2pi"` or `"-1/2pi"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn value(&self) -> Result<f64> {
        match self {
            Num::Int(i) => Ok(*i as f64),
            Num::Float(f) => Ok(*f),
            Num::Text(s) => {
                let s = s.trim();
                let (body, scale) = match s.strip_suffix("pi") {
                    Some(b) => (b.trim(), PI),
                    None => (s, 1.0),
                };
                let base = match body {
                    "" => 1.0,
                    "-" => -1.0,
                    b => match parse_rational(b) {
                        Ok(r) => *r.numer() as f64 / *r.denom() as f64,
                        Err(_) => b.parse::<f64>().map_err(|_| anyhow!("`{s}` is not a number"))?,
                    },
                };
                Ok(base * scale)
            }
        }
    }
}

fn values(nums: &[Num], path: &str) -> Result<Vec<f64>> {
    nums.iter().enumerate().map(|(i, n)| n.value().with_context(|| format!("{path}[{i}]"))).collect()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Box { lo: Vec<Num>, hi: Vec<Num> },
    Ball { center: Vec<Num>, radius: Num },
}

impl DomainSpec {
    fn build(&self, path: &str) -> Result<ChartDomain<f64>> {
        Ok(match self {
            DomainSpec::Box { lo, hi } => {
                ChartDomain::Box { lo: values(lo, &format!("{path}.lo"))?, hi: values(hi, &format!("{path}.hi"))? }
            }
            DomainSpec::Ball { center, radius } => ChartDomain::Ball {
                center: values(center, &format!("{path}.center"))?,
                radius: radius.value().with_context(|| format!("{path}.radius"))?,
            },
        })
    }

    fn cover_set(&self, path: &str) -> Result<CoverSet<f64>> {
        Ok(match self.build(path)? {
            ChartDomain::Box { lo, hi } => CoverSet::Box { lo, hi },
            ChartDomain::Ball { center, radius } => CoverSet::Ball { center, radius },
            ChartDomain::Image { .. } => unreachable!(),
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub name: String,
    pub map: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub domain: DomainSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub group: Vec<ElementSpec>,
    #[serde(default)]
    pub table: Vec<Vec<usize>>,
    #[serde(default)]
    pub identity: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorSpec {
    Quadrant(Num),
    Interval([Num; 2]),
    Periodic([Num; 2]),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub frame: Vec<Vec<Num>>,
    pub correction: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    #[serde(default)]
    pub params: Vec<FactorSpec>,
    pub map: Option<Vec<String>>,
    pub graph: Option<GraphSpec>,
    pub points: Option<Vec<Vec<Num>>>,
    #[serde(default)]
    pub closed: bool,
    #[serde(default = "one")]
    pub orientation: i64,
    pub weight: String,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn one() -> i64 {
    1
}

fn default_resolution() -> usize {
    8
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub degree: usize,
    #[serde(default)]
    pub terms: Vec<(String, String)>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSpec {
    pub sets: Vec<DomainSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternativeSpec {
    pub branches: Vec<BranchSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestrictionSpec {
    pub point: Vec<Num>,
    pub neighbourhood: DomainSpec,
    pub cells: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismSpec {
    pub name: String,
    pub map: Vec<String>,
    pub inverse: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySpec {
    pub radius: Num,
    #[serde(default)]
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub points: Vec<Vec<Num>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSectionSpec {
    pub map: Vec<String>,
    pub weight: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactSpec {
    pub lo: Vec<Num>,
    pub hi: Vec<Num>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub map: Vec<String>,
    #[serde(default)]
    pub multisection: Vec<LocalSectionSpec>,
    #[serde(default = "default_solve_resolution")]
    pub resolution: usize,
    pub homotopy: Option<Vec<String>>,
    pub compact: Option<CompactSpec>,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_solve_resolution() -> usize {
    1000
}

fn default_steps() -> usize {
    21
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    /// Points where the expression is positive.
    Positive(String),
    Cells(Vec<Vec<usize>>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesSpec {
    pub membership: Option<Num>,
    pub coincidence: Option<Num>,
    pub angle: Option<Num>,
}

/// Command defaults; flags override them.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub form: Option<String>,
    pub boundary_form: Option<String>,
    pub cover: Option<String>,
    pub region: Option<RegionSpec>,
    pub tolerance: Option<f64>,
    pub refine: Option<usize>,
    pub quad_order: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub chart: ChartSpec,
    #[serde(default)]
    pub branches: Vec<BranchSpec>,
    #[serde(default)]
    pub forms: BTreeMap<String, FormSpec>,
    #[serde(default)]
    pub covers: BTreeMap<String, CoverSpec>,
    pub alternative: Option<AlternativeSpec>,
    pub restriction: Option<RestrictionSpec>,
    #[serde(default)]
    pub morphisms: Vec<MorphismSpec>,
    pub classify: Option<ClassifySpec>,
    pub section: Option<SectionSpec>,
    pub tolerances: Option<TolerancesSpec>,
    #[serde(default)]
    pub run: RunSpec,
}

pub struct Restriction {
    pub point: Vec<f64>,
    pub neighbourhood: ChartDomain<f64>,
    pub region: Region<f64>,
}

pub struct Morphism {
    pub name: String,
    pub map: SmoothMap,
    pub inverse: SmoothMap,
}

pub struct Classify {
    pub radius: f64,
    pub resolutions: Vec<usize>,
    pub points: Vec<Vec<f64>>,
}

pub struct Section {
    pub section: ToySection<f64>,
    pub multisection: Multisection,
    pub resolution: usize,
    pub homotopy: Option<SmoothMap>,
    pub compact: Option<(Vec<f64>, Vec<f64>)>,
    pub steps: usize,
}

/// A fully validated scenario.
pub struct Scenario {
    pub name: String,
    pub chart: Arc<Chart<f64>>,
    pub structure: Option<BranchingStructure<f64>>,
    pub alternative: Option<BranchingStructure<f64>>,
    pub forms: BTreeMap<String, DifferentialForm>,
    pub covers: BTreeMap<String, PartitionOfUnity<f64>>,
    pub restriction: Option<Restriction>,
    pub morphisms: Vec<Morphism>,
    pub classify: Option<Classify>,
    pub section: Option<Section>,
    pub run: RunSpec,
}

impl Scenario {
    pub fn form(&self, name: &str) -> Result<&DifferentialForm> {
        self.forms.get(name).ok_or_else(|| anyhow!("scenario has no form `{name}`"))
    }

    pub fn cover(&self, name: &str) -> Result<&PartitionOfUnity<f64>> {
        self.covers.get(name).ok_or_else(|| anyhow!("scenario has no cover `{name}`"))
    }

    pub fn structure(&self) -> Result<&BranchingStructure<f64>> {
        self.structure.as_ref().ok_or_else(|| anyhow!("scenario has no branches"))
    }

    pub fn region(&self) -> Result<Region<f64>> {
        match &self.run.region {
            None => Ok(Region::All),
            Some(RegionSpec::Cells(c)) => Ok(Region::Cells(c.clone())),
            Some(RegionSpec::Positive(e)) => {
                let f = ScalarField::parse(e, self.chart.dim()).context("run.region.positive")?;
                Ok(Region::predicate(move |x| f.eval(x).map(|v| v > 0.0).unwrap_or(false)))
            }
        }
    }
}

pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_scenario(&text, seed).with_context(|| format!("in scenario {}", path.display()))
}

pub fn parse_scenario(text: &str, seed: Option<u64>) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text)?;
    build(file, seed)
}

fn build_chart(spec: &ChartSpec, seed: Option<u64>) -> Result<Chart<f64>> {
    let domain = spec.domain.build("chart.domain")?;
    let dim = domain.dim();
    let group = if spec.group.is_empty() {
        if !spec.table.is_empty() {
            bail!("chart.table given without chart.group");
        }
        GroupAction::trivial(dim)
    } else {
        let elements = spec
            .group
            .iter()
            .enumerate()
            .map(|(i, e)| SmoothMap::parse(dim, &e.map).with_context(|| format!("chart.group[{i}].map")))
            .collect::<Result<Vec<_>>>()?;
        GroupAction {
            elements,
            table: spec.table.clone(),
            identity: spec.identity,
            names: spec.group.iter().map(|e| e.name.clone()).collect(),
        }
    };
    Chart::with_seed(domain, group, seed.unwrap_or(spec.seed)).context("chart")
}

fn build_branch(spec: &BranchSpec, dim: usize, path: &str) -> Result<(Branch<f64>, Rational)> {
    let weight = parse_rational(&spec.weight).with_context(|| format!("{path}.weight"))?;
    if weight <= Rational::from_integer(0) {
        bail!("{path}.weight: weights must be positive, got {}", spec.weight);
    }
    let orientation = Orientation::from_sign(spec.orientation).with_context(|| format!("{path}.orientation"))?;
    let factors = spec
        .params
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let p = format!("{path}.params[{i}]");
            Ok(match f {
                FactorSpec::Quadrant(e) => Factor::Quadrant { extent: e.value().context(p)? },
                FactorSpec::Interval([a, b]) => Factor::Interval { lo: a.value().context(p.clone())?, hi: b.value().context(p)? },
                FactorSpec::Periodic([a, b]) => Factor::Periodic { start: a.value().context(p.clone())?, period: b.value().context(p)? },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let given = [spec.map.is_some(), spec.graph.is_some(), spec.points.is_some()].iter().filter(|b| **b).count();
    if given != 1 {
        bail!("{path}: give exactly one of `map`, `graph` or `points`");
    }
    let branch = if let Some(points) = &spec.points {
        let pts = points.iter().enumerate().map(|(i, p)| values(p, &format!("{path}.points[{i}]"))).collect::<Result<Vec<_>>>()?;
        if pts.iter().any(|p| p.len() != dim) {
            bail!("{path}.points: every point needs {dim} coordinates");
        }
        let param = Parametrization::Polyline { points: pts, closed: spec.closed };
        let segments = param.segments() as f64;
        let domain = if !factors.is_empty() {
            ParamDomain::new(factors)
        } else if spec.closed {
            ParamDomain::new(vec![Factor::Periodic { start: 0.0, period: segments }])
        } else {
            ParamDomain::new(vec![Factor::Interval { lo: 0.0, hi: segments }])
        }
        .with_context(|| format!("{path}.params"))?;
        Branch::new(domain, param, orientation, spec.resolution)
    } else {
        let domain = ParamDomain::new(factors).with_context(|| format!("{path}.params"))?;
        let n = domain.dim();
        if let Some(map) = &spec.map {
            let m = SmoothMap::parse(n, map).with_context(|| format!("{path}.map"))?;
            Branch::new(domain, Parametrization::Map(m), orientation, spec.resolution)
        } else {
            let g = spec.graph.as_ref().expect("counted above");
            let frame =
                g.frame.iter().enumerate().map(|(i, row)| values(row, &format!("{path}.graph.frame[{i}]"))).collect::<Result<Vec<_>>>()?;
            let correction = SmoothMap::parse(n, &g.correction).with_context(|| format!("{path}.graph.correction"))?;
            branch_from_graph(frame, correction, domain, orientation, spec.resolution)
        }
    }
    .with_context(|| path.to_string())?;
    Ok((branch, weight))
}

fn build_structure(
    chart: &Arc<Chart<f64>>,
    specs: &[BranchSpec],
    tolerances: Tolerances<f64>,
    path: &str,
) -> Result<BranchingStructure<f64>> {
    let mut branches = Vec::with_capacity(specs.len());
    let mut weights = Vec::with_capacity(specs.len());
    for (i, b) in specs.iter().enumerate() {
        let (branch, w) = build_branch(b, chart.dim(), &format!("{path}[{i}]"))?;
        branches.push(branch);
        weights.push(w);
    }
    BranchingStructure::with_tolerances(chart.clone(), branches, weights, tolerances).context(path.to_string())
}

fn build(file: ScenarioFile, seed: Option<u64>) -> Result<Scenario> {
    let chart = Arc::new(build_chart(&file.chart, seed)?);
    let dim = chart.dim();
    let mut tolerances = Tolerances::for_diameter(chart.domain().diameter());
    if let Some(t) = &file.tolerances {
        if let Some(v) = &t.membership {
            tolerances.membership = v.value().context("tolerances.membership")?;
        }
        if let Some(v) = &t.coincidence {
            tolerances.coincidence = v.value().context("tolerances.coincidence")?;
        }
        if let Some(v) = &t.angle {
            tolerances.angle = v.value().context("tolerances.angle")?;
        }
    }
    let structure = if file.branches.is_empty() { None } else { Some(build_structure(&chart, &file.branches, tolerances, "branches")?) };
    let alternative = match &file.alternative {
        Some(a) => Some(build_structure(&chart, &a.branches, tolerances, "alternative.branches")?),
        None => None,
    };
    let mut forms = BTreeMap::new();
    for (name, f) in &file.forms {
        let form = DifferentialForm::parse(dim, f.degree, &f.terms).with_context(|| format!("forms.{name}"))?;
        forms.insert(name.clone(), form);
    }
    let mut covers = BTreeMap::new();
    for (name, c) in &file.covers {
        let sets = c.sets.iter().enumerate().map(|(i, s)| s.cover_set(&format!("covers.{name}.sets[{i}]"))).collect::<Result<Vec<_>>>()?;
        covers.insert(name.clone(), PartitionOfUnity::new(&chart, sets).with_context(|| format!("covers.{name}"))?);
    }
    let restriction = match &file.restriction {
        Some(r) => Some(Restriction {
            point: values(&r.point, "restriction.point")?,
            neighbourhood: r.neighbourhood.build("restriction.neighbourhood")?,
            region: Region::Cells(r.cells.clone()),
        }),
        None => None,
    };
    let morphisms = file
        .morphisms
        .iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(Morphism {
                name: m.name.clone(),
                map: SmoothMap::parse(dim, &m.map).with_context(|| format!("morphisms[{i}].map"))?,
                inverse: SmoothMap::parse(dim, &m.inverse).with_context(|| format!("morphisms[{i}].inverse"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let classify = match &file.classify {
        Some(c) => Some(Classify {
            radius: c.radius.value().context("classify.radius")?,
            resolutions: c.resolutions.clone(),
            points: c.points.iter().enumerate().map(|(i, p)| values(p, &format!("classify.points[{i}]"))).collect::<Result<Vec<_>>>()?,
        }),
        None => None,
    };
    let section = match &file.section {
        Some(s) => Some(build_section(&chart, s)?),
        None => None,
    };
    for (key, name) in [("run.form", &file.run.form), ("run.boundary_form", &file.run.boundary_form)] {
        if let Some(n) = name {
            if !forms.contains_key(n) {
                bail!("{key}: no form named `{n}`");
            }
        }
    }
    if let Some(n) = &file.run.cover {
        if !covers.contains_key(n) {
            bail!("run.cover: no cover named `{n}`");
        }
    }
    Ok(Scenario { name: file.name, chart, structure, alternative, forms, covers, restriction, morphisms, classify, section, run: file.run })
}

fn build_section(chart: &Arc<Chart<f64>>, s: &SectionSpec) -> Result<Section> {
    let dim = chart.dim();
    let map = SmoothMap::parse(dim, &s.map).context("section.map")?;
    let r = map.coarity();
    let section = ToySection::new(chart.clone(), map).context("section")?;
    let multisection = if s.multisection.is_empty() {
        Multisection::trivial(dim, r)
    } else {
        let mut maps = Vec::new();
        let mut weights = Vec::new();
        for (i, l) in s.multisection.iter().enumerate() {
            maps.push(SmoothMap::parse(dim, &l.map).with_context(|| format!("section.multisection[{i}].map"))?);
            weights.push(parse_rational(&l.weight).with_context(|| format!("section.multisection[{i}].weight"))?);
        }
        Multisection::new(maps, weights).context("section.multisection")?
    };
    let homotopy = match &s.homotopy {
        Some(h) => Some(SmoothMap::parse(dim + 1, h).context("section.homotopy")?),
        None => None,
    };
    let compact = match &s.compact {
        Some(c) => Some((values(&c.lo, "section.compact.lo")?, values(&c.hi, "section.compact.hi")?)),
        None => None,
    };
    Ok(Section { section, multisection, resolution: s.resolution, homotopy, compact, steps: s.steps })
}
