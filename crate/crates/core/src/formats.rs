//! Text and JSON file formats: group tables, length spectra, chains and
//! boundary charge specs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{BoundaryCharge, BoundaryChargeSpec, Chain, Provenance, SpecError, VertexKind};
use crate::energy::{EnergyError, LengthSpectrum};
use crate::geometry::Point;
use crate::group::{ClassId, FiniteGroup, GroupError};
use crate::plateau::SolveReport;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, message: message.into() }
}

/// Non-empty lines with `#` comments stripped, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Multiplication table: first line `n`, then `n` rows of `n` element ids.
pub fn parse_group_table(text: &str) -> Result<FiniteGroup, FormatError> {
    let mut lines = content_lines(text);
    let (l0, first) = lines.next().ok_or_else(|| syntax(1, "empty group file"))?;
    let n: usize = first.parse().map_err(|_| syntax(l0, format!("expected the order, got {first:?}")))?;
    if n == 0 {
        return Err(FormatError::Group(GroupError::Empty));
    }
    // The group tables worth loading are small; refuse absurd sizes early.
    if n > 4096 {
        return Err(syntax(l0, format!("order {n} too large")));
    }
    let mut rows = Vec::with_capacity(n);
    for (line, row) in lines {
        if rows.len() == n {
            return Err(syntax(line, "more rows than the declared order"));
        }
        let r: Vec<usize> = row
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| syntax(line, format!("bad entry {t:?}"))))
            .collect::<Result<_, _>>()?;
        if r.len() != n {
            return Err(syntax(line, format!("expected {n} entries, got {}", r.len())));
        }
        rows.push(r);
    }
    if rows.len() != n {
        return Err(syntax(text.lines().count(), format!("expected {n} rows, got {}", rows.len())));
    }
    Ok(FiniteGroup::from_table(&rows)?)
}

pub fn write_group_table(group: &FiniteGroup) -> String {
    let mut out = format!("{}\n", group.order());
    for row in group.table() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// `class_id lambda` per line; the trivial class may be omitted.
pub fn parse_lengths(text: &str, group: &FiniteGroup) -> Result<LengthSpectrum, FormatError> {
    let mut lambda: Vec<Option<f64>> = vec![None; group.class_count()];
    lambda[0] = Some(0.0);
    let mut trivial_given = false;
    for (line, row) in content_lines(text) {
        let mut it = row.split_whitespace();
        let (Some(c), Some(l), None) = (it.next(), it.next(), it.next()) else {
            return Err(syntax(line, "expected `class_id lambda`"));
        };
        let c: ClassId = c.parse().map_err(|_| syntax(line, format!("bad class id {c:?}")))?;
        let l: f64 = l.parse().map_err(|_| syntax(line, format!("bad length {l:?}")))?;
        if c >= lambda.len() {
            return Err(syntax(line, format!("class {c} out of range (group has {} classes)", lambda.len())));
        }
        if (c == 0 && trivial_given) || (c != 0 && lambda[c].is_some()) {
            return Err(syntax(line, format!("class {c} listed twice")));
        }
        trivial_given |= c == 0;
        lambda[c] = Some(l);
    }
    let missing: Vec<String> = lambda
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_none())
        .map(|(c, _)| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(syntax(0, format!("no length for classes {}", missing.join(", "))));
    }
    Ok(LengthSpectrum::new(group, lambda.into_iter().map(Option::unwrap).collect())?)
}

pub fn write_lengths(lengths: &LengthSpectrum) -> String {
    lengths
        .as_slice()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(c, l)| format!("{c} {l:?}\n"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexJson {
    x: f64,
    y: f64,
    z: f64,
    kind: VertexKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeJson {
    u: usize,
    v: usize,
    class: ClassId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainJson {
    vertices: Vec<VertexJson>,
    edges: Vec<EdgeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl From<&Chain> for ChainJson {
    fn from(c: &Chain) -> Self {
        Self {
            vertices: c
                .vertices
                .iter()
                .map(|v| VertexJson { x: v.pos.x, y: v.pos.y, z: v.pos.z, kind: v.kind })
                .collect(),
            edges: c.edges.iter().map(|e| EdgeJson { u: e.u, v: e.v, class: e.class }).collect(),
            provenance: c.provenance,
        }
    }
}

impl From<ChainJson> for Chain {
    fn from(j: ChainJson) -> Self {
        let mut c = Chain { provenance: j.provenance, ..Chain::default() };
        for v in j.vertices {
            c.add_vertex(Point::new(v.x, v.y, v.z), v.kind);
        }
        for e in j.edges {
            c.add_edge(e.u, e.v, e.class);
        }
        c
    }
}

/// Parse a chain. Structural problems (bad indices, zero-length edges) are
/// left to `validate_chain`; only non-finite coordinates are rejected here.
pub fn parse_chain_json(text: &str) -> Result<Chain, FormatError> {
    let j: ChainJson = serde_json::from_str(text)?;
    if let Some(i) = j.vertices.iter().position(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite())) {
        return Err(syntax(0, format!("vertex {i} has a non-finite coordinate")));
    }
    Ok(j.into())
}

pub fn chain_to_json(chain: &Chain) -> String {
    serde_json::to_string_pretty(&ChainJson::from(chain)).expect("chain serializes")
}

/// `x,y,z,class_id` rows, an optional header, `#` comments.
pub fn parse_spec_csv(text: &str) -> Result<BoundaryChargeSpec, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut charges = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && record.get(0) == Some("x") {
            continue;
        }
        if record.len() != 4 {
            return Err(syntax(line, format!("expected 4 fields, got {}", record.len())));
        }
        let num = |k: usize| -> Result<f64, FormatError> {
            let f = &record[k];
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| syntax(line, format!("bad coordinate {f:?}")))
        };
        let pos = Point::new(num(0)?, num(1)?, num(2)?);
        let class: ClassId = record[3].parse().map_err(|_| syntax(line, format!("bad class id {:?}", &record[3])))?;
        charges.push(BoundaryCharge { pos, class });
    }
    Ok(BoundaryChargeSpec::new(charges)?)
}

pub fn write_spec_csv(spec: &BoundaryChargeSpec) -> String {
    let mut out = String::from("x,y,z,class_id\n");
    for c in &spec.charges {
        out.push_str(&format!("{:?},{:?},{:?},{}\n", c.pos.x, c.pos.y, c.pos.z, c.class));
    }
    out
}

/// JSON value of a solve report.
pub fn solve_report_json(report: &SolveReport) -> serde_json::Value {
    serde_json::json!({
        "mass": report.mass,
        "balance_max": report.balance_max,
        "iterations": report.iterations,
        "crossing": report.crossing,
        "best": ChainJson::from(&report.best),
        "ties": report.ties.iter().map(ChainJson::from).collect::<Vec<_>>(),
        "runner_ups": report
            .runner_ups
            .iter()
            .map(|(c, m)| serde_json::json!({ "mass": m, "chain": ChainJson::from(c) }))
            .collect::<Vec<_>>(),
    })
}
