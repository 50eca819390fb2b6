//! Verification reports: checks, tables, Monte Carlo cell statistics, and
//! their line-delimited / CSV serializations.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Fail dominates inconclusive, which dominates pass.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// Relation the value must satisfy against the threshold, e.g. `"<="`.
    pub relation: String,
    pub verdict: Verdict,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, "<=", value <= threshold)
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, "<", value < threshold)
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, ">=", value >= threshold)
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, ">", value > threshold)
    }

    /// `|value - target| <= tol`; the threshold column records the tolerance.
    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let name = format!("{} (target {target})", name.into());
        Self::new(name, value, tol, "|v-target|<=", (value - target).abs() <= tol)
    }

    fn new(name: impl Into<String>, value: f64, threshold: f64, relation: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            relation: relation.to_string(),
            verdict: if ok && !value.is_nan() {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        }
    }

    pub fn inconclusive(mut self) -> Self {
        if self.verdict == Verdict::Pass {
            return self;
        }
        self.verdict = Verdict::Inconclusive;
        self
    }
}

/// A table cell; serialized untagged so rows read naturally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// Running sums for one block of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub block: u32,
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl BlockStats {
    pub fn new(block: u32) -> Self {
        Self {
            block,
            n: 0,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub id: u32,
    pub weight: f64,
    pub blocks: Vec<BlockStats>,
}

impl Stratum {
    /// Pooled `(n, mean, variance of the mean)` over blocks in block order.
    pub fn pooled(&self) -> (u64, f64, f64) {
        let mut blocks = self.blocks.clone();
        blocks.sort_by_key(|b| b.block);
        let (mut n, mut s, mut s2) = (0u64, 0.0, 0.0);
        for b in &blocks {
            n += b.n;
            s += b.sum;
            s2 += b.sum_sq;
        }
        if n == 0 {
            return (0, 0.0, 0.0);
        }
        let mean = s / n as f64;
        let var = if n > 1 {
            ((s2 - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0)
        } else {
            0.0
        };
        (n, mean, var / n as f64)
    }
}

/// A stratified Monte Carlo estimate `Σ_s weight_s · mean_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub key: String,
    pub strata: Vec<Stratum>,
}

impl McCell {
    pub fn estimate(&self) -> (f64, f64) {
        let mut strata: Vec<&Stratum> = self.strata.iter().collect();
        strata.sort_by_key(|s| s.id);
        let (mut est, mut var) = (0.0, 0.0);
        for s in strata {
            let (_, mean, var_mean) = s.pooled();
            est += s.weight * mean;
            var += s.weight * s.weight * var_mean;
        }
        (est, var.sqrt())
    }

    pub fn samples(&self) -> u64 {
        self.strata.iter().flat_map(|s| &s.blocks).map(|b| b.n).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[idx] {
                    Cell::Num(v) => *v,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }
}

/// The output record of any verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub suite: String,
    pub title: String,
    /// What the run verifies, stated in the report so the file is self-describing.
    pub anchor: String,
    pub params: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub table: Table,
    pub cells: Vec<McCell>,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn new(suite: &str, title: &str, anchor: &str, columns: &[&str]) -> Self {
        Self {
            suite: suite.to_string(),
            title: title.to_string(),
            anchor: anchor.to_string(),
            params: BTreeMap::new(),
            checks: Vec::new(),
            table: Table::new(columns),
            cells: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.params
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn verdict(&self) -> Verdict {
        self.checks
            .iter()
            .fold(Verdict::Pass, |acc, c| acc.combine(c.verdict))
    }

    pub fn passed(&self) -> bool {
        self.verdict() == Verdict::Pass
    }

    pub fn find_check(&self, prefix: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name.starts_with(prefix))
    }

    /// Body records, one JSON document per line. Contains no timestamps.
    pub fn body_lines(&self) -> Result<Vec<String>> {
        let mut lines = Vec::new();
        lines.push(serde_json::to_string(&Record::Meta {
            suite: self.suite.clone(),
            title: self.title.clone(),
            anchor: self.anchor.clone(),
            params: self.params.clone(),
            verdict: self.verdict(),
            columns: self.table.columns.clone(),
        })?);
        for c in &self.checks {
            lines.push(serde_json::to_string(&Record::Check(c.clone()))?);
        }
        for r in &self.table.rows {
            lines.push(serde_json::to_string(&Record::Row { cells: r.clone() })?);
        }
        for c in &self.cells {
            lines.push(serde_json::to_string(&Record::Cell(c.clone()))?);
        }
        for n in &self.notes {
            lines.push(serde_json::to_string(&Record::Note { text: n.clone() })?);
        }
        Ok(lines)
    }

    pub fn from_body_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut report: Option<EstimateReport> = None;
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line)?;
            match rec {
                Record::Meta {
                    suite,
                    title,
                    anchor,
                    params,
                    columns,
                    ..
                } => {
                    let mut r = EstimateReport::new(&suite, &title, &anchor, &[]);
                    r.params = params;
                    r.table.columns = columns;
                    report = Some(r);
                }
                other => {
                    let r = report
                        .as_mut()
                        .ok_or_else(|| LabError::Merge("record before report metadata".into()))?;
                    match other {
                        Record::Check(c) => r.checks.push(c),
                        Record::Row { cells } => r.table.rows.push(cells),
                        Record::Cell(c) => r.cells.push(c),
                        Record::Note { text } => r.notes.push(text),
                        Record::Meta { .. } => unreachable!(),
                    }
                }
            }
        }
        report.ok_or_else(|| LabError::Merge("no report metadata found".into()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.table.columns)?;
            for row in &self.table.rows {
                w.write_record(row.iter().map(|c| c.to_string()))?;
            }
            w.flush()?;
        }
        write_atomic(path, &buf)
    }

    pub fn summary_line(&self) -> String {
        let v = match self.verdict() {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        format!("[{v}] {}: {}", self.suite, self.title)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Meta {
        suite: String,
        title: String,
        anchor: String,
        params: BTreeMap<String, Value>,
        verdict: Verdict,
        columns: Vec<String>,
    },
    Check(Check),
    Row { cells: Vec<Cell> },
    Cell(McCell),
    Note { text: String },
}

/// Header line written before the report body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub schema_version: u32,
    pub config_hash: String,
    pub created_unix_secs: u64,
    pub seed: u64,
    /// Half-open range of Monte Carlo blocks computed by this run.
    pub blocks: (u32, u32),
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Writes `header` + body records, via a temporary file and rename.
pub fn write_report_file(path: &Path, header: &ReportHeader, reports: &[EstimateReport]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(header)?);
    out.push('\n');
    for r in reports {
        for line in r.body_lines()? {
            out.push_str(&line);
            out.push('\n');
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_report_file(path: &Path) -> Result<(ReportHeader, Vec<EstimateReport>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: ReportHeader = serde_json::from_str(
        lines
            .next()
            .ok_or_else(|| LabError::Merge(format!("{} is empty", path.display())))?,
    )?;
    let mut reports = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in lines {
        if line.contains("\"record\":\"meta\"") && !current.is_empty() {
            reports.push(EstimateReport::from_body_lines(current.drain(..))?);
        }
        current.push(line);
    }
    if !current.is_empty() {
        reports.push(EstimateReport::from_body_lines(current)?);
    }
    Ok((header, reports))
}

/// Body of a report file: every line after the header.
pub fn report_body(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().skip(1).collect::<Vec<_>>().join("\n"))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Merges Monte Carlo cells from several runs of the same configuration.
///
/// Blocks are pooled per stratum; a block index seen twice is an error since
/// it would double-count samples drawn from the same seed.
pub fn merge_reports(inputs: &[(ReportHeader, Vec<EstimateReport>)]) -> Result<(ReportHeader, Vec<EstimateReport>)> {
    let (first_header, first_reports) = inputs
        .first()
        .ok_or_else(|| LabError::Merge("nothing to merge".into()))?;
    for (h, r) in inputs {
        if h.config_hash != first_header.config_hash {
            return Err(LabError::Merge(format!(
                "config hash mismatch: {} vs {}",
                first_header.config_hash, h.config_hash
            )));
        }
        if r.len() != first_reports.len() {
            return Err(LabError::Merge("reports list different suites".into()));
        }
    }
    let mut merged = Vec::new();
    for (idx, base) in first_reports.iter().enumerate() {
        let mut cells: BTreeMap<String, BTreeMap<u32, Stratum>> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();
        for (_, reports) in inputs {
            let rep = &reports[idx];
            if rep.suite != base.suite {
                return Err(LabError::Merge("suite order differs between files".into()));
            }
            for cell in &rep.cells {
                if !cells.contains_key(&cell.key) {
                    order.push(cell.key.clone());
                }
                let strata = cells.entry(cell.key.clone()).or_default();
                for s in &cell.strata {
                    let entry = strata.entry(s.id).or_insert_with(|| Stratum {
                        id: s.id,
                        weight: s.weight,
                        blocks: Vec::new(),
                    });
                    for b in &s.blocks {
                        if entry.blocks.iter().any(|e| e.block == b.block) {
                            return Err(LabError::Merge(format!(
                                "block {} of stratum {} in cell {} appears twice",
                                b.block, s.id, cell.key
                            )));
                        }
                        entry.blocks.push(*b);
                    }
                    entry.blocks.sort_by_key(|b| b.block);
                }
            }
        }
        let mut out = EstimateReport::new(
            &base.suite,
            &format!("{} (merged)", base.title),
            &base.anchor,
            &["cell", "estimate", "std_error", "samples"],
        );
        out.params = base.params.clone();
        for key in order {
            let strata = cells.remove(&key).unwrap_or_default();
            let cell = McCell {
                key: key.clone(),
                strata: strata.into_values().collect(),
            };
            let (est, err) = cell.estimate();
            out.table
                .push(vec![key.into(), est.into(), err.into(), (cell.samples() as usize).into()]);
            out.cells.push(cell);
        }
        merged.push(out);
    }
    let lo = inputs.iter().map(|(h, _)| h.blocks.0).min().unwrap_or(0);
    let hi = inputs.iter().map(|(h, _)| h.blocks.1).max().unwrap_or(0);
    let header = ReportHeader {
        blocks: (lo, hi),
        ..first_header.clone()
    };
    Ok((header, merged))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(key: &str, blocks: &[(u32, &[f64])]) -> McCell {
        McCell {
            key: key.into(),
            strata: vec![Stratum {
                id: 0,
                weight: 2.0,
                blocks: blocks
                    .iter()
                    .map(|(b, xs)| {
                        let mut s = BlockStats::new(*b);
                        xs.iter().for_each(|x| s.push(*x));
                        s
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn verdict_combination() {
        assert_eq!(Verdict::Pass.combine(Verdict::Inconclusive), Verdict::Inconclusive);
        assert_eq!(Verdict::Inconclusive.combine(Verdict::Fail), Verdict::Fail);
        assert_eq!(Verdict::Fail.exit_code(), 1);
        assert_eq!(Verdict::Inconclusive.exit_code(), 3);
        assert_eq!(Verdict::Pass.exit_code(), 0);
        assert_eq!(Check::below("e", 0.7, 0.5).inconclusive().verdict, Verdict::Inconclusive);
        assert_eq!(Check::below("e", 0.2, 0.5).inconclusive().verdict, Verdict::Pass);
    }

    #[test]
    fn nan_never_passes() {
        assert_eq!(Check::at_most("x", f64::NAN, 1.0).verdict, Verdict::Fail);
    }

    #[test]
    fn body_round_trips() {
        let mut r = EstimateReport::new("demo", "title", "anchor", &["a", "b"]);
        r.param("seed", 7);
        r.check(Check::at_most("err", 1e-9, 1e-8));
        r.table.push(vec![1.0.into(), "x".into()]);
        r.cells.push(cell("k", &[(0, &[1.0, 2.0])]));
        r.note("hello");
        let lines = r.body_lines().unwrap();
        let back = EstimateReport::from_body_lines(lines.iter().map(|s| s.as_str())).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn merge_pools_blocks_and_rejects_mismatch() {
        let header = |hash: &str, b: (u32, u32)| ReportHeader {
            schema_version: 1,
            config_hash: hash.into(),
            created_unix_secs: 0,
            seed: 1,
            blocks: b,
        };
        let mk = |blocks: &[(u32, &[f64])]| {
            let mut r = EstimateReport::new("s", "t", "a", &[]);
            r.cells.push(cell("c", blocks));
            r
        };
        let a = (header("h", (0, 1)), vec![mk(&[(0, &[1.0, 3.0])])]);
        let b = (header("h", (1, 2)), vec![mk(&[(1, &[5.0, 7.0])])]);
        let (h, merged) = merge_reports(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(h.blocks, (0, 2));
        let (est, _) = merged[0].cells[0].estimate();
        assert!((est - 2.0 * 4.0).abs() < 1e-12);

        let full = mk(&[(0, &[1.0, 3.0]), (1, &[5.0, 7.0])]);
        assert_eq!(full.cells[0].estimate(), merged[0].cells[0].estimate());

        assert!(merge_reports(&[a.clone(), a.clone()]).is_err());
        let c = (header("other", (1, 2)), vec![mk(&[(1, &[5.0])])]);
        assert!(matches!(merge_reports(&[a, c]), Err(LabError::Merge(_))));
    }

    #[test]
    fn report_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let mut r1 = EstimateReport::new("one", "t1", "a", &["x"]);
        r1.table.push(vec![1.0.into()]);
        let r2 = EstimateReport::new("two", "t2", "a", &[]);
        let header = ReportHeader {
            schema_version: REPORT_SCHEMA_VERSION,
            config_hash: "abc".into(),
            created_unix_secs: 5,
            seed: 3,
            blocks: (0, 1),
        };
        write_report_file(&path, &header, &[r1.clone(), r2.clone()]).unwrap();
        let (h, reps) = read_report_file(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(reps, vec![r1, r2]);
    }
}
