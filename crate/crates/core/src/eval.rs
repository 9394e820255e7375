//! AUROC and the condition-wise / scenario-wise aggregation views.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{CaptureCondition, ScenarioId, ViolationLabel};

/// Rank-based Mann–Whitney AUROC with normals as the high-score class.
/// Tied scores get the average of their ranks.
pub fn auroc(scores: &[f64], normal: &[bool]) -> Result<f64> {
    if scores.len() != normal.len() {
        return Err(Error::Config(format!("{} scores for {} labels", scores.len(), normal.len())));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let n_normal = normal.iter().filter(|&&n| n).count();
    let n_anomaly = normal.len() - n_normal;
    if n_normal == 0 || n_anomaly == 0 {
        return Err(Error::SingleClass { normal: n_normal, anomaly: n_anomaly });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&o| normal[o]).count() as f64;
        i = j + 1;
    }
    let n = n_normal as f64;
    let u = rank_sum - n * (n + 1.0) / 2.0;
    Ok(u / (n * n_anomaly as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: String,
    pub scenario: ScenarioId,
    pub condition: CaptureCondition,
    pub auroc: f64,
    /// All test normals against one anomaly subset; absent subsets are skipped.
    pub subset_auroc: BTreeMap<ViolationLabel, f64>,
    pub n_normal: usize,
    pub n_anomaly: usize,
}

pub fn task_report(
    task_id: &str,
    scenario: ScenarioId,
    condition: CaptureCondition,
    scores: &[f64],
    labels: &[ViolationLabel],
) -> Result<TaskReport> {
    let normal: Vec<bool> = labels.iter().map(|l| !l.is_anomaly()).collect();
    let overall = auroc(scores, &normal)?;
    let mut subset_auroc = BTreeMap::new();
    for subset in ViolationLabel::ANOMALIES {
        let (s, n): (Vec<f64>, Vec<bool>) = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == ViolationLabel::Normal || l == subset)
            .map(|(&s, &l)| (s, l == ViolationLabel::Normal))
            .unzip();
        if n.iter().any(|&x| !x) {
            subset_auroc.insert(subset, auroc(&s, &n)?);
        }
    }
    let n_normal = normal.iter().filter(|&&n| n).count();
    Ok(TaskReport {
        task_id: task_id.to_string(),
        scenario,
        condition,
        auroc: overall,
        subset_auroc,
        n_normal,
        n_anomaly: labels.len() - n_normal,
    })
}

/// The cells an aggregate covers. The default is the full 10 x 5 grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSubset {
    pub scenarios: Vec<ScenarioId>,
    pub conditions: Vec<CaptureCondition>,
}

impl Default for GridSubset {
    fn default() -> Self {
        GridSubset {
            scenarios: ScenarioId::ALL.to_vec(),
            conditions: CaptureCondition::ALL.to_vec(),
        }
    }
}

impl GridSubset {
    /// Declared subsets are kept in canonical grid order.
    pub fn new(scenarios: &[ScenarioId], conditions: &[CaptureCondition]) -> Self {
        GridSubset {
            scenarios: ScenarioId::ALL.into_iter().filter(|s| scenarios.contains(s)).collect(),
            conditions: CaptureCondition::ALL.into_iter().filter(|c| conditions.contains(c)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scenarios: Vec<ScenarioId>,
    pub conditions: Vec<CaptureCondition>,
    /// Row-major over `scenarios` x `conditions`.
    pub cells: Vec<Vec<f64>>,
    pub condition_means: BTreeMap<CaptureCondition, f64>,
    pub mean_of_means: Option<f64>,
    pub std: Option<f64>,
    pub scenario_sensitivity: BTreeMap<ScenarioId, f64>,
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Divide-by-n standard deviation.
pub fn population_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some((xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt())
}

pub fn aggregate(reports: &[TaskReport], subset: &GridSubset) -> Result<AggregateReport> {
    let mut grid: BTreeMap<(ScenarioId, CaptureCondition), f64> = BTreeMap::new();
    for r in reports {
        if !subset.scenarios.contains(&r.scenario) || !subset.conditions.contains(&r.condition) {
            return Err(Error::Aggregate(format!("{} is outside the declared grid", r.task_id)));
        }
        if grid.insert((r.scenario, r.condition), r.auroc).is_some() {
            return Err(Error::Aggregate(format!("duplicate report for {}", r.task_id)));
        }
    }
    let mut cells = Vec::with_capacity(subset.scenarios.len());
    for &s in &subset.scenarios {
        let mut row = Vec::with_capacity(subset.conditions.len());
        for &c in &subset.conditions {
            let v = grid
                .get(&(s, c))
                .ok_or_else(|| Error::Aggregate(format!("missing report for {s}_{c}")))?;
            row.push(*v);
        }
        cells.push(row);
    }
    let mut condition_means = BTreeMap::new();
    for (j, &c) in subset.conditions.iter().enumerate() {
        let col: Vec<f64> = cells.iter().map(|row| row[j]).collect();
        if let Some(m) = mean(&col) {
            condition_means.insert(c, m);
        }
    }
    let means: Vec<f64> = subset.conditions.iter().filter_map(|c| condition_means.get(c).copied()).collect();
    let mut scenario_sensitivity = BTreeMap::new();
    for (i, &s) in subset.scenarios.iter().enumerate() {
        if let Some(sd) = population_std(&cells[i]) {
            scenario_sensitivity.insert(s, sd);
        }
    }
    Ok(AggregateReport {
        scenarios: subset.scenarios.clone(),
        conditions: subset.conditions.clone(),
        cells,
        condition_means,
        mean_of_means: mean(&means),
        std: population_std(&means),
        scenario_sensitivity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

/// The two tables of a report: per-condition AUROC and per-scenario sensitivity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportDocument {
    pub conditions: String,
    pub sensitivity: String,
}

impl ReportDocument {
    pub fn combined(&self) -> String {
        format!("{}\n{}", self.conditions, self.sensitivity)
    }
}

fn num(x: f64) -> String {
    format!("{x:.4}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn table(format: ReportFormat, header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            for line in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
                let _ = writeln!(out, "{}", line.join(","));
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for r in rows {
                let _ = writeln!(out, "| {} |", r.join(" | "));
            }
        }
    }
    out
}

pub fn emit_report(agg: &AggregateReport, format: ReportFormat) -> ReportDocument {
    let mut header = vec!["scenario".to_string()];
    header.extend(agg.conditions.iter().map(|c| c.name().to_string()));
    header.extend(["mean".to_string(), "std".to_string()]);

    let mut rows: Vec<Vec<String>> = agg
        .scenarios
        .iter()
        .zip(&agg.cells)
        .map(|(s, row)| {
            let mut r = vec![s.name().to_string()];
            r.extend(row.iter().map(|&v| num(v)));
            r.extend([String::new(), String::new()]);
            r
        })
        .collect();
    if !agg.scenarios.is_empty() {
        let mut r = vec!["mean".to_string()];
        r.extend(agg.conditions.iter().map(|c| opt(agg.condition_means.get(c).copied())));
        r.extend([opt(agg.mean_of_means), opt(agg.std)]);
        rows.push(r);
    }
    let conditions = table(format, &header, &rows);

    let mut header = vec!["statistic".to_string()];
    header.extend(agg.scenarios.iter().map(|s| s.name().to_string()));
    let mut rows = Vec::new();
    if !agg.conditions.is_empty() && !agg.scenarios.is_empty() {
        let mut r = vec!["std".to_string()];
        r.extend(agg.scenarios.iter().map(|s| opt(agg.scenario_sensitivity.get(s).copied())));
        rows.push(r);
    }
    let sensitivity = table(format, &header, &rows);
    ReportDocument { conditions, sensitivity }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize, a: usize) -> Vec<bool> {
        let mut v = vec![true; n];
        v.extend(vec![false; a]);
        v
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8, 0.3, 0.4], &labels(2, 2)).unwrap(), 1.0);
        assert_eq!(auroc(&[0.9, 0.8, 0.3, 0.4], &[false, false, true, true]).unwrap(), 0.0);
        // 0.7 beats both anomalies, 0.4 beats neither: 2 of 4 pairs
        assert_eq!(auroc(&[0.7, 0.4, 0.5, 0.6], &labels(2, 2)).unwrap(), 0.5);
        assert_eq!(auroc(&[0.5, 0.5, 0.5], &labels(1, 2)).unwrap(), 0.5);
        assert!(matches!(auroc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass { .. })));
        assert!(auroc(&[0.1], &[true, false]).is_err());
    }

    fn report(s: ScenarioId, c: CaptureCondition, v: f64) -> TaskReport {
        TaskReport {
            task_id: format!("{s}_{c}"),
            scenario: s,
            condition: c,
            auroc: v,
            subset_auroc: BTreeMap::new(),
            n_normal: 1,
            n_anomaly: 1,
        }
    }

    fn grid(f: impl Fn(ScenarioId, CaptureCondition) -> f64) -> Vec<TaskReport> {
        ScenarioId::ALL
            .into_iter()
            .flat_map(|s| CaptureCondition::ALL.into_iter().map(move |c| (s, c)))
            .map(|(s, c)| report(s, c, f(s, c)))
            .collect()
    }

    #[test]
    fn flat_grid() {
        let agg = aggregate(&grid(|_, _| 0.5), &GridSubset::default()).unwrap();
        assert_eq!(agg.mean_of_means, Some(0.5));
        assert_eq!(agg.std, Some(0.0));
        assert!(agg.condition_means.values().all(|&m| m == 0.5));
        assert!(agg.scenario_sensitivity.values().all(|&s| s == 0.0));
    }

    #[test]
    fn reference_condition_means() {
        let means = [0.825, 0.811, 0.848, 0.842, 0.826];
        let m = mean(&means).unwrap();
        let sd = population_std(&means).unwrap();
        assert!((m - 0.8304).abs() < 1e-12);
        assert!((0.013..0.014).contains(&sd), "{sd}");
        assert!((sd - 0.013185).abs() < 1e-6, "{sd}");
    }

    #[test]
    fn sensitivity_example() {
        let reports = grid(|s, c| if s == ScenarioId::Balls && c == CaptureCondition::BlurryCD { 0.9 } else { 0.8 });
        let agg = aggregate(&reports, &GridSubset::default()).unwrap();
        assert!((agg.scenario_sensitivity[&ScenarioId::Balls] - 0.04).abs() < 1e-12);
        assert_eq!(agg.scenario_sensitivity[&ScenarioId::Sticks], 0.0);
    }

    #[test]
    fn grid_errors() {
        let mut reports = grid(|_, _| 0.5);
        let dup = reports[0].clone();
        reports.pop();
        assert!(matches!(aggregate(&reports, &GridSubset::default()), Err(Error::Aggregate(_))));
        reports.push(dup);
        assert!(matches!(aggregate(&reports, &GridSubset::default()), Err(Error::Aggregate(_))));
        let one = GridSubset::new(&[ScenarioId::Fruits], &[CaptureCondition::WhiteBG]);
        let r = report(ScenarioId::Fruits, CaptureCondition::WhiteBG, 0.7);
        let agg = aggregate(std::slice::from_ref(&r), &one).unwrap();
        assert_eq!(agg.mean_of_means, Some(0.7));
        assert!(aggregate(&[r, report(ScenarioId::Balls, CaptureCondition::WhiteBG, 0.7)], &one).is_err());
    }

    #[test]
    fn subset_auroc_uses_all_normals() {
        use ViolationLabel::*;
        let labels = [Normal, Normal, SingleA, SingleB];
        let r = task_report("t", ScenarioId::Fruits, CaptureCondition::WhiteBG, &[0.9, 0.5, 0.6, 0.1], &labels).unwrap();
        assert_eq!(r.subset_auroc[&SingleA], 0.5);
        assert_eq!(r.subset_auroc[&SingleB], 1.0);
        assert!(!r.subset_auroc.contains_key(&Dual));
        assert_eq!(r.auroc, 0.75);
        assert_eq!((r.n_normal, r.n_anomaly), (2, 2));
    }

    #[test]
    fn report_shapes() {
        let agg = aggregate(&grid(|_, _| 0.5), &GridSubset::default()).unwrap();
        let doc = emit_report(&agg, ReportFormat::Csv);
        assert_eq!(doc, emit_report(&agg, ReportFormat::Csv));
        let head = doc.conditions.lines().next().unwrap();
        assert_eq!(head, "scenario,WhiteBG,CableBG,MeshBG,LowLightCD,BlurryCD,mean,std");
        assert_eq!(doc.conditions.lines().count(), 12);
        assert_eq!(doc.sensitivity.lines().next().unwrap().split(',').count(), 11);

        let empty = aggregate(&[], &GridSubset::new(&[], &[])).unwrap();
        let doc = emit_report(&empty, ReportFormat::Markdown);
        assert_eq!(doc.conditions, "| scenario | mean | std |\n|---|---|---|\n");
        assert_eq!(doc.sensitivity, "| statistic |\n|---|\n");
    }
}
