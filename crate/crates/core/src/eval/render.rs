//! Text tables, result files, graph dumps and curve data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::Scores;
use super::{CurvePoint, Evaluation};
use crate::error::Result;
use crate::scene::Scene;

pub const PRECISION_NOTE: &str = "precision of an empty prediction: 1 for observation-only methods, 0 otherwise";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub label: String,
    pub method: String,
    pub budget: String,
    pub scenes: usize,
    pub interactions: usize,
    pub interaction_fraction: f64,
    pub observation_only: bool,
    pub micro: Scores,
    #[serde(rename = "macro")]
    pub macro_avg: Scores,
}

impl ResultRow {
    pub fn of(e: &Evaluation) -> Self {
        Self::labelled(&e.method, e)
    }

    pub fn labelled(label: &str, e: &Evaluation) -> Self {
        Self {
            label: label.to_string(),
            method: e.method.clone(),
            budget: e.budget.clone(),
            scenes: e.report.scenes.len(),
            interactions: e.report.interactions,
            interaction_fraction: e.report.interaction_fraction(),
            observation_only: e.report.observation_only,
            micro: e.report.micro,
            macro_avg: e.report.macro_avg,
        }
    }
}

/// Aligned table of micro scores, one row per result.
pub fn table(rows: &[ResultRow]) -> String {
    let w = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max("method".len());
    let mut s = String::new();
    let _ = writeln!(s, "# {PRECISION_NOTE}");
    let _ = writeln!(s, "{:<w$}  {:<10}  {:>6}  {:>6}  {:>6}  {:>6}  {:>7}", "method", "budget", "P", "R", "F1", "MCC", "inter%");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<w$}  {:<10}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>7.1}",
            r.label,
            r.budget,
            r.micro.precision,
            r.micro.recall,
            r.micro.f1,
            r.micro.mcc,
            100.0 * r.interaction_fraction
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpEdge {
    pub trigger: usize,
    pub responder: usize,
    pub score: f64,
    pub predicted: bool,
    pub truth: bool,
    /// The trigger's row was observed.
    pub observed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub scene_id: String,
    pub method: String,
    pub budget: String,
    pub n: usize,
    pub categories: Vec<u32>,
    pub interaction_order: Vec<usize>,
    /// Pairs that are predicted or true.
    pub edges: Vec<DumpEdge>,
}

pub fn graph_dumps(e: &Evaluation, scenes: &[&Scene]) -> Vec<GraphDump> {
    e.runs
        .iter()
        .zip(scenes)
        .map(|(run, s)| {
            let n = s.n();
            let truth = s.ground_truth.adjacency();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let k = i * n + j;
                    if run.prediction[k] || truth[k] {
                        edges.push(DumpEdge {
                            trigger: i,
                            responder: j,
                            score: run.belief.get(i, j),
                            predicted: run.prediction[k],
                            truth: truth[k],
                            observed: run.order.contains(&i),
                        });
                    }
                }
            }
            GraphDump {
                scene_id: s.scene_id.clone(),
                method: e.method.clone(),
                budget: e.budget.clone(),
                n,
                categories: s.objects.iter().map(|o| o.category_id).collect(),
                interaction_order: run.order.clone(),
                edges,
            }
        })
        .collect()
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("t,precision,recall,f1,mcc,active\n");
    for p in curve {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{}",
            p.t, p.scores.precision, p.scores.recall, p.scores.f1, p.scores.mcc, p.active
        );
    }
    s
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '-' }).collect()
}

/// Writes `results.txt`, `results.json`, one curve per evaluation under
/// `curves/` and per-scene graph dumps under `graphs/`.
pub fn write_results(dir: &Path, evals: &[(String, &Evaluation)], scenes: &[&Scene]) -> Result<Vec<ResultRow>> {
    fs::create_dir_all(dir.join("curves"))?;
    let rows: Vec<ResultRow> = evals.iter().map(|(label, e)| ResultRow::labelled(label, e)).collect();
    fs::write(dir.join("results.txt"), table(&rows))?;
    fs::write(dir.join("results.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
    for (label, e) in evals {
        let tag = slug(&format!("{label}-{}", e.budget));
        fs::write(dir.join("curves").join(format!("{tag}.csv")), curve_csv(&e.curve))?;
        let gdir = dir.join("graphs").join(&tag);
        fs::create_dir_all(&gdir)?;
        for d in graph_dumps(e, scenes) {
            fs::write(gdir.join(format!("{}.json", slug(&d.scene_id))), serde_json::to_string_pretty(&d)? + "\n")?;
        }
    }
    Ok(rows)
}
