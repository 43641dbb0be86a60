use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{auc, pr_curve, roc_curve, PrPoint, RocPoint};
use crate::error::Result;
use crate::types::{CandidateKey, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResult {
    pub auc: f64,
    pub pr: Vec<PrPoint>,
    pub roc: Vec<RocPoint>,
}

impl SystemResult {
    pub fn compute(ranked: &[(CandidateKey, f64)], gold: &BTreeMap<CandidateKey, Label>) -> Result<Self> {
        let roc = roc_curve(ranked, gold)?;
        Ok(SystemResult {
            auc: auc(&roc),
            pr: pr_curve(ranked, gold)?,
            roc,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub config_hash: String,
    pub positives: usize,
    pub negatives: usize,
    pub positive_rate: f64,
    pub systems: BTreeMap<String, SystemResult>,
}

impl EvalReport {
    pub fn new(config_hash: &str, gold: &BTreeMap<CandidateKey, Label>) -> Self {
        let positives = gold.values().filter(|l| l.is_positive()).count();
        let negatives = gold.len() - positives;
        EvalReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            positives,
            negatives,
            positive_rate: if gold.is_empty() { 0.0 } else { positives as f64 / gold.len() as f64 },
            systems: BTreeMap::new(),
        }
    }
}

/// `system,curve,x,y` rows: PR as (recall, precision), ROC as (fpr, tpr).
pub fn curves_csv(report: &EvalReport) -> String {
    let mut s = String::from("system,curve,x,y\n");
    for (name, r) in &report.systems {
        for p in &r.pr {
            let _ = writeln!(s, "{name},pr,{},{}", p.recall, p.precision);
        }
        for p in &r.roc {
            let _ = writeln!(s, "{name},roc,{},{}", p.fpr, p.tpr);
        }
    }
    s
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// A unit-square line chart with one polyline per series.
pub fn svg_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, m) = (480.0, 400.0, 50.0);
    let pw = w - 2.0 * m;
    let ph = h - 2.0 * m;
    let px = |x: f64| m + x.clamp(0.0, 1.0) * pw;
    let py = |y: f64| h - m - y.clamp(0.0, 1.0) * ph;
    let esc = |t: &str| html_escape::encode_text(t).into_owned();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" font-family="sans-serif" font-size="12">"#,
        h + 20.0 * series.len() as f64
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(title));
    let _ = writeln!(
        s,
        r##"<rect x="{m}" y="{m}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{v}</text>"#, px(v), h - m + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#, m - 6.0, py(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, esc(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        esc(y_label)
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.4},{:.4}", px(*x), py(*y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = h + 20.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{m}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, m + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, m + 26.0, ly + 4.0, esc(name));
    }
    s.push_str("</svg>\n");
    s
}
