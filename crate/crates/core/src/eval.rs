//! Percentage of detected joints (PDJ).
//!
//! A joint counts as detected when its prediction lies within a fraction of
//! the torso diameter (left shoulder to right hip) of the ground truth. Curves
//! sample 101 fractions from 0 to 0.5; `pdj_avg` is the mean of the samples.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::geometry::Point;
use crate::graph::{kp, torso_diameter, KEYPOINT_NAMES, NUM_KEYPOINTS};

pub const NUM_THRESHOLDS: usize = 101;

/// `k / 200` for `k = 0..=100`.
pub fn thresholds() -> Vec<f64> {
    (0..NUM_THRESHOLDS).map(|k| k as f64 / 200.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub image_id: String,
    pub predicted: Vec<Point>,
    /// Non-finite entries are unannotated and left out of every rate.
    pub ground_truth: Vec<Point>,
    pub torso: f64,
    pub categories: Vec<String>,
}

impl EvalRecord {
    /// Record with the torso diameter taken from the ground truth.
    pub fn new(image_id: impl Into<String>, predicted: Vec<Point>, ground_truth: Vec<Point>, categories: Vec<String>) -> Result<Self> {
        if predicted.len() != NUM_KEYPOINTS || ground_truth.len() != NUM_KEYPOINTS {
            return Err(PoseError::InvalidArgument(format!(
                "records need {NUM_KEYPOINTS} keypoints, got {} and {}",
                predicted.len(),
                ground_truth.len()
            )));
        }
        let torso = torso_diameter(&ground_truth);
        if !(torso > 0.0) {
            return Err(PoseError::InvalidArgument(format!(
                "torso diameter {torso} ({} to {})",
                KEYPOINT_NAMES[kp::L_SHOULDER],
                KEYPOINT_NAMES[kp::R_HIP]
            )));
        }
        Ok(EvalRecord {
            image_id: image_id.into(),
            predicted,
            ground_truth,
            torso,
            categories,
        })
    }
}

/// `‖pred - gt‖ ≤ fraction · torso`. A non-finite prediction is never detected.
pub fn joint_detected(pred: Point, gt: Point, torso: f64, fraction: f64) -> Result<bool> {
    if !(torso > 0.0) {
        return Err(PoseError::InvalidArgument(format!("torso diameter {torso}")));
    }
    Ok(pred.is_finite() && pred.distance(gt) <= fraction * torso)
}

/// Named set of keypoints pooled into one rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointGroup {
    pub name: String,
    pub keypoints: Vec<usize>,
}

impl JointGroup {
    pub fn new(name: impl Into<String>, keypoints: &[usize]) -> Self {
        JointGroup {
            name: name.into(),
            keypoints: keypoints.to_vec(),
        }
    }

    /// Left and right joints pooled: head, neck, shoulder, elbow, wrist, hip,
    /// knee, ankle.
    pub fn standard() -> Vec<JointGroup> {
        use kp::*;
        vec![
            JointGroup::new("head", &[HEAD]),
            JointGroup::new("neck", &[NECK]),
            JointGroup::new("shoulder", &[L_SHOULDER, R_SHOULDER]),
            JointGroup::new("elbow", &[L_ELBOW, R_ELBOW]),
            JointGroup::new("wrist", &[L_WRIST, R_WRIST]),
            JointGroup::new("hip", &[L_HIP, R_HIP]),
            JointGroup::new("knee", &[L_KNEE, R_KNEE]),
            JointGroup::new("ankle", &[L_ANKLE, R_ANKLE]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdjCurve {
    pub thresholds: Vec<f64>,
    /// Per group, one percentage per threshold.
    pub rates: Vec<Vec<f64>>,
    pub pdj_avg: Vec<f64>,
    pub groups: Vec<String>,
}

impl PdjCurve {
    pub fn avg(&self, group: &str) -> Option<f64> {
        self.groups.iter().position(|g| g == group).map(|i| self.pdj_avg[i])
    }
}

/// Detection rates of every group at every threshold. A group with no
/// annotated joints gets rate 0.
pub fn pdj_curve(records: &[EvalRecord], groups: &[JointGroup]) -> Result<PdjCurve> {
    let ts = thresholds();
    let mut rates = Vec::with_capacity(groups.len());
    let mut avgs = Vec::with_capacity(groups.len());
    for g in groups {
        let mut detected = vec![0usize; ts.len()];
        let mut total = 0usize;
        for r in records {
            for &k in &g.keypoints {
                let gt = r.ground_truth[k];
                if !gt.is_finite() {
                    continue;
                }
                total += 1;
                for (d, &f) in detected.iter_mut().zip(&ts) {
                    if joint_detected(r.predicted[k], gt, r.torso, f)? {
                        *d += 1;
                    }
                }
            }
        }
        let rate: Vec<f64> = detected
            .iter()
            .map(|&d| if total == 0 { 0.0 } else { 100.0 * d as f64 / total as f64 })
            .collect();
        avgs.push(rate.iter().sum::<f64>() / ts.len() as f64);
        rates.push(rate);
    }
    Ok(PdjCurve {
        thresholds: ts,
        rates,
        pdj_avg: avgs,
        groups: groups.iter().map(|g| g.name.clone()).collect(),
    })
}

pub const UNTAGGED: &str = "untagged";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub category: String,
    pub joint: String,
    pub pdj_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryReport {
    pub rows: Vec<ReportRow>,
    /// Curves per `(method, category)`.
    #[serde(skip)]
    pub curves: BTreeMap<(String, String), PdjCurve>,
}

/// Per-category PDJ of every method. A record counts under each of its tags
/// found in `categories`, and under [`UNTAGGED`] if it has none of them.
pub fn category_report(
    results: &[(String, Vec<EvalRecord>)],
    categories: &[String],
    groups: &[JointGroup],
) -> Result<CategoryReport> {
    let mut report = CategoryReport::default();
    for (method, records) in results {
        let mut buckets: BTreeMap<&str, Vec<EvalRecord>> = BTreeMap::new();
        for r in records {
            let tags: Vec<&str> = categories
                .iter()
                .filter(|c| r.categories.contains(c))
                .map(String::as_str)
                .collect();
            if tags.is_empty() {
                buckets.entry(UNTAGGED).or_default().push(r.clone());
            }
            for t in tags {
                buckets.entry(t).or_default().push(r.clone());
            }
        }
        let order = categories.iter().map(String::as_str).chain(std::iter::once(UNTAGGED));
        for cat in order {
            let Some(recs) = buckets.get(cat) else { continue };
            let curve = pdj_curve(recs, groups)?;
            for (g, &avg) in curve.groups.iter().zip(&curve.pdj_avg) {
                report.rows.push(ReportRow {
                    method: method.clone(),
                    category: cat.to_string(),
                    joint: g.clone(),
                    pdj_avg: avg,
                });
            }
            report.curves.insert((method.clone(), cat.to_string()), curve);
        }
    }
    Ok(report)
}

impl CategoryReport {
    /// `method,category,joint,pdj_avg`, values with six decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,category,joint,pdj_avg\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{:.6}", r.method, r.category, r.joint, r.pdj_avg).unwrap();
        }
        s
    }

    /// Parses [`to_csv`](Self::to_csv) output; `source` names the text in errors.
    pub fn from_csv(text: &str, source: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if n == 0 || line.is_empty() {
                continue;
            }
            let bad = |message: &str| PoseError::MalformedRecord {
                path: source.to_path_buf(),
                line: n + 1,
                message: message.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            rows.push(ReportRow {
                method: f[0].to_string(),
                category: f[1].to_string(),
                joint: f[2].to_string(),
                pdj_avg: f[3].parse().map_err(|_| bad("pdj_avg is not a number"))?,
            });
        }
        Ok(CategoryReport {
            rows,
            curves: BTreeMap::new(),
        })
    }

    pub fn get(&self, method: &str, category: &str, joint: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.category == category && r.joint == joint)
            .map(|r| r.pdj_avg)
    }

    /// Text grid, one row per (method, category), one column per joint, one
    /// decimal.
    pub fn grid(&self) -> String {
        let mut joints: Vec<&str> = Vec::new();
        let mut keys: Vec<(&str, &str)> = Vec::new();
        for r in &self.rows {
            if !joints.contains(&r.joint.as_str()) {
                joints.push(&r.joint);
            }
            if !keys.contains(&(r.method.as_str(), r.category.as_str())) {
                keys.push((&r.method, &r.category));
            }
        }
        let mut s = format!("{:<16}{:<12}", "method", "category");
        for j in &joints {
            write!(s, "{j:>10}").unwrap();
        }
        s.push('\n');
        for (m, c) in keys {
            write!(s, "{m:<16}{c:<12}").unwrap();
            for j in &joints {
                match self.get(m, c, j) {
                    Some(v) => write!(s, "{v:>10.1}").unwrap(),
                    None => write!(s, "{:>10}", "-").unwrap(),
                }
            }
            s.push('\n');
        }
        s
    }

    /// One SVG per joint group: PDJ against threshold, a curve per method, for
    /// one category.
    pub fn svg(&self, category: &str, joint: &str) -> String {
        let curves: Vec<(&str, &[f64])> = self
            .curves
            .iter()
            .filter(|((_, c), _)| c == category)
            .filter_map(|((m, _), curve)| {
                let g = curve.groups.iter().position(|g| g == joint)?;
                Some((m.as_str(), curve.rates[g].as_slice()))
            })
            .collect();
        svg_plot(&format!("{joint} ({category})"), &curves)
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line plot of rates over the threshold axis.
pub fn svg_plot(title: &str, curves: &[(&str, &[f64])]) -> String {
    let (w, h, m) = (480.0, 360.0, 48.0);
    let ts = thresholds();
    let px = |f: f64| m + f / 0.5 * (w - 2.0 * m);
    let py = |r: f64| h - m - r / 100.0 * (h - 2.0 * m);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title)).unwrap();
    writeln!(
        s,
        r#"<path d="M{m} {m} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        b = h - m,
        r = w - m
    )
    .unwrap();
    for k in 0..=5 {
        let f = k as f64 * 0.1;
        writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="10">{f:.1}</text>"#, px(f), h - m + 14.0).unwrap();
        let r = k as f64 * 20.0;
        writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="10">{r}</text>"#, m - 4.0, py(r) + 3.0).unwrap();
    }
    for (i, (name, rates)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ts
            .iter()
            .zip(rates.iter())
            .map(|(&f, &r)| format!("{:.2},{:.2}", px(f), py(r)))
            .collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" ")).unwrap();
        let ly = m + 14.0 * i as f64;
        writeln!(s, r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">{}</text>"#, w - m - 110.0, escape(name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_counts_as_detected() {
        let gt = Point::new(0.0, 0.0);
        let p = Point::new(30.0, 0.0);
        assert!(!joint_detected(p, gt, 100.0, 0.25).unwrap());
        assert!(joint_detected(p, gt, 100.0, 0.3).unwrap());
        assert!(joint_detected(gt, gt, 100.0, 0.0).unwrap());
        assert!(joint_detected(p, gt, 0.0, 0.3).is_err());
        assert!(!joint_detected(Point::new(f64::NAN, 0.0), gt, 1.0, 0.5).unwrap());
    }

    #[test]
    fn thresholds_are_exact_fractions() {
        let t = thresholds();
        assert_eq!(t.len(), 101);
        assert_eq!((t[0], t[50], t[100]), (0.0, 0.25, 0.5));
    }
}
