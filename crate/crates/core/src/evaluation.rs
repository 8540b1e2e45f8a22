//! Ranking-based evaluation: AUC, lift curves, capture-at-K.
//!
//! Churn scores are consumed by selecting the top of a ranked list, so all
//! quality measures here are ranking measures. Ties are handled
//! deterministically: AUC gives tied pairs half credit, and ranked listings
//! break score ties by stable input order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::windowing::Label;

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("need both classes to evaluate a ranking (got {positives} positives out of {n})")]
    SingleClass { n: usize, positives: usize },
    #[error("score at position {0} is not finite")]
    BadScore(usize),
}

fn validate(scores: &[f64], labels: &[Label]) -> Result<usize, EvalError> {
    assert_eq!(scores.len(), labels.len(), "scores and labels must align");
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::BadScore(i));
    }
    let positives = labels.iter().filter(|l| l.is_churn()).count();
    if positives == 0 || positives == labels.len() {
        return Err(EvalError::SingleClass { n: labels.len(), positives });
    }
    Ok(positives)
}

/// Probability that a uniformly random churner is scored above a uniformly
/// random stayer, ties counting one half. Computed from rank sums, so it
/// equals the normalized count of correctly ordered pairs.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64, EvalError> {
    let positives = validate(scores, labels)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Average ranks across tie groups, 1-based.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx].is_churn() {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let p = positives as f64;
    let q = (n - positives) as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

/// Indices sorted by descending score, ties keeping input order.
pub fn ranked_indices(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    order
}

/// Churners among the top `i` ranks, for every prefix length `0..=n`.
fn cumulative_positives(scores: &[f64], labels: &[Label]) -> Vec<usize> {
    let order = ranked_indices(scores);
    let mut cum = Vec::with_capacity(scores.len() + 1);
    cum.push(0);
    let mut count = 0;
    for idx in order {
        count += usize::from(labels[idx].is_churn());
        cum.push(count);
    }
    cum
}

/// One point of a lift curve: contacting the top `population_fraction` of
/// the ranked population reaches `target_fraction` of all churners.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct LiftPoint {
    pub population_fraction: f64,
    pub target_fraction: f64,
}

/// Lift curve on a percent grid: the origin plus one point per percent of
/// the population. Prefix sizes are computed in integer arithmetic
/// (`ceil(k*n/100)` at `k` percent), so the geometry is exact.
pub fn lift_curve(scores: &[f64], labels: &[Label]) -> Result<Vec<LiftPoint>, EvalError> {
    let positives = validate(scores, labels)?;
    let n = scores.len();
    let cum = cumulative_positives(scores, labels);
    let mut points = Vec::with_capacity(101);
    points.push(LiftPoint { population_fraction: 0.0, target_fraction: 0.0 });
    for k in 1..=100usize {
        let top = (k * n).div_ceil(100);
        points.push(LiftPoint {
            population_fraction: k as f64 / 100.0,
            target_fraction: cum[top] as f64 / positives as f64,
        });
    }
    Ok(points)
}

/// Fraction of all churners found in the top `k` ranks.
pub fn capture_at(scores: &[f64], labels: &[Label], k: usize) -> Result<f64, EvalError> {
    let positives = validate(scores, labels)?;
    let cum = cumulative_positives(scores, labels);
    Ok(cum[k.min(scores.len())] as f64 / positives as f64)
}

/// Capture figures for one ranked prefix. `cumulative_capture` is the
/// fraction of all churners inside the top `k`; `bucket_precision` is the
/// churner density within this row's bucket of ranks (between the previous
/// row's `k` and this one), which is not cumulative.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct CaptureRow {
    pub k: usize,
    pub cumulative_capture: f64,
    pub bucket_precision: f64,
}

/// Full evaluation of one scored population.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub positives: usize,
    pub auc: f64,
    pub lift: Vec<LiftPoint>,
    pub capture: Vec<CaptureRow>,
    /// AUC on the training split, when the caller evaluated one.
    pub train_auc: Option<f64>,
    /// auc / train_auc: close to 1 when the model generalizes.
    pub robustness: Option<f64>,
}

/// Evaluates scores against labels. `capture_ks` lists ranked-prefix sizes
/// of interest (deduplicated and sorted; values beyond `n` are clamped).
pub fn evaluate(
    scores: &[f64],
    labels: &[Label],
    capture_ks: &[usize],
    train_auc: Option<f64>,
) -> Result<EvalReport, EvalError> {
    let positives = validate(scores, labels)?;
    let n = scores.len();
    let auc = auc(scores, labels)?;
    let cum = cumulative_positives(scores, labels);

    let mut ks: Vec<usize> = capture_ks.iter().map(|&k| k.min(n)).filter(|&k| k > 0).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut capture = Vec::with_capacity(ks.len());
    let mut prev = 0usize;
    for &k in &ks {
        capture.push(CaptureRow {
            k,
            cumulative_capture: cum[k] as f64 / positives as f64,
            bucket_precision: (cum[k] - cum[prev]) as f64 / (k - prev) as f64,
        });
        prev = k;
    }

    Ok(EvalReport {
        n,
        positives,
        auc,
        lift: lift_curve(scores, labels)?,
        capture,
        train_auc,
        robustness: train_auc.map(|t| auc / t),
    })
}

impl EvalReport {
    /// Lift interpolated at a grid fraction (exact on the percent grid).
    pub fn lift_at(&self, population_fraction: f64) -> f64 {
        let k = (population_fraction * 100.0).round() as usize;
        self.lift[k.min(100)].target_fraction
    }

    /// Plain-text rendering for terminals and log files.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let rate = self.positives as f64 / self.n as f64;
        let _ = writeln!(
            out,
            "instances: {} (churners: {}, rate {:.2}%)",
            self.n,
            self.positives,
            100.0 * rate
        );
        let _ = write!(out, "auc: {:.4}", self.auc);
        if let (Some(train), Some(rob)) = (self.train_auc, self.robustness) {
            let _ = write!(out, " (train {train:.4}, robustness {rob:.3})");
        }
        out.push('\n');
        let _ = write!(out, "lift:");
        for pct in [5usize, 10, 20, 30, 50] {
            let _ = write!(out, "  {pct}% -> {:.1}%", 100.0 * self.lift[pct].target_fraction);
        }
        out.push('\n');
        for row in &self.capture {
            let _ = writeln!(
                out,
                "top {:>6}: {:.1}% of churners cumulative, {:.1}% bucket precision",
                row.k,
                100.0 * row.cumulative_capture,
                100.0 * row.bucket_precision
            );
        }
        out
    }

    /// Delimited lift table (population%, target%), one row per grid point.
    pub fn lift_table(&self) -> String {
        let mut out = String::from("population_pct\ttarget_pct\n");
        for p in &self.lift {
            let _ = writeln!(
                out,
                "{}\t{}",
                100.0 * p.population_fraction,
                100.0 * p.target_fraction
            );
        }
        out
    }
}

const PALETTE: [&str; 4] = ["#1f6fb2", "#c23b22", "#2e8b57", "#8b5cf6"];

/// Renders one or more lift curves as a standalone SVG: population % on the
/// x axis, captured target % on the y axis, with the random-model diagonal
/// for reference.
pub fn lift_plot_svg(curves: &[(&str, &[LiftPoint])]) -> String {
    let (w, h) = (640.0, 480.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 45.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let x = |f: f64| left + f * pw;
    let y = |f: f64| top + (1.0 - f) * ph;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = writeln!(svg, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    // Grid and axis labels every 20%.
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            x(f), y(0.0), x(f), y(1.0)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            x(0.0), y(f), x(1.0), y(f)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}%</text>",
            x(f), h - bottom + 18.0, (f * 100.0) as u32
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}%</text>",
            left - 8.0, y(f) + 4.0, (f * 100.0) as u32
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">population contacted</text>",
        x(0.5), h - 8.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">churners reached</text>",
        y(0.5), y(0.5)
    );
    // Random-model diagonal.
    let _ = writeln!(
        svg,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999\" stroke-dasharray=\"5,4\"/>",
        x(0.0), y(0.0), x(1.0), y(1.0)
    );
    for (i, (name, points)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = points
            .iter()
            .map(|p| format!("{:.1},{:.1}", x(p.population_fraction), y(p.target_fraction)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{name}</text>",
            left + 10.0,
            top + 16.0 + 16.0 * i as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}
