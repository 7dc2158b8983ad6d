//! Static grouped-bar SVG figures built from aggregated long-format rows.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::report::{aggregate, AggregateRow};
use super::runner::LongRow;
use crate::algorithms::Track;
use crate::error::Result;

/// One figure: a track, the metric it plots and its file stem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FigureSpec {
    pub track: Track,
    pub metric: &'static str,
    pub stem: &'static str,
}

pub const FIGURES: [FigureSpec; 11] = [
    FigureSpec { track: Track::Rec, metric: "estimated_primary_value", stem: "rec_mean_estimated_primary_value" },
    FigureSpec { track: Track::Rec, metric: "operational_regret", stem: "rec_mean_operational_regret" },
    FigureSpec { track: Track::Trt, metric: "estimated_primary_value", stem: "trt_mean_estimated_primary_value" },
    FigureSpec { track: Track::Trt, metric: "abstained", stem: "trt_abstention_rate" },
    FigureSpec { track: Track::Trt, metric: "wrong_nonabstain", stem: "trt_wrong_nonabstain_rate" },
    FigureSpec { track: Track::Inf, metric: "coverage_ok", stem: "inf_coverage_rate" },
    FigureSpec { track: Track::Inf, metric: "certified_share", stem: "inf_mean_certified_share" },
    FigureSpec { track: Track::Inf, metric: "final_interval_width", stem: "inf_mean_interval_width" },
    FigureSpec { track: Track::Recert, metric: "rec_value", stem: "recert_mean_rec_deployed_value" },
    FigureSpec { track: Track::Recert, metric: "structural_abstained", stem: "recert_trt_abstention_rate" },
    FigureSpec { track: Track::Recert, metric: "final_interval_width", stem: "recert_mean_trt_interval_width" },
];

const PALETTE: [&str; 8] = ["#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb", "#000000"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bars: one group per scenario, one bar per algorithm.
pub fn grouped_bar_svg(title: &str, rows: &[&AggregateRow]) -> String {
    let scenarios: Vec<&str> = rows.iter().map(|r| r.scenario.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    let algorithms: Vec<&str> = rows.iter().map(|r| r.algorithm.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    let max = rows.iter().map(|r| r.mean).fold(0.0_f64, f64::max);
    let y_max = if max > 0.0 { max * 1.1 } else { 1.0 };

    let bar_w = 14.0;
    let group_w = bar_w * algorithms.len() as f64 + 16.0;
    let (left, top, plot_h) = (60.0, 40.0, 260.0);
    let legend_h = 16.0 * algorithms.len() as f64 + 10.0;
    let width = left + group_w * scenarios.len() as f64 + 20.0;
    let height = top + plot_h + 110.0 + legend_h;
    let y = |v: f64| top + plot_h * (1.0 - v / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">{}</text>"#, escape(title));
    for i in 0..=4 {
        let v = y_max * f64::from(i) / 4.0;
        let yy = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"##,
            width - 20.0,
            left - 4.0,
            yy + 4.0
        );
    }
    for (gi, scenario) in scenarios.iter().enumerate() {
        let x0 = left + group_w * gi as f64 + 8.0;
        for (ai, algorithm) in algorithms.iter().enumerate() {
            if let Some(r) = rows.iter().find(|r| r.scenario == *scenario && r.algorithm == *algorithm) {
                let x = x0 + bar_w * ai as f64;
                let top_y = y(r.mean.max(0.0));
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.1}" y="{top_y:.1}" width="{:.1}" height="{:.1}" fill="{}"><title>{} / {}: {:.6} (n={})</title></rect>"#,
                    bar_w - 1.0,
                    (top + plot_h - top_y).max(0.0),
                    PALETTE[ai % PALETTE.len()],
                    escape(scenario),
                    escape(algorithm),
                    r.mean,
                    r.n
                );
            }
        }
        let cx = x0 + bar_w * algorithms.len() as f64 / 2.0;
        let ly = top + plot_h + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{ly:.1}" text-anchor="end" transform="rotate(-40 {cx:.1} {ly:.1})">{}</text>"#,
            escape(scenario)
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        top + plot_h,
        width - 20.0,
        top + plot_h
    );
    let legend_y = top + plot_h + 110.0;
    for (ai, algorithm) in algorithms.iter().enumerate() {
        let ly = legend_y + 16.0 * ai as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{ly:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            PALETTE[ai % PALETTE.len()],
            left + 14.0,
            ly + 9.0,
            escape(algorithm)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Write every figure that has data; returns written paths and skipped stems.
pub fn emit_plots(rows: &[LongRow], out_dir: &Path) -> Result<(Vec<PathBuf>, Vec<String>)> {
    fs::create_dir_all(out_dir)?;
    let agg = aggregate(rows);
    let mut written = Vec::new();
    let mut skipped = Vec::new();
    for fig in FIGURES {
        let selected: Vec<&AggregateRow> =
            agg.iter().filter(|a| a.track == fig.track.as_str() && a.metric == fig.metric).collect();
        if selected.is_empty() {
            skipped.push(fig.stem.to_string());
            continue;
        }
        let path = out_dir.join(format!("{}.svg", fig.stem));
        fs::write(&path, grouped_bar_svg(fig.stem, &selected))?;
        written.push(path);
    }
    Ok((written, skipped))
}
