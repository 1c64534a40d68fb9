//! Rendering of before/after reports to JSON, CSV and SVG.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use pleasance_core::analysis::Report;

use crate::error::Result;
use crate::formats::{write_participant_stats, write_stimulus_stats};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;

/// Writes `report.json`, `stimuli.csv`, `participants.csv` and `report.svg`
/// into `dir`.
pub fn write_report_dir(dir: &Path, report: &Report) -> Result<()> {
    fs::create_dir_all(dir)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("report.json"))?), report)?;
    write_stimulus_stats(BufWriter::new(File::create(dir.join("stimuli.csv"))?), &report.stimuli)?;
    write_participant_stats(BufWriter::new(File::create(dir.join("participants.csv"))?), &report.participants)?;
    fs::write(dir.join("report.svg"), render_svg(report))?;
    Ok(())
}

/// Paired line chart over stimulus ids on the [-3, 3] scale: before
/// ratings dashed red, after scores dotted blue, and the mean after score
/// with one-sd error bars in black.
pub fn render_svg(report: &Report) -> String {
    let n = report.stimuli.len().max(1);
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * (i as f64 + 0.5) / n as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v.clamp(-3.0, 3.0) + 3.0) / 6.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for level in -3..=3 {
        let yy = y(level as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{level}</text>"##,
            WIDTH - MARGIN,
            MARGIN - 6.0,
            yy + 3.0
        );
    }
    for i in 0..n {
        let _ = writeln!(
            s,
            r#"<text class="stimulus" x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{i}</text>"#,
            x(i),
            HEIGHT - MARGIN + 14.0
        );
    }
    let polyline = |values: &[f64], style: &str| {
        let pts: Vec<String> = values.iter().enumerate().map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v))).collect();
        format!(r#"<polyline fill="none" {style} points="{}"/>"#, pts.join(" "))
    };
    for p in &report.participants {
        let _ = writeln!(s, "{}", polyline(&p.before, r#"class="before" stroke="red" stroke-dasharray="6 3""#));
        let _ = writeln!(s, "{}", polyline(&p.after, r#"class="after" stroke="blue" stroke-dasharray="2 2""#));
    }
    for st in &report.stimuli {
        let (cx, cy) = (x(st.stimulus_id), y(st.mean));
        if let Some(sd) = st.sd {
            let _ = writeln!(
                s,
                r#"<line class="errorbar" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                y(st.mean - sd),
                y(st.mean + sd)
            );
        }
        let _ = writeln!(s, r#"<circle class="mean" cx="{cx:.2}" cy="{cy:.2}" r="3" fill="black"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use pleasance_core::analysis::ParticipantResult;

    fn report(k: usize) -> Report {
        let results = (0..k)
            .map(|p| {
                let before: Vec<f64> = (0..15).map(|i| (i % 7) as f64 - 3.0).collect();
                let after: Vec<f64> = before.iter().map(|b| (b * 0.9 + p as f64 * 0.1).clamp(-3.0, 3.0)).collect();
                ParticipantResult::new(format!("p{p}"), before, after).unwrap()
            })
            .collect();
        Report::build(results).unwrap()
    }

    #[test]
    fn chart_has_fifteen_positions() {
        let svg = render_svg(&report(1));
        assert_eq!(svg.matches(r#"class="stimulus""#).count(), 15);
        assert_eq!(svg.matches(r#"class="before""#).count(), 1);
        assert_eq!(svg.matches(r#"class="errorbar""#).count(), 0);
        let svg = render_svg(&report(3));
        assert_eq!(svg.matches(r#"class="errorbar""#).count(), 15);
    }

    #[test]
    fn directory_contents() {
        let dir = tempfile::tempdir().unwrap();
        write_report_dir(dir.path(), &report(2)).unwrap();
        for f in ["report.json", "stimuli.csv", "participants.csv", "report.svg"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let csv = fs::read_to_string(dir.path().join("participants.csv")).unwrap();
        assert!(csv.starts_with("participant_id,r,mad\np0,"));
    }
}
