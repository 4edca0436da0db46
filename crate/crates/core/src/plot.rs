//! SVG line charts of sweep metrics.

use std::fmt::Write;

use crate::harness::{Metric, SweepResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect()
}

/// One metric against the swept value, with standard-error bars.
/// Points with no value are skipped.
pub fn metric_svg(result: &SweepResult, metric: Metric) -> String {
    let pts: Vec<(f64, f64, f64)> = result
        .points
        .iter()
        .filter_map(|p| {
            let e = p.metric(metric)?;
            Some((p.value, e.value?, e.std_error.unwrap_or(0.0)))
        })
        .collect();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}: {}</text>"#,
        WIDTH / 2.0,
        result.name,
        metric
    );

    let (x0, x1) = pts
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let y1 = pts.iter().map(|p| p.1 + p.2).fold(f64::MIN, f64::max);
    let (x0, x1) = if pts.is_empty() {
        (0.0, 1.0)
    } else if x0 == x1 {
        (x0 - 1.0, x1 + 1.0)
    } else {
        (x0, x1)
    };
    let y1 = if y1 > 0.0 { y1 * 1.1 } else { 1.0 };
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / y1 * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for x in ticks(x0, x1, 4) {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(x),
            HEIGHT - MARGIN + 18.0,
            (x * 100.0).round() / 100.0
        );
    }
    for y in ticks(0.0, y1, 4) {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            sy(y) + 4.0,
            (y * 1000.0).round() / 1000.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        result.variable
    );

    if !pts.is_empty() {
        let line: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            line.join(" ")
        );
    }
    for &(x, y, se) in &pts {
        let (cx, lo, hi) = (sx(x), sy((y - se).max(0.0)), sy(y + se));
        let _ = writeln!(
            s,
            r#"<path d="M{cx:.2} {lo:.2} V{hi:.2} M{a:.2} {lo:.2} H{b:.2} M{a:.2} {hi:.2} H{b:.2}" stroke="black"/>"#,
            a = cx - 4.0,
            b = cx + 4.0
        );
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
            sy(y)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Estimate, PointSummary, SweptVariable};

    fn result(values: &[Option<f64>]) -> SweepResult {
        SweepResult {
            name: "demo".into(),
            variable: SweptVariable::DeltaSnr,
            points: values
                .iter()
                .enumerate()
                .map(|(i, v)| PointSummary {
                    value: 10.0 * i as f64,
                    trials: 5,
                    failures: 0,
                    metrics: vec![(
                        Metric::RmseD,
                        Estimate {
                            value: *v,
                            std_error: Some(0.1),
                            count: 5,
                        },
                    )],
                })
                .collect(),
            records: vec![],
        }
    }

    #[test]
    fn one_marker_per_defined_point() {
        let svg = metric_svg(&result(&[Some(1.0), None, Some(0.5)]), Metric::RmseD);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("delta_snr"));
    }

    #[test]
    fn empty_metric_still_renders() {
        let svg = metric_svg(&result(&[None]), Metric::RmseD);
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(!svg.contains("NaN"));
    }
}
