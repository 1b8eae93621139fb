//! Curve artifacts: the per-cell CSV and an SVG plot of mean error against
//! budget.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, ValError};
use crate::strategies::StrategyName;

pub const CSV_HEADER: &str = "strategy,seed,budget,error_rate,queries_used,wall_ms";

/// One (strategy, seed, budget) cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub strategy: StrategyName,
    pub seed: u64,
    pub budget: usize,
    pub error_rate: f64,
    pub queries_used: usize,
    pub wall_ms: f64,
}

impl CurveRow {
    /// Strategy name, then seed, then budget.
    pub fn canonical_cmp(&self, other: &CurveRow) -> Ordering {
        self.strategy
            .as_str()
            .cmp(other.strategy.as_str())
            .then(self.seed.cmp(&other.seed))
            .then(self.budget.cmp(&other.budget))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorCurve {
    pub rows: Vec<CurveRow>,
}

/// Mean error of one strategy at one budget.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPoint {
    pub budget: usize,
    pub mean_error: f64,
    pub seeds: usize,
}

impl ErrorCurve {
    pub fn sort_canonical(&mut self) {
        self.rows.sort_by(CurveRow::canonical_cmp);
    }

    /// Per strategy, the arithmetic mean of `error_rate` over seeds at each
    /// budget, budgets ascending.
    pub fn mean_curve(&self) -> BTreeMap<StrategyName, Vec<MeanPoint>> {
        let mut acc: BTreeMap<StrategyName, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
        let mut rows: Vec<&CurveRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.canonical_cmp(b));
        for r in rows {
            let e = acc.entry(r.strategy).or_default().entry(r.budget).or_insert((0.0, 0));
            e.0 += r.error_rate;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(s, by_budget)| {
                let points = by_budget
                    .into_iter()
                    .map(|(budget, (sum, seeds))| MeanPoint {
                        budget,
                        mean_error: sum / seeds as f64,
                        seeds,
                    })
                    .collect();
                (s, points)
            })
            .collect()
    }
}

fn non_empty(curve: &ErrorCurve) -> Result<()> {
    if curve.rows.is_empty() {
        return Err(ValError::config("cannot emit an empty curve"));
    }
    Ok(())
}

/// CSV text of `curve`, rows in their stored order. Floats use the shortest
/// representation that parses back to the same value.
pub fn curve_to_csv(curve: &ErrorCurve) -> String {
    let mut out = String::with_capacity(64 * (curve.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &curve.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.strategy, r.seed, r.budget, r.error_rate, r.queries_used, r.wall_ms
        );
    }
    out
}

pub fn emit_csv(curve: &ErrorCurve, path: impl AsRef<Path>) -> Result<()> {
    non_empty(curve)?;
    fs::write(path, curve_to_csv(curve))?;
    Ok(())
}

pub fn parse_curve_csv(text: &str) -> Result<ErrorCurve> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(ValError::MalformedInput {
                row: 1,
                message: format!("expected header '{CSV_HEADER}'"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = i + 1;
        let bad = |message: String| ValError::MalformedInput { row, message };
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", cells.len())));
        }
        fn num<T: std::str::FromStr>(cell: &str, row: usize) -> Result<T> {
            cell.parse().map_err(|_| ValError::MalformedInput {
                row,
                message: format!("cannot parse '{cell}'"),
            })
        }
        rows.push(CurveRow {
            strategy: cells[0].parse().map_err(|e: ValError| bad(e.to_string()))?,
            seed: num(cells[1], row)?,
            budget: num(cells[2], row)?,
            error_rate: num(cells[3], row)?,
            queries_used: num(cells[4], row)?,
            wall_ms: num(cells[5], row)?,
        });
    }
    Ok(ErrorCurve { rows })
}

pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<ErrorCurve> {
    parse_curve_csv(&fs::read_to_string(path)?)
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// SVG text: one polyline per strategy of mean error against budget. Each
/// polyline carries the plotted means in a `data-mean-error` attribute.
pub fn curve_to_svg(curve: &ErrorCurve) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 420.0, 70.0, 130.0, 20.0, 60.0);
    let means = curve.mean_curve();
    let budgets: Vec<usize> = means.values().flatten().map(|p| p.budget).collect();
    let bmin = budgets.iter().copied().min().unwrap_or(0) as f64;
    let bmax = budgets.iter().copied().max().unwrap_or(1) as f64;
    let emax = means
        .values()
        .flatten()
        .map(|p| p.mean_error)
        .fold(0.0_f64, f64::max);
    let ymax = if emax > 0.0 { emax * 1.1 } else { 1.0 };
    let sx = |b: f64| {
        let span = if bmax > bmin { bmax - bmin } else { 1.0 };
        left + (b - bmin) / span * (w - left - right)
    };
    let sy = |e: f64| top + (1.0 - e / ymax) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (left, w - right, top, h - bottom);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=4 {
        let e = ymax * i as f64 / 4.0;
        let y = sy(e);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{e:.3}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    let mut ticks = budgets.clone();
    ticks.sort_unstable();
    ticks.dedup();
    for b in ticks {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{b}</text>"#,
            sx(b as f64),
            y1 + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">Number of queries</text>"#,
        (x0 + x1) / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">Error rate</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    for (i, (strategy, points)) in means.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.budget as f64), sy(p.mean_error)))
            .collect();
        let values: Vec<String> = points.iter().map(|p| format!("{}", p.mean_error)).collect();
        let _ = writeln!(
            s,
            r#"<polyline data-strategy="{strategy}" data-mean-error="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            values.join(" "),
            coords.join(" ")
        );
        let ly = top + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{strategy}</text>"#,
            x1 + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_svg(curve: &ErrorCurve, path: impl AsRef<Path>) -> Result<()> {
    non_empty(curve)?;
    fs::write(path, curve_to_svg(curve))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: StrategyName, seed: u64, budget: usize, error_rate: f64) -> CurveRow {
        CurveRow {
            strategy,
            seed,
            budget,
            error_rate,
            queries_used: budget,
            wall_ms: 0.0,
        }
    }

    fn two_strategy_curve() -> ErrorCurve {
        let mut rows = Vec::new();
        for seed in 0..3 {
            for (j, b) in [3, 5, 10].into_iter().enumerate() {
                let e = 0.1 / (1.0 + seed as f64) + 0.01 * j as f64 + 1.0 / 3.0;
                rows.push(row(StrategyName::Val, seed, b, e / 2.0));
                rows.push(row(StrategyName::Random, seed, b, e));
            }
        }
        ErrorCurve { rows }
    }

    #[test]
    fn one_row_gives_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        emit_csv(&ErrorCurve { rows: vec![row(StrategyName::Ted, 0, 5, 0.25)] }, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().collect::<Vec<_>>(), [CSV_HEADER, "ted,0,5,0.25,5,0"]);
    }

    #[test]
    fn empty_curve_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_csv(&ErrorCurve::default(), dir.path().join("c.csv")).is_err());
        assert!(emit_svg(&ErrorCurve::default(), dir.path().join("c.svg")).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut curve = two_strategy_curve();
        curve.rows[0].wall_ms = 12.345678;
        curve.rows[1].error_rate = f64::MIN_POSITIVE;
        curve.rows[2].seed = u64::MAX;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        emit_csv(&curve, &path).unwrap();
        assert_eq!(read_curve_csv(&path).unwrap(), curve);
    }

    #[test]
    fn malformed_csv_reports_row() {
        let text = format!("{CSV_HEADER}\nval,0,3,0.1,3,0\nval,0,x,0.1,3,0\n");
        match parse_curve_csv(&text) {
            Err(ValError::MalformedInput { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_curve_csv("a,b\n").is_err());
    }

    #[test]
    fn sort_is_by_name_seed_budget() {
        let mut c = ErrorCurve {
            rows: vec![
                row(StrategyName::Val, 0, 3, 0.0),
                row(StrategyName::Random, 1, 3, 0.0),
                row(StrategyName::Random, 0, 5, 0.0),
                row(StrategyName::Margin, 2, 3, 0.0),
                row(StrategyName::Random, 0, 3, 0.0),
            ],
        };
        c.sort_canonical();
        let keys: Vec<_> = c.rows.iter().map(|r| (r.strategy.as_str(), r.seed, r.budget)).collect();
        assert_eq!(
            keys,
            [("margin", 2, 3), ("random", 0, 3), ("random", 0, 5), ("random", 1, 3), ("val", 0, 3)]
        );
    }

    #[test]
    fn svg_has_one_polyline_per_strategy_and_axis_labels() {
        let svg = curve_to_svg(&two_strategy_curve());
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">Number of queries</text>"));
        assert!(svg.contains(">Error rate</text>"));
    }

    #[test]
    fn svg_means_match_csv_rows() {
        let curve = two_strategy_curve();
        let reloaded = parse_curve_csv(&curve_to_csv(&curve)).unwrap();
        let svg = curve_to_svg(&curve);
        for strategy in [StrategyName::Random, StrategyName::Val] {
            let tag = format!(r#"data-strategy="{strategy}" data-mean-error=""#);
            let start = svg.find(&tag).unwrap() + tag.len();
            let plotted: Vec<f64> = svg[start..]
                .split('"')
                .next()
                .unwrap()
                .split(' ')
                .map(|v| v.parse().unwrap())
                .collect();
            let expected: Vec<f64> = [3, 5, 10]
                .iter()
                .map(|&b| {
                    let errs: Vec<f64> = reloaded
                        .rows
                        .iter()
                        .filter(|r| r.strategy == strategy && r.budget == b)
                        .map(|r| r.error_rate)
                        .collect();
                    errs.iter().sum::<f64>() / errs.len() as f64
                })
                .collect();
            assert_eq!(plotted.len(), 3);
            for (p, e) in plotted.iter().zip(&expected) {
                assert!((p - e).abs() <= 1e-15 * e.abs().max(1.0), "{p} vs {e}");
            }
        }
    }
}
