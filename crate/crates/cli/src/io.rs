//! File formats: surface and boundary CSV/JSON, SVG heatmaps, test reports.

use std::fmt::Write as _;
use std::io::{Read, Write};

use paired_equiv_core::{
    DisturbanceReport, McEstimate, Method, PairedCounts, SurfaceGrid, TestResult,
};
use serde::Deserialize;
use serde_json::{json, Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed surface: {0}")]
    Malformed(String),
}

/// 17 significant digits; parses back to the same double.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Run metadata shared by the JSON outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub fields: Map<String, Value>,
}

impl Meta {
    pub fn new(kind: &str, n: u32, alpha: f64, method: Option<Method>) -> Self {
        let mut fields = Map::new();
        fields.insert("tool".into(), json!(env!("CARGO_PKG_NAME")));
        fields.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        fields.insert("kind".into(), json!(kind));
        fields.insert("n".into(), json!(n));
        fields.insert("alpha".into(), json!(alpha));
        if let Some(m) = method {
            fields.insert("method".into(), json!(m.name()));
        }
        Self { fields }
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.fields.insert(key.into(), value);
        self
    }

    pub fn into_value(self) -> Value {
        Value::Object(self.fields)
    }
}

pub fn write_surface_csv<W: Write>(
    out: W,
    grid: &SurfaceGrid,
    mc: Option<&[Option<McEstimate>]>,
) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    if mc.is_some() {
        w.write_record(["axis1", "axis2", "value", "mc_estimate", "mc_stderr"])?;
    } else {
        w.write_record(["axis1", "axis2", "value"])?;
    }
    for (idx, (a, b, v)) in grid.cells().enumerate() {
        let mut record = vec![
            format_value(a),
            format_value(b),
            v.map(format_value).unwrap_or_default(),
        ];
        if let Some(mc) = mc {
            match mc[idx] {
                Some(e) => {
                    record.push(format_value(e.estimate));
                    record.push(format_value(e.stderr));
                }
                None => record.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Axes and values recovered from a surface CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTable {
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl SurfaceTable {
    pub fn matches(&self, grid: &SurfaceGrid) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let opt_bits =
            |v: &[Option<f64>]| v.iter().map(|x| x.map(f64::to_bits)).collect::<Vec<_>>();
        bits(&self.axis1) == bits(&grid.axis1)
            && bits(&self.axis2) == bits(&grid.axis2)
            && opt_bits(&self.values) == opt_bits(&grid.values)
    }
}

#[derive(Deserialize)]
struct SurfaceRow {
    axis1: f64,
    axis2: f64,
    value: Option<f64>,
}

pub fn read_surface_csv<R: Read>(input: R) -> Result<SurfaceTable, FormatError> {
    let mut r = csv::Reader::from_reader(input);
    let mut axis1: Vec<f64> = Vec::new();
    let mut axis2: Vec<f64> = Vec::new();
    let mut values = Vec::new();
    for row in r.deserialize() {
        let row: SurfaceRow = row?;
        if axis1.last() != Some(&row.axis1) {
            axis1.push(row.axis1);
        }
        if axis1.len() == 1 {
            axis2.push(row.axis2);
        }
        values.push(row.value);
    }
    if values.len() != axis1.len() * axis2.len() {
        return Err(FormatError::Malformed(format!(
            "{} cells for a {}x{} grid",
            values.len(),
            axis1.len(),
            axis2.len()
        )));
    }
    Ok(SurfaceTable {
        axis1,
        axis2,
        values,
    })
}

pub fn surface_json(grid: &SurfaceGrid, meta: Meta, mc: Option<&[Option<McEstimate>]>) -> Value {
    let (name1, name2) = grid.kind.axis_names();
    let width = grid.axis2.len();
    let rows: Vec<Value> = grid
        .values
        .chunks(width.max(1))
        .map(|row| Value::Array(row.iter().map(|v| json!(v)).collect()))
        .collect();
    let mut doc = json!({
        "meta": meta.into_value(),
        "axes": {
            "axis1": { "name": name1, "values": grid.axis1 },
            "axis2": { "name": name2, "values": grid.axis2 },
        },
        "values": rows,
    });
    if let Some(mc) = mc {
        let rows: Vec<Value> = mc
            .chunks(width.max(1))
            .map(|row| {
                Value::Array(
                    row.iter()
                        .map(|e| {
                            e.map(|e| json!({ "estimate": e.estimate, "stderr": e.stderr }))
                                .unwrap_or(Value::Null)
                        })
                        .collect(),
                )
            })
            .collect();
        doc["monte_carlo"] = Value::Array(rows);
    }
    doc
}

pub fn read_surface_json(doc: &Value) -> Result<SurfaceTable, FormatError> {
    let floats = |v: &Value| -> Result<Vec<f64>, FormatError> {
        v.as_array()
            .ok_or_else(|| FormatError::Malformed("axis values must be an array".into()))?
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| FormatError::Malformed("non-numeric axis value".into()))
            })
            .collect()
    };
    let axis1 = floats(&doc["axes"]["axis1"]["values"])?;
    let axis2 = floats(&doc["axes"]["axis2"]["values"])?;
    let rows = doc["values"]
        .as_array()
        .ok_or_else(|| FormatError::Malformed("values must be an array".into()))?;
    let mut values = Vec::with_capacity(axis1.len() * axis2.len());
    for row in rows {
        let row = row
            .as_array()
            .ok_or_else(|| FormatError::Malformed("value rows must be arrays".into()))?;
        if row.len() != axis2.len() {
            return Err(FormatError::Malformed("ragged value row".into()));
        }
        values.extend(row.iter().map(Value::as_f64));
    }
    if values.len() != axis1.len() * axis2.len() {
        return Err(FormatError::Malformed(
            "value matrix does not match axes".into(),
        ));
    }
    Ok(SurfaceTable {
        axis1,
        axis2,
        values,
    })
}

pub fn write_boundary_csv<W: Write>(
    out: W,
    boundaries: &[(Method, Vec<(u32, u32)>)],
) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "x10", "x01"])?;
    for (method, points) in boundaries {
        for (a, b) in points {
            w.write_record([method.name().to_string(), a.to_string(), b.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn boundary_json(boundaries: &[(Method, Vec<(u32, u32)>)], meta: Meta) -> Value {
    let mut values = Map::new();
    for (method, points) in boundaries {
        values.insert(method.name().into(), json!(points));
    }
    json!({
        "meta": meta.into_value(),
        "axes": { "axis1": { "name": "x10" }, "axis2": { "name": "x01" } },
        "values": values,
    })
}

fn colour(v: f64) -> String {
    // blue -> yellow -> red
    let v = v.clamp(0.0, 1.0);
    let (r, g, b) = if v < 0.5 {
        let t = v / 0.5;
        (40.0 + t * 215.0, 70.0 + t * 170.0, 200.0 - t * 160.0)
    } else {
        let t = (v - 0.5) / 0.5;
        (255.0, 240.0 - t * 200.0, 40.0)
    };
    format!(
        "rgb({},{},{})",
        r.round() as u8,
        g.round() as u8,
        b.round() as u8
    )
}

/// Heatmap of a surface with a linear colour scale; cells above `level`
/// that touch a cell at or below it are outlined.
pub fn surface_svg(grid: &SurfaceGrid, level: f64) -> String {
    const CELL: usize = 6;
    const MARGIN: usize = 40;
    let (rows, cols) = (grid.axis2.len(), grid.axis1.len());
    let (w, h) = (cols * CELL + 2 * MARGIN, rows * CELL + 2 * MARGIN);
    let (name1, name2) = grid.kind.axis_names();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="12">{} {} n={} alpha={}</text>"#,
        grid.method.name(),
        grid.kind.name(),
        grid.n,
        grid.alpha
    );
    let below = |i: usize, j: usize| grid.get(i, j).is_some_and(|v| v <= level);
    let mut outlines = String::new();
    for i in 0..cols {
        for j in 0..rows {
            let x = MARGIN + i * CELL;
            // axis2 grows upwards
            let y = MARGIN + (rows - 1 - j) * CELL;
            let fill = grid
                .get(i, j)
                .map(colour)
                .unwrap_or_else(|| "rgb(235,235,235)".into());
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"/>"#
            );
            if let Some(v) = grid.get(i, j) {
                let neighbours = [
                    (i.wrapping_sub(1), j),
                    (i + 1, j),
                    (i, j.wrapping_sub(1)),
                    (i, j + 1),
                ];
                let crosses = v > level
                    && neighbours
                        .iter()
                        .any(|&(a, b)| a < cols && b < rows && below(a, b));
                if crosses {
                    let _ = writeln!(
                        outlines,
                        r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="none" stroke="black" stroke-width="1"/>"#
                    );
                }
            }
        }
    }
    s.push_str(&outlines);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{name1}</text>"#,
        w / 2,
        h - 10
    );
    let _ = writeln!(
        s,
        r#"<text x="10" y="{}" font-family="sans-serif" font-size="12">{name2}</text>"#,
        h / 2
    );
    s.push_str("</svg>\n");
    s
}

/// Boundary polylines, one colour per method.
pub fn boundary_svg(n: u32, boundaries: &[(Method, Vec<(u32, u32)>)]) -> String {
    const SIZE: f64 = 500.0;
    const MARGIN: f64 = 30.0;
    let scale = SIZE / f64::from(n.max(1));
    let mut s = String::new();
    let total = SIZE + 2.0 * MARGIN;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(
        s,
        r#"<polygon points="{m},{b} {r},{b} {m},{m}" fill="none" stroke="grey"/>"#,
        m = MARGIN,
        b = MARGIN + SIZE,
        r = MARGIN + SIZE
    );
    for (method, points) in boundaries {
        let (stroke, dash) = match method {
            Method::McNemar => ("red", r#" stroke-dasharray="4,3""#),
            Method::Margin => ("blue", ""),
        };
        let mut path = String::new();
        for (a, b) in points.iter().chain(points.first()) {
            let _ = write!(
                path,
                "{:.2},{:.2} ",
                MARGIN + f64::from(*a) * scale,
                MARGIN + SIZE - f64::from(*b) * scale
            );
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{stroke}"{dash}><title>{}</title></polyline>"#,
            path.trim_end(),
            method.name()
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn test_result_json(c: &PairedCounts, r: &TestResult) -> Value {
    json!({
        "method": r.method.name(),
        "n": c.n,
        "x10": c.x10,
        "x01": c.x01,
        "alpha": r.alpha,
        "statistic": r.statistic,
        "p_value": r.p_value,
        "decision": if r.decision.is_reject() { "reject_H0" } else { "accept_H0" },
        "bounds": r.bounds.map(|(l, u)| json!({ "lower": l, "upper": u })),
        "p_hat": r.p_hat,
    })
}

pub fn disturbance_json(report: &DisturbanceReport) -> Value {
    let rows: Vec<Value> = report
        .outcomes()
        .map(|o| {
            json!({
                "variant": o.variant.label(),
                "mcnemar": test_result_json(&o.counts, &o.mcnemar),
                "margin": test_result_json(&o.counts, &o.margin),
            })
        })
        .collect();
    json!({
        "alpha": report.alpha,
        "variants": rows,
        "recommendation": match report.recommendation {
            paired_equiv_core::Recommendation::AcceptH0 => "accept_H0",
            paired_equiv_core::Recommendation::RejectH0 => "reject_H0",
            paired_equiv_core::Recommendation::IncreaseSample => "increase_sample",
        },
    })
}

/// One row of a table-of-tables input file.
#[derive(Debug, Clone, Deserialize)]
pub struct CountsRow {
    pub n: Option<u32>,
    pub x10: u32,
    pub x01: u32,
    pub x00: Option<u32>,
    pub x11: Option<u32>,
}

pub fn read_counts_csv<R: Read>(input: R) -> Result<Vec<CountsRow>, FormatError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
