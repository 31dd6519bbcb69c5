//! Sweep table parsing and a hand-emitted SVG of metric-vs-budget
//! curves. No plotting dependency: the bytes are a pure function of
//! the rows, which makes determinism checks a plain file compare.

use std::fmt::Write as _;

use crate::error::{Error, FormatError, Result};

pub const SWEEP_CSV_HEADER: &str = "method,nfe,dtw,wasserstein,mmd2,spec_sim,wall_ms";

/// One sweep point: a method evaluated at one sampling budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub nfe: usize,
    pub dtw: f64,
    pub wasserstein: f64,
    pub mmd2: f64,
    pub spec_sim: f64,
    pub wall_ms: u64,
}

impl SweepRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.method, self.nfe, self.dtw, self.wasserstein, self.mmd2, self.spec_sim,
            self.wall_ms
        )
    }
}

fn csv_err(line: usize, msg: impl Into<String>) -> Error {
    FormatError::Csv {
        line,
        msg: msg.into(),
    }
    .into()
}

/// Parse a sweep table. Errors carry 1-based line numbers; the header
/// must match [`SWEEP_CSV_HEADER`] exactly.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_err(1, "empty file, expected a header"))?;
    if header.trim_end() != SWEEP_CSV_HEADER {
        return Err(csv_err(
            1,
            format!("bad header {header:?}, expected {SWEEP_CSV_HEADER:?}"),
        ));
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 7 {
            return Err(csv_err(
                line,
                format!("expected 7 fields, found {}", fields.len()),
            ));
        }
        let method = fields[0].trim();
        if method.is_empty() {
            return Err(csv_err(line, "empty method name"));
        }
        let nfe: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| csv_err(line, format!("bad nfe {:?}: {e}", fields[1])))?;
        let mut vals = [0.0f64; 4];
        for (slot, (name, field)) in vals.iter_mut().zip(
            ["dtw", "wasserstein", "mmd2", "spec_sim"]
                .iter()
                .zip(&fields[2..6]),
        ) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| csv_err(line, format!("bad {name} {field:?}: {e}")))?;
            if !v.is_finite() {
                return Err(csv_err(line, format!("non-finite {name}")));
            }
            *slot = v;
        }
        let wall_ms: u64 = fields[6]
            .trim()
            .parse()
            .map_err(|e| csv_err(line, format!("bad wall_ms {:?}: {e}", fields[6])))?;
        rows.push(SweepRow {
            method: method.to_string(),
            nfe,
            dtw: vals[0],
            wasserstein: vals[1],
            mmd2: vals[2],
            spec_sim: vals[3],
            wall_ms,
        });
    }
    if rows.is_empty() {
        return Err(csv_err(1, "no data rows"));
    }
    Ok(rows)
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

const CANVAS_W: f64 = 1000.0;
const CANVAS_H: f64 = 760.0;
const CELL_W: f64 = 500.0;
const CELL_H: f64 = 350.0;
const TOP: f64 = 46.0;
// Plot rectangle inside each cell.
const PAD_L: f64 = 78.0;
const PAD_R: f64 = 24.0;
const PAD_T: f64 = 34.0;
const PAD_B: f64 = 46.0;

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.1}")
    } else if a >= 0.01 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

struct Panel {
    title: &'static str,
    pick: fn(&SweepRow) -> f64,
}

const PANELS: [Panel; 4] = [
    Panel {
        title: "DTW",
        pick: |r| r.dtw,
    },
    Panel {
        title: "Wasserstein",
        pick: |r| r.wasserstein,
    },
    Panel {
        title: "MMD^2",
        pick: |r| r.mmd2,
    },
    Panel {
        title: "Spectral similarity",
        pick: |r| r.spec_sim,
    },
];

/// Render the four-panel metric-vs-NFE figure: log-scaled budget axis,
/// one polyline per method per panel, shared legend. Byte-identical
/// for identical rows (`wall_ms` is not drawn).
pub fn render_sweep_plot(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::contract("sweep plot needs at least one row"));
    }

    // Methods in first-appearance order, points per method sorted by
    // budget.
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.iter().any(|m| *m == r.method) {
            methods.push(&r.method);
        }
    }
    let series: Vec<(usize, Vec<&SweepRow>)> = methods
        .iter()
        .map(|m| {
            let mut pts: Vec<&SweepRow> = rows.iter().filter(|r| &r.method == m).collect();
            pts.sort_by_key(|r| r.nfe);
            (0, pts)
        })
        .enumerate()
        .map(|(i, (_, pts))| (i, pts))
        .collect();

    let log_x: Vec<f64> = rows.iter().map(|r| (r.nfe as f64).ln()).collect();
    let (lx_min, lx_max) = log_x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let x_of = move |nfe: usize, px0: f64, px1: f64| -> f64 {
        if lx_max > lx_min {
            px0 + ((nfe as f64).ln() - lx_min) / (lx_max - lx_min) * (px1 - px0)
        } else {
            0.5 * (px0 + px1)
        }
    };
    let mut nfes: Vec<usize> = rows.iter().map(|r| r.nfe).collect();
    nfes.sort_unstable();
    nfes.dedup();

    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" \
         viewBox=\"0 0 {CANVAS_W} {CANVAS_H}\" font-family=\"sans-serif\">\n\
         <rect width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" fill=\"white\"/>\n"
    );

    // Shared legend across the top.
    let mut lx = 78.0;
    for (i, m) in methods.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = write!(
            s,
            "<line x1=\"{lx:.2}\" y1=\"24\" x2=\"{:.2}\" y2=\"24\" stroke=\"{color}\" \
             stroke-width=\"2.5\"/>\n\
             <text x=\"{:.2}\" y=\"28\" font-size=\"15\">{m}</text>\n",
            lx + 30.0,
            lx + 38.0,
        );
        lx += 38.0 + 12.0 * m.len() as f64 + 30.0;
    }

    for (pi, panel) in PANELS.iter().enumerate() {
        let cell_x = (pi % 2) as f64 * CELL_W;
        let cell_y = TOP + (pi / 2) as f64 * CELL_H;
        let px0 = cell_x + PAD_L;
        let px1 = cell_x + CELL_W - PAD_R;
        let py0 = cell_y + PAD_T;
        let py1 = cell_y + CELL_H - PAD_B;

        let y_max = rows
            .iter()
            .map(|r| (panel.pick)(r))
            .fold(f64::NEG_INFINITY, f64::max);
        let y_hi = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
        let y_of = |v: f64| py1 - (v / y_hi) * (py1 - py0);

        let _ = write!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"16\" text-anchor=\"middle\" \
             font-weight=\"bold\">{}</text>\n",
            0.5 * (px0 + px1),
            py0 - 12.0,
            panel.title
        );
        // Axes.
        let _ = write!(
            s,
            "<line x1=\"{px0:.2}\" y1=\"{py1:.2}\" x2=\"{px1:.2}\" y2=\"{py1:.2}\" \
             stroke=\"black\"/>\n\
             <line x1=\"{px0:.2}\" y1=\"{py0:.2}\" x2=\"{px0:.2}\" y2=\"{py1:.2}\" \
             stroke=\"black\"/>\n"
        );
        // Budget ticks at the actual sweep values (log placement).
        for &nfe in &nfes {
            let x = x_of(nfe, px0, px1);
            let _ = write!(
                s,
                "<line x1=\"{x:.2}\" y1=\"{py1:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
                 stroke=\"black\"/>\n\
                 <text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"12\" \
                 text-anchor=\"middle\">{nfe}</text>\n",
                py1 + 5.0,
                py1 + 19.0,
            );
        }
        let _ = write!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">\
             NFE (log scale)</text>\n",
            0.5 * (px0 + px1),
            py1 + 38.0,
        );
        // Value ticks.
        for k in 0..=4 {
            let v = y_hi * k as f64 / 4.0;
            let y = y_of(v);
            let _ = write!(
                s,
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{px0:.2}\" y2=\"{y:.2}\" \
                 stroke=\"black\"/>\n\
                 <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
                px0 - 5.0,
                px0 - 8.0,
                y + 4.0,
                fmt_tick(v),
            );
        }
        // One line per method.
        for (mi, pts) in &series {
            let color = PALETTE[mi % PALETTE.len()];
            let coords: Vec<String> = pts
                .iter()
                .map(|r| {
                    format!(
                        "{:.2},{:.2}",
                        x_of(r.nfe, px0, px1),
                        y_of((panel.pick)(r))
                    )
                })
                .collect();
            let _ = write!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                 stroke-width=\"2\"/>\n",
                coords.join(" ")
            );
            for c in &coords {
                let (x, y) = c.split_once(',').expect("coord pair");
                let _ = write!(
                    s,
                    "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"{color}\"/>\n"
                );
            }
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
