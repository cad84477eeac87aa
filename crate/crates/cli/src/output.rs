//! Result tables and their CSV, JSON and gnuplot renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::OutputFormat;
use crate::CliError;

pub const METRICS_HEADER: [&str; 10] = [
    "T",
    "policy",
    "c_f",
    "c_s",
    "c_f_norm",
    "c_s_norm",
    "reads",
    "writes",
    "stale_misses",
    "cold_misses",
];

pub const MODEL_HEADER: [&str; 4] = ["model_c_f", "model_c_s", "model_c_f_norm", "model_c_s_norm"];

pub const SKETCH_HEADER: [&str; 6] = ["estimator", "keys", "events", "agreement", "bytes", "ns_per_record"];

/// A count observed in simulation or expected under the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Count {
    Observed(u64),
    Expected(f64),
}

impl Count {
    fn cell(&self) -> String {
        match self {
            Count::Observed(n) => n.to_string(),
            Count::Expected(x) => num(*x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelColumns {
    pub model_c_f: f64,
    pub model_c_s: f64,
    pub model_c_f_norm: Option<f64>,
    pub model_c_s_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub policy: String,
    pub c_f: f64,
    pub c_s: f64,
    pub c_f_norm: Option<f64>,
    pub c_s_norm: Option<f64>,
    pub reads: Count,
    pub writes: Count,
    pub stale_misses: Count,
    pub cold_misses: Option<Count>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelColumns>,
}

impl MetricsRow {
    fn cells(&self, with_model: bool) -> Vec<String> {
        let mut out = vec![
            num(self.t),
            self.policy.clone(),
            num(self.c_f),
            num(self.c_s),
            opt(self.c_f_norm),
            opt(self.c_s_norm),
            self.reads.cell(),
            self.writes.cell(),
            self.stale_misses.cell(),
            self.cold_misses.map(|c| c.cell()).unwrap_or_default(),
        ];
        if with_model {
            match &self.model {
                Some(m) => out.extend([
                    num(m.model_c_f),
                    num(m.model_c_s),
                    opt(m.model_c_f_norm),
                    opt(m.model_c_s_norm),
                ]),
                None => out.extend(std::iter::repeat_n(String::new(), MODEL_HEADER.len())),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SketchRow {
    pub estimator: String,
    pub keys: u64,
    pub events: u64,
    pub agreement: f64,
    pub bytes: u64,
    pub ns_per_record: Option<f64>,
}

impl SketchRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.estimator.clone(),
            self.keys.to_string(),
            self.events.to_string(),
            num(self.agreement),
            self.bytes.to_string(),
            opt(self.ns_per_record),
        ]
    }
}

/// Shortest round-trip form, so repeated runs print identical bytes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(runtime)?;
    for row in rows {
        w.write_record(&row).map_err(runtime)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(runtime)
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

/// Write `rows` as `<stem>.csv`, `<stem>.json` or `<stem>.dat` + `<stem>.gp`.
pub fn write_metrics(
    dir: &Path,
    stem: &str,
    format: OutputFormat,
    rows: &[MetricsRow],
) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(dir)?;
    let with_model = rows.iter().any(|r| r.model.is_some());
    match format {
        OutputFormat::Csv => {
            let mut header: Vec<&str> = METRICS_HEADER.to_vec();
            if with_model {
                header.extend(MODEL_HEADER);
            }
            let text = csv_text(&header, rows.iter().map(|r| r.cells(with_model)))?;
            Ok(vec![write_file(&dir.join(format!("{stem}.csv")), &text)?])
        }
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(rows).map_err(runtime)? + "\n";
            Ok(vec![write_file(&dir.join(format!("{stem}.json")), &text)?])
        }
        OutputFormat::Gnuplot => {
            let (dat, gp) = gnuplot_metrics(stem, rows, with_model);
            Ok(vec![
                write_file(&dir.join(format!("{stem}.dat")), &dat)?,
                write_file(&dir.join(format!("{stem}.gp")), &gp)?,
            ])
        }
    }
}

pub fn write_sketch(
    dir: &Path,
    stem: &str,
    format: OutputFormat,
    rows: &[SketchRow],
) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(dir)?;
    match format {
        OutputFormat::Csv => {
            let text = csv_text(&SKETCH_HEADER, rows.iter().map(SketchRow::cells))?;
            Ok(vec![write_file(&dir.join(format!("{stem}.csv")), &text)?])
        }
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(rows).map_err(runtime)? + "\n";
            Ok(vec![write_file(&dir.join(format!("{stem}.json")), &text)?])
        }
        OutputFormat::Gnuplot => {
            let mut dat = format!("# {}\n", SKETCH_HEADER.join(" "));
            for (i, r) in rows.iter().enumerate() {
                let cells: Vec<String> = r
                    .cells()
                    .into_iter()
                    .map(|c| if c.is_empty() { "NaN".into() } else { c })
                    .collect();
                let _ = writeln!(dat, "{i} {}", cells.join(" "));
            }
            let gp = format!(
                "set terminal pngcairo size 1200,400\n\
                 set output '{stem}.png'\n\
                 set multiplot layout 1,2\n\
                 set style fill solid 0.6\n\
                 set boxwidth 0.6\n\
                 set xtics rotate by -30\n\
                 set title 'decision agreement'\n\
                 set yrange [0:1.05]\n\
                 plot '{stem}.dat' using 1:5:xtic(2) with boxes notitle\n\
                 set title 'footprint (bytes)'\n\
                 set autoscale y\n\
                 set logscale y\n\
                 plot '{stem}.dat' using 1:6:xtic(2) with boxes notitle\n\
                 unset multiplot\n"
            );
            Ok(vec![
                write_file(&dir.join(format!("{stem}.dat")), &dat)?,
                write_file(&dir.join(format!("{stem}.gp")), &gp)?,
            ])
        }
    }
}

// One data block per policy, in first-seen order, so `index i` selects a policy.
fn gnuplot_metrics(stem: &str, rows: &[MetricsRow], with_model: bool) -> (String, String) {
    let mut policies: Vec<&str> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    let mut header: Vec<&str> = METRICS_HEADER.iter().copied().filter(|h| *h != "policy").collect();
    if with_model {
        header.extend(MODEL_HEADER);
    }
    let mut dat = String::new();
    for (i, policy) in policies.iter().enumerate() {
        if i > 0 {
            dat.push_str("\n\n");
        }
        let _ = writeln!(dat, "# policy {policy}");
        let _ = writeln!(dat, "# {}", header.join(" "));
        for r in rows.iter().filter(|r| r.policy == *policy) {
            let cells: Vec<String> = r
                .cells(with_model)
                .into_iter()
                .enumerate()
                .filter(|(j, _)| *j != 1)
                .map(|(_, c)| if c.is_empty() { "NaN".into() } else { c })
                .collect();
            let _ = writeln!(dat, "{}", cells.join(" "));
        }
    }

    let mut gp = format!(
        "set terminal pngcairo size 1200,450\n\
         set output '{stem}.png'\n\
         set multiplot layout 1,2\n\
         set logscale x\n\
         set xlabel 'staleness bound T (s)'\n\
         set key top left\n"
    );
    for (title, col, model_col) in [("C_F'", 4, 12), ("C_S'", 5, 13)] {
        let _ = writeln!(gp, "set title \"{title}\"");
        let mut plots = Vec::new();
        for (i, policy) in policies.iter().enumerate() {
            plots.push(format!(
                "'{stem}.dat' index {i} using 1:{col} with linespoints title '{policy}'"
            ));
            if with_model {
                plots.push(format!(
                    "'{stem}.dat' index {i} using 1:{model_col} with lines dashtype 2 title '{policy} (model)'"
                ));
            }
        }
        let _ = writeln!(gp, "plot {}", plots.join(", \\\n     "));
    }
    gp.push_str("unset multiplot\n");
    (dat, gp)
}

/// Policy names carry `:`, `,` and `=`; keep file names portable.
pub fn file_token(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
