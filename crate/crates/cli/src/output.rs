//! On-disk artifacts of a run: CSV series, JSON metadata, a gnuplot script.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::CliError;
use crate::run::RunOutput;

pub const SERIES_FILE: &str = "timeseries.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const PLOT_FILE: &str = "plot.gp";

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// 17 significant digits.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn series_csv(out: &RunOutput) -> Vec<u8> {
    let rows = (0..out.n_rows()).map(|r| out.data.iter().map(|col| fmt(col[r])).collect());
    csv_bytes(&out.columns, rows)
}

/// First row: `theta\phi` then the φ axis; each later row: θ then values.
pub fn heatmap_csv(hm: &tcqd::quasiprob::Heatmap) -> Vec<u8> {
    let header: Vec<String> = std::iter::once("theta\\phi".to_string())
        .chain(hm.phis.iter().map(|&p| fmt(p)))
        .collect();
    let rows = hm.thetas.iter().enumerate().map(|(i, &th)| {
        std::iter::once(fmt(th))
            .chain((0..hm.phis.len()).map(|j| fmt(hm.get(i, j))))
            .collect()
    });
    csv_bytes(&header, rows)
}

pub fn metadata(out: &RunOutput) -> serde_json::Value {
    let cfg = &out.config;
    json!({
        "name": cfg.name,
        "generator": { "name": "tcqd", "version": env!("CARGO_PKG_VERSION") },
        "config": cfg,
        "config_toml": cfg.to_toml(),
        "columns": out.columns,
        "rows": out.n_rows(),
        "choices": cfg.choices,
        "conventions": {
            "basis": "spin_1 x ... x spin_N x cavity, excited state first in each spin factor",
            "w_prefactor": "((2j+1)/4pi)^(N/2); the printed prefactor (2j+1)/4pi per spin violates the normalization condition",
            "p_measure": "sin(theta) dtheta dphi",
            "spherical_harmonics": "Condon-Shortley phase",
            "g2_tau": "quantum regression with the same generator; denominator <a^dag a(t)>^2",
            "g2_tau_heisenberg_picture": out.uses_heisenberg_picture,
            "rate_poles": "time-dependent rates saturate smoothly as r / (1 + (r/rate_cap)^4)^(1/4); samples beyond rate_cap are listed under diagnostics",
        },
        "diagnostics": out.diagnostics,
        "elapsed_seconds": out.elapsed_seconds,
    })
}

fn plot_groups(out: &RunOutput) -> Vec<(&'static str, Vec<usize>)> {
    let idx = |pred: &dyn Fn(&str) -> bool| -> Vec<usize> {
        out.columns
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| pred(c))
            .map(|(i, _)| i)
            .collect()
    };
    [
        ("quasiprobabilities", idx(&|c| matches!(c, "W" | "P" | "Q"))),
        ("populations", idx(&|c| c == "n_photon" || c.starts_with("exc_"))),
        ("coherence", idx(&|c| c.starts_with("g2_") || c.starts_with("bunching"))),
        ("mandel_q", idx(&|c| c == "mandel_q")),
    ]
    .into_iter()
    .filter(|(_, cols)| !cols.is_empty())
    .collect()
}

/// A gnuplot script rendering every emitted series group to PNG.
pub fn plot_script(out: &RunOutput) -> String {
    let mut s = String::new();
    s.push_str(&format!("# {} ({} rows)\n", out.config.name, out.n_rows()));
    s.push_str("set datafile separator ','\nset key autotitle columnhead outside right\nset xlabel 't'\nset grid\n");
    s.push_str("set terminal pngcairo size 1000,600\n");
    for (group, cols) in plot_groups(out) {
        s.push_str(&format!(
            "\nset output '{}_{group}.png'\nset title '{}: {group}'\n",
            out.config.name, out.config.name
        ));
        let parts: Vec<String> = cols
            .iter()
            .map(|&c| format!("'{SERIES_FILE}' using 1:{} with lines", c + 1))
            .collect();
        s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    }
    if out.heatmap.is_some() {
        s.push_str(&format!(
            "\nset output '{}_heatmap.png'\nset title '{}: P(theta, phi)'\nset xlabel 'phi'\nset ylabel 'theta'\nunset key\nset view map\n\
             plot '{HEATMAP_FILE}' matrix rowheaders columnheaders with image\n",
            out.config.name, out.config.name
        ));
    }
    s.push_str("\nunset output\n");
    s
}

/// Write every artifact under `dir`; returns the written paths.
pub fn write_run(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<(), CliError> {
        let p = dir.join(name);
        write_atomic(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    put(SERIES_FILE, &series_csv(out))?;
    if let Some(hm) = &out.heatmap {
        put(HEATMAP_FILE, &heatmap_csv(hm))?;
    }
    let meta = serde_json::to_vec_pretty(&metadata(out)).expect("metadata serializes");
    put(METADATA_FILE, &meta)?;
    put(PLOT_FILE, plot_script(out).as_bytes())?;
    Ok(written)
}
