//! CSV and JSON input/output for series, reports and plot data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::Report;
use crate::series::MultiChannelSeries;
use crate::spectral::PeriodogramTensor;

fn parse_error(path: &Path, message: String) -> Error {
    Error::Parse { path: path.display().to_string(), message }
}

/// Reads a header-plus-rows CSV, one column per channel. Rows are numbered
/// from 1 for the first data row.
pub fn read_csv(path: &Path, sampling_rate: f64) -> Result<MultiChannelSeries> {
    let file = File::open(path).map_err(|e| parse_error(path, e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if names.iter().all(|n| n.is_empty()) {
        return Err(parse_error(path, "empty file or missing header".into()));
    }
    if names.len() < 2 {
        return Err(parse_error(path, format!("need at least 2 channels, found {}", names.len())));
    }
    let mut values = vec![Vec::new(); names.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_error(path, format!("row {row}: {e}")))?;
        if record.len() != names.len() {
            return Err(parse_error(
                path,
                format!("row {row} has {} fields, expected {}", record.len(), names.len()),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_error(path, format!("row {row}, column {} ({}): bad value {cell:?}", j + 1, names[j])))?;
            values[j].push(v);
        }
    }
    if values[0].is_empty() {
        return Err(parse_error(path, "no data rows".into()));
    }
    MultiChannelSeries::new(values, sampling_rate, names)
}

pub fn write_series_csv(path: &Path, series: &MultiChannelSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", series.channel_names().join(","))?;
    let mut line = String::new();
    for t in 0..series.n_samples() {
        line.clear();
        for j in 0..series.n_channels() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&series.channel(j)[t].to_string());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e.to_string()))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_error(path, e.to_string()))?;
    w.write_record(header).map_err(|e| parse_error(path, e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| parse_error(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels_csv(path: &Path, labels: &[u8]) -> Result<()> {
    write_rows(path, &["block", "phase"], labels.iter().enumerate().map(|(b, d)| vec![b.to_string(), d.to_string()]))
}

/// Long-format band energies: block, channel, band, energy.
pub fn write_periodogram_csv(path: &Path, tensor: &PeriodogramTensor, channel_names: &[String]) -> Result<()> {
    let mut rows = vec![];
    for b in 0..tensor.n_blocks() {
        for (j, name) in channel_names.iter().enumerate() {
            for (l, band) in tensor.bands.iter().enumerate() {
                rows.push(vec![b.to_string(), name.clone(), band.name.clone(), tensor.get(b, j, l).to_string()]);
            }
        }
    }
    write_rows(path, &["block", "channel", "band", "energy"], rows)
}

fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes the QQ, alpha heatmap and Delta significance CSVs and returns
/// the file names written.
pub fn write_plot_data(dir: &Path, report: &Report) -> Result<Vec<String>> {
    let mut written = vec![];
    for qq in &report.qq {
        let name = format!("qq_{}_{}.csv", file_safe(&qq.band), file_safe(&qq.conditioning));
        write_rows(
            &dir.join(&name),
            &["empirical", "simulated"],
            qq.points.iter().map(|p| vec![p.empirical.to_string(), p.simulated.to_string()]),
        )?;
        written.push(name);
    }
    let mut bands: Vec<&str> = vec![];
    for e in &report.estimates {
        if !bands.contains(&e.band.as_str()) {
            bands.push(&e.band);
        }
    }
    for band in bands {
        let rows: Vec<_> = report.estimates.iter().filter(|e| e.band == band).collect();
        let name = format!("alpha_heatmap_{}.csv", file_safe(band));
        write_rows(
            &dir.join(&name),
            &["conditioning", "channel", "alpha0", "alpha1", "delta_star"],
            rows.iter().map(|e| {
                vec![
                    e.conditioning.clone(),
                    e.channel.clone(),
                    e.alpha0.to_string(),
                    e.alpha1.to_string(),
                    e.delta_star.to_string(),
                ]
            }),
        )?;
        written.push(name);
        let name = format!("delta_edges_{}.csv", file_safe(band));
        write_rows(
            &dir.join(&name),
            &["conditioning", "channel", "delta", "lower", "upper", "level", "selected", "sign"],
            rows.iter().filter_map(|e| {
                let iv = e.bootstrap.as_ref()?.delta;
                Some(vec![
                    e.conditioning.clone(),
                    e.channel.clone(),
                    e.delta.to_string(),
                    iv.lower.to_string(),
                    iv.upper.to_string(),
                    iv.level.to_string(),
                    iv.selected.to_string(),
                    iv.sign.to_string(),
                ])
            }),
        )?;
        written.push(name);
    }
    Ok(written)
}

/// `report.json`, `labels.csv` and all plot CSVs into `dir`.
pub fn write_report_bundle(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), report)?;
    write_labels_csv(&dir.join("labels.csv"), &report.labels)?;
    write_plot_data(dir, report)?;
    Ok(())
}
