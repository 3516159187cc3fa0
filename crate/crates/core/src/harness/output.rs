use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::Summary;
use crate::Result;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// One row per step: `step,mean_cum_regret,sem,policy,env`. The sem cell is empty for one trial.
pub fn write_trace_csv(path: impl AsRef<Path>, summary: &Summary, policy: &str, env: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "mean_cum_regret", "sem", "policy", "env"])?;
    for (i, mean) in summary.mean_cumulative.iter().enumerate() {
        let sem = summary.sem.as_ref().map(|s| s[i].to_string()).unwrap_or_default();
        w.write_record([(i + 1).to_string(), mean.to_string(), sem, policy.to_owned(), env.to_owned()])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn write_summary_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// The `mean_cum_regret` column of a file written by [`write_trace_csv`].
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "mean_cum_regret")
        .ok_or_else(|| crate::Error::Ingest { row: 1, message: "no `mean_cum_regret` column".into() })?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            rec.get(col)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| crate::Error::Ingest { row: i + 2, message: "bad `mean_cum_regret` value".into() })
        })
        .collect()
}

/// Headerless numeric rows, one design point per line.
pub fn read_design_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            rec?.iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| crate::Error::Ingest { row: i + 1, message: e.to_string() })
        })
        .collect()
}
