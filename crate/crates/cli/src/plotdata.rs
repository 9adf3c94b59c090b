//! Plot-ready data derived from a finished run directory.
//!
//! Every output file under `plot/` is plain whitespace-delimited columns
//! without a header, one row per point:
//!
//! - `reward_<tag>.dat`: `episode mean_return` for every training trace
//! - `scatter_a<alpha>.dat`: `x y` terminal positions of all repeats
//! - `path_<tag>.dat` and `demand_path.dat`: `x y` per time index
//! - `intra_<tag>.dat`: `k learned tracer` step rewards
//! - `exploitability.dat`, `scaling.dat` for the oracle runs

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::run::Summary;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("missing artifact {}", .0.display())]
    Missing(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: malformed row", path.display())]
    Malformed { path: PathBuf, line: usize },
}

fn read(path: &Path) -> Result<String, PlotError> {
    fs::read_to_string(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => PlotError::Missing(path.to_path_buf()),
        _ => PlotError::Io { path: path.to_path_buf(), source },
    })
}

/// Selected columns of a headed CSV file, space separated.
fn columns(path: &Path, cols: &[usize]) -> Result<String, PlotError> {
    let text = read(path)?;
    let mut out = String::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let row = cols
            .iter()
            .map(|&c| fields.get(c).map(|f| f.trim()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| PlotError::Malformed { path: path.to_path_buf(), line: i + 1 })?;
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Sorted file names in `dir` of the form `<prefix><tag>.csv`, as tags.
fn tags(dir: &Path, prefix: &str) -> Result<Vec<String>, PlotError> {
    let entries = fs::read_dir(dir).map_err(|source| PlotError::Io { path: dir.to_path_buf(), source })?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| PlotError::Io { path: dir.to_path_buf(), source })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(tag) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(".csv")) {
            found.push(tag.to_string());
        }
    }
    found.sort();
    Ok(found)
}

struct PlotDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl PlotDir {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), PlotError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| PlotError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }
}

/// Writes the plot-data files for the run in `run_dir` and returns their
/// paths.
pub fn emit_plotdata(run_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let summary = Summary::parse(&read(&run_dir.join("summary"))?);
    let experiment = summary.get("experiment").ok_or_else(|| PlotError::Missing(run_dir.join("summary")))?.to_string();
    let plot = run_dir.join("plot");
    fs::create_dir_all(&plot).map_err(|source| PlotError::Io { path: plot.clone(), source })?;
    let mut out = PlotDir { dir: plot, written: Vec::new() };

    for tag in tags(run_dir, "trace_")? {
        out.write(&format!("reward_{tag}.dat"), &columns(&run_dir.join(format!("trace_{tag}.csv")), &[0, 1])?)?;
    }
    match experiment.as_str() {
        "congestion" | "congestion-bimodal" => {
            let alphas = summary.get("alphas").ok_or_else(|| PlotError::Missing(run_dir.join("summary")))?;
            let terminals = tags(run_dir, "terminal_")?;
            for alpha in alphas.split(',') {
                let prefix = format!("a{alpha}_r");
                let mut data = String::new();
                for tag in terminals.iter().filter(|t| t.strip_prefix(&prefix).is_some_and(|r| r.parse::<usize>().is_ok())) {
                    data.push_str(&columns(&run_dir.join(format!("terminal_{tag}.csv")), &[0, 1])?);
                }
                if data.is_empty() {
                    return Err(PlotError::Missing(run_dir.join(format!("terminal_{prefix}0.csv"))));
                }
                out.write(&format!("scatter_a{alpha}.dat"), &data)?;
            }
        }
        "demand" => {
            out.write("demand_path.dat", &columns(&run_dir.join("demand_path.csv"), &[1, 2])?)?;
            for tag in tags(run_dir, "meanpath_")? {
                out.write(&format!("path_{tag}.dat"), &columns(&run_dir.join(format!("meanpath_{tag}.csv")), &[1, 2])?)?;
            }
            for tag in tags(run_dir, "steps_")? {
                out.write(&format!("intra_{tag}.dat"), &columns(&run_dir.join(format!("steps_{tag}.csv")), &[0, 1, 2])?)?;
            }
        }
        "lqr" => {
            let mut data = String::new();
            for tag in tags(run_dir, "eval_terminal_")? {
                data.push_str(&columns(&run_dir.join(format!("eval_terminal_{tag}.csv")), &[0, 1])?);
            }
            out.write("scatter.dat", &data)?;
            for tag in tags(run_dir, "meanpath_")? {
                out.write(&format!("path_{tag}.dat"), &columns(&run_dir.join(format!("meanpath_{tag}.csv")), &[1, 2])?)?;
            }
        }
        "oracle-fp" => out.write("exploitability.dat", &columns(&run_dir.join("exploitability.csv"), &[0, 1])?)?,
        "oracle-scaling" => out.write("scaling.dat", &columns(&run_dir.join("scaling.csv"), &[0, 2, 3])?)?,
        _ => {}
    }
    Ok(out.written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_summary_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_plotdata(dir.path()), Err(PlotError::Missing(_))));
    }

    #[test]
    fn columns_select_and_reorder() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "a,b,c\n1,2,3\n4,5,6\n").unwrap();
        assert_eq!(columns(&p, &[2, 0]).unwrap(), "3 1\n6 4\n");
        assert!(matches!(columns(&p, &[5]), Err(PlotError::Malformed { line: 2, .. })));
    }

    #[test]
    fn scatter_needs_terminal_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("summary"), "experiment = congestion\nalphas = 1,2\n").unwrap();
        fs::write(dir.path().join("terminal_a1_r0.csv"), "x,y\n0,0\n").unwrap();
        let err = emit_plotdata(dir.path()).unwrap_err();
        assert!(err.to_string().contains("terminal_a2_r0.csv"), "{err}");
    }

    #[test]
    fn tags_are_sorted_and_filtered() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["trace_b.csv", "trace_a.csv", "trace_c.txt", "other.csv"] {
            fs::write(dir.path().join(f), "").unwrap();
        }
        assert_eq!(tags(dir.path(), "trace_").unwrap(), vec!["a", "b"]);
    }
}
