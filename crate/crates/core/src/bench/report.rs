//! Versioned JSON reports, per-frame result files and CSV plot tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracker::Rect;

use super::metrics::{success_threshold, EvalCurves, PRECISION_POINTS, SUCCESS_POINTS};
use super::ope::SequenceResult;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub name: String,
    pub frames: usize,
    pub forward_passes: usize,
    pub forward_pass_ratio: f64,
    pub fps_with_io: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<EvalCurves>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Sequences that contributed to the mean curves.
    pub sequences: usize,
    pub failures: usize,
    pub curves: EvalCurves,
    pub fps_with_io: f64,
    pub forward_pass_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub sequences: Vec<SequenceReport>,
    pub aggregate: Aggregate,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl Report {
    /// Scores each result against its ground truth. `ground_truth[i]`
    /// belongs to `results[i]`.
    pub fn build(results: &[SequenceResult], ground_truth: &[Vec<Rect>]) -> Result<Self> {
        if results.len() != ground_truth.len() {
            return Err(Error::Data(format!(
                "{} results for {} ground-truth sequences",
                results.len(),
                ground_truth.len()
            )));
        }
        let mut sequences = Vec::with_capacity(results.len());
        for (r, gt) in results.iter().zip(ground_truth) {
            let curves = match r.failure {
                Some(_) => None,
                None => Some(EvalCurves::compute(&r.rects, gt, r.fps).map_err(|e| match e {
                    Error::Data(m) => Error::Data(format!("{}: {m}", r.name)),
                    other => other,
                })?),
            };
            sequences.push(SequenceReport {
                name: r.name.clone(),
                frames: r.frames,
                forward_passes: r.forward_passes,
                forward_pass_ratio: r.forward_pass_ratio(),
                fps_with_io: r.fps_with_io,
                curves,
                failure: r.failure.clone(),
            });
        }
        Self::from_sequences(sequences)
    }

    pub fn from_sequences(sequences: Vec<SequenceReport>) -> Result<Self> {
        let ok: Vec<&SequenceReport> = sequences.iter().filter(|s| s.curves.is_some()).collect();
        let curves: Vec<EvalCurves> = ok.iter().filter_map(|s| s.curves.clone()).collect();
        let mean_curves = EvalCurves::mean(&curves)
            .ok_or_else(|| Error::Data("no sequence was tracked successfully".into()))?;
        let aggregate = Aggregate {
            sequences: ok.len(),
            failures: sequences.len() - ok.len(),
            curves: mean_curves,
            fps_with_io: mean(ok.iter().map(|s| s.fps_with_io)),
            forward_pass_ratio: mean(ok.iter().map(|s| s.forward_pass_ratio)),
        };
        Ok(Report {
            schema_version: SCHEMA_VERSION,
            sequences,
            aggregate,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let report: Report = read_json(path)?;
        check_version(path, report.schema_version)?;
        Ok(report)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn check_version(path: &Path, found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::Data(format!(
            "{}: schema version {found}, expected {SCHEMA_VERSION}",
            path.display()
        )));
    }
    Ok(())
}

/// Writes `<prefix>_precision.csv` and `<prefix>_success.csv` into `dir`.
pub fn emit_plot_data(curves: &EvalCurves, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut precision = String::from("threshold,value\n");
    for (t, v) in curves.precision.iter().enumerate().take(PRECISION_POINTS) {
        writeln!(precision, "{t},{v}").expect("writing to a String");
    }
    let mut success = String::from("threshold,value\n");
    for (k, v) in curves.success.iter().enumerate().take(SUCCESS_POINTS) {
        writeln!(success, "{:.2},{v}", success_threshold(k)).expect("writing to a String");
    }
    let mut written = Vec::new();
    for (kind, body) in [("precision", precision), ("success", success)] {
        let path = dir.join(format!("{prefix}_{kind}.csv"));
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Per-frame boxes of one run, `[x, y, w, h]`, 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub name: String,
    pub rects: Vec<[f64; 4]>,
    pub fps: f64,
    pub fps_with_io: f64,
    pub frames: usize,
    pub forward_passes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub sequences: Vec<ResultEntry>,
}

impl ResultsFile {
    pub fn from_results(results: &[SequenceResult]) -> Self {
        ResultsFile {
            schema_version: SCHEMA_VERSION,
            sequences: results
                .iter()
                .map(|r| ResultEntry {
                    name: r.name.clone(),
                    rects: r.rects.iter().map(|b| [b.x, b.y, b.w, b.h]).collect(),
                    fps: r.fps,
                    fps_with_io: r.fps_with_io,
                    frames: r.frames,
                    forward_passes: r.forward_passes,
                    failure: r.failure.clone(),
                })
                .collect(),
        }
    }

    pub fn to_results(&self) -> Vec<SequenceResult> {
        self.sequences
            .iter()
            .map(|e| SequenceResult {
                name: e.name.clone(),
                rects: e.rects.iter().map(|&[x, y, w, h]| Rect::new(x, y, w, h)).collect(),
                fps: e.fps,
                fps_with_io: e.fps_with_io,
                frames: e.frames,
                forward_passes: e.forward_passes,
                single_forward_frames: 0,
                failure: e.failure.clone(),
            })
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: ResultsFile = read_json(path)?;
        check_version(path, file.schema_version)?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(name: &str, rects: Vec<Rect>) -> SequenceResult {
        SequenceResult {
            name: name.into(),
            frames: rects.len(),
            forward_passes: rects.len() + 1,
            single_forward_frames: rects.len() - 2,
            rects,
            fps: 12.5,
            fps_with_io: 10.0,
            failure: None,
        }
    }

    fn gt() -> Vec<Rect> {
        (0..4).map(|i| Rect::new(10.0 * i as f64, 5.0, 20.0, 20.0)).collect()
    }

    #[test]
    fn perfect_sequence_aggregate() {
        let r = Report::build(&[result("a", gt())], &[gt()]).unwrap();
        assert_eq!(r.aggregate.curves.auc, 1.0);
        assert_eq!(r.aggregate.forward_pass_ratio, 5.0 / 4.0);
    }

    #[test]
    fn aggregate_is_unweighted_mean() {
        let off: Vec<Rect> = gt().iter().map(|b| Rect::new(b.x + 25.0, b.y, b.w, b.h)).collect();
        let r = Report::build(&[result("a", gt()), result("b", off)], &[gt(), gt()]).unwrap();
        let a = r.sequences[0].curves.as_ref().unwrap();
        let b = r.sequences[1].curves.as_ref().unwrap();
        for i in 0..PRECISION_POINTS {
            assert_eq!(r.aggregate.curves.precision[i], (a.precision[i] + b.precision[i]) / 2.0);
        }
        assert_eq!(r.aggregate.curves.auc, (a.auc + b.auc) / 2.0);
    }

    #[test]
    fn round_trip() {
        let d = tempfile::tempdir().unwrap();
        let off: Vec<Rect> = gt().iter().map(|b| Rect::new(b.x + 3.3, b.y - 1.7, b.w, b.h)).collect();
        let r = Report::build(&[result("a", off)], &[gt()]).unwrap();
        let p = d.path().join("r.json");
        r.write(&p).unwrap();
        assert_eq!(Report::read(&p).unwrap(), r);

        let rf = ResultsFile::from_results(&[result("a", gt())]);
        let p = d.path().join("res.json");
        rf.write(&p).unwrap();
        assert_eq!(ResultsFile::read(&p).unwrap(), rf);
    }

    #[test]
    fn failures_are_kept_but_not_averaged() {
        let mut bad = result("b", gt());
        bad.failure = Some("too small".into());
        let r = Report::build(&[result("a", gt()), bad], &[gt(), gt()]).unwrap();
        assert_eq!((r.aggregate.sequences, r.aggregate.failures), (1, 1));
        assert!(r.sequences[1].curves.is_none());
    }

    #[test]
    fn csv_tables() {
        let d = tempfile::tempdir().unwrap();
        let c = EvalCurves::compute(&gt(), &gt(), 1.0).unwrap();
        let files = emit_plot_data(&c, d.path(), "all").unwrap();
        let p = fs::read_to_string(&files[0]).unwrap();
        let s = fs::read_to_string(&files[1]).unwrap();
        assert_eq!(p.lines().count(), 52);
        assert_eq!(s.lines().nth(1), Some("0.00,1"));
        assert_eq!(s.lines().last(), Some("1.00,1"));
    }
}
