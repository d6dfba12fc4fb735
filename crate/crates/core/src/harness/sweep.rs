//! Hyperparameter sweeps and cross-configuration comparisons.

use std::fmt;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run, ConfigType, EvalConfig, HarnessError, RunReport};
use crate::corpus::EvalSplit;

/// Maximum gram lengths swept by default.
pub const MAX_N_GRID: [usize; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
/// Embedding sizes swept by default.
pub const DIM_GRID: [usize; 6] = [10, 50, 100, 150, 200, 250];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    MaxN,
    Dim,
    Mode,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::MaxN => "max_n",
            SweepAxis::Dim => "dim",
            SweepAxis::Mode => "mode",
        }
    }

    /// The default grid for this axis.
    pub fn default_values(self) -> Vec<String> {
        match self {
            SweepAxis::MaxN => MAX_N_GRID.iter().map(ToString::to_string).collect(),
            SweepAxis::Dim => DIM_GRID.iter().map(ToString::to_string).collect(),
            SweepAxis::Mode => vec!["sg".into(), "cbow".into()],
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max_n" => Ok(SweepAxis::MaxN),
            "dim" | "size" => Ok(SweepAxis::Dim),
            "mode" => Ok(SweepAxis::Mode),
            other => Err(format!("unknown sweep axis {other:?} (expected max_n, dim or mode)")),
        }
    }
}

fn sweep_one(base: &EvalConfig, split: &EvalSplit, axis: SweepAxis, value: &str) -> RunReport {
    let label = format!("{}={}", axis.key(), value);
    let mut config = base.clone();
    let outcome = config
        .set(axis.key(), value)
        .and_then(|()| config.validate())
        .and_then(|()| run(&config, split));
    match outcome {
        Ok(mut report) => {
            report.label = label;
            report
        }
        Err(e) => {
            log::warn!("sweep run {label} failed: {e}");
            RunReport::failed(label, &config, &e)
        }
    }
}

/// One run per value with everything else taken from `base`. A value that
/// cannot be applied yields a failed report and the sweep carries on.
pub fn sweep(
    base: &EvalConfig,
    split: &EvalSplit,
    axis: SweepAxis,
    values: &[String],
    parallel: bool,
) -> Result<Vec<RunReport>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    Ok(if parallel {
        values.par_iter().map(|v| sweep_one(base, split, axis, v)).collect()
    } else {
        values.iter().map(|v| sweep_one(base, split, axis, v)).collect()
    })
}

/// Difference of one metric between two reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub base: String,
    pub other: String,
    pub metric: String,
    pub base_value: f64,
    pub other_value: f64,
    pub delta: f64,
    /// `delta / base_value`, absent when the base is zero.
    pub relative: Option<f64>,
    /// Set on the type I to type II rows, which isolate the cold-start effect.
    pub highlight: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Comparison {
    pub rows: Vec<DeltaRow>,
}

impl Comparison {
    pub fn highlighted(&self) -> impl Iterator<Item = &DeltaRow> {
        self.rows.iter().filter(|r| r.highlight)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, HarnessError> {
        let rows = csv::Reader::from_reader(input).deserialize().collect::<Result<_, _>>()?;
        Ok(Comparison { rows })
    }

    /// Plain-text table, one line per row.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<12} {:<12} {:<17} {:>9} {:>9} {:>9} {:>9}\n",
            "base", "other", "metric", "base", "other", "delta", "rel"
        );
        for r in &self.rows {
            let rel = r.relative.map_or_else(|| "-".to_owned(), |x| format!("{:+.1}%", 100.0 * x));
            let mark = if r.highlight { " *" } else { "" };
            let _ = writeln!(
                s,
                "{:<12} {:<12} {:<17} {:>9.4} {:>9.4} {:>+9.4} {:>9}{mark}",
                r.base, r.other, r.metric, r.base_value, r.other_value, r.delta, rel
            );
        }
        s
    }
}

/// Pairwise metric deltas between successful reports. Pairs of different
/// configuration types are oriented from the lower type to the higher.
pub fn compare_configs(reports: &[RunReport]) -> Result<Comparison, HarnessError> {
    let ok: Vec<&RunReport> = reports.iter().filter(|r| r.is_ok()).collect();
    if ok.len() < 2 {
        return Err(HarnessError::TooFewReports(ok.len()));
    }
    let mut rows = Vec::new();
    for i in 0..ok.len() {
        for j in i + 1..ok.len() {
            let (mut base, mut other) = (ok[i], ok[j]);
            if base.config_type > other.config_type {
                std::mem::swap(&mut base, &mut other);
            }
            let highlight = base.config_type == ConfigType::I && other.config_type == ConfigType::II;
            for ((metric, b), (_, o)) in base.table_metrics().into_iter().zip(other.table_metrics()) {
                let delta = o - b;
                rows.push(DeltaRow {
                    base: base.label.clone(),
                    other: other.label.clone(),
                    metric: metric.to_owned(),
                    base_value: b,
                    other_value: o,
                    delta,
                    relative: (b > 0.0).then(|| delta / b),
                    highlight,
                });
            }
        }
    }
    Ok(Comparison { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(ct: ConfigType, r1: f64) -> RunReport {
        let cfg = EvalConfig {
            config_type: ct,
            ..EvalConfig::default()
        };
        RunReport {
            rouge1_recall: r1,
            rouge1_precision: r1 / 2.0,
            rougel_recall: r1 * 0.9,
            ..RunReport::empty(ct.label(), &cfg)
        }
    }

    #[test]
    fn axis_parsing_and_grids() {
        assert_eq!("max_n".parse::<SweepAxis>().unwrap(), SweepAxis::MaxN);
        assert_eq!(SweepAxis::MaxN.default_values().len(), 10);
        assert_eq!(SweepAxis::Dim.default_values(), ["10", "50", "100", "150", "200", "250"]);
        assert!("lr".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn identical_reports_have_zero_deltas() {
        let a = report(ConfigType::II, 0.3);
        let cmp = compare_configs(&[a.clone(), a]).unwrap();
        assert_eq!(cmp.rows.len(), 4);
        assert!(cmp.rows.iter().all(|r| r.delta == 0.0));
    }

    #[test]
    fn type_i_to_ii_is_highlighted() {
        let cmp = compare_configs(&[report(ConfigType::II, 0.3), report(ConfigType::I, 0.2), report(ConfigType::III, 0.25)]).unwrap();
        let hl: Vec<&DeltaRow> = cmp.highlighted().collect();
        assert_eq!(hl.len(), 4);
        let recall = hl.iter().find(|r| r.metric == "rouge1_recall").unwrap();
        assert_eq!((recall.base.as_str(), recall.other.as_str()), ("I", "II"));
        assert!((recall.relative.unwrap() - 0.5).abs() < 1e-12);
        assert!(cmp.render().contains(" *"));
    }

    #[test]
    fn csv_roundtrip() {
        let mut zero = report(ConfigType::IV, 0.0);
        zero.label = "IV, no A".into();
        let cmp = compare_configs(&[zero, report(ConfigType::V, 1.0 / 3.0)]).unwrap();
        assert!(cmp.rows[0].relative.is_none());
        let mut buf = Vec::new();
        cmp.write_csv(&mut buf).unwrap();
        assert_eq!(Comparison::read_csv(buf.as_slice()).unwrap(), cmp);
    }

    #[test]
    fn too_few_reports() {
        let cfg = EvalConfig::default();
        let failed = RunReport::failed("x", &cfg, &"boom");
        assert!(matches!(
            compare_configs(&[report(ConfigType::I, 0.1), failed]),
            Err(HarnessError::TooFewReports(1))
        ));
    }
}
