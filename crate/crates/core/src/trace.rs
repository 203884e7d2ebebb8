//! Per-epoch convergence records and their CSV form.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact CSV header shared by all methods.
pub const CSV_HEADER: [&str; 10] = [
    "method",
    "epoch",
    "obj",
    "obj_gap",
    "feas",
    "kkt_stat",
    "erg_obj_gap",
    "erg_feas",
    "eta_max",
    "time_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lalm,
    Blalm,
    Pdyn,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lalm => "lalm",
            Method::Blalm => "blalm",
            Method::Pdyn => "pdyn",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lalm" => Ok(Method::Lalm),
            "blalm" => Ok(Method::Blalm),
            "pdyn" | "pd-yn" => Ok(Method::Pdyn),
            other => Err(Error::Unknown {
                what: "method",
                name: other.to_string(),
            }),
        }
    }
}

/// One row of a convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub method: Method,
    pub epoch: usize,
    /// `f0(x^k)`
    pub obj: f64,
    /// `|f0(x^k) - f0*|`, only with a resolved reference value.
    pub obj_gap: Option<f64>,
    /// `||Ax^k - b|| + sum_j [f_j(x^k)]_+`
    pub feas: f64,
    pub kkt_stat: f64,
    pub erg_obj_gap: Option<f64>,
    pub erg_feas: Option<f64>,
    pub eta_max: f64,
    pub time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wtr.write_record(CSV_HEADER)?;
        for r in &self.records {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::InvalidParameter(format!(
                "unexpected trace header {header:?}"
            )));
        }
        let records = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { records })
    }

    /// Extracts `(epoch, value)` pairs for a named numeric column.
    pub fn column(&self, name: &str) -> Result<Vec<(usize, f64)>> {
        let pick: fn(&TraceRecord) -> Option<f64> = match name {
            "obj" => |r| Some(r.obj),
            "obj_gap" => |r| r.obj_gap,
            "feas" => |r| Some(r.feas),
            "kkt_stat" => |r| Some(r.kkt_stat),
            "erg_obj_gap" => |r| r.erg_obj_gap,
            "erg_feas" => |r| r.erg_feas,
            "eta_max" => |r| Some(r.eta_max),
            "time_ms" => |r| r.time_ms,
            other => {
                return Err(Error::Unknown {
                    what: "trace column",
                    name: other.to_string(),
                })
            }
        };
        Ok(self
            .records
            .iter()
            .filter_map(|r| pick(r).map(|v| (r.epoch, v)))
            .collect())
    }
}

/// Which epochs get a trace row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum RecordSchedule {
    /// Epoch 0 and every multiple of the interval.
    Every(usize),
    /// Epoch 0 plus roughly `rows` logarithmically spaced epochs.
    Log { rows: usize },
    /// Every epoch up to 1000 epochs, otherwise ~500 log-spaced rows.
    #[default]
    Auto,
}

impl RecordSchedule {
    pub fn epochs(&self, max_epochs: usize) -> Vec<usize> {
        match *self {
            RecordSchedule::Every(k) => {
                let k = k.max(1);
                (0..=max_epochs / k).map(|i| i * k).collect()
            }
            RecordSchedule::Log { rows } => {
                let mut out = vec![0];
                if max_epochs > 0 {
                    let rows = rows.max(2);
                    let top = (max_epochs as f64).ln();
                    for i in 0..rows {
                        let e = (top * i as f64 / (rows - 1) as f64).exp().round() as usize;
                        let e = e.clamp(1, max_epochs);
                        if *out.last().unwrap() != e {
                            out.push(e);
                        }
                    }
                    if *out.last().unwrap() != max_epochs {
                        out.push(max_epochs);
                    }
                }
                out
            }
            RecordSchedule::Auto => {
                if max_epochs <= 1000 {
                    RecordSchedule::Every(1).epochs(max_epochs)
                } else {
                    RecordSchedule::Log { rows: 500 }.epochs(max_epochs)
                }
            }
        }
    }
}

/// Walks a record schedule during a solve.
#[derive(Debug)]
pub(crate) struct Recorder {
    epochs: Vec<usize>,
    next: usize,
    start: Instant,
    timing: bool,
    pub(crate) trace: Trace,
}

impl Recorder {
    pub(crate) fn new(schedule: RecordSchedule, max_epochs: usize, timing: bool) -> Self {
        Self {
            epochs: schedule.epochs(max_epochs),
            next: 0,
            start: Instant::now(),
            timing,
            trace: Trace::default(),
        }
    }

    pub(crate) fn due(&mut self, epoch: usize) -> bool {
        while self.next < self.epochs.len() && self.epochs[self.next] < epoch {
            self.next += 1;
        }
        self.next < self.epochs.len() && self.epochs[self.next] == epoch
    }

    pub(crate) fn elapsed_ms(&self) -> Option<f64> {
        self.timing
            .then(|| self.start.elapsed().as_secs_f64() * 1e3)
    }

    pub(crate) fn push(&mut self, mut rec: TraceRecord) {
        if self
            .trace
            .last()
            .is_some_and(|last| last.epoch >= rec.epoch)
        {
            return;
        }
        rec.time_ms = self.elapsed_ms();
        self.trace.records.push(rec);
    }

    pub(crate) fn recorded(&self, epoch: usize) -> bool {
        self.trace.last().is_some_and(|r| r.epoch == epoch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: usize) -> TraceRecord {
        TraceRecord {
            method: Method::Lalm,
            epoch,
            obj: 1.5,
            obj_gap: None,
            feas: 0.0,
            kkt_stat: 1e-3,
            erg_obj_gap: Some(0.25),
            erg_feas: None,
            eta_max: 2.0,
            time_ms: None,
        }
    }

    #[test]
    fn interval_schedule_row_count() {
        for (epochs, k) in [(10, 1), (10, 3), (1000, 7), (5, 10)] {
            assert_eq!(
                RecordSchedule::Every(k).epochs(epochs).len(),
                epochs / k + 1
            );
        }
    }

    #[test]
    fn log_schedule_is_strictly_increasing() {
        let e = RecordSchedule::Auto.epochs(100_000);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(e[0], 0);
        assert_eq!(*e.last().unwrap(), 100_000);
        assert!(e.len() > 300 && e.len() <= 501, "{}", e.len());
        assert_eq!(RecordSchedule::Auto.epochs(1000).len(), 1001);
    }

    #[test]
    fn csv_header_and_empty_fields() {
        let t = Trace {
            records: vec![rec(0), rec(1)],
        };
        let s = t.to_csv_string().unwrap();
        let mut lines = s.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,epoch,obj,obj_gap,feas,kkt_stat,erg_obj_gap,erg_feas,eta_max,time_ms"
        );
        assert_eq!(lines.next().unwrap(), "lalm,0,1.5,,0.0,0.001,0.25,,2.0,");
        let back = Trace::read_csv(s.as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn method_names() {
        assert_eq!("pdyn".parse::<Method>().unwrap(), Method::Pdyn);
        assert!("admm".parse::<Method>().is_err());
        assert_eq!(Method::Blalm.to_string(), "blalm");
    }
}
