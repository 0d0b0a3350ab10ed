//! Trial data representation: CSV ingestion, validation and reduction of the
//! full observed structure to the competing-risks structure.

use std::collections::HashMap;
use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::Real;

/// Which cause produced the first observed event in reduced form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cause {
    /// Censored before either event.
    Censored = 0,
    /// Primary outcome observed first (ties with the intercurrent event
    /// resolve to the outcome).
    Outcome = 1,
    /// Intercurrent event strictly first.
    Intercurrent = 2,
}

/// One participant in full observed form: arm, observed outcome time with
/// its event indicator, and observed intercurrent time with its indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord<F> {
    pub id: String,
    pub arm: u8,
    pub t_obs: F,
    pub delta_t: bool,
    pub r_obs: F,
    pub delta_r: bool,
}

/// One participant in reduced (competing-risks) form.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRecord<F> {
    pub id: String,
    pub arm: u8,
    pub time: F,
    pub cause: Cause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Form {
    Full,
    Reduced,
}

#[derive(Debug, Clone)]
pub enum Records<F> {
    Full(Vec<SubjectRecord<F>>),
    Reduced(Vec<ReducedRecord<F>>),
}

/// Immutable trial dataset with the analysis horizon `t*`.
#[derive(Debug, Clone)]
pub struct Dataset<F> {
    pub records: Records<F>,
    pub t_star: F,
}

impl<F: Real> Dataset<F> {
    pub fn form(&self) -> Form {
        match self.records {
            Records::Full(_) => Form::Full,
            Records::Reduced(_) => Form::Reduced,
        }
    }

    pub fn len(&self) -> usize {
        match &self.records {
            Records::Full(r) => r.len(),
            Records::Reduced(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn arm_sizes(&self) -> [usize; 2] {
        let mut sizes = [0usize; 2];
        match &self.records {
            Records::Full(r) => r.iter().for_each(|s| sizes[s.arm as usize] += 1),
            Records::Reduced(r) => r.iter().for_each(|s| sizes[s.arm as usize] += 1),
        }
        sizes
    }

    /// Map the full structure onto `(arm, min time, cause)`.
    ///
    /// Tie rule: the primary outcome wins ties with the intercurrent event,
    /// and an event observed at the censoring timestamp counts as observed.
    pub fn reduce(&self) -> Result<Dataset<F>> {
        let full = match &self.records {
            Records::Full(r) => r,
            Records::Reduced(_) => return Err(Error::WrongForm { expected: "full" }),
        };
        let reduced = full.iter().map(reduce_record).collect();
        Ok(Dataset { records: Records::Reduced(reduced), t_star: self.t_star })
    }

    /// Report-only checks of what is checkable from data; Assumptions that
    /// are untestable (randomization, independent censoring) are documented
    /// preconditions instead.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport {
            form: self.form(),
            t_star: self.t_star.to_f64x(),
            ..ValidationReport::default()
        };
        let mut max_time = [f64::NEG_INFINITY; 2];
        let mut visit = |arm: u8, time: f64, cause: Option<Cause>| {
            let a = arm as usize;
            report.arm_sizes[a] += 1;
            if !time.is_finite() || time < 0.0 {
                report.bad_time_rows += 1;
            }
            max_time[a] = max_time[a].max(time);
            if let Some(c) = cause {
                report.events_by_cause[a][c as usize] += 1;
            }
        };
        match &self.records {
            Records::Full(records) => {
                for r in records {
                    let red = reduce_record(r);
                    visit(r.arm, red.time.to_f64x(), Some(red.cause));
                    if r.delta_t && r.delta_r && r.t_obs == r.r_obs {
                        report.tied_event_rows += 1;
                    }
                    if !r.delta_r && r.t_obs > r.r_obs {
                        // Outcome observed after the recorded censoring time of
                        // the intercurrent track; legal for non-truncating
                        // intercurrent events, flagged for review.
                        report.nontruncating_rows += 1;
                    }
                }
            }
            Records::Reduced(records) => {
                for r in records {
                    visit(r.arm, r.time.to_f64x(), Some(r.cause));
                }
            }
        }
        for a in 0..2 {
            report.max_time[a] = max_time[a];
            if max_time[a].is_finite() && report.t_star > max_time[a] {
                report.positivity_flag = true;
            }
        }
        report
    }
}

fn reduce_record<F: Real>(r: &SubjectRecord<F>) -> ReducedRecord<F> {
    let (time, cause) = if r.delta_t && r.t_obs <= r.r_obs {
        (r.t_obs, Cause::Outcome)
    } else if r.delta_r && r.r_obs <= r.t_obs {
        (r.r_obs, Cause::Intercurrent)
    } else {
        (r.t_obs.min(r.r_obs), Cause::Censored)
    };
    ReducedRecord { id: r.id.clone(), arm: r.arm, time, cause }
}

/// Data checks that are observable; flags only, never rejects.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub form: Form,
    pub t_star: f64,
    pub arm_sizes: [usize; 2],
    /// Per arm: counts of censored / outcome-first / intercurrent-first.
    pub events_by_cause: [[usize; 3]; 2],
    pub max_time: [f64; 2],
    /// `t*` exceeds the last observed time in some arm.
    pub positivity_flag: bool,
    /// Rows where outcome and intercurrent events share a timestamp.
    pub tied_event_rows: usize,
    /// Rows with negative or non-finite times.
    pub bad_time_rows: usize,
    /// Rows with the outcome observed after the intercurrent track's
    /// censoring time (non-truncating intercurrent events).
    pub nontruncating_rows: usize,
}

impl Default for Form {
    fn default() -> Self {
        Form::Full
    }
}

impl ValidationReport {
    pub fn flag_count(&self) -> usize {
        usize::from(self.positivity_flag)
            + usize::from(self.tied_event_rows > 0)
            + usize::from(self.bad_time_rows > 0)
    }
}

/// Logical-field to column-name map for CSV ingestion.
#[derive(Debug, Clone)]
pub struct Schema {
    pub id: String,
    pub arm: String,
    pub t_obs: String,
    pub delta_t: String,
    pub r_obs: String,
    pub delta_r: String,
    pub time: String,
    pub cause: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            arm: "arm".into(),
            t_obs: "t_obs".into(),
            delta_t: "delta_t".into(),
            r_obs: "r_obs".into(),
            delta_r: "delta_r".into(),
            time: "time".into(),
            cause: "cause".into(),
        }
    }
}

/// Parse a headered CSV stream into a dataset.
///
/// Full form is selected when all of `(t_obs, delta_t, r_obs, delta_r)` map
/// to present columns; reduced form when `(time, cause)` do. A partial mix
/// of the two schemas is rejected.
pub fn parse_dataset<F: Real>(source: impl Read, schema: &Schema, t_star: F) -> Result<Dataset<F>> {
    if !(t_star > F::zero()) {
        return Err(Error::MalformedRow { row: 0, reason: "t_star must be positive".into() });
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let col: HashMap<&str, usize> =
        headers.iter().enumerate().map(|(i, h)| (h, i)).collect();

    let full_cols = [&schema.t_obs, &schema.delta_t, &schema.r_obs, &schema.delta_r];
    let reduced_cols = [&schema.time, &schema.cause];
    let full_hits = full_cols.iter().filter(|c| col.contains_key(c.as_str())).count();
    let reduced_hits = reduced_cols.iter().filter(|c| col.contains_key(c.as_str())).count();

    let form = if full_hits == 4 {
        Form::Full
    } else if reduced_hits == 2 && full_hits == 0 {
        Form::Reduced
    } else if full_hits > 0 && reduced_hits > 0 {
        return Err(Error::MixedForm);
    } else if full_hits > 0 {
        let missing = full_cols.iter().find(|c| !col.contains_key(c.as_str())).unwrap();
        return Err(Error::MissingColumn((*missing).clone()));
    } else {
        return Err(Error::MissingColumn(schema.time.clone()));
    };

    let arm_idx = *col
        .get(schema.arm.as_str())
        .ok_or_else(|| Error::MissingColumn(schema.arm.clone()))?;
    let id_idx = col.get(schema.id.as_str()).copied();

    let get = |record: &csv::StringRecord, idx: usize, row: usize| -> Result<String> {
        record
            .get(idx)
            .map(str::to_owned)
            .ok_or_else(|| Error::MalformedRow { row, reason: "short row".into() })
    };
    let parse_time = |s: &str, row: usize, what: &str| -> Result<F> {
        let v: f64 = s.parse().map_err(|_| Error::MalformedRow {
            row,
            reason: format!("{what} `{s}` is not a number"),
        })?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("{what} `{s}` must be finite and nonnegative"),
            });
        }
        Ok(F::from_f64x(v))
    };
    let parse_indicator = |s: &str, row: usize, what: &str| -> Result<bool> {
        match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(Error::MalformedRow { row, reason: format!("{what} `{s}` must be 0 or 1") }),
        }
    };

    let mut full = Vec::new();
    let mut reduced = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let arm_raw = get(&record, arm_idx, row)?;
        let arm = match arm_raw.as_str() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::MalformedRow {
                    row,
                    reason: format!("arm `{other}` must be 0 or 1"),
                })
            }
        };
        let id = match id_idx {
            Some(idx) => get(&record, idx, row)?,
            None => row.to_string(),
        };
        match form {
            Form::Full => {
                let t_obs = parse_time(&get(&record, col[schema.t_obs.as_str()], row)?, row, "t_obs")?;
                let delta_t =
                    parse_indicator(&get(&record, col[schema.delta_t.as_str()], row)?, row, "delta_t")?;
                let r_obs = parse_time(&get(&record, col[schema.r_obs.as_str()], row)?, row, "r_obs")?;
                let delta_r =
                    parse_indicator(&get(&record, col[schema.delta_r.as_str()], row)?, row, "delta_r")?;
                full.push(SubjectRecord { id, arm, t_obs, delta_t, r_obs, delta_r });
            }
            Form::Reduced => {
                let time = parse_time(&get(&record, col[schema.time.as_str()], row)?, row, "time")?;
                let cause = match get(&record, col[schema.cause.as_str()], row)?.as_str() {
                    "0" => Cause::Censored,
                    "1" => Cause::Outcome,
                    "2" => Cause::Intercurrent,
                    other => {
                        return Err(Error::MalformedRow {
                            row,
                            reason: format!("cause `{other}` must be 0, 1 or 2"),
                        })
                    }
                };
                reduced.push(ReducedRecord { id, arm, time, cause });
            }
        }
    }

    let ds = match form {
        Form::Full => Dataset { records: Records::Full(full), t_star },
        Form::Reduced => Dataset { records: Records::Reduced(reduced), t_star },
    };
    let sizes = ds.arm_sizes();
    for (arm, &n) in sizes.iter().enumerate() {
        if n == 0 {
            return Err(Error::EmptyArm(arm as u8));
        }
    }
    Ok(ds)
}

/// Write a dataset back out under the documented CSV schema. Times carry 17
/// significant digits so a parse/serialize cycle is bit-exact.
pub fn write_csv<F: Real, W: std::io::Write>(ds: &Dataset<F>, mut out: W) -> Result<()> {
    match &ds.records {
        Records::Full(records) => {
            writeln!(out, "id,arm,t_obs,delta_t,r_obs,delta_r")?;
            for r in records {
                writeln!(
                    out,
                    "{},{},{:.16e},{},{:.16e},{}",
                    r.id,
                    r.arm,
                    r.t_obs.to_f64x(),
                    u8::from(r.delta_t),
                    r.r_obs.to_f64x(),
                    u8::from(r.delta_r)
                )?;
            }
        }
        Records::Reduced(records) => {
            writeln!(out, "id,arm,time,cause")?;
            for r in records {
                writeln!(out, "{},{},{:.16e},{}", r.id, r.arm, r.time.to_f64x(), r.cause as u8)?;
            }
        }
    }
    Ok(())
}
