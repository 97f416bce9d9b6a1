//! CSV ingestion, 5-minute resampling, windowing, per-signal standardization,
//! and the train/validation/test split protocol.

use crate::error::{Error, Result};
use crate::models::ModelDimensions;
use crate::tensor::Tensor;
use chrono::NaiveDateTime;
use std::io::{Read, Write};
use std::path::Path;

pub const STEP_MINUTES: i64 = 5;
/// Glucose gaps longer than this are not interpolated; the series is split.
pub const GAP_THRESHOLD_MINUTES: i64 = 30;

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// One contiguous stretch of data on the uniform 5-minute grid.
#[derive(Clone, Debug)]
pub struct Segment {
    pub start: NaiveDateTime,
    pub glucose: Vec<f64>,
    pub insulin: Vec<f64>,
    pub cho: Vec<f64>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.glucose.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glucose.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct PatientSeries {
    pub patient_id: String,
    pub step_minutes: i64,
    pub segments: Vec<Segment>,
}

/// Ingestion knobs; defaults follow the 5-min grid and 30-min gap policy.
#[derive(Clone, Copy, Debug)]
pub struct PipelineConfig {
    pub step_minutes: i64,
    pub gap_threshold_minutes: i64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            step_minutes: STEP_MINUTES,
            gap_threshold_minutes: GAP_THRESHOLD_MINUTES,
        }
    }
}

struct RawRow {
    time: NaiveDateTime,
    glucose: Option<f64>,
    insulin: f64,
    cho: f64,
}

fn parse_optional(field: &str, row: usize, name: &str) -> Result<Option<f64>> {
    let trimmed = field.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    trimmed
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Format(format!("row {}: unparseable {} '{}'", row, name, field)))
}

/// Reads the `timestamp,glucose,insulin,cho` schema and resamples onto the
/// uniform grid. Glucose is linearly interpolated across gaps up to the
/// threshold; longer gaps split the series into contiguous segments. Insulin
/// and CHO amounts are summed into the nearest grid step.
pub fn ingest_csv(path: &Path, patient_id: &str, config: &PipelineConfig) -> Result<PatientSeries> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, patient_id, config)
}

pub fn ingest_reader<R: Read>(
    reader: R,
    patient_id: &str,
    config: &PipelineConfig,
) -> Result<PatientSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr
            .headers()
            .map_err(|e| Error::Format(format!("header: {}", e)))?;
        let expect = ["timestamp", "glucose", "insulin", "cho"];
        let got: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
        if got != expect {
            return Err(Error::Format(format!(
                "missing or misnamed columns: expected {:?}, got {:?}",
                expect, got
            )));
        }
    }

    let mut rows: Vec<RawRow> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let rownum = idx + 2; // 1-based, after header
        let record = record.map_err(|e| Error::Format(format!("row {}: {}", rownum, e)))?;
        if record.len() != 4 {
            return Err(Error::Format(format!(
                "row {}: expected 4 fields, got {}",
                rownum,
                record.len()
            )));
        }
        let time = NaiveDateTime::parse_from_str(record[0].trim(), TS_FORMAT)
            .map_err(|_| Error::Format(format!("row {}: bad timestamp '{}'", rownum, &record[0])))?;
        if let Some(prev) = rows.last() {
            if time < prev.time {
                return Err(Error::Format(format!(
                    "row {}: non-monotonic timestamp",
                    rownum
                )));
            }
        }
        rows.push(RawRow {
            time,
            glucose: parse_optional(&record[1], rownum, "glucose")?,
            insulin: parse_optional(&record[2], rownum, "insulin")?.unwrap_or(0.0),
            cho: parse_optional(&record[3], rownum, "cho")?.unwrap_or(0.0),
        });
    }

    let obs: Vec<(NaiveDateTime, f64)> = rows
        .iter()
        .filter_map(|r| r.glucose.map(|g| (r.time, g)))
        .collect();
    if obs.is_empty() {
        return Err(Error::Format("no glucose observations".into()));
    }

    // split observation runs at gaps beyond the threshold
    let gap = chrono::Duration::minutes(config.gap_threshold_minutes);
    let mut runs: Vec<&[(NaiveDateTime, f64)]> = Vec::new();
    let mut run_start = 0;
    for i in 1..obs.len() {
        if obs[i].0 - obs[i - 1].0 > gap {
            runs.push(&obs[run_start..i]);
            run_start = i;
        }
    }
    runs.push(&obs[run_start..]);

    let step = chrono::Duration::minutes(config.step_minutes);
    let mut segments: Vec<Segment> = Vec::new();
    for run in runs {
        let start = run[0].0;
        let end = run[run.len() - 1].0;
        let mut glucose = Vec::new();
        let mut t = start;
        let mut k = 0; // index of first obs with time >= t
        while t <= end {
            while run[k].0 < t {
                k += 1;
            }
            let g = if run[k].0 == t {
                run[k].1
            } else {
                let (t0, g0) = run[k - 1];
                let (t1, g1) = run[k];
                let span = (t1 - t0).num_seconds() as f64;
                let frac = (t - t0).num_seconds() as f64 / span;
                g0 + frac * (g1 - g0)
            };
            if g <= 0.0 {
                return Err(Error::Format(format!(
                    "non-positive glucose {} at {}",
                    g, t
                )));
            }
            glucose.push(g);
            t += step;
        }
        let n = glucose.len();
        segments.push(Segment {
            start,
            glucose,
            insulin: vec![0.0; n],
            cho: vec![0.0; n],
        });
    }

    // events go to the nearest grid step of the nearest segment
    for row in &rows {
        if row.insulin == 0.0 && row.cho == 0.0 {
            continue;
        }
        let mut best: Option<(usize, usize, i64)> = None;
        for (si, seg) in segments.iter().enumerate() {
            let offset = (row.time - seg.start).num_minutes();
            let idx = (offset as f64 / config.step_minutes as f64).round() as i64;
            let idx = idx.clamp(0, seg.len() as i64 - 1) as usize;
            let grid_time = seg.start + chrono::Duration::minutes(idx as i64 * config.step_minutes);
            let dist = (row.time - grid_time).num_seconds().abs();
            if best.map_or(true, |(_, _, d)| dist < d) {
                best = Some((si, idx, dist));
            }
        }
        if let Some((si, idx, _)) = best {
            segments[si].insulin[idx] += row.insulin;
            segments[si].cho[idx] += row.cho;
        }
    }

    Ok(PatientSeries {
        patient_id: patient_id.to_string(),
        step_minutes: config.step_minutes,
        segments,
    })
}

/// Writes a series back out in the ingest schema (grid-aligned rows).
pub fn write_ingest_csv<W: Write>(series: &PatientSeries, out: &mut W) -> Result<()> {
    writeln!(out, "timestamp,glucose,insulin,cho")?;
    for seg in &series.segments {
        for i in 0..seg.len() {
            let t = seg.start + chrono::Duration::minutes(i as i64 * series.step_minutes);
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                t.format(TS_FORMAT),
                seg.glucose[i],
                seg.insulin[i],
                seg.cho[i]
            )?;
        }
    }
    Ok(())
}

/// Processed-cache schema: ingest schema plus a `segment_id` column.
pub fn write_processed_csv<W: Write>(series: &PatientSeries, out: &mut W) -> Result<()> {
    writeln!(out, "timestamp,glucose,insulin,cho,segment_id")?;
    for (si, seg) in series.segments.iter().enumerate() {
        for i in 0..seg.len() {
            let t = seg.start + chrono::Duration::minutes(i as i64 * series.step_minutes);
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{}",
                t.format(TS_FORMAT),
                seg.glucose[i],
                seg.insulin[i],
                seg.cho[i],
                si
            )?;
        }
    }
    Ok(())
}

/// One training/prediction instance.
#[derive(Clone, Debug)]
pub struct SampleWindow {
    /// H x r input matrix (glucose, insulin, CHO). Raw after windowing;
    /// standardized after `apply_standardizer`.
    pub x: Tensor,
    /// True glucose at t + PH, always in mg/dL.
    pub y: f64,
    /// Index of the final history step within its segment.
    pub t_index: usize,
    pub segment: usize,
    pub patient_id: String,
    /// Age in steps of the most recent strictly-positive raw insulin value
    /// inside the window; `None` if there is none.
    pub insulin_lag: Option<usize>,
    pub cho_lag: Option<usize>,
}

/// Slides a stride-1 window over every segment long enough to hold a full
/// history plus horizon. Windows never cross segment boundaries.
pub fn make_windows(series: &PatientSeries, dims: &ModelDimensions) -> Vec<SampleWindow> {
    let (h, ph) = (dims.history, dims.horizon);
    let mut out = Vec::new();
    for (si, seg) in series.segments.iter().enumerate() {
        if seg.len() < h + ph {
            continue;
        }
        for t in (h - 1)..(seg.len() - ph) {
            let first = t + 1 - h;
            let mut data = Vec::with_capacity(h * 3);
            for i in first..=t {
                data.push(seg.glucose[i]);
                data.push(seg.insulin[i]);
                data.push(seg.cho[i]);
            }
            let lag_of = |signal: &[f64]| {
                (first..=t)
                    .rev()
                    .find(|i| signal[*i] > 0.0)
                    .map(|i| t - i)
            };
            out.push(SampleWindow {
                x: Tensor::matrix(h, 3, data).expect("window shape"),
                y: seg.glucose[t + ph],
                t_index: t,
                segment: si,
                patient_id: series.patient_id.clone(),
                insulin_lag: lag_of(&seg.insulin),
                cho_lag: lag_of(&seg.cho),
            });
        }
    }
    out
}

/// Per-signal mean and standard deviation, fit on training windows only.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Number of windows the parameters were fit on, kept for leakage audits.
    pub fit_count: usize,
}

pub fn fit_standardizer(windows: &[SampleWindow]) -> Result<StandardizationParams> {
    if windows.is_empty() {
        return Err(Error::Contract("fit_standardizer on empty set".into()));
    }
    let r = windows[0].x.cols()?;
    let mut sum = vec![0.0; r];
    let mut count = 0usize;
    for w in windows {
        let h = w.x.rows()?;
        for i in 0..h {
            for j in 0..r {
                sum[j] += w.x.at(i, j);
            }
        }
        count += h;
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0; r];
    for w in windows {
        let h = w.x.rows()?;
        for i in 0..h {
            for j in 0..r {
                let d = w.x.at(i, j) - mean[j];
                sq[j] += d * d;
            }
        }
    }
    // population std; zero-variance signals fall back to std 1
    let std: Vec<f64> = sq
        .iter()
        .map(|s| {
            let v = (s / count as f64).sqrt();
            if v > 0.0 {
                v
            } else {
                1.0
            }
        })
        .collect();
    Ok(StandardizationParams {
        mean,
        std,
        fit_count: windows.len(),
    })
}

impl StandardizationParams {
    pub fn apply(&self, windows: &[SampleWindow]) -> Result<Vec<SampleWindow>> {
        let r = self.mean.len();
        let mut out = Vec::with_capacity(windows.len());
        for w in windows {
            let mut w2 = w.clone();
            let h = w2.x.rows()?;
            for i in 0..h {
                for j in 0..r {
                    let v = (w.x.at(i, j) - self.mean[j]) / self.std[j];
                    w2.x.data_mut()[i * r + j] = v;
                }
            }
            out.push(w2);
        }
        Ok(out)
    }

    /// Glucose target in standardized units (training criterion space).
    pub fn standardize_target(&self, y: f64) -> f64 {
        (y - self.mean[0]) / self.std[0]
    }

    /// Model output back to mg/dL.
    pub fn destandardize_prediction(&self, y: f64) -> f64 {
        y * self.std[0] + self.mean[0]
    }
}

/// One leave-one-patient-out fold: remaining patients split chronologically
/// 75/25 into train and validation; windows still carry raw inputs.
#[derive(Clone, Debug)]
pub struct Fold {
    pub test_patient: String,
    pub train: Vec<SampleWindow>,
    pub valid: Vec<SampleWindow>,
    pub test: Vec<SampleWindow>,
}

/// Chronological 75/25 split of one patient's windows.
pub fn chronological_split(windows: &[SampleWindow]) -> (Vec<SampleWindow>, Vec<SampleWindow>) {
    let n_train = windows.len() * 3 / 4;
    (
        windows[..n_train].to_vec(),
        windows[n_train..].to_vec(),
    )
}

/// Outer leave-one-patient-out loop over per-patient window sets.
pub fn split_protocol(patients: &[(String, Vec<SampleWindow>)]) -> Result<Vec<Fold>> {
    if patients.len() < 2 {
        return Err(Error::Contract(
            "split protocol needs at least 2 patients".into(),
        ));
    }
    let mut folds = Vec::with_capacity(patients.len());
    for (test_id, test_windows) in patients {
        let mut train = Vec::new();
        let mut valid = Vec::new();
        for (id, windows) in patients {
            if id == test_id {
                continue;
            }
            let (tr, va) = chronological_split(windows);
            train.extend(tr);
            valid.extend(va);
        }
        folds.push(Fold {
            test_patient: test_id.clone(),
            train,
            valid,
            test: test_windows.clone(),
        });
    }
    Ok(folds)
}

/// K-fold partition over patients (model-selection CV on the training
/// patients). Fold `i` holds out patients `i, i+k, ...` for validation.
pub fn patient_kfold(
    patients: &[(String, Vec<SampleWindow>)],
    k: usize,
) -> Result<Vec<(Vec<String>, Vec<String>)>> {
    if k == 0 || patients.len() < k {
        return Err(Error::Contract(format!(
            "{}-fold CV over {} patients",
            k,
            patients.len()
        )));
    }
    let ids: Vec<String> = patients.iter().map(|(id, _)| id.clone()).collect();
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let held: Vec<String> = ids.iter().skip(f).step_by(k).cloned().collect();
        let kept: Vec<String> = ids.iter().filter(|i| !held.contains(i)).cloned().collect();
        folds.push((kept, held));
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(h: usize, ph: usize) -> ModelDimensions {
        ModelDimensions {
            inputs: 3,
            history: h,
            horizon: ph,
            embed: 2,
            hidden: 2,
        }
    }

    fn csv_of(rows: &[&str]) -> String {
        let mut s = String::from("timestamp,glucose,insulin,cho\n");
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn on_grid_input_is_identity() {
        let text = csv_of(&[
            "2025-01-01T00:00:00,100,0,0",
            "2025-01-01T00:05:00,105,0,0",
            "2025-01-01T00:10:00,110,0,0",
        ]);
        let s = ingest_reader(text.as_bytes(), "p1", &PipelineConfig::default()).unwrap();
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.segments[0].glucose, vec![100.0, 105.0, 110.0]);
    }

    #[test]
    fn linear_midpoint_interpolation() {
        let text = csv_of(&[
            "2025-01-01T00:00:00,100,0,0",
            "2025-01-01T00:10:00,110,0,0",
        ]);
        let s = ingest_reader(text.as_bytes(), "p1", &PipelineConfig::default()).unwrap();
        assert_eq!(s.segments[0].glucose, vec![100.0, 105.0, 110.0]);
    }

    #[test]
    fn long_gap_splits_segments() {
        let text = csv_of(&[
            "2025-01-01T00:00:00,100,0,0",
            "2025-01-01T00:05:00,102,0,0",
            "2025-01-01T01:00:00,130,0,0",
            "2025-01-01T01:05:00,128,0,0",
        ]);
        let s = ingest_reader(text.as_bytes(), "p1", &PipelineConfig::default()).unwrap();
        assert_eq!(s.segments.len(), 2);
        assert_eq!(s.segments[0].glucose.len(), 2);
        assert_eq!(s.segments[1].glucose.len(), 2);
    }

    #[test]
    fn same_bin_doses_are_summed() {
        let text = csv_of(&[
            "2025-01-01T00:00:00,100,0,0",
            "2025-01-01T00:04:00,,1,0",
            "2025-01-01T00:05:00,102,2,0",
            "2025-01-01T00:10:00,104,0,0",
        ]);
        let s = ingest_reader(text.as_bytes(), "p1", &PipelineConfig::default()).unwrap();
        assert_eq!(s.segments[0].insulin, vec![0.0, 3.0, 0.0]);
    }

    #[test]
    fn bad_rows_are_format_errors_with_row_number() {
        let text = csv_of(&["2025-01-01T00:00:00,abc,0,0"]);
        let err = ingest_reader(text.as_bytes(), "p1", &PipelineConfig::default()).unwrap_err();
        assert!(err.to_string().contains("row 2"));

        let text = csv_of(&[
            "2025-01-01T00:10:00,100,0,0",
            "2025-01-01T00:00:00,100,0,0",
        ]);
        let err = ingest_reader(text.as_bytes(), "p1", &PipelineConfig::default()).unwrap_err();
        assert!(err.to_string().contains("non-monotonic"));

        let text = "time,glucose,insulin,cho\n2025-01-01T00:00:00,100,0,0\n";
        assert!(matches!(
            ingest_reader(text.as_bytes(), "p1", &PipelineConfig::default()),
            Err(Error::Format(_))
        ));
    }

    fn series_of_len(n: usize) -> PatientSeries {
        let start = NaiveDateTime::parse_from_str("2025-01-01T00:00:00", TS_FORMAT).unwrap();
        PatientSeries {
            patient_id: "p1".into(),
            step_minutes: 5,
            segments: vec![Segment {
                start,
                glucose: (0..n).map(|i| 100.0 + i as f64).collect(),
                insulin: vec![0.0; n],
                cho: vec![0.0; n],
            }],
        }
    }

    #[test]
    fn window_count_boundary() {
        let d = dims(4, 2);
        assert_eq!(make_windows(&series_of_len(6), &d).len(), 1);
        assert_eq!(make_windows(&series_of_len(10), &d).len(), 5);
        assert_eq!(make_windows(&series_of_len(5), &d).len(), 0);
    }

    #[test]
    fn window_contents_and_target() {
        let d = dims(3, 2);
        let windows = make_windows(&series_of_len(6), &d);
        assert_eq!(windows.len(), 2);
        let w = &windows[0];
        assert_eq!(w.t_index, 2);
        // glucose column of x is steps 0..2, target is step 4
        assert_eq!(w.x.at(0, 0), 100.0);
        assert_eq!(w.x.at(2, 0), 102.0);
        assert_eq!(w.y, 104.0);
    }

    #[test]
    fn event_lags_in_windows() {
        let mut s = series_of_len(8);
        s.segments[0].insulin[3] = 2.0;
        s.segments[0].cho[1] = 30.0;
        let d = dims(4, 2);
        let windows = make_windows(&s, &d);
        // window with t_index 3: insulin at step 3 -> lag 0; cho at 1 -> lag 2
        let w = windows.iter().find(|w| w.t_index == 3).unwrap();
        assert_eq!(w.insulin_lag, Some(0));
        assert_eq!(w.cho_lag, Some(2));
        // window with t_index 5: insulin lag 2, cho out of window
        let w = windows.iter().find(|w| w.t_index == 5).unwrap();
        assert_eq!(w.insulin_lag, Some(2));
        assert_eq!(w.cho_lag, None);
    }

    #[test]
    fn standardizer_zero_mean_unit_variance_on_fit_set() {
        let mut s = series_of_len(30);
        for i in 0..30 {
            s.segments[0].insulin[i] = (i % 3) as f64;
            s.segments[0].cho[i] = (i % 5) as f64;
        }
        let d = dims(6, 2);
        let windows = make_windows(&s, &d);
        let params = fit_standardizer(&windows).unwrap();
        let std_windows = params.apply(&windows).unwrap();
        for j in 0..3 {
            let mut vals = Vec::new();
            for w in &std_windows {
                for i in 0..6 {
                    vals.push(w.x.at(i, j));
                }
            }
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / vals.len() as f64;
            assert!(mean.abs() < 1e-12, "signal {} mean {}", j, mean);
            assert!((var - 1.0).abs() < 1e-9, "signal {} var {}", j, var);
        }
        // targets stay in mg/dL
        assert_eq!(std_windows[0].y, windows[0].y);
    }

    #[test]
    fn constant_signal_standardizes_to_zero() {
        let s = series_of_len(20); // cho all zero
        let d = dims(4, 2);
        let windows = make_windows(&s, &d);
        let params = fit_standardizer(&windows).unwrap();
        assert_eq!(params.std[2], 1.0);
        let std_windows = params.apply(&windows).unwrap();
        for w in &std_windows {
            for i in 0..4 {
                assert_eq!(w.x.at(i, 2), 0.0);
            }
        }
    }

    #[test]
    fn destandardization_round_trip() {
        let s = series_of_len(20);
        let d = dims(4, 2);
        let windows = make_windows(&s, &d);
        let params = fit_standardizer(&windows).unwrap();
        for y in [60.0, 120.0, 300.0] {
            let rt = params.destandardize_prediction(params.standardize_target(y));
            assert!((rt - y).abs() < 1e-12);
        }
    }

    fn patients(n: usize, len: usize) -> Vec<(String, Vec<SampleWindow>)> {
        (0..n)
            .map(|i| {
                let mut s = series_of_len(len);
                s.patient_id = format!("p{}", i);
                let mut w = make_windows(&s, &dims(4, 2));
                for win in &mut w {
                    win.patient_id = s.patient_id.clone();
                }
                (s.patient_id.clone(), w)
            })
            .collect()
    }

    #[test]
    fn five_patients_give_five_folds_of_four() {
        let folds = split_protocol(&patients(5, 20)).unwrap();
        assert_eq!(folds.len(), 5);
        for fold in &folds {
            let train_ids: std::collections::BTreeSet<&str> =
                fold.train.iter().map(|w| w.patient_id.as_str()).collect();
            assert_eq!(train_ids.len(), 4);
            assert!(!train_ids.contains(fold.test_patient.as_str()));
        }
    }

    #[test]
    fn chronological_75_25() {
        let p = patients(2, 103); // 103 - 6 + 1 = 98 windows... use counts directly
        let (id0, w0) = &p[0];
        let n = w0.len();
        let (tr, va) = chronological_split(w0);
        assert_eq!(tr.len(), n * 3 / 4);
        assert_eq!(tr.len() + va.len(), n);
        let max_train_t = tr.iter().map(|w| w.t_index).max().unwrap();
        let min_valid_t = va.iter().map(|w| w.t_index).min().unwrap();
        assert!(min_valid_t > max_train_t, "patient {}", id0);
    }

    #[test]
    fn no_window_in_both_train_and_valid() {
        let folds = split_protocol(&patients(3, 30)).unwrap();
        for fold in &folds {
            for tr in &fold.train {
                for va in &fold.valid {
                    assert!(
                        !(tr.patient_id == va.patient_id
                            && tr.segment == va.segment
                            && tr.t_index == va.t_index),
                        "window overlap in fold {}",
                        fold.test_patient
                    );
                }
            }
        }
    }

    #[test]
    fn too_few_patients_is_contract_error() {
        assert!(matches!(
            split_protocol(&patients(1, 20)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn kfold_partitions_patients() {
        let p = patients(4, 20);
        let folds = patient_kfold(&p, 4).unwrap();
        assert_eq!(folds.len(), 4);
        for (kept, held) in &folds {
            assert_eq!(held.len(), 1);
            assert_eq!(kept.len(), 3);
        }
    }

    #[test]
    fn processed_csv_has_segment_column() {
        let s = series_of_len(3);
        let mut buf = Vec::new();
        write_processed_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("timestamp,glucose,insulin,cho,segment_id\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(",0"));
    }
}
