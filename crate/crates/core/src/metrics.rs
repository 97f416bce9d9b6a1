//! Accuracy metrics (RMSE, MAPE, time lag) and clinical acceptability
//! (CG-EGA: point grid + rate grid combined into AP/BE/EP labels).
//!
//! The point grid (P-EGA) uses the Clarke error-grid geometry with
//! rate-dependent boundary expansion of the A and B zones: when the reference
//! glucose falls at 1-2 mg/dL/min the upper limits are raised by 10 mg/dL (20
//! beyond 2 mg/dL/min), and symmetrically the lower limits drop when it rises.
//! The rate grid (R-EGA) classifies (reference rate, predicted rate) pairs.
//! Per glycemic region, (P zone, R zone) pairs combine into accurate
//! prediction (AP), benign error (BE), or erroneous prediction (EP):
//! gross point errors (C/D/E, or any non-A point zone in hypoglycemia) and
//! gross rate errors (uE/lE) are erroneous; benign rate errors (C/D) with an
//! accurate point are benign, except in hypoglycemia where only rate errors
//! on the low side (lC/lD/lE) are benign and high-side errors mask the hypo.
//! Points exactly on a zone edge classify into the more accurate zone.

use crate::error::{Error, Result};
use crate::pipeline::SampleWindow;
use std::io::Write;

pub const STEP_MINUTES: f64 = 5.0;

/// Aligned true/predicted glucose values (mg/dL) at 5-min spacing over one
/// contiguous segment.
#[derive(Clone, Debug, Default)]
pub struct PredictionTrack {
    pub truth: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl PredictionTrack {
    pub fn new(truth: Vec<f64>, predicted: Vec<f64>) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Contract(format!(
                "track length mismatch: {} vs {}",
                truth.len(),
                predicted.len()
            )));
        }
        Ok(PredictionTrack { truth, predicted })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

pub fn rmse(tracks: &[PredictionTrack]) -> Result<f64> {
    let mut sq = 0.0;
    let mut n = 0usize;
    for t in tracks {
        for (a, b) in t.truth.iter().zip(&t.predicted) {
            sq += (a - b) * (a - b);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Contract("rmse over empty track".into()));
    }
    Ok((sq / n as f64).sqrt())
}

/// Mean absolute percentage error, in percent.
pub fn mape(tracks: &[PredictionTrack]) -> Result<f64> {
    let mut acc = 0.0;
    let mut n = 0usize;
    for t in tracks {
        for (a, b) in t.truth.iter().zip(&t.predicted) {
            if *a <= 0.0 {
                return Err(Error::Numeric(format!(
                    "MAPE undefined for non-positive true value {}",
                    a
                )));
            }
            acc += ((a - b) / a).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Contract("mape over empty track".into()));
    }
    Ok(100.0 * acc / n as f64)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Numeric(
            "correlation undefined for constant signal".into(),
        ));
    }
    Ok(cov / (va * vb).sqrt())
}

/// Time lag in minutes: 5 times the shift (prediction moved earlier) that
/// maximizes the correlation with the true series. Ties take the smallest
/// shift.
pub fn time_lag(track: &PredictionTrack, max_shift: usize) -> Result<f64> {
    let n = track.len();
    if n <= max_shift + 2 {
        return Err(Error::Contract(format!(
            "track of {} points too short for max shift {}",
            n, max_shift
        )));
    }
    let mut best_s = 0usize;
    let mut best_corr = f64::NEG_INFINITY;
    for s in 0..=max_shift {
        let corr = pearson(&track.truth[..n - s], &track.predicted[s..])?;
        if corr > best_corr {
            best_corr = corr;
            best_s = s;
        }
    }
    Ok(best_s as f64 * STEP_MINUTES)
}

// --- CG-EGA ------------------------------------------------------------

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PZone {
    A,
    B,
    C,
    D,
    E,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
#[allow(clippy::upper_case_acronyms)]
pub enum RZone {
    A,
    B,
    UC,
    LC,
    UD,
    LD,
    UE,
    LE,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Region {
    Hypo,
    Eu,
    Hyper,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Label {
    Ap,
    Be,
    Ep,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct CgEgaOutcome {
    pub p_zone: PZone,
    pub r_zone: RZone,
    pub region: Region,
    pub label: Label,
}

/// Rate-dependent boundary expansion: (upper, lower) in mg/dL.
fn expansion(true_rate: f64) -> (f64, f64) {
    let amount = if true_rate.abs() <= 1.0 {
        0.0
    } else if true_rate.abs() <= 2.0 {
        10.0
    } else {
        20.0
    };
    if true_rate < -1.0 {
        (amount, 0.0) // falling: raise upper limits
    } else if true_rate > 1.0 {
        (0.0, amount) // rising: drop lower limits
    } else {
        (0.0, 0.0)
    }
}

/// Point error grid with rate-dependent expansion. `t` true, `p` predicted,
/// both mg/dL; `true_rate` in mg/dL/min.
pub fn p_ega(t: f64, p: f64, true_rate: f64) -> PZone {
    let (up, lo) = expansion(true_rate);
    if (t <= 70.0 && p <= 70.0 + up) || (p >= 0.8 * t - lo && p <= 1.2 * t + up) {
        PZone::A
    } else if (t >= 180.0 && p <= 70.0 - lo) || (t <= 70.0 && p >= 180.0 + up) {
        PZone::E
    } else if (t >= 70.0 && p >= t + 110.0 + up)
        || ((130.0..=180.0).contains(&t) && p <= 7.0 / 5.0 * t - 182.0 - lo)
    {
        PZone::C
    } else if (t >= 240.0 && p > 70.0 - lo && p <= 180.0 - lo) || (t <= 70.0 && p < 180.0 + up) {
        PZone::D
    } else {
        PZone::B
    }
}

/// Rate error grid over (true rate, predicted rate) in mg/dL/min.
pub fn r_ega(true_rate: f64, pred_rate: f64) -> RZone {
    let (dt, dp) = (true_rate, pred_rate);
    // accurate: within 1 mg/dL/min, or within a factor of two in the same
    // direction (the band widens at large rates)
    let same_dir = dt * dp > 0.0;
    let within_factor_two =
        same_dir && dt.abs().min(dp.abs()) >= dt.abs().max(dp.abs()) / 2.0;
    if (dp - dt).abs() <= 1.0 || within_factor_two {
        RZone::A
    } else if dp >= 1.0 && dt <= -1.0 {
        RZone::UE
    } else if dp <= -1.0 && dt >= 1.0 {
        RZone::LE
    } else if (-1.0..=1.0).contains(&dt) && dp > dt + 2.0 {
        RZone::UC
    } else if (-1.0..=1.0).contains(&dt) && dp < dt - 2.0 {
        RZone::LC
    } else if (-1.0..=1.0).contains(&dp) && dt < -1.0 {
        RZone::UD
    } else if (-1.0..=1.0).contains(&dp) && dt > 1.0 {
        RZone::LD
    } else {
        RZone::B
    }
}

pub fn region_of(true_value: f64) -> Region {
    if true_value < 70.0 {
        Region::Hypo
    } else if true_value <= 180.0 {
        Region::Eu
    } else {
        Region::Hyper
    }
}

fn combine(p: PZone, r: RZone, region: Region) -> Label {
    use Label::*;
    use RZone as R;
    let rate_ok = matches!(r, R::A | R::B);
    match region {
        Region::Hypo => {
            if p != PZone::A {
                Ep
            } else if rate_ok {
                Ap
            } else if matches!(r, R::LC | R::LD | R::LE) {
                // low-side rate errors keep the hypo visible
                Be
            } else {
                Ep
            }
        }
        Region::Eu | Region::Hyper => {
            let point_ok = matches!(p, PZone::A | PZone::B);
            if !point_ok {
                Ep
            } else if rate_ok {
                Ap
            } else if matches!(r, R::UC | R::LC | R::UD | R::LD) {
                Be
            } else {
                Ep
            }
        }
    }
}

/// Classifies one (true, predicted, true rate, predicted rate) tuple.
pub fn classify_point(t: f64, p: f64, true_rate: f64, pred_rate: f64) -> CgEgaOutcome {
    let p_zone = p_ega(t, p, true_rate);
    let r_zone = r_ega(true_rate, pred_rate);
    let region = region_of(t);
    CgEgaOutcome {
        p_zone,
        r_zone,
        region,
        label: combine(p_zone, r_zone, region),
    }
}

/// AP/BE/EP percentages over classified points, plus per-region tallies.
#[derive(Clone, Debug, Default)]
pub struct CgEgaSummary {
    pub ap_pct: f64,
    pub be_pct: f64,
    pub ep_pct: f64,
    /// (region, label) counts in Hypo/Eu/Hyper x AP/BE/EP order.
    pub region_counts: [[usize; 3]; 3],
    pub classified: usize,
    /// Points without a predecessor (no rate available).
    pub excluded: usize,
}

/// Runs CG-EGA over tracks. Rates are 5-min first differences; the first
/// point of each track has no rate and is excluded (counted separately).
pub fn cg_ega(tracks: &[PredictionTrack]) -> Result<(Vec<CgEgaOutcome>, CgEgaSummary)> {
    let mut outcomes = Vec::new();
    let mut summary = CgEgaSummary::default();
    for track in tracks {
        if track.is_empty() {
            continue;
        }
        summary.excluded += 1; // first point of the segment
        for i in 1..track.len() {
            let true_rate = (track.truth[i] - track.truth[i - 1]) / STEP_MINUTES;
            let pred_rate = (track.predicted[i] - track.predicted[i - 1]) / STEP_MINUTES;
            let outcome = classify_point(track.truth[i], track.predicted[i], true_rate, pred_rate);
            let r = match outcome.region {
                Region::Hypo => 0,
                Region::Eu => 1,
                Region::Hyper => 2,
            };
            let l = match outcome.label {
                Label::Ap => 0,
                Label::Be => 1,
                Label::Ep => 2,
            };
            summary.region_counts[r][l] += 1;
            outcomes.push(outcome);
        }
    }
    summary.classified = outcomes.len();
    if summary.classified == 0 {
        return Err(Error::Contract(
            "cg_ega needs at least one track with 2+ points".into(),
        ));
    }
    let total = summary.classified as f64;
    let count_label = |l: usize| {
        summary.region_counts.iter().map(|r| r[l]).sum::<usize>() as f64
    };
    summary.ap_pct = 100.0 * count_label(0) / total;
    summary.be_pct = 100.0 * count_label(1) / total;
    summary.ep_pct = 100.0 * count_label(2) / total;
    Ok((outcomes, summary))
}

// --- full evaluation -----------------------------------------------------

#[derive(Clone, Copy, Debug, Default)]
pub struct MetricValues {
    pub rmse: f64,
    pub mape: f64,
    pub tl: f64,
    pub ap: f64,
    pub be: f64,
    pub ep: f64,
}

#[derive(Clone, Debug)]
pub struct PatientMetrics {
    pub patient_id: String,
    pub values: MetricValues,
}

#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub per_patient: Vec<PatientMetrics>,
    pub mean: MetricValues,
    pub std: MetricValues,
}

/// Groups aligned (window, prediction-in-mg/dL) pairs into contiguous tracks,
/// one per run of consecutive window indices within a patient segment.
pub fn build_tracks(
    windows: &[SampleWindow],
    predictions_mgdl: &[f64],
) -> Result<Vec<(String, PredictionTrack)>> {
    if windows.len() != predictions_mgdl.len() {
        return Err(Error::Contract(format!(
            "{} windows vs {} predictions",
            windows.len(),
            predictions_mgdl.len()
        )));
    }
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by(|&a, &b| {
        let wa = &windows[a];
        let wb = &windows[b];
        (&wa.patient_id, wa.segment, wa.t_index).cmp(&(&wb.patient_id, wb.segment, wb.t_index))
    });
    let mut tracks: Vec<(String, PredictionTrack)> = Vec::new();
    let mut prev: Option<(&str, usize, usize)> = None;
    for &i in &order {
        let w = &windows[i];
        let contiguous = matches!(
            prev,
            Some((pid, seg, t)) if pid == w.patient_id && seg == w.segment && t + 1 == w.t_index
        );
        if !contiguous {
            tracks.push((w.patient_id.clone(), PredictionTrack::default()));
        }
        let track = &mut tracks.last_mut().unwrap().1;
        track.truth.push(w.y);
        track.predicted.push(predictions_mgdl[i]);
        prev = Some((&w.patient_id, w.segment, w.t_index));
    }
    Ok(tracks)
}

/// Per-patient metrics plus population mean and standard deviation.
/// Predictions must already be in mg/dL.
pub fn evaluate(
    windows: &[SampleWindow],
    predictions_mgdl: &[f64],
    max_shift: usize,
) -> Result<MetricsReport> {
    let tracks = build_tracks(windows, predictions_mgdl)?;
    if tracks.is_empty() {
        return Err(Error::Contract("evaluate on empty test set".into()));
    }
    let mut patient_ids: Vec<String> = tracks.iter().map(|(id, _)| id.clone()).collect();
    patient_ids.dedup();

    let mut per_patient = Vec::new();
    for pid in &patient_ids {
        let own: Vec<PredictionTrack> = tracks
            .iter()
            .filter(|(id, _)| id == pid)
            .map(|(_, t)| t.clone())
            .collect();
        let rmse_v = rmse(&own)?;
        let mape_v = mape(&own)?;
        // length-weighted mean lag over segments long enough to search
        let mut tl_acc = 0.0;
        let mut tl_weight = 0usize;
        for t in &own {
            if t.len() > max_shift + 2 {
                if let Ok(tl) = time_lag(t, max_shift) {
                    tl_acc += tl * t.len() as f64;
                    tl_weight += t.len();
                }
            }
        }
        let tl_v = if tl_weight > 0 {
            tl_acc / tl_weight as f64
        } else {
            0.0
        };
        let (_, cg) = cg_ega(&own)?;
        per_patient.push(PatientMetrics {
            patient_id: pid.clone(),
            values: MetricValues {
                rmse: rmse_v,
                mape: mape_v,
                tl: tl_v,
                ap: cg.ap_pct,
                be: cg.be_pct,
                ep: cg.ep_pct,
            },
        });
    }

    let n = per_patient.len() as f64;
    let mut mean = MetricValues::default();
    for p in &per_patient {
        mean.rmse += p.values.rmse / n;
        mean.mape += p.values.mape / n;
        mean.tl += p.values.tl / n;
        mean.ap += p.values.ap / n;
        mean.be += p.values.be / n;
        mean.ep += p.values.ep / n;
    }
    let mut std = MetricValues::default();
    for p in &per_patient {
        std.rmse += (p.values.rmse - mean.rmse).powi(2) / n;
        std.mape += (p.values.mape - mean.mape).powi(2) / n;
        std.tl += (p.values.tl - mean.tl).powi(2) / n;
        std.ap += (p.values.ap - mean.ap).powi(2) / n;
        std.be += (p.values.be - mean.be).powi(2) / n;
        std.ep += (p.values.ep - mean.ep).powi(2) / n;
    }
    std.rmse = std.rmse.sqrt();
    std.mape = std.mape.sqrt();
    std.tl = std.tl.sqrt();
    std.ap = std.ap.sqrt();
    std.be = std.be.sqrt();
    std.ep = std.ep.sqrt();

    Ok(MetricsReport {
        per_patient,
        mean,
        std,
    })
}

fn write_values<W: Write>(out: &mut W, id: &str, v: &MetricValues) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        id, v.rmse, v.mape, v.tl, v.ap, v.be, v.ep
    )
}

pub fn write_report_csv<W: Write>(report: &MetricsReport, out: &mut W) -> Result<()> {
    writeln!(out, "patient,rmse,mape,tl,ap,be,ep")?;
    for p in &report.per_patient {
        write_values(out, &p.patient_id, &p.values)?;
    }
    write_values(out, "mean", &report.mean)?;
    write_values(out, "std", &report.std)?;
    Ok(())
}

pub fn write_report_json<W: Write>(report: &MetricsReport, out: &mut W) -> Result<()> {
    let obj = |v: &MetricValues| {
        format!(
            "{{\"rmse\":{:.6},\"mape\":{:.6},\"tl\":{:.6},\"ap\":{:.6},\"be\":{:.6},\"ep\":{:.6}}}",
            v.rmse, v.mape, v.tl, v.ap, v.be, v.ep
        )
    };
    writeln!(out, "{{")?;
    writeln!(out, "  \"per_patient\": {{")?;
    for (i, p) in report.per_patient.iter().enumerate() {
        let comma = if i + 1 < report.per_patient.len() { "," } else { "" };
        writeln!(out, "    \"{}\": {}{}", p.patient_id, obj(&p.values), comma)?;
    }
    writeln!(out, "  }},")?;
    writeln!(out, "  \"mean\": {},", obj(&report.mean))?;
    writeln!(out, "  \"std\": {}", obj(&report.std))?;
    writeln!(out, "}}")?;
    Ok(())
}

/// Per-point CG-EGA labels for audit.
pub fn write_cgega_points_csv<W: Write>(outcomes: &[CgEgaOutcome], out: &mut W) -> Result<()> {
    writeln!(out, "p_zone,r_zone,region,label")?;
    for o in outcomes {
        writeln!(
            out,
            "{:?},{:?},{:?},{}",
            o.p_zone,
            o.r_zone,
            o.region,
            match o.label {
                Label::Ap => "AP",
                Label::Be => "BE",
                Label::Ep => "EP",
            }
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(truth: Vec<f64>, predicted: Vec<f64>) -> PredictionTrack {
        PredictionTrack::new(truth, predicted).unwrap()
    }

    #[test]
    fn perfect_prediction_zero_errors() {
        let t = track(vec![100.0, 120.0, 90.0], vec![100.0, 120.0, 90.0]);
        assert_eq!(rmse(std::slice::from_ref(&t)).unwrap(), 0.0);
        assert_eq!(mape(std::slice::from_ref(&t)).unwrap(), 0.0);
    }

    #[test]
    fn rmse_mape_hand_example() {
        let t = track(vec![100.0, 100.0], vec![103.0, 96.0]);
        let r = rmse(std::slice::from_ref(&t)).unwrap();
        assert!((r - (25.0f64 / 2.0).sqrt()).abs() < 1e-12);
        assert!((r - 3.5355339059327378).abs() < 1e-12);
        assert!((mape(std::slice::from_ref(&t)).unwrap() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_rmse_is_offset() {
        let truth: Vec<f64> = (0..20).map(|i| 100.0 + i as f64).collect();
        let pred: Vec<f64> = truth.iter().map(|v| v + 7.0).collect();
        let t = track(truth, pred);
        assert!((rmse(std::slice::from_ref(&t)).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_track_is_contract_error() {
        assert!(matches!(rmse(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn mape_rejects_nonpositive_truth() {
        let t = track(vec![0.0], vec![1.0]);
        assert!(matches!(
            mape(std::slice::from_ref(&t)),
            Err(Error::Numeric(_))
        ));
    }

    fn wave(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| 120.0 + 40.0 * (i as f64 * 0.37).sin() + 10.0 * (i as f64 * 0.11).cos())
            .collect()
    }

    #[test]
    fn time_lag_zero_for_identical_and_offset() {
        let truth = wave(60);
        let t = track(truth.clone(), truth.clone());
        assert_eq!(time_lag(&t, 6).unwrap(), 0.0);
        let offset: Vec<f64> = truth.iter().map(|v| v + 13.0).collect();
        let t = track(truth, offset);
        assert_eq!(time_lag(&t, 6).unwrap(), 0.0);
    }

    #[test]
    fn time_lag_recovers_constructed_shifts() {
        let base = wave(80);
        for s in [0usize, 1, 3, 6] {
            // prediction delayed by s steps
            let truth = base[s..].to_vec();
            let pred = base[..base.len() - s].to_vec();
            let t = track(truth, pred);
            assert_eq!(time_lag(&t, 6).unwrap(), s as f64 * 5.0, "shift {}", s);
        }
    }

    #[test]
    fn time_lag_constant_signal_is_domain_error() {
        let t = track(vec![100.0; 20], vec![100.0; 20]);
        assert!(matches!(time_lag(&t, 6), Err(Error::Numeric(_))));
    }

    #[test]
    fn time_lag_short_track_is_contract_error() {
        let t = track(wave(8), wave(8));
        assert!(matches!(time_lag(&t, 6), Err(Error::Contract(_))));
    }

    /// Hand-labeled golden set: (true, pred, true rate, pred rate) ->
    /// (P zone, R zone, region, label). Labels were worked out by hand from
    /// the zone geometry documented at the top of this module.
    #[test]
    fn cg_ega_golden_set() {
        use Label::*;
        use PZone as P;
        use RZone as R;
        use Region::*;
        let cases: Vec<(f64, f64, f64, f64, PZone, RZone, Region, Label)> = vec![
            (100.0, 100.0, 0.0, 0.0, P::A, R::A, Eu, Ap),
            (60.0, 200.0, -2.0, 2.0, P::E, R::UE, Hypo, Ep),
            (100.0, 125.0, 0.0, 0.0, P::B, R::A, Eu, Ap),
            (100.0, 122.0, 1.0, 0.5, P::B, R::A, Eu, Ap),
            (100.0, 122.0, 1.5, 1.2, P::B, R::A, Eu, Ap),
            (100.0, 75.0, 1.5, 1.4, P::A, R::A, Eu, Ap),
            (200.0, 100.0, 0.0, 0.0, P::B, R::A, Hyper, Ap),
            (250.0, 100.0, 0.0, 0.0, P::D, R::A, Hyper, Ep),
            (250.0, 300.0, 0.0, 0.0, P::A, R::A, Hyper, Ap),
            (65.0, 65.0, 0.0, 0.0, P::A, R::A, Hypo, Ap),
            (65.0, 100.0, 0.0, 0.0, P::D, R::A, Hypo, Ep),
            (65.0, 65.0, -1.5, -1.2, P::A, R::A, Hypo, Ap),
            (65.0, 62.0, 0.0, -2.5, P::A, R::LC, Hypo, Be),
            (65.0, 62.0, 0.0, 2.5, P::A, R::UC, Hypo, Ep),
            (65.0, 64.0, -2.0, 0.0, P::A, R::UD, Hypo, Ep),
            (65.0, 64.0, 2.0, 0.0, P::A, R::LD, Hypo, Be),
            (65.0, 60.0, -2.0, 1.5, P::A, R::UE, Hypo, Ep),
            (65.0, 60.0, 2.0, -1.5, P::A, R::LE, Hypo, Be),
            (100.0, 100.0, 0.0, 2.5, P::A, R::UC, Eu, Be),
            (100.0, 100.0, 0.0, -2.5, P::A, R::LC, Eu, Be),
            (100.0, 102.0, -1.8, 0.0, P::A, R::UD, Eu, Be),
            (100.0, 102.0, 1.8, 0.0, P::A, R::LD, Eu, Be),
            (100.0, 95.0, -1.5, 1.2, P::A, R::UE, Eu, Ep),
            (100.0, 95.0, 1.5, -1.3, P::A, R::LE, Eu, Ep),
            (150.0, 260.0, 0.0, 0.0, P::C, R::A, Eu, Ep),
            (150.0, 25.0, 0.0, 0.0, P::C, R::A, Eu, Ep),
            (200.0, 140.0, 3.0, 2.8, P::A, R::A, Hyper, Ap),
            (200.0, 140.0, 0.0, 0.0, P::B, R::A, Hyper, Ap),
            (190.0, 185.0, -2.5, -2.3, P::A, R::A, Hyper, Ap),
            (190.0, 185.0, 0.0, -2.4, P::A, R::LC, Hyper, Be),
            (250.0, 80.0, 1.2, 0.8, P::D, R::A, Hyper, Ep),
            (40.0, 190.0, 0.0, 0.0, P::E, R::A, Hypo, Ep),
            (180.0, 180.0, 0.0, 0.0, P::A, R::A, Eu, Ap),
            (70.0, 70.0, 0.0, 0.0, P::A, R::A, Eu, Ap),
            (100.0, 119.9, -1.2, -0.2, P::A, R::A, Eu, Ap),
        ];
        assert!(cases.len() >= 30);
        for (t, p, dt, dp, pz, rz, reg, label) in cases {
            let out = classify_point(t, p, dt, dp);
            assert_eq!(out.p_zone, pz, "P zone for ({}, {}, {}, {})", t, p, dt, dp);
            assert_eq!(out.r_zone, rz, "R zone for ({}, {}, {}, {})", t, p, dt, dp);
            assert_eq!(out.region, reg, "region for ({}, {}, {}, {})", t, p, dt, dp);
            assert_eq!(out.label, label, "label for ({}, {}, {}, {})", t, p, dt, dp);
        }
    }

    #[test]
    fn cg_ega_partition_sums_to_100() {
        let truth = wave(50);
        let pred: Vec<f64> = truth.iter().enumerate().map(|(i, v)| {
            v + 15.0 * ((i as f64 * 0.73).sin())
        }).collect();
        let t = track(truth, pred);
        let (outcomes, summary) = cg_ega(std::slice::from_ref(&t)).unwrap();
        assert_eq!(summary.classified, 49);
        assert_eq!(summary.excluded, 1);
        assert_eq!(outcomes.len(), 49);
        assert!((summary.ap_pct + summary.be_pct + summary.ep_pct - 100.0).abs() < 1e-9);
        let region_total: usize = summary
            .region_counts
            .iter()
            .flat_map(|r| r.iter())
            .sum();
        assert_eq!(region_total, summary.classified);
    }

    #[test]
    fn rmse_invariant_under_pair_permutation() {
        let truth = wave(30);
        let pred: Vec<f64> = truth.iter().map(|v| v * 1.03).collect();
        let a = track(truth.clone(), pred.clone());
        let mut pairs: Vec<(f64, f64)> = truth.into_iter().zip(pred).collect();
        pairs.reverse();
        let (t2, p2): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let b = track(t2, p2);
        assert!(
            (rmse(std::slice::from_ref(&a)).unwrap() - rmse(std::slice::from_ref(&b)).unwrap())
                .abs()
                < 1e-12
        );
    }
}
