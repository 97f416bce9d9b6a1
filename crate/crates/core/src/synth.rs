//! Deterministic toy glucose simulator.
//!
//! Glucose is a basal level plus linear impulse responses to meals (rise then
//! decay) and insulin doses (delayed fall then recovery), plus seeded Gaussian
//! sensor noise. No physiological fidelity is intended; the point is learnable
//! structure with known causal lags, so interpretation profiles have a ground
//! truth to be checked against.

use crate::error::{Error, Result};
use crate::pipeline::{PatientSeries, Segment, STEP_MINUTES};
use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub seed: u64,
    pub days: u32,
    /// Baseline glucose, mg/dL.
    pub basal: f64,
    /// Mean meal times as minutes since midnight, jittered per day.
    pub meal_times_min: Vec<f64>,
    /// Uniform jitter applied to each meal time, minutes.
    pub meal_jitter_min: f64,
    /// CHO size range per meal, grams.
    pub cho_grams: (f64, f64),
    /// Peak glucose rise per gram of CHO, mg/dL/g.
    pub cho_gain: f64,
    /// Time constant of the CHO impulse response, minutes.
    pub cho_time_constant_min: f64,
    /// Peak glucose drop per insulin unit, mg/dL/unit.
    pub insulin_gain: f64,
    /// Time constant of the insulin impulse response, minutes.
    pub insulin_time_constant_min: f64,
    /// Delay before insulin starts acting, minutes.
    pub insulin_delay_min: f64,
    /// Insulin units dosed per gram of CHO at each meal.
    pub insulin_per_gram: f64,
    /// Relative jitter of the per-meal dose ratio, so insulin carries
    /// information of its own instead of mirroring CHO exactly.
    pub dose_jitter: f64,
    /// CGM noise standard deviation, mg/dL.
    pub noise_std: f64,
    /// Stationary standard deviation of the slow basal drift, mg/dL. The
    /// drift is unobservable through the event channels, so the glucose
    /// history is the only way to track it.
    pub drift_std: f64,
    /// Mean-reversion time constant of the basal drift, minutes.
    pub drift_time_constant_min: f64,
    /// Hard lower bound on simulated glucose, mg/dL.
    pub floor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            days: 31,
            basal: 140.0,
            meal_times_min: vec![7.5 * 60.0, 12.5 * 60.0, 19.0 * 60.0],
            meal_jitter_min: 40.0,
            cho_grams: (30.0, 80.0),
            cho_gain: 1.0,
            cho_time_constant_min: 20.0,
            insulin_gain: 3.0,
            insulin_time_constant_min: 25.0,
            insulin_delay_min: 10.0,
            insulin_per_gram: 0.12,
            dose_jitter: 0.35,
            noise_std: 2.0,
            drift_std: 15.0,
            drift_time_constant_min: 240.0,
            floor: 40.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::Contract("days must be positive".into()));
        }
        if self.cho_gain < 0.0 || self.insulin_gain < 0.0 || self.insulin_per_gram < 0.0 {
            return Err(Error::Contract("gains must be non-negative".into()));
        }
        if self.cho_time_constant_min <= 0.0 || self.insulin_time_constant_min <= 0.0 {
            return Err(Error::Contract("time constants must be positive".into()));
        }
        if self.noise_std < 0.0 || self.meal_jitter_min < 0.0 || self.insulin_delay_min < 0.0 {
            return Err(Error::Contract("negative noise/jitter/delay".into()));
        }
        if !(0.0..1.0).contains(&self.dose_jitter) {
            return Err(Error::Contract("dose jitter must be in [0, 1)".into()));
        }
        if self.drift_std < 0.0 || self.drift_time_constant_min <= 0.0 {
            return Err(Error::Contract("bad drift parameters".into()));
        }
        if self.basal <= self.floor {
            return Err(Error::Contract("basal must exceed the glucose floor".into()));
        }
        Ok(())
    }
}

/// Normalized impulse kernel: 0 for tau < 0, peak 1 at tau = T, then decay.
pub fn impulse_kernel(tau_min: f64, time_constant_min: f64) -> f64 {
    if tau_min < 0.0 {
        return 0.0;
    }
    let s = tau_min / time_constant_min;
    s * (1.0 - s).exp()
}

struct Event {
    step: usize,
    grams: f64,
    units: f64,
}

/// Simulates one patient; deterministic per seed, grid-aligned output.
pub fn simulate(patient_id: &str, config: &SimConfig) -> Result<PatientSeries> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let steps_per_day = (24 * 60 / STEP_MINUTES) as usize;
    let n = config.days as usize * steps_per_day;

    let mut events = Vec::new();
    for day in 0..config.days as usize {
        for meal in &config.meal_times_min {
            let jitter = if config.meal_jitter_min > 0.0 {
                rng.gen_range(-config.meal_jitter_min..config.meal_jitter_min)
            } else {
                0.0
            };
            let minute = day as f64 * 24.0 * 60.0 + meal + jitter;
            let step = (minute / STEP_MINUTES as f64).round() as usize;
            if step >= n {
                continue;
            }
            let grams = rng.gen_range(config.cho_grams.0..=config.cho_grams.1);
            let ratio = if config.dose_jitter > 0.0 {
                1.0 + rng.gen_range(-config.dose_jitter..config.dose_jitter)
            } else {
                1.0
            };
            events.push(Event {
                step,
                grams,
                units: grams * config.insulin_per_gram * ratio,
            });
        }
    }

    let noise = Normal::new(0.0, config.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Contract(e.to_string()))?;
    // slow mean-reverting (AR(1)) drift of the basal level
    let mut drift = vec![0.0; n];
    if config.drift_std > 0.0 {
        let rho = (-(STEP_MINUTES as f64) / config.drift_time_constant_min).exp();
        let innovation = Normal::new(0.0, config.drift_std * (1.0 - rho * rho).sqrt())
            .map_err(|e| Error::Contract(e.to_string()))?;
        let mut d = config.drift_std * rng.sample::<f64, _>(rand_distr::StandardNormal);
        for slot in drift.iter_mut() {
            *slot = d;
            d = rho * d + innovation.sample(&mut rng);
        }
    }
    let mut glucose = vec![0.0; n];
    let mut insulin = vec![0.0; n];
    let mut cho = vec![0.0; n];
    for e in &events {
        insulin[e.step] += e.units;
        cho[e.step] += e.grams;
    }
    // impulse responses die out; truncate the convolution window
    let horizon_steps = ((8.0
        * config
            .cho_time_constant_min
            .max(config.insulin_time_constant_min)
        + config.insulin_delay_min)
        / STEP_MINUTES as f64) as usize;
    for (t, g) in glucose.iter_mut().enumerate() {
        let mut v = config.basal + drift[t];
        let lo = t.saturating_sub(horizon_steps);
        for e in &events {
            if e.step < lo || e.step > t {
                continue;
            }
            let tau = (t - e.step) as f64 * STEP_MINUTES as f64;
            v += config.cho_gain * e.grams * impulse_kernel(tau, config.cho_time_constant_min);
            v -= config.insulin_gain
                * e.units
                * impulse_kernel(tau - config.insulin_delay_min, config.insulin_time_constant_min);
        }
        if config.noise_std > 0.0 {
            v += noise.sample(&mut rng);
        }
        *g = v.max(config.floor);
    }

    let start = NaiveDateTime::parse_from_str("2025-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S")
        .expect("static timestamp");
    Ok(PatientSeries {
        patient_id: patient_id.to_string(),
        step_minutes: STEP_MINUTES,
        segments: vec![Segment {
            start,
            glucose,
            insulin,
            cho,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{ingest_reader, write_ingest_csv, PipelineConfig};

    #[test]
    fn zero_gains_zero_noise_is_constant_basal() {
        let config = SimConfig {
            cho_gain: 0.0,
            insulin_gain: 0.0,
            noise_std: 0.0,
            drift_std: 0.0,
            days: 1,
            ..SimConfig::default()
        };
        let s = simulate("p", &config).unwrap();
        assert!(s.segments[0].glucose.iter().all(|g| *g == 140.0));
    }

    #[test]
    fn single_cho_event_peaks_then_returns_to_basal() {
        let config = SimConfig {
            days: 1,
            meal_times_min: vec![6.0 * 60.0],
            meal_jitter_min: 0.0,
            cho_grams: (40.0, 40.0),
            cho_gain: 0.75, // peak 30 mg/dL
            cho_time_constant_min: 40.0,
            insulin_gain: 0.0,
            insulin_per_gram: 0.0,
            noise_std: 0.0,
            drift_std: 0.0,
            ..SimConfig::default()
        };
        let s = simulate("p", &config).unwrap();
        let g = &s.segments[0].glucose;
        let event_step = (6 * 60 / STEP_MINUTES) as usize;
        let peak_step = (0..g.len()).max_by(|a, b| g[*a].total_cmp(&g[*b])).unwrap();
        assert!(peak_step > event_step);
        // exact impulse response at the peak step
        let tau = (peak_step - event_step) as f64 * STEP_MINUTES as f64;
        let expect = 140.0 + 0.75 * 40.0 * impulse_kernel(tau, 40.0);
        assert!((g[peak_step] - expect).abs() < 1e-12);
        // back within 5% of basal within 4 time constants
        let back = event_step + (4.0 * 40.0 / STEP_MINUTES as f64) as usize;
        assert!((g[back] - 140.0).abs() < 0.05 * 140.0);
    }

    #[test]
    fn same_seed_bit_identical() {
        let config = SimConfig {
            days: 2,
            seed: 42,
            ..SimConfig::default()
        };
        let a = simulate("p", &config).unwrap();
        let b = simulate("p", &config).unwrap();
        assert_eq!(a.segments[0].glucose, b.segments[0].glucose);
        assert_eq!(a.segments[0].insulin, b.segments[0].insulin);
    }

    #[test]
    fn floor_is_enforced() {
        let config = SimConfig {
            days: 1,
            insulin_gain: 100.0,
            ..SimConfig::default()
        };
        let s = simulate("p", &config).unwrap();
        assert!(s.segments[0].glucose.iter().all(|g| *g >= 40.0));
    }

    #[test]
    fn generated_csv_round_trips_through_ingest() {
        let config = SimConfig {
            days: 1,
            seed: 3,
            ..SimConfig::default()
        };
        let s = simulate("p7", &config).unwrap();
        let mut buf = Vec::new();
        write_ingest_csv(&s, &mut buf).unwrap();
        let re = ingest_reader(buf.as_slice(), "p7", &PipelineConfig::default()).unwrap();
        assert_eq!(re.segments.len(), 1);
        assert_eq!(re.segments[0].glucose.len(), s.segments[0].glucose.len());
        for (a, b) in re.segments[0].glucose.iter().zip(&s.segments[0].glucose) {
            assert!((a - b).abs() < 1e-6 + 1e-9 * b.abs());
        }
        for (a, b) in re.segments[0].cho.iter().zip(&s.segments[0].cho) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_config_is_contract_error() {
        let bad = SimConfig {
            cho_time_constant_min: 0.0,
            ..SimConfig::default()
        };
        assert!(matches!(simulate("p", &bad), Err(Error::Contract(_))));
    }
}
