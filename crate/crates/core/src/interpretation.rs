//! Exact per-input contribution decomposition of RETAIN predictions and the
//! dataset-level aggregations (max, event-conditioned mean, no-event mean).
//!
//! The prediction is an exact sum of one contribution per input value plus the
//! output bias:
//!
//!   yhat = sum_{i,j} alpha_i * W (beta_i . W_emb[:, j]) * x[i,j]  +  b
//!
//! so every forward pass can be audited against its own decomposition.

use crate::error::{Error, Result};
use crate::models::{ForwardTrace, RetainParameters};
use crate::tensor::Tensor;
use std::io::Write;

/// Relative tolerance for the decomposition identity check.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// Per-prediction contribution decomposition.
#[derive(Clone, Debug)]
pub struct ContributionMap {
    /// Contribution of each input to the prediction, H x r, in output units.
    pub omega: Tensor,
    /// Output bias term.
    pub bias: f64,
    /// Absolute normalized contributions (sum 1, all >= 0). `None` for the
    /// degenerate all-zero-omega case, where the normalization is 0/0; such
    /// samples are excluded from profile aggregations.
    pub omega_an: Option<Tensor>,
}

/// Raw contribution matrix for given attention weights, without the identity
/// check. Exposed so attention can be held fixed while inputs vary.
pub fn contribution_matrix(
    params: &RetainParameters,
    alphas: &Tensor,
    betas: &Tensor,
    x: &Tensor,
) -> Result<Tensor> {
    let (h_len, r) = (params.dims.history, params.dims.inputs);
    let m = params.dims.embed;
    if x.shape() != [h_len, r] || betas.shape() != [h_len, m] || alphas.shape() != [h_len] {
        return Err(Error::Shape("contribution_matrix: shape mismatch".into()));
    }
    let w = params.w_out.row(0)?;
    let mut omega = Tensor::zeros(vec![h_len, r]);
    for i in 0..h_len {
        let alpha = alphas.data()[i];
        for j in 0..r {
            // W . (beta_i ⊙ W_emb[:, j])
            let mut s = 0.0;
            for k in 0..m {
                s += w.data()[k] * betas.at(i, k) * params.w_emb.at(k, j);
            }
            omega.data_mut()[i * r + j] = alpha * s * x.at(i, j);
        }
    }
    Ok(omega)
}

/// Decomposes the traced prediction into per-input contributions and verifies
/// the reconstruction against the trace.
pub fn contributions(
    params: &RetainParameters,
    trace: &ForwardTrace,
    x: &Tensor,
) -> Result<ContributionMap> {
    let omega = contribution_matrix(params, &trace.alphas, &trace.betas, x)?;
    let bias = params.b_out.item()?;
    let total: f64 = omega.data().iter().sum::<f64>() + bias;
    let residual = (total - trace.prediction).abs() / trace.prediction.abs().max(1.0);
    if residual > IDENTITY_TOLERANCE {
        return Err(Error::Consistency(format!(
            "decomposition residual {:.3e} exceeds {:.0e}; trace and parameters disagree",
            residual, IDENTITY_TOLERANCE
        )));
    }
    let abs_sum: f64 = omega.data().iter().map(|v| v.abs()).sum();
    let omega_an = if abs_sum == 0.0 {
        None
    } else {
        let data = omega.data().iter().map(|v| v.abs() / abs_sum).collect();
        Some(Tensor::new(omega.shape().to_vec(), data)?)
    };
    Ok(ContributionMap {
        omega,
        bias,
        omega_an,
    })
}

/// Aggregate contribution statistic per (signal, history offset).
#[derive(Clone, Debug)]
pub struct ContributionProfile {
    /// H x r statistic over the included samples; `None` when no sample
    /// qualified.
    pub values: Option<Tensor>,
    /// Number of samples included.
    pub count: usize,
}

fn normalized_maps(samples: &[ContributionMap]) -> Vec<&Tensor> {
    samples.iter().filter_map(|s| s.omega_an.as_ref()).collect()
}

/// Elementwise maximum of absolute normalized contributions over a sample set.
pub fn max_contribution_profile(samples: &[ContributionMap]) -> Result<ContributionProfile> {
    if samples.is_empty() {
        return Err(Error::Contract("max profile over empty sample set".into()));
    }
    let maps = normalized_maps(samples);
    Ok(reduce_profile(&maps, Reduce::Max))
}

/// Elementwise mean over a set of normalized maps.
pub fn mean_contribution_profile(samples: &[ContributionMap]) -> Result<ContributionProfile> {
    if samples.is_empty() {
        return Err(Error::Contract("mean profile over empty sample set".into()));
    }
    let maps = normalized_maps(samples);
    Ok(reduce_profile(&maps, Reduce::Mean))
}

enum Reduce {
    Max,
    Mean,
}

fn reduce_profile(maps: &[&Tensor], how: Reduce) -> ContributionProfile {
    let count = maps.len();
    if count == 0 {
        return ContributionProfile {
            values: None,
            count: 0,
        };
    }
    let shape = maps[0].shape().to_vec();
    let mut acc = match how {
        Reduce::Max => vec![f64::NEG_INFINITY; maps[0].len()],
        Reduce::Mean => vec![0.0; maps[0].len()],
    };
    for m in maps {
        for (a, v) in acc.iter_mut().zip(m.data()) {
            match how {
                Reduce::Max => *a = a.max(*v),
                Reduce::Mean => *a += v,
            }
        }
    }
    if let Reduce::Mean = how {
        for a in acc.iter_mut() {
            *a /= count as f64;
        }
    }
    ContributionProfile {
        values: Some(Tensor::new(shape, acc).expect("profile shape")),
        count,
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    Insulin,
    Cho,
}

/// A contribution map together with the event metadata of its sample window:
/// age in steps of the most recent strictly-positive raw insulin / CHO value,
/// `None` if no such event lies inside the window.
#[derive(Clone, Debug)]
pub struct AnnotatedContribution {
    pub map: ContributionMap,
    pub insulin_lag: Option<usize>,
    pub cho_lag: Option<usize>,
}

impl AnnotatedContribution {
    fn lag(&self, event: EventKind) -> Option<usize> {
        match event {
            EventKind::Insulin => self.insulin_lag,
            EventKind::Cho => self.cho_lag,
        }
    }
}

/// Mean profile over samples whose most recent event of the given type is
/// exactly `lag` steps old. Samples carrying both event types are included
/// under each type's grouping.
pub fn event_conditioned_profile(
    samples: &[AnnotatedContribution],
    event: EventKind,
    lag: usize,
) -> ContributionProfile {
    let maps: Vec<&Tensor> = samples
        .iter()
        .filter(|s| s.lag(event) == Some(lag))
        .filter_map(|s| s.map.omega_an.as_ref())
        .collect();
    reduce_profile(&maps, Reduce::Mean)
}

/// One mean profile per lag in `[0, history)`: the evolution of the
/// contributions through time after an event.
pub fn event_evolution(
    samples: &[AnnotatedContribution],
    event: EventKind,
    history: usize,
) -> Vec<ContributionProfile> {
    (0..history)
        .map(|lag| event_conditioned_profile(samples, event, lag))
        .collect()
}

/// Mean profile over samples with no insulin and no CHO event anywhere in the
/// last `window` steps (default 12 = one hour at 5 min).
pub fn no_event_profile(samples: &[AnnotatedContribution], window: usize) -> ContributionProfile {
    let quiet = |lag: Option<usize>| match lag {
        None => true,
        Some(l) => l >= window,
    };
    let maps: Vec<&Tensor> = samples
        .iter()
        .filter(|s| quiet(s.insulin_lag) && quiet(s.cho_lag))
        .filter_map(|s| s.map.omega_an.as_ref())
        .collect();
    reduce_profile(&maps, Reduce::Mean)
}

/// Long-format CSV: `signal,offset_min,value,count`. Offsets run from
/// -(H-1)*5 up to 0 minutes, row H-1 of the profile being "now".
pub fn write_profile_csv<W: Write>(
    profile: &ContributionProfile,
    signals: &[&str],
    step_minutes: i64,
    out: &mut W,
) -> Result<()> {
    writeln!(out, "signal,offset_min,value,count")?;
    let values = match &profile.values {
        Some(v) => v,
        None => return Ok(()),
    };
    let h_len = values.rows()?;
    for (j, name) in signals.iter().enumerate() {
        for i in 0..h_len {
            let offset = -((h_len - 1 - i) as i64) * step_minutes;
            writeln!(
                out,
                "{},{},{:.12e},{}",
                name,
                offset,
                values.at(i, j),
                profile.count
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{retain_forward, ModelDimensions, RetainParameters};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims(h: usize, r: usize, m: usize, p: usize) -> ModelDimensions {
        ModelDimensions {
            inputs: r,
            history: h,
            horizon: 1,
            embed: m,
            hidden: p,
        }
    }

    fn random_input<R: Rng>(h: usize, r: usize, rng: &mut R) -> Tensor {
        Tensor::matrix(h, r, (0..h * r).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn zero_input_gives_zero_contributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let p = RetainParameters::init(dims(4, 3, 2, 2), &mut rng).unwrap();
        let x = Tensor::zeros(vec![4, 3]);
        let trace = retain_forward(&p, &x).unwrap();
        let cm = contributions(&p, &trace, &x).unwrap();
        assert!(cm.omega.data().iter().all(|v| *v == 0.0));
        assert!(cm.omega_an.is_none());
        assert!((trace.prediction - cm.bias).abs() < 1e-12);
    }

    #[test]
    fn single_nonzero_input_owns_the_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = RetainParameters::init(dims(4, 3, 2, 2), &mut rng).unwrap();
        let mut x = Tensor::zeros(vec![4, 3]);
        x.data_mut()[2 * 3 + 1] = 1.7; // i=2, j=1
        let trace = retain_forward(&p, &x).unwrap();
        let cm = contributions(&p, &trace, &x).unwrap();
        assert!((trace.prediction - cm.bias - cm.omega.at(2, 1)).abs() < 1e-12);
        let an = cm.omega_an.unwrap();
        assert!((an.at(2, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_holds_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let p = RetainParameters::init(dims(4, 3, 2, 2), &mut rng).unwrap();
        for _ in 0..200 {
            let x = random_input(4, 3, &mut rng);
            let trace = retain_forward(&p, &x).unwrap();
            let cm = contributions(&p, &trace, &x).unwrap();
            let total: f64 = cm.omega.data().iter().sum::<f64>() + cm.bias;
            assert!(
                (total - trace.prediction).abs() / trace.prediction.abs().max(1.0) < 1e-10
            );
            let an = cm.omega_an.unwrap();
            let s: f64 = an.data().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(an.data().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn mismatched_trace_is_consistency_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let p = RetainParameters::init(dims(4, 3, 2, 2), &mut rng).unwrap();
        let x = random_input(4, 3, &mut rng);
        let other = random_input(4, 3, &mut rng);
        let trace = retain_forward(&p, &x).unwrap();
        assert!(matches!(
            contributions(&p, &trace, &other),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn scale_covariance_at_fixed_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let p = RetainParameters::init(dims(4, 3, 2, 2), &mut rng).unwrap();
        let x = random_input(4, 3, &mut rng);
        let trace = retain_forward(&p, &x).unwrap();
        let omega = contribution_matrix(&p, &trace.alphas, &trace.betas, &x).unwrap();
        let mut x2 = x.clone();
        x2.data_mut()[1 * 3 + 2] *= 2.0;
        let omega2 = contribution_matrix(&p, &trace.alphas, &trace.betas, &x2).unwrap();
        assert_eq!(omega2.at(1, 2), 2.0 * omega.at(1, 2));
        assert_eq!(omega2.at(0, 0), omega.at(0, 0));
    }

    fn synthetic_map<R: Rng>(h: usize, r: usize, rng: &mut R) -> ContributionMap {
        let raw: Vec<f64> = (0..h * r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let abs_sum: f64 = raw.iter().map(|v| v.abs()).sum();
        let an: Vec<f64> = raw.iter().map(|v| v.abs() / abs_sum).collect();
        ContributionMap {
            omega: Tensor::matrix(h, r, raw).unwrap(),
            bias: 0.0,
            omega_an: Some(Tensor::matrix(h, r, an).unwrap()),
        }
    }

    #[test]
    fn max_profile_single_sample_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let m = synthetic_map(3, 2, &mut rng);
        let prof = max_contribution_profile(std::slice::from_ref(&m)).unwrap();
        assert_eq!(prof.count, 1);
        assert_eq!(prof.values.unwrap(), m.omega_an.unwrap());
    }

    #[test]
    fn max_profile_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let maps: Vec<ContributionMap> =
            (0..100).map(|_| synthetic_map(4, 3, &mut rng)).collect();
        let prof = max_contribution_profile(&maps).unwrap();
        let values = prof.values.unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let brute = maps
                    .iter()
                    .map(|m| m.omega_an.as_ref().unwrap().at(i, j))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(values.at(i, j), brute);
            }
        }
    }

    #[test]
    fn empty_sample_set_is_contract_error() {
        assert!(matches!(
            max_contribution_profile(&[]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn event_profile_matches_brute_force_grouping() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let samples: Vec<AnnotatedContribution> = (0..100)
            .map(|_| AnnotatedContribution {
                map: synthetic_map(4, 3, &mut rng),
                insulin_lag: if rng.gen_bool(0.5) {
                    Some(rng.gen_range(0..4))
                } else {
                    None
                },
                cho_lag: if rng.gen_bool(0.5) {
                    Some(rng.gen_range(0..4))
                } else {
                    None
                },
            })
            .collect();

        for lag in 0..4 {
            let prof = event_conditioned_profile(&samples, EventKind::Cho, lag);
            let group: Vec<&AnnotatedContribution> = samples
                .iter()
                .filter(|s| s.cho_lag == Some(lag))
                .collect();
            assert_eq!(prof.count, group.len());
            if group.is_empty() {
                assert!(prof.values.is_none());
                continue;
            }
            let values = prof.values.unwrap();
            for i in 0..4 {
                for j in 0..3 {
                    let mean: f64 = group
                        .iter()
                        .map(|s| s.map.omega_an.as_ref().unwrap().at(i, j))
                        .sum::<f64>()
                        / group.len() as f64;
                    assert!((values.at(i, j) - mean).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn event_profile_all_lag_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let samples: Vec<AnnotatedContribution> = (0..10)
            .map(|_| AnnotatedContribution {
                map: synthetic_map(3, 2, &mut rng),
                insulin_lag: None,
                cho_lag: Some(0),
            })
            .collect();
        let at0 = event_conditioned_profile(&samples, EventKind::Cho, 0);
        assert_eq!(at0.count, 10);
        for lag in 1..3 {
            let p = event_conditioned_profile(&samples, EventKind::Cho, lag);
            assert_eq!(p.count, 0);
            assert!(p.values.is_none());
        }
        // lag-0 profile is the plain mean
        let maps: Vec<ContributionMap> = samples.iter().map(|s| s.map.clone()).collect();
        let mean = mean_contribution_profile(&maps).unwrap();
        assert_eq!(at0.values.unwrap(), mean.values.unwrap());
    }

    #[test]
    fn no_event_profile_matches_brute_force_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let samples: Vec<AnnotatedContribution> = (0..60)
            .map(|_| AnnotatedContribution {
                map: synthetic_map(4, 3, &mut rng),
                insulin_lag: if rng.gen_bool(0.7) {
                    Some(rng.gen_range(0..20))
                } else {
                    None
                },
                cho_lag: if rng.gen_bool(0.7) {
                    Some(rng.gen_range(0..20))
                } else {
                    None
                },
            })
            .collect();
        let window = 12;
        let prof = no_event_profile(&samples, window);
        let quiet = |l: Option<usize>| l.map_or(true, |v| v >= window);
        let group: Vec<&AnnotatedContribution> = samples
            .iter()
            .filter(|s| quiet(s.insulin_lag) && quiet(s.cho_lag))
            .collect();
        assert_eq!(prof.count, group.len());
        if let Some(values) = prof.values {
            for i in 0..4 {
                for j in 0..3 {
                    let mean: f64 = group
                        .iter()
                        .map(|s| s.map.omega_an.as_ref().unwrap().at(i, j))
                        .sum::<f64>()
                        / group.len() as f64;
                    assert!((values.at(i, j) - mean).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn all_events_in_window_gives_empty_no_event_profile() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let samples: Vec<AnnotatedContribution> = (0..5)
            .map(|_| AnnotatedContribution {
                map: synthetic_map(3, 2, &mut rng),
                insulin_lag: Some(2),
                cho_lag: None,
            })
            .collect();
        let prof = no_event_profile(&samples, 12);
        assert_eq!(prof.count, 0);
        assert!(prof.values.is_none());
    }

    #[test]
    fn profile_csv_format() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = synthetic_map(3, 2, &mut rng);
        let prof = max_contribution_profile(std::slice::from_ref(&m)).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&prof, &["glucose", "insulin"], 5, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "signal,offset_min,value,count");
        let first = lines.next().unwrap();
        assert!(first.starts_with("glucose,-10,"));
        assert_eq!(text.lines().count(), 1 + 3 * 2);
    }
}
