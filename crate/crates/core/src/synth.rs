//! Synthetic cohorts of band-power sessions.
//!
//! Every (signal, channel) slot of a user is an AR(1) process
//! `x[t] = mu + rho * (x[t-1] - mu) + e[t]` with Gaussian innovations scaled so
//! the stationary standard deviation equals the slot's `std`. Users differ
//! only in their baseline means: on informative signals the baseline is the
//! population mean plus `separation * std * sqrt(pi)/2 * z`, z ~ N(0, 1),
//! which makes the expected gap between two users exactly `separation * std`.
//! Each condition adds its own offset on a random half of the slots, and each
//! session adds a small common jitter.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, Sample, Session, SessionMeta, NOMINAL_INTERVAL_S, NOMINAL_SESSION_SAMPLES};
use crate::seed;
use crate::signal::{sample_slot, ChannelId, Condition, SignalKind, SAMPLE_WIDTH};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
}

/// Parameters of one (signal, channel) process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotParams {
    pub mean: f64,
    pub std: f64,
    pub rho: f64,
}

/// Population-level starting point for a signal kind.
pub fn population_params(signal: SignalKind) -> SlotParams {
    match signal {
        SignalKind::Delta => SlotParams { mean: 0.9, std: 0.2, rho: 0.85 },
        SignalKind::Theta => SlotParams { mean: 0.5, std: 0.2, rho: 0.85 },
        SignalKind::Alpha => SlotParams { mean: 0.8, std: 0.2, rho: 0.85 },
        SignalKind::Beta => SlotParams { mean: 0.4, std: 0.2, rho: 0.85 },
        SignalKind::Gamma => SlotParams { mean: 0.05, std: 0.2, rho: 0.85 },
        SignalKind::Raw => SlotParams { mean: 0.0, std: 40.0, rho: 0.3 },
    }
}

/// One artificial user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub user_id: String,
    /// Indexed by [`sample_slot`].
    pub slots: Vec<SlotParams>,
    /// Additive mean offset per condition, indexed by [`sample_slot`].
    pub condition_offsets: BTreeMap<Condition, Vec<f64>>,
    /// Per-session common offset, in units of each slot's std.
    pub session_jitter: f64,
}

impl SubjectProfile {
    pub fn slot(&self, signal: SignalKind, channel: ChannelId) -> &SlotParams {
        &self.slots[sample_slot(signal, channel)]
    }
}

/// Shape and difficulty of a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    /// Sessions recorded per user, per condition; its length is the user count.
    pub sessions_per_user: Vec<usize>,
    pub samples_per_session: usize,
    /// Expected gap between two users' baselines, in slot std units.
    pub separation: f64,
    /// Expected size of a condition's offset on affected slots, in std units.
    pub condition_shift: f64,
    /// Per-session offset, in std units.
    pub session_jitter: f64,
    /// Signals whose baselines differ between users.
    pub informative: BTreeSet<SignalKind>,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            sessions_per_user: vec![2; 20],
            samples_per_session: NOMINAL_SESSION_SAMPLES,
            separation: 3.0,
            condition_shift: 0.0,
            session_jitter: 0.0,
            informative: SignalKind::ALL.into_iter().collect(),
            seed: 0,
        }
    }
}

impl CohortSpec {
    /// Twenty users with 5,5,5,5,5,4,3,3,3,3,3 and nine times 2 sessions.
    pub fn study_shape() -> Self {
        let mut sessions = vec![5; 5];
        sessions.push(4);
        sessions.extend([3; 5]);
        sessions.extend([2; 9]);
        CohortSpec { sessions_per_user: sessions, ..Self::default() }
    }

    /// Study-shaped cohort that is hard enough for ablations to show
    /// differences: users one std apart, a one-std condition shift and a
    /// little per-session drift.
    pub fn reference() -> Self {
        CohortSpec { separation: 1.0, condition_shift: 1.0, session_jitter: 0.1, ..Self::study_shape() }
    }

    pub fn n_users(&self) -> usize {
        self.sessions_per_user.len()
    }

    pub fn user_id(&self, user_index: usize) -> String {
        let width = self.n_users().to_string().len().max(2);
        format!("user{:0width$}", user_index + 1)
    }

    pub fn validate(&self, min_samples: usize) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_users() < 2 {
            return bad("need at least two users".into());
        }
        if self.sessions_per_user.contains(&0) {
            return bad("every user needs at least one session".into());
        }
        if self.samples_per_session < min_samples.max(1) {
            return bad(format!("samples_per_session {} < {}", self.samples_per_session, min_samples));
        }
        if !(self.separation >= 0.0 && self.condition_shift >= 0.0 && self.session_jitter >= 0.0) {
            return bad("separation, condition_shift and session_jitter must be >= 0".into());
        }
        Ok(())
    }
}

const SQRT_PI_OVER_2: f64 = 0.886_226_925_452_758;

const PROFILE_STREAM: u64 = 1;
const SESSION_STREAM: u64 = 2;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws user `user_index`'s profile.
pub fn make_profile(user_index: usize, spec: &CohortSpec, rng: &mut ChaCha8Rng) -> SubjectProfile {
    let mut slots = Vec::with_capacity(SAMPLE_WIDTH);
    for signal in SignalKind::ALL {
        let base = population_params(signal);
        for _channel in ChannelId::ALL {
            let z = normal(rng);
            let mean = if spec.informative.contains(&signal) {
                base.mean + spec.separation * base.std * SQRT_PI_OVER_2 * z
            } else {
                base.mean
            };
            slots.push(SlotParams { mean, ..base });
        }
    }
    let condition_offsets = Condition::ALL
        .into_iter()
        .map(|condition| {
            let offsets = slots
                .iter()
                .map(|slot| {
                    let z = normal(rng);
                    let affected = rng.random_bool(0.5);
                    if affected {
                        spec.condition_shift * slot.std * SQRT_PI_OVER_2 * z
                    } else {
                        0.0
                    }
                })
                .collect();
            (condition, offsets)
        })
        .collect();
    SubjectProfile {
        user_id: spec.user_id(user_index),
        slots,
        condition_offsets,
        session_jitter: spec.session_jitter,
    }
}

/// One session of `n_samples` samples at the nominal recording interval.
pub fn generate_session(
    profile: &SubjectProfile,
    condition: Condition,
    session_index: u32,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Session {
    let offsets = &profile.condition_offsets[&condition];
    let means: Vec<f64> = profile
        .slots
        .iter()
        .zip(offsets)
        .map(|(slot, off)| slot.mean + off + profile.session_jitter * slot.std * normal(rng))
        .collect();
    let mut state: Vec<f64> = profile
        .slots
        .iter()
        .zip(&means)
        .map(|(slot, mu)| mu + slot.std * normal(rng))
        .collect();
    let mut samples = Vec::with_capacity(n_samples);
    for t in 0..n_samples {
        if t > 0 {
            for (i, slot) in profile.slots.iter().enumerate() {
                let innovation = slot.std * (1.0 - slot.rho * slot.rho).sqrt() * normal(rng);
                state[i] = means[i] + slot.rho * (state[i] - means[i]) + innovation;
            }
        }
        samples.push(Sample {
            timestamp: t as f64 * NOMINAL_INTERVAL_S,
            values: std::array::from_fn(|i| state[i]),
        });
    }
    Session {
        meta: SessionMeta::new(profile.user_id.clone(), condition, session_index),
        recording_interval_s: NOMINAL_INTERVAL_S,
        samples,
    }
}

/// All profiles of a cohort.
pub fn cohort_profiles(spec: &CohortSpec) -> Vec<SubjectProfile> {
    (0..spec.n_users())
        .map(|u| make_profile(u, spec, &mut seed::rng(seed::derive_path(spec.seed, &[PROFILE_STREAM, u as u64]))))
        .collect()
}

/// Sessions for every user, condition and session index (1-based).
pub fn generate_cohort(spec: &CohortSpec) -> Result<Dataset, SynthError> {
    spec.validate(1)?;
    let profiles = cohort_profiles(spec);
    let jobs: Vec<(usize, Condition, u32)> = profiles
        .iter()
        .enumerate()
        .flat_map(|(u, _)| {
            Condition::ALL.into_iter().flat_map(move |c| {
                (1..=spec.sessions_per_user[u] as u32).map(move |s| (u, c, s))
            })
        })
        .collect();
    let sessions = jobs
        .par_iter()
        .map(|&(u, condition, s)| {
            let path = [SESSION_STREAM, u as u64, condition as u64, u64::from(s)];
            let mut rng = seed::rng(seed::derive_path(spec.seed, &path));
            generate_session(&profiles[u], condition, s, spec.samples_per_session, &mut rng)
        })
        .collect();
    Ok(Dataset::new(sessions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::validate_session;

    fn rng(s: u64) -> ChaCha8Rng {
        seed::rng(s)
    }

    #[test]
    fn zero_separation_shares_baselines() {
        let spec = CohortSpec { separation: 0.0, ..CohortSpec::default() };
        let profiles = cohort_profiles(&spec);
        for p in &profiles[1..] {
            assert_eq!(p.slots, profiles[0].slots);
        }
    }

    #[test]
    fn profiles_are_deterministic() {
        let spec = CohortSpec { condition_shift: 1.0, ..CohortSpec::default() };
        assert_eq!(make_profile(3, &spec, &mut rng(9)), make_profile(3, &spec, &mut rng(9)));
        assert_eq!(cohort_profiles(&spec), cohort_profiles(&spec));
    }

    #[test]
    fn mean_gap_scales_with_separation() {
        // average |mu_i - mu_j| / std over user pairs and slots ~ separation
        let spec = CohortSpec { separation: 3.0, sessions_per_user: vec![1; 400], ..CohortSpec::default() };
        let profiles = cohort_profiles(&spec);
        let mut gaps = Vec::new();
        for pair in profiles.chunks(2) {
            for (a, b) in pair[0].slots.iter().zip(&pair[1].slots) {
                gaps.push((a.mean - b.mean).abs() / a.std);
            }
        }
        let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
        // sd of one gap ~ 3 * sqrt(pi/2 - 1) = 2.3; 4800 gaps -> se ~ 0.033
        assert!((mean_gap - 3.0).abs() < 0.15, "mean gap {mean_gap}");
    }

    #[test]
    fn uninformative_signals_keep_population_mean() {
        let spec = CohortSpec { informative: [SignalKind::Alpha].into(), ..CohortSpec::default() };
        let p = make_profile(0, &spec, &mut rng(1));
        assert_eq!(p.slot(SignalKind::Beta, ChannelId::Tp9).mean, population_params(SignalKind::Beta).mean);
        assert_ne!(p.slot(SignalKind::Alpha, ChannelId::Tp9).mean, population_params(SignalKind::Alpha).mean);
    }

    fn single_slot_profile(mean: f64, std: f64, rho: f64) -> SubjectProfile {
        SubjectProfile {
            user_id: "u".into(),
            slots: vec![SlotParams { mean, std, rho }; SAMPLE_WIDTH],
            condition_offsets: Condition::ALL.into_iter().map(|c| (c, vec![0.0; SAMPLE_WIDTH])).collect(),
            session_jitter: 0.0,
        }
    }

    #[test]
    fn white_noise_has_no_lag_one_correlation() {
        let p = single_slot_profile(1.0, 0.5, 0.0);
        let s = generate_session(&p, Condition::SameSong, 1, 20_000, &mut rng(4));
        let x = s.series(SignalKind::Alpha, ChannelId::Af8);
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let cov = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n - 1.0);
        // se of r1 is about 1/sqrt(n) = 0.007
        assert!((cov / var).abs() < 0.03, "r1 = {}", cov / var);
    }

    #[test]
    fn ar1_autocorrelation_and_moments() {
        let p = single_slot_profile(2.0, 0.3, 0.8);
        let s = generate_session(&p, Condition::SameSong, 1, 50_000, &mut rng(5));
        let x = s.series(SignalKind::Gamma, ChannelId::Tp9);
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let cov = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n - 1.0);
        assert!((cov / var - 0.8).abs() < 0.02);
        assert!((var.sqrt() - 0.3).abs() < 0.02);
    }

    #[test]
    fn sample_mean_within_standard_error_bound() {
        let p = single_slot_profile(0.7, 0.2, 0.0);
        let n = 2_000;
        let s = generate_session(&p, Condition::FavoriteSong, 1, n, &mut rng(6));
        for slot in 0..SAMPLE_WIDTH {
            let mean = s.samples.iter().map(|x| x.values[slot]).sum::<f64>() / n as f64;
            assert!((mean - 0.7).abs() < 3.0 * 0.2 / (n as f64).sqrt() * 1.5, "slot {slot}: {mean}");
        }
    }

    #[test]
    fn vanishing_std_collapses_to_mean() {
        let p = single_slot_profile(1.25, 1e-12, 0.5);
        let s = generate_session(&p, Condition::SameSong, 1, 40, &mut rng(7));
        assert!(s.samples.iter().all(|x| x.values.iter().all(|v| (v - 1.25).abs() < 1e-9)));
    }

    #[test]
    fn sessions_are_valid_and_timed() {
        let spec = CohortSpec { sessions_per_user: vec![1, 1], ..CohortSpec::default() };
        let data = generate_cohort(&spec).unwrap();
        assert_eq!(data.sessions.len(), 4);
        for s in &data.sessions {
            assert!(validate_session(s, 300).ok);
            assert_eq!(s.samples[1].timestamp, 0.5);
        }
    }

    #[test]
    fn study_shape_sessions() {
        let spec = CohortSpec::study_shape();
        assert_eq!(spec.n_users(), 20);
        assert_eq!(spec.sessions_per_user.iter().sum::<usize>(), 62);
        assert_eq!(spec.user_id(0), "user01");
        assert_eq!(spec.user_id(19), "user20");
    }

    #[test]
    fn invalid_specs() {
        let one = CohortSpec { sessions_per_user: vec![3], ..CohortSpec::default() };
        assert!(generate_cohort(&one).is_err());
        let short = CohortSpec { samples_per_session: 30, ..CohortSpec::default() };
        assert!(short.validate(40).is_err());
    }
}
