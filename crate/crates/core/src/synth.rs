//! Synthetic gaze sessions with known ground truth.
//!
//! Gaze is a two-state process with geometric (per-frame memoryless) dwell
//! times. Gaze frames score `threshold + margin`, other frames
//! `threshold − margin`, plus optional per-frame noise and a per-session
//! offset. Annotations are emitted straight from the truth labels.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{gaze_runs, Run};
use crate::model::{
    Activity, AnnotationInterval, ChildProfile, Cohort, FrameScore, Gender, ObservationKey,
    ScoreStream, SessionIndex, SessionRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub fps: f64,
    pub duration_s: f64,
    /// Zero disables the gaze state entirely.
    pub mean_gaze_dwell_s: f64,
    pub mean_nongaze_dwell_s: f64,
    pub score_margin: f64,
    /// Per-frame Gaussian noise, truncated at ±3 SD.
    pub noise_sd: f64,
    /// SD of an offset shared by every score in a session (camera angle,
    /// occlusion); truncated at ±3 SD.
    pub session_bias_sd: f64,
    pub threshold: f64,
    pub n_trainers: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            fps: 25.0,
            duration_s: 120.0,
            mean_gaze_dwell_s: 2.0,
            mean_nongaze_dwell_s: 8.0,
            score_margin: 0.2,
            noise_sd: 0.0,
            session_bias_sd: 0.0,
            threshold: 0.6,
            n_trainers: 2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.fps) || !positive(self.duration_s) {
            return Err(Error::invalid("fps and duration_s must be positive"));
        }
        if !(self.mean_gaze_dwell_s.is_finite() && self.mean_gaze_dwell_s >= 0.0) {
            return Err(Error::invalid("mean_gaze_dwell_s must be non-negative"));
        }
        if !positive(self.mean_nongaze_dwell_s) {
            return Err(Error::invalid("mean_nongaze_dwell_s must be positive"));
        }
        if !(self.score_margin > 0.0 && self.score_margin < 0.4) {
            return Err(Error::invalid("score_margin must lie in (0, 0.4)"));
        }
        if !(self.noise_sd >= 0.0 && self.session_bias_sd >= 0.0) {
            return Err(Error::invalid("noise SDs must be non-negative"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid("threshold must lie in (0, 1)"));
        }
        if self.n_trainers == 0 {
            return Err(Error::invalid("need at least one trainer"));
        }
        if self.total_frames() == 0 {
            return Err(Error::invalid("session shorter than one frame"));
        }
        Ok(())
    }

    pub fn total_frames(&self) -> u64 {
        (self.duration_s * self.fps).round() as u64
    }

    /// True when the worst-case (3 SD) noise cannot push a score across the
    /// threshold or outside [0, 1]: binarized scores then equal the labels.
    pub fn is_noise_safe(&self) -> bool {
        let excursion = 3.0 * (self.noise_sd + self.session_bias_sd);
        excursion < self.score_margin
            && self.threshold + self.score_margin + excursion <= 1.0
            && self.threshold - self.score_margin - excursion >= 0.0
    }

    fn exit_probability(mean_dwell_s: f64, fps: f64) -> f64 {
        (1.0 / (mean_dwell_s * fps)).min(1.0)
    }

    /// Per-frame probabilities of leaving the gaze and non-gaze states.
    pub fn exit_probabilities(&self) -> (f64, f64) {
        (
            Self::exit_probability(self.mean_gaze_dwell_s, self.fps),
            Self::exit_probability(self.mean_nongaze_dwell_s, self.fps),
        )
    }

    /// Long-run gaze fraction `d_g / (d_g + d_n)` with dwell means in frames
    /// after the one-frame floor.
    pub fn stationary_gaze_fraction(&self) -> f64 {
        if self.mean_gaze_dwell_s == 0.0 {
            return 0.0;
        }
        let (pg, pn) = self.exit_probabilities();
        let (dg, dn) = (1.0 / pg, 1.0 / pn);
        dg / (dg + dn)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSession {
    pub session: SessionRecord,
    pub truth_labels: Vec<bool>,
    pub truth_ratio: f64,
    pub truth_runs: Vec<Run>,
}

fn truncated_normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    let n = Normal::new(0.0, sd).expect("sd is finite and non-negative");
    n.sample(rng).clamp(-3.0 * sd, 3.0 * sd)
}

fn label_sequence(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let n = cfg.total_frames() as usize;
    if cfg.mean_gaze_dwell_s == 0.0 {
        return vec![false; n];
    }
    let (p_exit_gaze, p_exit_other) = cfg.exit_probabilities();
    let mut gaze = rng.random_bool(cfg.stationary_gaze_fraction());
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(gaze);
        let p = if gaze { p_exit_gaze } else { p_exit_other };
        if rng.random_bool(p) {
            gaze = !gaze;
        }
    }
    labels
}

pub fn generate_session(cfg: &SynthConfig) -> Result<SynthSession> {
    generate_session_for(cfg, "child", Activity::HelloSong, SessionIndex::EARLY)
}

pub fn trainer_id(k: usize) -> String {
    format!("trainer{}", k + 1)
}

pub fn generate_session_for(
    cfg: &SynthConfig,
    child_id: &str,
    activity: Activity,
    session_index: SessionIndex,
) -> Result<SynthSession> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels = label_sequence(cfg, &mut rng);
    let bias = truncated_normal(&mut rng, cfg.session_bias_sd);

    // Each gaze episode is directed at one trainer.
    let mut target = vec![usize::MAX; labels.len()];
    let mut current = 0;
    for (t, &g) in labels.iter().enumerate() {
        if g {
            if t == 0 || !labels[t - 1] {
                current = rng.random_range(0..cfg.n_trainers);
            }
            target[t] = current;
        }
    }

    let mut streams = Vec::with_capacity(cfg.n_trainers);
    for k in 0..cfg.n_trainers {
        let frames = labels
            .iter()
            .enumerate()
            .map(|(t, &g)| {
                let base = if g && target[t] == k {
                    cfg.threshold + cfg.score_margin
                } else {
                    cfg.threshold - cfg.score_margin
                };
                let score =
                    (base + bias + truncated_normal(&mut rng, cfg.noise_sd)).clamp(0.0, 1.0);
                FrameScore {
                    frame_index: t as u64,
                    score,
                }
            })
            .collect();
        streams.push(ScoreStream {
            subject_id: child_id.to_string(),
            partner_id: trainer_id(k),
            frames,
        });
    }

    let truth_runs = gaze_runs(&labels);
    let annotations = truth_runs
        .iter()
        .map(|r| {
            AnnotationInterval::gaze(r.start as f64 / cfg.fps, (r.start + r.len) as f64 / cfg.fps)
        })
        .collect();
    let total = labels.len() as u64;
    let positives = labels.iter().filter(|&&b| b).count();
    let session = SessionRecord {
        child_id: child_id.to_string(),
        group: activity.group(),
        activity,
        session_index,
        fps: cfg.fps,
        total_frames: total,
        streams,
        annotations,
    };
    session.validate()?;
    Ok(SynthSession {
        session,
        truth_ratio: positives as f64 / total as f64,
        truth_labels: labels,
        truth_runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazeLink {
    /// svb score = 1 + 6·(true gaze ratio) + noise, clipped and snapped.
    GazeInformative,
    GazeUninformative,
}

/// Distributions for per-observation gaze behavior and child profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileModel {
    /// Range of each observation's long-run gaze fraction.
    pub gaze_ratio_range: (f64, f64),
    pub gaze_dwell_range_s: (f64, f64),
    pub age_range: (f64, f64),
    pub female_prob: f64,
    pub ados_mean: f64,
    pub ados_sd: f64,
    pub svb_noise_sd: f64,
}

impl Default for ProfileModel {
    fn default() -> Self {
        ProfileModel {
            gaze_ratio_range: (0.03, 0.45),
            gaze_dwell_range_s: (1.5, 3.5),
            age_range: (5.0, 12.0),
            female_prob: 0.15,
            ados_mean: 17.0,
            ados_sd: 5.0,
            svb_noise_sd: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub n_obs: usize,
    pub link: GazeLink,
    pub seed: u64,
    /// Template for every session; its `seed` and dwell means are replaced
    /// per session.
    pub session: SynthConfig,
    pub profile: ProfileModel,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n_obs: 28,
            link: GazeLink::GazeInformative,
            seed: 0,
            session: SynthConfig::default(),
            profile: ProfileModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub cohort: Cohort,
    /// Pooled true gaze fraction per observation.
    pub truth_ratio: BTreeMap<ObservationKey, f64>,
}

pub fn snap_to_half(x: f64) -> f64 {
    ((x * 2.0).round() / 2.0).clamp(1.0, 4.0)
}

/// Splits `n` observations over the three activities in the 7 : 11 : 10
/// proportions of the recorded cohort.
fn activity_counts(n: usize) -> (usize, usize, usize) {
    let hello = (n as f64 * 7.0 / 28.0).round() as usize;
    let music = (n as f64 * 11.0 / 28.0).round() as usize;
    let reading = n - hello - music;
    (hello, music, reading)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn generate_cohort(cfg: &CohortConfig) -> Result<SynthCohort> {
    if cfg.n_obs < 5 {
        return Err(Error::invalid(
            "a synthetic cohort needs at least 5 observations",
        ));
    }
    cfg.session.validate()?;
    let pm = &cfg.profile;
    let (lo, hi) = pm.gaze_ratio_range;
    if !(lo > 0.0 && lo <= hi && hi < 1.0) {
        return Err(Error::invalid("gaze_ratio_range must lie in (0, 1)"));
    }

    // Hello Song children also do Music Making, as in the recorded cohort.
    let (n_hello, n_music, n_reading) = activity_counts(cfg.n_obs);
    let mut plan: Vec<(String, Activity)> = Vec::with_capacity(cfg.n_obs);
    for i in 0..n_music {
        plan.push((format!("P{:02}", i + 1), Activity::MusicMaking));
    }
    for i in 0..n_hello {
        plan.push((format!("P{:02}", i + 1), Activity::HelloSong));
    }
    for i in 0..n_reading {
        plan.push((format!("S{:02}", i + 1), Activity::Reading));
    }

    let mut rng = stream_rng(cfg.seed, 0);
    let mut obs_params = Vec::with_capacity(plan.len());
    for _ in &plan {
        let ratio = rng.random_range(lo..=hi);
        let (dlo, dhi) = pm.gaze_dwell_range_s;
        let dwell = rng.random_range(dlo..=dhi);
        obs_params.push((dwell, dwell * (1.0 - ratio) / ratio));
    }

    let jobs: Vec<(usize, usize)> = (0..plan.len())
        .flat_map(|o| (0..SessionIndex::ALL.len()).map(move |s| (o, s)))
        .collect();
    let generated = jobs
        .par_iter()
        .map(|&(o, s)| {
            let (child, activity) = &plan[o];
            let mut sc = cfg.session.clone();
            sc.mean_gaze_dwell_s = obs_params[o].0;
            sc.mean_nongaze_dwell_s = obs_params[o].1;
            sc.seed = stream_rng(cfg.seed, 1 + (o * 3 + s) as u64).random();
            generate_session_for(&sc, child, *activity, SessionIndex::ALL[s])
        })
        .collect::<Result<Vec<_>>>()?;

    let mut truth_ratio = BTreeMap::new();
    let mut sessions = Vec::with_capacity(generated.len());
    for (o, (child, activity)) in plan.iter().enumerate() {
        let block = &generated[o * 3..o * 3 + 3];
        let pos: usize = block
            .iter()
            .map(|g| g.truth_labels.iter().filter(|&&b| b).count())
            .sum();
        let total: usize = block.iter().map(|g| g.truth_labels.len()).sum();
        truth_ratio.insert(
            ObservationKey {
                child_id: child.clone(),
                activity: *activity,
            },
            pos as f64 / total as f64,
        );
        sessions.extend(block.iter().map(|g| g.session.clone()));
    }

    let mut child_ratios: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (k, r) in &truth_ratio {
        child_ratios
            .entry(k.child_id.as_str())
            .or_default()
            .push(*r);
    }
    let svb_noise =
        Normal::new(0.0, pm.svb_noise_sd.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let ados = Normal::new(pm.ados_mean, pm.ados_sd.max(0.0))
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut profiles = BTreeMap::new();
    for (child, ratios) in child_ratios {
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let svb = match cfg.link {
            GazeLink::GazeInformative => {
                snap_to_half(1.0 + 6.0 * mean_ratio + svb_noise.sample(&mut rng))
            }
            GazeLink::GazeUninformative => snap_to_half(rng.random_range(1.0..=4.0)),
        };
        let age = (rng.random_range(pm.age_range.0..=pm.age_range.1) * 10.0).round() / 10.0;
        let profile = ChildProfile {
            child_id: child.to_string(),
            age,
            gender: if rng.random_bool(pm.female_prob.clamp(0.0, 1.0)) {
                Gender::F
            } else {
                Gender::M
            },
            ados_social_affect: ados.sample(&mut rng).round().max(0.0) as u32,
            level_of_functioning: rng.random_range(1..=3),
            svb_score: Some(svb),
        };
        profiles.insert(child.to_string(), profile);
    }

    Ok(SynthCohort {
        cohort: Cohort::new(profiles, sessions)?,
        truth_ratio,
    })
}
