//! Mutual gaze ratio, mutual gaze duration and human-coded ratio.
//!
//! A frame counts as mutual gaze when any child–trainer stream scores it
//! strictly above the threshold. Frames without detector output count in the
//! denominator but never as gaze. All measures pool an observation's sessions
//! (1, 8, 16) rather than averaging per session.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{opt_field, read_to_string, write_atomic};
use crate::model::{Activity, Cohort, Group, ObservationKey, SessionIndex, SessionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureConfig {
    pub score_threshold: f64,
    pub min_run_seconds: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            score_threshold: 0.6,
            min_run_seconds: 1.0,
        }
    }
}

impl MeasureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.score_threshold > 0.0 && self.score_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "score_threshold {} not in (0, 1)",
                self.score_threshold
            )));
        }
        if !(self.min_run_seconds > 0.0 && self.min_run_seconds.is_finite()) {
            return Err(Error::invalid(format!(
                "min_run_seconds {} must be positive",
                self.min_run_seconds
            )));
        }
        Ok(())
    }

    /// Runs must be strictly longer than this many frames to count towards
    /// duration (25 at 25 fps and one second).
    pub fn min_run_frames(&self, fps: f64) -> u64 {
        (self.min_run_seconds * fps).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionMeasure {
    pub ratio: f64,
    pub duration_frames: Option<f64>,
    pub human_coded_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSet {
    pub key: ObservationKey,
    pub group: Group,
    pub mutual_gaze_ratio: f64,
    pub mutual_gaze_duration_frames: Option<f64>,
    pub human_coded_ratio: f64,
    pub per_session: BTreeMap<SessionIndex, SessionMeasure>,
}

/// Per-frame gaze indicator over `0..total_frames`.
pub fn binarize(session: &SessionRecord, cfg: &MeasureConfig) -> Vec<bool> {
    let mut out = vec![false; session.total_frames as usize];
    for stream in &session.streams {
        for f in &stream.frames {
            if f.score > cfg.score_threshold {
                if let Some(slot) = out.get_mut(f.frame_index as usize) {
                    *slot = true;
                }
            }
        }
    }
    out
}

/// Maximal runs of `true`.
pub fn gaze_runs(binarized: &[bool]) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &b) in binarized.iter().enumerate() {
        match (b, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(Run {
                    start: s,
                    len: i - s,
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(Run {
            start: s,
            len: binarized.len() - s,
        });
    }
    runs
}

fn non_empty(sessions: &[&SessionRecord]) -> Result<()> {
    if sessions.is_empty() {
        Err(Error::invalid("observation has no sessions"))
    } else {
        Ok(())
    }
}

pub fn mutual_gaze_ratio(sessions: &[&SessionRecord], cfg: &MeasureConfig) -> Result<f64> {
    non_empty(sessions)?;
    let mut gaze = 0u64;
    let mut total = 0u64;
    for s in sessions {
        gaze += binarize(s, cfg).iter().filter(|&&b| b).count() as u64;
        total += s.total_frames;
    }
    Ok(gaze as f64 / total as f64)
}

/// Lengths of the runs that last longer than the minimum run, pooled over
/// sessions. The minimum is evaluated with each session's own fps.
fn qualifying_run_lengths(sessions: &[&SessionRecord], cfg: &MeasureConfig) -> Vec<usize> {
    sessions
        .iter()
        .flat_map(|s| {
            let min = cfg.min_run_frames(s.fps) as usize;
            gaze_runs(&binarize(s, cfg))
                .into_iter()
                .filter(move |r| r.len > min)
                .map(|r| r.len)
        })
        .collect()
}

/// Mean length in frames of qualifying runs, or `None` when no run is long
/// enough.
pub fn mutual_gaze_duration(
    sessions: &[&SessionRecord],
    cfg: &MeasureConfig,
) -> Result<Option<f64>> {
    non_empty(sessions)?;
    let lens = qualifying_run_lengths(sessions, cfg);
    if lens.is_empty() {
        return Ok(None);
    }
    let sum: usize = lens.iter().sum();
    Ok(Some(sum as f64 / lens.len() as f64))
}

/// Annotated gaze time over total time, both in seconds.
pub fn human_coded_ratio(sessions: &[&SessionRecord]) -> Result<f64> {
    non_empty(sessions)?;
    let annotated: f64 = sessions
        .iter()
        .flat_map(|s| s.annotations.iter())
        .map(|a| a.length())
        .sum();
    let total: f64 = sessions.iter().map(|s| s.duration_s()).sum();
    Ok((annotated / total).clamp(0.0, 1.0))
}

pub fn compute_measures(cohort: &Cohort, cfg: &MeasureConfig) -> Result<Vec<MeasureSet>> {
    cfg.validate()?;
    cohort
        .observations()
        .par_iter()
        .map(|obs| {
            let sessions = &obs.sessions;
            if sessions.is_empty() {
                return Err(Error::validation(format!(
                    "observation {} has no sessions",
                    obs.key
                )));
            }
            let mut per_session = BTreeMap::new();
            for s in sessions {
                let one = [*s];
                per_session.insert(
                    s.session_index,
                    SessionMeasure {
                        ratio: mutual_gaze_ratio(&one, cfg)?,
                        duration_frames: mutual_gaze_duration(&one, cfg)?,
                        human_coded_ratio: human_coded_ratio(&one)?,
                    },
                );
            }
            Ok(MeasureSet {
                key: obs.key.clone(),
                group: obs.group,
                mutual_gaze_ratio: mutual_gaze_ratio(sessions, cfg)?,
                mutual_gaze_duration_frames: mutual_gaze_duration(sessions, cfg)?,
                human_coded_ratio: human_coded_ratio(sessions)?,
                per_session,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Measures CSV
// ---------------------------------------------------------------------------

pub fn measures_header() -> Vec<String> {
    let mut cols: Vec<String> = [
        "child_id",
        "activity",
        "group",
        "mutual_gaze_ratio",
        "mutual_gaze_duration_frames",
        "human_coded_ratio",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for idx in SessionIndex::ALL {
        cols.push(format!("session_{idx}_ratio"));
        cols.push(format!("session_{idx}_duration_frames"));
        cols.push(format!("session_{idx}_human_coded_ratio"));
    }
    cols
}

pub fn write_measures_csv(measures: &[MeasureSet]) -> String {
    let mut out = measures_header().join(",");
    out.push('\n');
    for m in measures {
        let mut fields = vec![
            m.key.child_id.clone(),
            m.key.activity.to_string(),
            m.group.to_string(),
            m.mutual_gaze_ratio.to_string(),
            opt_field(m.mutual_gaze_duration_frames),
            m.human_coded_ratio.to_string(),
        ];
        for idx in SessionIndex::ALL {
            match m.per_session.get(&idx) {
                Some(s) => {
                    fields.push(s.ratio.to_string());
                    fields.push(opt_field(s.duration_frames));
                    fields.push(s.human_coded_ratio.to_string());
                }
                None => fields.extend(std::iter::repeat_n(String::new(), 3)),
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_measures_csv(measures: &[MeasureSet], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), write_measures_csv(measures).as_bytes())
}

pub fn parse_measures_csv(path: impl AsRef<Path>) -> Result<Vec<MeasureSet>> {
    let path = path.as_ref();
    parse_measures_str(path, &read_to_string(path)?)
}

pub(crate) fn parse_measures_str(path: &Path, text: &str) -> Result<Vec<MeasureSet>> {
    let header = measures_header();
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let got = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if got.iter().ne(header.iter().map(String::as_str)) {
        return Err(Error::parse(path, 1, "unexpected measures header"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(Error::parse(path, line, "wrong column count"));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("invalid number {:?}", &rec[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let activity: Activity = rec[1]
            .parse()
            .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
        let group: Group = rec[2]
            .parse()
            .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
        let mut per_session = BTreeMap::new();
        for (k, idx) in SessionIndex::ALL.into_iter().enumerate() {
            let base = 6 + 3 * k;
            if let Some(ratio) = opt(base)? {
                per_session.insert(
                    idx,
                    SessionMeasure {
                        ratio,
                        duration_frames: opt(base + 1)?,
                        human_coded_ratio: num(base + 2)?,
                    },
                );
            }
        }
        out.push(MeasureSet {
            key: ObservationKey {
                child_id: rec[0].to_string(),
                activity,
            },
            group,
            mutual_gaze_ratio: num(3)?,
            mutual_gaze_duration_frames: opt(4)?,
            human_coded_ratio: num(5)?,
            per_session,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnnotationInterval, FrameScore, ScoreStream};

    fn session(total: u64, streams: Vec<ScoreStream>) -> SessionRecord {
        SessionRecord {
            child_id: "c".into(),
            group: Group::PlayTherapy,
            activity: Activity::HelloSong,
            session_index: SessionIndex::EARLY,
            fps: 25.0,
            total_frames: total,
            streams,
            annotations: vec![],
        }
    }

    fn stream(partner: &str, scores: &[(u64, f64)]) -> ScoreStream {
        ScoreStream::new(
            "c",
            partner,
            scores
                .iter()
                .map(|&(frame_index, score)| FrameScore { frame_index, score })
                .collect(),
        )
        .unwrap()
    }

    fn bools(spec: &[(bool, usize)]) -> Vec<bool> {
        spec.iter()
            .flat_map(|&(b, n)| std::iter::repeat_n(b, n))
            .collect()
    }

    #[test]
    fn binarize_takes_any_pair() {
        let s = session(
            10,
            vec![
                stream("t1", &[(5, 0.7)]),
                stream("t2", &[(5, 0.1), (6, 0.2)]),
            ],
        );
        let b = binarize(&s, &MeasureConfig::default());
        assert!(b[5]);
        assert_eq!(b.iter().filter(|&&x| x).count(), 1);
    }

    #[test]
    fn threshold_is_strict() {
        let s = session(3, vec![stream("t1", &[(0, 0.6), (1, 0.600001)])]);
        let b = binarize(&s, &MeasureConfig::default());
        assert_eq!(b, vec![false, true, false]);
    }

    #[test]
    fn no_streams_all_false() {
        let s = session(50, vec![]);
        assert!(binarize(&s, &MeasureConfig::default()).iter().all(|b| !b));
    }

    #[test]
    fn ratio_counts_frames() {
        let scores: Vec<(u64, f64)> = (0..100)
            .map(|i| (i, if i < 37 { 0.9 } else { 0.2 }))
            .collect();
        let s = session(100, vec![stream("t1", &scores)]);
        assert_eq!(
            mutual_gaze_ratio(&[&s], &MeasureConfig::default()).unwrap(),
            0.37
        );
        assert!(mutual_gaze_ratio(&[], &MeasureConfig::default()).is_err());
    }

    #[test]
    fn ratio_extremes() {
        let cfg = MeasureConfig::default();
        let zeros: Vec<(u64, f64)> = (0..40).map(|i| (i, 0.0)).collect();
        let ones: Vec<(u64, f64)> = (0..40).map(|i| (i, 1.0)).collect();
        let z = session(40, vec![stream("t1", &zeros)]);
        assert_eq!(mutual_gaze_ratio(&[&z], &cfg).unwrap(), 0.0);
        let o = session(40, vec![stream("t1", &ones)]);
        assert_eq!(mutual_gaze_ratio(&[&o, &o, &o], &cfg).unwrap(), 1.0);
    }

    #[test]
    fn missing_frames_are_not_gaze() {
        let s = session(10, vec![stream("t1", &[(0, 0.9), (1, 0.9)])]);
        assert_eq!(
            mutual_gaze_ratio(&[&s], &MeasureConfig::default()).unwrap(),
            0.2
        );
    }

    #[test]
    fn run_length_encoding() {
        assert_eq!(
            gaze_runs(&bools(&[(true, 30), (false, 5), (true, 10)])),
            vec![Run { start: 0, len: 30 }, Run { start: 35, len: 10 }]
        );
        assert!(gaze_runs(&[false; 12]).is_empty());
        let mut tail = vec![false; 9];
        tail.push(true);
        assert_eq!(gaze_runs(&tail), vec![Run { start: 9, len: 1 }]);
        assert!(gaze_runs(&[]).is_empty());
    }

    fn session_from_bools(b: &[bool]) -> SessionRecord {
        let scores: Vec<(u64, f64)> = b
            .iter()
            .enumerate()
            .map(|(i, &g)| (i as u64, if g { 0.9 } else { 0.1 }))
            .collect();
        session(b.len() as u64, vec![stream("t1", &scores)])
    }

    #[test]
    fn duration_mean_of_long_runs() {
        let cfg = MeasureConfig::default();
        let s = session_from_bools(&bools(&[
            (true, 30),
            (false, 3),
            (true, 50),
            (false, 2),
            (true, 25),
        ]));
        assert_eq!(mutual_gaze_duration(&[&s], &cfg).unwrap(), Some(40.0));

        let short = session_from_bools(&bools(&[(true, 25), (false, 1), (true, 10)]));
        assert_eq!(mutual_gaze_duration(&[&short], &cfg).unwrap(), None);

        let one = session_from_bools(&bools(&[(false, 4), (true, 26)]));
        assert_eq!(mutual_gaze_duration(&[&one], &cfg).unwrap(), Some(26.0));
    }

    #[test]
    fn human_coded_ratio_pools_time() {
        let mut s = session(900 * 25, vec![]);
        s.annotations = vec![
            AnnotationInterval::gaze(0.0, 40.0),
            AnnotationInterval::gaze(100.0, 150.0),
        ];
        assert!((human_coded_ratio(&[&s]).unwrap() - 0.1).abs() < 1e-15);

        let empty = session(100, vec![]);
        assert_eq!(human_coded_ratio(&[&empty]).unwrap(), 0.0);

        let mut full = session(100, vec![]);
        full.annotations = vec![AnnotationInterval::gaze(0.0, 4.0)];
        assert_eq!(human_coded_ratio(&[&full, &full]).unwrap(), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(MeasureConfig {
            score_threshold: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(MeasureConfig {
            min_run_seconds: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(MeasureConfig::default().min_run_frames(25.0), 25);
    }
}
