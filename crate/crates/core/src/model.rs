//! Domain types for therapy-session gaze data and ingest of the on-disk
//! formats: score CSVs, annotation CSVs, profile CSVs and the JSON manifest
//! tying them together.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{opt_field, read_to_string, write_atomic};

pub const DEFAULT_FPS: f64 = 25.0;

pub const SCORE_HEADER: [&str; 4] = ["frame_index", "subject_id", "partner_id", "score"];
pub const ANNOTATION_HEADER: [&str; 2] = ["start_s", "end_s"];
pub const PROFILE_HEADER: [&str; 6] = [
    "child_id",
    "age",
    "gender",
    "ados_social_affect",
    "level_of_functioning",
    "svb_score",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    PlayTherapy,
    StandardTherapy,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::PlayTherapy => "PlayTherapy",
            Group::StandardTherapy => "StandardTherapy",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "PlayTherapy" => Ok(Group::PlayTherapy),
            "StandardTherapy" => Ok(Group::StandardTherapy),
            other => Err(Error::validation(format!("unknown group {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Activity {
    HelloSong,
    MusicMaking,
    Reading,
}

impl Activity {
    pub const ALL: [Activity; 3] = [
        Activity::HelloSong,
        Activity::MusicMaking,
        Activity::Reading,
    ];

    /// The therapy group an activity belongs to. Reading is the Standard
    /// Therapy activity; the other two are Play Therapy activities.
    pub fn group(self) -> Group {
        match self {
            Activity::HelloSong | Activity::MusicMaking => Group::PlayTherapy,
            Activity::Reading => Group::StandardTherapy,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activity::HelloSong => "HelloSong",
            Activity::MusicMaking => "MusicMaking",
            Activity::Reading => "Reading",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HelloSong" => Ok(Activity::HelloSong),
            "MusicMaking" => Ok(Activity::MusicMaking),
            "Reading" => Ok(Activity::Reading),
            other => Err(Error::validation(format!("unknown activity {other:?}"))),
        }
    }
}

/// Therapy session number. Only sessions 1 (early), 8 and 16 (late) were
/// recorded for analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SessionIndex(u8);

impl SessionIndex {
    pub const EARLY: SessionIndex = SessionIndex(1);
    pub const MIDDLE: SessionIndex = SessionIndex(8);
    pub const LATE: SessionIndex = SessionIndex(16);
    pub const ALL: [SessionIndex; 3] = [Self::EARLY, Self::MIDDLE, Self::LATE];

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for SessionIndex {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 | 8 | 16 => Ok(SessionIndex(v)),
            other => Err(Error::validation(format!(
                "session_index {other} not in {{1, 8, 16}}"
            ))),
        }
    }
}

impl From<SessionIndex> for u8 {
    fn from(s: SessionIndex) -> u8 {
        s.0
    }
}

impl fmt::Display for SessionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" => Ok(Gender::M),
            "F" => Ok(Gender::F),
            other => Err(Error::validation(format!("gender {other:?} is not M or F"))),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::M => "M",
            Gender::F => "F",
        })
    }
}

/// One row of a score file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFrame {
    pub frame_index: u64,
    pub subject_id: String,
    pub partner_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    pub frame_index: u64,
    pub score: f64,
}

/// Per-frame mutual-gaze confidence for one (subject, partner) pair, strictly
/// increasing in frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStream {
    pub subject_id: String,
    pub partner_id: String,
    pub frames: Vec<FrameScore>,
}

impl ScoreStream {
    pub fn new(
        subject_id: impl Into<String>,
        partner_id: impl Into<String>,
        frames: Vec<FrameScore>,
    ) -> Result<Self> {
        let stream = ScoreStream {
            subject_id: subject_id.into(),
            partner_id: partner_id.into(),
            frames,
        };
        stream.validate()?;
        Ok(stream)
    }

    fn validate(&self) -> Result<()> {
        for w in self.frames.windows(2) {
            if w[1].frame_index <= w[0].frame_index {
                return Err(Error::validation(format!(
                    "stream {}/{}: frame indices not strictly increasing at {}",
                    self.subject_id, self.partner_id, w[1].frame_index
                )));
            }
        }
        if let Some(f) = self.frames.iter().find(|f| !(0.0..=1.0).contains(&f.score)) {
            return Err(Error::validation(format!(
                "stream {}/{}: score {} at frame {} outside [0, 1]",
                self.subject_id, self.partner_id, f.score, f.frame_index
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnnotationLabel {
    GazeAtTrainer,
}

/// A hand-coded span (seconds) during which the child looks at a trainer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotationInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub label: AnnotationLabel,
}

impl AnnotationInterval {
    pub fn gaze(start_s: f64, end_s: f64) -> Self {
        AnnotationInterval {
            start_s,
            end_s,
            label: AnnotationLabel::GazeAtTrainer,
        }
    }

    pub fn length(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub child_id: String,
    pub group: Group,
    pub activity: Activity,
    pub session_index: SessionIndex,
    pub fps: f64,
    pub total_frames: u64,
    pub streams: Vec<ScoreStream>,
    pub annotations: Vec<AnnotationInterval>,
}

impl SessionRecord {
    pub fn duration_s(&self) -> f64 {
        self.total_frames as f64 / self.fps
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = || {
            format!(
                "session {} of {} ({})",
                self.session_index, self.child_id, self.activity
            )
        };
        if self.activity.group() != self.group {
            return Err(Error::validation(format!(
                "{}: activity {} does not belong to group {}",
                ctx(),
                self.activity,
                self.group
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::validation(format!(
                "{}: fps must be positive",
                ctx()
            )));
        }
        if self.total_frames == 0 {
            return Err(Error::validation(format!(
                "{}: total_frames must be positive",
                ctx()
            )));
        }
        let mut pairs = HashSet::new();
        for s in &self.streams {
            if s.subject_id != self.child_id {
                return Err(Error::validation(format!(
                    "{}: stream {}/{} does not have the child as subject",
                    ctx(),
                    s.subject_id,
                    s.partner_id
                )));
            }
            if !pairs.insert(s.partner_id.as_str()) {
                return Err(Error::validation(format!(
                    "{}: duplicate stream for partner {}",
                    ctx(),
                    s.partner_id
                )));
            }
            s.validate()?;
            if let Some(last) = s.frames.last() {
                if last.frame_index >= self.total_frames {
                    return Err(Error::validation(format!(
                        "{}: frame {} beyond total_frames {}",
                        ctx(),
                        last.frame_index,
                        self.total_frames
                    )));
                }
            }
        }
        let duration = self.duration_s();
        for w in self.annotations.windows(2) {
            if w[1].start_s < w[0].end_s {
                return Err(Error::validation(format!(
                    "{}: annotations overlap or are unsorted",
                    ctx()
                )));
            }
        }
        for a in &self.annotations {
            if !(a.start_s >= 0.0 && a.start_s < a.end_s && a.end_s <= duration) {
                return Err(Error::validation(format!(
                    "{}: annotation [{}, {}] outside [0, {}]",
                    ctx(),
                    a.start_s,
                    a.end_s,
                    duration
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChildProfile {
    pub child_id: String,
    pub age: f64,
    pub gender: Gender,
    pub ados_social_affect: u32,
    pub level_of_functioning: u8,
    /// Expert social visual behavior score on the 1–4 scale in 0.5 steps.
    pub svb_score: Option<f64>,
}

impl ChildProfile {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.level_of_functioning) {
            return Err(Error::validation(format!(
                "{}: level_of_functioning {} not in {{1, 2, 3}}",
                self.child_id, self.level_of_functioning
            )));
        }
        if !(self.age.is_finite() && self.age >= 0.0) {
            return Err(Error::validation(format!("{}: invalid age", self.child_id)));
        }
        if let Some(s) = self.svb_score {
            if !is_svb_grid_value(s) {
                return Err(Error::validation(format!(
                    "{}: svb_score {s} not on the 0.5 grid in [1, 4]",
                    self.child_id
                )));
            }
        }
        Ok(())
    }
}

pub fn is_svb_grid_value(s: f64) -> bool {
    (1.0..=4.0).contains(&s) && (s * 2.0).fract() == 0.0
}

/// Identifies one observation: a child doing one activity, across sessions
/// 1, 8 and 16. Some children did two Play Therapy activities, so the child
/// id alone is not a key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObservationKey {
    pub child_id: String,
    pub activity: Activity,
}

impl fmt::Display for ObservationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.child_id, self.activity)
    }
}

#[derive(Debug, Clone)]
pub struct Observation<'a> {
    pub key: ObservationKey,
    pub group: Group,
    /// Sorted by session index.
    pub sessions: Vec<&'a SessionRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cohort {
    pub profiles: BTreeMap<String, ChildProfile>,
    pub sessions: Vec<SessionRecord>,
}

impl Cohort {
    pub fn new(
        profiles: BTreeMap<String, ChildProfile>,
        sessions: Vec<SessionRecord>,
    ) -> Result<Self> {
        let cohort = Cohort { profiles, sessions };
        cohort.validate()?;
        Ok(cohort)
    }

    pub fn validate(&self) -> Result<()> {
        for (id, p) in &self.profiles {
            if id != &p.child_id {
                return Err(Error::validation(format!(
                    "profile keyed {id} has child_id {}",
                    p.child_id
                )));
            }
            p.validate()?;
        }
        let mut seen = HashSet::new();
        for s in &self.sessions {
            if !self.profiles.contains_key(&s.child_id) {
                return Err(Error::validation(format!(
                    "session references unknown child_id {}",
                    s.child_id
                )));
            }
            s.validate()?;
            if !seen.insert((s.child_id.as_str(), s.activity, s.session_index)) {
                return Err(Error::validation(format!(
                    "duplicate session {} for {}/{}",
                    s.session_index, s.child_id, s.activity
                )));
            }
        }
        Ok(())
    }

    /// Sessions grouped by (child, activity), ordered by key.
    pub fn observations(&self) -> Vec<Observation<'_>> {
        let mut map: BTreeMap<ObservationKey, Vec<&SessionRecord>> = BTreeMap::new();
        for s in &self.sessions {
            map.entry(ObservationKey {
                child_id: s.child_id.clone(),
                activity: s.activity,
            })
            .or_default()
            .push(s);
        }
        map.into_iter()
            .map(|(key, mut sessions)| {
                sessions.sort_by_key(|s| s.session_index);
                Observation {
                    group: key.activity.group(),
                    key,
                    sessions,
                }
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Score CSV
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScores {
    pub streams: Vec<ScoreStream>,
    /// Rows between two trainers, excluded from analysis.
    pub dropped_trainer_rows: usize,
    /// Rows recorded as (trainer, child) and stored as (child, trainer).
    pub reoriented_rows: usize,
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(path: &Path, rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    // An empty file has no header row at all; callers decide if that is valid.
    if headers.is_empty() {
        return Ok(());
    }
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(
            path,
            1,
            format!(
                "expected header {:?}, found {:?}",
                expected.join(","),
                headers
            ),
        ));
    }
    Ok(())
}

fn records<'a>(
    path: &'a Path,
    rdr: &'a mut csv::Reader<&'a [u8]>,
    columns: usize,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + 'a {
    rdr.records().map(move |rec| {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != columns {
            return Err(Error::parse(
                path,
                line,
                format!("expected {columns} columns, found {}", rec.len()),
            ));
        }
        Ok((line, rec))
    })
}

fn field<T: FromStr>(
    path: &Path,
    line: u64,
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = &rec[idx];
    raw.parse()
        .map_err(|_| Error::parse(path, line, format!("invalid {name} {raw:?}")))
}

/// Parses a score CSV for one session, keeping the pairs that involve
/// `subject` (the child). Trainer–trainer rows are dropped and counted.
pub fn parse_scores(path: impl AsRef<Path>, subject: &str) -> Result<ParsedScores> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_scores_str(path, &text, subject)
}

pub(crate) fn parse_scores_str(path: &Path, text: &str, subject: &str) -> Result<ParsedScores> {
    let mut rdr = csv_reader(text);
    check_header(path, &mut rdr, &SCORE_HEADER)?;

    let mut by_partner: BTreeMap<String, Vec<(u64, FrameScore)>> = BTreeMap::new();
    let mut dropped = 0;
    let mut reoriented = 0;
    for item in records(path, &mut rdr, SCORE_HEADER.len()) {
        let (line, rec) = item?;
        let frame_index: u64 = field(path, line, &rec, 0, "frame_index")?;
        let score: f64 = field(path, line, &rec, 3, "score")?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::parse(
                path,
                line,
                format!("score {score} outside [0, 1]"),
            ));
        }
        let (a, b) = (&rec[1], &rec[2]);
        let partner = if a == subject {
            b
        } else if b == subject {
            reoriented += 1;
            a
        } else {
            dropped += 1;
            continue;
        };
        if partner == subject {
            return Err(Error::parse(path, line, "subject paired with itself"));
        }
        by_partner
            .entry(partner.to_string())
            .or_default()
            .push((line, FrameScore { frame_index, score }));
    }
    if dropped > 0 {
        log::warn!(
            "{}: dropped {dropped} trainer-trainer row(s)",
            path.display()
        );
    }

    let mut streams = Vec::with_capacity(by_partner.len());
    for (partner, mut rows) in by_partner {
        rows.sort_by_key(|(_, f)| f.frame_index);
        for w in rows.windows(2) {
            if w[0].1.frame_index == w[1].1.frame_index {
                return Err(Error::validation(format!(
                    "{}:{}: duplicate frame {} for pair ({subject}, {partner})",
                    path.display(),
                    w[1].0.max(w[0].0),
                    w[1].1.frame_index
                )));
            }
        }
        streams.push(ScoreStream {
            subject_id: subject.to_string(),
            partner_id: partner,
            frames: rows.into_iter().map(|(_, f)| f).collect(),
        });
    }
    Ok(ParsedScores {
        streams,
        dropped_trainer_rows: dropped,
        reoriented_rows: reoriented,
    })
}

pub fn write_scores_csv(streams: &[ScoreStream]) -> String {
    let mut out = SCORE_HEADER.join(",");
    out.push('\n');
    for s in streams {
        for f in &s.frames {
            out.push_str(&format!(
                "{},{},{},{}\n",
                f.frame_index, s.subject_id, s.partner_id, f.score
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Annotation CSV
// ---------------------------------------------------------------------------

/// Clips raw `(start, end)` spans to `[0, duration_s]`, then sorts and merges
/// overlapping or touching spans.
pub fn normalize_intervals(raw: &[(f64, f64)], duration_s: f64) -> Vec<AnnotationInterval> {
    let mut spans: Vec<(f64, f64)> = raw
        .iter()
        .map(|&(s, e)| (s.max(0.0), e.min(duration_s)))
        .filter(|(s, e)| s < e)
        .collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(spans.len());
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
        .into_iter()
        .map(|(s, e)| AnnotationInterval::gaze(s, e))
        .collect()
}

pub fn parse_annotations(
    path: impl AsRef<Path>,
    fps: f64,
    total_frames: u64,
) -> Result<Vec<AnnotationInterval>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_annotations_str(path, &text, fps, total_frames)
}

pub(crate) fn parse_annotations_str(
    path: &Path,
    text: &str,
    fps: f64,
    total_frames: u64,
) -> Result<Vec<AnnotationInterval>> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::invalid("fps must be positive"));
    }
    let mut rdr = csv_reader(text);
    check_header(path, &mut rdr, &ANNOTATION_HEADER)?;
    let mut raw = Vec::new();
    for item in records(path, &mut rdr, ANNOTATION_HEADER.len()) {
        let (line, rec) = item?;
        let start: f64 = field(path, line, &rec, 0, "start_s")?;
        let end: f64 = field(path, line, &rec, 1, "end_s")?;
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::parse(path, line, "non-finite time"));
        }
        if start < 0.0 || end < 0.0 {
            return Err(Error::parse(path, line, "negative time"));
        }
        if start >= end {
            return Err(Error::parse(
                path,
                line,
                format!("start {start} is not before end {end}"),
            ));
        }
        raw.push((start, end));
    }
    Ok(normalize_intervals(&raw, total_frames as f64 / fps))
}

pub fn write_annotations_csv(intervals: &[AnnotationInterval]) -> String {
    let mut out = ANNOTATION_HEADER.join(",");
    out.push('\n');
    for a in intervals {
        out.push_str(&format!("{},{}\n", a.start_s, a.end_s));
    }
    out
}

// ---------------------------------------------------------------------------
// Profile CSV
// ---------------------------------------------------------------------------

pub fn parse_profiles(path: impl AsRef<Path>) -> Result<BTreeMap<String, ChildProfile>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_profiles_str(path, &text)
}

pub(crate) fn parse_profiles_str(
    path: &Path,
    text: &str,
) -> Result<BTreeMap<String, ChildProfile>> {
    let mut rdr = csv_reader(text);
    check_header(path, &mut rdr, &PROFILE_HEADER)?;
    let mut profiles = BTreeMap::new();
    for item in records(path, &mut rdr, PROFILE_HEADER.len()) {
        let (line, rec) = item?;
        let child_id = rec[0].to_string();
        if child_id.is_empty() {
            return Err(Error::parse(path, line, "empty child_id"));
        }
        let gender = rec[2]
            .parse::<Gender>()
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        let svb_score = match &rec[5] {
            "" => None,
            raw => Some(
                raw.parse::<f64>()
                    .map_err(|_| Error::parse(path, line, format!("invalid svb_score {raw:?}")))?,
            ),
        };
        let profile = ChildProfile {
            age: field(path, line, &rec, 1, "age")?,
            gender,
            ados_social_affect: field(path, line, &rec, 3, "ados_social_affect")?,
            level_of_functioning: field(path, line, &rec, 4, "level_of_functioning")?,
            svb_score,
            child_id: child_id.clone(),
        };
        profile
            .validate()
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        if profiles.insert(child_id.clone(), profile).is_some() {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate child_id {child_id}"),
            ));
        }
    }
    Ok(profiles)
}

pub fn write_profiles_csv<'a>(profiles: impl IntoIterator<Item = &'a ChildProfile>) -> String {
    let mut out = PROFILE_HEADER.join(",");
    out.push('\n');
    for p in profiles {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.child_id,
            p.age,
            p.gender,
            p.ados_social_affect,
            p.level_of_functioning,
            opt_field(p.svb_score)
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Manifest JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub observations: Vec<ManifestObservation>,
    pub profiles_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestObservation {
    pub child_id: String,
    pub group: Group,
    pub activity: Activity,
    pub sessions: Vec<ManifestSession>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSession {
    pub session_index: u8,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub total_frames: u64,
    pub scores_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations_path: Option<PathBuf>,
}

fn default_fps() -> f64 {
    DEFAULT_FPS
}

/// Loads a manifest and every file it references; paths resolve relative to
/// the manifest's directory.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Cohort> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };

    let profiles = parse_profiles(resolve(&manifest.profiles_path))?;

    let mut jobs = Vec::new();
    for obs in &manifest.observations {
        if obs.activity.group() != obs.group {
            return Err(Error::validation(format!(
                "{}: activity {} does not belong to group {}",
                obs.child_id, obs.activity, obs.group
            )));
        }
        if !profiles.contains_key(&obs.child_id) {
            return Err(Error::validation(format!(
                "unknown child_id {} (no profile)",
                obs.child_id
            )));
        }
        for s in &obs.sessions {
            jobs.push((obs, s));
        }
    }

    let sessions = jobs
        .par_iter()
        .map(|(obs, s)| -> Result<SessionRecord> {
            let session_index = SessionIndex::try_from(s.session_index)?;
            if !(s.fps.is_finite() && s.fps > 0.0) || s.total_frames == 0 {
                return Err(Error::validation(format!(
                    "{} session {}: fps and total_frames must be positive",
                    obs.child_id, s.session_index
                )));
            }
            let scores = parse_scores(resolve(&s.scores_path), &obs.child_id)?;
            let annotations = match &s.annotations_path {
                Some(p) => parse_annotations(resolve(p), s.fps, s.total_frames)?,
                None => Vec::new(),
            };
            let record = SessionRecord {
                child_id: obs.child_id.clone(),
                group: obs.group,
                activity: obs.activity,
                session_index,
                fps: s.fps,
                total_frames: s.total_frames,
                streams: scores.streams,
                annotations,
            };
            record.validate()?;
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;

    Cohort::new(profiles, sessions)
}

/// Writes a cohort in the on-disk formats under `dir` and returns the
/// manifest path. Re-parsing the manifest reproduces the cohort exactly.
pub fn write_cohort(cohort: &Cohort, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let mut observations = Vec::new();
    for (i, obs) in cohort.observations().into_iter().enumerate() {
        let mut sessions = Vec::new();
        for s in &obs.sessions {
            let stem = format!("obs{i:03}_s{:02}", s.session_index.get());
            let scores_path = PathBuf::from("scores").join(format!("{stem}.csv"));
            let annotations_path = PathBuf::from("annotations").join(format!("{stem}.csv"));
            write_atomic(
                &dir.join(&scores_path),
                write_scores_csv(&s.streams).as_bytes(),
            )?;
            write_atomic(
                &dir.join(&annotations_path),
                write_annotations_csv(&s.annotations).as_bytes(),
            )?;
            sessions.push(ManifestSession {
                session_index: s.session_index.get(),
                fps: s.fps,
                total_frames: s.total_frames,
                scores_path,
                annotations_path: Some(annotations_path),
            });
        }
        observations.push(ManifestObservation {
            child_id: obs.key.child_id.clone(),
            group: obs.group,
            activity: obs.key.activity,
            sessions,
        });
    }
    let profiles_path = PathBuf::from("profiles.csv");
    write_atomic(
        &dir.join(&profiles_path),
        write_profiles_csv(cohort.profiles.values()).as_bytes(),
    )?;
    let manifest = Manifest {
        observations,
        profiles_path,
    };
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&manifest_path, json.as_bytes())?;
    Ok(manifest_path)
}
