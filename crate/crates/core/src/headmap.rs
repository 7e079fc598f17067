//! Head-map encoding for a pair of head tracks.
//!
//! Each of the M maps is a 64×64 grid holding one isotropic 2D Gaussian per
//! visible head, centred on the box centre, with σ proportional to the box
//! size so that closer (larger) heads spread wider. The target pair is drawn
//! at full amplitude and bystanders at a reduced one.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadBox {
    pub frame_index: u64,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl HeadBox {
    pub fn new(frame_index: u64, cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0) {
            return Err(Error::invalid(format!("box size {w}×{h} outside (0, 1]")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::invalid("box centre is not finite"));
        }
        Ok(HeadBox {
            frame_index,
            cx: cx.clamp(0.0, 1.0),
            cy: cy.clamp(0.0, 1.0),
            w,
            h,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadTrack {
    pub person_id: String,
    /// Consecutive frames.
    pub boxes: Vec<HeadBox>,
}

impl HeadTrack {
    pub fn new(person_id: impl Into<String>, boxes: Vec<HeadBox>) -> Result<Self> {
        let person_id = person_id.into();
        if boxes.is_empty() {
            return Err(Error::invalid(format!("track {person_id} is empty")));
        }
        if boxes
            .windows(2)
            .any(|w| w[1].frame_index != w[0].frame_index + 1)
        {
            return Err(Error::invalid(format!(
                "track {person_id} has non-consecutive frames"
            )));
        }
        Ok(HeadTrack { person_id, boxes })
    }

    pub fn first_frame(&self) -> u64 {
        self.boxes[0].frame_index
    }

    pub fn last_frame(&self) -> u64 {
        self.boxes[self.boxes.len() - 1].frame_index
    }

    pub fn at(&self, frame: u64) -> Option<&HeadBox> {
        let first = self.first_frame();
        if frame < first {
            return None;
        }
        self.boxes.get((frame - first) as usize)
    }

    /// Inclusive frame span shared with `other`.
    pub fn overlap(&self, other: &HeadTrack) -> Option<(u64, u64)> {
        let lo = self.first_frame().max(other.first_frame());
        let hi = self.last_frame().min(other.last_frame());
        (lo <= hi).then_some((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overlap {
    Additive,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadMapConfig {
    /// σ = sigma_scale · max(w, h) · 64 cells.
    pub sigma_scale: f64,
    pub target_amplitude: f64,
    pub bystander_amplitude: f64,
    pub overlap: Overlap,
    /// Track length τ.
    pub track_len: usize,
    /// Number of maps M.
    pub map_len: usize,
}

impl Default for HeadMapConfig {
    fn default() -> Self {
        HeadMapConfig {
            sigma_scale: 0.5,
            target_amplitude: 1.0,
            bystander_amplitude: 0.5,
            overlap: Overlap::Additive,
            track_len: 10,
            map_len: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePair {
    pub a: usize,
    pub b: usize,
    pub span: (u64, u64),
    /// False for pairs not involving the child (trainer–trainer); those are
    /// scored but excluded from analysis.
    pub child_relevant: bool,
}

/// All unordered pairs of tracks co-visible for at least `track_len` frames.
pub fn enumerate_pairs(
    tracks: &[HeadTrack],
    child_id: &str,
    track_len: usize,
) -> Vec<CandidatePair> {
    let mut out = Vec::new();
    for i in 0..tracks.len() {
        for j in i + 1..tracks.len() {
            if let Some((lo, hi)) = tracks[i].overlap(&tracks[j]) {
                if (hi - lo + 1) as usize >= track_len {
                    out.push(CandidatePair {
                        a: i,
                        b: j,
                        span: (lo, hi),
                        child_relevant: tracks[i].person_id == child_id
                            || tracks[j].person_id == child_id,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadMapStack {
    /// M row-major 64×64 grids; row is the y axis.
    pub maps: Vec<Vec<f64>>,
    pub frames: Vec<u64>,
    pub pair: (String, String),
    pub bystanders: Vec<String>,
}

impl HeadMapStack {
    pub fn get(&self, m: usize, row: usize, col: usize) -> f64 {
        self.maps[m][row * GRID + col]
    }

    pub fn argmax(&self, m: usize) -> (usize, usize) {
        let idx = self.maps[m]
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            })
            .0;
        (idx / GRID, idx % GRID)
    }
}

pub fn sigma_cells(b: &HeadBox, sigma_scale: f64) -> f64 {
    sigma_scale * b.w.max(b.h) * GRID as f64
}

/// Frames sampled uniformly over `[lo, hi]`, endpoints included.
pub fn sample_frames(lo: u64, hi: u64, m: usize) -> Vec<u64> {
    let span = (hi - lo) as f64;
    match m {
        0 => vec![],
        1 => vec![lo],
        _ => (0..m)
            .map(|k| lo + (k as f64 * span / (m - 1) as f64).round() as u64)
            .collect(),
    }
}

fn splat(grid: &mut [f64], b: &HeadBox, amplitude: f64, cfg: &HeadMapConfig) {
    let sigma = sigma_cells(b, cfg.sigma_scale);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let (x0, y0) = (b.cx * GRID as f64, b.cy * GRID as f64);
    for row in 0..GRID {
        let dy = row as f64 - y0;
        for col in 0..GRID {
            let dx = col as f64 - x0;
            let v = amplitude * (-(dx * dx + dy * dy) * inv).exp();
            let cell = &mut grid[row * GRID + col];
            *cell = match cfg.overlap {
                Overlap::Additive => *cell + v,
                Overlap::Max => cell.max(v),
            };
        }
    }
}

pub fn build_headmap(
    pair: (&HeadTrack, &HeadTrack),
    others: &[HeadTrack],
    cfg: &HeadMapConfig,
) -> Result<HeadMapStack> {
    if cfg.map_len == 0 {
        return Err(Error::invalid("map_len must be at least 1"));
    }
    if !(cfg.sigma_scale > 0.0 && cfg.sigma_scale.is_finite()) {
        return Err(Error::invalid("sigma_scale must be positive"));
    }
    let (lo, hi) = pair.0.overlap(pair.1).ok_or_else(|| {
        Error::invalid(format!(
            "tracks {} and {} never co-occur",
            pair.0.person_id, pair.1.person_id
        ))
    })?;
    let len = (hi - lo + 1) as usize;
    if cfg.map_len > len {
        return Err(Error::invalid(format!(
            "map_len {} exceeds shared track length {len}",
            cfg.map_len
        )));
    }
    let frames = sample_frames(lo, hi, cfg.map_len);
    let mut maps = Vec::with_capacity(frames.len());
    for &f in &frames {
        let mut grid = vec![0.0; GRID * GRID];
        for t in [pair.0, pair.1] {
            if let Some(b) = t.at(f) {
                splat(&mut grid, b, cfg.target_amplitude, cfg);
            }
        }
        for t in others {
            if let Some(b) = t.at(f) {
                splat(&mut grid, b, cfg.bystander_amplitude, cfg);
            }
        }
        maps.push(grid);
    }
    Ok(HeadMapStack {
        maps,
        frames,
        pair: (pair.0.person_id.clone(), pair.1.person_id.clone()),
        bystanders: others.iter().map(|t| t.person_id.clone()).collect(),
    })
}

/// Grids as CSV blocks: a `# map k frame f` line followed by 64 rows of 64
/// values; blocks separated by a blank line.
pub fn write_headmap_csv(stack: &HeadMapStack) -> String {
    let mut out = String::new();
    for (k, (grid, frame)) in stack.maps.iter().zip(&stack.frames).enumerate() {
        if k > 0 {
            out.push('\n');
        }
        writeln!(out, "# map {k} frame {frame}").unwrap();
        for row in grid.chunks(GRID) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn parse_headmap_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut maps = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') {
            if !current.is_empty() {
                maps.push(std::mem::take(&mut current));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        for v in line.split(',') {
            current.push(
                v.parse()
                    .map_err(|_| Error::invalid(format!("line {}: bad value {v:?}", i + 1)))?,
            );
        }
    }
    if !current.is_empty() {
        maps.push(current);
    }
    if maps.iter().any(|m| m.len() != GRID * GRID) {
        return Err(Error::invalid("grid is not 64×64"));
    }
    Ok(maps)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn still_track(
        id: &str,
        start: u64,
        n: u64,
        cx: f64,
        cy: f64,
        size: f64,
    ) -> HeadTrack {
        let boxes = (start..start + n)
            .map(|f| HeadBox::new(f, cx, cy, size, size).unwrap())
            .collect();
        HeadTrack::new(id, boxes).unwrap()
    }

    #[test]
    fn pair_enumeration() {
        let tracks = vec![
            still_track("child", 0, 20, 0.2, 0.5, 0.1),
            still_track("t1", 0, 20, 0.5, 0.5, 0.1),
            still_track("t2", 0, 20, 0.8, 0.5, 0.1),
        ];
        let pairs = enumerate_pairs(&tracks, "child", 10);
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs.iter().filter(|p| p.child_relevant).count(), 2);

        assert!(enumerate_pairs(&tracks[..1], "child", 10).is_empty());

        let short = vec![
            still_track("child", 0, 20, 0.2, 0.5, 0.1),
            still_track("t1", 15, 20, 0.5, 0.5, 0.1),
        ];
        assert!(enumerate_pairs(&short, "child", 10).is_empty());
    }

    #[test]
    fn centred_head_peaks_at_centre() {
        let a = still_track("a", 0, 10, 0.5, 0.5, 0.1);
        let b = still_track("b", 0, 10, 0.5, 0.5, 0.1);
        let stack = build_headmap((&a, &b), &[], &HeadMapConfig::default()).unwrap();
        assert_eq!(stack.maps.len(), 10);
        for m in 0..10 {
            assert_eq!(stack.argmax(m), (32, 32));
        }
    }

    #[test]
    fn bystander_adds_mass() {
        let a = still_track("a", 0, 10, 0.3, 0.5, 0.1);
        let b = still_track("b", 0, 10, 0.7, 0.5, 0.1);
        let c = still_track("c", 0, 10, 0.5, 0.1, 0.1);
        let cfg = HeadMapConfig::default();
        let without = build_headmap((&a, &b), &[], &cfg).unwrap();
        let with = build_headmap((&a, &b), &[c], &cfg).unwrap();
        let nz = |s: &HeadMapStack| s.maps[0].iter().filter(|&&v| v > 1e-12).count();
        assert!(nz(&with) > nz(&without));
        assert_eq!(with.bystanders, vec!["c".to_string()]);
    }

    #[test]
    fn map_len_beyond_track_is_error() {
        let a = still_track("a", 0, 5, 0.3, 0.5, 0.1);
        let b = still_track("b", 0, 5, 0.7, 0.5, 0.1);
        assert!(build_headmap((&a, &b), &[], &HeadMapConfig::default()).is_err());
    }

    #[test]
    fn uniform_sampling_includes_endpoints() {
        assert_eq!(sample_frames(0, 9, 10), (0..10).collect::<Vec<_>>());
        assert_eq!(sample_frames(10, 30, 3), vec![10, 20, 30]);
        assert_eq!(sample_frames(4, 4, 1), vec![4]);
    }

    #[test]
    fn csv_round_trip() {
        let a = still_track("a", 0, 10, 0.3, 0.5, 0.1);
        let b = still_track("b", 0, 10, 0.7, 0.4, 0.2);
        let cfg = HeadMapConfig {
            map_len: 2,
            ..Default::default()
        };
        let stack = build_headmap((&a, &b), &[], &cfg).unwrap();
        assert_eq!(
            parse_headmap_csv(&write_headmap_csv(&stack)).unwrap(),
            stack.maps
        );
    }
}
