//! Time intervals, reference annotations and the interval algebra used by
//! segmentation, scoring and augmentation.
//!
//! All intervals are half-open `[start, end)` and all comparisons use an
//! absolute tolerance of [`TIME_EPS`] seconds.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Absolute tolerance for time comparisons, in seconds.
pub const TIME_EPS: f64 = 1e-9;

/// Opaque speaker identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpeakerId(Arc<str>);

impl SpeakerId {
    pub fn new(id: impl AsRef<str>) -> Result<Self> {
        let id = id.as_ref();
        if id.is_empty() {
            return Err(Error::InvalidArgument("speaker id must be non-empty".into()));
        }
        Ok(SpeakerId(Arc::from(id)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SpeakerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SpeakerId {
    fn from(s: &str) -> Self {
        SpeakerId::new(s).expect("non-empty speaker id")
    }
}

/// Half-open time interval `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    start: f64,
    end: f64,
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "interval bounds must be finite, got [{start}, {end})"
            )));
        }
        if start < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "interval start must be >= 0, got {start}"
            )));
        }
        if end <= start {
            return Err(Error::InvalidArgument(format!(
                "interval end must exceed start, got [{start}, {end})"
            )));
        }
        Ok(TimeInterval { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// True if `t` lies inside the half-open interval.
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start - TIME_EPS && t < self.end - TIME_EPS
    }
}

/// Overlap duration of two intervals; zero when disjoint.
pub fn interval_intersection(a: TimeInterval, b: TimeInterval) -> f64 {
    (a.end.min(b.end) - a.start.max(b.start)).max(0.0)
}

/// One ground-truth entry: a speaker active over an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEntry {
    pub interval: TimeInterval,
    pub speaker: SpeakerId,
}

/// Ground-truth timeline of a recording. Entries of different speakers may
/// overlap; entries of the same speaker never do.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceAnnotation {
    recording_id: String,
    entries: Vec<ReferenceEntry>,
    duration: f64,
}

impl ReferenceAnnotation {
    pub fn new(
        recording_id: impl Into<String>,
        entries: Vec<ReferenceEntry>,
        duration: f64,
    ) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "recording duration must be positive, got {duration}"
            )));
        }
        for e in &entries {
            if e.interval.start() < -TIME_EPS || e.interval.end() > duration + TIME_EPS {
                return Err(Error::InvalidArgument(format!(
                    "entry [{:.3}, {:.3}) of {} outside recording [0, {:.3}]",
                    e.interval.start(),
                    e.interval.end(),
                    e.speaker,
                    duration
                )));
            }
        }
        // Same-speaker entries must not overlap each other.
        let mut by_speaker: BTreeMap<&SpeakerId, Vec<TimeInterval>> = BTreeMap::new();
        for e in &entries {
            by_speaker.entry(&e.speaker).or_default().push(e.interval);
        }
        for (speaker, mut ivs) in by_speaker {
            ivs.sort_by(|a, b| a.start().total_cmp(&b.start()));
            for pair in ivs.windows(2) {
                if pair[1].start() < pair[0].end() - TIME_EPS {
                    return Err(Error::InvalidArgument(format!(
                        "speaker {speaker} has overlapping entries at {:.3}",
                        pair[1].start()
                    )));
                }
            }
        }
        Ok(ReferenceAnnotation {
            recording_id: recording_id.into(),
            entries,
            duration,
        })
    }

    pub fn recording_id(&self) -> &str {
        &self.recording_id
    }

    pub fn entries(&self) -> &[ReferenceEntry] {
        &self.entries
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Distinct speakers ordered by the start of their earliest entry.
    pub fn speakers_by_first_appearance(&self) -> Vec<SpeakerId> {
        let mut first: BTreeMap<SpeakerId, f64> = BTreeMap::new();
        for e in &self.entries {
            let t = first.entry(e.speaker.clone()).or_insert(f64::INFINITY);
            if e.interval.start() < *t {
                *t = e.interval.start();
            }
        }
        let mut order: Vec<(SpeakerId, f64)> = first.into_iter().collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        order.into_iter().map(|(s, _)| s).collect()
    }

    /// Merged active timeline of one speaker.
    pub fn speaker_timeline(&self, speaker: &SpeakerId) -> Vec<TimeInterval> {
        merge_intervals(
            self.entries
                .iter()
                .filter(|e| &e.speaker == speaker)
                .map(|e| e.interval),
        )
    }

    /// Active duration of `speaker` within `window`.
    pub fn speaker_time_in(&self, speaker: &SpeakerId, window: TimeInterval) -> f64 {
        self.speaker_timeline(speaker)
            .iter()
            .map(|iv| interval_intersection(*iv, window))
            .sum()
    }

    /// Total duration where at least `min_active` speakers are simultaneously
    /// active.
    pub fn multi_speaker_time(&self, min_active: usize) -> f64 {
        let mut points: Vec<f64> = Vec::with_capacity(self.entries.len() * 2);
        for e in &self.entries {
            points.push(e.interval.start());
            points.push(e.interval.end());
        }
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
        let mut total = 0.0;
        for pair in points.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            if hi - lo <= TIME_EPS {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let active = self
                .entries
                .iter()
                .filter(|e| e.interval.start() <= mid && mid < e.interval.end())
                .count();
            if active >= min_active {
                total += hi - lo;
            }
        }
        total
    }
}

/// Union of intervals as a minimal sorted sequence of disjoint intervals.
/// Intervals that touch within [`TIME_EPS`] are merged.
pub fn merge_intervals(intervals: impl IntoIterator<Item = TimeInterval>) -> Vec<TimeInterval> {
    let mut ivs: Vec<TimeInterval> = intervals.into_iter().collect();
    ivs.sort_by(|a, b| a.start().total_cmp(&b.start()));
    let mut merged: Vec<TimeInterval> = Vec::with_capacity(ivs.len());
    for iv in ivs {
        match merged.last_mut() {
            Some(last) if iv.start() <= last.end() + TIME_EPS => {
                if iv.end() > last.end() {
                    *last = TimeInterval::new(last.start(), iv.end()).expect("valid merge");
                }
            }
            _ => merged.push(iv),
        }
    }
    merged
}

/// Union of all entry intervals, regardless of speaker.
pub fn merge_speaker_timeline(entries: &[ReferenceEntry]) -> Vec<TimeInterval> {
    merge_intervals(entries.iter().map(|e| e.interval))
}

/// Subtract `holes` from `base`; both inputs must be sorted and disjoint.
pub fn subtract_intervals(base: &[TimeInterval], holes: &[TimeInterval]) -> Vec<TimeInterval> {
    let mut out = Vec::new();
    for &iv in base {
        let mut cursor = iv.start();
        for h in holes {
            if h.end() <= cursor + TIME_EPS || h.start() >= iv.end() - TIME_EPS {
                continue;
            }
            if h.start() > cursor + TIME_EPS {
                out.push(TimeInterval::new(cursor, h.start()).expect("positive piece"));
            }
            cursor = cursor.max(h.end());
        }
        if iv.end() > cursor + TIME_EPS {
            out.push(TimeInterval::new(cursor, iv.end()).expect("positive piece"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(start: f64, end: f64) -> TimeInterval {
        TimeInterval::new(start, end).unwrap()
    }

    fn entry(speaker: &str, start: f64, end: f64) -> ReferenceEntry {
        ReferenceEntry {
            interval: iv(start, end),
            speaker: speaker.into(),
        }
    }

    #[test]
    fn intersection_examples() {
        assert_eq!(interval_intersection(iv(0.0, 1.0), iv(0.5, 1.5)), 0.5);
        assert_eq!(interval_intersection(iv(0.0, 1.0), iv(2.0, 3.0)), 0.0);
        let d = interval_intersection(iv(0.0, 2.3), iv(1.5, 2.5));
        assert!((d - 0.8).abs() < 1e-12);
    }

    #[test]
    fn merge_examples() {
        let merged = merge_speaker_timeline(&[entry("A", 0.0, 2.0), entry("B", 1.0, 3.0)]);
        assert_eq!(merged, vec![iv(0.0, 3.0)]);

        let merged = merge_speaker_timeline(&[entry("A", 0.0, 1.0), entry("B", 2.0, 3.0)]);
        assert_eq!(merged, vec![iv(0.0, 1.0), iv(2.0, 3.0)]);

        assert!(merge_speaker_timeline(&[]).is_empty());

        // Touching intervals merge under half-open semantics.
        let merged = merge_speaker_timeline(&[entry("A", 0.0, 1.0), entry("A", 1.0, 2.0)]);
        assert_eq!(merged, vec![iv(0.0, 2.0)]);
    }

    #[test]
    fn interval_rejects_degenerate() {
        assert!(TimeInterval::new(1.0, 1.0).is_err());
        assert!(TimeInterval::new(2.0, 1.0).is_err());
        assert!(TimeInterval::new(-1.0, 1.0).is_err());
        assert!(TimeInterval::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn annotation_rejects_same_speaker_overlap() {
        let ann = ReferenceAnnotation::new(
            "rec",
            vec![entry("A", 0.0, 2.0), entry("A", 1.0, 3.0)],
            10.0,
        );
        assert!(ann.is_err());

        // Different speakers may overlap.
        let ann = ReferenceAnnotation::new(
            "rec",
            vec![entry("A", 0.0, 2.0), entry("B", 1.0, 3.0)],
            10.0,
        );
        assert!(ann.is_ok());
    }

    #[test]
    fn annotation_rejects_out_of_range_entries() {
        let ann = ReferenceAnnotation::new("rec", vec![entry("A", 5.0, 12.0)], 10.0);
        assert!(ann.is_err());
    }

    #[test]
    fn first_appearance_ordering() {
        let ann = ReferenceAnnotation::new(
            "rec",
            vec![
                entry("B", 3.0, 4.0),
                entry("A", 0.0, 1.0),
                entry("B", 1.0, 2.0),
            ],
            10.0,
        )
        .unwrap();
        let order = ann.speakers_by_first_appearance();
        assert_eq!(order, vec![SpeakerId::from("A"), SpeakerId::from("B")]);
    }

    #[test]
    fn subtract_cuts_holes() {
        let base = vec![iv(0.0, 10.0)];
        let holes = vec![iv(2.0, 3.0), iv(5.0, 6.0)];
        let got = subtract_intervals(&base, &holes);
        assert_eq!(got, vec![iv(0.0, 2.0), iv(3.0, 5.0), iv(6.0, 10.0)]);
    }

    /// Brute-force union duration on a 1 ms grid.
    fn frame_union_duration(intervals: &[TimeInterval], horizon: f64) -> f64 {
        let frames = (horizon / 0.001).ceil() as usize;
        let mut covered = 0usize;
        for k in 0..frames {
            let mid = (k as f64 + 0.5) * 0.001;
            if intervals
                .iter()
                .any(|iv| iv.start() <= mid && mid < iv.end())
            {
                covered += 1;
            }
        }
        covered as f64 * 0.001
    }

    proptest! {
        #[test]
        fn intersection_symmetric_nonnegative(
            a0 in 0.0f64..50.0, ad in 0.01f64..10.0,
            b0 in 0.0f64..50.0, bd in 0.01f64..10.0,
        ) {
            let a = iv(a0, a0 + ad);
            let b = iv(b0, b0 + bd);
            let ab = interval_intersection(a, b);
            let ba = interval_intersection(b, a);
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
        }

        #[test]
        fn merge_disjoint_sorted_and_matches_frame_oracle(
            raw in proptest::collection::vec((0.0f64..30.0, 0.01f64..5.0), 0..12)
        ) {
            let intervals: Vec<TimeInterval> =
                raw.iter().map(|&(s, d)| iv(s, s + d)).collect();
            let merged = merge_intervals(intervals.clone());

            for pair in merged.windows(2) {
                prop_assert!(pair[0].end() < pair[1].start() + TIME_EPS);
            }
            let total: f64 = merged.iter().map(TimeInterval::duration).sum();
            let input_total: f64 = intervals.iter().map(TimeInterval::duration).sum();
            prop_assert!(total <= input_total + TIME_EPS);

            // Frame oracle: 1 ms quantization, 2 ms slack per boundary.
            let oracle = frame_union_duration(&intervals, 40.0);
            let slack = 0.002 * (2 * intervals.len().max(1)) as f64;
            prop_assert!((total - oracle).abs() <= slack,
                "merged {} vs frame oracle {}", total, oracle);
        }
    }
}
