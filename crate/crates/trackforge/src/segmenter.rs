//! Oracle VAD and sliding-window segmentation.
//!
//! Speech regions come straight from the reference annotation; a sliding
//! window then divides each region into overlapping segments, dropping any
//! candidate shorter than the configured minimum.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::timeline::{
    interval_intersection, merge_speaker_timeline, ReferenceAnnotation, SpeakerId, TimeInterval,
    TIME_EPS,
};

/// Sliding-window configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterConfig {
    /// Window width in seconds.
    pub window_width: f64,
    /// Window step in seconds.
    pub step: f64,
    /// Segments shorter than this are discarded.
    pub min_length: f64,
    /// Fraction of a window a speaker must cover to be in its truth set.
    pub activity_fraction: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            window_width: 1.0,
            step: 0.5,
            min_length: 0.5,
            activity_fraction: 0.5,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= self.window_width + TIME_EPS) {
            return Err(Error::InvalidArgument(format!(
                "step must satisfy 0 < step <= window width, got {}",
                self.step
            )));
        }
        if !(self.min_length > 0.0 && self.min_length <= self.window_width + TIME_EPS) {
            return Err(Error::InvalidArgument(format!(
                "min length must satisfy 0 < min <= window width, got {}",
                self.min_length
            )));
        }
        if !(self.activity_fraction > 0.0 && self.activity_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "activity fraction must lie in (0, 1], got {}",
                self.activity_fraction
            )));
        }
        Ok(())
    }
}

/// Speech regions of a recording: the union of all reference entries.
pub fn oracle_vad(annotation: &ReferenceAnnotation) -> Vec<TimeInterval> {
    merge_speaker_timeline(annotation.entries())
}

/// Slide a window over each region independently. Window k of a region starts
/// at `region.start + k * step` and is truncated at the region end; windows
/// shorter than `min_length` are dropped. Indices are global and consecutive
/// over the whole recording.
pub fn slide_windows(
    regions: &[TimeInterval],
    cfg: &SegmenterConfig,
) -> Result<Vec<(usize, TimeInterval)>> {
    cfg.validate()?;
    let mut out = Vec::new();
    let mut index = 0usize;
    for region in regions {
        let mut k = 0usize;
        loop {
            let start = region.start() + k as f64 * cfg.step;
            if start >= region.end() - TIME_EPS {
                break;
            }
            let end = (start + cfg.window_width).min(region.end());
            if end - start >= cfg.min_length - TIME_EPS {
                out.push((index, TimeInterval::new(start, end)?));
                index += 1;
            }
            k += 1;
        }
    }
    Ok(out)
}

/// Assign each window the set of speakers covering at least
/// `activity_fraction` of it (boundary inclusive).
pub fn label_segments(
    windows: &[(usize, TimeInterval)],
    annotation: &ReferenceAnnotation,
    cfg: &SegmenterConfig,
) -> Vec<(usize, TimeInterval, BTreeSet<SpeakerId>)> {
    let speakers = annotation.speakers_by_first_appearance();
    let timelines: Vec<(SpeakerId, Vec<TimeInterval>)> = speakers
        .into_iter()
        .map(|s| {
            let tl = annotation.speaker_timeline(&s);
            (s, tl)
        })
        .collect();
    windows
        .iter()
        .map(|&(index, window)| {
            let needed = cfg.activity_fraction * window.duration();
            let mut truth = BTreeSet::new();
            for (speaker, timeline) in &timelines {
                let active: f64 = timeline
                    .iter()
                    .map(|iv| interval_intersection(*iv, window))
                    .sum();
                if active >= needed - TIME_EPS {
                    truth.insert(speaker.clone());
                }
            }
            (index, window, truth)
        })
        .collect()
}

/// Convenience: VAD, slide and label in one pass.
pub fn segment_annotation(
    annotation: &ReferenceAnnotation,
    cfg: &SegmenterConfig,
) -> Result<Vec<(usize, TimeInterval, BTreeSet<SpeakerId>)>> {
    let regions = oracle_vad(annotation);
    let windows = slide_windows(&regions, cfg)?;
    Ok(label_segments(&windows, annotation, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::ReferenceEntry;
    use proptest::prelude::*;

    fn iv(s: f64, e: f64) -> TimeInterval {
        TimeInterval::new(s, e).unwrap()
    }

    fn entry(speaker: &str, start: f64, end: f64) -> ReferenceEntry {
        ReferenceEntry {
            interval: iv(start, end),
            speaker: speaker.into(),
        }
    }

    fn annotation(entries: Vec<ReferenceEntry>, duration: f64) -> ReferenceAnnotation {
        ReferenceAnnotation::new("rec", entries, duration).unwrap()
    }

    #[test]
    fn vad_merges_ground_truth() {
        let ann = annotation(
            vec![
                entry("A", 0.0, 2.0),
                entry("B", 1.0, 3.0),
                entry("A", 5.0, 6.0),
            ],
            10.0,
        );
        assert_eq!(oracle_vad(&ann), vec![iv(0.0, 3.0), iv(5.0, 6.0)]);

        let ann = annotation(vec![entry("A", 0.0, 1.0), entry("A", 1.0, 2.0)], 10.0);
        assert_eq!(oracle_vad(&ann), vec![iv(0.0, 2.0)]);
    }

    fn assert_windows(got: &[(usize, TimeInterval)], expected: &[(f64, f64)]) {
        assert_eq!(got.len(), expected.len(), "window count: {got:?}");
        for ((index, window), &(s, e)) in got.iter().zip(expected) {
            assert!(
                (window.start() - s).abs() < 1e-9 && (window.end() - e).abs() < 1e-9,
                "window {index} is [{}, {}), expected [{s}, {e})",
                window.start(),
                window.end()
            );
        }
    }

    #[test]
    fn slide_truncates_and_discards_short_tail() {
        let cfg = SegmenterConfig::default();
        let got = slide_windows(&[iv(0.0, 2.3)], &cfg).unwrap();
        assert_windows(&got, &[(0.0, 1.0), (0.5, 1.5), (1.0, 2.0), (1.5, 2.3)]);
        assert_eq!(got.iter().map(|w| w.0).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn slide_drops_region_below_min_length() {
        let cfg = SegmenterConfig::default();
        let got = slide_windows(&[iv(0.0, 0.4)], &cfg).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn slide_keeps_exact_min_length_window() {
        let cfg = SegmenterConfig::default();
        let got = slide_windows(&[iv(0.0, 1.0)], &cfg).unwrap();
        assert_windows(&got, &[(0.0, 1.0), (0.5, 1.0)]);
    }

    #[test]
    fn indices_are_global_across_regions() {
        let cfg = SegmenterConfig::default();
        let got = slide_windows(&[iv(0.0, 1.0), iv(5.0, 6.0)], &cfg).unwrap();
        assert_eq!(got.iter().map(|w| w.0).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn label_full_coverage() {
        let cfg = SegmenterConfig::default();
        let ann = annotation(vec![entry("A", 0.0, 1.0)], 10.0);
        let labeled = label_segments(&[(0, iv(0.0, 1.0))], &ann, &cfg);
        assert_eq!(labeled[0].2, BTreeSet::from(["A".into()]));
    }

    #[test]
    fn label_below_fraction_is_empty() {
        let cfg = SegmenterConfig::default();
        let ann = annotation(vec![entry("A", 0.0, 0.3)], 10.0);
        let labeled = label_segments(&[(0, iv(0.0, 1.0))], &ann, &cfg);
        assert!(labeled[0].2.is_empty());
    }

    #[test]
    fn label_boundary_coverage_is_inclusive() {
        let cfg = SegmenterConfig::default();
        let ann = annotation(vec![entry("A", 0.0, 1.0), entry("B", 0.5, 1.0)], 10.0);
        let labeled = label_segments(&[(0, iv(0.0, 1.0))], &ann, &cfg);
        assert_eq!(labeled[0].2, BTreeSet::from(["A".into(), "B".into()]));
    }

    proptest! {
        #[test]
        fn emitted_windows_respect_invariants(
            raw in proptest::collection::vec((0.0f64..60.0, 0.5f64..9.0), 1..8)
        ) {
            let cfg = SegmenterConfig::default();
            let regions = crate::timeline::merge_intervals(
                raw.iter().map(|&(s, d)| iv(s, s + d)),
            );
            let windows = slide_windows(&regions, &cfg).unwrap();

            for (_, w) in &windows {
                // Never shorter than the floor.
                prop_assert!(w.duration() >= cfg.min_length - TIME_EPS);
                // Inside exactly one region.
                let holding: Vec<_> = regions
                    .iter()
                    .filter(|r| {
                        w.start() >= r.start() - TIME_EPS && w.end() <= r.end() + TIME_EPS
                    })
                    .collect();
                prop_assert_eq!(holding.len(), 1);
            }

            // Consecutive windows in one region overlap by width - step,
            // except possibly the truncated last one.
            for pair in windows.windows(2) {
                let (a, b) = (pair[0].1, pair[1].1);
                if (b.start() - a.start() - cfg.step).abs() < 1e-9
                    && (a.duration() - cfg.window_width).abs() < 1e-9
                    && (b.duration() - cfg.window_width).abs() < 1e-9
                {
                    let overlap = interval_intersection(a, b);
                    prop_assert!((overlap - (cfg.window_width - cfg.step)).abs() < 1e-9);
                }
            }

            // Coverage: every region point is covered except a tail shorter
            // than min_length.
            for region in &regions {
                let covered = crate::timeline::merge_intervals(
                    windows
                        .iter()
                        .map(|w| w.1)
                        .filter(|w| w.start() >= region.start() - TIME_EPS
                            && w.end() <= region.end() + TIME_EPS),
                );
                if region.duration() >= cfg.min_length {
                    prop_assert_eq!(covered.len(), 1, "region {:?}", region);
                    prop_assert!((covered[0].start() - region.start()).abs() < 1e-9);
                    let tail = region.end() - covered[0].end();
                    prop_assert!(tail < cfg.min_length + 1e-9);
                }
            }
        }
    }
}
