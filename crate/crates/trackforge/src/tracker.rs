//! Online segment labeling and post-processing.
//!
//! Segments are processed strictly in index order. A segment's label is
//! provisional when emitted and becomes final when the next segment arrives:
//! if the labels two back and just computed agree and the one in between
//! differs, the in-between label is rewritten to match. Rewrites cascade
//! left-to-right, and contiguity requires consecutive indices whose windows
//! touch (same speech region).

use crate::embedding::{EmbeddingSegment, Label, LabeledSegment, ModelBank};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::timeline::{TimeInterval, TIME_EPS};

/// Labeling mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackingMode {
    /// Label with the highest-scoring model (ties to the lowest index).
    Identify,
    /// Label with the highest-scoring model only if its score reaches the
    /// threshold, otherwise UNKNOWN.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub mode: TrackingMode,
    /// Acceptance threshold for [`TrackingMode::Verify`]; probabilities for
    /// the network scorer, log-likelihood ratios for the PLDA scorer.
    pub threshold: f64,
    pub smoothing: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            mode: TrackingMode::Identify,
            threshold: 0.5,
            smoothing: true,
        }
    }
}

/// Anything that scores one segment against every model of a bank.
pub trait SegmentScorer<F: Scalar> {
    fn score(&self, segment: &EmbeddingSegment<F>, bank: &ModelBank<F>) -> Result<Vec<F>>;
}

impl<F: Scalar> SegmentScorer<F> for crate::net::NetworkParams<F> {
    fn score(&self, segment: &EmbeddingSegment<F>, bank: &ModelBank<F>) -> Result<Vec<F>> {
        crate::net::score_segment(self, segment, bank)
    }
}

fn decide<F: Scalar>(scores: &[F], bank: &ModelBank<F>, cfg: &TrackerConfig) -> Label {
    let mut best = 0usize;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    match cfg.mode {
        TrackingMode::Identify => Label::Speaker(bank.speaker(best).clone()),
        TrackingMode::Verify => {
            if scores[best].to_f64_lossy() >= cfg.threshold {
                Label::Speaker(bank.speaker(best).clone())
            } else {
                Label::Unknown
            }
        }
    }
}

/// Two segments are contiguous when their indices are consecutive and their
/// windows touch or overlap (no VAD gap in between).
fn contiguous(a_index: usize, a: TimeInterval, b_index: usize, b: TimeInterval) -> bool {
    b_index == a_index + 1 && b.start() <= a.end() + TIME_EPS
}

/// Events emitted while tracking online.
#[derive(Debug, Clone, PartialEq)]
pub enum TrackEvent<F: Scalar> {
    /// First decision for a segment; may still be rewritten once.
    Provisional(LabeledSegment<F>),
    /// The segment's label is now final.
    Final(LabeledSegment<F>),
}

/// Streaming tracker for one recording.
pub struct OnlineTracker<'a, F: Scalar, S: SegmentScorer<F>> {
    scorer: &'a S,
    bank: &'a ModelBank<F>,
    cfg: TrackerConfig,
    pending: Option<LabeledSegment<F>>,
    last_final: Option<LabeledSegment<F>>,
    last_index: Option<usize>,
}

impl<'a, F: Scalar, S: SegmentScorer<F>> OnlineTracker<'a, F, S> {
    pub fn new(scorer: &'a S, bank: &'a ModelBank<F>, cfg: TrackerConfig) -> Self {
        OnlineTracker {
            scorer,
            bank,
            cfg,
            pending: None,
            last_final: None,
            last_index: None,
        }
    }

    /// Consume the next segment; returns the finalized previous segment (if
    /// any) followed by the provisional decision for this one.
    pub fn push(&mut self, segment: &EmbeddingSegment<F>) -> Result<Vec<TrackEvent<F>>> {
        if let Some(prev) = self.last_index {
            if segment.index <= prev {
                return Err(Error::InvalidArgument(format!(
                    "segments must arrive in index order, got {} after {prev}",
                    segment.index
                )));
            }
        }
        self.last_index = Some(segment.index);

        let scores = self.scorer.score(segment, self.bank)?;
        let current = LabeledSegment {
            segment_index: segment.index,
            interval: segment.interval,
            label: decide(&scores, self.bank, &self.cfg),
            scores,
        };

        let mut events = Vec::with_capacity(2);
        if let Some(mut mid) = self.pending.take() {
            if self.cfg.smoothing {
                if let Some(back) = &self.last_final {
                    let chain = contiguous(back.segment_index, back.interval, mid.segment_index, mid.interval)
                        && contiguous(mid.segment_index, mid.interval, current.segment_index, current.interval);
                    if chain && back.label == current.label && back.label != mid.label {
                        mid.label = current.label.clone();
                    }
                }
            }
            events.push(TrackEvent::Final(mid.clone()));
            self.last_final = Some(mid);
        }
        events.push(TrackEvent::Provisional(current.clone()));
        self.pending = Some(current);
        Ok(events)
    }

    /// Flush the last pending segment; no rewrite is possible without a
    /// successor.
    pub fn finish(&mut self) -> Vec<TrackEvent<F>> {
        match self.pending.take() {
            Some(last) => {
                self.last_final = Some(last.clone());
                vec![TrackEvent::Final(last)]
            }
            None => Vec::new(),
        }
    }
}

/// Label a whole stream online and return the finalized labels.
pub fn track_stream<F: Scalar, S: SegmentScorer<F>>(
    scorer: &S,
    bank: &ModelBank<F>,
    stream: &[EmbeddingSegment<F>],
    cfg: &TrackerConfig,
) -> Result<Vec<LabeledSegment<F>>> {
    let mut tracker = OnlineTracker::new(scorer, bank, *cfg);
    let mut out = Vec::with_capacity(stream.len());
    for segment in stream {
        for event in tracker.push(segment)? {
            if let TrackEvent::Final(labeled) = event {
                out.push(labeled);
            }
        }
    }
    for event in tracker.finish() {
        if let TrackEvent::Final(labeled) = event {
            out.push(labeled);
        }
    }
    Ok(out)
}

/// Batch smoothing: one left-to-right pass of the in-between rewrite rule.
/// Equivalent to what the online tracker applies with a one-segment lag.
pub fn smooth<F: Scalar>(mut labels: Vec<LabeledSegment<F>>) -> Vec<LabeledSegment<F>> {
    for t in 2..labels.len() {
        let chain = contiguous(
            labels[t - 2].segment_index,
            labels[t - 2].interval,
            labels[t - 1].segment_index,
            labels[t - 1].interval,
        ) && contiguous(
            labels[t - 1].segment_index,
            labels[t - 1].interval,
            labels[t].segment_index,
            labels[t].interval,
        );
        if chain && labels[t - 2].label == labels[t].label && labels[t - 2].label != labels[t - 1].label
        {
            labels[t - 1].label = labels[t].label.clone();
        }
    }
    labels
}

/// Merge maximal runs of equal labels over contiguous segments into
/// hypothesis intervals. UNKNOWN runs are kept as UNKNOWN intervals.
pub fn merge_contiguous<F: Scalar>(labels: &[LabeledSegment<F>]) -> Vec<(TimeInterval, Label)> {
    let mut out: Vec<(TimeInterval, Label)> = Vec::new();
    let mut run: Option<(TimeInterval, Label, usize)> = None;
    for seg in labels {
        run = Some(match run.take() {
            Some((span, label, last_index))
                if label == seg.label
                    && contiguous(last_index, span, seg.segment_index, seg.interval) =>
            {
                let span = TimeInterval::new(span.start(), span.end().max(seg.interval.end()))
                    .expect("growing run span");
                (span, label, seg.segment_index)
            }
            Some(done) => {
                out.push((done.0, done.1));
                (seg.interval, seg.label.clone(), seg.segment_index)
            }
            None => (seg.interval, seg.label.clone(), seg.segment_index),
        });
    }
    if let Some((span, label, _)) = run {
        out.push((span, label));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    use crate::embedding::SpeakerModel;

    fn iv(s: f64, e: f64) -> TimeInterval {
        TimeInterval::new(s, e).unwrap()
    }

    fn bank2() -> ModelBank<f64> {
        ModelBank::new(vec![
            SpeakerModel::new("A".into(), vec![1.0, 0.0], 1, iv(0.0, 3.0)).unwrap(),
            SpeakerModel::new("B".into(), vec![0.0, 1.0], 1, iv(3.0, 6.0)).unwrap(),
        ])
        .unwrap()
    }

    /// Scorer that replays a fixed score table, keyed by segment index.
    struct TableScorer(Vec<Vec<f64>>);

    impl SegmentScorer<f64> for TableScorer {
        fn score(&self, segment: &EmbeddingSegment<f64>, _: &ModelBank<f64>) -> Result<Vec<f64>> {
            Ok(self.0[segment.index].clone())
        }
    }

    fn stream(n: usize) -> Vec<EmbeddingSegment<f64>> {
        (0..n)
            .map(|i| {
                EmbeddingSegment::new(
                    i,
                    iv(i as f64 * 0.5, i as f64 * 0.5 + 1.0),
                    vec![0.0, 0.0],
                    BTreeSet::new(),
                )
                .unwrap()
            })
            .collect()
    }

    fn labels_of(labeled: &[LabeledSegment<f64>]) -> String {
        labeled.iter().map(|l| l.label.to_string()).collect::<Vec<_>>().join("")
    }

    #[test]
    fn identify_takes_argmax() {
        let scorer = TableScorer(vec![vec![0.9, 0.2]]);
        let cfg = TrackerConfig { smoothing: false, ..TrackerConfig::default() };
        let out = track_stream(&scorer, &bank2(), &stream(1), &cfg).unwrap();
        assert_eq!(out[0].label, Label::Speaker("A".into()));
        assert_eq!(out[0].scores, vec![0.9, 0.2]);
    }

    #[test]
    fn verify_below_threshold_is_unknown() {
        let scorer = TableScorer(vec![vec![0.4, 0.3]]);
        let cfg = TrackerConfig {
            mode: TrackingMode::Verify,
            threshold: 0.5,
            smoothing: false,
        };
        let out = track_stream(&scorer, &bank2(), &stream(1), &cfg).unwrap();
        assert_eq!(out[0].label, Label::Unknown);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let scorer = TableScorer(vec![vec![0.5, 0.5]]);
        let cfg = TrackerConfig { smoothing: false, ..TrackerConfig::default() };
        let out = track_stream(&scorer, &bank2(), &stream(1), &cfg).unwrap();
        assert_eq!(out[0].label, Label::Speaker("A".into()));
    }

    fn scores_for(pattern: &str) -> TableScorer {
        TableScorer(
            pattern
                .chars()
                .map(|c| if c == 'A' { vec![0.9, 0.1] } else { vec![0.1, 0.9] })
                .collect(),
        )
    }

    #[test]
    fn smoothing_rewrites_lone_disagreement() {
        let cfg = TrackerConfig::default();
        let out = track_stream(&scores_for("ABA"), &bank2(), &stream(3), &cfg).unwrap();
        assert_eq!(labels_of(&out), "AAA");

        let out = track_stream(&scores_for("ABB"), &bank2(), &stream(3), &cfg).unwrap();
        assert_eq!(labels_of(&out), "ABB");
    }

    #[test]
    fn smoothing_cascades_in_one_pass() {
        let cfg = TrackerConfig::default();
        let out = track_stream(&scores_for("ABABA"), &bank2(), &stream(5), &cfg).unwrap();
        assert_eq!(labels_of(&out), "AAAAA");
    }

    #[test]
    fn batch_smooth_matches_online_smoothing() {
        for pattern in ["ABA", "ABBA", "ABABA", "AABBA", "BABAB"] {
            let cfg_raw = TrackerConfig { smoothing: false, ..TrackerConfig::default() };
            let raw = track_stream(
                &scores_for(pattern),
                &bank2(),
                &stream(pattern.len()),
                &cfg_raw,
            )
            .unwrap();
            let cfg_on = TrackerConfig::default();
            let online = track_stream(
                &scores_for(pattern),
                &bank2(),
                &stream(pattern.len()),
                &cfg_on,
            )
            .unwrap();
            assert_eq!(labels_of(&smooth(raw)), labels_of(&online), "{pattern}");
        }
    }

    #[test]
    fn smoothing_requires_contiguity() {
        // A VAD gap between segments 1 and 2 blocks the rewrite.
        let mut segs = stream(3);
        segs[2] = EmbeddingSegment::new(2, iv(10.0, 11.0), vec![0.0, 0.0], BTreeSet::new()).unwrap();
        let cfg = TrackerConfig::default();
        let out = track_stream(&scores_for("ABA"), &bank2(), &segs, &cfg).unwrap();
        assert_eq!(labels_of(&out), "ABA");
    }

    #[test]
    fn online_contract_one_segment_lag() {
        let cfg = TrackerConfig::default();
        let bank = bank2();
        let scorer = scores_for("ABA");
        let segs = stream(3);
        let mut tracker = OnlineTracker::new(&scorer, &bank, cfg);

        let ev0 = tracker.push(&segs[0]).unwrap();
        assert_eq!(ev0.len(), 1);
        assert!(matches!(&ev0[0], TrackEvent::Provisional(l) if l.segment_index == 0));

        let ev1 = tracker.push(&segs[1]).unwrap();
        assert!(matches!(&ev1[0], TrackEvent::Final(l) if l.segment_index == 0));
        assert!(matches!(&ev1[1], TrackEvent::Provisional(l) if l.segment_index == 1));

        let ev2 = tracker.push(&segs[2]).unwrap();
        match &ev2[0] {
            TrackEvent::Final(l) => {
                assert_eq!(l.segment_index, 1);
                assert_eq!(l.label, Label::Speaker("A".into()), "rewritten on finalize");
            }
            other => panic!("expected final, got {other:?}"),
        }

        let tail = tracker.finish();
        assert!(matches!(&tail[0], TrackEvent::Final(l) if l.segment_index == 2));
    }

    #[test]
    fn out_of_order_segments_are_rejected() {
        let cfg = TrackerConfig::default();
        let bank = bank2();
        let scorer = scores_for("AA");
        let segs = stream(2);
        let mut tracker = OnlineTracker::new(&scorer, &bank, cfg);
        tracker.push(&segs[1]).unwrap();
        assert!(tracker.push(&segs[0]).is_err());
    }

    #[test]
    fn merge_runs_and_respect_gaps() {
        let mk = |i: usize, s: f64, e: f64, label: &str| LabeledSegment::<f64> {
            segment_index: i,
            interval: iv(s, e),
            label: Label::Speaker(label.into()),
            scores: vec![0.0, 0.0],
        };
        // Overlapping windows, A A B.
        let merged = merge_contiguous(&[
            mk(0, 0.0, 1.0, "A"),
            mk(1, 0.5, 1.5, "A"),
            mk(2, 1.0, 2.0, "B"),
        ]);
        assert_eq!(
            merged,
            vec![
                (iv(0.0, 1.5), Label::Speaker("A".into())),
                (iv(1.0, 2.0), Label::Speaker("B".into())),
            ]
        );

        // Single segment.
        let merged = merge_contiguous(&[mk(0, 0.0, 1.0, "A")]);
        assert_eq!(merged.len(), 1);

        // Same label across a VAD gap stays two intervals.
        let merged = merge_contiguous(&[mk(0, 0.0, 1.0, "A"), mk(1, 5.0, 6.0, "A")]);
        assert_eq!(merged.len(), 2);

        // UNKNOWN runs survive as UNKNOWN intervals.
        let unk = LabeledSegment::<f64> {
            segment_index: 1,
            interval: iv(0.5, 1.5),
            label: Label::Unknown,
            scores: vec![0.0, 0.0],
        };
        let merged = merge_contiguous(&[mk(0, 0.0, 1.0, "A"), unk]);
        assert_eq!(merged[1].1, Label::Unknown);
    }

    #[test]
    fn no_alternation_pattern_survives_smoothing() {
        // Randomized label streams; after smoothing no contiguous X Y X
        // remains.
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(31, 99, 0);
        for _ in 0..200 {
            let n = rng.random_range(3..40);
            let pattern: String = (0..n)
                .map(|_| if rng.random_range(0.0..1.0) < 0.5 { 'A' } else { 'B' })
                .collect();
            let cfg = TrackerConfig::default();
            let out =
                track_stream(&scores_for(&pattern), &bank2(), &stream(n), &cfg).unwrap();
            assert_eq!(out.len(), n);
            let text = labels_of(&out);
            let chars: Vec<char> = text.chars().collect();
            for t in 2..chars.len() {
                assert!(
                    !(chars[t - 2] == chars[t] && chars[t - 2] != chars[t - 1]),
                    "pattern {pattern} smoothed to {text} keeps X Y X at {t}"
                );
            }
        }
    }
}
