//! Synthetic conversation and embedding generation, plus ingestion of
//! externally computed embedding files.
//!
//! Speakers are isotropic Gaussians: a prototype mean per speaker (elementwise
//! std `between_std`) and elementwise observation noise (`within_std`).
//! Overlapped windows mix prototype means weighted by active duration.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embedding::EmbeddingSegment;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, DOMAIN_CONVERSATION, DOMAIN_NOISE, DOMAIN_SPEAKERS};
use crate::scalar::Scalar;
use crate::segmenter::{segment_annotation, SegmenterConfig};
use crate::timeline::{
    interval_intersection, ReferenceAnnotation, ReferenceEntry, SpeakerId, TimeInterval, TIME_EPS,
};

/// How far into the recording every target speaker must have appeared, so
/// that the longest enrollment window is always fillable.
const INTRO_DEADLINE: f64 = 15.0;

/// Simulator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Embedding dimension b.
    pub embedding_dim: usize,
    /// Elementwise std of prototype means.
    pub between_std: f64,
    /// Elementwise std of per-segment observation noise.
    pub within_std: f64,
    /// Uniform range of turn durations, seconds.
    pub turn_range: (f64, f64),
    /// Uniform range of pauses between turns, seconds.
    pub pause_range: (f64, f64),
    /// Target recording length, seconds (last turn may overshoot).
    pub recording_duration: f64,
    pub num_target_speakers: usize,
    pub num_nontarget_speakers: usize,
    /// Fraction of speech time the generator tries to overlap natively.
    pub overlap_target_fraction: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            embedding_dim: 32,
            between_std: 3.0,
            within_std: 1.0,
            turn_range: (2.0, 8.0),
            pause_range: (0.0, 1.0),
            recording_duration: 120.0,
            num_target_speakers: 2,
            num_nontarget_speakers: 0,
            overlap_target_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim < 8 {
            return Err(Error::InvalidArgument(format!(
                "embedding dim must be >= 8, got {}",
                self.embedding_dim
            )));
        }
        if !(self.between_std > 0.0 && self.within_std > 0.0) {
            return Err(Error::InvalidArgument(
                "between/within stds must be positive".into(),
            ));
        }
        if !(self.turn_range.0 > 0.0 && self.turn_range.1 >= self.turn_range.0) {
            return Err(Error::InvalidArgument("bad turn range".into()));
        }
        if !(self.pause_range.0 >= 0.0 && self.pause_range.1 >= self.pause_range.0) {
            return Err(Error::InvalidArgument("bad pause range".into()));
        }
        if self.num_target_speakers < 1 {
            return Err(Error::InvalidArgument(
                "need at least one target speaker".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.overlap_target_fraction) {
            return Err(Error::InvalidArgument(
                "overlap fraction must lie in [0, 1)".into(),
            ));
        }
        let s = self.num_target_speakers;
        if s > 1 {
            let budget = (INTRO_DEADLINE - 0.1) / (s - 1) as f64 - self.pause_range.1;
            if self.turn_range.0 > budget {
                return Err(Error::InvalidArgument(format!(
                    "cannot introduce {s} targets within {INTRO_DEADLINE} s given turn/pause ranges"
                )));
            }
        }
        Ok(())
    }

    /// Cap on intro-phase turn lengths that keeps the last target's first
    /// turn starting before the deadline.
    fn intro_turn_max(&self) -> f64 {
        if self.num_target_speakers <= 1 {
            return self.turn_range.1;
        }
        let budget =
            (INTRO_DEADLINE - 0.1) / (self.num_target_speakers - 1) as f64 - self.pause_range.1;
        self.turn_range.1.min(budget.max(self.turn_range.0))
    }
}

/// A speaker's prototype mean vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerPrototype<F: Scalar> {
    pub speaker: SpeakerId,
    pub mean: Vec<F>,
}

/// Draw prototypes for the given speaker ids.
pub fn gen_prototypes<F: Scalar>(
    ids: &[SpeakerId],
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SpeakerPrototype<F>>> {
    if ids.is_empty() {
        return Err(Error::InvalidArgument("need at least one speaker".into()));
    }
    cfg.validate()?;
    Ok(ids
        .iter()
        .map(|id| {
            let mean = (0..cfg.embedding_dim)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    F::from_f64_lossy(z * cfg.between_std)
                })
                .collect();
            SpeakerPrototype {
                speaker: id.clone(),
                mean,
            }
        })
        .collect())
}

/// Draw `n` prototypes with default ids `spk000`, `spk001`, ...
pub fn gen_speakers<F: Scalar>(
    n: usize,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SpeakerPrototype<F>>> {
    if n < 1 {
        return Err(Error::InvalidArgument("need n >= 1 speakers".into()));
    }
    let ids: Vec<SpeakerId> = (0..n).map(|k| format!("spk{k:03}").as_str().into()).collect();
    gen_prototypes(&ids, cfg, rng)
}

fn uniform_in(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 - range.0 <= f64::EPSILON {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

/// Generate a turn-taking conversation among targets, interleaving optional
/// non-target turns. Every target appears within the intro deadline; every
/// non-target gets at least one turn.
pub fn gen_conversation(
    recording_id: &str,
    targets: &[SpeakerId],
    nontargets: &[SpeakerId],
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ReferenceAnnotation> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::InvalidArgument("need at least one target".into()));
    }
    let mut entries: Vec<ReferenceEntry> = Vec::new();
    let mut clock = 0.0f64;
    let mut total_speech = 0.0f64;
    let mut total_overlap = 0.0f64;
    let mut last_target = targets.len() - 1;
    let intro_max = cfg.intro_turn_max();

    // Turn schedule: introduce every target, then give every non-target one
    // turn (separated by target turns), then mix freely.
    enum Slot {
        Target(usize),
        NonTarget(usize),
        Free,
    }
    let mut schedule: Vec<Slot> = (0..targets.len()).map(Slot::Target).collect();
    for j in 0..nontargets.len() {
        schedule.push(Slot::Free);
        schedule.push(Slot::NonTarget(j));
    }

    let mut slot_iter = schedule.into_iter();
    let mut intro_remaining = targets.len();
    while clock < cfg.recording_duration {
        let slot = slot_iter.next().unwrap_or(Slot::Free);
        let (speaker, is_target) = match slot {
            Slot::Target(k) => {
                last_target = k;
                (targets[k].clone(), true)
            }
            Slot::NonTarget(j) => (nontargets[j].clone(), false),
            Slot::Free => {
                let pick_nontarget = !nontargets.is_empty()
                    && rng.random_range(0.0..1.0)
                        < nontargets.len() as f64
                            / (targets.len() + nontargets.len()) as f64;
                if pick_nontarget {
                    let j = rng.random_range(0..nontargets.len());
                    (nontargets[j].clone(), false)
                } else {
                    let k = if targets.len() == 1 {
                        0
                    } else {
                        // Alternate: never repeat the previous target.
                        let mut k = rng.random_range(0..targets.len() - 1);
                        if k >= last_target {
                            k += 1;
                        }
                        k
                    };
                    last_target = k;
                    (targets[k].clone(), true)
                }
            }
        };

        let turn_max = if intro_remaining > 0 { intro_max } else { cfg.turn_range.1 };
        let turn = uniform_in(rng, (cfg.turn_range.0, turn_max.max(cfg.turn_range.0)));
        if is_target && intro_remaining > 0 {
            intro_remaining -= 1;
        }

        // Optionally pull this turn back over the previous one to create
        // native overlap, never between entries of the same speaker.
        let mut start = clock;
        let deficit = cfg.overlap_target_fraction * total_speech - total_overlap;
        if deficit > TIME_EPS && !entries.is_empty() {
            let prev = entries.last().unwrap();
            if prev.speaker != speaker {
                let cap = 0.5 * prev.interval.duration().min(turn);
                let pull = cap.min(deficit).min(clock - prev.interval.start() - TIME_EPS);
                if pull > TIME_EPS && clock - pull >= prev.interval.start() + TIME_EPS {
                    start = clock - pull;
                    total_overlap += interval_intersection(
                        prev.interval,
                        TimeInterval::new(start, start + turn)?,
                    );
                }
            }
        }

        let end = start + turn;
        entries.push(ReferenceEntry {
            interval: TimeInterval::new(start, end)?,
            speaker,
        });
        total_speech += turn;
        clock = clock.max(end) + uniform_in(rng, cfg.pause_range);
    }

    let duration = entries
        .iter()
        .map(|e| e.interval.end())
        .fold(cfg.recording_duration, f64::max);
    ReferenceAnnotation::new(recording_id, entries, duration)
}

/// One synthetic embedding for a window: duration-weighted mixture of the
/// active speakers' prototype means plus isotropic noise.
pub fn gen_embedding<F: Scalar>(
    active: &[(SpeakerId, f64)],
    prototypes: &[SpeakerPrototype<F>],
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<F>> {
    if active.is_empty() {
        return Err(Error::InvalidArgument(
            "speech window needs at least one active speaker".into(),
        ));
    }
    let by_id: BTreeMap<&SpeakerId, &[F]> = prototypes
        .iter()
        .map(|p| (&p.speaker, p.mean.as_slice()))
        .collect();
    let total: f64 = active.iter().map(|(_, d)| d).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument(
            "active durations must be positive".into(),
        ));
    }
    let mut out = vec![0.0f64; cfg.embedding_dim];
    for (speaker, duration) in active {
        let mean = by_id
            .get(speaker)
            .ok_or_else(|| Error::UnknownSpeaker(speaker.clone()))?;
        let w = duration / total;
        for (acc, &m) in out.iter_mut().zip(mean.iter()) {
            *acc += w * m.to_f64_lossy();
        }
    }
    Ok(out
        .into_iter()
        .map(|m| {
            let z: f64 = rng.sample(StandardNormal);
            F::from_f64_lossy(m + z * cfg.within_std)
        })
        .collect())
}

/// Segment an annotation and synthesize one embedding per window.
pub fn embeddings_for_annotation<F: Scalar>(
    annotation: &ReferenceAnnotation,
    prototypes: &[SpeakerPrototype<F>],
    cfg: &SimConfig,
    seg_cfg: &SegmenterConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EmbeddingSegment<F>>> {
    let labeled = segment_annotation(annotation, seg_cfg)?;
    let speakers = annotation.speakers_by_first_appearance();
    labeled
        .into_iter()
        .map(|(index, window, truth)| {
            // Mixing weights use every speaker with positive coverage, not
            // the truth-set dominance rule.
            let active: Vec<(SpeakerId, f64)> = speakers
                .iter()
                .filter_map(|s| {
                    let d = annotation.speaker_time_in(s, window);
                    (d > TIME_EPS).then(|| (s.clone(), d))
                })
                .collect();
            let vector = gen_embedding(&active, prototypes, cfg, rng)?;
            EmbeddingSegment::new(index, window, vector, truth)
        })
        .collect()
}

/// A fully generated recording.
#[derive(Debug, Clone)]
pub struct SimulatedRecording<F: Scalar> {
    pub annotation: ReferenceAnnotation,
    pub segments: Vec<EmbeddingSegment<F>>,
    /// Enrolled speakers in enrollment order.
    pub targets: Vec<SpeakerId>,
    /// Ids of speakers present but never enrolled.
    pub nontargets: Vec<SpeakerId>,
    pub prototypes: Vec<SpeakerPrototype<F>>,
}

/// Generate one recording deterministically from (config seed, index).
pub fn simulate_recording<F: Scalar>(
    recording_id: &str,
    rec_index: u64,
    cfg: &SimConfig,
    seg_cfg: &SegmenterConfig,
) -> Result<SimulatedRecording<F>> {
    cfg.validate()?;
    let target_ids: Vec<SpeakerId> = (0..cfg.num_target_speakers)
        .map(|k| format!("{recording_id}_s{k}").as_str().into())
        .collect();
    let nontarget_ids: Vec<SpeakerId> = (0..cfg.num_nontarget_speakers)
        .map(|k| format!("{recording_id}_n{k}").as_str().into())
        .collect();

    let mut proto_rng = stream_rng(cfg.seed, DOMAIN_SPEAKERS, rec_index);
    let mut all_ids = target_ids.clone();
    all_ids.extend(nontarget_ids.iter().cloned());
    let prototypes = gen_prototypes::<F>(&all_ids, cfg, &mut proto_rng)?;

    let mut conv_rng = stream_rng(cfg.seed, DOMAIN_CONVERSATION, rec_index);
    let annotation =
        gen_conversation(recording_id, &target_ids, &nontarget_ids, cfg, &mut conv_rng)?;

    let mut noise_rng = stream_rng(cfg.seed, DOMAIN_NOISE, rec_index);
    let segments = embeddings_for_annotation(&annotation, &prototypes, cfg, seg_cfg, &mut noise_rng)?;

    // Enrollment order is first appearance in the reference.
    let targets: Vec<SpeakerId> = annotation
        .speakers_by_first_appearance()
        .into_iter()
        .filter(|s| target_ids.contains(s))
        .collect();
    Ok(SimulatedRecording {
        annotation,
        segments,
        targets,
        nontargets: nontarget_ids,
        prototypes,
    })
}

/// Embedding file line: `recording-id<TAB>start<TAB>end<TAB>v1,v2,...,vb`.
/// Lines starting with `#` are ignored.
pub fn load_embeddings<F: Scalar>(
    reader: impl Read,
) -> Result<BTreeMap<String, Vec<EmbeddingSegment<F>>>> {
    let reader = BufReader::new(reader);
    let mut per_recording: BTreeMap<String, Vec<(TimeInterval, Vec<F>)>> = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let start: f64 = fields[1].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad start time {:?}", fields[1]),
        })?;
        let end: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad end time {:?}", fields[2]),
        })?;
        let interval = TimeInterval::new(start, end).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let vector: Vec<F> = fields[3]
            .split(',')
            .map(|v| {
                v.trim().parse::<F>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad float {v:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if vector.is_empty() || vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse {
                line: lineno,
                message: "vector must be non-empty and finite".into(),
            });
        }
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("dimension mismatch: expected {d}, got {}", vector.len()),
                });
            }
            _ => {}
        }
        per_recording
            .entry(fields[0].to_string())
            .or_default()
            .push((interval, vector));
    }

    let mut out = BTreeMap::new();
    for (rec, mut rows) in per_recording {
        rows.sort_by(|a, b| a.0.start().total_cmp(&b.0.start()));
        let segments: Vec<EmbeddingSegment<F>> = rows
            .into_iter()
            .enumerate()
            .map(|(index, (interval, vector))| {
                EmbeddingSegment::new(index, interval, vector, BTreeSet::new())
            })
            .collect::<Result<_>>()?;
        out.insert(rec, segments);
    }
    Ok(out)
}

pub fn load_embeddings_path<F: Scalar>(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, Vec<EmbeddingSegment<F>>>> {
    load_embeddings(std::fs::File::open(path)?)
}

/// Write segments in the embedding file format. Floats use shortest
/// round-trip formatting, so write/load is exact.
pub fn write_embeddings<F: Scalar>(
    mut writer: impl Write,
    recording_id: &str,
    segments: &[EmbeddingSegment<F>],
) -> Result<()> {
    for seg in segments {
        let values: Vec<String> = seg.vector.iter().map(|v| format!("{v}")).collect();
        writeln!(
            writer,
            "{recording_id}\t{}\t{}\t{}",
            seg.interval.start(),
            seg.interval.end(),
            values.join(",")
        )?;
    }
    Ok(())
}
