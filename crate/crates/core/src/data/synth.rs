//! Synthetic sentences whose label depends only on which sentiment cue sits
//! closer to the aspect.
//!
//! Every sentence holds a positive cue and a negative cue, so a bag of words
//! carries no label information. By default each cue also has its own
//! aspect token next to it and the example's span picks one of the two at
//! random; the sentence text is then independent of the label and only a
//! model that reads the span can beat chance. With `decoy` off there is a
//! single aspect token, which a sequence model can locate lexically.

use rand::Rng;

use super::tokenize::tokenize;
use super::{Example, Sentiment};

pub const ASPECT_TOKEN: &str = "ASP";
pub const POSITIVE_CUE: &str = "GOODTOK";
pub const NEGATIVE_CUE: &str = "BADTOK";
pub const FILLER_WORDS: usize = 40;

/// Ranges (inclusive) the generator samples from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceProfile {
    /// Token distance from the aspect to the nearer cue.
    pub near: (usize, usize),
    /// How much farther the other cue is.
    pub gap: (usize, usize),
    /// Filler tokens added beyond the outermost token on each side.
    pub margin: (usize, usize),
    /// Give the farther cue an aspect token of its own.
    pub decoy: bool,
}

impl Default for DistanceProfile {
    fn default() -> Self {
        Self {
            near: (1, 4),
            gap: (1, 4),
            margin: (0, 3),
            decoy: true,
        }
    }
}

/// Placement chosen for one sentence, before filler is added.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CueLayout {
    pub near_polarity: Sentiment,
    pub near_distance: usize,
    pub far_distance: usize,
    pub near_left: bool,
    pub far_left: bool,
}

fn draw<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi)
}

fn filler<R: Rng + ?Sized>(rng: &mut R) -> String {
    format!("w{}", rng.gen_range(0..FILLER_WORDS))
}

/// Builds the sentence text for `layout` and returns it with the 1-based
/// index of the aspect token.
pub fn render<R: Rng + ?Sized>(
    layout: &CueLayout,
    profile: &DistanceProfile,
    rng: &mut R,
) -> (Vec<String>, usize) {
    let (near_cue, far_cue) = match layout.near_polarity {
        Sentiment::Positive => (POSITIVE_CUE, NEGATIVE_CUE),
        _ => (NEGATIVE_CUE, POSITIVE_CUE),
    };
    let left_extent = [
        (layout.near_left, layout.near_distance),
        (layout.far_left, layout.far_distance),
    ]
    .iter()
    .filter(|(left, _)| *left)
    .map(|(_, d)| *d)
    .max()
    .unwrap_or(0);
    let right_extent = [
        (layout.near_left, layout.near_distance),
        (layout.far_left, layout.far_distance),
    ]
    .iter()
    .filter(|(left, _)| !*left)
    .map(|(_, d)| *d)
    .max()
    .unwrap_or(0);
    let lead = draw(rng, profile.margin);
    let trail = draw(rng, profile.margin);
    let asp = lead + left_extent;
    let len = asp + 1 + right_extent + trail;
    let mut words: Vec<String> = (0..len).map(|_| filler(rng)).collect();
    words[asp] = ASPECT_TOKEN.to_string();
    let place = |left: bool, d: usize| if left { asp - d } else { asp + d };
    words[place(layout.near_left, layout.near_distance)] = near_cue.to_string();
    words[place(layout.far_left, layout.far_distance)] = far_cue.to_string();
    (words, asp + 1)
}

pub fn sample_layout<R: Rng + ?Sized>(profile: &DistanceProfile, rng: &mut R) -> CueLayout {
    let near_polarity = if rng.gen_bool(0.5) {
        Sentiment::Positive
    } else {
        Sentiment::Negative
    };
    let near_distance = draw(rng, profile.near);
    let far_distance = near_distance + draw(rng, profile.gap);
    CueLayout {
        near_polarity,
        near_distance,
        far_distance,
        near_left: rng.gen_bool(0.5),
        far_left: rng.gen_bool(0.5),
    }
}

/// Placement of a sentence with one aspect token per cue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairedLayout {
    pub positive_distance: usize,
    pub negative_distance: usize,
    pub positive_cue_left: bool,
    pub negative_cue_left: bool,
    pub positive_first: bool,
    /// Filler tokens between the two aspect/cue pairs.
    pub separation: usize,
    /// Polarity of the pair whose aspect token is the example's span.
    pub target: Sentiment,
}

pub fn sample_paired_layout<R: Rng + ?Sized>(
    profile: &DistanceProfile,
    rng: &mut R,
) -> PairedLayout {
    let positive_distance = draw(rng, profile.near);
    let negative_distance = draw(rng, profile.near);
    // any cross distance exceeds both in-pair distances
    let separation = positive_distance.max(negative_distance) - 1 + draw(rng, profile.gap);
    PairedLayout {
        positive_distance,
        negative_distance,
        positive_cue_left: rng.gen_bool(0.5),
        negative_cue_left: rng.gen_bool(0.5),
        positive_first: rng.gen_bool(0.5),
        separation,
        target: if rng.gen_bool(0.5) {
            Sentiment::Positive
        } else {
            Sentiment::Negative
        },
    }
}

/// Builds the sentence for `layout` and returns it with the 1-based index
/// of the target aspect token.
pub fn render_paired<R: Rng + ?Sized>(
    layout: &PairedLayout,
    profile: &DistanceProfile,
    rng: &mut R,
) -> (Vec<String>, usize) {
    // each pair is (tokens, offset of its aspect token)
    let mut pair = |cue: &str, distance: usize, cue_left: bool| {
        let mut words: Vec<String> = (0..=distance).map(|_| filler(rng)).collect();
        let (cue_at, asp_at) = if cue_left {
            (0, distance)
        } else {
            (distance, 0)
        };
        words[cue_at] = cue.to_string();
        words[asp_at] = ASPECT_TOKEN.to_string();
        (words, asp_at)
    };
    let positive = pair(
        POSITIVE_CUE,
        layout.positive_distance,
        layout.positive_cue_left,
    );
    let negative = pair(
        NEGATIVE_CUE,
        layout.negative_distance,
        layout.negative_cue_left,
    );
    let (first, second, target_first) = if layout.positive_first {
        (positive, negative, layout.target == Sentiment::Positive)
    } else {
        (negative, positive, layout.target == Sentiment::Negative)
    };
    let lead = draw(rng, profile.margin);
    let trail = draw(rng, profile.margin);
    let mut words: Vec<String> = (0..lead).map(|_| filler(rng)).collect();
    words.extend(first.0.iter().cloned());
    words.extend((0..layout.separation).map(|_| filler(rng)));
    let second_start = words.len();
    words.extend(second.0.iter().cloned());
    words.extend((0..trail).map(|_| filler(rng)));
    let target = if target_first {
        lead + first.1
    } else {
        second_start + second.1
    };
    (words, target + 1)
}

/// Generates `count` labelled examples. The label is the polarity of the
/// cue nearer to the aspect.
pub fn synth_generate<R: Rng + ?Sized>(
    count: usize,
    rng: &mut R,
    profile: &DistanceProfile,
) -> Vec<Example> {
    assert!(count > 0, "count must be positive");
    assert!(
        profile.near.0 >= 1 && profile.gap.0 >= 1,
        "cue distances must be positive"
    );
    (0..count)
        .map(|_| {
            let ((words, asp), label) = if profile.decoy {
                let layout = sample_paired_layout(profile, rng);
                (render_paired(&layout, profile, rng), layout.target)
            } else {
                let layout = sample_layout(profile, rng);
                (render(&layout, profile, rng), layout.near_polarity)
            };
            // round through the tokenizer so examples match what the TSV reader yields
            let tokens = tokenize(&words.join(" "));
            Example::new(tokens, (asp, asp), label).expect("aspect inside sentence")
        })
        .collect()
}

/// Label the generator would assign, recomputed from the tokens alone.
pub fn oracle_label(ex: &Example) -> Option<Sentiment> {
    let asp = ex.span.0 - 1;
    let dist = |cue: &str| {
        let cue = cue.to_lowercase();
        ex.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == cue)
            .map(|(i, _)| i.abs_diff(asp))
            .min()
    };
    let (pos, neg) = (dist(POSITIVE_CUE)?, dist(NEGATIVE_CUE)?);
    match pos.cmp(&neg) {
        std::cmp::Ordering::Less => Some(Sentiment::Positive),
        std::cmp::Ordering::Greater => Some(Sentiment::Negative),
        std::cmp::Ordering::Equal => None,
    }
}
