//! Synthetic workload generator.
//!
//! Produces utility tables plus correlated feature vectors from four scaling
//! archetypes (easy, responsive, diminishing returns, hard), so the whole
//! pipeline is exercisable without any model API. Curves follow a saturating
//! rise `acc(b) = asym - (asym - base) * exp(-rate * (b - 1))` with
//! archetype-specific parameter ranges; the ranges are design choices of
//! this generator, not measurements.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{BudgetSet, UtilityTable};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};
use crate::seed;

/// The four accuracy-curve archetypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Easy,
    Responsive,
    Diminishing,
    Hard,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [
        Archetype::Easy,
        Archetype::Responsive,
        Archetype::Diminishing,
        Archetype::Hard,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Archetype::Easy => "easy",
            Archetype::Responsive => "responsive",
            Archetype::Diminishing => "diminishing",
            Archetype::Hard => "hard",
        }
    }
}

/// Inclusive-exclusive parameter range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }
}

/// How the curve's upper end is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rise {
    /// Sample the total rise above the base.
    Gain(Range),
    /// Sample the asymptote directly (gain = asymptote - base).
    Asymptote(Range),
}

/// Curve parameter ranges for one archetype.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRanges {
    /// Accuracy at the cheapest budget.
    pub base: Range,
    pub rise: Rise,
    /// Exponential rise rate per budget-level unit.
    pub rate: Range,
}

/// Workload generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeConfig {
    /// Mixture weights over (easy, responsive, diminishing, hard).
    pub mixture_weights: [f64; 4],
    pub easy: CurveRanges,
    pub responsive: CurveRanges,
    pub diminishing: CurveRanges,
    pub hard: CurveRanges,
    /// 0 = features carry no archetype signal, 1 = full signal.
    pub feature_signal_strength: f64,
    /// Scale of truncated Gaussian noise added to every accuracy entry.
    pub noise_scale: f64,
}

impl Default for ArchetypeConfig {
    fn default() -> Self {
        Self {
            mixture_weights: [0.35, 0.25, 0.20, 0.20],
            easy: CurveRanges {
                base: Range::new(0.75, 0.95),
                rise: Rise::Gain(Range::new(0.0, 0.02)),
                rate: Range::new(0.3, 1.0),
            },
            responsive: CurveRanges {
                base: Range::new(0.30, 0.40),
                rise: Rise::Asymptote(Range::new(0.85, 0.95)),
                // rate floor is recomputed per sample so that b=16 is
                // within 0.02 of the asymptote; the band is kept narrow so
                // rows of this class share oracle labels at a given price
                rate: Range::new(0.235, 0.25),
            },
            diminishing: CurveRanges {
                base: Range::new(0.40, 0.50),
                rise: Rise::Gain(Range::new(0.16, 0.28)),
                // reaches 90% of the gain by b=4, and saturates fast enough
                // that this class's upgrade prices stay below the
                // responsive class's band
                rate: Range::new(1.15, 1.30),
            },
            hard: CurveRanges {
                base: Range::new(0.03, 0.18),
                rise: Rise::Gain(Range::new(0.0, 0.02)),
                rate: Range::new(0.3, 1.0),
            },
            feature_signal_strength: 0.8,
            noise_scale: 0.008,
        }
    }
}

impl ArchetypeConfig {
    /// Spread bound for "flat" archetypes: the maximum curve rise of the
    /// easy and hard families.
    pub fn flatness_bound(&self) -> f64 {
        let top = |r: &Rise| match r {
            Rise::Gain(g) => g.hi,
            Rise::Asymptote(a) => a.hi,
        };
        top(&self.easy.rise).max(top(&self.hard.rise))
    }

    fn validate(&self) -> Result<()> {
        let sum: f64 = self.mixture_weights.iter().sum();
        if self.mixture_weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Validation(
                "mixture weights must be non-negative".into(),
            ));
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "mixture weights must sum to 1, got {sum}"
            )));
        }
        if !(0.0..=1.0).contains(&self.feature_signal_strength) {
            return Err(Error::Validation(
                "feature_signal_strength must be in [0,1]".into(),
            ));
        }
        if self.noise_scale < 0.0 || !self.noise_scale.is_finite() {
            return Err(Error::Validation(
                "noise_scale must be a non-negative real".into(),
            ));
        }
        for ranges in [&self.easy, &self.responsive, &self.diminishing, &self.hard] {
            let rise_range = match ranges.rise {
                Rise::Gain(g) => g,
                Rise::Asymptote(a) => a,
            };
            for r in [ranges.base, rise_range, ranges.rate] {
                if !(r.lo.is_finite() && r.hi.is_finite()) || r.hi < r.lo {
                    return Err(Error::Validation("malformed parameter range".into()));
                }
            }
            match ranges.rise {
                Rise::Gain(g) if g.lo < 0.0 => {
                    return Err(Error::Validation(
                        "gain ranges must be non-negative (rising curves)".into(),
                    ));
                }
                Rise::Asymptote(a) if a.lo < ranges.base.hi => {
                    return Err(Error::Validation(
                        "asymptote range must sit above the base range".into(),
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn ranges(&self, archetype: Archetype) -> &CurveRanges {
        match archetype {
            Archetype::Easy => &self.easy,
            Archetype::Responsive => &self.responsive,
            Archetype::Diminishing => &self.diminishing,
            Archetype::Hard => &self.hard,
        }
    }
}

/// One generated workload.
#[derive(Debug, Clone)]
pub struct Workload {
    pub table: UtilityTable,
    pub features: Vec<FeatureVector>,
    pub assignments: Vec<Archetype>,
}

fn sample_archetype(weights: &[f64; 4], rng: &mut ChaCha8Rng) -> Archetype {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Archetype::ALL[i];
        }
    }
    *Archetype::ALL.last().unwrap()
}

/// Standard normal via Box-Muller, truncated at two standard deviations.
fn truncated_noise(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    scale * z.clamp(-2.0, 2.0)
}

/// Feature slots that carry archetype signal. The remaining ten are noise.
pub const INFORMATIVE_FEATURES: [usize; 6] = [
    1,  // prompt_length_words
    2,  // sentence_count
    4,  // numbers_count
    12, // has_multi_step_word
    14, // unique_word_ratio
    15, // entropy_estimate
];

/// Center values for the informative features, in the order of
/// `INFORMATIVE_FEATURES`: words, sentences, numbers, multi-step flag
/// probability, unique-word ratio, entropy.
const CENTER_MEANS: [f64; 6] = [39.0, 3.0, 6.0, 0.5, 0.77, 0.45];

/// Displacement magnitude per informative feature as an affine function of
/// the row's curve gain.
///
/// Each informative feature sits at `center +- signal * radius(gain)` with
/// an independent random sign, so every class mean coincides with the
/// center (a linear score reads nothing from any of them), while the
/// folded magnitude is a continuous difficulty signal that two axis-aligned
/// splits recover. The gain dependence makes even within-archetype oracle
/// boundaries visible to a tree.
fn ring_radius(pos: usize, gain: f64) -> f64 {
    match pos {
        0 => 6.0 + 55.0 * gain,  // words
        1 => 0.4 + 3.0 * gain,   // sentences
        2 => 1.0 + 12.0 * gain,  // numbers
        3 => 0.1 + 0.6 * gain,   // multi-step flag probability
        4 => 0.02 + 0.22 * gain, // unique ratio
        // high slope at the low-gain end resolves the cheap-class cuts;
        // saturation keeps the band inside [0, 1]
        _ => 0.02 + (0.85 * gain).min(0.34), // entropy
    }
}

fn generate_features(gain: f64, signal: f64, rng: &mut ChaCha8Rng) -> FeatureVector {
    let mut v = [0.0; FEATURE_DIM];

    // noise slots: plausible magnitudes, archetype-independent
    let words = 30.0 + truncated_noise(rng, 10.0);
    v[0] = (words * 5.6 + truncated_noise(rng, 12.0)).max(8.0); // chars
    v[3] = (1.0 + truncated_noise(rng, 0.7)).round().clamp(0.0, 4.0); // question marks
    v[5] = truncated_noise(rng, 1.2) + 2.3; // log mean magnitude
    v[6] = v[5] + truncated_noise(rng, 0.8).abs(); // log max magnitude
    for slot in [7usize, 8, 9, 10, 11] {
        v[slot] = f64::from(rng.gen_bool(0.3)); // structural flags
    }
    v[13] = 4.2 + truncated_noise(rng, 0.5); // avg word length

    let mut word_sign = 1.0;
    for (pos, &j) in INFORMATIVE_FEATURES.iter().enumerate() {
        // the flag shares the word-count sign so the pair carries a
        // conjunction, not two independent coin flips
        let sign = if j == 12 {
            word_sign
        } else {
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            if j == 1 {
                word_sign = s;
            }
            s
        };
        let mean = CENTER_MEANS[pos] + signal * sign * ring_radius(pos, gain);
        match j {
            12 => v[j] = f64::from(rng.gen_bool(mean.clamp(0.0, 1.0))),
            14 => v[j] = (mean + truncated_noise(rng, 0.035)).clamp(0.05, 1.0),
            15 => v[j] = (mean + truncated_noise(rng, 0.03)).clamp(0.0, 1.0),
            1 => v[j] = (mean + truncated_noise(rng, 3.5)).max(3.0).round(),
            2 => v[j] = (mean + truncated_noise(rng, 0.45)).max(1.0).round(),
            4 => v[j] = (mean + truncated_noise(rng, 0.8)).max(0.0).round(),
            _ => unreachable!(),
        }
    }
    FeatureVector::new(v)
}

/// Generate `n` questions: a utility table, matching feature vectors, and
/// the generating archetype of every row.
///
/// Deterministic given `(n, budget_set, config, seed)`; each instance draws
/// from its own derived sub-stream, so per-instance generation is order
/// independent.
pub fn generate_workload(
    n: usize,
    budget_set: &BudgetSet,
    config: &ArchetypeConfig,
    seed_value: u64,
) -> Result<Workload> {
    if n == 0 {
        return Err(Error::Validation("workload size must be positive".into()));
    }
    config.validate()?;

    let mut ids = Vec::with_capacity(n);
    let mut acc = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    let mut assignments = Vec::with_capacity(n);
    let mut entropies = Vec::with_capacity(n);

    for i in 0..n {
        let mut rng = seed::rng(seed_value, "synth-instance", i as u64);
        let archetype = sample_archetype(&config.mixture_weights, &mut rng);
        let ranges = config.ranges(archetype);

        let base = ranges.base.sample(&mut rng);
        let asym = match ranges.rise {
            Rise::Gain(g) => (base + g.sample(&mut rng)).min(0.995),
            Rise::Asymptote(a) => a.sample(&mut rng).min(0.995),
        };
        let gain = asym - base;
        let mut rate = ranges.rate.sample(&mut rng);
        if archetype == Archetype::Responsive && gain > 0.02 {
            // keep b=16 within 0.02 of the asymptote
            let max_level = f64::from(*budget_set.levels().last().unwrap());
            let rate_floor = (gain / 0.02).ln() / (max_level - 1.0).max(1.0);
            rate = rate.max(rate_floor);
        }

        let row: Vec<f64> = budget_set
            .levels()
            .iter()
            .map(|&b| {
                let clean = asym - gain * (-rate * (f64::from(b) - 1.0)).exp();
                (clean + truncated_noise(&mut rng, config.noise_scale)).clamp(0.0, 1.0)
            })
            .collect();

        let fv = generate_features(gain, config.feature_signal_strength, &mut rng);
        ids.push(format!("synth-{i:05}"));
        entropies.push(fv.values[15]);
        acc.push(row);
        features.push(fv);
        assignments.push(archetype);
    }

    let tags = assignments.iter().map(|a| a.name().to_string()).collect();
    let table = UtilityTable::new(ids, acc, budget_set.clone())?
        .with_difficulty_tags(tags)?
        .with_entropy_estimates(entropies)?;
    Ok(Workload {
        table,
        features,
        assignments,
    })
}
