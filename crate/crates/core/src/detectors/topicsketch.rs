//! TopicSketch: tracks, per term, a fast and a slow exponentially-decayed
//! frequency. Their difference is the term's speed and the day-over-day change
//! of the speed its acceleration. A day raises an alert when enough terms
//! accelerate well beyond their own historic noise.
//!
//! Rates are normalised moving averages, `r <- d r + (1 - d) f` with
//! `d = 2^(-1/halflife)`, started at the first day's frequencies, so a term at
//! constant frequency `f` stays at `f` under both halflives and its speed is
//! zero.
//!
//! The rates can optionally live in a hashed count sketch (signed buckets,
//! median over rows) instead of one slot per term; velocities and noise
//! statistics stay per term.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{
    check_terms, positive, rank, top, Alert, DayClock, DayReport, DetectError, Detector,
    DetectorKind,
};
use crate::corpus::{DayBatch, DayTermStats, TermId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SketchConfig {
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
}

impl Default for SketchConfig {
    fn default() -> Self {
        Self {
            depth: 4,
            width: 1 << 14,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicSketchConfig {
    pub fast_halflife: f64,
    pub slow_halflife: f64,
    /// `c`: a term accelerates abnormally when `a > c * sigma`.
    pub accel_threshold: f64,
    /// Days of acceleration history required before any alert.
    pub warmup_days: u32,
    /// A term needs at least this many occurrences today to trigger.
    pub min_count: u64,
    /// A day raises an alert when at least this many terms trigger.
    pub min_terms: usize,
    pub sketch: Option<SketchConfig>,
    pub max_words: usize,
}

impl Default for TopicSketchConfig {
    fn default() -> Self {
        Self {
            fast_halflife: 1.0,
            slow_halflife: 7.0,
            accel_threshold: 3.0,
            warmup_days: 7,
            min_count: 10,
            min_terms: 5,
            sketch: None,
            max_words: 100,
        }
    }
}

impl TopicSketchConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        positive("fast_halflife", self.fast_halflife)?;
        positive("accel_threshold", self.accel_threshold)?;
        if self.slow_halflife <= self.fast_halflife || !self.slow_halflife.is_finite() {
            return Err(DetectError::InvalidConfig(
                "slow_halflife must exceed fast_halflife".into(),
            ));
        }
        if self.min_terms == 0 {
            return Err(DetectError::InvalidConfig(
                "min_terms must be positive".into(),
            ));
        }
        if let Some(s) = &self.sketch {
            if s.depth == 0 || s.width == 0 {
                return Err(DetectError::InvalidConfig(
                    "sketch depth and width must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per-day retention factor `2^(-1/halflife)`.
pub fn decay_factor(halflife: f64) -> f64 {
    2f64.powf(-1.0 / halflife)
}

/// Standard deviation of the acceleration per unit standard deviation of an
/// i.i.d. daily frequency: the acceleration is a linear filter of the
/// frequency series with tap `d_s - d_f` today and
/// `(1 - d_s)^2 d_s^(i-1) - (1 - d_f)^2 d_f^(i-1)` `i` days back.
pub fn poisson_accel_gain(d_fast: f64, d_slow: f64) -> f64 {
    let (a, b) = (d_slow, d_fast);
    let (ca, cb) = ((1.0 - a).powi(2), (1.0 - b).powi(2));
    let tail = ca * ca / (1.0 - a * a) + cb * cb / (1.0 - b * b) - 2.0 * ca * cb / (1.0 - a * b);
    ((a - b).powi(2) + tail).sqrt()
}

/// Same as [`poisson_accel_gain`] for the velocity: tap `d_s - d_f` today and
/// `(1 - d_f) d_f^i - (1 - d_s) d_s^i` `i` days back.
pub fn poisson_velocity_gain(d_fast: f64, d_slow: f64) -> f64 {
    let (a, b) = (d_slow, d_fast);
    let (ca, cb) = ((1.0 - a) * a, (1.0 - b) * b);
    let tail = ca * ca / (1.0 - a * a) + cb * cb / (1.0 - b * b) - 2.0 * ca * cb / (1.0 - a * b);
    ((a - b).powi(2) + tail).sqrt()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Rate storage: one slot per term, or a signed hashed sketch.
#[derive(Debug, Clone)]
enum Rates {
    Exact {
        fast: Vec<f64>,
        slow: Vec<f64>,
    },
    Sketch {
        cfg: SketchConfig,
        fast: Vec<f64>,
        slow: Vec<f64>,
    },
}

impl Rates {
    fn slot(cfg: &SketchConfig, row: usize, term: TermId) -> (usize, f64) {
        let h = splitmix64(u64::from(term) ^ splitmix64(cfg.seed.wrapping_add(row as u64)));
        let bucket = row * cfg.width + (h % cfg.width as u64) as usize;
        (bucket, if h >> 63 == 0 { 1.0 } else { -1.0 })
    }

    /// One day of the recurrence with today's frequencies `freq` (terms
    /// absent from `active` have frequency 0).
    fn step(&mut self, d_fast: f64, d_slow: f64, active: &[TermId], freq: &[f64]) {
        match self {
            Rates::Exact { fast, slow } => {
                for (w, r) in fast.iter_mut().enumerate() {
                    *r = d_fast * *r + (1.0 - d_fast) * freq[w];
                }
                for (w, r) in slow.iter_mut().enumerate() {
                    *r = d_slow * *r + (1.0 - d_slow) * freq[w];
                }
            }
            Rates::Sketch { cfg, fast, slow } => {
                fast.iter_mut().for_each(|r| *r *= d_fast);
                slow.iter_mut().for_each(|r| *r *= d_slow);
                for &t in active {
                    let f = freq[t as usize];
                    for row in 0..cfg.depth {
                        let (b, sign) = Self::slot(cfg, row, t);
                        fast[b] += sign * (1.0 - d_fast) * f;
                        slow[b] += sign * (1.0 - d_slow) * f;
                    }
                }
            }
        }
    }

    /// `(r_fast, r_slow)` estimates for one term.
    fn estimate(&self, term: TermId) -> (f64, f64) {
        match self {
            Rates::Exact { fast, slow } => (fast[term as usize], slow[term as usize]),
            Rates::Sketch { cfg, fast, slow } => {
                let mut f = Vec::with_capacity(cfg.depth);
                let mut s = Vec::with_capacity(cfg.depth);
                for row in 0..cfg.depth {
                    let (b, sign) = Self::slot(cfg, row, term);
                    f.push(sign * fast[b]);
                    s.push(sign * slow[b]);
                }
                (median(&mut f).max(0.0), median(&mut s).max(0.0))
            }
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u32,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / f64::from(self.n);
        self.m2 += delta * (x - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / f64::from(self.n - 1)).sqrt()
        }
    }
}

struct Noise {
    accel: Vec<f64>,
    velocity: Vec<f64>,
    baseline: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TopicSketchDetector {
    cfg: TopicSketchConfig,
    vocab_size: usize,
    clock: DayClock,
    rates: Rates,
    velocity: Vec<f64>,
    accel: Vec<f64>,
    noise: Vec<Welford>,
    velocity_noise: Vec<Welford>,
    days_seen: u32,
    /// Documents of the last `slow_halflife` days: (day, id, distinct terms).
    recent: VecDeque<(u32, String, Vec<TermId>)>,
}

impl TopicSketchDetector {
    pub fn new(cfg: TopicSketchConfig, vocab_size: usize) -> Result<Self, DetectError> {
        cfg.validate()?;
        let rates = match &cfg.sketch {
            None => Rates::Exact {
                fast: vec![0.0; vocab_size],
                slow: vec![0.0; vocab_size],
            },
            Some(s) => Rates::Sketch {
                cfg: s.clone(),
                fast: vec![0.0; s.depth * s.width],
                slow: vec![0.0; s.depth * s.width],
            },
        };
        Ok(Self {
            cfg,
            vocab_size,
            clock: DayClock::default(),
            rates,
            velocity: vec![0.0; vocab_size],
            accel: vec![0.0; vocab_size],
            noise: vec![Welford::default(); vocab_size],
            velocity_noise: vec![Welford::default(); vocab_size],
            days_seen: 0,
            recent: VecDeque::new(),
        })
    }

    /// `(r_fast, r_slow)` for a term after the last observed day.
    pub fn rates(&self, term: TermId) -> (f64, f64) {
        self.rates.estimate(term)
    }

    pub fn velocity(&self, term: TermId) -> f64 {
        self.velocity[term as usize]
    }

    pub fn acceleration(&self, term: TermId) -> f64 {
        self.accel[term as usize]
    }

    /// Advances every term by one day. Returns, per term, the noise scales of
    /// its acceleration and velocity and its slow rate, all as they stood
    /// before today.
    fn advance(&mut self, stats: Option<&DayTermStats>) -> Noise {
        // The first day seeds both averages with its own frequencies.
        let (d_fast, d_slow) = if self.days_seen == 0 {
            (0.0, 0.0)
        } else {
            (
                decay_factor(self.cfg.fast_halflife),
                decay_factor(self.cfg.slow_halflife),
            )
        };
        let mut freq = vec![0.0; self.vocab_size];
        let mut active: &[TermId] = &[];
        if let Some(s) = stats.filter(|s| s.n_tokens > 0) {
            for &t in &s.active {
                freq[t as usize] = s.tf[t as usize] as f64 / s.n_tokens as f64;
            }
            active = &s.active;
        }
        let baseline: Vec<f64> = (0..self.vocab_size)
            .map(|w| self.rates.estimate(w as TermId).1)
            .collect();
        self.rates.step(d_fast, d_slow, active, &freq);
        let mut accel = Vec::with_capacity(self.vocab_size);
        let mut velocity = Vec::with_capacity(self.vocab_size);
        for w in 0..self.vocab_size {
            let (f, s) = self.rates.estimate(w as TermId);
            let v = f - s;
            let a = v - self.velocity[w];
            accel.push(self.noise[w].std());
            velocity.push(self.velocity_noise[w].std());
            self.noise[w].push(a);
            self.velocity_noise[w].push(v);
            self.velocity[w] = v;
            self.accel[w] = a;
        }
        self.days_seen += 1;
        Noise {
            accel,
            velocity,
            baseline,
        }
    }

    fn lookback_days(&self) -> u32 {
        self.cfg.slow_halflife.ceil() as u32
    }
}

impl Detector for TopicSketchDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Topicsketch
    }

    fn observe(&mut self, batch: &DayBatch) -> Result<DayReport, DetectError> {
        let elapsed = self.clock.advance(batch.day)?;
        check_terms(batch, self.vocab_size)?;
        // Days skipped without a batch count as empty days.
        if self.days_seen > 0 {
            for _ in 1..elapsed {
                self.advance(None);
            }
        }
        let stats = DayTermStats::from_batch(batch, self.vocab_size);
        let noise = self.advance(Some(&stats));
        let cutoff = batch.day.saturating_sub(self.lookback_days());
        while self.recent.front().is_some_and(|(d, _, _)| *d < cutoff) {
            self.recent.pop_front();
        }
        let mut report = DayReport::empty(batch.day);
        if batch.is_empty() {
            return Ok(report);
        }

        let c = self.cfg.accel_threshold;
        let d_fast = decay_factor(self.cfg.fast_halflife);
        let d_slow = decay_factor(self.cfg.slow_halflife);
        let n = stats.n_tokens as f64;
        // Two noise floors: the change caused by a single token today, and the
        // spread Poisson counts at the baseline rate would produce.
        let one_token = (d_slow - d_fast) / n;
        let (gain_a, gain_v) = (
            poisson_accel_gain(d_fast, d_slow),
            poisson_velocity_gain(d_fast, d_slow),
        );
        let poisson = |w: usize| (noise.baseline[w] * n).sqrt() / n;
        let armed = self.days_seen > self.cfg.warmup_days;
        // A term is as abnormal as the weaker of its standardised acceleration
        // and velocity; terms below `min_count` are capped at `c` so they can
        // never trigger.
        let gated = |w: usize| {
            let za = self.accel[w] / noise.accel[w].max(one_token).max(gain_a * poisson(w));
            let zv = self.velocity[w] / noise.velocity[w].max(one_token).max(gain_v * poisson(w));
            let z = za.min(zv);
            if stats.tf[w] >= self.cfg.min_count {
                z
            } else {
                z.min(c)
            }
        };
        let g: Vec<f64> = (0..self.vocab_size).map(gated).collect();
        report.word_scores = stats.active.iter().map(|&t| (t, g[t as usize])).collect();

        let doc_terms: Vec<Vec<TermId>> =
            batch.documents.iter().map(|d| d.distinct_terms()).collect();
        let doc_score = |terms: &[TermId]| {
            terms
                .iter()
                .map(|&t| g[t as usize])
                .fold(f64::MIN, f64::max)
        };
        for (doc, terms) in batch.documents.iter().zip(&doc_terms) {
            report
                .doc_scores
                .insert(doc.doc_id.clone(), doc_score(terms));
        }

        let triggers: Vec<TermId> = stats
            .active
            .iter()
            .copied()
            .filter(|&t| armed && g[t as usize] > c)
            .collect();
        if triggers.len() >= self.cfg.min_terms {
            let words = rank(triggers.iter().map(|&t| (t, g[t as usize])));
            report.flagged_words = top(&words, self.cfg.max_words, |_| true);
            let strength = words[0].1;
            for (_, id, terms) in &self.recent {
                let s = doc_score(terms);
                if s > c {
                    report.doc_scores.insert(id.clone(), s);
                }
            }
            let docs = rank(report.doc_scores.iter().map(|(d, &s)| (d.clone(), s)));
            report.flagged_docs = top(&docs, usize::MAX, |s| s > c);
            report.alerts.push(Alert {
                day: batch.day,
                trigger_terms: words.iter().map(|&(t, _)| t).collect(),
                strength,
            });
        }

        for (doc, terms) in batch.documents.iter().zip(doc_terms) {
            self.recent.push_back((doc.day, doc.doc_id.clone(), terms));
        }
        Ok(report)
    }
}
