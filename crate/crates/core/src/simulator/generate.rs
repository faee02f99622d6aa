use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::{
    calibrate_divergence, nearest_topic, sample_topics, scenario_curve, ScenarioSpec, SimError,
    SimulatorConfig, Topic,
};
use crate::corpus::{Document, GroundTruth, LabeledCorpus, Vocabulary, NOVEL_WORDS};
use crate::divergence::symmetric_kl;
use crate::par::*;

/// Name of generator term `id` for a vocabulary of `vocab_size` terms.
/// Zero padding keeps string order equal to id order.
pub fn term_name(id: usize, vocab_size: usize) -> String {
    let width = vocab_size.saturating_sub(1).to_string().len();
    format!("w{id:0width$}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMetadata {
    pub seed: u64,
    pub scenario_id: u32,
    pub family: String,
    pub onset_day: u32,
    pub novel_topic_id: usize,
    pub nearest_normal_topic: usize,
    pub target_kl: Option<f64>,
    /// KL(novel || nearest), KL(nearest || novel) and their mean.
    pub kl_forward: f64,
    pub kl_backward: f64,
    pub kl_symmetric: f64,
    pub lambda: Option<f64>,
    pub bisection_iterations: Option<usize>,
    pub normal_pairwise_kl_min: f64,
    pub normal_pairwise_kl_mean: f64,
    pub normal_pairwise_kl_max: f64,
    pub documents: usize,
    pub novel_documents: usize,
}

#[derive(Debug, Clone)]
pub struct SimulatedCorpus {
    pub corpus: LabeledCorpus,
    /// Generator topics, indexed by generator term id (not corpus term id).
    pub topics: Vec<Topic>,
    pub metadata: SimulationMetadata,
}

fn day_rng(seed: u64, day: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(day) + 1);
    rng
}

/// `(doc_id, day, topic, generator term ids)` before vocabulary remapping.
type DraftDoc = (String, u32, usize, Vec<usize>);

/// Builds the corpus day by day: `background_docs_per_topic_per_day` documents
/// per normal topic plus `scenario_curve(spec, day)` novel documents.
///
/// The corpus vocabulary is the set of generated terms plus the novel topic's
/// top terms, so the in-memory corpus and its file round-trip agree on ids.
pub fn generate_corpus(
    config: &SimulatorConfig,
    spec: &ScenarioSpec,
) -> Result<SimulatedCorpus, SimError> {
    config.validate()?;
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let drawn = sample_topics(config, &mut rng)?;
    let novel = config.novel_topic();

    let (topics, calibration) = match config.target_kl {
        Some(target) => {
            let cal = calibrate_divergence(&drawn, target)?;
            (cal.topics.clone(), Some(cal))
        }
        None => (drawn, None),
    };
    let (nearest, achieved) = match &calibration {
        Some(c) => (c.nearest, c.achieved),
        None => nearest_topic(&topics[novel], &topics[..novel]),
    };

    let samplers: Vec<WeightedAliasIndex<f64>> = topics
        .iter()
        .map(|t| {
            WeightedAliasIndex::new(t.probs.clone())
                .map_err(|e| SimError::InvalidConfig(format!("topic {}: {e}", t.topic_id)))
        })
        .collect::<Result<_, _>>()?;

    let per_topic = config.background_docs_per_topic_per_day;
    let days: Vec<Vec<DraftDoc>> = (0..config.horizon_days)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|day| {
            let mut rng = day_rng(config.seed, day);
            let mut docs = Vec::new();
            let plan = (0..novel)
                .map(|z| (z, per_topic))
                .chain(std::iter::once((novel, scenario_curve(spec, day) as usize)));
            for (topic, count) in plan {
                for i in 0..count {
                    let tokens: Vec<usize> = (0..config.doc_length)
                        .map(|_| samplers[topic].sample(&mut rng))
                        .collect();
                    docs.push((format!("d{day:04}-t{topic:02}-{i:03}"), day, topic, tokens));
                }
            }
            docs
        })
        .collect();

    let novel_top = topics[novel].top_terms(NOVEL_WORDS.min(config.vocab_size));
    let mut used: BTreeSet<usize> = novel_top.iter().copied().collect();
    for day in &days {
        for (_, _, _, tokens) in day {
            used.extend(tokens.iter().copied());
        }
    }
    let vocabulary =
        Vocabulary::from_terms(used.iter().map(|&id| term_name(id, config.vocab_size)));
    // Term names sort like generator ids, so corpus ids are ranks in `used`.
    let mut remap = vec![u32::MAX; config.vocab_size];
    for (rank, &id) in used.iter().enumerate() {
        remap[id] = rank as u32;
    }

    let novel_label = novel.to_string();
    let mut documents = Vec::new();
    let mut novel_doc_ids = BTreeSet::new();
    let mut onset_day = None;
    for (doc_id, day, topic, tokens) in days.into_iter().flatten() {
        if topic == novel {
            novel_doc_ids.insert(doc_id.clone());
            onset_day.get_or_insert(day);
        }
        documents.push(Document {
            doc_id,
            day,
            tokens: tokens.iter().map(|&t| remap[t]).collect(),
            label: Some(topic.to_string()),
        });
    }
    let onset_day = onset_day.unwrap_or_else(|| spec.onset());
    let truth = GroundTruth {
        novel_label,
        onset_day,
        novel_words: novel_top.iter().map(|&t| remap[t]).collect(),
        novel_doc_ids,
        proxy_words: false,
    };

    let mut pairwise = Vec::new();
    for i in 0..novel {
        for j in (i + 1)..novel {
            pairwise.push(
                symmetric_kl(&topics[i].probs, &topics[j].probs)
                    .expect("same size")
                    .mean(),
            );
        }
    }
    let (pmin, pmax, pmean) = if pairwise.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            pairwise.iter().copied().fold(f64::INFINITY, f64::min),
            pairwise.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            pairwise.iter().sum::<f64>() / pairwise.len() as f64,
        )
    };

    let n_docs = documents.len();
    let n_novel = truth.novel_doc_ids.len();
    let corpus = LabeledCorpus::new(vocabulary, documents, Some(truth))?;
    let metadata = SimulationMetadata {
        seed: config.seed,
        scenario_id: spec.id,
        family: spec.family().to_string(),
        onset_day,
        novel_topic_id: novel,
        nearest_normal_topic: nearest,
        target_kl: config.target_kl,
        kl_forward: achieved.forward,
        kl_backward: achieved.backward,
        kl_symmetric: achieved.mean(),
        lambda: calibration.as_ref().map(|c| c.lambda),
        bisection_iterations: calibration.as_ref().map(|c| c.iterations),
        normal_pairwise_kl_min: pmin,
        normal_pairwise_kl_mean: pmean,
        normal_pairwise_kl_max: pmax,
        documents: n_docs,
        novel_documents: n_novel,
    };
    Ok(SimulatedCorpus {
        corpus,
        topics,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{scenario_catalog, ScenarioKind};

    fn small() -> SimulatorConfig {
        SimulatorConfig {
            vocab_size: 800,
            n_topics: 4,
            doc_length: 30,
            horizon_days: 20,
            background_docs_per_topic_per_day: 3,
            alpha: 0.05,
            target_kl: None,
            seed: 11,
        }
    }

    fn emergent(onset: u32) -> ScenarioSpec {
        ScenarioSpec {
            id: 5,
            kind: ScenarioKind::Emergent {
                onset,
                slope: 2.0,
                amplitude: 6.0,
            },
        }
    }

    #[test]
    fn default_day_zero_has_only_normal_documents() {
        let cfg = SimulatorConfig {
            horizon_days: 1,
            ..Default::default()
        };
        let sim = generate_corpus(&cfg, &scenario_catalog(100)[4]).unwrap();
        let day0 = &sim.corpus.batches()[0];
        assert_eq!(day0.documents.len(), 180);
        assert!(day0
            .documents
            .iter()
            .all(|d| d.label.as_deref() != Some("9")));
        assert!(day0.documents.iter().all(|d| d.tokens.len() == 100));
    }

    #[test]
    fn novel_count_follows_curve() {
        let spec = emergent(10);
        let sim = generate_corpus(&small(), &spec).unwrap();
        let expected: u32 = (0..20).map(|d| scenario_curve(&spec, d)).sum();
        let gt = sim.corpus.ground_truth().unwrap();
        assert_eq!(gt.novel_doc_ids.len() as u32, expected);
        assert_eq!(gt.onset_day, 11);
        assert_eq!(gt.novel_words.len(), 100);
        for d in sim.corpus.documents() {
            let is_novel = gt.novel_doc_ids.contains(&d.doc_id);
            assert_eq!(is_novel, d.label.as_deref() == Some("3"));
        }
    }

    #[test]
    fn labels_match_sampling_topic() {
        // Every token of a document must have positive probability under its
        // labeled topic.
        let sim = generate_corpus(&small(), &emergent(5)).unwrap();
        let vocab = sim.corpus.vocabulary();
        for d in sim.corpus.documents() {
            let topic: usize = d.label.as_ref().unwrap().parse().unwrap();
            for &t in &d.tokens {
                let gen_id: usize = vocab.term(t).unwrap()[1..].parse().unwrap();
                assert!(sim.topics[topic].probs[gen_id] > 0.0);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_corpus(&small(), &emergent(5)).unwrap();
        let b = generate_corpus(&small(), &emergent(5)).unwrap();
        let render = |c: &LabeledCorpus| {
            let mut v = Vec::new();
            crate::corpus::write_corpus_to(c, &mut v).unwrap();
            v
        };
        assert_eq!(render(&a.corpus), render(&b.corpus));
        let other = generate_corpus(
            &SimulatorConfig {
                seed: 12,
                ..small()
            },
            &emergent(5),
        )
        .unwrap();
        assert_ne!(render(&a.corpus), render(&other.corpus));
    }

    #[test]
    fn calibrated_corpus_reports_achieved_kl() {
        let cfg = SimulatorConfig {
            target_kl: Some(0.5),
            ..small()
        };
        let sim = generate_corpus(&cfg, &emergent(5)).unwrap();
        let m = &sim.metadata;
        assert!((m.kl_symmetric - 0.5).abs() <= 0.025, "{m:?}");
        assert!((m.kl_forward + m.kl_backward) / 2.0 - m.kl_symmetric < 1e-12);
        assert!(m.lambda.unwrap() > 0.0 && m.lambda.unwrap() < 1.0);
    }

    #[test]
    fn term_names_sort_like_ids() {
        assert_eq!(term_name(7, 10_000), "w0007");
        assert_eq!(term_name(7, 10), "w7");
        assert!(term_name(99, 1000) < term_name(100, 1000));
    }
}
