//! Synthetic labelled corpora.
//!
//! Text corpora draw each document's words from a class-specific marker pool
//! plus a shared filler pool, so the classes are separable by construction.
//! Class sizes follow the published evidence-corpus distribution scaled to
//! the requested size.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::class::{DocClass, N_CLASSES};
use crate::eval::published::PUBLISHED_CLASS_COUNTS;
use crate::ingest::{DocumentRecord, Source};
use crate::textpipe::SparseVector;

const MARKERS: [&[&str]; N_CLASSES] = [
    &[
        "overview", "umbrella", "scoping", "landscape", "mapping", "synthesis", "narrative",
        "panorama", "compendium", "framework", "guideline", "consensus", "horizon", "evidence-map",
        "rapid-review", "living-guidance", "policy", "briefing", "digest", "atlas", "survey",
        "roadmap", "perspective", "scan",
    ],
    &[
        "meta-analysis", "pooled", "heterogeneity", "databases", "searched", "prisma", "forest-plot",
        "i-squared", "random-effects", "eligible", "screening", "cochrane", "grade", "bias-risk",
        "funnel", "egger", "subgroup", "sensitivity", "aggregate", "extracted", "inclusion",
        "medline", "embase-search", "systematically",
    ],
    &[
        "randomized", "randomised", "placebo", "double-blind", "allocation", "arm", "assigned",
        "intention-to-treat", "blinded", "concealment", "crossover", "superiority", "non-inferiority",
        "enrolled", "phase-3", "masked", "parallel-group", "controlled", "sham", "stratified-block",
        "investigational", "dosing", "trial-registration", "primary-endpoint",
    ],
    &[
        "cohort", "retrospective", "case-control", "observational", "registry", "cross-sectional",
        "prospective", "chart-review", "case-series", "surveillance", "prevalence", "incidence",
        "hazard", "adjusted", "propensity", "matched", "population-based", "follow-up", "exposure",
        "odds", "ecological", "longitudinal", "records", "admissions",
    ],
    &[
        "editorial", "commentary", "letter", "erratum", "correspondence", "opinion", "viewpoint",
        "news", "interview", "retraction", "preface", "obituary", "announcement", "reply",
        "rebuttal", "anecdote", "essay", "column", "memo", "bulletin", "press", "blog",
        "podcast", "notice",
    ],
];

const FILLER: &[&str] = &[
    "covid-19", "sars-cov-2", "patients", "coronavirus", "pandemic", "hospital", "clinical",
    "outcomes", "mortality", "treatment", "severe", "infection", "respiratory", "disease",
    "health", "care", "data", "analysis", "results", "methods", "study", "findings", "risk",
    "association", "symptoms", "ventilation", "icu", "oxygen", "pneumonia", "fever", "cough",
    "age", "sex", "comorbidities", "diabetes", "hypertension", "obesity", "vaccine", "antibody",
    "viral", "load", "testing", "pcr", "transmission", "lockdown", "healthcare", "workers",
    "children", "adults", "elderly", "china", "wuhan", "italy", "europe", "2020", "2021",
    "months", "days", "weeks", "significant",
];

/// Class sizes for an `n`-document corpus, proportional to the published
/// class counts (largest-remainder rounding; ties to the lower class index).
pub fn class_sizes(n: usize) -> [usize; N_CLASSES] {
    let total: u64 = PUBLISHED_CLASS_COUNTS.iter().sum();
    let mut sizes = [0usize; N_CLASSES];
    let mut remainders = [(0u64, 0usize); N_CLASSES];
    for k in 0..N_CLASSES {
        let exact = PUBLISHED_CLASS_COUNTS[k] as u128 * n as u128;
        sizes[k] = (exact / total as u128) as usize;
        remainders[k] = ((exact % total as u128) as u64, k);
    }
    let assigned: usize = sizes.iter().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, k) in remainders.iter().take(n - assigned) {
        sizes[k] += 1;
    }
    sizes
}

/// Generator for marker-plus-filler abstracts.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub seed: u64,
    pub markers_per_doc: usize,
    pub filler_per_doc: usize,
    pub title_words: usize,
}

impl SyntheticCorpus {
    pub fn new(seed: u64) -> Self {
        SyntheticCorpus {
            seed,
            markers_per_doc: 6,
            filler_per_doc: 30,
            title_words: 6,
        }
    }

    /// `n` labelled documents at the published class proportions, in a
    /// seeded random class order. Ids are `{prefix}-{index:06}`.
    pub fn generate(&self, n: usize, id_prefix: &str) -> Vec<DocumentRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut labels: Vec<DocClass> = class_sizes(n)
            .iter()
            .enumerate()
            .flat_map(|(k, &size)| std::iter::repeat_n(DocClass::ALL[k], size))
            .collect();
        rand::seq::SliceRandom::shuffle(&mut labels[..], &mut rng);
        labels
            .into_iter()
            .enumerate()
            .map(|(i, class)| self.document(&mut rng, format!("{id_prefix}-{i:06}"), class, &[]))
            .collect()
    }

    /// One labelled document of `class`, with `extra` words appended to the
    /// abstract.
    pub fn document(
        &self,
        rng: &mut impl Rng,
        id: String,
        class: DocClass,
        extra: &[&str],
    ) -> DocumentRecord {
        let markers = MARKERS[class.index()];
        let mut words: Vec<&str> = Vec::with_capacity(self.markers_per_doc + self.filler_per_doc);
        for _ in 0..self.markers_per_doc {
            words.push(markers.choose(rng).expect("non-empty pool"));
        }
        for _ in 0..self.filler_per_doc {
            words.push(FILLER.choose(rng).expect("non-empty pool"));
        }
        rand::seq::SliceRandom::shuffle(&mut words[..], rng);
        let split = self.title_words.min(words.len());
        let title = words[..split].join(" ");
        let mut abstract_words = words[split..].to_vec();
        abstract_words.extend_from_slice(extra);
        let sources = [Source::Pubmed, Source::Embase, Source::Medrxiv, Source::Biorxiv];
        DocumentRecord {
            id,
            title: capitalize(&title),
            abstract_text: capitalize(&abstract_words.join(" ")) + ".",
            source: *sources.choose(rng).expect("non-empty"),
            label: Some(class),
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Two overlapping Gaussian classes in `dims` dense features:
/// `majority` centred at 0 and `minority` at `shift` on every axis, unit
/// variance. `minority_fraction` of the `n` samples are minority.
pub fn skewed_binary(
    n: usize,
    minority_fraction: f64,
    dims: usize,
    shift: f64,
    majority: DocClass,
    minority: DocClass,
    seed: u64,
) -> Vec<(SparseVector, DocClass)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let n_minority = (n as f64 * minority_fraction).round() as usize;
    let mut out: Vec<(SparseVector, DocClass)> = (0..n)
        .map(|i| {
            let (class, centre) = if i < n_minority {
                (minority, shift)
            } else {
                (majority, 0.0)
            };
            let values: Vec<f64> = (0..dims).map(|_| centre + normal.sample(&mut rng)).collect();
            (SparseVector::from_dense(&values).expect("finite values"), class)
        })
        .collect();
    rand::seq::SliceRandom::shuffle(&mut out[..], &mut rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textpipe::tokenize;
    use std::collections::HashSet;

    #[test]
    fn class_sizes_follow_published_proportions() {
        let sizes = class_sizes(5000);
        assert_eq!(sizes.iter().sum::<usize>(), 5000);
        // 5000 * count / 401737
        assert_eq!(sizes, [215, 3560, 705, 444, 76]);
        assert_eq!(class_sizes(0), [0; 5]);
        assert_eq!(class_sizes(401_737).map(|s| s as u64), PUBLISHED_CLASS_COUNTS);
    }

    #[test]
    fn marker_pools_are_disjoint_single_tokens() {
        let mut seen = HashSet::new();
        for pool in MARKERS.iter().chain(std::iter::once(&FILLER)) {
            for word in pool.iter() {
                assert_eq!(tokenize(word), vec![word.to_string()], "{word}");
                assert!(seen.insert(*word), "duplicate {word}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = SyntheticCorpus::new(3).generate(200, "s");
        let b = SyntheticCorpus::new(3).generate(200, "s");
        assert_eq!(a, b);
        assert_ne!(a, SyntheticCorpus::new(4).generate(200, "s"));
        assert!(a.iter().all(|r| r.label.is_some()));
    }

    #[test]
    fn skewed_binary_has_requested_skew() {
        let data = skewed_binary(1000, 0.01, 3, 1.0, DocClass::SystematicReview, DocClass::Excluded, 1);
        let minority = data.iter().filter(|(_, c)| *c == DocClass::Excluded).count();
        assert_eq!(minority, 10);
        assert!(data.iter().all(|(v, _)| v.dimension() == 3));
    }
}
