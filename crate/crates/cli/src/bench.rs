use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use ebm_triage::bundle::load_forest_bundle;
use ebm_triage::forest::{train_forest, ForestParams};
use ebm_triage::hashing::child_seed;
use ebm_triage::synth::SyntheticCorpus;
use ebm_triage::textpipe::{Featurizer, DEFAULT_MAX_DF_RATIO, DEFAULT_MIN_DF};
use ebm_triage::triage::ForestBackend;

use crate::args::BenchArgs;
use crate::common::{load_corpus, require_dir, require_file};
use crate::error::CliError;

/// Documents per hour the production system is reported to handle.
pub const REFERENCE_DOCS_PER_HOUR: f64 = 32_000.0;

const DEFAULT_SYNTHETIC: usize = 10_000;

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub documents: usize,
    pub seconds: f64,
    pub docs_per_hour: f64,
    pub reference_docs_per_hour: f64,
    pub ratio_to_reference: f64,
    pub threads: usize,
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    let (backend, texts) = match &args.corpus {
        Some(corpus) => {
            require_file(corpus, "corpus")?;
            let model = args.model.as_ref().expect("clap enforces --model");
            require_dir(model, "model directory")?;
            let backend = load_forest_bundle(model)?;
            let texts: Vec<String> = load_corpus(corpus)?.iter().map(|r| r.text()).collect();
            (backend, texts)
        }
        None => synthetic_setup(args)?,
    };
    if texts.is_empty() {
        return Err(CliError::Mismatch("no documents to benchmark".into()));
    }

    let started = Instant::now();
    let predictions = texts
        .par_iter()
        .map(|t| backend.classify(t))
        .collect::<Result<Vec<_>, _>>()?;
    let seconds = started.elapsed().as_secs_f64().max(1e-9);
    debug_assert_eq!(predictions.len(), texts.len());

    let docs_per_hour = texts.len() as f64 / seconds * 3600.0;
    let report = BenchReport {
        documents: texts.len(),
        seconds,
        docs_per_hour,
        reference_docs_per_hour: REFERENCE_DOCS_PER_HOUR,
        ratio_to_reference: docs_per_hour / REFERENCE_DOCS_PER_HOUR,
        threads: rayon::current_num_threads(),
    };
    if args.json {
        println!("{}", serde_json::to_string(&report).expect("report serializes"));
    } else {
        println!(
            "{} documents in {:.3}s on {} thread(s): {:.0} docs/hour, {:.1}x the {:.0} docs/hour reference",
            report.documents,
            report.seconds,
            report.threads,
            report.docs_per_hour,
            report.ratio_to_reference,
            REFERENCE_DOCS_PER_HOUR
        );
    }
    Ok(())
}

/// Train a forest on one synthetic corpus (untimed) and return it with the
/// texts of a second, disjoint one.
fn synthetic_setup(args: &BenchArgs) -> Result<(ForestBackend, Vec<String>), CliError> {
    let n = args.synthetic.unwrap_or(DEFAULT_SYNTHETIC);
    let train = SyntheticCorpus::new(child_seed(args.seed, 0)).generate(args.train_size.max(1), "train");
    let bench = SyntheticCorpus::new(child_seed(args.seed, 1)).generate(n, "bench");
    let train_texts: Vec<String> = train.iter().map(|r| r.text()).collect();
    let featurizer = Featurizer::fit(
        train_texts.iter().map(String::as_str),
        DEFAULT_MIN_DF,
        DEFAULT_MAX_DF_RATIO,
    )?;
    let data: Vec<_> = train_texts
        .par_iter()
        .map(|t| featurizer.featurize(t))
        .zip(train.par_iter().map(|r| r.label.expect("synthetic records are labelled")))
        .collect();
    let params = ForestParams {
        n_trees: args.trees,
        seed: args.seed,
        ..ForestParams::default()
    };
    let model = train_forest(&data, &params)?;
    let backend = ForestBackend::new(featurizer, model)?;
    Ok((backend, bench.iter().map(|r| r.text()).collect()))
}
