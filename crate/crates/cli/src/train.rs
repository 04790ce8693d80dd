use std::time::Instant;

use rayon::prelude::*;

use ebm_triage::bundle::{save_forest_bundle, save_linear_bundle};
use ebm_triage::embed::build_provider;
use ebm_triage::forest::train_forest;
use ebm_triage::linear::train_linear;
use ebm_triage::textpipe::Featurizer;
use ebm_triage::triage::{Backend, ForestBackend};

use crate::args::TrainArgs;
use crate::common::{check_ratio, load_labelled, require_file, split};
use crate::error::CliError;

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    require_file(&args.corpus, "corpus")?;
    check_ratio(args.test_ratio)?;
    let provider_config = args.provider.config();
    if args.backend.backends().contains(&Backend::Linear) {
        provider_config.validate()?;
    }
    let forest_params = args.forest.params(args.seed);
    forest_params.validate()?;
    let hyperparams = args
        .linear
        .hyperparams(args.seed, args.forest.class_weights.into());
    hyperparams.validate()?;

    let labelled = load_labelled(&args.corpus)?;
    let (train, test) = split(&labelled, args.test_ratio, args.seed)?;
    eprintln!(
        "training on {} documents ({} held out)",
        train.len(),
        test.len()
    );
    let texts: Vec<String> = train.iter().map(|(r, _)| r.text()).collect();
    let labels: Vec<_> = train.iter().map(|(_, l)| *l).collect();

    for backend in args.backend.backends() {
        let started = Instant::now();
        match backend {
            Backend::Forest => {
                let featurizer = Featurizer::fit(
                    texts.iter().map(String::as_str),
                    args.forest.min_df,
                    args.forest.max_df_ratio,
                )?;
                let vectors: Vec<_> = texts.par_iter().map(|t| featurizer.featurize(t)).collect();
                let data: Vec<_> = vectors.into_iter().zip(labels.iter().copied()).collect();
                let model = train_forest(&data, &forest_params)?;
                let vocabulary_size = featurizer.vocabulary().len();
                save_forest_bundle(&args.model, &ForestBackend::new(featurizer, model)?)?;
                eprintln!(
                    "forest: {} trees over {vocabulary_size} terms in {:.1}s -> {}",
                    forest_params.n_trees,
                    started.elapsed().as_secs_f64(),
                    args.model.display()
                );
            }
            Backend::Linear => {
                let provider = build_provider(&provider_config)?;
                let embeddings = provider.embed_batch(&texts)?;
                let data: Vec<_> = embeddings.into_iter().zip(labels.iter().copied()).collect();
                let model = train_linear(&data, &hyperparams)?;
                save_linear_bundle(&args.model, &model, &provider.identity())?;
                eprintln!(
                    "linear: {} epochs over {}-d embeddings in {:.1}s -> {}",
                    hyperparams.epochs,
                    provider.dimension(),
                    started.elapsed().as_secs_f64(),
                    args.model.display()
                );
            }
        }
    }
    Ok(())
}
