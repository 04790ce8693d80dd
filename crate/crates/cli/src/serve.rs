use ebm_triage::embed::ProviderMode;
use ebm_triage_server::ServerConfig;

use crate::args::ServeArgs;
use crate::common::{require_dir, require_file};
use crate::error::CliError;

pub fn run(args: &ServeArgs) -> Result<(), CliError> {
    let config = resolve(args)?;
    if let Some(path) = &config.training_corpus {
        require_file(path, "training corpus")?;
    }
    require_dir(&config.model_dir, "model directory")?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Failed(format!("async runtime: {e}")))?;
    eprintln!("serving on {}", config.bind);
    runtime.block_on(ebm_triage_server::run(config))?;
    Ok(())
}

/// The config file (or defaults) with command-line overrides applied.
pub fn resolve(args: &ServeArgs) -> Result<ServerConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            require_file(path, "config file")?;
            ServerConfig::from_toml_file(path)?
        }
        None => ServerConfig::default(),
    };
    if let Some(bind) = &args.bind {
        config.bind = bind.clone();
    }
    if let Some(model) = &args.model {
        config.model_dir = model.clone();
    }
    if let Some(dir) = &args.data_dir {
        config.data_dir = dir.clone();
    }
    if let Some(corpus) = &args.training_corpus {
        config.training_corpus = Some(corpus.clone());
    }
    if let Some(backend) = args.backend {
        config.default_backend = backend.into();
    }
    if let Some(n) = args.min_new_labels {
        config.service.min_new_labels = n;
    }
    if args.no_auto_retrain {
        config.auto_retrain = false;
    }
    if let Some(p) = args.provider {
        config.provider.mode = ProviderMode::from(p);
    }
    if let Some(endpoint) = &args.endpoint {
        config.provider.endpoint = Some(endpoint.clone());
    }
    if let Some(d) = args.dimension {
        config.provider.dimension = d;
    }
    if let Some(s) = args.stub_seed {
        config.provider.stub_seed = s;
    }
    config.provider.validate()?;
    Ok(config)
}
