use std::fs;

use ebm_triage::eval::published::{claimed_improvement_note, PUBLISHED_MODELS, RANDOM_FOREST, XLNET};
use ebm_triage::eval::{
    confusion, confusion_csv, f1_score, metrics, relative_improvement, render_improvement,
    render_table, MetricsReport,
};
use ebm_triage::triage::Backend;

use crate::args::EvalArgs;
use crate::common::{check_ratio, load_labelled, require_file, split, Predictor};
use crate::error::CliError;

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    if args.published {
        print!("{}", published_summary());
        return Ok(());
    }
    let (Some(corpus), Some(model_dir)) = (&args.corpus, &args.model) else {
        return Err(CliError::Usage("--corpus and --model are required".into()));
    };
    require_file(corpus, "corpus")?;
    check_ratio(args.test_ratio)?;
    let backends = args.backend.backends();
    let predictors = backends
        .iter()
        .map(|&b| Predictor::load(model_dir, b, &args.provider))
        .collect::<Result<Vec<_>, _>>()?;

    let labelled = load_labelled(corpus)?;
    let (_, test) = split(&labelled, args.test_ratio, args.seed)?;
    let eval_set = if args.test_ratio == 0.0 { labelled } else { test };
    if eval_set.is_empty() {
        return Err(CliError::Mismatch("evaluation set is empty".into()));
    }
    let texts: Vec<String> = eval_set.iter().map(|(r, _)| r.text()).collect();
    let golds: Vec<_> = eval_set.iter().map(|(_, l)| *l).collect();

    let mut reports: Vec<(Backend, MetricsReport)> = Vec::new();
    for (backend, predictor) in backends.iter().zip(&predictors) {
        let preds: Vec<_> = predictor
            .predict_batch(&texts)?
            .into_iter()
            .map(|p| p.predicted)
            .collect();
        let cm = confusion(&golds, &preds)?;
        let accuracy = cm.accuracy();
        let report = metrics(&cm);
        println!(
            "{}",
            render_table(&format!("{} ({} documents)", backend.as_str(), golds.len()), &report)
        );
        println!("accuracy {accuracy:.4}  macro F-1 {:.4}\n", report.macro_f1);
        if let Some(out) = &args.out {
            fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
            let json_path = out.join(format!("metrics-{}.json", backend.as_str()));
            let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            fs::write(&json_path, json).map_err(|e| CliError::io(&json_path, e))?;
            let csv_path = out.join(format!("confusion-{}.csv", backend.as_str()));
            fs::write(&csv_path, confusion_csv(&cm)).map_err(|e| CliError::io(&csv_path, e))?;
        }
        reports.push((*backend, report));
    }
    if let [(_, forest), (_, linear)] = &reports[..] {
        match render_improvement("forest", forest, "linear", linear) {
            Ok(text) => print!("{text}"),
            Err(e) => eprintln!("improvement not computed: {e}"),
        }
    }
    Ok(())
}

/// Published per-class tables, F1 recomputed from the printed precision and
/// recall, and the macro-F1 improvements over the forest.
pub fn published_summary() -> String {
    let mut out = String::new();
    for model in &PUBLISHED_MODELS {
        out.push_str(&render_table(model.name, &model.report()));
        let worst = model
            .rows
            .iter()
            .map(|r| (f1_score(r.precision, r.recall) - r.f1).abs())
            .fold(0.0, f64::max);
        out.push_str(&format!(
            "largest gap between printed F-1 and F-1 recomputed from P/R: {worst:.4}\n\n"
        ));
    }
    let rf = RANDOM_FOREST.report();
    for candidate in &PUBLISHED_MODELS[1..] {
        out.push_str(
            &render_improvement(RANDOM_FOREST.name, &rf, candidate.name, &candidate.report())
                .expect("forest macro-F1 is positive"),
        );
        out.push('\n');
    }
    let best = relative_improvement(&rf, &XLNET.report()).expect("forest macro-F1 is positive");
    out.push_str(&claimed_improvement_note(best));
    out.push('\n');
    out
}
