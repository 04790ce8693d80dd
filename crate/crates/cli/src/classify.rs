use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};

use serde::Serialize;

use ebm_triage::ingest::parse_record;
use ebm_triage::{DocClass, PredictionResult};

use crate::args::ClassifyArgs;
use crate::common::{require_file, Predictor};
use crate::error::CliError;

/// Streams the corpus in chunks; within a chunk documents may be
/// classified in parallel, but output follows input order. Each non-blank
/// input line yields one output line: a prediction or a line error.
pub fn run(args: &ClassifyArgs) -> Result<(), CliError> {
    let from_stdin = args.corpus.as_os_str() == "-";
    if !from_stdin {
        require_file(&args.corpus, "corpus")?;
    }
    if args.chunk_size == 0 {
        return Err(CliError::Usage("--chunk-size must be at least 1".into()));
    }
    let predictor = Predictor::load(&args.model, args.backend.into(), &args.provider)?;

    let input: Box<dyn BufRead> = if from_stdin {
        Box::new(BufReader::new(io::stdin()))
    } else {
        let f = File::open(&args.corpus).map_err(|e| CliError::io(&args.corpus, e))?;
        Box::new(BufReader::new(f))
    };
    let output: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(File::create(path).map_err(|e| CliError::io(path, e))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut output = BufWriter::new(output);

    let mut lines = input.split(b'\n');
    let mut line_no = 0usize;
    let (mut classified, mut failed) = (0usize, 0usize);
    loop {
        // (line number, parsed record or error message)
        let mut chunk = Vec::with_capacity(args.chunk_size);
        while chunk.len() < args.chunk_size {
            let Some(raw) = lines.next() else { break };
            let raw = raw?;
            line_no += 1;
            let parsed = match std::str::from_utf8(&raw) {
                Ok(text) if text.trim().is_empty() => continue,
                Ok(text) => parse_record(text, line_no)
                    .map(|(record, _)| record)
                    .map_err(|e| format!("{}: {}", e.kind, e.reason)),
                Err(e) => Err(format!("malformed-line: invalid UTF-8: {e}")),
            };
            chunk.push((line_no, parsed));
        }
        if chunk.is_empty() {
            break;
        }
        let texts: Vec<String> = chunk
            .iter()
            .filter_map(|(_, r)| r.as_ref().ok().map(|r| r.text()))
            .collect();
        let mut predictions = predictor.predict_batch(&texts)?.into_iter();
        for (line, parsed) in chunk {
            let value = match parsed {
                Ok(record) => {
                    classified += 1;
                    let p = predictions.next().expect("one prediction per record");
                    OutputLine::Prediction(PredictionLine::new(record.id, p))
                }
                Err(error) => {
                    failed += 1;
                    OutputLine::Error { line, error }
                }
            };
            serde_json::to_writer(&mut output, &value).map_err(io::Error::from)?;
            output.write_all(b"\n")?;
        }
    }
    output.flush()?;
    eprintln!("classified {classified} document(s), {failed} invalid line(s)");
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum OutputLine {
    Prediction(PredictionLine),
    Error { line: usize, error: String },
}

#[derive(Serialize)]
struct PredictionLine {
    id: String,
    predicted: DocClass,
    probabilities: [f64; 5],
    entropy: f64,
}

impl PredictionLine {
    fn new(id: String, p: PredictionResult) -> Self {
        PredictionLine {
            id,
            predicted: p.predicted,
            probabilities: p.probabilities,
            entropy: p.entropy,
        }
    }
}
