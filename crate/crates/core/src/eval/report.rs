use std::fmt::Write;

use crate::class::DocClass;

use super::{relative_improvement, ConfusionMatrix, EvalError, MetricsReport};

/// Fixed-width per-class table in canonical class order, two decimals.
pub fn render_table(title: &str, report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<18} {:>9} {:>6} {:>6} {:>6}",
        "", "# docs", "Prec.", "Rec.", "F-1"
    );
    let _ = writeln!(out, "{}", "-".repeat(49));
    for m in &report.per_class {
        let _ = writeln!(
            out,
            "{:<18} {:>9} {:>6.2} {:>6.2} {:>6.2}",
            m.class.display_name(),
            m.support,
            m.precision,
            m.recall,
            m.f1
        );
    }
    let _ = writeln!(out, "{}", "-".repeat(49));
    let support: u64 = report.per_class.iter().map(|m| m.support).sum();
    let _ = writeln!(
        out,
        "{:<18} {:>9} {:>6.2} {:>6.2} {:>6.2}",
        "Macro average", support, report.macro_precision, report.macro_recall, report.macro_f1
    );
    out
}

/// CSV with a header row of canonical class names; the first column holds
/// the gold class.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("gold\\predicted");
    for class in DocClass::ALL {
        out.push(',');
        out.push_str(class.as_str());
    }
    out.push('\n');
    for (class, row) in DocClass::ALL.iter().zip(&cm.counts) {
        out.push_str(class.as_str());
        for count in row {
            let _ = write!(out, ",{count}");
        }
        out.push('\n');
    }
    out
}

/// Side-by-side macro-F1 comparison with the relative improvement.
pub fn render_improvement(
    baseline_name: &str,
    baseline: &MetricsReport,
    candidate_name: &str,
    candidate: &MetricsReport,
) -> Result<String, EvalError> {
    let improvement = relative_improvement(baseline, candidate)?;
    let mut out = String::new();
    let _ = writeln!(out, "{:<18} {:>9}", "Model", "macro F-1");
    let _ = writeln!(out, "{:<18} {:>9.3}", baseline_name, baseline.macro_f1);
    let _ = writeln!(out, "{:<18} {:>9.3}", candidate_name, candidate.macro_f1);
    let _ = writeln!(
        out,
        "relative improvement of {candidate_name} over {baseline_name}: {:+.1}% ({improvement:.4})",
        improvement * 100.0
    );
    Ok(out)
}
