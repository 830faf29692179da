//! JSON and CSV serialization of result envelopes.

use crate::config::Format;
use crate::run::{ResultEnvelope, Results};
use crate::CliError;
use std::io::Write;
use std::path::Path;

/// Shortest form is not enough for spreadsheets that reformat; 17
/// significant digits always parse back to the same double.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn to_json(env: &ResultEnvelope) -> String {
    let mut s = serde_json::to_string_pretty(env).expect("envelope is serializable");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<ResultEnvelope, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("not a result envelope: {e}")))
}

/// Header plus one row per grid point or replicate.
pub fn to_csv(env: &ResultEnvelope) -> Result<String, CliError> {
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match &env.results {
        Results::Tail(r) => {
            let rep = &r.report;
            let rows = (0..rep.t_grid.len())
                .map(|i| {
                    vec![
                        num(rep.t_grid[i]),
                        num(rep.empirical_prob[i].mean),
                        num(rep.empirical_prob[i].std_error),
                        num(rep.exact_expected_count[i]),
                        num(rep.empirical_count[i].mean),
                        num(rep.empirical_count[i].std_error),
                        num(rep.pair_count[i].mean),
                        num(rep.pair_count[i].std_error),
                        opt(rep.asymptotic[i]),
                        num(r.bracket_lower[i]),
                        num(r.bracket_upper[i]),
                        r.bracket_holds[i].to_string(),
                    ]
                })
                .collect();
            let header = vec![
                "t",
                "prob",
                "prob_se",
                "exact_count",
                "count",
                "count_se",
                "pairs",
                "pairs_se",
                "asymptotic",
                "bracket_lower",
                "bracket_upper",
                "bracket_holds",
            ];
            (header, rows)
        }
        Results::ExtremalIndex(r) => {
            let rep = &r.report;
            let rows = (0..rep.maxima.len())
                .map(|i| {
                    vec![
                        i.to_string(),
                        num(rep.maxima[i]),
                        num(rep.normalized[i]),
                        rep.nuclei_counts[i].to_string(),
                    ]
                })
                .collect();
            (vec!["replicate", "maximum", "normalized", "nuclei"], rows)
        }
        Results::Constants(r) if !r.pointy.is_empty() => {
            let rows = r
                .pointy
                .iter()
                .map(|p| vec![num(p.t), num(p.expected_count), opt(p.asymptotic)])
                .collect();
            (vec!["t", "expected_count", "asymptotic"], rows)
        }
        _ => return Err(CliError::NotTabular(env.command.name().into())),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

/// Writes `text` to `path`, or to standard output without one.
pub fn write_text(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

pub fn emit_csv(env: &ResultEnvelope, path: Option<&Path>) -> Result<(), CliError> {
    write_text(&to_csv(env)?, path)
}

/// Writes the envelope in the configured format to the configured target.
pub fn emit(env: &ResultEnvelope) -> Result<(), CliError> {
    let path = env.config.out.as_deref();
    match env.config.format {
        Format::Json => write_text(&to_json(env), path),
        Format::Csv => emit_csv(env, path),
    }
}
