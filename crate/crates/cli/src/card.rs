//! Numerical family card: the three parameterizations, `F`, `G`, their
//! gradients, the Fisher information and the entropy at one parameter point.

use std::io::IsTerminal;

use expfam::divergences::{shannon_entropy, McOptions};
use expfam::family::{conjugate, fisher_information_natural, log_normalizer};
use expfam::ParamVector;

use crate::files::fmt_num;
use crate::CliError;

const LABEL_WIDTH: usize = 20;

/// ANSI bold labels only on a terminal and only when `NO_COLOR` is unset or
/// empty.
pub fn use_color() -> bool {
    let disabled = std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty());
    !disabled && std::io::stdout().is_terminal()
}

fn named(p: &ParamVector) -> String {
    let mut rest = p.values();
    let mut parts = Vec::new();
    for f in p.family().fields(p.space()) {
        let (head, tail) = rest.split_at(f.shape.len());
        rest = tail;
        let text = if head.len() == 1 {
            fmt_num(head[0])
        } else {
            list(head)
        };
        parts.push(format!("{} = {text}", f.name));
    }
    parts.join(", ")
}

fn list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| fmt_num(*v)).collect();
    format!("[{}]", items.join(", "))
}

pub fn render(p: &ParamVector, color: bool) -> Result<String, CliError> {
    let fam = p.family();
    let source = p.to_source()?;
    let theta = p.to_natural()?;
    let eta = p.to_expectation()?;
    let f = log_normalizer(&theta)?;
    let g = conjugate(&eta)?;
    let fisher = fisher_information_natural(&theta)?;
    let entropy = shannon_entropy(&theta, &McOptions::default())?;

    let mut rows: Vec<(String, String)> = vec![
        ("family".into(), fam.to_string()),
        ("source".into(), named(&source)),
        ("natural".into(), named(&theta)),
        ("expectation".into(), named(&eta)),
        ("F(theta)".into(), fmt_num(f)),
        ("grad F".into(), list(eta.values())),
        (
            if fam.has_closed_conjugate() { "G(eta)" } else { "G(eta) [Legendre]" }.into(),
            fmt_num(g),
        ),
        ("grad G".into(), list(theta.values())),
    ];
    for (i, row) in fisher.row_iter().enumerate() {
        let label = if i == 0 { "Fisher information" } else { "" };
        let values: Vec<f64> = row.iter().copied().collect();
        rows.push((label.into(), list(&values)));
    }
    let entropy_text = if entropy.std_error > 0.0 {
        format!("{} (Monte Carlo, std error {})", fmt_num(entropy.mean), fmt_num(entropy.std_error))
    } else {
        fmt_num(entropy.mean)
    };
    rows.push(("Shannon entropy".into(), entropy_text));

    let mut out = String::new();
    for (label, value) in rows {
        let padded = format!("{label:<LABEL_WIDTH$}");
        if color && !label.is_empty() {
            out.push_str(&format!("\x1b[1m{padded}\x1b[0m {value}\n"));
        } else {
            out.push_str(&format!("{padded} {value}\n"));
        }
    }
    Ok(out)
}
