//! JSON and plain-table rendering of results.

use std::collections::BTreeMap;

use serde::Serialize;

use hte_mediation_core::{GammaAggregate, Heterogeneity, MediationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
}

/// Rounds to six significant digits; non-finite values become `None`.
pub fn sig6(x: f64) -> Option<f64> {
    x.is_finite().then(|| format!("{x:.5e}").parse().expect("formatted float parses"))
}

/// Six significant digits as text; very small or large magnitudes use
/// exponent notation.
pub fn fmt6(x: f64) -> String {
    match sig6(x) {
        Some(v) if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e9) => format!("{v:e}"),
        Some(v) => v.to_string(),
        None => "nan".into(),
    }
}

/// Configuration echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunEcho {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input: Option<String>,
    pub weights: Option<String>,
    pub seed: u64,
    pub alpha: f64,
    pub ci_mode: String,
    pub estimator: String,
    pub simex_zeta_grid: Vec<f64>,
    pub simex_replicates: usize,
    pub simex_outer_bootstrap: usize,
    pub simex_variance: String,
    pub bootstrap_replicates: usize,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Fitted(Box<MediationResult>),
    Failed { method: String, error: String },
}

#[derive(Debug, Clone)]
pub struct Report {
    pub echo: RunEcho,
    pub k: usize,
    pub gamma: GammaAggregate,
    pub heterogeneity: Option<Heterogeneity>,
    pub outcomes: Vec<Outcome>,
}

#[derive(Serialize)]
struct JsonHeterogeneity {
    q: Option<f64>,
    df: usize,
    p_q: Option<f64>,
    i2: Option<f64>,
}

#[derive(Serialize)]
struct JsonEstimate {
    method: String,
    status: &'static str,
    error: Option<String>,
    beta_hat: Option<f64>,
    se_beta: Option<f64>,
    intercept: Option<f64>,
    acme: Option<f64>,
    p_beta: Option<f64>,
    p_gamma: Option<f64>,
    p_overall: Option<f64>,
    reject: Option<bool>,
    ci_lower: Option<f64>,
    ci_upper: Option<f64>,
    extra_coefficients: BTreeMap<String, Option<f64>>,
    diagnostics: BTreeMap<String, Option<f64>>,
}

#[derive(Serialize)]
struct JsonGamma {
    k: usize,
    gamma0_hat: Option<f64>,
    var_gamma0: Option<f64>,
    heterogeneity: Option<JsonHeterogeneity>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    run: &'a RunEcho,
    gamma: JsonGamma,
    estimates: Vec<JsonEstimate>,
}

fn json_estimate(outcome: &Outcome) -> JsonEstimate {
    match outcome {
        Outcome::Fitted(r) => JsonEstimate {
            method: r.beta_fit.method.as_str().into(),
            status: "ok",
            error: None,
            beta_hat: sig6(r.beta_fit.beta_hat),
            se_beta: sig6(r.beta_fit.se_beta),
            intercept: sig6(r.beta_fit.intercept_hat),
            acme: sig6(r.acme_hat),
            p_beta: sig6(r.p_beta),
            p_gamma: sig6(r.p_gamma),
            p_overall: sig6(r.p_overall),
            reject: Some(r.reject),
            ci_lower: sig6(r.ci_lower),
            ci_upper: sig6(r.ci_upper),
            extra_coefficients: r.beta_fit.extra_coefs.iter().map(|(k, v)| (k.clone(), sig6(*v))).collect(),
            diagnostics: r.beta_fit.diagnostics.iter().map(|(k, v)| (k.clone(), sig6(*v))).collect(),
        },
        Outcome::Failed { method, error } => JsonEstimate {
            method: method.clone(),
            status: "error",
            error: Some(error.clone()),
            beta_hat: None,
            se_beta: None,
            intercept: None,
            acme: None,
            p_beta: None,
            p_gamma: None,
            p_overall: None,
            reject: None,
            ci_lower: None,
            ci_upper: None,
            extra_coefficients: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
        },
    }
}

/// Renders a report. Keys appear in a fixed order and reals carry six
/// significant digits, so equal inputs give identical bytes.
pub fn emit_result(report: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let json = JsonReport {
                run: &report.echo,
                gamma: JsonGamma {
                    k: report.k,
                    gamma0_hat: sig6(report.gamma.gamma0_hat),
                    var_gamma0: sig6(report.gamma.var_gamma0),
                    heterogeneity: report.heterogeneity.map(|h| JsonHeterogeneity {
                        q: sig6(h.q),
                        df: h.df,
                        p_q: sig6(h.p_q),
                        i2: sig6(h.i2),
                    }),
                },
                estimates: report.outcomes.iter().map(json_estimate).collect(),
            };
            let mut s = serde_json::to_string_pretty(&json).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Table => {
            let mut out = String::new();
            out.push_str(&format!(
                "# {} {} {} seed={} alpha={} ci_mode={} K={} gamma0={} var_gamma0={}\n",
                report.echo.tool,
                report.echo.version,
                report.echo.command,
                report.echo.seed,
                report.echo.alpha,
                report.echo.ci_mode,
                report.k,
                fmt6(report.gamma.gamma0_hat),
                fmt6(report.gamma.var_gamma0),
            ));
            let header = ["method", "beta_hat", "se_beta", "acme", "p_beta", "p_gamma", "p_overall", "ci_lower", "ci_upper", "reject"];
            out.push_str(&header.join("\t"));
            out.push('\n');
            for o in &report.outcomes {
                let row: Vec<String> = match o {
                    Outcome::Fitted(r) => vec![
                        r.beta_fit.method.as_str().into(),
                        fmt6(r.beta_fit.beta_hat),
                        fmt6(r.beta_fit.se_beta),
                        fmt6(r.acme_hat),
                        fmt6(r.p_beta),
                        fmt6(r.p_gamma),
                        fmt6(r.p_overall),
                        fmt6(r.ci_lower),
                        fmt6(r.ci_upper),
                        r.reject.to_string(),
                    ],
                    Outcome::Failed { method, error } => {
                        let mut row = vec![method.clone()];
                        row.extend(std::iter::repeat("-".to_string()).take(header.len() - 2));
                        row.push(format!("error: {error}"));
                        row
                    }
                };
                out.push_str(&row.join("\t"));
                out.push('\n');
            }
            out
        }
    }
}
