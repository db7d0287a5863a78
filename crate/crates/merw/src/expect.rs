//! Closed-form queries behind `merw expect`.

use merw_core::analytics::{self, AnalyticsError};
use merw_core::special::SeriesError;
use merw_core::{classify_regime, validate_params, ModelError, Variant};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    Moves,
    UPartial,
    ULimit,
    Hyp3f2,
    Moment,
    Gamma,
    PCritical,
    Regime,
    Variation,
}

/// Inputs shared by all queries; each query reads the ones it needs.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub r: Option<f64>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub p: Option<f64>,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    pub mu1: Option<f64>,
    pub eta1: Option<f64>,
    pub b: Option<f64>,
    pub m: Option<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExpectError {
    #[error("this query needs {0}")]
    MissingInput(&'static str),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ExpectError {
    /// Missing inputs are usage errors, the rest are domain errors.
    pub fn is_usage(&self) -> bool {
        matches!(self, ExpectError::MissingInput(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Text(String),
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    pub value: Value,
    pub citation: &'static str,
}

fn row(name: impl Into<String>, value: f64, citation: &'static str) -> Row {
    Row {
        name: name.into(),
        value: Value::Number(value),
        citation,
    }
}

fn text(name: impl Into<String>, value: impl Into<String>, citation: &'static str) -> Row {
    Row {
        name: name.into(),
        value: Value::Text(value.into()),
        citation,
    }
}

fn need<T: Copy>(v: Option<T>, what: &'static str) -> Result<T, ExpectError> {
    v.ok_or(ExpectError::MissingInput(what))
}

pub fn evaluate(query: Query, x: &Inputs) -> Result<Vec<Row>, ExpectError> {
    Ok(match query {
        Query::Moves => {
            let (r, n) = (need(x.r, "-r")?, need(x.n, "-n")?);
            vec![row(
                "expected_moves",
                analytics::expected_moves(r, n)?,
                "expected-moves-gamma-ratio",
            )]
        }
        Query::UPartial => {
            let (r, n) = (need(x.r, "-r")?, need(x.n, "-n")?);
            vec![row("u_partial", analytics::u_partial(r, n)?, "u-series")]
        }
        Query::ULimit => {
            let lim = analytics::u_limit(need(x.r, "-r")?)?;
            let regime = match lim.kind {
                analytics::GrowthKind::Power => "power",
                analytics::GrowthKind::Log => "log",
                analytics::GrowthKind::Finite => "finite",
            };
            vec![
                text("regime", regime, "u-series-limit"),
                text("normalizer", lim.describe_normalizer(), "u-series-limit"),
                row("constant", lim.constant, "u-series-limit"),
                row("error_bound", lim.error_bound, "u-series-limit"),
            ]
        }
        Query::Hyp3f2 => {
            let v = merw_core::special::hyp3f2_unit(need(x.r, "-r")?)?;
            vec![
                row("hyp3f2", v.value, "u-series-limit"),
                row("error_bound", v.error_bound, "u-series-limit"),
                row("terms", v.terms as f64, "u-series-limit"),
            ]
        }
        Query::Moment => {
            let (r, m) = (need(x.r, "-r")?, need(x.m, "-m")?);
            vec![row(
                "limit_moment",
                analytics::limit_moment(r, m)?,
                "stops-limit-moments",
            )]
        }
        Query::Gamma => {
            let c = analytics::regime_constants(need(x.d, "-d")?, need(x.p, "-p")?, None, 0.0)?;
            vec![row("gamma", c.gamma, "memory-exponent")]
        }
        Query::PCritical => vec![row(
            "p_critical",
            merw_core::model::p_critical(need(x.d, "-d")?),
            "critical-memory",
        )],
        Query::Regime => regime_rows(x)?,
        Query::Variation => {
            let n = need(x.n, "-n")?;
            let (mu, eta) = (need(x.mu, "--mu")?, need(x.eta, "--eta")?);
            let (mu1, eta1) = (need(x.mu1, "--mu1")?, need(x.eta1, "--eta1")?);
            vec![row(
                "trace_variation",
                analytics::trace_variation_from(mu1, eta1, mu, eta, n)?,
                "position-martingale-variation",
            )]
        }
    })
}

fn regime_rows(x: &Inputs) -> Result<Vec<Row>, ExpectError> {
    let (d, p) = (need(x.d, "-d")?, need(x.p, "-p")?);
    let r = x.r.unwrap_or(0.0);
    let params = validate_params(d, p, r)?;
    let c = analytics::regime_constants(d, p, None, r)?;
    let mut rows = vec![
        row("gamma", c.gamma, "memory-exponent"),
        row("p_critical", c.p_critical, "critical-memory"),
        text(
            "steps_regime",
            classify_regime(&params, Variant::RandomSteps)
                .map_or_else(|_| String::from("n/a"), |l| l.regime.to_string()),
            "critical-memory",
        ),
        text(
            "stops_regime",
            classify_regime(&params, Variant::Stops)?.regime.to_string(),
            "u-series-limit",
        ),
    ];
    if let Some(bound) = c.lil_bound_stops {
        rows.push(row("lil_bound_stops", bound, "lil-bound"));
    }
    if let (Some(mu), Some(eta)) = (x.mu, x.eta) {
        match analytics::lil_bound_steps(d, p, mu, eta) {
            Ok(bound) => rows.push(row("lil_bound_steps", bound, "lil-bound")),
            Err(AnalyticsError::AtOrAboveCritical { .. }) => rows.push(text(
                "lil_bound_steps",
                "undefined for p >= p_critical",
                "lil-bound",
            )),
            Err(e) => return Err(e.into()),
        }
        rows.push(row(
            "qsl_limit_steps",
            eta * eta / d as f64,
            "position-qsl-limit",
        ));
    }
    if let Some(b) = x.b {
        if !(0.0..=1.0).contains(&b) {
            return Err(AnalyticsError::Domain {
                name: "b",
                value: b,
                domain: "[0, 1]",
            }
            .into());
        }
        rows.push(row("clt_var_moves", b * (1.0 - b), "move-count-clt"));
        rows.push(row("lil_bound_moves", (b * (1.0 - b)).sqrt(), "lil-bound"));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(rows: &[Row], name: &str) -> Value {
        rows.iter().find(|r| r.name == name).unwrap().value.clone()
    }

    #[test]
    fn examples() {
        let x = Inputs {
            r: Some(0.5),
            n: Some(3),
            ..Default::default()
        };
        assert_eq!(
            value(&evaluate(Query::Moves, &x).unwrap(), "expected_moves"),
            Value::Number(1.875)
        );
        let rows = evaluate(
            Query::ULimit,
            &Inputs {
                r: Some(0.5),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(value(&rows, "regime"), Value::Text("log".into()));
        assert_eq!(
            value(&rows, "constant"),
            Value::Number(std::f64::consts::FRAC_PI_4)
        );
        let x = Inputs {
            d: Some(2),
            p: Some(1.0),
            ..Default::default()
        };
        assert_eq!(
            value(&evaluate(Query::Gamma, &x).unwrap(), "gamma"),
            Value::Number(1.0)
        );
    }

    #[test]
    fn errors() {
        let e = evaluate(
            Query::Hyp3f2,
            &Inputs {
                r: Some(0.6),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(!e.is_usage());
        let e = evaluate(
            Query::Moves,
            &Inputs {
                r: Some(0.6),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(e.is_usage());
    }

    #[test]
    fn regime_table() {
        let x = Inputs {
            d: Some(2),
            p: Some(0.7),
            r: Some(0.0),
            mu: Some(1.0),
            eta: Some(0.5),
            b: Some(0.3),
            ..Default::default()
        };
        let rows = evaluate(Query::Regime, &x).unwrap();
        assert_eq!(
            value(&rows, "steps_regime"),
            Value::Text("super-critical".into())
        );
        assert!(matches!(value(&rows, "lil_bound_steps"), Value::Text(_)));
        assert!(rows.iter().all(|r| !r.citation.is_empty()));
    }
}
