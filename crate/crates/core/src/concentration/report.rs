use serde::Serialize;

use super::{TailFit, TailPoint, VarianceEstimate};

pub const REPORT_SCHEMA: &str = "concentration-report/v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub model_digest: String,
    pub statistic_digest: String,
    pub k: usize,
    pub seed: u64,
    /// Digest of the configuration that produced the report, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub schema: String,
    pub variance: VarianceEstimate,
    /// Closed-form bound, when one applies to the statistic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_bound: Option<f64>,
    pub centering: String,
    pub fit_window_rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<TailFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    pub metadata: ReportMetadata,
    pub tail_points: Vec<TailPoint>,
}

impl ConcentrationReport {
    pub fn new(
        variance: VarianceEstimate,
        variance_bound: Option<f64>,
        tail_points: Vec<TailPoint>,
        fit: Result<TailFit, String>,
        metadata: ReportMetadata,
    ) -> Self {
        let (fit, fit_error) = match fit {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e)),
        };
        Self {
            schema: REPORT_SCHEMA.into(),
            variance,
            variance_bound,
            centering: "in-batch sample mean".into(),
            fit_window_rule: "r from first p_hat <= 0.1 to last p_hat >= 50/k; fit uses p_hat in (10/k, 0.2); \
                              tail statements are asymptotic in r, this window is an operational choice"
                .into(),
            fit,
            fit_error,
            metadata,
            tail_points,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    /// `r,p_hat,ci_lo,ci_hi` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,p_hat,ci_lo,ci_hi\n");
        for p in &self.tail_points {
            out.push_str(&format!("{},{},{},{}\n", p.r, p.p_hat, p.ci_lo, p.ci_hi));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> ConcentrationReport {
        ConcentrationReport::new(
            VarianceEstimate {
                estimate: 2.5,
                standard_error: 0.1,
            },
            Some(4.0),
            vec![TailPoint {
                r: 0.5,
                exceedances: 30,
                trials: 100,
                p_hat: 0.3,
                ci_lo: 0.21,
                ci_hi: 0.4,
            }],
            Err("too few points".into()),
            ReportMetadata {
                model_digest: "aa".into(),
                statistic_digest: "bb".into(),
                k: 100,
                seed: 3,
                config_digest: None,
            },
        )
    }

    #[test]
    fn toml_has_schema_and_fields() {
        let text = report().to_toml();
        let value: toml::Table = text.parse().unwrap();
        assert_eq!(value["schema"].as_str(), Some(REPORT_SCHEMA));
        assert_eq!(value["variance_bound"].as_float(), Some(4.0));
        assert_eq!(value["fit_error"].as_str(), Some("too few points"));
        assert_eq!(value["tail_points"].as_array().unwrap().len(), 1);
        assert!(value.get("fit").is_none());
    }

    #[test]
    fn csv_rows() {
        assert_eq!(report().to_csv(), "r,p_hat,ci_lo,ci_hi\n0.5,0.3,0.21,0.4\n");
    }
}
