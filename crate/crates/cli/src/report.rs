//! The scenario report: computed diagnostics, the convergence verdict and the
//! manifest of written files.

use lvdelay::model::{Equilibrium, ModelParams, PartitionLabel, Thresholds};
use serde::{Deserialize, Serialize};

/// Asymptotic outcome decided from the computed series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "to_E_star")]
    ToEStar,
    #[serde(rename = "near_periodic")]
    NearPeriodic,
    #[serde(rename = "extinction")]
    Extinction,
    #[serde(rename = "prey_explosion")]
    PreyExplosion,
    #[serde(rename = "undecided")]
    Undecided,
}

/// Distance of the final state to the coexistence equilibrium, plus the
/// terminal Lyapunov level when computable, plus the worst relative deviation
/// of the two prey-mass routes when cross-validation ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub final_state_distance: Option<f64>,
    pub final_lyapunov: Option<f64>,
    pub pde_crossval_max_dev: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub params: ModelParams,
    pub thresholds: Thresholds,
    pub equilibria: Vec<Equilibrium>,
    pub periodicity_index: Option<f64>,
    pub partition: Option<PartitionLabel>,
    pub verdict: Option<Verdict>,
    pub distances: Distances,
    pub files: Vec<String>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lvdelay::model::{equilibria, thresholds};

    #[test]
    fn verdict_names_follow_the_schema() {
        assert_eq!(
            serde_json::to_string(&Verdict::ToEStar).unwrap(),
            "\"to_E_star\""
        );
        assert_eq!(
            serde_json::to_string(&Verdict::PreyExplosion).unwrap(),
            "\"prey_explosion\""
        );
    }

    #[test]
    fn report_serializes_expected_fields() {
        let params = ModelParams::new(0.5, 10.0, 0.5, 3.0, 0.7, 2.0).unwrap();
        let report = ScenarioReport {
            params,
            thresholds: thresholds(&params),
            equilibria: equilibria(&params),
            periodicity_index: Some(0.8884),
            partition: Some(PartitionLabel::S3),
            verdict: Some(Verdict::Undecided),
            distances: Distances::default(),
            files: vec!["trajectory.csv".into()],
        };
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        for key in [
            "params",
            "thresholds",
            "equilibria",
            "periodicity_index",
            "partition",
            "verdict",
            "distances",
            "files",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["partition"], "S3");
        assert_eq!(json["verdict"], "undecided");
    }
}
