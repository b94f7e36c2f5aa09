//! Experiment configuration (TOML).
//!
//! ```toml
//! [run]
//! seed = 0
//! out = ""
//!
//! [space]
//! r0 = 100.0
//! alpha1_grid = [1.0, 1.5, 2.0, 4.0, 8.0, 16.0]
//!
//! [flows]
//! iota = 0.00390625
//! step_radius = 0.5
//! stretch_t = 2.0
//! stretch_s = 1.0
//! thinning = 10
//! burn_in = 1000
//! chains = 4
//!
//! [ergodic]
//! battery_size = 5
//! quad_points = 512
//! sobolev_degree = 20
//! haar_count = 20000
//!
//! [thresholds]
//! generic_fraction = 0.9
//! generic_trend_slack = 0.05
//! cusp_slope = -0.4
//! autocorr_slope = -0.3
//! equidist_spearman = 0.0
//! close_pair_ratio_fraction = 0.4
//! close_pair_radius = 0.05
//!
//! [theorem_constants]
//! delta = 1e-7
//! eta = 7.84e7
//! d = 20
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{WalkSpec, IOTA};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunSection {
    pub seed: u64,
    /// Output directory; empty writes to stdout only.
    pub out: String,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSection {
    /// Height bound of the compact part used by the experiments.
    pub r0: f64,
    /// Heights tabulated by `alpha1`.
    pub alpha1_grid: Vec<f64>,
}

impl Default for SpaceSection {
    fn default() -> Self {
        SpaceSection { r0: 100.0, alpha1_grid: vec![1.0, 1.5, 2.0, 4.0, 8.0, 16.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowsSection {
    pub iota: f64,
    pub step_radius: f64,
    pub stretch_t: f64,
    pub stretch_s: f64,
    pub thinning: usize,
    pub burn_in: usize,
    pub chains: usize,
}

impl Default for FlowsSection {
    fn default() -> Self {
        let w = WalkSpec::default();
        FlowsSection {
            iota: IOTA,
            step_radius: w.step_radius,
            stretch_t: w.stretch_t,
            stretch_s: w.stretch_s,
            thinning: w.thinning,
            burn_in: w.burn_in,
            chains: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErgodicSection {
    pub battery_size: usize,
    pub quad_points: usize,
    pub sobolev_degree: u32,
    pub haar_count: usize,
}

impl Default for ErgodicSection {
    fn default() -> Self {
        ErgodicSection { battery_size: 5, quad_points: 512, sobolev_degree: 20, haar_count: 20_000 }
    }
}

/// Slack thresholds of the trend experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub generic_fraction: f64,
    pub generic_trend_slack: f64,
    pub cusp_slope: f64,
    pub autocorr_slope: f64,
    pub equidist_spearman: f64,
    pub close_pair_ratio_fraction: f64,
    pub close_pair_radius: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            generic_fraction: 0.9,
            generic_trend_slack: 0.05,
            cusp_slope: -0.4,
            autocorr_slope: -0.3,
            equidist_spearman: 0.0,
            close_pair_ratio_fraction: 0.4,
            close_pair_radius: 0.05,
        }
    }
}

/// Constants quoted for reference; no computation reads them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremConstants {
    pub delta: f64,
    pub eta: f64,
    pub d: u32,
}

impl Default for TheoremConstants {
    fn default() -> Self {
        TheoremConstants { delta: 1e-7, eta: 7.84e7, d: 20 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub space: SpaceSection,
    pub flows: FlowsSection,
    pub ergodic: ErgodicSection,
    pub thresholds: Thresholds,
    pub theorem_constants: TheoremConstants,
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Invalid(format!("config: {what}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.space;
        check(s.r0.is_finite() && s.r0 >= 1.0, "space.r0 must be finite and ≥ 1")?;
        check(s.alpha1_grid.iter().all(|r| r.is_finite() && *r > 0.0), "space.alpha1_grid must be positive")?;
        let f = &self.flows;
        check(f.iota > 0.0 && f.iota < 1.0, "flows.iota must lie in (0, 1)")?;
        check(f.step_radius > 0.0 && f.step_radius <= 2.0, "flows.step_radius must lie in (0, 2]")?;
        check(f.stretch_t >= 0.0 && f.stretch_t <= 5.0, "flows.stretch_t must lie in [0, 5]")?;
        check(f.stretch_s.abs() <= 10.0, "flows.stretch_s must lie in [−10, 10]")?;
        check(f.thinning >= 1 && f.chains >= 1, "flows.thinning and flows.chains must be ≥ 1")?;
        let e = &self.ergodic;
        check(e.battery_size >= 1, "ergodic.battery_size must be ≥ 1")?;
        check(e.quad_points >= 16, "ergodic.quad_points must be ≥ 16")?;
        check(e.sobolev_degree >= 1 && e.sobolev_degree <= 24, "ergodic.sobolev_degree must lie in [1, 24]")?;
        check(e.haar_count >= 2, "ergodic.haar_count must be ≥ 2")?;
        let t = &self.thresholds;
        check((0.0..=1.0).contains(&t.generic_fraction), "thresholds.generic_fraction must lie in [0, 1]")?;
        check((0.0..=1.0).contains(&t.generic_trend_slack), "thresholds.generic_trend_slack must lie in [0, 1]")?;
        check(t.cusp_slope < 0.0 && t.cusp_slope > -10.0, "thresholds.cusp_slope must lie in (−10, 0)")?;
        check(t.autocorr_slope < 0.0 && t.autocorr_slope > -10.0, "thresholds.autocorr_slope must lie in (−10, 0)")?;
        check((-1.0..=1.0).contains(&t.equidist_spearman), "thresholds.equidist_spearman must lie in [−1, 1]")?;
        check(
            (0.0..=1.0).contains(&t.close_pair_ratio_fraction),
            "thresholds.close_pair_ratio_fraction must lie in [0, 1]",
        )?;
        check(t.close_pair_radius > 0.0 && t.close_pair_radius <= 1.0, "thresholds.close_pair_radius must lie in (0, 1]")?;
        Ok(())
    }

    /// Walk parameters with the given step count and seed.
    pub fn walk(&self, steps: usize, seed: u64) -> WalkSpec {
        WalkSpec {
            step_radius: self.flows.step_radius,
            stretch_t: self.flows.stretch_t,
            stretch_s: self.flows.stretch_s,
            thinning: self.flows.thinning,
            burn_in: self.flows.burn_in,
            steps,
            seed,
            chains: self.flows.chains,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), c.to_toml());
        assert_eq!(c.flows.iota, 1.0 / 256.0);
        assert_eq!(c.theorem_constants.eta, 7.84e7);
    }

    #[test]
    fn module_doc_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start().to_string() + "\n")
            .collect();
        let c = ExperimentConfig::from_toml(&doc).unwrap();
        assert_eq!(c.flows.chains, 4);
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn rejects_out_of_range_and_unknown_keys() {
        assert!(ExperimentConfig::from_toml("[flows]\niota = 2.0\n").is_err());
        assert!(ExperimentConfig::from_toml("[thresholds]\ngeneric_fraction = 1.5\n").is_err());
        assert!(ExperimentConfig::from_toml("[run]\nseeed = 3\n").is_err());
        let c = ExperimentConfig::from_toml("[run]\nseed = 7\n").unwrap();
        assert_eq!(c.run.seed, 7);
    }

    #[test]
    fn odd_floats_round_trip_bit_exactly() {
        let mut c = ExperimentConfig::default();
        c.space.r0 = 100.0 / 3.0 + 0.1 + 0.2;
        c.flows.stretch_s = -1.0 / 3.0;
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back.space.r0.to_bits(), c.space.r0.to_bits());
        assert_eq!(back.flows.stretch_s.to_bits(), c.flows.stretch_s.to_bits());
    }
}
