//! JSON run configuration for `iasreg solve`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use iasreg::classic::MorozovOptions;
use iasreg::ias::{HybridOptions, Params2, SwitchRule};
use iasreg::krylov::KrylovOptions;
use iasreg::problems::TomoConfig;
use iasreg::regularizer::LKind;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub prior: PriorSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub options: RunOptions,
    /// Output directory; relative paths resolve against the config file.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Numdiff {
        #[serde(default = "default_n")]
        n: usize,
        sigma_rel: f64,
        #[serde(default)]
        seed: u64,
    },
    Tomo(TomoConfig),
    /// A directory written by `iasreg gen`.
    Bundle { path: PathBuf },
}

fn default_n() -> usize {
    50
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionSpec {
    Componentwise,
    Trivial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartitionChoice {
    Named(PartitionSpec),
    /// 1-based row groups.
    Groups(Vec<Vec<usize>>),
}

impl Default for PartitionChoice {
    fn default() -> Self {
        PartitionChoice::Named(PartitionSpec::Componentwise)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum VarthetaSpec {
    /// The same scale for every group.
    Value(f64),
    /// Match the prior signal energy to the data SNR.
    Snr,
    /// `ϑ_j = α · SNR / ‖a_j‖²`; needs `L = I` with a componentwise partition.
    Sensitivity { alpha: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    /// Defaults to the generator's suggestion.
    #[serde(default)]
    pub l: Option<LKind>,
    #[serde(default)]
    pub partition: PartitionChoice,
    #[serde(default = "default_r")]
    pub r: f64,
    /// Give either `beta` or `eta`.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    pub vartheta: VarthetaSpec,
}

fn default_r() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SolverSpec {
    Ias,
    Hybrid {
        r2: f64,
        #[serde(default)]
        switch_rule: Option<SwitchRule<f64>>,
        #[serde(default)]
        params2: Option<Params2<f64>>,
    },
    TikhonovMorozov {
        #[serde(default)]
        morozov: MorozovOptions,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub delta: f64,
    pub max_outer: usize,
    pub krylov: KrylovOptions<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            delta: 0.01,
            max_outer: 100,
            krylov: KrylovOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let ProblemSpec::Bundle { path: p } = &mut cfg.problem {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = &mut cfg.output {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let ProblemSpec::Bundle { path } = &self.problem {
            if !path.join("metadata.json").is_file() {
                bail!("problem.path: no bundle found at {}", path.display());
            }
        }
        match (self.prior.beta, self.prior.eta) {
            (Some(_), Some(_)) => bail!("prior: give either `beta` or `eta`, not both"),
            (None, None) => bail!("prior: one of `beta` or `eta` is required"),
            _ => {}
        }
        if !(self.options.delta > 0.0 && self.options.delta < 1.0) {
            bail!("options.delta: must lie in (0, 1), got {}", self.options.delta);
        }
        if self.options.max_outer == 0 {
            bail!("options.max_outer: must be positive");
        }
        if let SolverSpec::Hybrid { .. } = self.solver {
            if self.prior.r != 1.0 {
                bail!("prior.r: the hybrid solver starts from r = 1, got {}", self.prior.r);
            }
        }
        if let SolverSpec::TikhonovMorozov { morozov } = &self.solver {
            morozov.validate().context("solver.morozov")?;
        }
        self.options.krylov.validate().context("options.krylov")?;
        Ok(())
    }

    pub fn hybrid_options(&self) -> Option<HybridOptions<f64>> {
        match &self.solver {
            SolverSpec::Hybrid {
                r2,
                switch_rule,
                params2,
            } => Some(HybridOptions {
                switch_rule: switch_rule.unwrap_or_else(|| SwitchRule::default_for(self.options.delta)),
                r2: *r2,
                params2: params2.clone().unwrap_or(Params2::Auto),
            }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn parses_full_config() {
        let cfg = parse(
            r#"{"problem": {"generator": "tomo", "nx": 16, "ny": 16, "n_rays": 10, "n_views": 4, "noise_pct": 2.0, "seed": 3},
                "prior": {"l": {"kind": "grid_incidence", "nx": 16, "ny": 16}, "partition": [[1, 2], [3]], "r": 1.0,
                          "beta": 1.6, "vartheta": {"sensitivity": {"alpha": 0.5}}},
                "solver": {"method": "hybrid", "r2": -1.0, "switch_rule": {"rule": "fixed-iteration", "count": 3}},
                "options": {"delta": 0.001, "max_outer": 20}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.problem, ProblemSpec::Tomo(ref t) if t.n_rays == 10));
        assert_eq!(cfg.prior.partition, PartitionChoice::Groups(vec![vec![1, 2], vec![3]]));
        assert_eq!(cfg.prior.vartheta, VarthetaSpec::Sensitivity { alpha: 0.5 });
        let h = cfg.hybrid_options().unwrap();
        assert_eq!(h.switch_rule, SwitchRule::FixedIteration { count: 3 });
    }

    #[test]
    fn hybrid_defaults_to_stagnation_rule() {
        let cfg = parse(
            r#"{"problem": {"generator": "numdiff", "sigma_rel": 0.01},
                "prior": {"eta": 0.1, "vartheta": "snr"}, "solver": {"method": "hybrid", "r2": 0.5}}"#,
        )
        .unwrap();
        let h = cfg.hybrid_options().unwrap();
        assert_eq!(h.switch_rule, SwitchRule::ThetaStagnation { tol: 0.1 });
        assert_eq!(h.params2, Params2::Auto);
    }

    #[test]
    fn rejects_unknown_and_conflicting_fields() {
        let base = r#""problem": {"generator": "numdiff", "sigma_rel": 0.01}, "solver": {"method": "ias"}"#;
        for prior in [
            r#"{"eta": 0.1, "vartheta": "snr", "colour": 1}"#,
            r#"{"eta": 0.1, "beta": 2.0, "vartheta": "snr"}"#,
            r#"{"vartheta": "snr"}"#,
        ] {
            assert!(parse(&format!("{{{base}, \"prior\": {prior}}}")).is_err(), "{prior}");
        }
        assert!(parse(
            r#"{"problem": {"generator": "numdiff", "sigma_rel": 0.01}, "prior": {"eta": 0.1, "vartheta": "snr"},
                "solver": {"method": "newton"}}"#
        )
        .is_err());
        assert!(parse(
            r#"{"problem": {"generator": "numdiff", "sigma_rel": 0.01}, "prior": {"r": 0.5, "beta": 8.0, "vartheta": "snr"},
                "solver": {"method": "hybrid", "r2": -1.0}}"#
        )
        .is_err());
    }
}
