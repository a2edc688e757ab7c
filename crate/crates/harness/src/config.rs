//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 0
//!
//! [model]
//! kind = "toy"          # toy | burgers | adr, followed by that model's parameters
//! n = 100
//!
//! [method]
//! kind = "tdb_cur"      # tdb_cur | dlra | do | fom
//! scheme = "rk4_classic"
//! dt = 1e-3
//! t_final = 1.0
//!
//! [policy]
//! r0 = 8
//! adapt = false
//! ```
//!
//! Every table rejects keys it does not know.

use std::path::{Path, PathBuf};

use lowrank_core::integrators::{RankPolicy, SchemeKind, StageEvaluation};
use lowrank_core::models::{AdrSpec, BurgersSpec, ToySpec};
use lowrank_core::sampling::Selector;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Toy {
        #[serde(default = "defaults::toy_n")]
        n: usize,
        #[serde(default)]
        rank_deficient: bool,
    },
    Burgers {
        #[serde(default = "defaults::burgers_n")]
        n: usize,
        #[serde(default = "defaults::burgers_s")]
        s: usize,
        #[serde(default = "defaults::burgers_nu")]
        nu: f64,
        #[serde(default = "defaults::burgers_d")]
        d: usize,
        #[serde(default)]
        noise_mean: f64,
        #[serde(default = "defaults::burgers_noise_sigma")]
        noise_sigma: f64,
        #[serde(default = "defaults::burgers_noise_amplitude")]
        noise_amplitude: f64,
        #[serde(default = "defaults::burgers_length_scale")]
        length_scale: f64,
        #[serde(default = "defaults::burgers_tau_factor")]
        tau_factor: f64,
    },
    Adr {
        #[serde(default = "defaults::adr_nx1")]
        nx1: usize,
        #[serde(default = "defaults::adr_nx2")]
        nx2: usize,
        #[serde(default = "defaults::adr_length")]
        length: f64,
        #[serde(default = "defaults::adr_s")]
        s: usize,
        #[serde(default = "defaults::adr_xi_mean")]
        xi_mean: f64,
        #[serde(default = "defaults::adr_xi_std")]
        xi_std: f64,
        #[serde(default = "defaults::adr_xi_min")]
        xi_min: f64,
        #[serde(default = "defaults::adr_u_max")]
        u_max: f64,
        #[serde(default = "defaults::yes")]
        reaction: bool,
        #[serde(default = "defaults::yes")]
        neumann_outflow: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TdbCur,
    Dlra,
    Do,
    Fom,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TdbCur => "tdb_cur",
            Method::Dlra => "dlra",
            Method::Do => "do",
            Method::Fom => "fom",
        }
    }
}

/// What the error column is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Closed form when the model has one, otherwise a dense solve at the same step.
    #[default]
    Auto,
    Exact,
    Fom,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default = "defaults::method")]
    pub kind: Method,
    #[serde(default = "defaults::scheme", with = "scheme_name")]
    pub scheme: SchemeKind,
    /// Model default when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default = "defaults::selector", with = "selector_name")]
    pub sampling: Selector,
    #[serde(default = "defaults::stages", with = "stages_name")]
    pub stages: StageEvaluation,
    #[serde(default)]
    pub reference: ReferenceKind,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            kind: defaults::method(),
            scheme: defaults::scheme(),
            dt: None,
            t_final: None,
            sampling: defaults::selector(),
            stages: defaults::stages(),
            reference: ReferenceKind::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default = "defaults::r0")]
    pub r0: usize,
    /// Defaults to 1 when adapting and to `r0` otherwise.
    #[serde(default)]
    pub r_min: Option<usize>,
    /// Defaults to `min(n, s)` when adapting and to `r0` otherwise.
    #[serde(default)]
    pub r_max: Option<usize>,
    #[serde(default)]
    pub eps_l: f64,
    #[serde(default = "defaults::eps_u")]
    pub eps_u: f64,
    /// Oversampled rows.
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub adapt: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self { r0: defaults::r0(), r_min: None, r_max: None, eps_l: 0.0, eps_u: defaults::eps_u(), m: 0, adapt: false }
    }
}

impl PolicyConfig {
    pub fn resolve(&self, n: usize, s: usize) -> RankPolicy {
        if self.adapt {
            RankPolicy::adaptive(
                self.r0,
                self.r_min.unwrap_or(1),
                self.r_max.unwrap_or(n.min(s)),
                self.eps_l,
                self.eps_u,
                self.m,
            )
        } else {
            let mut p = RankPolicy::fixed(self.r0, self.m);
            p.r_min = self.r_min.unwrap_or(self.r0);
            p.r_max = self.r_max.unwrap_or(self.r0);
            p
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "defaults::out_dir")]
    pub dir: PathBuf,
    /// Write a trajectory row every this many steps; the last step is always written.
    #[serde(default = "defaults::one")]
    pub record_every: usize,
    /// Binary checkpoint every this many steps; 0 disables.
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: defaults::out_dir(), record_every: 1, checkpoint_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub ranks: Vec<usize>,
    #[serde(default)]
    pub dts: Vec<f64>,
    /// Methods compared by the sweeps; the configured method when empty.
    #[serde(default)]
    pub methods: Vec<Method>,
    /// `n = s` values of the scaling study.
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default = "defaults::timed_steps")]
    pub timed_steps: usize,
    #[serde(default = "defaults::warmup_steps")]
    pub warmup_steps: usize,
    /// Dense methods are skipped when their working set would exceed this.
    #[serde(default = "defaults::dense_memory_mb")]
    pub dense_memory_mb: f64,
    /// Step of the dense reference in `sweep-dt` when no closed form exists.
    #[serde(default)]
    pub reference_dt: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ranks: Vec::new(),
            dts: Vec::new(),
            methods: Vec::new(),
            sizes: Vec::new(),
            timed_steps: defaults::timed_steps(),
            warmup_steps: defaults::warmup_steps(),
            dense_memory_mb: defaults::dense_memory_mb(),
            reference_dt: None,
        }
    }
}

mod defaults {
    use super::*;

    pub fn toy_n() -> usize {
        ToySpec::default().n
    }
    pub fn burgers_n() -> usize {
        BurgersSpec::default().n
    }
    pub fn burgers_s() -> usize {
        BurgersSpec::default().s
    }
    pub fn burgers_nu() -> f64 {
        BurgersSpec::default().nu
    }
    pub fn burgers_d() -> usize {
        BurgersSpec::default().d
    }
    pub fn burgers_noise_sigma() -> f64 {
        BurgersSpec::default().noise_sigma
    }
    pub fn burgers_noise_amplitude() -> f64 {
        BurgersSpec::default().noise_amplitude
    }
    pub fn burgers_length_scale() -> f64 {
        BurgersSpec::default().length_scale
    }
    pub fn burgers_tau_factor() -> f64 {
        BurgersSpec::default().tau_factor
    }
    pub fn adr_nx1() -> usize {
        AdrSpec::default().nx1
    }
    pub fn adr_nx2() -> usize {
        AdrSpec::default().nx2
    }
    pub fn adr_length() -> f64 {
        AdrSpec::default().length
    }
    pub fn adr_s() -> usize {
        AdrSpec::default().s
    }
    pub fn adr_xi_mean() -> f64 {
        AdrSpec::default().xi_mean
    }
    pub fn adr_xi_std() -> f64 {
        AdrSpec::default().xi_std
    }
    pub fn adr_xi_min() -> f64 {
        AdrSpec::default().xi_min
    }
    pub fn adr_u_max() -> f64 {
        AdrSpec::default().u_max
    }
    pub fn yes() -> bool {
        true
    }
    pub fn one() -> usize {
        1
    }
    pub fn method() -> Method {
        Method::TdbCur
    }
    pub fn scheme() -> SchemeKind {
        SchemeKind::Rk4Classic
    }
    pub fn selector() -> Selector {
        Selector::Deim
    }
    pub fn stages() -> StageEvaluation {
        StageEvaluation::Nested
    }
    pub fn r0() -> usize {
        6
    }
    pub fn eps_u() -> f64 {
        1e-8
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn timed_steps() -> usize {
        50
    }
    pub fn warmup_steps() -> usize {
        5
    }
    pub fn dense_memory_mb() -> f64 {
        2048.0
    }
}

macro_rules! named_enum {
    ($module:ident, $ty:ty, $($name:literal => $value:expr),+ $(,)?) => {
        mod $module {
            use super::*;
            pub fn serialize<S: serde::Serializer>(v: &$ty, ser: S) -> std::result::Result<S::Ok, S::Error> {
                $(if *v == $value { return ser.serialize_str($name); })+
                unreachable!()
            }
            pub fn deserialize<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<$ty, D::Error> {
                let s = String::deserialize(de)?;
                match s.as_str() {
                    $($name => Ok($value),)+
                    other => Err(serde::de::Error::unknown_variant(other, &[$($name),+])),
                }
            }
        }
    };
}

named_enum!(scheme_name, SchemeKind,
    "euler" => SchemeKind::Euler,
    "rk2_midpoint" => SchemeKind::Rk2Midpoint,
    "rk4_classic" => SchemeKind::Rk4Classic,
);
named_enum!(selector_name, Selector, "deim" => Selector::Deim, "qdeim" => Selector::Qdeim);
named_enum!(stages_name, StageEvaluation,
    "nested" => StageEvaluation::Nested,
    "surrogate" => StageEvaluation::Surrogate,
);

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Toy { .. } => "toy",
            ModelConfig::Burgers { .. } => "burgers",
            ModelConfig::Adr { .. } => "adr",
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match *self {
            ModelConfig::Toy { n, .. } => (n, n),
            ModelConfig::Burgers { n, s, .. } => (n, s),
            ModelConfig::Adr { nx1, nx2, s, .. } => (nx1 * nx2, s),
        }
    }

    pub fn default_dt(&self) -> f64 {
        match self {
            ModelConfig::Toy { .. } => 1e-3,
            ModelConfig::Burgers { .. } => BurgersSpec::DT,
            ModelConfig::Adr { .. } => AdrSpec::DT,
        }
    }

    pub fn default_t_final(&self) -> f64 {
        match self {
            ModelConfig::Toy { .. } => 1.0,
            ModelConfig::Burgers { .. } => BurgersSpec::T_FINAL,
            ModelConfig::Adr { .. } => AdrSpec::T_FINAL,
        }
    }

    pub fn toy_spec(&self, seed: u64) -> Option<ToySpec> {
        match *self {
            ModelConfig::Toy { n, rank_deficient } => Some(ToySpec { n, seed, rank_deficient }),
            _ => None,
        }
    }

    pub fn burgers_spec(&self, seed: u64) -> Option<BurgersSpec> {
        match *self {
            ModelConfig::Burgers { n, s, nu, d, noise_mean, noise_sigma, noise_amplitude, length_scale, tau_factor } => {
                Some(BurgersSpec { n, s, nu, d, noise_mean, noise_sigma, noise_amplitude, length_scale, tau_factor, seed })
            }
            _ => None,
        }
    }

    pub fn adr_spec(&self, seed: u64) -> Option<AdrSpec> {
        match *self {
            ModelConfig::Adr { nx1, nx2, length, s, xi_mean, xi_std, xi_min, u_max, reaction, neumann_outflow } => {
                Some(AdrSpec { nx1, nx2, length, s, xi_mean, xi_std, xi_min, u_max, reaction, neumann_outflow, seed })
            }
            _ => None,
        }
    }

    /// Burgers with `n = s = size`, the other parameters kept.
    pub fn resized(&self, size: usize) -> Self {
        match self.clone() {
            ModelConfig::Toy { rank_deficient, .. } => ModelConfig::Toy { n: size, rank_deficient },
            ModelConfig::Burgers { nu, d, noise_mean, noise_sigma, noise_amplitude, length_scale, tau_factor, .. } => {
                ModelConfig::Burgers {
                    n: size,
                    s: size,
                    nu,
                    d,
                    noise_mean,
                    noise_sigma,
                    noise_amplitude,
                    length_scale,
                    tau_factor,
                }
            }
            adr @ ModelConfig::Adr { .. } => adr,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn dt(&self) -> f64 {
        self.method.dt.unwrap_or_else(|| self.model.default_dt())
    }

    pub fn t_final(&self) -> f64 {
        self.method.t_final.unwrap_or_else(|| self.model.default_t_final())
    }

    pub fn policy(&self) -> RankPolicy {
        let (n, s) = self.model.shape();
        self.policy.resolve(n, s)
    }

    /// The sweep's method list, or the configured method alone.
    pub fn sweep_methods(&self) -> Vec<Method> {
        if self.sweep.methods.is_empty() {
            vec![self.method.kind]
        } else {
            self.sweep.methods.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let (n, s) = self.model.shape();
        if n < 2 || s < 1 {
            return bad(format!("model shape {n}x{s} is too small"));
        }
        let dt = self.dt();
        if !(dt > 0.0 && dt.is_finite()) {
            return bad(format!("method.dt must be positive, got {dt}"));
        }
        let t_final = self.t_final();
        if !(t_final > 0.0 && t_final.is_finite()) {
            return bad(format!("method.t_final must be positive, got {t_final}"));
        }
        if self.output.record_every == 0 {
            return bad("output.record_every must be at least 1".into());
        }
        if self.method.kind != Method::Fom {
            self.policy()
                .validate(n, s)
                .map_err(|e| HarnessError::Config(format!("policy: {e}")))?;
            if self.policy.m > n.saturating_sub(self.policy.r0) && self.method.kind == Method::TdbCur {
                return bad(format!("policy.m = {} leaves no room next to r0 = {} in n = {n}", self.policy.m, self.policy.r0));
            }
        }
        if self.sweep.dts.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return bad("sweep.dts must be positive".into());
        }
        if self.sweep.ranks.iter().any(|&r| r == 0 || r > n.min(s)) {
            return bad(format!("sweep.ranks must lie in 1..={}", n.min(s)));
        }
        if self.sweep.sizes.iter().any(|&k| k < 4) {
            return bad("sweep.sizes must be at least 4".into());
        }
        if self.sweep.reference_dt.is_some_and(|d| !(d > 0.0)) {
            return bad("sweep.reference_dt must be positive".into());
        }
        Ok(())
    }
}
