//! TOML experiment description and its resolution into model, control and
//! optimizer settings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grape::{random_diagonal_target, GuessSpec, OptimizationConfig, OptimizerKind, RampSpec};
use crate::linalg::{unitarity_defect, CMatrix, C64};
use crate::matrix_io;
use crate::model::{FrequencyConvention, ModelSpec, QuditSpec, TlsSpec};
use crate::presets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuditSection {
    #[serde(default = "default_levels")]
    pub levels: usize,
    pub anharmonicity_mhz: f64,
    #[serde(default = "infinite")]
    pub t1_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_star_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsSection {
    /// Positive values place the TLS below the qudit.
    pub detuning_mhz: f64,
    pub coupling_mhz: f64,
    #[serde(default = "infinite")]
    pub t1_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_star_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub gate_time_ns: f64,
    pub slices_per_ns: f64,
    /// Zero disables the boundary ramps.
    pub ramp_time_ns: f64,
    /// Largest control change accumulated over one ramp.
    pub ramp_cap_mhz: f64,
    pub ramp_endpoints_zero: bool,
    pub amplitude_bound_mhz: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            gate_time_ns: presets::GATE_TIME_NS,
            slices_per_ns: presets::SLICES_PER_NS,
            ramp_time_ns: 2.5,
            ramp_cap_mhz: 500.0,
            ramp_endpoints_zero: true,
            amplitude_bound_mhz: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizationSection {
    /// `u1`, `identity`, `random:<seed>`, `phases:<φ0>,<φ1>,…` (radians) or
    /// `file:<path>`.
    pub target: String,
    pub allow_non_diagonal: bool,
    pub max_iterations: usize,
    pub starts: usize,
    pub convergence_tol: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for OptimizationSection {
    fn default() -> Self {
        OptimizationSection {
            target: "u1".into(),
            allow_non_diagonal: false,
            max_iterations: 300,
            starts: 5,
            convergence_tol: 1e-9,
            optimizer: OptimizerKind::Lbfgs,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomTargetsSection {
    pub count: usize,
    pub seed: u64,
}

impl Default for RandomTargetsSection {
    fn default() -> Self {
        RandomTargetsSection { count: 20, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonmarkovSection {
    pub samples: usize,
}

impl Default for NonmarkovSection {
    fn default() -> Self {
        NonmarkovSection {
            samples: crate::nonmarkov::DEFAULT_SAMPLES,
        }
    }
}

/// Contents of an experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub frequency_convention: FrequencyConvention,
    pub qudit: QuditSection,
    #[serde(default)]
    pub tls: Vec<TlsSection>,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub optimization: OptimizationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub random_targets: RandomTargetsSection,
    #[serde(default)]
    pub nonmarkov: NonmarkovSection,
}

fn default_levels() -> usize {
    4
}

fn infinite() -> f64 {
    f64::INFINITY
}

/// Everything needed to run one optimization.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: ModelSpec,
    pub ramp: Option<RampSpec>,
    pub optimization: OptimizationConfig,
}

impl Experiment {
    pub fn total_time(&self) -> f64 {
        self.optimization.total_time
    }

    pub fn n_slices(&self) -> usize {
        self.optimization.n_slices
    }
}

impl FileConfig {
    /// Single TLS at 550 MHz with S = 60 MHz, T1 = 1 µs; qudit β = 40 MHz,
    /// T1 = 5 µs; 40 ns gate toward `diag(1, −1, 1, 1)`.
    pub fn single_tls() -> Self {
        FileConfig {
            frequency_convention: FrequencyConvention::Ordinary,
            qudit: QuditSection {
                levels: 4,
                anharmonicity_mhz: 40.0,
                t1_ns: 5000.0,
                t2_star_ns: None,
            },
            tls: vec![TlsSection {
                detuning_mhz: 550.0,
                coupling_mhz: 60.0,
                t1_ns: 1000.0,
                t2_star_ns: None,
            }],
            control: ControlSection::default(),
            optimization: OptimizationSection::default(),
            sweep: None,
            random_targets: RandomTargetsSection::default(),
            nonmarkov: NonmarkovSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// SHA-256 of the canonical TOML form, independent of formatting and
    /// comments in the source file.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    fn mhz(&self, f: f64) -> f64 {
        self.frequency_convention.mhz_to_rad_per_ns(f)
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let q = &self.qudit;
        if q.levels < 2 {
            return Err(Error::config("qudit.levels", "must be at least 2"));
        }
        finite("qudit.anharmonicity_mhz", q.anharmonicity_mhz)?;
        time("qudit.t1_ns", q.t1_ns)?;
        if let Some(t) = q.t2_star_ns {
            time("qudit.t2_star_ns", t)?;
        }
        if self.tls.len() > 8 {
            return Err(Error::config("tls", "at most 8 entries are supported"));
        }
        let mut tls = Vec::new();
        for (i, t) in self.tls.iter().enumerate() {
            let field = |f: &str| format!("tls[{}].{f}", i + 1);
            finite(&field("detuning_mhz"), t.detuning_mhz)?;
            finite(&field("coupling_mhz"), t.coupling_mhz)?;
            if t.coupling_mhz < 0.0 {
                return Err(Error::config(field("coupling_mhz"), "must be non-negative"));
            }
            time(&field("t1_ns"), t.t1_ns)?;
            if let Some(t2) = t.t2_star_ns {
                time(&field("t2_star_ns"), t2)?;
            }
            tls.push(TlsSpec {
                detuning: self.mhz(t.detuning_mhz),
                coupling: self.mhz(t.coupling_mhz),
                t1: t.t1_ns,
                t2_star: t.t2_star_ns,
            });
        }
        let model = ModelSpec {
            qudit: QuditSpec {
                n_levels: q.levels,
                base_frequency: 0.0,
                anharmonicity: self.mhz(q.anharmonicity_mhz),
                t1: q.t1_ns,
                t2_star: q.t2_star_ns,
            },
            tls,
            frequency_convention: self.frequency_convention,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn target(&self) -> Result<CMatrix> {
        let n = self.qudit.levels;
        let text = self.optimization.target.trim();
        let field = "optimization.target";
        let target = if text == "u1" {
            presets::u1_target(n)
        } else if text == "identity" {
            CMatrix::identity(n, n)
        } else if let Some(seed) = text.strip_prefix("random:") {
            let seed = seed
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::config(field, format!("bad seed in `{text}`")))?;
            random_diagonal_target(seed, n)
        } else if let Some(list) = text.strip_prefix("phases:") {
            let phases = list
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| Error::config(field, format!("bad phase list in `{text}`")))?;
            if phases.len() != n {
                return Err(Error::config(field, format!("expected {n} phases, got {}", phases.len())));
            }
            let mut u = CMatrix::zeros(n, n);
            for (k, p) in phases.iter().enumerate() {
                u[(k, k)] = C64::from_polar(1.0, *p);
            }
            u
        } else if let Some(path) = text.strip_prefix("file:") {
            matrix_io::read_matrix(Path::new(path.trim()))?
        } else {
            return Err(Error::config(
                field,
                format!("unknown target `{text}`; use u1, identity, random:<seed>, phases:<list> or file:<path>"),
            ));
        };
        if target.nrows() != n || target.ncols() != n {
            return Err(Error::config(field, format!("target must be {n}×{n}")));
        }
        let defect = unitarity_defect(&target);
        if defect > 1e-10 {
            return Err(Error::NonUnitaryTarget(defect));
        }
        Ok(target)
    }

    pub fn ramp(&self) -> Result<Option<RampSpec>> {
        let c = &self.control;
        if !(c.ramp_time_ns >= 0.0 && c.ramp_time_ns.is_finite()) {
            return Err(Error::config("control.ramp_time_ns", "must be finite and non-negative"));
        }
        if c.ramp_time_ns == 0.0 {
            return Ok(None);
        }
        if !(c.ramp_cap_mhz >= 0.0) {
            return Err(Error::config("control.ramp_cap_mhz", "must be non-negative"));
        }
        if 2.0 * c.ramp_time_ns >= c.gate_time_ns {
            return Err(Error::config(
                "control.ramp_time_ns",
                "both ramps together must be shorter than the gate",
            ));
        }
        Ok(Some(RampSpec {
            ramp_time: c.ramp_time_ns,
            ramp_rate_cap: self.mhz(c.ramp_cap_mhz) / c.ramp_time_ns,
            endpoints_zero: c.ramp_endpoints_zero,
        }))
    }

    pub fn n_slices(&self) -> Result<usize> {
        let c = &self.control;
        if !(c.gate_time_ns > 0.0 && c.gate_time_ns.is_finite()) {
            return Err(Error::config("control.gate_time_ns", "must be positive"));
        }
        if !(c.slices_per_ns > 0.0 && c.slices_per_ns.is_finite()) {
            return Err(Error::config("control.slices_per_ns", "must be positive"));
        }
        let n = (c.gate_time_ns * c.slices_per_ns).round() as usize;
        if n == 0 {
            return Err(Error::config("control.slices_per_ns", "gate has no slices"));
        }
        Ok(n)
    }

    /// Resolves and validates every section needed for an optimization.
    pub fn experiment(&self) -> Result<Experiment> {
        let model = self.model()?;
        let target = self.target()?;
        let n_slices = self.n_slices()?;
        let ramp = self.ramp()?;
        let o = &self.optimization;
        if o.starts == 0 {
            return Err(Error::config("optimization.starts", "must be at least 1"));
        }
        if !(o.convergence_tol >= 0.0) {
            return Err(Error::config("optimization.convergence_tol", "must be non-negative"));
        }
        let bound = self.control.amplitude_bound_mhz;
        if !(bound > 0.0) {
            return Err(Error::config("control.amplitude_bound_mhz", "must be positive"));
        }
        let mut opt = OptimizationConfig::new(
            target,
            self.control.gate_time_ns,
            n_slices,
            GuessSpec::for_model(&model),
        );
        opt.max_iterations = o.max_iterations;
        opt.convergence_tol = o.convergence_tol;
        opt.amplitude_bound = self.mhz(bound);
        opt.seed = o.seed;
        opt.optimizer = o.optimizer;
        opt.n_starts = o.starts;
        opt.allow_non_diagonal = o.allow_non_diagonal;
        opt.validate(model.n_levels())?;
        Ok(Experiment {
            model,
            ramp,
            optimization: opt,
        })
    }

    /// Assigns a numeric value to a dotted parameter name such as
    /// `qudit.t1_ns` or `tls2.coupling_mhz`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let bad = || Error::config(format!("sweep.axes.{name}"), "unknown parameter");
        let (section, key) = name.split_once('.').ok_or_else(bad)?;
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::config(name, format!("expected a whole number, got {value}")))
            }
        };
        match section {
            "qudit" => match key {
                "levels" => self.qudit.levels = count(value)?,
                "anharmonicity_mhz" => self.qudit.anharmonicity_mhz = value,
                "t1_ns" => self.qudit.t1_ns = value,
                "t2_star_ns" => self.qudit.t2_star_ns = Some(value),
                _ => return Err(bad()),
            },
            "control" => match key {
                "gate_time_ns" => self.control.gate_time_ns = value,
                "slices_per_ns" => self.control.slices_per_ns = value,
                "ramp_time_ns" => self.control.ramp_time_ns = value,
                "ramp_cap_mhz" => self.control.ramp_cap_mhz = value,
                "amplitude_bound_mhz" => self.control.amplitude_bound_mhz = value,
                _ => return Err(bad()),
            },
            "optimization" => match key {
                "max_iterations" => self.optimization.max_iterations = count(value)?,
                "starts" => self.optimization.starts = count(value)?,
                _ => return Err(bad()),
            },
            s if s.starts_with("tls") => {
                let idx: usize = s[3..].parse().map_err(|_| bad())?;
                if idx == 0 || idx > self.tls.len() {
                    return Err(Error::config(
                        name,
                        format!("config defines {} TLS", self.tls.len()),
                    ));
                }
                let t = &mut self.tls[idx - 1];
                match key {
                    "detuning_mhz" => t.detuning_mhz = value,
                    "coupling_mhz" => t.coupling_mhz = value,
                    "t1_ns" => t.t1_ns = value,
                    "t2_star_ns" => t.t2_star_ns = Some(value),
                    _ => return Err(bad()),
                }
            }
            _ => return Err(bad()),
        }
        Ok(())
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {v}")))
    }
}

fn time(field: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive or inf, got {v}")))
    }
}
