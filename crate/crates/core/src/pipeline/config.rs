//! Run configuration, read from a single TOML file.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::admissibility::PressureLaw;
use crate::error::{Error, Result};
use crate::oscillation::ImprovementOptions;
use crate::tolerances;
use crate::torus::{Field, GridSpec, SpatialGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub density: DensityConfig,
    pub pressure: PressureLaw,
    #[serde(default)]
    pub chi: ChiConfig,
    #[serde(default)]
    pub iteration: IterationConfig,
    #[serde(default)]
    pub improvement: ImprovementOptions,
    #[serde(default)]
    pub admissibility: AdmissibilityConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "N")]
    pub points: usize,
    pub dt: f64,
    /// Half-length `T` of the flat window `[−T, T]`; the evolution runs on `[0, 2T]`.
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// `ρ₀(x) = mean + Σ cos·cos(2πk·x) + sin·sin(2πk·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub mean: f64,
    #[serde(default)]
    pub modes: Vec<DensityMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityMode {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChiConfig {
    pub margin: f64,
    pub floor: f64,
}

impl Default for ChiConfig {
    fn default() -> Self {
        ChiConfig {
            margin: 1.5,
            floor: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterationConfig {
    pub steps: usize,
    /// Improvement steps aimed at the `t = 0` slice before time reflection.
    pub flat_steps: u32,
    /// Steps after which the state is dumped (the final state always is).
    pub dump_steps: Vec<usize>,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            steps: 12,
            flat_steps: 0,
            dump_steps: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibilityConfig {
    /// Number of nonnegative energy tests.
    pub tests: usize,
    /// Time samples of the saturated family.
    pub time_samples: usize,
    /// Step of the RK4 cross-check of the chi profile.
    pub rk4_step: f64,
}

impl Default for AdmissibilityConfig {
    fn default() -> Self {
        AdmissibilityConfig {
            tests: 32,
            time_samples: 81,
            rk4_step: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub divergence: f64,
    pub weak_momentum: f64,
    pub energy: f64,
    pub chi_cross: f64,
    pub replay: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            divergence: tolerances::DIVERGENCE,
            weak_momentum: tolerances::WEAK_MOMENTUM,
            energy: tolerances::ENERGY,
            chi_cross: tolerances::CHI_CROSS,
            replay: tolerances::REPLAY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Record wall-clock timings; off keeps every artifact byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("convint-out"),
            record_wall_time: false,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite (got {v})")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(1..=3).contains(&g.n) {
            return Err(Error::config("grid.n", "must be 1, 2 or 3"));
        }
        SpatialGrid::new(g.n, g.points).map_err(|e| Error::config("grid.N", e.to_string()))?;
        positive("grid.T", g.horizon)?;
        if !(g.dt > 0.0 && g.dt <= g.horizon) {
            return Err(Error::config("grid.dt", "must lie in (0, T]"));
        }
        let spec = GridSpec::new(g.n, g.points, g.dt, g.horizon).map_err(|e| Error::config("grid", e.to_string()))?;
        if spec.time_samples(-g.horizon, g.horizon).len() % 2 == 0 {
            return Err(Error::config("grid.dt", "2T/dt must be an even number of steps"));
        }

        positive("density.mean", self.density.mean)?;
        for (i, mode) in self.density.modes.iter().enumerate() {
            if mode.k.len() != g.n {
                return Err(Error::config(
                    format!("density.modes[{i}].k"),
                    format!("needs {} entries", g.n),
                ));
            }
            if !(mode.cos.is_finite() && mode.sin.is_finite()) {
                return Err(Error::config(format!("density.modes[{i}]"), "coefficients must be finite"));
            }
        }
        let min = self.density_field()?.component(0).iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::config("density", format!("must be positive on the grid (min {min})")));
        }

        self.pressure.validate()?;
        if !(self.chi.margin > 1.0 && self.chi.margin.is_finite()) {
            return Err(Error::config("chi.margin", "must be > 1"));
        }
        positive("chi.floor", self.chi.floor)?;

        self.improvement.validate()?;
        let cap = ImprovementOptions::frequency_cap(g.points);
        if self.improvement.k_min > cap {
            return Err(Error::config(
                "improvement.k_min",
                format!("exceeds the frequency cap {cap} of N = {}", g.points),
            ));
        }

        let a = &self.admissibility;
        if a.tests == 0 {
            return Err(Error::config("admissibility.tests", "must be positive"));
        }
        if a.time_samples < 3 {
            return Err(Error::config("admissibility.time_samples", "must be at least 3"));
        }
        positive("admissibility.rk4_step", a.rk4_step)?;

        let t = &self.tolerances;
        positive("tolerances.divergence", t.divergence)?;
        positive("tolerances.weak_momentum", t.weak_momentum)?;
        positive("tolerances.energy", t.energy)?;
        positive("tolerances.chi_cross", t.chi_cross)?;
        positive("tolerances.replay", t.replay)?;
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = &self.grid;
        GridSpec::new(g.n, g.points, g.dt, g.horizon)
    }

    pub fn density_field(&self) -> Result<Field> {
        let grid = SpatialGrid::new(self.grid.n, self.grid.points)?;
        Ok(Field::scalar_from_fn(grid, |x| {
            self.density.modes.iter().fold(self.density.mean, |acc, mode| {
                let arg = 2.0 * PI * mode.k.iter().enumerate().map(|(a, &k)| k as f64 * x[a]).sum::<f64>();
                acc + mode.cos * arg.cos() + mode.sin * arg.sin()
            })
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
[grid]
n = 2
N = 16
dt = 0.0625
T = 0.25
[density]
mean = 1.0
[pressure]
type = "polytropic"
k = 1.0
gamma = 2.0
[improvement]
k_min = 8
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.iteration.steps, 12);
        assert_eq!(cfg.chi, ChiConfig::default());
        let round = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = MINIMAL.replace("seed = 3", "");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("dt = 0.0625", "dt = -1.0", "grid.dt"),
            ("dt = 0.0625", "dt = 0.1", "grid.dt"),
            ("mean = 1.0", "mean = 1.0\nmodes = [{ k = [1], cos = 0.1 }]", "density.modes[0].k"),
            ("mean = 1.0", "mean = 0.1\nmodes = [{ k = [1, 0], cos = 0.5 }]", "density"),
            ("gamma = 2.0", "gamma = 0.5", "pressure.gamma"),
        ];
        for (from, to, field) in cases {
            let err = RunConfig::from_toml_str(&MINIMAL.replace(from, to)).unwrap_err();
            match err {
                Error::Config { field: f, .. } => assert_eq!(f, field),
                other => panic!("{other}"),
            }
        }
        let text = MINIMAL.replace("k_min = 8", "k_min = 64");
        assert!(matches!(
            RunConfig::from_toml_str(&text),
            Err(Error::Config { field, .. }) if field == "improvement.k_min"
        ));
        let text = format!("{MINIMAL}\n[chi]\nmargni = 2.0\n");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("margni"), "{err}");
    }

    #[test]
    fn density_from_modes() {
        let text = MINIMAL.replace(
            "mean = 1.0",
            "mean = 2.0\nmodes = [{ k = [1, 1], sin = 0.25 }, { k = [1, -1], sin = 0.25 }]",
        );
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        let rho = cfg.density_field().unwrap();
        let g = rho.grid();
        for p in 0..g.len() {
            let x = g.point(p);
            let expected = 2.0 + 0.5 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos();
            assert!((rho.scalar(p) - expected).abs() < 1e-14);
        }
    }
}
