use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::ingest::StudyWindow;
use crate::measures::YearRange;
use crate::psm::{MatchMode, MatchOptions, MatchScale};
use crate::synth::CityConfig;
use crate::trends::DEFAULT_ALPHA;

pub const SCHEMA_VERSION: u32 = 1;

/// Input bundle file names, shared with the synthetic generator.
pub const BLOCKGROUPS_FILE: &str = "blockgroups.geojson";
pub const PERMITS_FILE: &str = "permits.csv";
pub const CRIMES_FILE: &str = "crimes.csv";
pub const ACS_FILE: &str = "acs.csv";
pub const LANDUSE_FILE: &str = "landuse.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub blockgroups: PathBuf,
    pub permits: PathBuf,
    pub crimes: PathBuf,
    pub acs: PathBuf,
    pub landuse: PathBuf,
}

impl Inputs {
    /// The bundle layout written by `synth` into `dir`.
    pub fn bundle(dir: &Path) -> Self {
        Self {
            blockgroups: dir.join(BLOCKGROUPS_FILE),
            permits: dir.join(PERMITS_FILE),
            crimes: dir.join(CRIMES_FILE),
            acs: dir.join(ACS_FILE),
            landuse: dir.join(LANDUSE_FILE),
        }
    }

    fn all(&self) -> [&PathBuf; 5] {
        [&self.blockgroups, &self.permits, &self.crimes, &self.acs, &self.landuse]
    }

    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.blockgroups, &mut self.permits, &mut self.crimes, &mut self.acs, &mut self.landuse] {
            *p = base.join(&*p);
        }
    }
}

/// Dates as `"YYYY-MM-DD"` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Windows {
    pub permits_start: NaiveDate,
    pub permits_end: NaiveDate,
    pub crimes_start: NaiveDate,
    pub crimes_end: NaiveDate,
}

impl Default for Windows {
    fn default() -> Self {
        let (p, c) = (StudyWindow::permits(), StudyWindow::crimes());
        Self { permits_start: p.start, permits_end: p.end, crimes_start: c.start, crimes_end: c.end }
    }
}

impl Windows {
    pub fn permits(&self) -> StudyWindow {
        StudyWindow::new(self.permits_start, self.permits_end)
    }

    pub fn crimes(&self) -> StudyWindow {
        StudyWindow::new(self.crimes_start, self.crimes_end)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaxonomyPaths {
    /// CSV `event_type,group`; the built-in list when absent.
    pub event_types: Option<PathBuf>,
    /// CSV `crime_type,category`; the built-in list when absent.
    pub crime_types: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Analysis {
    pub alpha: f64,
    /// Years of the per-unit series and trend fits.
    pub first_year: i32,
    pub last_year: i32,
    /// Regression models to run by name; empty runs all.
    pub models: Vec<String>,
    /// Experiments to run by name; empty runs all.
    pub experiments: Vec<String>,
    pub caliper: Option<f64>,
    pub match_scale: MatchScale,
    /// Fixed matching mode; chosen from group sizes when absent.
    pub match_mode: Option<MatchMode>,
}

impl Default for Analysis {
    fn default() -> Self {
        let y = YearRange::default();
        Self {
            alpha: DEFAULT_ALPHA,
            first_year: y.first,
            last_year: y.last,
            models: Vec::new(),
            experiments: Vec::new(),
            caliper: None,
            match_scale: MatchScale::default(),
            match_mode: None,
        }
    }
}

impl Analysis {
    pub fn years(&self) -> YearRange {
        YearRange { first: self.first_year, last: self.last_year }
    }

    pub fn match_options(&self) -> MatchOptions {
        MatchOptions { mode: self.match_mode, scale: self.match_scale, caliper_sd: self.caliper }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("vibrancy-out")
}

fn default_seed() -> u64 {
    CityConfig::default().seed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Real inputs; the synthetic bundle under `<out>/input` when absent.
    #[serde(default)]
    pub inputs: Option<Inputs>,
    #[serde(default)]
    pub windows: Windows,
    #[serde(default)]
    pub taxonomy: TaxonomyPaths,
    #[serde(default)]
    pub analysis: Analysis,
    /// Generator settings; its seed is replaced by the run seed.
    #[serde(default)]
    pub synth: CityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: default_seed(),
            out: default_out(),
            inputs: None,
            windows: Windows::default(),
            taxonomy: TaxonomyPaths::default(),
            analysis: Analysis::default(),
            synth: CityConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub caliper: Option<f64>,
}

impl RunConfig {
    /// Parses TOML; relative paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(PipelineError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.out = base.join(&cfg.out);
        if let Some(i) = cfg.inputs.as_mut() {
            i.resolve(base);
        }
        for p in [&mut cfg.taxonomy.event_types, &mut cfg.taxonomy.crime_types].into_iter().flatten() {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::io(path, source))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(alpha) = o.alpha {
            self.analysis.alpha = alpha;
        }
        if o.caliper.is_some() {
            self.analysis.caliper = o.caliper;
        }
    }

    pub fn is_synthetic(&self) -> bool {
        self.inputs.is_none()
    }

    pub fn input_dir(&self) -> PathBuf {
        self.out.join("input")
    }

    pub fn inputs(&self) -> Inputs {
        self.inputs.clone().unwrap_or_else(|| Inputs::bundle(&self.input_dir()))
    }

    pub fn synth_config(&self) -> CityConfig {
        CityConfig { seed: self.seed, ..self.synth.clone() }
    }

    /// Value checks plus, when `need_inputs`, existence of every input file.
    pub fn validate(&self, need_inputs: bool) -> Result<(), PipelineError> {
        let a = &self.analysis;
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(PipelineError::Config(format!("alpha must be in (0, 1), got {}", a.alpha)));
        }
        if let Some(c) = a.caliper {
            if !(c > 0.0 && c.is_finite()) {
                return Err(PipelineError::Config(format!("caliper must be positive, got {c}")));
            }
        }
        if a.first_year + 2 > a.last_year {
            return Err(PipelineError::Config("analysis years must span at least three years".into()));
        }
        let w = &self.windows;
        if w.permits_start > w.permits_end || w.crimes_start > w.crimes_end {
            return Err(PipelineError::Config("study window start is after its end".into()));
        }
        let mut paths: Vec<&PathBuf> = self.taxonomy.event_types.iter().chain(&self.taxonomy.crime_types).collect();
        let inputs = self.inputs();
        if need_inputs {
            paths.extend(inputs.all());
        }
        for p in paths {
            if !p.is_file() {
                return Err(PipelineError::MissingInput(p.clone()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_and_paths() {
        let cfg = RunConfig::from_toml("schema_version = 1\n", Path::new("/base")).unwrap();
        assert_eq!(cfg.out, Path::new("/base/vibrancy-out"));
        assert!(cfg.is_synthetic());
        assert_eq!(cfg.inputs().permits, Path::new("/base/vibrancy-out/input/permits.csv"));

        let text = r#"
            schema_version = 1
            out = "o"
            [inputs]
            blockgroups = "d/bg.geojson"
            permits = "d/p.csv"
            crimes = "/abs/c.csv"
            acs = "d/a.csv"
            landuse = "d/l.csv"
            [windows]
            crimes_end = "2014-12-31"
            [analysis]
            alpha = 0.1
            match_scale = "probability"
        "#;
        let cfg = RunConfig::from_toml(text, Path::new("/base")).unwrap();
        let i = cfg.inputs.as_ref().unwrap();
        assert_eq!(i.permits, Path::new("/base/d/p.csv"));
        assert_eq!(i.crimes, Path::new("/abs/c.csv"));
        assert_eq!(cfg.windows.crimes_end, NaiveDate::from_ymd_opt(2014, 12, 31).unwrap());
        assert_eq!(cfg.analysis.match_scale, MatchScale::Probability);
    }

    #[test]
    fn rejects_bad_schema_and_fields() {
        assert!(RunConfig::from_toml("schema_version = 2\n", Path::new(".")).is_err());
        assert!(RunConfig::from_toml("schema_version = 1\nbogus = 3\n", Path::new(".")).is_err());
        assert!(RunConfig::from_toml("seed = 3\n", Path::new(".")).is_err());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides { seed: Some(9), alpha: Some(0.01), caliper: Some(0.2), out: Some("x".into()) });
        assert_eq!((cfg.seed, cfg.analysis.alpha, cfg.analysis.caliper), (9, 0.01, Some(0.2)));
        assert_eq!(cfg.synth_config().seed, 9);
        assert!(RunConfig { analysis: Analysis { alpha: 1.5, ..Analysis::default() }, ..RunConfig::default() }.validate(false).is_err());
    }
}
