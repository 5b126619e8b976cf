//! Synthetic cities with known ground truth.
//!
//! Block groups are cells of a square lon/lat grid. Per-unit covariates are
//! drawn first, then a treatment indicator, trend slopes and yearly counts.
//! All draws come from ChaCha8 seeded with the config seed: stream 0 for the
//! simulation, stream 1 for placing events in space and time when a bundle
//! is written. Counts alone are enough for in-memory experiments.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Dirichlet, Distribution, Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BlockGroup, NeighborhoodProfile};
use crate::measures::{CrimeCategory, CrimeTaxonomy, EventGroup, EventTaxonomy, MeasureRow, MeasureTable, YearRange};
use crate::table::Table;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Covariate names usable in the linear predictors. `income` and
/// `population` are standardized logs; the rest are proportions.
pub const FEATURES: [&str; 12] = [
    "income",
    "population",
    "poverty",
    "black",
    "hispanic",
    "commercial",
    "residential",
    "vacant",
    "transportation",
    "industrial",
    "park",
    "civic",
];

/// Column in [`City::to_table`] holding the true treatment indicator.
pub const TREATMENT_COLUMN: &str = "true_treatment";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalSpec {
    pub median: f64,
    pub sigma: f64,
}

/// `intercept + Σ coefficients[f] · feature_f`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub intercept: f64,
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
}

impl LinearModel {
    fn new(intercept: f64, coefs: &[(&str, f64)]) -> Self {
        Self { intercept, coefficients: coefs.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
    }

    fn eval(&self, features: &BTreeMap<&'static str, f64>) -> f64 {
        self.intercept + self.coefficients.iter().map(|(k, b)| b * features[k.as_str()]).sum::<f64>()
    }

    fn validate(&self, what: &str) -> Result<(), SynthError> {
        if let Some(k) = self.coefficients.keys().find(|k| !FEATURES.contains(&k.as_str())) {
            return Err(SynthError::InvalidConfig(format!("{what}: unknown feature `{k}`; allowed: {}", FEATURES.join(", "))));
        }
        if !self.intercept.is_finite() || self.coefficients.values().any(|v| !v.is_finite()) {
            return Err(SynthError::InvalidConfig(format!("{what}: coefficients must be finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Noise {
    Poisson,
    /// Per-unit gamma multiplier with mean 1 and variance 1/θ, so totals
    /// are NB2.
    NegBin { theta: f64 },
}

/// Each unit independently gets a slope of `+slope` or `-slope` with
/// probability `fraction / 2` each, else zero. Slopes are per year on the
/// log (events, crimes) or logit (spontaneity) scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendSpec {
    pub fraction: f64,
    pub crime_slope: f64,
    pub event_slope: f64,
    pub spontaneity_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CityConfig {
    pub seed: u64,
    pub n_blockgroups: usize,
    /// Defaults to ⌈√n⌉.
    pub grid_columns: Option<usize>,
    pub cell_degrees: f64,
    /// South-west corner, (lon, lat).
    pub origin: [f64; 2],
    pub first_year: i32,
    pub last_year: i32,
    pub income: LogNormalSpec,
    pub population: LogNormalSpec,
    /// white, black, asian, hispanic, other.
    pub race_alpha: [f64; 5],
    /// commercial, residential, vacant, transportation, industrial, park,
    /// civic, other.
    pub landuse_alpha: [f64; 8],
    /// Logit of the treatment probability.
    pub treatment: LinearModel,
    /// Log of the yearly event intensity.
    pub events: LinearModel,
    pub event_treatment_effect: f64,
    /// Logit of the spontaneous share of events.
    pub spontaneity: LinearModel,
    /// Log of the yearly crime mean.
    pub crime: LinearModel,
    /// Treatment effect on log crime.
    pub tau: f64,
    pub noise: Noise,
    pub trends: TrendSpec,
    /// Relative weights of public_holiday, religious, community, personal.
    pub event_group_shares: [f64; 4],
    /// Relative weights of violent, nonviolent, vice, other.
    pub crime_mix: [f64; 4],
    /// Intensity multiplier for May through September.
    pub warm_month_multiplier: f64,
}

impl Default for CityConfig {
    fn default() -> Self {
        Self {
            seed: 20160601,
            n_blockgroups: 400,
            grid_columns: None,
            cell_degrees: 0.005,
            origin: [-75.28, 39.87],
            first_year: 2006,
            last_year: 2015,
            income: LogNormalSpec { median: 45_000.0, sigma: 0.5 },
            population: LogNormalSpec { median: 1_200.0, sigma: 0.35 },
            race_alpha: [4.0, 3.0, 0.6, 1.0, 0.4],
            landuse_alpha: [1.0, 5.0, 0.8, 1.2, 0.5, 0.6, 0.6, 0.3],
            treatment: LinearModel::new(-1.6, &[("income", 1.0)]),
            events: LinearModel::new(3f64.ln(), &[("income", 0.3), ("population", 0.2), ("residential", 1.0)]),
            event_treatment_effect: 0.3,
            spontaneity: LinearModel::new(2.44, &[("income", -0.2)]),
            crime: LinearModel::new(
                10f64.ln(),
                &[("income", -0.6), ("population", 0.3), ("black", 0.3), ("commercial", 1.0), ("vacant", 1.0)],
            ),
            tau: 0.2,
            noise: Noise::NegBin { theta: 20.0 },
            trends: TrendSpec { fraction: 0.2, crime_slope: 0.15, event_slope: 0.15, spontaneity_slope: 0.3 },
            event_group_shares: [7.3, 0.2, 92.1, 0.4],
            crime_mix: [0.2, 0.5, 0.1, 0.2],
            warm_month_multiplier: 2.5,
        }
    }
}

impl CityConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n_blockgroups == 0 {
            return bad("n_blockgroups must be positive");
        }
        if self.grid_columns == Some(0) {
            return bad("grid_columns must be positive");
        }
        if !(self.cell_degrees > 0.0 && self.cell_degrees.is_finite()) {
            return bad("cell_degrees must be positive");
        }
        if self.first_year > self.last_year || self.first_year < 1900 || self.last_year > 2100 {
            return bad("first_year..last_year must be a valid year range");
        }
        for s in [&self.income, &self.population] {
            if !(s.median > 0.0 && s.sigma > 0.0) {
                return bad("log-normal median and sigma must be positive");
            }
        }
        if self.race_alpha.iter().chain(&self.landuse_alpha).any(|&a| !(a > 0.0)) {
            return bad("Dirichlet concentrations must be positive");
        }
        self.treatment.validate("treatment")?;
        self.events.validate("events")?;
        self.spontaneity.validate("spontaneity")?;
        self.crime.validate("crime")?;
        if let Noise::NegBin { theta } = self.noise {
            if !(theta > 0.0 && theta.is_finite()) {
                return bad("noise theta must be positive");
            }
        }
        if !(0.0..=1.0).contains(&self.trends.fraction) {
            return bad("trends.fraction must be in [0, 1]");
        }
        for w in [&self.event_group_shares[..2], &self.event_group_shares[2..], &self.crime_mix[..]] {
            if w.iter().any(|&v| !(v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return bad("share weights must be non-negative with a positive sum per category");
            }
        }
        if !(self.warm_month_multiplier > 0.0) {
            return bad("warm_month_multiplier must be positive");
        }
        Ok(())
    }

    pub fn years(&self) -> YearRange {
        YearRange { first: self.first_year, last: self.last_year }
    }

    fn columns(&self) -> usize {
        self.grid_columns.unwrap_or_else(|| (self.n_blockgroups as f64).sqrt().ceil() as usize)
    }

    fn year_center(&self) -> f64 {
        (self.first_year + self.last_year) as f64 / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthUnit {
    pub profile: NeighborhoodProfile,
    /// (row, column) in the grid.
    pub cell: (usize, usize),
    pub treatment_probability: f64,
    pub treated: bool,
    pub crime_slope: f64,
    pub event_slope: f64,
    pub spontaneity_slope: f64,
    pub multiplier: f64,
    pub expected_events: Vec<f64>,
    pub expected_crimes: Vec<f64>,
    /// Per year: (regular, spontaneous).
    #[serde(skip)]
    pub events: Vec<(u64, u64)>,
    /// Per year: counts in [`CrimeCategory::ALL`] order.
    #[serde(skip)]
    pub crimes: Vec<[u64; 4]>,
}

impl SynthUnit {
    pub fn total_events(&self) -> u64 {
        self.events.iter().map(|(r, s)| r + s).sum()
    }

    pub fn total_crimes(&self) -> u64 {
        self.crimes.iter().flatten().sum()
    }
}

/// Everything needed to check estimators against the generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub config: CityConfig,
    pub units: Vec<UnitTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitTruth {
    pub blockgroup_id: String,
    pub treated: bool,
    pub treatment_probability: f64,
    pub crime_slope: f64,
    pub event_slope: f64,
    pub spontaneity_slope: f64,
    pub multiplier: f64,
    pub expected_events: f64,
    pub expected_crimes: f64,
}

#[derive(Debug, Clone)]
pub struct City {
    pub config: CityConfig,
    pub units: Vec<SynthUnit>,
}

pub fn blockgroup_id(k: usize) -> String {
    format!("bg{:05}", k + 1)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn trend_slope(rng: &mut ChaCha8Rng, fraction: f64, slope: f64) -> f64 {
    let u: f64 = rng.random();
    if u < fraction / 2.0 {
        slope
    } else if u < fraction {
        -slope
    } else {
        0.0
    }
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("finite positive rate").sample(rng) as u64
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    Binomial::new(n, p.clamp(0.0, 1.0)).expect("probability in [0, 1]").sample(rng)
}

/// Simulates covariates, treatment and yearly counts for every unit.
pub fn simulate(config: &CityConfig) -> Result<City, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let race = Dirichlet::new(config.race_alpha).expect("validated alpha");
    let landuse = Dirichlet::new(config.landuse_alpha).expect("validated alpha");
    let gamma = match config.noise {
        Noise::NegBin { theta } => Some(Gamma::new(theta, 1.0 / theta).expect("validated theta")),
        Noise::Poisson => None,
    };
    let cols = config.columns();
    let center = config.year_center();
    let years: Vec<i32> = config.years().years().collect();

    let mut units = Vec::with_capacity(config.n_blockgroups);
    for k in 0..config.n_blockgroups {
        let z_income: f64 = std_normal.sample(&mut rng);
        let z_pop: f64 = std_normal.sample(&mut rng);
        let poverty = logistic(0.8 * z_income + 0.5 * std_normal.sample(&mut rng));
        let r = race.sample(&mut rng);
        let lu = landuse.sample(&mut rng);
        let cell = (k / cols, k % cols);
        let profile = NeighborhoodProfile {
            blockgroup_id: blockgroup_id(k),
            population: (config.population.median * (config.population.sigma * z_pop).exp()).round(),
            prop_white: r[0],
            prop_black: r[1],
            prop_asian: r[2],
            prop_hispanic: r[3],
            prop_other: r[4],
            mean_income: config.income.median * (config.income.sigma * z_income).exp(),
            poverty_index: poverty,
            total_area: 0.8 * square_area(config, cell.0, cell.1),
            prop_commercial: lu[0],
            prop_residential: lu[1],
            prop_vacant: lu[2],
            prop_transportation: lu[3],
            prop_industrial: lu[4],
            prop_park: lu[5],
            prop_civic: lu[6],
        };
        let features: BTreeMap<&'static str, f64> = [
            ("income", z_income),
            ("population", z_pop),
            ("poverty", poverty),
            ("black", r[1]),
            ("hispanic", r[3]),
            ("commercial", lu[0]),
            ("residential", lu[1]),
            ("vacant", lu[2]),
            ("transportation", lu[3]),
            ("industrial", lu[4]),
            ("park", lu[5]),
            ("civic", lu[6]),
        ]
        .into_iter()
        .collect();

        let treatment_probability = logistic(config.treatment.eval(&features));
        let treated = rng.random::<f64>() < treatment_probability;
        let t = if treated { 1.0 } else { 0.0 };
        let tr = &config.trends;
        let crime_slope = trend_slope(&mut rng, tr.fraction, tr.crime_slope);
        let event_slope = trend_slope(&mut rng, tr.fraction, tr.event_slope);
        let spontaneity_slope = trend_slope(&mut rng, tr.fraction, tr.spontaneity_slope);
        let multiplier = gamma.map_or(1.0, |g| g.sample(&mut rng));

        let event_eta = config.events.eval(&features) + config.event_treatment_effect * t;
        let spont_eta = config.spontaneity.eval(&features);
        let crime_eta = config.crime.eval(&features) + config.tau * t;
        let mix_total: f64 = config.crime_mix.iter().sum();

        let mut expected_events = Vec::with_capacity(years.len());
        let mut expected_crimes = Vec::with_capacity(years.len());
        let mut events = Vec::with_capacity(years.len());
        let mut crimes = Vec::with_capacity(years.len());
        for &y in &years {
            let dt = y as f64 - center;
            let lambda = (event_eta + event_slope * dt).exp();
            let n = poisson(&mut rng, lambda);
            let s = binomial(&mut rng, n, logistic(spont_eta + spontaneity_slope * dt));
            events.push((n - s, s));
            expected_events.push(lambda);

            let mu = (crime_eta + crime_slope * dt).exp() * multiplier;
            let total = poisson(&mut rng, mu);
            let mut by_cat = [0u64; 4];
            let (mut left, mut mass) = (total, mix_total);
            for (c, w) in config.crime_mix.iter().enumerate() {
                let draw = if c == 3 || mass <= 0.0 { left } else { binomial(&mut rng, left, w / mass) };
                by_cat[c] = draw;
                left -= draw;
                mass -= w;
            }
            crimes.push(by_cat);
            expected_crimes.push(mu);
        }
        units.push(SynthUnit {
            profile,
            cell,
            treatment_probability,
            treated,
            crime_slope,
            event_slope,
            spontaneity_slope,
            multiplier,
            expected_events,
            expected_crimes,
            events,
            crimes,
        });
    }
    Ok(City { config: config.clone(), units })
}

/// Independent cities for each seed, simulated in parallel.
pub fn simulate_seeds(config: &CityConfig, seeds: &[u64]) -> Result<Vec<City>, SynthError> {
    seeds
        .par_iter()
        .map(|&seed| simulate(&CityConfig { seed, ..config.clone() }))
        .collect()
}

fn cell_ring(config: &CityConfig, row: usize, col: usize) -> Vec<(f64, f64)> {
    let s = config.cell_degrees;
    let (x0, y0) = (config.origin[0] + col as f64 * s, config.origin[1] + row as f64 * s);
    let (x1, y1) = (config.origin[0] + (col + 1) as f64 * s, config.origin[1] + (row + 1) as f64 * s);
    vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
}

fn square_area(config: &CityConfig, row: usize, col: usize) -> f64 {
    crate::ingest::geometry::equirectangular_area(&[cell_ring(config, row, col)])
}

impl City {
    pub fn ids(&self) -> Vec<String> {
        self.units.iter().map(|u| u.profile.blockgroup_id.clone()).collect()
    }

    pub fn blockgroups(&self) -> Vec<BlockGroup> {
        self.units
            .iter()
            .map(|u| BlockGroup::new(u.profile.blockgroup_id.clone(), vec![cell_ring(&self.config, u.cell.0, u.cell.1)], None))
            .collect()
    }

    pub fn profiles(&self) -> Vec<NeighborhoodProfile> {
        self.units.iter().map(|u| u.profile.clone()).collect()
    }

    pub fn truth(&self) -> GroundTruth {
        GroundTruth {
            config: self.config.clone(),
            units: self
                .units
                .iter()
                .map(|u| UnitTruth {
                    blockgroup_id: u.profile.blockgroup_id.clone(),
                    treated: u.treated,
                    treatment_probability: u.treatment_probability,
                    crime_slope: u.crime_slope,
                    event_slope: u.event_slope,
                    spontaneity_slope: u.spontaneity_slope,
                    multiplier: u.multiplier,
                    expected_events: u.expected_events.iter().sum(),
                    expected_crimes: u.expected_crimes.iter().sum(),
                })
                .collect(),
        }
    }

    /// Measures straight from the simulated counts. Monthly series stay
    /// empty; they need the placed events of a written bundle.
    pub fn measure_table(&self) -> MeasureTable {
        let years = self.config.years();
        let rows = self
            .units
            .iter()
            .map(|u| {
                let mut r = MeasureRow::empty(&u.profile.blockgroup_id, years);
                for (k, y) in years.years().enumerate() {
                    let (reg, spont) = u.events[k];
                    r.n_regular += reg;
                    r.n_spontaneous += spont;
                    r.yearly_events.insert(y, reg + spont);
                    r.yearly_spontaneous.insert(y, spont);
                    let c = u.crimes[k];
                    r.yearly_crimes.insert(y, c.iter().sum());
                    for (j, cat) in CrimeCategory::ALL.iter().enumerate() {
                        r.yearly_crimes_by_category.get_mut(cat).expect("all categories").insert(y, c[j]);
                    }
                    r.crime_violent += c[0];
                    r.crime_nonviolent += c[1];
                    r.crime_vice += c[2];
                    r.crime_total += c.iter().sum::<u64>();
                }
                r.n_events = r.n_regular + r.n_spontaneous;
                r
            })
            .collect();
        MeasureTable { years, rows, unassigned_events: 0, unassigned_crimes: 0 }
    }

    /// Measures joined with profiles plus the [`TREATMENT_COLUMN`].
    pub fn to_table(&self) -> Table {
        let mut t = self.measure_table().to_table(&self.profiles());
        t.insert(TREATMENT_COLUMN, self.units.iter().map(|u| Some(if u.treated { 1.0 } else { 0.0 })).collect());
        t
    }

    /// Writes `blockgroups.geojson`, `permits.csv`, `crimes.csv`,
    /// `acs.csv`, `landuse.csv` and `truth.json` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<GroundTruth, SynthError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| SynthError::Io { path: path.clone(), source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let create = |name: &str| -> Result<(BufWriter<File>, std::path::PathBuf), SynthError> {
            let p = dir.join(name);
            let f = File::create(&p).map_err(io(&p))?;
            Ok((BufWriter::new(f), p))
        };

        let (mut w, p) = create("blockgroups.geojson")?;
        let features: Vec<serde_json::Value> = self
            .units
            .iter()
            .map(|u| {
                let ring: Vec<[f64; 2]> = cell_ring(&self.config, u.cell.0, u.cell.1).into_iter().map(|(x, y)| [x, y]).collect();
                serde_json::json!({
                    "type": "Feature",
                    "properties": { "id": u.profile.blockgroup_id },
                    "geometry": { "type": "Polygon", "coordinates": [ring] },
                })
            })
            .collect();
        let doc = serde_json::json!({ "type": "FeatureCollection", "features": features });
        serde_json::to_writer(&mut w, &doc).map_err(|e| SynthError::Io { path: p.display().to_string(), source: e.into() })?;
        w.flush().map_err(io(&p))?;

        let (mut w, p) = create("acs.csv")?;
        let wr = |w: &mut BufWriter<File>, s: String| w.write_all(s.as_bytes());
        (|| -> std::io::Result<()> {
            wr(&mut w, "blockgroup_id,population,prop_white,prop_black,prop_asian,prop_hispanic,prop_other,mean_income,poverty_index\n".into())?;
            for u in &self.units {
                let q = &u.profile;
                wr(
                    &mut w,
                    format!(
                        "{},{},{},{},{},{},{},{},{}\n",
                        q.blockgroup_id, q.population, q.prop_white, q.prop_black, q.prop_asian, q.prop_hispanic, q.prop_other, q.mean_income, q.poverty_index
                    ),
                )?;
            }
            w.flush()
        })()
        .map_err(io(&p))?;

        let (mut w, p) = create("landuse.csv")?;
        (|| -> std::io::Result<()> {
            wr(&mut w, "blockgroup_id,area_sqm,category\n".into())?;
            for u in &self.units {
                let q = &u.profile;
                let other = 1.0 - (q.prop_commercial + q.prop_residential + q.prop_vacant + q.prop_transportation + q.prop_industrial + q.prop_park + q.prop_civic);
                let lots = [
                    ("commercial", q.prop_commercial),
                    ("residential", q.prop_residential),
                    ("vacant", q.prop_vacant),
                    ("transportation", q.prop_transportation),
                    ("industrial", q.prop_industrial),
                    ("park", q.prop_park),
                    ("civic", q.prop_civic),
                    ("other", other.max(0.0)),
                ];
                for (cat, share) in lots {
                    wr(&mut w, format!("{},{},{}\n", q.blockgroup_id, share * q.total_area, cat))?;
                }
            }
            w.flush()
        })()
        .map_err(io(&p))?;

        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(1);
        let placer = Placer::new(&self.config);

        let (mut w, p) = create("permits.csv")?;
        (|| -> std::io::Result<()> {
            wr(&mut w, "date,lat,lon,event_type\n".into())?;
            for u in &self.units {
                for (k, y) in self.config.years().years().enumerate() {
                    let (reg, spont) = u.events[k];
                    for j in 0..reg + spont {
                        let spontaneous = j >= reg;
                        let date = placer.date(&mut rng, y);
                        let (lat, lon) = placer.point(&mut rng, u.cell);
                        let ty = placer.event_type(&mut rng, spontaneous);
                        wr(&mut w, format!("{date},{lat:.6},{lon:.6},{ty}\n"))?;
                    }
                }
            }
            w.flush()
        })()
        .map_err(io(&p))?;

        let (mut w, p) = create("crimes.csv")?;
        (|| -> std::io::Result<()> {
            wr(&mut w, "date,time,lat,lon,crime_type\n".into())?;
            for u in &self.units {
                for (k, y) in self.config.years().years().enumerate() {
                    for (c, &n) in u.crimes[k].iter().enumerate() {
                        for _ in 0..n {
                            let date = placer.date(&mut rng, y);
                            let minute = rng.random_range(0..24 * 60);
                            let (lat, lon) = placer.point(&mut rng, u.cell);
                            let ty = placer.crime_type(&mut rng, c);
                            wr(&mut w, format!("{date},{:02}:{:02},{lat:.6},{lon:.6},{ty}\n", minute / 60, minute % 60))?;
                        }
                    }
                }
            }
            w.flush()
        })()
        .map_err(io(&p))?;

        let truth = self.truth();
        let (mut w, p) = create("truth.json")?;
        serde_json::to_writer_pretty(&mut w, &truth).map_err(|e| SynthError::Io { path: p.display().to_string(), source: e.into() })?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(io(&p))?;
        Ok(truth)
    }
}

/// Simulates a city and writes its bundle.
pub fn generate_city(config: &CityConfig, dir: &Path) -> Result<GroundTruth, SynthError> {
    simulate(config)?.write_bundle(dir)
}

struct Placer<'a> {
    config: &'a CityConfig,
    month_weights: [f64; 12],
    regular: Vec<(&'static str, f64)>,
    spontaneous: Vec<(&'static str, f64)>,
    crime_types: [Vec<&'static str>; 4],
}

fn days_in_month(y: i32, m: u32) -> u32 {
    let next = if m == 12 { NaiveDate::from_ymd_opt(y + 1, 1, 1) } else { NaiveDate::from_ymd_opt(y, m + 1, 1) };
    next.expect("valid date").pred_opt().expect("valid date").day()
}

fn pick<'b, T>(rng: &mut ChaCha8Rng, items: &'b [(T, f64)]) -> &'b T {
    let total: f64 = items.iter().map(|i| i.1).sum();
    let mut u = rng.random::<f64>() * total;
    for (item, w) in items {
        if u < *w {
            return item;
        }
        u -= w;
    }
    &items.iter().rev().find(|i| i.1 > 0.0).expect("positive weight").0
}

impl<'a> Placer<'a> {
    fn new(config: &'a CityConfig) -> Self {
        let mut month_weights = [1.0; 12];
        for m in 4..9 {
            month_weights[m] = config.warm_month_multiplier;
        }
        let taxonomy = EventTaxonomy::standard();
        let share = |g: EventGroup| {
            let i = match g {
                EventGroup::PublicHoliday => 0,
                EventGroup::Religious => 1,
                EventGroup::Community => 2,
                EventGroup::Personal => 3,
            };
            config.event_group_shares[i]
        };
        let members = |wanted: &[EventGroup]| -> Vec<(&'static str, f64)> {
            let all = taxonomy.entries();
            wanted
                .iter()
                .flat_map(|&g| {
                    let names: Vec<&'static str> = all.iter().filter(|e| e.1 == g).map(|e| e.0).collect();
                    let w = share(g) / names.len() as f64;
                    names.into_iter().map(move |n| (n, w))
                })
                .collect()
        };
        let crimes = CrimeTaxonomy::standard().entries();
        let crime_types = CrimeCategory::ALL.map(|c| crimes.iter().filter(|e| e.1 == c).map(|e| e.0).collect());
        Self {
            config,
            month_weights,
            regular: members(&[EventGroup::PublicHoliday, EventGroup::Religious]),
            spontaneous: members(&[EventGroup::Community, EventGroup::Personal]),
            crime_types,
        }
    }

    fn date(&self, rng: &mut ChaCha8Rng, year: i32) -> NaiveDate {
        let weights: Vec<(u32, f64)> = (1..=12u32).map(|m| (m, self.month_weights[m as usize - 1] * days_in_month(year, m) as f64)).collect();
        let m = *pick(rng, &weights);
        let d = rng.random_range(1..=days_in_month(year, m));
        NaiveDate::from_ymd_opt(year, m, d).expect("valid day")
    }

    /// Uniform in the cell, kept off the edges so that rounding to six
    /// decimals cannot move a point onto a neighbour.
    fn point(&self, rng: &mut ChaCha8Rng, (row, col): (usize, usize)) -> (f64, f64) {
        let s = self.config.cell_degrees;
        let u = 0.01 + 0.98 * rng.random::<f64>();
        let v = 0.01 + 0.98 * rng.random::<f64>();
        (self.config.origin[1] + (row as f64 + v) * s, self.config.origin[0] + (col as f64 + u) * s)
    }

    fn event_type(&self, rng: &mut ChaCha8Rng, spontaneous: bool) -> &'static str {
        pick(rng, if spontaneous { &self.spontaneous } else { &self.regular })
    }

    fn crime_type(&self, rng: &mut ChaCha8Rng, category: usize) -> &'static str {
        let names = &self.crime_types[category];
        names[rng.random_range(0..names.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> CityConfig {
        CityConfig { seed, n_blockgroups: 30, ..CityConfig::default() }
    }

    #[test]
    fn same_seed_same_city() {
        let a = simulate(&small(3)).unwrap();
        let b = simulate(&small(3)).unwrap();
        assert_eq!(a.units, b.units);
        let c = simulate(&small(4)).unwrap();
        assert_ne!(a.units, c.units);
    }

    #[test]
    fn counts_are_consistent() {
        let city = simulate(&small(1)).unwrap();
        let t = city.measure_table();
        for (u, r) in city.units.iter().zip(&t.rows) {
            assert_eq!(r.n_events, u.total_events());
            assert_eq!(r.crime_total, u.total_crimes());
            assert!(r.crime_violent + r.crime_nonviolent + r.crime_vice <= r.crime_total);
            let race = u.profile.prop_white + u.profile.prop_black + u.profile.prop_asian + u.profile.prop_hispanic + u.profile.prop_other;
            assert!((race - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_config() {
        let cfg = CityConfig { n_blockgroups: 0, ..CityConfig::default() };
        assert!(simulate(&cfg).is_err());
        let mut cfg = CityConfig::default();
        cfg.crime.coefficients.insert("shoe_size".into(), 1.0);
        assert!(matches!(simulate(&cfg), Err(SynthError::InvalidConfig(m)) if m.contains("shoe_size")));
    }

    #[test]
    fn warm_months_weighted() {
        let cfg = CityConfig::default();
        let p = Placer::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let warm = (0..4000).filter(|_| (5..=9).contains(&p.date(&mut rng, 2010).month())).count();
        // expected share 153·2.5 / (153·2.5 + 212) ≈ 0.643
        assert!((warm as f64 / 4000.0 - 0.643).abs() < 0.03, "{warm}");
    }
}
