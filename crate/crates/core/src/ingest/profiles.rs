use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Race proportions must sum to one within this tolerance.
pub const RACE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandUse {
    Commercial,
    Residential,
    Vacant,
    Transportation,
    Industrial,
    Park,
    Civic,
    Other,
}

impl LandUse {
    pub const ALL: [LandUse; 8] = [
        LandUse::Commercial,
        LandUse::Residential,
        LandUse::Vacant,
        LandUse::Transportation,
        LandUse::Industrial,
        LandUse::Park,
        LandUse::Civic,
        LandUse::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LandUse::Commercial => "commercial",
            LandUse::Residential => "residential",
            LandUse::Vacant => "vacant",
            LandUse::Transportation => "transportation",
            LandUse::Industrial => "industrial",
            LandUse::Park => "park",
            LandUse::Civic => "civic",
            LandUse::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodProfile {
    pub blockgroup_id: String,
    pub population: f64,
    pub prop_white: f64,
    pub prop_black: f64,
    pub prop_asian: f64,
    pub prop_hispanic: f64,
    pub prop_other: f64,
    pub mean_income: f64,
    /// 0 = poorest, 1 = wealthiest.
    pub poverty_index: f64,
    /// Total lot area, m².
    pub total_area: f64,
    pub prop_commercial: f64,
    pub prop_residential: f64,
    pub prop_vacant: f64,
    pub prop_transportation: f64,
    pub prop_industrial: f64,
    pub prop_park: f64,
    pub prop_civic: f64,
}

impl NeighborhoodProfile {
    /// Numeric fields keyed by their column names.
    pub fn fields(&self) -> [(&'static str, f64); 16] {
        [
            ("population", self.population),
            ("prop_white", self.prop_white),
            ("prop_black", self.prop_black),
            ("prop_asian", self.prop_asian),
            ("prop_hispanic", self.prop_hispanic),
            ("prop_other", self.prop_other),
            ("mean_income", self.mean_income),
            ("poverty_index", self.poverty_index),
            ("total_area", self.total_area),
            ("prop_commercial", self.prop_commercial),
            ("prop_residential", self.prop_residential),
            ("prop_vacant", self.prop_vacant),
            ("prop_transportation", self.prop_transportation),
            ("prop_industrial", self.prop_industrial),
            ("prop_park", self.prop_park),
            ("prop_civic", self.prop_civic),
        ]
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.population >= 0.0) {
            return Err(format!("population must be >= 0, got {}", self.population));
        }
        if !(self.mean_income > 0.0) {
            return Err(format!("mean_income must be > 0, got {}", self.mean_income));
        }
        for (name, v) in self.fields() {
            if (name.starts_with("prop_") || name == "poverty_index") && !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} outside [0, 1]"));
            }
        }
        let race = self.prop_white + self.prop_black + self.prop_asian + self.prop_hispanic + self.prop_other;
        if (race - 1.0).abs() > RACE_TOLERANCE {
            return Err(format!("race proportions sum to {race}, expected 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct AcsRow {
    blockgroup_id: String,
    population: f64,
    prop_white: f64,
    prop_black: f64,
    prop_asian: f64,
    prop_hispanic: f64,
    prop_other: f64,
    mean_income: f64,
    poverty_index: f64,
}

#[derive(Debug, Deserialize)]
struct LotRow {
    blockgroup_id: String,
    area_sqm: f64,
    category: String,
}

fn csv_err(path: &str, e: csv::Error) -> IngestError {
    match e.position() {
        Some(p) => IngestError::row(path, p.line(), e.to_string()),
        None => IngestError::File { path: path.to_string(), message: e.to_string() },
    }
}

fn require(rdr: &mut csv::Reader<impl Read>, path: &str, cols: &[&str]) -> Result<(), IngestError> {
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?;
    for c in cols {
        if !headers.iter().any(|h| h.trim() == *c) {
            return Err(IngestError::MissingColumn { path: path.to_string(), column: c.to_string() });
        }
    }
    Ok(())
}

/// Joins ACS demographics with lot-level land use. Land-use proportions are
/// category area over total lot area; block groups without lots get zero
/// proportions and zero area. Lots of unknown block groups are ignored.
pub fn parse_profiles_from<A: Read, L: Read>(acs: A, landuse: L) -> Result<Vec<NeighborhoodProfile>, IngestError> {
    parse_named(acs, "<acs>", landuse, "<landuse>")
}

fn parse_named<A: Read, L: Read>(acs: A, acs_path: &str, landuse: L, lu_path: &str) -> Result<Vec<NeighborhoodProfile>, IngestError> {
    let mut lots: BTreeMap<String, BTreeMap<LandUse, f64>> = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(landuse);
    require(&mut rdr, lu_path, &["blockgroup_id", "area_sqm", "category"])?;
    for row in rdr.deserialize::<LotRow>() {
        let row = row.map_err(|e| csv_err(lu_path, e))?;
        let Some(cat) = LandUse::parse(&row.category) else {
            let allowed: Vec<&str> = LandUse::ALL.iter().map(|c| c.as_str()).collect();
            return Err(IngestError::File {
                path: lu_path.to_string(),
                message: format!("unknown land-use category `{}`; allowed: {}", row.category, allowed.join(", ")),
            });
        };
        if !(row.area_sqm >= 0.0) {
            return Err(IngestError::InvalidProfile { id: row.blockgroup_id, message: format!("negative lot area {}", row.area_sqm) });
        }
        *lots.entry(row.blockgroup_id).or_default().entry(cat).or_default() += row.area_sqm;
    }

    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(acs);
    require(&mut rdr, acs_path, &["blockgroup_id", "population", "prop_white", "prop_black", "prop_asian", "prop_hispanic", "prop_other", "mean_income", "poverty_index"])?;
    for row in rdr.deserialize::<AcsRow>() {
        let r = row.map_err(|e| csv_err(acs_path, e))?;
        if !seen.insert(r.blockgroup_id.clone()) {
            return Err(IngestError::DuplicateId(r.blockgroup_id));
        }
        let by_cat = lots.get(&r.blockgroup_id);
        let total: f64 = by_cat.map_or(0.0, |m| m.values().sum());
        let prop = |c: LandUse| match by_cat {
            Some(m) if total > 0.0 => m.get(&c).copied().unwrap_or(0.0) / total,
            _ => 0.0,
        };
        let p = NeighborhoodProfile {
            blockgroup_id: r.blockgroup_id,
            population: r.population,
            prop_white: r.prop_white,
            prop_black: r.prop_black,
            prop_asian: r.prop_asian,
            prop_hispanic: r.prop_hispanic,
            prop_other: r.prop_other,
            mean_income: r.mean_income,
            poverty_index: r.poverty_index,
            total_area: total,
            prop_commercial: prop(LandUse::Commercial),
            prop_residential: prop(LandUse::Residential),
            prop_vacant: prop(LandUse::Vacant),
            prop_transportation: prop(LandUse::Transportation),
            prop_industrial: prop(LandUse::Industrial),
            prop_park: prop(LandUse::Park),
            prop_civic: prop(LandUse::Civic),
        };
        p.validate().map_err(|message| IngestError::InvalidProfile { id: p.blockgroup_id.clone(), message })?;
        out.push(p);
    }
    Ok(out)
}

pub fn parse_profiles(acs_path: &Path, landuse_path: &Path) -> Result<Vec<NeighborhoodProfile>, IngestError> {
    let open = |p: &Path| std::fs::File::open(p).map_err(|source| IngestError::Io { path: p.to_path_buf(), source });
    parse_named(open(acs_path)?, &acs_path.display().to_string(), open(landuse_path)?, &landuse_path.display().to_string())
}
