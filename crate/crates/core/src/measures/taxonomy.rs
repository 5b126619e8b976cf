//! Event-type and crime-type whitelists.

use std::collections::HashMap;
use std::io::Read;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::MeasureError;

const DEFAULT_EVENT_TYPES: &str = include_str!("../../config/event_types.csv");
const DEFAULT_CRIME_TYPES: &str = include_str!("../../config/crime_types.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventCategory {
    Regular,
    Spontaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventGroup {
    PublicHoliday,
    Religious,
    Community,
    Personal,
}

impl EventGroup {
    pub fn category(self) -> EventCategory {
        match self {
            EventGroup::PublicHoliday | EventGroup::Religious => EventCategory::Regular,
            EventGroup::Community | EventGroup::Personal => EventCategory::Spontaneous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrimeCategory {
    Violent,
    #[serde(rename = "nonviolent")]
    NonViolent,
    Vice,
    Other,
}

impl CrimeCategory {
    pub const ALL: [CrimeCategory; 4] = [CrimeCategory::Violent, CrimeCategory::NonViolent, CrimeCategory::Vice, CrimeCategory::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            CrimeCategory::Violent => "violent",
            CrimeCategory::NonViolent => "nonviolent",
            CrimeCategory::Vice => "vice",
            CrimeCategory::Other => "other",
        }
    }
}

/// Case-insensitive, whitespace-collapsed key.
fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn load<V: for<'de> Deserialize<'de>, R: Read>(reader: R, key_col: &str, val_col: &str) -> Result<HashMap<String, (String, V)>, MeasureError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| MeasureError::Config(e.to_string()))?.clone();
    let ki = headers.iter().position(|h| h == key_col).ok_or_else(|| MeasureError::Config(format!("missing column `{key_col}`")))?;
    let vi = headers.iter().position(|h| h == val_col).ok_or_else(|| MeasureError::Config(format!("missing column `{val_col}`")))?;
    let mut map = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| MeasureError::Config(e.to_string()))?;
        let (k, v) = (&rec[ki], &rec[vi]);
        let value: V = serde_json::from_value(serde_json::Value::String(v.to_string()))
            .map_err(|_| MeasureError::Config(format!("unknown category `{v}` for `{k}`")))?;
        if map.insert(normalize(k), (k.to_string(), value)).is_some() {
            return Err(MeasureError::Config(format!("`{k}` listed twice")));
        }
    }
    Ok(map)
}

/// Permit event types grouped into regular and spontaneous events.
#[derive(Debug, Clone)]
pub struct EventTaxonomy {
    groups: HashMap<String, (String, EventGroup)>,
}

impl EventTaxonomy {
    /// CSV with columns `event_type,group`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, MeasureError> {
        Ok(Self { groups: load(reader, "event_type", "group")? })
    }

    /// The built-in 29-type list.
    pub fn standard() -> &'static Self {
        static T: OnceLock<EventTaxonomy> = OnceLock::new();
        T.get_or_init(|| Self::from_csv(DEFAULT_EVENT_TYPES.as_bytes()).expect("built-in event taxonomy parses"))
    }

    pub fn group(&self, raw_type: &str) -> Result<EventGroup, MeasureError> {
        self.groups.get(&normalize(raw_type)).map(|g| g.1).ok_or_else(|| MeasureError::UnknownEventType(raw_type.to_string()))
    }

    pub fn classify(&self, raw_type: &str) -> Result<EventCategory, MeasureError> {
        self.group(raw_type).map(EventGroup::category)
    }

    /// Types in the list with their groups, sorted by name.
    pub fn entries(&self) -> Vec<(&str, EventGroup)> {
        let mut v: Vec<(&str, EventGroup)> = self.groups.values().map(|(n, g)| (n.as_str(), *g)).collect();
        v.sort();
        v
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Crime types mapped to reporting categories.
#[derive(Debug, Clone)]
pub struct CrimeTaxonomy {
    categories: HashMap<String, (String, CrimeCategory)>,
}

impl CrimeTaxonomy {
    /// CSV with columns `crime_type,category`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, MeasureError> {
        Ok(Self { categories: load(reader, "crime_type", "category")? })
    }

    pub fn standard() -> &'static Self {
        static T: OnceLock<CrimeTaxonomy> = OnceLock::new();
        T.get_or_init(|| Self::from_csv(DEFAULT_CRIME_TYPES.as_bytes()).expect("built-in crime taxonomy parses"))
    }

    pub fn classify(&self, raw_type: &str) -> Result<CrimeCategory, MeasureError> {
        self.categories.get(&normalize(raw_type)).map(|c| c.1).ok_or_else(|| MeasureError::UnknownCrimeType(raw_type.to_string()))
    }

    pub fn entries(&self) -> Vec<(&str, CrimeCategory)> {
        let mut v: Vec<(&str, CrimeCategory)> = self.categories.values().map(|(n, c)| (n.as_str(), *c)).collect();
        v.sort();
        v
    }
}

/// Category of a permit event type under the built-in list.
pub fn classify_event(raw_type: &str) -> Result<EventCategory, MeasureError> {
    EventTaxonomy::standard().classify(raw_type)
}

/// Category of a crime type under the built-in list.
pub fn classify_crime(raw_type: &str) -> Result<CrimeCategory, MeasureError> {
    CrimeTaxonomy::standard().classify(raw_type)
}
