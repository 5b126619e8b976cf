use std::collections::HashSet;
use std::path::Path;

use serde_json::Value;

use super::geometry::{BlockGroup, Ring};
use super::IngestError;

fn bad(path: &str, message: impl Into<String>) -> IngestError {
    IngestError::File { path: path.to_string(), message: message.into() }
}

fn ring(v: &Value, id: &str, path: &str) -> Result<Ring, IngestError> {
    let pts = v.as_array().ok_or_else(|| bad(path, format!("feature `{id}`: ring is not an array")))?;
    let ring: Ring = pts
        .iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2);
            match xy.map(|a| (a[0].as_f64(), a[1].as_f64())) {
                Some((Some(x), Some(y))) => Ok((x, y)),
                _ => Err(bad(path, format!("feature `{id}`: malformed position"))),
            }
        })
        .collect::<Result<_, _>>()?;
    if ring.len() < 4 {
        return Err(IngestError::ShortRing(id.to_string()));
    }
    if ring.first() != ring.last() {
        return Err(IngestError::UnclosedRing(id.to_string()));
    }
    Ok(ring)
}

fn polygon(v: &Value, id: &str, path: &str) -> Result<Vec<Ring>, IngestError> {
    v.as_array()
        .ok_or_else(|| bad(path, format!("feature `{id}`: polygon is not an array")))?
        .iter()
        .map(|r| ring(r, id, path))
        .collect()
}

/// GeoJSON FeatureCollection of Polygon / MultiPolygon features with a
/// string `id` property and optional `area_sqm`.
pub fn parse_blockgroups_str(text: &str, path: &str) -> Result<Vec<BlockGroup>, IngestError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| bad(path, e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(bad(path, "expected a FeatureCollection"));
    }
    let features = doc.get("features").and_then(Value::as_array).ok_or_else(|| bad(path, "missing `features`"))?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(features.len());
    for (k, f) in features.iter().enumerate() {
        let props = f.get("properties");
        let id = match props.and_then(|p| p.get("id")) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(bad(path, format!("feature {k}: missing string property `id`"))),
        };
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateId(id));
        }
        let geom = f.get("geometry").ok_or_else(|| bad(path, format!("feature `{id}`: missing geometry")))?;
        let coords = geom.get("coordinates").ok_or_else(|| bad(path, format!("feature `{id}`: missing coordinates")))?;
        let rings = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => polygon(coords, &id, path)?,
            Some("MultiPolygon") => {
                let parts = coords.as_array().ok_or_else(|| bad(path, format!("feature `{id}`: malformed MultiPolygon")))?;
                let mut rings = Vec::new();
                for p in parts {
                    rings.extend(polygon(p, &id, path)?);
                }
                rings
            }
            other => return Err(bad(path, format!("feature `{id}`: unsupported geometry {other:?}"))),
        };
        if rings.is_empty() {
            return Err(bad(path, format!("feature `{id}`: empty geometry")));
        }
        let area = props.and_then(|p| p.get("area_sqm")).and_then(Value::as_f64);
        out.push(BlockGroup::new(id, rings, area));
    }
    Ok(out)
}

pub fn parse_blockgroups(path: &Path) -> Result<Vec<BlockGroup>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    parse_blockgroups_str(&text, &path.display().to_string())
}
