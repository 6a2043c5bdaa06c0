use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::task::Minutes;

/// Mean Earth radius in km.
const EARTH_RADIUS_KM: f64 = 6371.0088;
pub const WALK_SPEED_KMH: f64 = 5.0;

/// What a data source knows about one object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectFacts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    /// Opening windows, `[start, end)` in minutes from midnight.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub open: Vec<(Minutes, Minutes)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visit_duration: Option<f64>,
    /// Further true atoms, e.g. `(free_table X)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<String>,
    /// Explicit travel minutes to other objects; wins over coordinates.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub durations: BTreeMap<String, f64>,
}

impl ObjectFacts {
    pub fn coordinates(&self) -> Option<(f64, f64)> {
        Some((self.lat?, self.lon?))
    }

    pub fn check(&self) -> Result<(), String> {
        if let Some((s, e)) = self.open.iter().find(|(s, e)| s >= e) {
            return Err(format!("window [{s}, {e}] is empty"));
        }
        if self.open.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err("windows overlap or are unsorted".into());
        }
        match self.visit_duration {
            Some(d) if d.is_nan() || d <= 0.0 => Err(format!("visit duration {d} is not positive")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("provider data: {0}")]
    Schema(String),
    #[error("provider request for `{object}` failed: {msg}")]
    Request { object: String, msg: String },
}

/// A source of object facts.
pub trait DataProvider: Send + Sync {
    fn facts(&self, object: &str) -> Result<Option<ObjectFacts>, ProviderError>;
}

/// Facts read from a JSON map of object id to [`ObjectFacts`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileDataProvider {
    pub facts: BTreeMap<String, ObjectFacts>,
}

impl FileDataProvider {
    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let facts: BTreeMap<String, ObjectFacts> =
            serde_json::from_str(text).map_err(|e| ProviderError::Schema(e.to_string()))?;
        for (id, f) in &facts {
            f.check().map_err(|m| ProviderError::Schema(format!("{id}: {m}")))?;
        }
        Ok(FileDataProvider { facts })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p)
            .map_err(|e| ProviderError::Io { path: p.display().to_string(), msg: e.to_string() })?;
        Self::from_json(&text)
    }
}

impl DataProvider for FileDataProvider {
    fn facts(&self, object: &str) -> Result<Option<ObjectFacts>, ProviderError> {
        Ok(self.facts.get(object).cloned())
    }
}

/// Fetches `GET <base>/<object>` returning one [`ObjectFacts`] document;
/// 404 means unknown.
#[cfg(feature = "online")]
pub struct HttpDataProvider {
    base_url: String,
    agent: ureq::Agent,
}

#[cfg(feature = "online")]
impl HttpDataProvider {
    pub fn new(base_url: impl Into<String>, timeout: std::time::Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpDataProvider { base_url: base_url.into().trim_end_matches('/').to_string(), agent }
    }
}

#[cfg(feature = "online")]
impl DataProvider for HttpDataProvider {
    fn facts(&self, object: &str) -> Result<Option<ObjectFacts>, ProviderError> {
        let err = |msg: String| ProviderError::Request { object: object.into(), msg };
        let url = format!("{}/{object}", self.base_url);
        let body = match self.agent.get(&url).call() {
            Ok(mut r) => r.body_mut().read_to_string().map_err(|e| err(e.to_string()))?,
            Err(ureq::Error::StatusCode(404)) => return Ok(None),
            Err(e) => return Err(err(e.to_string())),
        };
        let f: ObjectFacts = serde_json::from_str(&body).map_err(|e| err(e.to_string()))?;
        f.check().map_err(err)?;
        Ok(Some(f))
    }
}

/// Great-circle distance in km.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la1, lo1) = (a.0.to_radians(), a.1.to_radians());
    let (la2, lo2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().asin()
}

/// Walking minutes between two coordinates, rounded up.
pub fn walk_minutes(a: (f64, f64), b: (f64, f64)) -> Minutes {
    let m = haversine_km(a, b) / WALK_SPEED_KMH * 60.0;
    (m - 1e-9).ceil().max(0.0) as Minutes
}
