//! Points of interest and the city (POI set) file format.
//!
//! A city file is a single JSON document:
//!
//! ```json
//! {
//!   "schema": "tripassist.city/1",
//!   "city": { "size_km": 10.0, "seed": 7, "n_categories": 5 },
//!   "pois": [
//!     { "id": 0, "x_km": 1.25, "y_km": 8.5, "category": 3,
//!       "visit_duration_h": 1.75, "entry_cost": 12.4 }
//!   ]
//! }
//! ```
//!
//! `category` is an index in `0..n_categories`, durations are hours, costs are
//! currency units, positions are kilometres.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type PoiId = u32;

pub const CITY_SCHEMA: &str = "tripassist.city/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOfInterest {
    pub id: PoiId,
    pub x_km: f64,
    pub y_km: f64,
    pub category: usize,
    pub visit_duration_h: f64,
    pub entry_cost: f64,
}

impl PointOfInterest {
    pub fn position(&self) -> [f64; 2] {
        [self.x_km, self.y_km]
    }
}

/// Ranges used when generating random cities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CityConfig {
    pub size_km: f64,
    pub n_categories: usize,
    pub visit_duration_h: (f64, f64),
    pub entry_cost: (f64, f64),
}

impl Default for CityConfig {
    fn default() -> Self {
        Self {
            size_km: 10.0,
            n_categories: 5,
            visit_duration_h: (0.5, 2.5),
            entry_cost: (0.0, 30.0),
        }
    }
}

impl CityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.size_km.is_finite() && self.size_km > 0.0) {
            return Err(Error::Config(format!("city size must be > 0, got {}", self.size_km)));
        }
        if self.n_categories == 0 {
            return Err(Error::Config("need at least one category".into()));
        }
        let (dmin, dmax) = self.visit_duration_h;
        if !(dmin > 0.0 && dmin <= dmax && dmax.is_finite()) {
            return Err(Error::Config(format!("bad visit duration range [{dmin}, {dmax}]")));
        }
        let (cmin, cmax) = self.entry_cost;
        if !(cmin >= 0.0 && cmin <= cmax && cmax.is_finite()) {
            return Err(Error::Config(format!("bad entry cost range [{cmin}, {cmax}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityMeta {
    pub size_km: f64,
    pub seed: Option<u64>,
    pub n_categories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct City {
    pub schema: String,
    pub city: CityMeta,
    pub pois: Vec<PointOfInterest>,
}

impl City {
    /// Uniformly random city: positions in the square, categories, durations
    /// and costs all drawn uniformly from the configured ranges.
    pub fn generate(n: usize, seed: u64, config: &CityConfig) -> Result<City> {
        if n < 1 {
            return Err(Error::InvalidArgument("a city needs at least one POI".into()));
        }
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dmin, dmax) = config.visit_duration_h;
        let (cmin, cmax) = config.entry_cost;
        let pois = (0..n)
            .map(|i| PointOfInterest {
                id: i as PoiId,
                x_km: rng.random::<f64>() * config.size_km,
                y_km: rng.random::<f64>() * config.size_km,
                category: rng.random_range(0..config.n_categories),
                visit_duration_h: dmin + (dmax - dmin) * rng.random::<f64>(),
                entry_cost: cmin + (cmax - cmin) * rng.random::<f64>(),
            })
            .collect();
        Ok(City {
            schema: CITY_SCHEMA.to_string(),
            city: CityMeta {
                size_km: config.size_km,
                seed: Some(seed),
                n_categories: config.n_categories,
            },
            pois,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CITY_SCHEMA {
            return Err(Error::Format(format!("unsupported city schema {:?}", self.schema)));
        }
        if self.pois.is_empty() {
            return Err(Error::Format("city has no POIs".into()));
        }
        if self.city.n_categories == 0 {
            return Err(Error::Format("city declares zero categories".into()));
        }
        let mut seen = HashSet::new();
        for p in &self.pois {
            if !seen.insert(p.id) {
                return Err(Error::Format(format!("duplicate POI id {}", p.id)));
            }
            if !(p.x_km.is_finite() && p.y_km.is_finite()) {
                return Err(Error::Format(format!("POI {} has a non-finite position", p.id)));
            }
            if !(p.visit_duration_h.is_finite() && p.visit_duration_h > 0.0) {
                return Err(Error::Format(format!("POI {} visit duration must be > 0", p.id)));
            }
            if !(p.entry_cost.is_finite() && p.entry_cost >= 0.0) {
                return Err(Error::Format(format!("POI {} entry cost must be >= 0", p.id)));
            }
            if p.category >= self.city.n_categories {
                return Err(Error::Format(format!(
                    "POI {} category {} out of range 0..{}",
                    p.id, p.category, self.city.n_categories
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        // serialization of plain structs with finite floats cannot fail
        serde_json::to_string_pretty(self).expect("city serializes")
    }

    pub fn from_json(text: &str) -> Result<City> {
        let city: City = serde_json::from_str(text)?;
        city.validate()?;
        Ok(city)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<City> {
        City::from_json(&std::fs::read_to_string(path)?)
    }
}
