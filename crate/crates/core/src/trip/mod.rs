//! Day-trip planning as a design domain.
//!
//! A design is a tour over a subset of a city's points of interest. Adding a
//! POI is legal only while the distance-optimal tour over the resulting set
//! still fits the duration budget.

pub mod poi;
pub mod routing;
pub mod utility;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::design::{DesignDomain, Dynamics, OutcomeVector};
use crate::error::{Error, Result};
use crate::user_model::insertion::max_angle_position;

pub use poi::{City, CityConfig, CityMeta, PoiId, PointOfInterest, CITY_SCHEMA};
pub use routing::Point;
pub use utility::{trip_utility, TripUtilityParams, TripUtilityPrior};

/// Slack when comparing a trip's duration against the budget.
const BUDGET_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TripConfig {
    pub duration_budget_h: f64,
    pub walking_speed_kmh: f64,
    pub cost_scale: f64,
    /// Round trip (return to the first stop) when true, open path otherwise.
    pub closed_tour: bool,
    /// Largest POI count routed exactly; larger sets use 2-opt.
    pub exact_threshold: usize,
}

impl Default for TripConfig {
    fn default() -> Self {
        Self {
            duration_budget_h: 12.0,
            walking_speed_kmh: 5.0,
            cost_scale: 100.0,
            closed_tour: true,
            exact_threshold: 10,
        }
    }
}

impl TripConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.duration_budget_h) {
            return Err(Error::Config("duration budget must be > 0".into()));
        }
        if !positive(self.walking_speed_kmh) {
            return Err(Error::Config("walking speed must be > 0".into()));
        }
        if !positive(self.cost_scale) {
            return Err(Error::Config("cost scale must be > 0".into()));
        }
        if self.exact_threshold > 16 {
            return Err(Error::Config("exact_threshold above 16 is intractable".into()));
        }
        Ok(())
    }
}

/// The design state: the visiting order over the selected POIs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripDesign {
    pub tour: Vec<PoiId>,
}

impl TripDesign {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn contains(&self, id: PoiId) -> bool {
        self.tour.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.tour.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tour.is_empty()
    }
}

/// Add a POI, remove a POI, or leave the trip as it is.
///
/// Ordered with `NoOp` first, then by POI id, with `Add` before `Remove` for
/// the same id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "poi", rename_all = "snake_case")]
pub enum TripChange {
    #[serde(rename = "noop")]
    NoOp,
    Add(PoiId),
    Remove(PoiId),
}

impl TripChange {
    fn sort_key(&self) -> (u8, PoiId, u8) {
        match *self {
            TripChange::NoOp => (0, 0, 0),
            TripChange::Add(id) => (1, id, 0),
            TripChange::Remove(id) => (1, id, 1),
        }
    }

    pub fn poi(&self) -> Option<PoiId> {
        match *self {
            TripChange::NoOp => None,
            TripChange::Add(id) | TripChange::Remove(id) => Some(id),
        }
    }
}

impl Ord for TripChange {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for TripChange {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TripChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TripChange::NoOp => write!(f, "noop"),
            TripChange::Add(id) => write!(f, "add:{id}"),
            TripChange::Remove(id) => write!(f, "remove:{id}"),
        }
    }
}

impl FromStr for TripChange {
    type Err = Error;

    /// Parses `noop`, `add:<id>` or `remove:<id>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse design change {s:?}"));
        if s == "noop" {
            return Ok(TripChange::NoOp);
        }
        let (kind, id) = s.split_once(':').ok_or_else(bad)?;
        let id: PoiId = id.parse().map_err(|_| bad())?;
        match kind {
            "add" => Ok(TripChange::Add(id)),
            "remove" => Ok(TripChange::Remove(id)),
            _ => Err(bad()),
        }
    }
}

/// Consequences of carrying out a trip. Times in hours, lengths in km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripOutcomes {
    pub walking_time: f64,
    pub visit_time: f64,
    pub total_duration: f64,
    pub total_cost: f64,
    pub tour_length: f64,
    /// Hours spent at POIs of each category.
    pub category_hours: Vec<f64>,
}

impl TripOutcomes {
    pub fn zero(n_categories: usize) -> Self {
        Self {
            walking_time: 0.0,
            visit_time: 0.0,
            total_duration: 0.0,
            total_cost: 0.0,
            tour_length: 0.0,
            category_hours: vec![0.0; n_categories],
        }
    }
}

impl OutcomeVector for TripOutcomes {
    fn delta(&self, before: &Self) -> Self {
        Self {
            walking_time: self.walking_time - before.walking_time,
            visit_time: self.visit_time - before.visit_time,
            total_duration: self.total_duration - before.total_duration,
            total_cost: self.total_cost - before.total_cost,
            tour_length: self.tour_length - before.tour_length,
            category_hours: self
                .category_hours
                .iter()
                .zip(&before.category_hours)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Bitset over POI indices, used to memoize optimal tour lengths.
type PoiMask = Vec<u64>;

/// A city plus routing configuration, implementing [`DesignDomain`].
#[derive(Debug)]
pub struct TripDomain {
    pois: Vec<PointOfInterest>,
    index: HashMap<PoiId, usize>,
    /// POI indices sorted by id.
    by_id: Vec<usize>,
    n_categories: usize,
    config: TripConfig,
    length_cache: Mutex<HashMap<PoiMask, f64>>,
}

impl Clone for TripDomain {
    fn clone(&self) -> Self {
        Self {
            pois: self.pois.clone(),
            index: self.index.clone(),
            by_id: self.by_id.clone(),
            n_categories: self.n_categories,
            config: self.config.clone(),
            length_cache: Mutex::new(HashMap::new()),
        }
    }
}

impl TripDomain {
    pub fn new(city: &City, config: TripConfig) -> Result<Self> {
        city.validate()?;
        config.validate()?;
        let index = city.pois.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
        let mut by_id: Vec<usize> = (0..city.pois.len()).collect();
        by_id.sort_by_key(|&i| city.pois[i].id);
        Ok(Self {
            pois: city.pois.clone(),
            index,
            by_id,
            n_categories: city.city.n_categories,
            config,
            length_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &TripConfig {
        &self.config
    }

    pub fn pois(&self) -> &[PointOfInterest] {
        &self.pois
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    pub fn poi(&self, id: PoiId) -> Result<&PointOfInterest> {
        self.index.get(&id).map(|&i| &self.pois[i]).ok_or(Error::UnknownPoi(id))
    }

    fn idx(&self, id: PoiId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownPoi(id))
    }

    /// Distance-minimal visiting order over `ids` (2-opt above the exact
    /// threshold). Closed tours start at the lowest id.
    pub fn route_optimal(&self, ids: &[PoiId]) -> Result<Vec<PoiId>> {
        let mut sorted = ids.to_vec();
        sorted.sort_unstable();
        let points = sorted
            .iter()
            .map(|&id| self.poi(id).map(|p| p.position()))
            .collect::<Result<Vec<_>>>()?;
        let order =
            routing::optimal_order(&points, self.config.closed_tour, self.config.exact_threshold);
        Ok(order.into_iter().map(|i| sorted[i]).collect())
    }

    /// Length in km of the tour in its given order.
    pub fn tour_length(&self, tour: &[PoiId]) -> Result<f64> {
        let points = tour
            .iter()
            .map(|&id| self.poi(id).map(|p| p.position()))
            .collect::<Result<Vec<_>>>()?;
        let order: Vec<usize> = (0..points.len()).collect();
        Ok(routing::tour_length(&points, &order, self.config.closed_tour))
    }

    fn mask_of(&self, indices: impl IntoIterator<Item = usize>) -> PoiMask {
        let mut mask = vec![0u64; self.pois.len().div_ceil(64)];
        for i in indices {
            mask[i / 64] |= 1 << (i % 64);
        }
        mask
    }

    /// Optimal tour length over a set of POI indices, memoized by set.
    fn optimal_length(&self, indices: &[usize]) -> f64 {
        let mask = self.mask_of(indices.iter().copied());
        if let Some(&len) = self.length_cache.lock().expect("cache lock").get(&mask) {
            return len;
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable_by_key(|&i| self.pois[i].id);
        let points: Vec<Point> = sorted.iter().map(|&i| self.pois[i].position()).collect();
        let order =
            routing::optimal_order(&points, self.config.closed_tour, self.config.exact_threshold);
        let len = routing::tour_length(&points, &order, self.config.closed_tour);
        self.length_cache.lock().expect("cache lock").insert(mask, len);
        len
    }

    /// Whether the distance-optimal trip over `indices` fits the budget.
    fn fits_budget(&self, indices: &[usize]) -> bool {
        let visit: f64 = indices.iter().map(|&i| self.pois[i].visit_duration_h).sum();
        let budget = self.config.duration_budget_h + BUDGET_EPS;
        if visit > budget {
            return false;
        }
        visit + self.optimal_length(indices) / self.config.walking_speed_kmh <= budget
    }

    fn indices(&self, trip: &TripDesign) -> Result<Vec<usize>> {
        trip.tour.iter().map(|&id| self.idx(id)).collect()
    }

    /// Checks ids exist, are unique, and that the set fits the budget.
    pub fn validate(&self, trip: &TripDesign) -> Result<()> {
        let indices = self.indices(trip)?;
        let mut seen = vec![false; self.pois.len()];
        for (&i, &id) in indices.iter().zip(&trip.tour) {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidState(format!("POI {id} appears twice")));
            }
        }
        if !self.fits_budget(&indices) {
            return Err(Error::InvalidState("trip exceeds the duration budget".into()));
        }
        Ok(())
    }

    pub fn trip_outcomes(&self, trip: &TripDesign) -> Result<TripOutcomes> {
        let mut out = TripOutcomes::zero(self.n_categories);
        for &id in &trip.tour {
            let p = self.poi(id)?;
            out.visit_time += p.visit_duration_h;
            out.total_cost += p.entry_cost;
            out.category_hours[p.category] += p.visit_duration_h;
        }
        out.tour_length = self.tour_length(&trip.tour)?;
        out.walking_time = out.tour_length / self.config.walking_speed_kmh;
        out.total_duration = out.walking_time + out.visit_time;
        Ok(out)
    }

    pub fn trip_utility(&self, outcomes: &TripOutcomes, params: &TripUtilityParams) -> f64 {
        trip_utility(outcomes, params, &self.config)
    }

    /// Inserts `new` where it forms the largest angle with its neighbours.
    pub fn subjective_insert(&self, tour: &[PoiId], new: PoiId) -> Result<Vec<PoiId>> {
        if tour.contains(&new) {
            return Err(Error::InvalidArgument(format!("POI {new} is already in the tour")));
        }
        let point = self.poi(new)?.position();
        let points = tour
            .iter()
            .map(|&id| self.poi(id).map(|p| p.position()))
            .collect::<Result<Vec<_>>>()?;
        let pos = max_angle_position(&points, point, self.config.closed_tour);
        let mut out = Vec::with_capacity(tour.len() + 1);
        out.extend_from_slice(&tour[..pos]);
        out.push(new);
        out.extend_from_slice(&tour[pos..]);
        Ok(out)
    }

    fn can_add(&self, current: &[usize], candidate: usize) -> bool {
        let mut grown = Vec::with_capacity(current.len() + 1);
        grown.extend_from_slice(current);
        grown.push(candidate);
        self.fits_budget(&grown)
    }
}

impl DesignDomain for TripDomain {
    type State = TripDesign;
    type Change = TripChange;
    type Outcomes = TripOutcomes;
    type Utility = TripUtilityParams;

    fn noop(&self) -> TripChange {
        TripChange::NoOp
    }

    fn legal_changes(&self, state: &TripDesign) -> Result<Vec<TripChange>> {
        self.validate(state)?;
        let current = self.indices(state)?;
        let mut in_trip = vec![false; self.pois.len()];
        for &i in &current {
            in_trip[i] = true;
        }
        let mut changes = vec![TripChange::NoOp];
        for &i in &self.by_id {
            let id = self.pois[i].id;
            if in_trip[i] {
                changes.push(TripChange::Remove(id));
            } else if self.can_add(&current, i) {
                changes.push(TripChange::Add(id));
            }
        }
        Ok(changes)
    }

    fn is_legal(&self, state: &TripDesign, change: TripChange) -> Result<bool> {
        Ok(match change {
            TripChange::NoOp => true,
            TripChange::Remove(id) => state.contains(id),
            TripChange::Add(id) => {
                let candidate = self.idx(id)?;
                !state.contains(id) && self.can_add(&self.indices(state)?, candidate)
            }
        })
    }

    fn apply(&self, state: &TripDesign, change: TripChange, dynamics: Dynamics) -> Result<TripDesign> {
        if !self.is_legal(state, change)? {
            return Err(Error::IllegalChange(format!("{change} is not legal in this trip")));
        }
        let tour = match (change, dynamics) {
            (TripChange::NoOp, _) => state.tour.clone(),
            (TripChange::Add(id), Dynamics::Subjective) => self.subjective_insert(&state.tour, id)?,
            (TripChange::Remove(id), Dynamics::Subjective) => {
                state.tour.iter().copied().filter(|&t| t != id).collect()
            }
            (TripChange::Add(id), Dynamics::Objective) => {
                let mut ids = state.tour.clone();
                ids.push(id);
                self.route_optimal(&ids)?
            }
            (TripChange::Remove(id), Dynamics::Objective) => {
                let ids: Vec<PoiId> = state.tour.iter().copied().filter(|&t| t != id).collect();
                self.route_optimal(&ids)?
            }
        };
        Ok(TripDesign { tour })
    }

    fn outcomes(&self, state: &TripDesign) -> Result<TripOutcomes> {
        self.trip_outcomes(state)
    }

    fn utility(&self, params: &TripUtilityParams, outcomes: &TripOutcomes) -> f64 {
        trip_utility(outcomes, params, &self.config)
    }

    fn initial_state(&self) -> TripDesign {
        TripDesign::empty()
    }
}
