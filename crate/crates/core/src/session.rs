//! An interactive design session with a human designer.
//!
//! The session serves at most one recommendation per iteration, records
//! whether it was fetched before the designer's choice, and updates the
//! posterior from every choice. Every mutation is appended to an event log;
//! replaying the log reproduces the live state exactly.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assistant::{whatif, Assistant, AssistantConfig, WhatIfReport};
use crate::design::{DesignDomain, Dynamics};
use crate::error::{Error, Result};
use crate::trip::{City, TripChange, TripConfig, TripDesign, TripDomain, TripOutcomes, TripUtilityParams, TripUtilityPrior};
use crate::user_model::{ChoiceObservation, UserModelParams, UserModelPrior};

pub type TripObservation = ChoiceObservation<TripDesign, TripChange>;
pub type TripWhatIf = WhatIfReport<TripDesign, TripChange, TripOutcomes>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub seed: u64,
    pub trip: TripConfig,
    pub assistant: AssistantConfig,
    pub user_prior: UserModelPrior,
    pub walk_penalty_max: f64,
    /// Particles listed in the posterior summary.
    pub summary_top_k: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trip: TripConfig::default(),
            assistant: AssistantConfig::default(),
            user_prior: UserModelPrior::default(),
            walk_penalty_max: 1.0,
            summary_top_k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        city: Box<City>,
        config: SessionConfig,
    },
    RecommendationServed {
        recommendation: Option<TripChange>,
    },
    Chosen {
        change: TripChange,
        /// The recommendation the designer had seen, if any.
        recommendation: Option<TripChange>,
        request_id: Option<String>,
    },
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSummary {
    pub weight: f64,
    pub utility: TripUtilityParams,
    pub user: UserModelParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub entropy: f64,
    pub ess: f64,
    pub n_particles: usize,
    pub top_particles: Vec<ParticleSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub iteration: usize,
    pub trip: TripDesign,
    pub outcomes: TripOutcomes,
    pub legal_changes: Vec<TripChange>,
    pub posterior: PosteriorSummary,
    /// Recommendation served for the current iteration and not yet consumed.
    pub recommendation: Option<TripChange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecommendationView {
    Change { change: TripChange, whatif: Box<TripWhatIf> },
    Nothing { no_recommendation: bool },
}

pub struct Session {
    id: String,
    city: City,
    config: SessionConfig,
    domain: TripDomain,
    trip: TripDesign,
    assistant: Assistant<TripDomain, TripUtilityPrior>,
    history: Vec<TripObservation>,
    /// `Some(r)` once a recommendation (possibly "none") was served this iteration.
    served: Option<Option<TripChange>>,
    requests: HashSet<String>,
    events: Vec<EventRecord>,
    sink: Option<BufWriter<File>>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("trip", &self.trip)
            .field("history", &self.history.len())
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn create(id: impl Into<String>, city: City, config: SessionConfig) -> Result<Self> {
        let id = id.into();
        let domain = TripDomain::new(&city, config.trip.clone())?;
        let prior = TripUtilityPrior {
            n_categories: domain.n_categories(),
            walk_penalty_max: config.walk_penalty_max,
        };
        let assistant = Assistant::new(prior, config.user_prior.clone(), config.assistant.clone(), config.seed)?;
        let mut session = Self {
            id: id.clone(),
            city: city.clone(),
            config: config.clone(),
            trip: domain.initial_state(),
            domain,
            assistant,
            history: Vec::new(),
            served: None,
            requests: HashSet::new(),
            events: Vec::new(),
            sink: None,
        };
        session.record(SessionEvent::Created {
            session_id: id,
            city: Box::new(city),
            config,
        })?;
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn trip(&self) -> &TripDesign {
        &self.trip
    }

    pub fn domain(&self) -> &TripDomain {
        &self.domain
    }

    pub fn city(&self) -> &City {
        &self.city
    }

    pub fn history(&self) -> &[TripObservation] {
        &self.history
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn assistant(&self) -> &Assistant<TripDomain, TripUtilityPrior> {
        &self.assistant
    }

    fn record(&mut self, event: SessionEvent) -> Result<()> {
        let record = EventRecord {
            seq: self.events.len() as u64,
            event,
        };
        if let Some(sink) = self.sink.as_mut() {
            serde_json::to_writer(&mut *sink, &record)?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.events.push(record);
        Ok(())
    }

    /// Appends every event so far, and all later ones, to `path`.
    pub fn persist_to(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let mut sink = BufWriter::new(File::options().create(true).append(true).open(path)?);
        for record in &self.events {
            serde_json::to_writer(&mut sink, record)?;
            sink.write_all(b"\n")?;
        }
        sink.flush()?;
        self.sink = Some(sink);
        Ok(())
    }

    /// Appends later events to `path`, which already holds the earlier ones
    /// (e.g. the log this session was replayed from).
    pub fn resume_log(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.sink = Some(BufWriter::new(File::options().append(true).open(path)?));
        Ok(())
    }

    pub fn legal_changes(&self) -> Result<Vec<TripChange>> {
        self.domain.legal_changes(&self.trip)
    }

    pub fn posterior_summary(&self) -> PosteriorSummary {
        let ps = self.assistant.posterior();
        let mut order: Vec<usize> = (0..ps.len()).collect();
        order.sort_by(|&a, &b| {
            ps.particles()[b].log_weight.total_cmp(&ps.particles()[a].log_weight).then(a.cmp(&b))
        });
        PosteriorSummary {
            entropy: ps.entropy(),
            ess: ps.ess(),
            n_particles: ps.len(),
            top_particles: order
                .into_iter()
                .take(self.config.summary_top_k)
                .map(|i| {
                    let p = &ps.particles()[i];
                    ParticleSummary {
                        weight: p.log_weight.exp(),
                        utility: p.utility.clone(),
                        user: p.user.clone(),
                    }
                })
                .collect(),
        }
    }

    pub fn view(&self) -> Result<SessionView> {
        Ok(SessionView {
            session_id: self.id.clone(),
            iteration: self.history.len(),
            trip: self.trip.clone(),
            outcomes: self.domain.trip_outcomes(&self.trip)?,
            legal_changes: self.legal_changes()?,
            posterior: self.posterior_summary(),
            recommendation: self.served.flatten(),
        })
    }

    /// The recommendation for the current iteration. Repeated calls within an
    /// iteration return the same recommendation.
    pub fn recommendation(&mut self) -> Result<RecommendationView> {
        let rec = match self.served {
            Some(rec) => rec,
            None => {
                let rec = self.assistant.recommend(&self.domain, &self.trip)?;
                self.record(SessionEvent::RecommendationServed { recommendation: rec })?;
                self.served = Some(rec);
                rec
            }
        };
        match rec {
            Some(change) => Ok(RecommendationView::Change {
                change,
                whatif: Box::new(self.whatif(change)?),
            }),
            None => Ok(RecommendationView::Nothing {
                no_recommendation: true,
            }),
        }
    }

    pub fn whatif(&self, change: TripChange) -> Result<TripWhatIf> {
        whatif(&self.domain, self.assistant.posterior(), &self.trip, change)
    }

    /// Applies the designer's change and learns from it. Replaying a
    /// `request_id` that was already processed changes nothing.
    pub fn choose(&mut self, change: TripChange, request_id: Option<String>) -> Result<SessionView> {
        if let Some(id) = &request_id {
            if self.requests.contains(id) {
                return self.view();
            }
        }
        if !self.domain.is_legal(&self.trip, change)? {
            return Err(Error::IllegalChange(format!("{change} is not legal in the current trip")));
        }
        let recommendation = self.served.flatten();
        self.apply_choice(change, recommendation)?;
        if let Some(id) = &request_id {
            self.requests.insert(id.clone());
        }
        self.record(SessionEvent::Chosen {
            change,
            recommendation,
            request_id,
        })?;
        self.view()
    }

    fn apply_choice(&mut self, change: TripChange, recommendation: Option<TripChange>) -> Result<()> {
        let obs = ChoiceObservation {
            state_before: self.trip.clone(),
            recommendation,
            chosen: change,
        };
        let next = self.domain.apply(&self.trip, change, Dynamics::Objective)?;
        self.assistant.observe(&self.domain, &obs)?;
        self.history.push(obs);
        self.trip = next;
        self.served = None;
        Ok(())
    }

    /// Rebuilds a session from its event log.
    pub fn replay(events: &[EventRecord]) -> Result<Self> {
        let mut iter = events.iter();
        let mut session = match iter.next().map(|r| &r.event) {
            Some(SessionEvent::Created {
                session_id,
                city,
                config,
            }) => Session::create(session_id.clone(), (**city).clone(), config.clone())?,
            _ => return Err(Error::Format("event log must start with a created event".into())),
        };
        for (expected, record) in (1u64..).zip(iter) {
            if record.seq != expected {
                return Err(Error::Format(format!(
                    "event log sequence gap: expected {expected}, found {}",
                    record.seq
                )));
            }
            match &record.event {
                SessionEvent::Created { .. } => {
                    return Err(Error::Format("duplicate created event".into()));
                }
                SessionEvent::RecommendationServed { recommendation } => {
                    session.served = Some(*recommendation);
                    session.record(record.event.clone())?;
                }
                SessionEvent::Chosen {
                    change,
                    recommendation,
                    request_id,
                } => {
                    session.apply_choice(*change, *recommendation)?;
                    if let Some(id) = request_id {
                        session.requests.insert(id.clone());
                    }
                    session.record(record.event.clone())?;
                }
            }
        }
        Ok(session)
    }

    pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<EventRecord>> {
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line)?);
        }
        Ok(out)
    }
}
