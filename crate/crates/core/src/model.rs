//! Infrastructure state types: datasets, model parameters, the distributed
//! snapshot, protocol events and traces, and the neighboring-dataset
//! relations.
//!
//! Everything here is an immutable value; transitions build new states rather
//! than mutating old ones, so states can be shared freely across workers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rat::{format_rational, serde_rational, ParseRationalError};

/// Actor name, ordered so scheduling and reports are deterministic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorId(pub String);

impl ActorId {
    pub fn new(name: impl Into<String>) -> Self {
        ActorId(name.into())
    }
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Topology node label. Locations carry no routing semantics here.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(pub String);

impl LocationId {
    pub fn new(name: impl Into<String>) -> Self {
        LocationId(name.into())
    }
}

/// One training example: input features, learning target, and a secrecy flag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataPoint {
    pub id: String,
    pub features: Vec<PointCoord>,
    #[serde(with = "serde_rational")]
    pub value: BigRational,
    #[serde(default)]
    pub secret: bool,
}

/// Feature coordinate wrapper so serde writes exact strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointCoord(#[serde(with = "serde_rational")] pub BigRational);

impl DataPoint {
    pub fn new(id: impl Into<String>, features: Vec<BigRational>, value: BigRational) -> Self {
        DataPoint {
            id: id.into(),
            features: features.into_iter().map(PointCoord).collect(),
            value,
            secret: false,
        }
    }

    pub fn secret(mut self) -> Self {
        self.secret = true;
        self
    }

    pub fn feature_values(&self) -> impl Iterator<Item = &BigRational> {
        self.features.iter().map(|c| &c.0)
    }

    /// Content identity used by the set operations: id, features, and value.
    /// The secrecy flag is bookkeeping, not data.
    fn content(&self) -> (&str, &[PointCoord], &BigRational) {
        (&self.id, &self.features, &self.value)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("duplicate point id `{0}`")]
    DuplicateId(String),
    #[error("point `{id}` has {got} features, expected {expected}")]
    FeatureLength {
        id: String,
        got: usize,
        expected: usize,
    },
}

/// A finite set of data points, keyed by id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Dataset {
    points: BTreeMap<String, DataPoint>,
}

impl Dataset {
    pub fn empty() -> Self {
        Dataset::default()
    }

    /// Build from points, rejecting duplicate ids and ragged feature vectors.
    pub fn new(points: impl IntoIterator<Item = DataPoint>) -> Result<Self, DatasetError> {
        let mut map = BTreeMap::new();
        let mut width: Option<usize> = None;
        for p in points {
            match width {
                None => width = Some(p.features.len()),
                Some(w) if w != p.features.len() => {
                    return Err(DatasetError::FeatureLength {
                        id: p.id.clone(),
                        got: p.features.len(),
                        expected: w,
                    })
                }
                Some(_) => {}
            }
            let id = p.id.clone();
            if map.insert(id.clone(), p).is_some() {
                return Err(DatasetError::DuplicateId(id));
            }
        }
        Ok(Dataset { points: map })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &DataPoint> {
        self.points.values()
    }

    pub fn get(&self, id: &str) -> Option<&DataPoint> {
        self.points.get(id)
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.points.contains_key(id)
    }

    /// Dataset without the given point id.
    pub fn without(&self, id: &str) -> Dataset {
        let mut points = self.points.clone();
        points.remove(id);
        Dataset { points }
    }

    /// Feature width, if the set is nonempty.
    pub fn feature_width(&self) -> Option<usize> {
        self.points.values().next().map(|p| p.features.len())
    }

    /// Ids whose presence or content differs between the two sets.
    pub fn differing_ids(&self, other: &Dataset) -> Vec<String> {
        let mut ids: BTreeSet<&String> = self.points.keys().collect();
        ids.extend(other.points.keys());
        ids.into_iter()
            .filter(|id| {
                match (self.points.get(*id), other.points.get(*id)) {
                    (Some(a), Some(b)) => a.content() != b.content(),
                    _ => true,
                }
            })
            .cloned()
            .collect()
    }

    /// Disjoint union of partitions; fails on id overlap.
    pub fn disjoint_union<'a>(
        parts: impl IntoIterator<Item = &'a Dataset>,
    ) -> Result<Dataset, DatasetError> {
        let mut map = BTreeMap::new();
        for part in parts {
            for p in part.points() {
                if map.insert(p.id.clone(), p.clone()).is_some() {
                    return Err(DatasetError::DuplicateId(p.id.clone()));
                }
            }
        }
        Ok(Dataset { points: map })
    }
}

impl Serialize for Dataset {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(self.points.values())
    }
}

impl<'de> Deserialize<'de> for Dataset {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let points = Vec::<DataPoint>::deserialize(de)?;
        Dataset::new(points).map_err(serde::de::Error::custom)
    }
}

/// True iff the datasets differ in exactly one point: one id whose presence
/// or content (features, value) is not the same on both sides.
pub fn neighbors_one(a: &Dataset, b: &Dataset) -> bool {
    a.differing_ids(b).len() == 1
}

/// True iff the symmetric difference is exactly `{x}`: one side holds `x`
/// verbatim, the other has no point with that id, and everything else agrees.
pub fn neighbors_x(a: &Dataset, b: &Dataset, x: &DataPoint) -> bool {
    let diff = a.differing_ids(b);
    if diff.len() != 1 || diff[0] != x.id {
        return false;
    }
    match (a.get(&x.id), b.get(&x.id)) {
        (Some(p), None) | (None, Some(p)) => p.content() == x.content(),
        _ => false,
    }
}

/// A model-parameter vector (the `w` and gradient values), dimension ≥ 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelParam {
    coords: Vec<BigRational>,
}

impl ModelParam {
    pub fn new(coords: Vec<BigRational>) -> Self {
        assert!(!coords.is_empty(), "model parameter needs dimension >= 1");
        ModelParam { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        use num_traits::Zero;
        ModelParam::new(vec![BigRational::zero(); dim])
    }

    pub fn scalar(value: BigRational) -> Self {
        ModelParam::new(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<BigRational> {
        self.coords
    }

    /// Comma-joined exact coordinate strings, the outcome key format.
    pub fn key(&self) -> String {
        self.coords
            .iter()
            .map(format_rational)
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Inverse of [`ModelParam::key`].
    pub fn parse_key(key: &str) -> Result<Self, ParseRationalError> {
        let coords = key
            .split(',')
            .map(crate::rat::parse_rational)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ModelParam::new(coords))
    }
}

impl fmt::Display for ModelParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.key())
    }
}

/// Protocol events, one per transition rule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    /// Initial deployment of the partitioned global dataset.
    Put(BTreeMap<ActorId, Dataset>),
    /// A client's (possibly noisy) gradient release.
    Get { client: ActorId, grad: ModelParam },
    /// Server aggregation into a new current model parameter.
    Eval(ModelParam),
}

/// A finite execution trace, stored newest event first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Trace {
    events: Vec<Event>,
}

impl Trace {
    pub fn empty() -> Self {
        Trace::default()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Newest-first, matching the internal storage order.
    pub fn newest_first(&self) -> impl Iterator<Item = &Event> {
        self.events.iter()
    }

    /// Oldest-first view for checking round structure.
    pub fn chronological(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().rev()
    }

    /// New trace with `event` prefixed as the newest entry.
    pub fn extended(&self, event: Event) -> Trace {
        let mut events = Vec::with_capacity(self.events.len() + 1);
        events.push(event);
        events.extend(self.events.iter().cloned());
        Trace { events }
    }

    pub fn count_put(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Put(_)))
            .count()
    }

    pub fn count_eval(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Eval(_)))
            .count()
    }

    /// Checks the chronological shape `Put (Get^{n_clients} Eval)*`, with the
    /// Get clients of each round pairwise distinct, allowing a final
    /// incomplete round.
    pub fn is_well_formed(&self, n_clients: usize) -> bool {
        let mut chron = self.chronological();
        if self.is_empty() {
            return true;
        }
        match chron.next() {
            Some(Event::Put(_)) => {}
            _ => return false,
        }
        let mut round_clients: BTreeSet<&ActorId> = BTreeSet::new();
        for event in chron {
            match event {
                Event::Put(_) => return false,
                Event::Get { client, .. } => {
                    if round_clients.len() == n_clients || !round_clients.insert(client) {
                        return false;
                    }
                }
                Event::Eval(_) => {
                    if round_clients.len() != n_clients {
                        return false;
                    }
                    round_clients.clear();
                }
            }
        }
        true
    }
}

/// The distributed-system snapshot: topology, actors, per-client gradients,
/// current model parameter, and the data distribution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IGraph {
    pub locations: BTreeSet<LocationId>,
    pub aloc: BTreeMap<ActorId, LocationId>,
    pub server: ActorId,
    pub clients: BTreeSet<ActorId>,
    pub ready: BTreeSet<ActorId>,
    pub gradient: BTreeMap<ActorId, ModelParam>,
    pub curmodpar: ModelParam,
    pub partition: BTreeMap<ActorId, Dataset>,
    pub dataset: Dataset,
}

impl IGraph {
    /// Snapshot with every client's gradient zeroed and the planned
    /// partition in place; `dataset` is the disjoint union of the parts.
    pub fn with_partition_plan(
        server: ActorId,
        partition: BTreeMap<ActorId, Dataset>,
        curmodpar: ModelParam,
    ) -> Result<Self, DatasetError> {
        let dataset = Dataset::disjoint_union(partition.values())?;
        let clients: BTreeSet<ActorId> = partition.keys().cloned().collect();
        let dim = curmodpar.dim();
        let mut locations = BTreeSet::new();
        let mut aloc = BTreeMap::new();
        let server_loc = LocationId::new(format!("loc_{server}"));
        locations.insert(server_loc.clone());
        aloc.insert(server.clone(), server_loc);
        for c in &clients {
            let loc = LocationId::new(format!("loc_{c}"));
            locations.insert(loc.clone());
            aloc.insert(c.clone(), loc);
        }
        Ok(IGraph {
            locations,
            aloc,
            server,
            gradient: clients
                .iter()
                .map(|c| (c.clone(), ModelParam::zeros(dim)))
                .collect(),
            clients,
            ready: BTreeSet::new(),
            curmodpar,
            partition,
            dataset,
        })
    }
}

/// Structural invariant check. Violations are data, not errors: the list is
/// empty exactly when the snapshot is well formed.
pub fn validate_igraph(g: &IGraph) -> Vec<String> {
    let mut violations = Vec::new();
    if g.clients.contains(&g.server) {
        violations.push("server in clients".to_string());
    }
    if !g.ready.is_subset(&g.clients) {
        violations.push("ready not a subset of clients".to_string());
    }
    let clients: BTreeSet<&ActorId> = g.clients.iter().collect();
    let grad_domain: BTreeSet<&ActorId> = g.gradient.keys().collect();
    if grad_domain != clients {
        violations.push("gradient domain differs from clients".to_string());
    }
    let part_domain: BTreeSet<&ActorId> = g.partition.keys().collect();
    if part_domain != clients {
        violations.push("partition domain differs from clients".to_string());
    }
    for (actor, loc) in &g.aloc {
        if !g.locations.contains(loc) {
            violations.push(format!("actor {actor} allocated to unknown location"));
        }
    }
    // Pairwise disjointness is unconditional; the union check only applies
    // once a partition plan is present (all-empty partitions precede Put).
    let mut seen: BTreeMap<&str, &ActorId> = BTreeMap::new();
    let mut overlap = false;
    for (client, part) in &g.partition {
        for p in part.points() {
            if let Some(other) = seen.insert(&p.id, client) {
                if other != client {
                    overlap = true;
                }
            }
        }
    }
    if overlap {
        violations.push("partitions not disjoint".to_string());
    }
    let any_assigned = g.partition.values().any(|p| !p.is_empty());
    if any_assigned && !overlap {
        match Dataset::disjoint_union(g.partition.values()) {
            Ok(union) if union != g.dataset => {
                violations.push("partition union differs from dataset".to_string());
            }
            Ok(_) => {}
            Err(_) => violations.push("partitions not disjoint".to_string()),
        }
    }
    let mut widths: BTreeSet<usize> = g
        .partition
        .values()
        .filter_map(|p| p.feature_width())
        .collect();
    widths.extend(g.dataset.feature_width());
    if widths.len() > 1 {
        violations.push("inconsistent feature width across datasets".to_string());
    }
    violations
}

/// Opaque policy placeholder; carried but never exercised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Poli;

/// Protocol state: the snapshot together with the set of execution traces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Infrastructure {
    pub igra: IGraph,
    pub prot: BTreeSet<Trace>,
    pub poli: Poli,
}

impl Infrastructure {
    /// Fresh state holding only the empty trace.
    pub fn new(igra: IGraph) -> Self {
        let mut prot = BTreeSet::new();
        prot.insert(Trace::empty());
        Infrastructure {
            igra,
            prot,
            poli: Poli,
        }
    }

    /// The longest trace: along an execution the protocol set is
    /// prefix-closed, so this is the run's current history.
    pub fn current_trace(&self) -> &Trace {
        self.prot
            .iter()
            .max_by_key(|t| t.len())
            .expect("protocol set always holds the empty trace")
    }

    /// State with the current trace extended by `event`.
    pub fn with_event(&self, igra: IGraph, event: Event) -> Infrastructure {
        let mut prot = self.prot.clone();
        prot.insert(self.current_trace().extended(event));
        Infrastructure {
            igra,
            prot,
            poli: Poli,
        }
    }

    pub fn put_done(&self) -> bool {
        self.current_trace().count_put() > 0
    }

    pub fn rounds_done(&self) -> usize {
        self.current_trace().count_eval()
    }
}
