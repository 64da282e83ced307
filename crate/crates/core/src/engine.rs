//! The two-stroke execution engine.
//!
//! A network is a sparse rank-6 weight tensor over the index hierarchy
//! (type, neuron, input) × (type, neuron, output), stored as a depth-6
//! prefix-tree vector. One step alternates the down movement — the matrix
//! applied to all neuron outputs, producing all neuron inputs — and the up
//! movement — each neuron's activation applied to its input. A designated
//! Self output may then be adopted as the next network matrix, which is how
//! a running network modifies itself.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activations::{NeuronTypeRegistry, PORT_SINGLE};
use crate::vspace::{PTVector, Path, Token, TokenError, DEFAULT_EPSILON};
use crate::EngineRng;

/// Identifies a neuron: its type name plus its own name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NeuronId {
    pub type_name: Token,
    pub neuron: Token,
}

impl NeuronId {
    pub fn new(type_name: Token, neuron: Token) -> Self {
        NeuronId { type_name, neuron }
    }

    pub fn parse(text: &str) -> Result<Self, AddressError> {
        let parts: Vec<&str> = text.split('/').collect();
        match parts.as_slice() {
            [t, n] => Ok(NeuronId::new(parse_token(text, t)?, parse_token(text, n)?)),
            _ => Err(AddressError::Shape {
                text: text.to_string(),
                expected: "type/neuron",
            }),
        }
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.type_name, self.neuron)
    }
}

/// Identifies one port of one neuron: an input or output name under a
/// (type, neuron) pair. Written `type/neuron/port`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NeuronAddress {
    pub type_name: Token,
    pub neuron: Token,
    pub port: Token,
}

impl NeuronAddress {
    pub fn new(type_name: Token, neuron: Token, port: Token) -> Self {
        NeuronAddress {
            type_name,
            neuron,
            port,
        }
    }

    /// Convenience constructor from string parts.
    pub fn from_strs(type_name: &str, neuron: &str, port: &str) -> Result<Self, TokenError> {
        Ok(NeuronAddress::new(
            Token::new(type_name)?,
            Token::new(neuron)?,
            Token::new(port)?,
        ))
    }

    pub fn id(&self) -> NeuronId {
        NeuronId::new(self.type_name.clone(), self.neuron.clone())
    }
}

impl fmt::Display for NeuronAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.type_name, self.neuron, self.port)
    }
}

fn parse_token(text: &str, part: &str) -> Result<Token, AddressError> {
    Token::new(part).map_err(|source| AddressError::Token {
        text: text.to_string(),
        source,
    })
}

impl FromStr for NeuronAddress {
    type Err = AddressError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = text.split('/').collect();
        match parts.as_slice() {
            [t, n, p] => Ok(NeuronAddress::new(
                parse_token(text, t)?,
                parse_token(text, n)?,
                parse_token(text, p)?,
            )),
            _ => Err(AddressError::Shape {
                text: text.to_string(),
                expected: "type/neuron/port",
            }),
        }
    }
}

impl Serialize for NeuronAddress {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NeuronAddress {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("address `{text}` must have the form `{expected}`")]
    Shape {
        text: String,
        expected: &'static str,
    },
    #[error("address `{text}`: {source}")]
    Token { text: String, source: TokenError },
}

/// Raised when a weight tensor contains a path whose length is not 6.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("matrix path `{path}` has length {len}; every weight path must have length 6")]
pub struct MatrixDepthError {
    pub path: Path,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("unknown neuron type `{0}`")]
    UnknownNeuronType(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// The network matrix: a prefix-tree vector whose nonzero paths all have
/// length exactly 6, ordered (type, neuron, input, type, neuron, output).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkMatrix {
    weights: PTVector,
}

/// Weight path from a destination input port to a source output port.
pub fn weight_path(to: &NeuronAddress, from: &NeuronAddress) -> Path {
    Path::new(vec![
        to.type_name.clone(),
        to.neuron.clone(),
        to.port.clone(),
        from.type_name.clone(),
        from.neuron.clone(),
        from.port.clone(),
    ])
}

impl NetworkMatrix {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Validates that every nonzero path has length exactly 6.
    pub fn new(weights: PTVector) -> Result<Self, MatrixDepthError> {
        for (path, _) in weights.terms() {
            if path.len() != 6 {
                let len = path.len();
                return Err(MatrixDepthError { path, len });
            }
        }
        Ok(NetworkMatrix { weights })
    }

    /// Builds a matrix from `(to, from, weight)` entries; depth-valid by
    /// construction.
    pub fn from_entries<'a>(
        entries: impl IntoIterator<Item = (&'a NeuronAddress, &'a NeuronAddress, f64)>,
    ) -> Self {
        NetworkMatrix {
            weights: PTVector::from_terms(
                entries
                    .into_iter()
                    .map(|(to, from, w)| (weight_path(to, from), w)),
            ),
        }
    }

    pub fn as_vector(&self) -> &PTVector {
        &self.weights
    }

    pub fn into_vector(self) -> PTVector {
        self.weights
    }

    pub fn weight(&self, to: &NeuronAddress, from: &NeuronAddress) -> f64 {
        self.weights.coefficient(&weight_path(to, from))
    }

    pub fn set_weight(&mut self, to: &NeuronAddress, from: &NeuronAddress, value: f64) {
        self.weights = self.weights.with_coefficient(&weight_path(to, from), value);
    }

    pub fn weight_count(&self) -> usize {
        self.weights.term_count()
    }

    /// Neurons owning at least one nonzero matrix row, with per-group sizes.
    pub fn row_groups(&self) -> BTreeMap<NeuronId, RowGroup> {
        let mut groups = BTreeMap::new();
        for (type_name, per_type) in self.weights.children() {
            for (neuron, per_neuron) in per_type.children() {
                groups.insert(
                    NeuronId::new(type_name.clone(), neuron.clone()),
                    RowGroup {
                        inputs: per_neuron.child_count(),
                        weights: per_neuron.term_count(),
                    },
                );
            }
        }
        groups
    }

    /// Neurons referenced as sources by at least one nonzero weight.
    pub fn column_groups(&self) -> BTreeSet<NeuronId> {
        let mut groups = BTreeSet::new();
        for (path, _) in self.weights.terms() {
            let tokens = path.tokens();
            groups.insert(NeuronId::new(tokens[3].clone(), tokens[4].clone()));
        }
        groups
    }

    /// Neurons with at least one nonzero weight associated with them, as
    /// a row or as a column.
    pub fn active_neurons(&self) -> BTreeSet<NeuronId> {
        let mut active: BTreeSet<NeuronId> = self.row_groups().into_keys().collect();
        active.extend(self.column_groups());
        active
    }
}

/// Size of one matrix row group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowGroup {
    pub inputs: usize,
    pub weights: usize,
}

pub type OutputMap = BTreeMap<NeuronId, PTVector>;

/// The down movement: applies the network matrix to all neuron outputs,
/// producing the inputs for the next up movement.
///
/// For every neuron with a nonzero matrix row, each input port's value is
/// the linear combination of the addressed output subtrees weighted by the
/// row's entries. Neurons with all-zero rows are absent from the result;
/// absent source outputs contribute zero.
pub fn down_movement(matrix: &NetworkMatrix, outputs: &OutputMap, epsilon: f64) -> OutputMap {
    let mut inputs = OutputMap::new();
    for (type_name, per_type) in matrix.as_vector().children() {
        for (neuron, per_neuron) in per_type.children() {
            let mut gathered = PTVector::zero();
            for (port, row) in per_neuron.children() {
                let mut pairs: Vec<(f64, &PTVector)> = Vec::new();
                for (src_type, per_src_type) in row.children() {
                    for (src_neuron, per_src) in per_src_type.children() {
                        let id = NeuronId::new(src_type.clone(), src_neuron.clone());
                        let Some(source) = outputs.get(&id) else {
                            continue;
                        };
                        for (out_port, leaf) in per_src.children() {
                            pairs.push((leaf.scalar(), source.subtree(out_port)));
                        }
                    }
                }
                gathered = gathered.attach(port, PTVector::linear_combination_eps(pairs, epsilon));
            }
            inputs.insert(NeuronId::new(type_name.clone(), neuron.clone()), gathered);
        }
    }
    inputs
}

/// The up movement: applies each neuron's activation transform to its input,
/// for exactly the neurons present in the input map.
///
/// Every type name is resolved before any transform runs, so an unknown
/// type fails the whole movement without partial effects.
pub fn up_movement(
    registry: &NeuronTypeRegistry,
    inputs: &OutputMap,
    rng: &mut EngineRng,
) -> Result<OutputMap, EngineError> {
    for id in inputs.keys() {
        if !registry.contains(id.type_name.as_str()) {
            return Err(EngineError::UnknownNeuronType(id.type_name.to_string()));
        }
    }
    let mut outputs = OutputMap::new();
    for (id, input) in inputs {
        let neuron_type = registry.get(id.type_name.as_str()).expect("resolved above");
        outputs.insert(id.clone(), neuron_type.apply(input, rng));
    }
    Ok(outputs)
}

/// Values for an externally driven neuron, one output vector per time step.
/// Steps beyond the end of the list read as zero.
#[derive(Debug, Clone, Default)]
pub struct InputFeed {
    values: Vec<PTVector>,
}

impl InputFeed {
    pub fn new(values: Vec<PTVector>) -> Self {
        InputFeed { values }
    }

    pub fn value_at(&self, step: u64) -> PTVector {
        usize::try_from(step)
            .ok()
            .and_then(|i| self.values.get(i).cloned())
            .unwrap_or_default()
    }
}

/// What happened to the network matrix during one step.
#[derive(Debug, Clone, PartialEq)]
pub enum SelfUpdate {
    /// No Self output is designated; the matrix is static.
    Disabled,
    /// The designated output was adopted as the new matrix.
    Applied { weights: usize },
    /// The designated neuron produced no output this step; matrix unchanged.
    SourceMissing,
    /// The designated output was not a valid depth-6 matrix; it was rejected
    /// and the previous matrix kept.
    Rejected(MatrixDepthError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Step counter after this step.
    pub step: u64,
    pub self_update: SelfUpdate,
}

/// One traced value: the vector at an output address after a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub address: NeuronAddress,
    pub value: PTVector,
}

#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub records: Vec<TraceRecord>,
    pub outcomes: Vec<StepOutcome>,
}

impl RunLog {
    /// Steps whose self-update was rejected, with the rejection reason.
    pub fn rejections(&self) -> Vec<(u64, &MatrixDepthError)> {
        self.outcomes
            .iter()
            .filter_map(|o| match &o.self_update {
                SelfUpdate::Rejected(e) => Some((o.step, e)),
                _ => None,
            })
            .collect()
    }
}

/// A complete network: matrix, current outputs, registry, optional Self
/// designation, external feeds, and the seeded random source.
#[derive(Debug)]
pub struct EngineState {
    matrix: NetworkMatrix,
    outputs: OutputMap,
    registry: NeuronTypeRegistry,
    self_address: Option<NeuronAddress>,
    feeds: BTreeMap<NeuronId, InputFeed>,
    seeded: BTreeSet<NeuronId>,
    epsilon: f64,
    step_count: u64,
    rng: EngineRng,
}

impl EngineState {
    pub fn new(matrix: NetworkMatrix, registry: NeuronTypeRegistry) -> Self {
        EngineState {
            matrix,
            outputs: OutputMap::new(),
            registry,
            self_address: None,
            feeds: BTreeMap::new(),
            seeded: BTreeSet::new(),
            epsilon: DEFAULT_EPSILON,
            step_count: 0,
            rng: EngineRng::seed_from_u64(0),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng = EngineRng::seed_from_u64(seed);
        self
    }

    /// Pruning tolerance used by the down movement; must be positive.
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Designates the output whose latest value becomes the network matrix
    /// after every step.
    pub fn with_self_address(mut self, address: NeuronAddress) -> Self {
        self.self_address = Some(address);
        self
    }

    /// Seeds a neuron's current output.
    pub fn set_output(&mut self, id: NeuronId, value: PTVector) {
        self.seeded.insert(id.clone());
        if value.is_zero() {
            self.outputs.remove(&id);
        } else {
            self.outputs.insert(id, value);
        }
    }

    /// Drives a neuron's output from a per-step schedule. The value for the
    /// current step is installed immediately.
    pub fn add_feed(&mut self, id: NeuronId, feed: InputFeed) {
        let current = feed.value_at(self.step_count);
        self.feeds.insert(id.clone(), feed);
        self.set_output(id, current);
    }

    pub fn matrix(&self) -> &NetworkMatrix {
        &self.matrix
    }

    pub fn outputs(&self) -> &OutputMap {
        &self.outputs
    }

    pub fn registry(&self) -> &NeuronTypeRegistry {
        &self.registry
    }

    pub fn self_address(&self) -> Option<&NeuronAddress> {
        self.self_address.as_ref()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn output(&self, id: &NeuronId) -> &PTVector {
        match self.outputs.get(id) {
            Some(value) => value,
            None => PTVector::zero_ref(),
        }
    }

    /// The vector currently on one output port.
    pub fn port_value(&self, address: &NeuronAddress) -> &PTVector {
        self.output(&address.id()).subtree(&address.port)
    }

    /// Sets one connection weight, from an output port to an input port.
    /// A zero weight deletes the connection.
    pub fn set_weight(&mut self, from: &NeuronAddress, to: &NeuronAddress, value: f64) {
        self.matrix.set_weight(to, from, value);
    }

    /// Count of neurons currently holding a nonzero output.
    pub fn nonzero_output_count(&self) -> usize {
        self.outputs.len()
    }

    /// One two-stroke cycle: down movement with the current matrix, up
    /// movement, then the Self update.
    ///
    /// The down movement reads only the previous outputs and the up movement
    /// reads only the freshly computed inputs; there is no in-step
    /// propagation. If the designated Self output is present and depth-valid
    /// it becomes the new matrix; a malformed value is rejected and the
    /// previous matrix kept. Outputs of neurons that were neither recomputed
    /// nor remain referenced as matrix sources are dropped, keeping the
    /// active part of the network finite.
    pub fn step(&mut self) -> Result<StepOutcome, EngineError> {
        let inputs = down_movement(&self.matrix, &self.outputs, self.epsilon);
        let fresh = up_movement(&self.registry, &inputs, &mut self.rng)?;
        let recomputed: BTreeSet<NeuronId> = fresh.keys().cloned().collect();

        let self_update = match &self.self_address {
            None => SelfUpdate::Disabled,
            Some(address) => match fresh.get(&address.id()) {
                None => SelfUpdate::SourceMissing,
                Some(output) => {
                    let candidate = output.subtree(&address.port).clone();
                    match NetworkMatrix::new(candidate) {
                        Ok(matrix) => {
                            let weights = matrix.weight_count();
                            self.matrix = matrix;
                            SelfUpdate::Applied { weights }
                        }
                        Err(e) => SelfUpdate::Rejected(e),
                    }
                }
            },
        };

        let columns = self.matrix.column_groups();
        let mut next = fresh;
        for (id, value) in std::mem::take(&mut self.outputs) {
            if !next.contains_key(&id) && columns.contains(&id) {
                next.insert(id, value);
            }
        }
        self.step_count += 1;
        for (id, feed) in &self.feeds {
            next.insert(id.clone(), feed.value_at(self.step_count));
        }
        next.retain(|_, v| !v.is_zero());
        self.outputs = next;

        debug_assert!(
            self.outputs.len() <= recomputed.len() + columns.len() + self.seeded.len(),
            "active part must stay finite and bounded by the matrix support"
        );

        Ok(StepOutcome {
            step: self.step_count,
            self_update,
        })
    }

    /// Applies [`EngineState::step`] `steps` times, recording the vector at
    /// each traced output address after every step.
    pub fn run(&mut self, steps: u64, traced: &[NeuronAddress]) -> Result<RunLog, EngineError> {
        let mut log = RunLog::default();
        for _ in 0..steps {
            let outcome = self.step()?;
            for address in traced {
                log.records.push(TraceRecord {
                    step: self.step_count,
                    address: address.clone(),
                    value: self.port_value(address).clone(),
                });
            }
            log.outcomes.push(outcome);
        }
        Ok(log)
    }
}

/// Builds a classic recurrent net as a network over scalar streams: `k`
/// nonlinearity neurons `h1..hk` and `m` externally fed input neurons
/// `in1..inm` of type `identity`.
///
/// `recurrent` is the k×k hidden-to-hidden weight matrix, `input_weights`
/// the k×m input-to-hidden matrix, and `input_streams` one scalar sequence
/// per input neuron. Hidden state starts at zero.
pub fn build_rnn(
    recurrent: &[Vec<f64>],
    input_weights: &[Vec<f64>],
    nonlinearity: &str,
    input_streams: &[Vec<f64>],
    seed: u64,
) -> Result<EngineState, EngineError> {
    let k = recurrent.len();
    let m = input_streams.len();
    for (j, row) in recurrent.iter().enumerate() {
        if row.len() != k {
            return Err(EngineError::Dimension(format!(
                "recurrent row {j} has {} entries, expected {k}",
                row.len()
            )));
        }
    }
    if input_weights.len() != k {
        return Err(EngineError::Dimension(format!(
            "input weight matrix has {} rows, expected {k}",
            input_weights.len()
        )));
    }
    for (j, row) in input_weights.iter().enumerate() {
        if row.len() != m {
            return Err(EngineError::Dimension(format!(
                "input weight row {j} has {} entries, expected {m}",
                row.len()
            )));
        }
    }
    let registry = NeuronTypeRegistry::with_builtins();
    if !registry.contains(nonlinearity) {
        return Err(EngineError::UnknownNeuronType(nonlinearity.to_string()));
    }

    let hidden = |j: usize| {
        NeuronAddress::from_strs(nonlinearity, &format!("h{}", j + 1), PORT_SINGLE)
            .expect("generated names are valid tokens")
    };
    let input = |s: usize| {
        NeuronAddress::from_strs("identity", &format!("in{}", s + 1), PORT_SINGLE)
            .expect("generated names are valid tokens")
    };

    let mut entries: Vec<(NeuronAddress, NeuronAddress, f64)> = Vec::new();
    for j in 0..k {
        for l in 0..k {
            entries.push((hidden(j), hidden(l), recurrent[j][l]));
        }
        for s in 0..m {
            entries.push((hidden(j), input(s), input_weights[j][s]));
        }
    }
    let matrix = NetworkMatrix::from_entries(entries.iter().map(|(t, f, w)| (t, f, *w)));

    let mut state = EngineState::new(matrix, registry).with_seed(seed);
    for (s, stream) in input_streams.iter().enumerate() {
        let values = stream
            .iter()
            .map(|&x| crate::activations::single_output(PTVector::from_scalar(x)))
            .collect();
        state.add_feed(input(s).id(), InputFeed::new(values));
    }
    Ok(state)
}
