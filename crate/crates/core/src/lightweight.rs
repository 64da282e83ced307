//! Lightweight self-modifying systems over fixed-size matrices.
//!
//! Instead of a countable network with finitely many nonzero weights, take
//! M+N streams `X¹..X^M, Y¹..Y^N` whose values are all M×N real matrices.
//! Stream `Y¹` is the connectivity matrix `A`: one step computes
//! `Xⁱ ← Σⱼ a_{i,j}·Yʲ` and then `Yʲ ← fʲ(X¹..X^M)`, so the next `Y¹` is
//! both an output of the system and the matrix that drives it.
//!
//! [`build_wave_example`] constructs the classic demonstration where three
//! constant update matrices chase a single 1 around row 2 of the
//! connectivity matrix with period 3.

use std::fmt;

use thiserror::Error;

use crate::activations::{single_output, PORT_ACCUM, PORT_DELTA, PORT_SINGLE};
use crate::engine::{EngineState, NetworkMatrix, NeuronAddress};
use crate::netfile::NetworkFile;
use crate::vspace::PTVector;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct DimensionError(pub String);

/// A dense rectangular matrix with fixed shape, 0-based indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RectMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RectMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DimensionError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(DimensionError(format!(
                    "row {i} has {} entries, expected {width}",
                    row.len()
                )));
            }
        }
        Ok(RectMatrix {
            rows: height,
            cols: width,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    fn add_scaled(&mut self, alpha: f64, other: &RectMatrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Largest entrywise absolute difference; shapes must match.
    pub fn max_abs_diff(&self, other: &RectMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl fmt::Display for RectMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{:>7.3}", self.get(i, j))?;
            }
            if i + 1 < self.rows {
                f.write_str("\n")?;
            }
        }
        Ok(())
    }
}

/// One stream function `fʲ: (X¹..X^M) → Yʲ`.
pub type StreamFn = Box<dyn Fn(&[RectMatrix]) -> RectMatrix + Send + Sync>;

/// The dynamical system: N stream functions, the current Y tuple, and the
/// step counter. `Y¹` (index 0) is the connectivity matrix for the next
/// step.
pub struct LightweightSystem {
    rows: usize,
    cols: usize,
    fns: Vec<StreamFn>,
    streams: Vec<RectMatrix>,
    t: u64,
}

impl LightweightSystem {
    /// `initial` supplies `Y¹₀..Y^N₀`; every matrix must be M×N with
    /// N = number of streams.
    pub fn new(fns: Vec<StreamFn>, initial: Vec<RectMatrix>) -> Result<Self, DimensionError> {
        let n = fns.len();
        if n == 0 {
            return Err(DimensionError("need at least one stream".into()));
        }
        if initial.len() != n {
            return Err(DimensionError(format!(
                "{} initial matrices for {n} streams",
                initial.len()
            )));
        }
        let rows = initial[0].rows();
        for (j, y) in initial.iter().enumerate() {
            if y.rows() != rows || y.cols() != n {
                return Err(DimensionError(format!(
                    "stream {} starts {}x{}, expected {rows}x{n}",
                    j + 1,
                    y.rows(),
                    y.cols()
                )));
            }
        }
        Ok(LightweightSystem {
            rows,
            cols: n,
            fns,
            streams: initial,
            t: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// The current value of stream `Yʲ` (0-based index).
    pub fn stream(&self, j: usize) -> &RectMatrix {
        &self.streams[j]
    }

    /// The current connectivity matrix `A = Y¹`.
    pub fn connectivity(&self) -> &RectMatrix {
        &self.streams[0]
    }

    /// One step: all `Xⁱ` from the current connectivity matrix, then all
    /// `Yʲ` from the stream functions.
    pub fn step(&mut self) -> Result<(), DimensionError> {
        let a = &self.streams[0];
        let xs: Vec<RectMatrix> = (0..self.rows)
            .map(|i| {
                let mut x = RectMatrix::zeros(self.rows, self.cols);
                for j in 0..self.cols {
                    let weight = a.get(i, j);
                    if weight != 0.0 {
                        x.add_scaled(weight, &self.streams[j]);
                    }
                }
                x
            })
            .collect();
        let mut next = Vec::with_capacity(self.cols);
        for (j, f) in self.fns.iter().enumerate() {
            let y = f(&xs);
            if y.rows() != self.rows || y.cols() != self.cols {
                return Err(DimensionError(format!(
                    "stream function {} returned {}x{}, expected {}x{}",
                    j + 1,
                    y.rows(),
                    y.cols(),
                    self.rows,
                    self.cols
                )));
            }
            next.push(y);
        }
        self.streams = next;
        self.t += 1;
        Ok(())
    }
}

impl fmt::Debug for LightweightSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LightweightSystem")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("t", &self.t)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("wave invariant broken at t={t}: row 2 of the connectivity matrix is {row:?}; expected exactly one 1.0 and the rest 0.0")]
pub struct WaveInvariantError {
    pub t: u64,
    pub row: Vec<f64>,
}

const WAVE_COLS: usize = 4;

/// Cyclic successor on columns 2→3→4→2 (1-based).
fn wave_next(col: usize) -> usize {
    if col == WAVE_COLS {
        2
    } else {
        col + 1
    }
}

fn wave_system(rows: usize, payload: Option<[f64; 3]>) -> LightweightSystem {
    // update matrices: U^j points to itself with -1 and to its successor
    // with +1, all in row 2 (1-based)
    let mut updates = Vec::new();
    for j in 2..=WAVE_COLS {
        let mut u = RectMatrix::zeros(rows, WAVE_COLS);
        u.set(1, j - 1, -1.0);
        u.set(1, wave_next(j) - 1, 1.0);
        if let Some(p) = payload {
            // payload rides in row 3, column 1: replaced (not accumulated)
            // every step because the update carries the difference
            u.set(2, 0, p[wave_next(j) - 2] - p[j - 2]);
        }
        updates.push(u);
    }

    let mut a0 = RectMatrix::zeros(rows, WAVE_COLS);
    a0.set(0, 0, 1.0);
    a0.set(1, 1, 1.0);
    if let Some(p) = payload {
        a0.set(2, 0, p[0]);
    }

    let mut fns: Vec<StreamFn> = vec![Box::new(|xs: &[RectMatrix]| {
        let mut y = xs[0].clone();
        y.add_scaled(1.0, &xs[1]);
        y
    })];
    for u in &updates {
        let constant = u.clone();
        fns.push(Box::new(move |_| constant.clone()));
    }

    let mut initial = vec![a0];
    initial.extend(updates);
    LightweightSystem::new(fns, initial).expect("wave system shapes are consistent")
}

/// The circular wave-pattern system: `f¹ = X¹+X²`, three constant update
/// matrices, and a connectivity matrix whose row 2 carries a single 1 that
/// cycles through columns 2, 3, 4.
pub fn build_wave_example() -> LightweightSystem {
    wave_system(2, None)
}

/// Wave system with a third matrix row carrying a payload value that is
/// placed into the connectivity matrix for exactly one step at a time:
/// `payload[j]` shows while the wave sits at column `j+2`.
pub fn build_wave_example_with_payload(payload: [f64; 3]) -> LightweightSystem {
    wave_system(3, Some(payload))
}

/// Column (1-based) of the single 1 in row 2 of the connectivity matrix.
/// Fails when the row does not consist of exactly one 1 and zeros, which is
/// the golden-trace failure signal.
pub fn wave_position(sys: &LightweightSystem) -> Result<usize, WaveInvariantError> {
    let row = sys.connectivity().row(1);
    let mut position = None;
    for (j, &value) in row.iter().enumerate() {
        if value == 1.0 && position.is_none() {
            position = Some(j + 1);
        } else if value != 0.0 {
            return Err(WaveInvariantError {
                t: sys.t(),
                row: row.to_vec(),
            });
        }
    }
    position.ok_or_else(|| WaveInvariantError {
        t: sys.t(),
        row: row.to_vec(),
    })
}

// --- the same system as a general network ---------------------------------
//
// Stream j becomes a neuron: Y¹ is the Self accumulator, Y²..Y⁴ constant
// neurons. Matrix entry a_{1,j} connects source j to Self's `accum` input
// and a_{2,j} to its `delta` input, so the encoded Y¹ doubles as the
// engine's own network matrix; a_{1,1} = 1 is exactly the accumulator
// self-loop. Each constant neuron gets a self-loop row so it is recomputed
// every step.

const WAVE_SELF: &str = "Self";
const WAVE_CONST_NAMES: [&str; 3] = ["u2", "u3", "u4"];

fn wave_dest(row: usize) -> NeuronAddress {
    let port = if row == 0 { PORT_ACCUM } else { PORT_DELTA };
    NeuronAddress::from_strs("add", WAVE_SELF, port).expect("static names")
}

fn wave_src(col: usize) -> NeuronAddress {
    if col == 0 {
        NeuronAddress::from_strs("add", WAVE_SELF, PORT_SINGLE).expect("static names")
    } else {
        let name = WAVE_CONST_NAMES[col - 1];
        NeuronAddress::from_strs(&format!("const:{name}"), name, PORT_SINGLE).expect("static names")
    }
}

/// Encodes a 2×4 wave-shaped matrix as a depth-6 weight tree.
fn encode_wave_matrix(m: &RectMatrix) -> PTVector {
    let mut terms = Vec::new();
    for i in 0..2 {
        for j in 0..WAVE_COLS {
            let w = m.get(i, j);
            if w != 0.0 {
                terms.push((crate::engine::weight_path(&wave_dest(i), &wave_src(j)), w));
            }
        }
    }
    PTVector::from_terms(terms)
}

/// Reads the 2×4 wave matrix back out of an engine matrix, ignoring the
/// constant neurons' self-loop rows.
pub fn decode_wave_matrix(matrix: &NetworkMatrix) -> RectMatrix {
    let mut out = RectMatrix::zeros(2, WAVE_COLS);
    for i in 0..2 {
        for j in 0..WAVE_COLS {
            out.set(i, j, matrix.weight(&wave_dest(i), &wave_src(j)));
        }
    }
    out
}

/// The wave system encoded as a general network definition: an add-type
/// Self neuron wired as an accumulator plus three constant update neurons.
/// Running it step-for-step reproduces [`build_wave_example`]'s `Y¹`
/// trajectory in the engine's own matrix.
pub fn wave_dmm_network() -> NetworkFile {
    let lw = build_wave_example();
    let mut weights = encode_wave_matrix(lw.connectivity());
    let mut constants = std::collections::BTreeMap::new();
    let mut init_outputs = std::collections::BTreeMap::new();
    let mut registry = vec!["add".to_string()];

    for (index, name) in WAVE_CONST_NAMES.iter().enumerate() {
        let encoded = encode_wave_matrix(lw.stream(index + 1));
        // self-loop row keeping the constant neuron active
        let loop_in = NeuronAddress::from_strs(&format!("const:{name}"), name, "in").unwrap();
        weights = weights.add(&PTVector::from_terms([(
            crate::engine::weight_path(&loop_in, &wave_src(index + 1)),
            1.0,
        )]));
        registry.push(format!("const:{name}"));
        init_outputs.insert(
            format!("const:{name}/{name}"),
            single_output(encoded.clone()),
        );
        constants.insert(name.to_string(), encoded);
    }

    init_outputs.insert(format!("add/{WAVE_SELF}"), single_output(weights.clone()));

    NetworkFile {
        registry,
        constants,
        matrix: weights,
        init_outputs,
        feeds: std::collections::BTreeMap::new(),
        self_address: Some(format!("add/{WAVE_SELF}/{PORT_SINGLE}")),
        seed: Some(0),
    }
}

/// Instantiated engine for [`wave_dmm_network`].
pub fn wave_dmm_engine() -> EngineState {
    wave_dmm_network()
        .instantiate()
        .expect("wave network definition is valid")
}

/// The Self output designated by [`wave_dmm_network`].
pub fn wave_self_address() -> NeuronAddress {
    NeuronAddress::from_strs("add", WAVE_SELF, PORT_SINGLE).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_fn(m: RectMatrix) -> StreamFn {
        Box::new(move |_| m.clone())
    }

    #[test]
    fn all_zero_functions_zero_the_streams() {
        let zero = RectMatrix::zeros(2, 2);
        let fns: Vec<StreamFn> = vec![constant_fn(zero.clone()), constant_fn(zero.clone())];
        let mut a0 = RectMatrix::zeros(2, 2);
        a0.set(0, 0, 3.0);
        let mut sys = LightweightSystem::new(fns, vec![a0, zero.clone()]).unwrap();
        sys.step().unwrap();
        assert_eq!(sys.stream(0), &zero);
        assert_eq!(sys.stream(1), &zero);
    }

    #[test]
    fn x1_reproduces_y1_under_the_wave_conditions() {
        // with a_{1,1} = 1, the rest of row 1 zero, and row 1 of the other
        // streams zero, X¹ at t+1 equals Y¹ at t
        let mut sys = build_wave_example();
        for _ in 0..10 {
            let y1 = sys.connectivity().clone();
            let a = sys.connectivity();
            let mut x1 = RectMatrix::zeros(sys.rows(), sys.cols());
            for j in 0..sys.cols() {
                x1.add_scaled(a.get(0, j), sys.stream(j));
            }
            assert_eq!(x1, y1);
            sys.step().unwrap();
        }
    }

    #[test]
    fn three_steps_match_a_hand_evaluated_oracle() {
        // 2-stream system over 2x2 matrices: f¹ = X¹ + 2·X², f² constant.
        // The oracle below evaluates the two recurrences directly on plain
        // nested arrays.
        let a0 = RectMatrix::from_rows(&[vec![0.5, 1.0], vec![-1.0, 0.25]]).unwrap();
        let u = RectMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.0]]).unwrap();
        let fns: Vec<StreamFn> = vec![
            Box::new(|xs: &[RectMatrix]| {
                let mut y = xs[0].clone();
                y.add_scaled(2.0, &xs[1]);
                y
            }),
            constant_fn(u.clone()),
        ];
        let mut sys = LightweightSystem::new(fns, vec![a0.clone(), u.clone()]).unwrap();

        let mut y: Vec<Vec<Vec<f64>>> = vec![
            vec![vec![0.5, 1.0], vec![-1.0, 0.25]],
            vec![vec![1.0, -2.0], vec![0.5, 0.0]],
        ];
        for _ in 0..3 {
            let a = y[0].clone();
            // x[i][r][c] = sum_j a[i][j] * y[j][r][c]
            let x: Vec<Vec<Vec<f64>>> = (0..2)
                .map(|i| {
                    (0..2)
                        .map(|r| {
                            (0..2)
                                .map(|c| (0..2).map(|j| a[i][j] * y[j][r][c]).sum())
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let y1: Vec<Vec<f64>> = (0..2)
                .map(|r| (0..2).map(|c| x[0][r][c] + 2.0 * x[1][r][c]).collect())
                .collect();
            y = vec![y1, vec![vec![1.0, -2.0], vec![0.5, 0.0]]];

            sys.step().unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    assert!((sys.connectivity().get(r, c) - y[0][r][c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let fns: Vec<StreamFn> = vec![constant_fn(RectMatrix::zeros(2, 2))];
        // cols must equal the stream count
        assert!(LightweightSystem::new(fns, vec![RectMatrix::zeros(2, 2)]).is_err());

        let bad: Vec<StreamFn> = vec![
            constant_fn(RectMatrix::zeros(3, 2)),
            constant_fn(RectMatrix::zeros(2, 2)),
        ];
        let init = vec![RectMatrix::zeros(2, 2), RectMatrix::zeros(2, 2)];
        let mut sys = LightweightSystem::new(bad, init).unwrap();
        assert!(sys.step().is_err());
    }

    #[test]
    fn x2_cycles_through_the_update_matrices() {
        let mut sys = build_wave_example();
        // X² at t+1 equals U^(position at t)
        for t in 0..9u64 {
            let expected_update = sys.stream(((t as usize) % 3) + 1).clone();
            let a = sys.connectivity().clone();
            let mut x2 = RectMatrix::zeros(sys.rows(), sys.cols());
            for j in 0..sys.cols() {
                x2.add_scaled(a.get(1, j), sys.stream(j));
            }
            assert_eq!(x2, expected_update, "t={t}");
            sys.step().unwrap();
        }
    }

    #[test]
    fn wave_positions_cycle_with_period_three() {
        let mut sys = build_wave_example();
        assert_eq!(wave_position(&sys).unwrap(), 2);
        sys.step().unwrap();
        assert_eq!(wave_position(&sys).unwrap(), 3);
        for t in 2..=1000u64 {
            sys.step().unwrap();
            let expected = [2, 3, 4][(t % 3) as usize];
            assert_eq!(wave_position(&sys).unwrap(), expected, "t={t}");
        }
    }

    #[test]
    fn first_rows_are_invariant() {
        let mut sys = build_wave_example();
        let initial: Vec<Vec<f64>> = (0..4).map(|j| sys.stream(j).row(0).to_vec()).collect();
        for _ in 0..30 {
            sys.step().unwrap();
            for j in 0..4 {
                assert_eq!(sys.stream(j).row(0), &initial[j][..]);
            }
        }
    }

    #[test]
    fn payload_rides_the_wave_for_one_step_at_a_time() {
        let payload = [10.0, 20.0, 30.0];
        let mut sys = build_wave_example_with_payload(payload);
        for t in 0..12u64 {
            let position = wave_position(&sys).unwrap();
            assert_eq!(position, [2, 3, 4][(t % 3) as usize]);
            assert_eq!(sys.connectivity().get(2, 0), payload[position - 2], "t={t}");
            sys.step().unwrap();
        }
    }

    #[test]
    fn wave_position_rejects_broken_rows() {
        let zero = RectMatrix::zeros(2, 2);
        let fns: Vec<StreamFn> = vec![constant_fn(zero.clone()), constant_fn(zero.clone())];
        let sys = LightweightSystem::new(fns, vec![zero.clone(), zero]).unwrap();
        assert!(wave_position(&sys).is_err());

        // a 2 in the row is just as broken as no 1 at all
        let mut a = RectMatrix::zeros(2, 2);
        a.set(1, 0, 2.0);
        let fns: Vec<StreamFn> = vec![
            constant_fn(RectMatrix::zeros(2, 2)),
            constant_fn(RectMatrix::zeros(2, 2)),
        ];
        let sys = LightweightSystem::new(fns, vec![a, RectMatrix::zeros(2, 2)]).unwrap();
        assert!(wave_position(&sys).is_err());
    }

    #[test]
    fn engine_encoding_tracks_the_lightweight_system() {
        let mut lw = build_wave_example();
        let mut engine = wave_dmm_engine();
        assert_eq!(decode_wave_matrix(engine.matrix()), *lw.connectivity());
        for t in 1..=60u64 {
            lw.step().unwrap();
            engine.step().unwrap();
            let decoded = decode_wave_matrix(engine.matrix());
            assert_eq!(decoded.max_abs_diff(lw.connectivity()), 0.0, "t={t}");
        }
    }

    #[test]
    fn engine_encoding_weight_count_is_hand_countable() {
        // a_{1,1}, a_{2,2}, and one self-loop per constant neuron
        let file = wave_dmm_network();
        let matrix = NetworkMatrix::new(file.matrix.clone()).unwrap();
        assert_eq!(matrix.weight_count(), 5);
        assert_eq!(matrix.active_neurons().len(), 4);
    }

    #[test]
    fn traced_wave_run_reproduces_the_trajectory() {
        let mut engine = wave_dmm_engine();
        let log = engine.run(9, &[wave_self_address()]).unwrap();
        let positions: Vec<usize> = log
            .records
            .iter()
            .map(|r| {
                let matrix = NetworkMatrix::new(r.value.clone()).unwrap();
                let decoded = decode_wave_matrix(&matrix);
                let row = decoded.row(1);
                row.iter().position(|&x| x == 1.0).unwrap() + 1
            })
            .collect();
        assert_eq!(positions, vec![3, 4, 2, 3, 4, 2, 3, 4, 2]);
    }

    #[test]
    fn registry_of_the_wave_network_resolves() {
        let state = wave_dmm_engine();
        let registry: Vec<_> = state.registry().names().collect();
        assert!(registry.contains(&"add"));
        assert!(registry.contains(&"const:u2"));
    }
}
