//! Independent dense reference implementations.
//!
//! Everything here recomputes expected behavior directly from the defining
//! equations, without touching the sparse engine, so it can serve as an
//! oracle for demo verdicts and verification tests.

/// A plain dense recurrent net over scalars.
///
/// One step computes `x_j = Σ_l W[j][l]·y_l + Σ_s V[j][s]·i_s(t)` followed by
/// `y_j = f(x_j)`, with the input values taken from the supplied streams at
/// the current step (zero past their end). State starts at zero.
#[derive(Debug, Clone)]
pub struct DenseRnn {
    recurrent: Vec<Vec<f64>>,
    input_weights: Vec<Vec<f64>>,
    nonlinearity: fn(f64) -> f64,
    input_streams: Vec<Vec<f64>>,
    state: Vec<f64>,
    t: usize,
}

impl DenseRnn {
    pub fn new(
        recurrent: Vec<Vec<f64>>,
        input_weights: Vec<Vec<f64>>,
        nonlinearity: fn(f64) -> f64,
        input_streams: Vec<Vec<f64>>,
    ) -> Self {
        let k = recurrent.len();
        assert!(recurrent.iter().all(|row| row.len() == k));
        assert_eq!(input_weights.len(), k);
        let m = input_streams.len();
        assert!(input_weights.iter().all(|row| row.len() == m));
        DenseRnn {
            recurrent,
            input_weights,
            nonlinearity,
            input_streams,
            state: vec![0.0; k],
            t: 0,
        }
    }

    fn input(&self, s: usize) -> f64 {
        self.input_streams[s].get(self.t).copied().unwrap_or(0.0)
    }

    pub fn step(&mut self) {
        let k = self.state.len();
        let mut next = vec![0.0; k];
        for j in 0..k {
            let mut x = 0.0;
            for l in 0..k {
                x += self.recurrent[j][l] * self.state[l];
            }
            for s in 0..self.input_streams.len() {
                x += self.input_weights[j][s] * self.input(s);
            }
            next[j] = (self.nonlinearity)(x);
        }
        self.state = next;
        self.t += 1;
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn t(&self) -> usize {
        self.t
    }
}

/// Scalar nonlinearities by registry name, for pairing a dense reference
/// with an engine-built net.
pub fn nonlinearity_by_name(name: &str) -> Option<fn(f64) -> f64> {
    match name {
        "tanh" => Some(f64::tanh),
        "sigmoid" => Some(|x| 1.0 / (1.0 + (-x).exp())),
        "identity" => Some(|x| x),
        _ => None,
    }
}

/// Whether an observed count is within `k_sigma` binomial standard
/// deviations of `draws·p`.
pub fn within_binomial_sigma(observed: u64, draws: u64, p: f64, k_sigma: f64) -> bool {
    let expected = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    (observed as f64 - expected).abs() <= k_sigma * sigma
}
