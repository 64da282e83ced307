use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dmm_core::activations::single_output;
use dmm_core::engine::build_rnn;
use dmm_core::lightweight::{
    build_wave_example, build_wave_example_with_payload, wave_position, LightweightSystem,
};
use dmm_core::reference::{within_binomial_sigma, DenseRnn};
use dmm_core::samples::{combine_samples, SampleSlot, Sign, SignedSample};
use dmm_core::{EngineState, NetworkMatrix, NeuronAddress, NeuronTypeRegistry, PTVector, Path};

use crate::{resolve_seed, CliError};

#[derive(Clone, Copy, ValueEnum)]
pub enum DemoName {
    /// Circular wave pattern in a self-modifying connectivity matrix
    Wave,
    /// Random recurrent net stepped against a dense reference
    Rnn,
    /// Self neuron accumulating a constant matrix update
    SelfAccumulate,
    /// Stochastic combination of signed-sample streams
    Sampling,
}

#[derive(Args)]
pub struct DemoArgs {
    /// Which scenario to run
    #[arg(value_enum)]
    pub name: DemoName,

    /// Steps to run (wave: 9, rnn: 100, self-accumulate: 10)
    #[arg(long)]
    pub steps: Option<u64>,

    /// Draws for the sampling demo
    #[arg(long, default_value_t = 100_000)]
    pub draws: u64,

    /// Random seed (falls back to DMM_SEED, then 0)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Wave only: three payload values riding the wave, e.g. `10,20,30`
    #[arg(long, value_delimiter = ',')]
    pub payload: Vec<f64>,

    /// Wave only: print the full connectivity matrix each step
    #[arg(long)]
    pub grid: bool,
}

pub fn run(args: DemoArgs) -> Result<(), CliError> {
    match args.name {
        DemoName::Wave => wave(&args),
        DemoName::Rnn => rnn(&args),
        DemoName::SelfAccumulate => self_accumulate(&args),
        DemoName::Sampling => sampling(&args),
    }
}

fn wave(args: &DemoArgs) -> Result<(), CliError> {
    let steps = args.steps.unwrap_or(9);
    let mut sys: LightweightSystem = match args.payload.as_slice() {
        [] => build_wave_example(),
        [a, b, c] => build_wave_example_with_payload([*a, *b, *c]),
        other => {
            return Err(CliError::Validation(format!(
                "--payload needs exactly three values, got {}",
                other.len()
            )))
        }
    };

    for t in 0..steps {
        let position = wave_position(&sys).map_err(|e| CliError::Verdict(e.to_string()))?;
        let expected = [2, 3, 4][(t % 3) as usize];
        if position != expected {
            return Err(CliError::Verdict(format!(
                "t={t}: wave at column {position}, expected {expected}"
            )));
        }
        if args.payload.is_empty() {
            println!("t={t} position={position}");
        } else {
            println!(
                "t={t} position={position} payload={}",
                sys.connectivity().get(2, 0)
            );
        }
        if args.grid {
            println!("{}", sys.connectivity());
        }
        if t + 1 < steps {
            sys.step().map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    println!("PASS: wave cycles 2 -> 3 -> 4 with period 3 over {steps} steps");
    Ok(())
}

fn rnn(args: &DemoArgs) -> Result<(), CliError> {
    let steps = args.steps.unwrap_or(100);
    let seed = resolve_seed(args.seed, None)?;
    let k = 4;
    let m = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let recurrent: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let input_weights: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let streams: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..=steps).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    let mut engine = build_rnn(&recurrent, &input_weights, "tanh", &streams, seed)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut dense = DenseRnn::new(recurrent, input_weights, f64::tanh, streams);

    let mut max_dev: f64 = 0.0;
    for _ in 0..steps {
        engine
            .step()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        dense.step();
        for j in 0..k {
            let address = NeuronAddress::from_strs("tanh", &format!("h{}", j + 1), "single")
                .expect("static names");
            let dev = (engine.port_value(&address).scalar() - dense.state()[j]).abs();
            max_dev = max_dev.max(dev);
        }
    }
    println!("rnn k={k} m={m} seed={seed}: {steps} steps, max |delta| = {max_dev:e}");
    if max_dev < 1e-12 {
        println!("PASS: sparse engine matches the dense reference");
        Ok(())
    } else {
        Err(CliError::Verdict(format!(
            "deviation {max_dev:e} exceeds 1e-12"
        )))
    }
}

fn self_accumulate(args: &DemoArgs) -> Result<(), CliError> {
    let steps = args.steps.unwrap_or(10);
    let self_out = NeuronAddress::from_strs("add", "Self", "single").unwrap();
    let self_accum = NeuronAddress::from_strs("add", "Self", "accum").unwrap();
    let self_delta = NeuronAddress::from_strs("add", "Self", "delta").unwrap();
    let const_out = NeuronAddress::from_strs("const:u", "u", "single").unwrap();
    let const_in = NeuronAddress::from_strs("const:u", "u", "in").unwrap();

    let update = PTVector::from_terms([(
        Path::from_strs(&["identity", "sink", "x", "identity", "src", "single"]).unwrap(),
        1.0,
    )]);

    let mut matrix = NetworkMatrix::zero();
    matrix.set_weight(&self_accum, &self_out, 1.0);
    matrix.set_weight(&self_delta, &const_out, 1.0);
    matrix.set_weight(&const_in, &const_out, 1.0);
    let w0 = matrix.as_vector().clone();

    let mut registry = NeuronTypeRegistry::with_builtins();
    registry.register_constant("u", update.clone());

    let mut state = EngineState::new(matrix, registry).with_self_address(self_out.clone());
    state.set_output(self_out.id(), single_output(w0.clone()));
    state.set_output(const_out.id(), single_output(update.clone()));

    let update_path =
        Path::from_strs(&["identity", "sink", "x", "identity", "src", "single"]).unwrap();
    for t in 1..=steps {
        state.step().map_err(|e| CliError::Runtime(e.to_string()))?;
        let expected = PTVector::linear_combination([(1.0, &w0), (t as f64, &update)]);
        println!(
            "t={t} weights={} accumulated={}",
            state.matrix().weight_count(),
            state.matrix().as_vector().coefficient(&update_path)
        );
        if state.matrix().as_vector() != &expected {
            return Err(CliError::Verdict(format!(
                "t={t}: matrix diverged from W0 + t*U"
            )));
        }
    }
    println!("PASS: matrix equals W0 + t*U exactly for t <= {steps}");
    Ok(())
}

fn sampling(args: &DemoArgs) -> Result<(), CliError> {
    let draws = args.draws;
    let seed = resolve_seed(args.seed, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slot = |point: &str| SampleSlot::Present(SignedSample::positive(point));

    let mut all_ok = true;
    for (a, b) in [(0.3f64, 0.7f64), (0.5, -0.5)] {
        let pairs = vec![(a, slot("p")), (b, slot("q"))];
        let p_share = a.abs() / (a.abs() + b.abs());
        let mut p_count = 0u64;
        let mut sign_violations = 0u64;
        for _ in 0..draws {
            match combine_samples(&pairs, &mut rng) {
                SampleSlot::Present(s) if s.point == "p" => {
                    p_count += 1;
                    if s.sign != Sign::of(a) {
                        sign_violations += 1;
                    }
                }
                SampleSlot::Present(s) => {
                    if s.sign != Sign::of(b) {
                        sign_violations += 1;
                    }
                }
                SampleSlot::Missing => sign_violations += 1,
            }
        }
        let ok = within_binomial_sigma(p_count, draws, p_share, 3.0) && sign_violations == 0;
        all_ok &= ok;
        println!(
            "weights ({a}, {b}): p selected {p_count}/{draws} (expected {:.0}), sign violations {sign_violations} -> {}",
            draws as f64 * p_share,
            if ok { "ok" } else { "FAIL" }
        );
    }

    let pairs = vec![(0.0, slot("p")), (0.0, slot("q"))];
    let missing = (0..draws)
        .filter(|_| combine_samples(&pairs, &mut rng).is_missing())
        .count() as u64;
    let zero_ok = missing == draws;
    all_ok &= zero_ok;
    println!(
        "weights (0, 0): missing {missing}/{draws} -> {}",
        if zero_ok { "ok" } else { "FAIL" }
    );

    if all_ok {
        println!("PASS: frequencies within 3-sigma binomial bounds, signs exact, zero measure always missing");
        Ok(())
    } else {
        Err(CliError::Verdict(
            "sampling statistics outside 3-sigma bounds".into(),
        ))
    }
}
