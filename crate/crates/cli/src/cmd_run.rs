use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use dmm_core::engine::SelfUpdate;
use dmm_core::{NetworkFile, NeuronAddress, TraceRecord, DEFAULT_EPSILON};

use crate::{resolve_seed, CliError};

#[derive(Args)]
pub struct RunArgs {
    /// Network definition file (JSON)
    pub network: PathBuf,

    /// Number of steps to run
    #[arg(long, default_value_t = 0)]
    pub steps: u64,

    /// Output addresses to trace, as comma-separated `type/neuron/port`
    #[arg(long, value_delimiter = ',')]
    pub trace: Vec<String>,

    /// Random seed (falls back to DMM_SEED, then the file, then 0)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Pruning tolerance for linear combinations
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,

    /// Write trace records here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: RunArgs) -> Result<(), CliError> {
    if args.epsilon <= 0.0 {
        return Err(CliError::Validation(format!(
            "epsilon must be positive, got {}",
            args.epsilon
        )));
    }
    let traced: Vec<NeuronAddress> = args
        .trace
        .iter()
        .map(|text| {
            text.parse()
                .map_err(|e| CliError::Validation(format!("bad trace address: {e}")))
        })
        .collect::<Result<_, _>>()?;

    let file = NetworkFile::from_path(&args.network)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.network.display())))?;
    let seed = resolve_seed(args.seed, file.seed)?;
    let mut state = file
        .instantiate()
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.network.display())))?
        .with_seed(seed)
        .with_epsilon(args.epsilon);

    let mut writer: BufWriter<Box<dyn Write>> = match &args.out {
        Some(path) => {
            let handle = File::create(path)
                .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
            BufWriter::new(Box::new(handle))
        }
        None => BufWriter::new(Box::new(std::io::stdout().lock())),
    };
    let emit = |writer: &mut BufWriter<Box<dyn Write>>, line: &str| -> Result<(), CliError> {
        writeln!(writer, "{line}").map_err(|e| CliError::Runtime(format!("trace write: {e}")))
    };

    for _ in 0..args.steps {
        let outcome = state.step().map_err(|e| CliError::Runtime(e.to_string()))?;
        if let SelfUpdate::Rejected(reason) = &outcome.self_update {
            let warning = serde_json::json!({
                "warning": "self_update_rejected",
                "step": outcome.step,
                "detail": reason.to_string(),
            });
            eprintln!("{warning}");
        }
        for address in &traced {
            let record = TraceRecord {
                step: state.step_count(),
                address: address.clone(),
                value: state.port_value(address).clone(),
            };
            let line = serde_json::to_string(&record)
                .map_err(|e| CliError::Runtime(format!("trace encode: {e}")))?;
            emit(&mut writer, &line)?;
        }
    }
    writer
        .flush()
        .map_err(|e| CliError::Runtime(format!("trace write: {e}")))
}
