use std::path::PathBuf;

use clap::Args;
use dmm_core::{NetworkFile, NetworkMatrix, NeuronId};

use crate::CliError;

#[derive(Args)]
pub struct InspectArgs {
    /// Network definition file (JSON)
    pub network: PathBuf,
}

pub fn run(args: InspectArgs) -> Result<(), CliError> {
    let file = NetworkFile::from_path(&args.network)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.network.display())))?;
    let matrix = NetworkMatrix::new(file.matrix.clone())
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.network.display())))?;

    println!(
        "{}: {} nonzero weights, {} active neurons",
        args.network.display(),
        matrix.weight_count(),
        matrix.active_neurons().len()
    );

    let rows = matrix.row_groups();
    if !rows.is_empty() {
        println!("rows:");
        for (id, group) in &rows {
            println!(
                "  {id}: {} weights across {} inputs",
                group.weights, group.inputs
            );
        }
    }

    let columns = matrix.column_groups();
    if !columns.is_empty() {
        println!("columns:");
        for id in &columns {
            println!("  {id}");
        }
    }

    if let Some(address) = &file.self_address {
        println!("self: {address}");
    }

    if !file.init_outputs.is_empty() {
        println!("initial outputs:");
        for (key, value) in &file.init_outputs {
            NeuronId::parse(key)
                .map_err(|e| CliError::Validation(format!("{}: {e}", args.network.display())))?;
            match value.max_rank() {
                Some(rank) => println!("  {key}: max rank {rank}"),
                None => println!("  {key}: zero"),
            }
        }
    }
    Ok(())
}
