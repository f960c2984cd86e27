//! `dime`: generate synthetic aligned networks, compute meta proximity,
//! train embeddings and run the evaluation protocols, with a manifest
//! recorded for every run.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::Cmd;

#[derive(Parser)]
#[command(name = "dime", version, about = "Emerging-network embedding with aligned autoencoders")]
struct Cli {
    /// Base seed; every stage derives its own seed from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` file. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving outputs and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for parallel stages; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic aligned pair with planted communities.
    Generate(GenerateFlags),
    /// Compute the meta proximity bundle of one network.
    Proximity(ProximityFlags),
    /// Train embeddings for the emerging network.
    Embed(EmbedFlags),
    /// Run an evaluation protocol over a parameter grid.
    Eval {
        #[command(subcommand)]
        which: EvalCommand,
    },
    /// Re-run a recorded command and check its outputs are reproduced.
    Replay {
        /// Manifest written by an earlier run.
        manifest: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Cross-validated link prediction; writes link_metrics.csv.
    Link(LinkFlags),
    /// k-means on the embeddings; writes community_metrics.csv.
    Community(CommunityFlags),
}

/// Declares a flag struct whose fields are config keys of the same name.
macro_rules! key_flags {
    ($name:ident { $($field:ident),* $(,)? }) => {
        #[derive(Args, Debug)]
        struct $name {
            $(
                #[arg(long)]
                $field: Option<String>,
            )*
        }

        impl $name {
            fn overrides(self) -> Vec<(&'static str, Option<String>)> {
                vec![$((stringify!($field), self.$field)),*]
            }
        }
    };
}

key_flags!(GenerateFlags {
    users, communities, p_intra, p_inter, size_ratio, degree_spread, posts_per_user,
    vocab_size, words_per_post, locations, attr_skew, anchor_fraction, emergence,
});

key_flags!(ProximityFlags { network, paths });

key_flags!(EmbedFlags {
    emerging, mature, anchors, emerging_bundle, mature_bundle, mode, paths, widths,
    fusion_width, dim, alpha, beta, gamma, epochs, batch_size, learning_rate,
});

key_flags!(LinkFlags {
    emerging, mature, anchors, methods, lambdas, thetas, folds, svm_lambda, svm_passes,
    paths, widths, fusion_width, dim, alpha, beta, gamma, epochs, batch_size, learning_rate,
});

key_flags!(CommunityFlags {
    emerging, mature, anchors, methods, lambdas, ks, repeats,
    paths, widths, fusion_width, dim, alpha, beta, gamma, epochs, batch_size, learning_rate,
});

fn main() -> Result<()> {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let threads = rayon::current_num_threads();

    let (cmd, flags) = match cli.command {
        Command::Replay { manifest } => {
            let m = commands::replay(&manifest, &cli.out_dir, argv, threads)?;
            println!(
                "replayed `{}`: {} outputs reproduced in {}",
                m.command,
                m.outputs.len(),
                cli.out_dir.display()
            );
            return Ok(());
        }
        Command::Generate(f) => (Cmd::Generate, f.overrides()),
        Command::Proximity(f) => (Cmd::Proximity, f.overrides()),
        Command::Embed(f) => (Cmd::Embed, f.overrides()),
        Command::Eval {
            which: EvalCommand::Link(f),
        } => (Cmd::EvalLink, f.overrides()),
        Command::Eval {
            which: EvalCommand::Community(f),
        } => (Cmd::EvalCommunity, f.overrides()),
    };
    let mut resolved = commands::resolve(cmd, cli.config.as_deref(), cli.seed, flags)?;
    let m = commands::execute(cmd, &mut resolved, &cli.out_dir, argv, threads)?;
    println!("{}: wrote {} files to {}", m.command, m.outputs.len() + 1, cli.out_dir.display());
    Ok(())
}
