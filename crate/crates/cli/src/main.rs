//! `strokeseg`: batch front end for preprocessing, autoencoder training,
//! reconstruction figures and stroke segmentation experiments. Every command
//! writes a manifest from which `strokeseg replay` can re-run it.

mod cli;
mod cmd_data;
mod cmd_seg;
mod cmd_vae;
mod config;
mod data;
mod manifest;
mod svg;

use clap::Parser;

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let parsed = cli::Cli::parse();
    if let Err(e) = cli::run(parsed, argv) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
