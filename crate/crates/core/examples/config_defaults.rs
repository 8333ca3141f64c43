//! Default configurations per experiment and scale, and validation of a
//! user file.
//!
//! `cargo run --example config_defaults -- [config.toml]`

use leray_fem::io::{parse_config, Experiment, RunConfig, Scale};

fn main() {
    if let Some(path) = std::env::args().nth(1) {
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
        match parse_config(&text) {
            Ok(cfg) => print!("{}", cfg.to_toml()),
            Err(e) => {
                println!("{e}");
                std::process::exit(2);
            }
        }
        return;
    }
    for exp in [Experiment::MmsTime, Experiment::MmsSpace, Experiment::Marsigli] {
        for scale in [Scale::Desk, Scale::Paper] {
            let cfg = RunConfig::defaults(exp, scale);
            println!("# {} at {scale:?} scale", exp.name());
            println!("{}", cfg.to_toml());
        }
    }
}
