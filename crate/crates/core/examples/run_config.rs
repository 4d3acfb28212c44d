//! Drive the command-line runner from code: write a config, run `train`
//! and `oracle`, and read the artifacts back.
//!
//! cargo run --release --example run_config

use mcpinn::cli::{read_csv, run, Cli, Command, Flags};

fn main() -> mcpinn::Result<()> {
    let dir = std::env::temp_dir().join("mcpinn-run-config");
    std::fs::create_dir_all(&dir)?;
    let config = dir.join("run.ini");
    std::fs::write(
        &config,
        "[run]\nseed = 1\n\n[problem]\nfamily = inverse-ade\nd = 1\nhidden = 16, 16\n\n\
         [train]\nepochs = 200\nbatch_size = 32\ntrace_every = 50\n\n[estimator]\nm = 10\nr0 = 0.3\n\n\
         [oracle]\nd = 1\npoints = 0; 0.25; 0.5; 0.75\n",
    )?;
    let flags = Flags {
        config: Some(config),
        out: Some(dir.join("out")),
        ..Flags::default()
    };
    println!("{}", run(&Cli { command: Command::Train(flags.clone()) })?);
    let oracle = Flags {
        out: Some(dir.join("oracle")),
        ..flags
    };
    println!("{}", run(&Cli { command: Command::Oracle(oracle) })?);
    for name in ["out/loss_trace.csv", "out/param_trace.csv", "oracle/oracle.csv"] {
        let (header, rows) = read_csv(&dir.join(name))?;
        println!("{name}: {} rows, columns {}", rows.len(), header.join(","));
    }
    Ok(())
}
