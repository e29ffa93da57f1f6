use std::path::PathBuf;
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use hypam::config::{ExperimentConfig, Kind};
use hypam::experiments::EXPERIMENTS;
use hypam::output::Status;
use hypam::{run_to_dir, RunError};

fn cli() -> Command {
    let mut cmd = Command::new("hypam")
        .about("Numerical experiments for the parabolic Anderson model on hyperbolic space")
        .version(env!("CARGO_PKG_VERSION"))
        .arg(
            Arg::new("seed")
                .long("seed")
                .global(true)
                .value_parser(value_parser!(u64))
                .help("master seed [default: 0]"),
        )
        .arg(
            Arg::new("workers")
                .long("workers")
                .global(true)
                .value_parser(value_parser!(usize))
                .help("worker threads (results do not depend on it) [default: available cores]"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .env("HYPAM_OUT")
                .value_parser(value_parser!(PathBuf))
                .help("output root; artifacts go to <out>/<command>/ [default: ./hypam-out]"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_parser(value_parser!(PathBuf))
                .help("JSON config {command, params, seed}; flags override it"),
        )
        .arg(
            Arg::new("print-config")
                .long("print-config")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("print the resolved config as JSON and exit"),
        );
    for exp in EXPERIMENTS {
        let mut sub = Command::new(exp.name).about(exp.about);
        for spec in exp.params {
            let mut help = spec.help.to_string();
            if let Kind::Text(choices) = spec.kind {
                help.push_str(&format!(" [{}]", choices.join("|")));
            }
            help.push_str(&format!(" [default: {}]", spec.default));
            sub = sub.arg(
                Arg::new(spec.name)
                    .long(spec.name)
                    .value_name("VALUE")
                    .help(help),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn build_config(m: &ArgMatches) -> Result<ExperimentConfig, RunError> {
    let from_file = match m.get_one::<PathBuf>("config") {
        Some(path) => Some(ExperimentConfig::from_json(&std::fs::read_to_string(
            path,
        )?)?),
        None => None,
    };
    let mut config = match (m.subcommand(), from_file) {
        (Some((name, _)), Some(file)) if file.command != name => {
            return Err(RunError::Usage(format!(
                "config is for {:?}, not {name:?}",
                file.command
            )));
        }
        (_, Some(file)) => file,
        (Some((name, _)), None) => ExperimentConfig::new(name, 0),
        (None, None) => return Err(RunError::Usage("no command given (see --help)".into())),
    };
    if let Some((name, sub)) = m.subcommand() {
        let exp = hypam::experiments::find(name).expect("subcommand comes from the table");
        for spec in exp.params {
            if let Some(raw) = sub.get_one::<String>(spec.name) {
                config = config.set(spec.name, raw);
            }
        }
    }
    if let Some(&seed) = m.get_one::<u64>("seed") {
        config.seed = seed;
    }
    if let Some(&w) = m.get_one::<usize>("workers") {
        config.workers = Some(w);
    }
    if let Some(out) = m.get_one::<PathBuf>("out") {
        config.out = Some(out.clone());
    }
    Ok(config)
}

fn run(m: &ArgMatches) -> Result<Status, RunError> {
    let config = build_config(m)?;
    if m.get_flag("print-config") {
        let exp = hypam::experiments::find(&config.command)
            .ok_or_else(|| RunError::Usage(format!("unknown command {:?}", config.command)))?;
        println!("{}", config.resolve(exp.params)?.to_json()?);
        return Ok(Status::ReportOnly);
    }
    let root = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("hypam-out"));
    let (outcome, summary, dir) = run_to_dir(&config, &root)?;
    for c in &outcome.checks {
        println!(
            "{:<5} {}: {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    for line in &outcome.log {
        println!("note  {line}");
    }
    let status = match summary.status {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::ReportOnly => "report-only",
    };
    println!(
        "{} {} settings {} -> {}",
        summary.command,
        status,
        summary.settings_hash,
        dir.display()
    );
    Ok(summary.status)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(Status::Fail) => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                RunError::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}
