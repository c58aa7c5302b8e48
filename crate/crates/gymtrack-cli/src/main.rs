//! gymtrack command line: run scenarios, recompute reports, serve the mock
//! cloud, replay logged traffic against it, and evaluate battery profiles.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gymtrack::beacon::{battery_life_days, PowerProfile};
use gymtrack::cloud::{client, server};
use gymtrack::codec::parse_registry;
use gymtrack::sim::{self, EventLog, LogRecord, Scenario};

#[derive(Parser)]
#[command(
    name = "gymtrack",
    version,
    about = "Beacon-based gym recording ecosystem simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario; write the event log and metrics report.
    Simulate {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for events.ndjson and report.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute the metrics report from an event log.
    Report {
        /// Event log (events.ndjson) from a previous run.
        event_log: PathBuf,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the mock cloud service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Persistence file; loaded on start, appended on every PATCH.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Registry file (uuid-hex name per line); defaults to the three
        /// built-in demo machines.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Re-send the PATCHes from an event log to a live cloud service.
    Replay {
        /// Event log (events.ndjson) from a previous run.
        event_log: PathBuf,
        /// Base url of the running service, e.g. http://localhost:8080.
        #[arg(long)]
        cloud: String,
    },
    /// Compute battery life in days from a power profile JSON file.
    Battery {
        /// JSON file with idle_current_ma, advertising_current_ma,
        /// advertising_hours_per_day, battery_capacity_mah, usable_fraction.
        profile: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Simulate {
            scenario,
            seed,
            out,
        } => simulate(&scenario, seed, &out),
        Command::Report { event_log, json } => report(&event_log, json),
        Command::Serve {
            port,
            state,
            registry,
        } => serve(port, state, registry),
        Command::Replay { event_log, cloud } => replay(&event_log, &cloud),
        Command::Battery { profile } => battery(&profile),
    }
}

fn simulate(scenario_path: &Path, seed: Option<u64>, out: &Path) -> Result<(), String> {
    let scenario = Scenario::from_file(scenario_path).map_err(|e| e.to_string())?;
    let output = match seed {
        Some(seed) => sim::run_simulation_with_seed(&scenario, seed),
        None => sim::run_simulation(&scenario),
    }
    .map_err(|e| e.to_string())?;

    std::fs::create_dir_all(out).map_err(|e| format!("creating {}: {e}", out.display()))?;
    let events_path = out.join("events.ndjson");
    let report_path = out.join("report.json");
    std::fs::write(&events_path, output.log.to_ndjson())
        .map_err(|e| format!("writing {}: {e}", events_path.display()))?;
    let report_json = serde_json::to_string_pretty(&output.report).expect("report serializes");
    std::fs::write(&report_path, report_json)
        .map_err(|e| format!("writing {}: {e}", report_path.display()))?;

    print!("{}", output.report.render_table());
    println!(
        "event log: {} ({} records, digest {:016x})",
        events_path.display(),
        output.log.records.len(),
        output.log.digest()
    );
    println!("report: {}", report_path.display());
    Ok(())
}

fn report(event_log: &Path, json: bool) -> Result<(), String> {
    let log = EventLog::from_file(event_log).map_err(|e| e.to_string())?;
    let report = sim::metrics_from_log(&log).map_err(|e| e.to_string())?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        print!("{}", report.render_table());
    }
    Ok(())
}

fn serve(port: u16, state: Option<PathBuf>, registry: Option<PathBuf>) -> Result<(), String> {
    let registry = match registry {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| format!("reading {}: {e}", path.display()))?;
            parse_registry(&text).map_err(|e| e.to_string())?
        }
        None => gymtrack::demo_registry(),
    };
    server::serve_forever(&format!("127.0.0.1:{port}"), &registry, state).map_err(|e| e.to_string())
}

fn replay(event_log: &Path, cloud: &str) -> Result<(), String> {
    let log = EventLog::from_file(event_log).map_err(|e| e.to_string())?;
    let base = cloud.trim_end_matches('/');
    let mut sent = 0usize;
    let mut rejected = 0usize;
    for record in &log.records {
        let LogRecord::Patch {
            method, path, body, ..
        } = record
        else {
            continue;
        };
        let url = format!("{base}{path}");
        let payload = serde_json::to_vec(body).expect("patch body serializes");
        let response =
            client::call(method, &url, Some(&payload)).map_err(|e| format!("PATCH {url}: {e}"))?;
        if response.status == 200 {
            sent += 1;
        } else {
            rejected += 1;
            eprintln!(
                "warning: {method} {url} -> {} ({})",
                response.status,
                String::from_utf8_lossy(&response.body)
            );
        }
    }
    println!("replayed {sent} PATCHes to {base} ({rejected} rejected)");
    Ok(())
}

fn battery(profile_path: &Path) -> Result<(), String> {
    let text = std::fs::read_to_string(profile_path)
        .map_err(|e| format!("reading {}: {e}", profile_path.display()))?;
    let profile: PowerProfile = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    profile.validate().map_err(|e| e.to_string())?;
    let days = battery_life_days(&profile);
    println!("battery life: {days:.1} days");
    println!(
        "  usable charge: {:.1} mAh ({}% of {} mAh)",
        profile.battery_capacity_mah * profile.usable_fraction,
        profile.usable_fraction * 100.0,
        profile.battery_capacity_mah
    );
    println!(
        "  daily draw: {:.3} mAh ({} h advertising at {} mA, {} h idle at {} mA)",
        profile.advertising_hours_per_day * profile.advertising_current_ma
            + (24.0 - profile.advertising_hours_per_day) * profile.idle_current_ma,
        profile.advertising_hours_per_day,
        profile.advertising_current_ma,
        24.0 - profile.advertising_hours_per_day,
        profile.idle_current_ma
    );
    let reference = PowerProfile::reference();
    if (profile.idle_current_ma - reference.idle_current_ma).abs() < 1e-9
        && (profile.advertising_current_ma - reference.advertising_current_ma).abs() < 1e-9
    {
        println!(
            "  note: the prototype hardware this models was published with a ~400 day estimate; \
             that figure is not reproducible from these currents (they give ≈215 days)."
        );
    }
    Ok(())
}
