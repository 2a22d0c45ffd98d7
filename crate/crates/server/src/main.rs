use std::fs::File;
use std::io::BufWriter;
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use gridops_core::grid::{serialize_case_json, synthetic::generate_case, validate_case, Severity};
use gridops_server::bus::Broker;
use gridops_server::gateway::{CommandDesk, Gateway};
use gridops_server::phasor_stream::{PhasorStream, DEFAULT_CHANNELS};
use gridops_server::session::{load_scenario, replay, run_live, Header, LiveOptions, Record, RecordWriter, Session};
use gridops_server::wire::serve_ws;

#[derive(Parser)]
#[command(name = "gridops", version, about = "Operator-training power system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario in real time and serve it over WebSocket.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        /// Case file; defaults to the one the scenario names.
        #[arg(long)]
        case: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        phasor_port: Option<u16>,
        /// Overrides the scenario's random seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "session.gorec")]
        record: PathBuf,
        /// Seconds to keep serving after the run so clients can fetch the report.
        #[arg(long, default_value_t = 30)]
        linger: u64,
    },
    /// Re-run a record, verify it step by step and optionally serve it.
    Replay {
        #[arg(long)]
        record: PathBuf,
        /// Pace multiplier when serving.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Serve the replay on this port; without it the replay runs unpaced.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Regenerate the report of a record.
    Report {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic case.
    GenCase {
        #[arg(long)]
        buses: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve { scenario, case, port, phasor_port, seed, record, linger } => serve(scenario, case, port, phasor_port, seed, record, linger),
        Command::Replay { record, speed, port } => replay_cmd(record, speed, port),
        Command::Report { record, out } => {
            let rec = read_record(&record)?;
            let report = replay(&rec, &mut |_| {})?;
            std::fs::write(&out, report.to_bytes()).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", report.summary);
            Ok(())
        }
        Command::GenCase { buses, seed, out } => {
            if buses < 2 {
                bail!("a case needs at least two buses");
            }
            let case = generate_case(buses, seed);
            std::fs::write(&out, serialize_case_json(&case)).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} buses, {} branches to {}", case.buses.len(), case.branches.len(), out.display());
            Ok(())
        }
    }
}

fn read_record(path: &PathBuf) -> anyhow::Result<Record> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Record::read_from(std::io::BufReader::new(file))?)
}

fn serve(
    scenario_path: PathBuf,
    case_path: Option<PathBuf>,
    port: u16,
    phasor_port: Option<u16>,
    seed: Option<u64>,
    record_path: PathBuf,
    linger: u64,
) -> anyhow::Result<()> {
    let (mut scenario, case) = load_scenario(&scenario_path, case_path.as_deref())?;
    if let Some(s) = seed {
        scenario.rng_seed = s;
    }
    let errors: Vec<String> = validate_case(&case).into_iter().filter(|f| f.severity == Severity::Error).map(|f| f.to_string()).collect();
    if !errors.is_empty() {
        bail!("case is not usable: {}", errors.join("; "));
    }

    let header = Header::new(scenario.clone(), case.clone());
    let session = Session::new(scenario.clone(), case.clone());
    let broker = Broker::new();
    let gateway = Arc::new(Gateway::new(broker, session.desk().clone(), scenario.tokens.clone(), scenario.sim_start, scenario.dt));
    let ws = serve_ws(TcpListener::bind(("0.0.0.0", port))?, gateway.clone())?;

    let phasor = match phasor_port {
        Some(p) => {
            let idx = case.index();
            let ids: Vec<u32> =
                if scenario.phasor_buses.is_empty() { case.buses.iter().take(DEFAULT_CHANNELS).map(|b| b.id).collect() } else { scenario.phasor_buses.clone() };
            let mut buses = Vec::new();
            for id in ids {
                let pos = idx.bus.get(&id).with_context(|| format!("phasor bus {id} is not in the case"))?;
                buses.push((*pos, id));
            }
            let stream = PhasorStream::new(&buses);
            stream.listen(TcpListener::bind(("0.0.0.0", p))?);
            log::info!("phasor stream on port {p}");
            Some(stream)
        }
        None => None,
    };

    let writer = RecordWriter::new(BufWriter::new(File::create(&record_path)?), &header)?;
    log::info!(
        "running {} ({} steps of {} s, {} wall s per step), scenario digest {}",
        scenario.name,
        scenario.steps(),
        scenario.dt,
        scenario.wall_period(1.0),
        header.scenario_digest
    );
    let started = Instant::now();
    let (report, _) = run_live(session, &gateway, writer, LiveOptions::default(), &mut |out| {
        if let (Some(p), Some(m)) = (&phasor, &out.measurements) {
            p.publish(m);
        }
    })?;
    println!("{}", report.summary);
    println!("record written to {} after {:.1} s", record_path.display(), started.elapsed().as_secs_f64());
    if linger > 0 {
        log::info!("serving the report for {linger} s");
        std::thread::sleep(Duration::from_secs(linger));
    }
    ws.shutdown();
    Ok(())
}

fn replay_cmd(path: PathBuf, speed: f64, port: Option<u16>) -> anyhow::Result<()> {
    if !(speed > 0.0) {
        bail!("speed must be positive");
    }
    let rec = read_record(&path)?;
    println!("scenario digest {}", rec.header.scenario_digest);
    let served = match port {
        Some(p) => {
            let sc = &rec.header.scenario;
            let desk = Arc::new(CommandDesk::new(Arc::new(rec.header.case.clone()), sc.role_table()));
            let gateway = Arc::new(Gateway::new(Broker::new(), desk, sc.tokens.clone(), sc.sim_start, sc.dt));
            let ws = serve_ws(TcpListener::bind(("0.0.0.0", p))?, gateway.clone())?;
            Some((gateway, ws))
        }
        None => None,
    };
    let period = Duration::from_secs_f64(rec.header.scenario.wall_period(speed));
    let t0 = Instant::now();
    let mut k = 0u32;
    let report = replay(&rec, &mut |out| {
        if let Some((gw, _)) = &served {
            k += 1;
            let deadline = t0 + period * k;
            if let Some(wait) = deadline.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
            if let Some(m) = &out.measurements {
                gw.publish_measurements(m);
                for n in &out.notifications {
                    gw.notify("notif/alarm", m.sim_time, n);
                }
            }
        }
    })?;
    if let Some((gw, _)) = &served {
        gw.set_final_report(&report);
    }
    let verdict = if rec.report.is_some() { "report identical" } else { "record had no report" };
    println!("replay verified {} steps, {verdict}", report.steps);
    println!("{}", report.summary);
    Ok(())
}
