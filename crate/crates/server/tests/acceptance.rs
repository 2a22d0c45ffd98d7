//! Acceptance suite: one PASS/FAIL line per criterion. Positional arguments
//! select criteria by substring, e.g. `cargo test --test acceptance -- replay`.

mod common;
#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use common::{cmd, run_scripted, scenario, two_bus_with_capacitor, Scripted};
use gridops_core::gmd::{build_dc_network, line_emfs, solve_gic, FieldBreakpoint, FieldEvent, FieldVector};
use gridops_core::grid::synthetic::{generate_case, gic_fixture_case, two_bus_case};
use gridops_core::phasor::{crc_ccitt, decode_frame, encode_config_frame, encode_data_frame, ConfigFrame, DataFrame, FrameHeader, PhasorFrame};
use gridops_core::powerflow::{solve_power_flow, SimulationState, SolveOptions};
use gridops_server::bus::{wall_now, Broker};
use gridops_server::gateway::Gateway;
use gridops_server::session::{load_scenario, replay, run_live, Header, LiveOptions, Record, RecordWriter, Session};
use gridops_server::wire::serve_ws;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn run_check(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => {
            Err(format!("panicked: {}", p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()))
        }
    }
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let checks: Vec<(&str, fn() -> Outcome)> = vec![
        ("power-flow oracle", power_flow_oracle),
        ("scenario timing", scenario_timing),
        ("capacity", capacity),
        ("gic physics", gic_physics),
        ("rbac", rbac),
        ("replay determinism", replay_determinism),
        ("gmd scenario", gmd_scenario),
        ("reliability score", reliability_score),
        ("codec", codec),
        ("capacity exhaustion", capacity_exhaustion),
    ];
    // The paced run takes ten minutes; everything else runs meanwhile.
    let timing = wanted("scenario timing").then(|| std::thread::spawn(|| run_check(scenario_timing)));
    let mut results = Vec::new();
    for (name, f) in &checks {
        if !wanted(name) || *name == "scenario timing" {
            continue;
        }
        let started = Instant::now();
        let r = run_check(*f);
        eprintln!("  {name} done in {:.1} s", started.elapsed().as_secs_f64());
        results.push((*name, r));
    }
    if let Some(h) = timing {
        results.push(("scenario timing", h.join().unwrap()));
    }
    results.sort_by_key(|(name, _)| checks.iter().position(|(n, _)| n == name));
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn power_flow_oracle() -> Outcome {
    let started = Instant::now();
    let opts = SolveOptions { flat_start: true, ..SolveOptions::default() };
    let newton = |case: &gridops_core::grid::NetworkCase| solve_power_flow(case, &SimulationState::from_case(case, 0.0), &opts);
    let mut max_fixture_iters = 0;
    for case in [two_bus_case(), gic_fixture_case()] {
        let sol = newton(&case).map_err(|e| e.to_string())?;
        let oracle = support::gauss_seidel::solve(&case, 1e-12, 200_000).ok_or("oracle did not converge on a fixture")?;
        for i in 0..case.buses.len() {
            ensure!((sol.vm[i] - oracle.vm(i)).abs() <= 1e-5, "fixture bus {i}: {} vs {}", sol.vm[i], oracle.vm(i));
        }
        max_fixture_iters = max_fixture_iters.max(sol.iterations);
    }
    ensure!(max_fixture_iters <= 10, "{max_fixture_iters} iterations on a fixture");
    let (mut compared, mut seed, mut worst) = (0, 0, 0.0f64);
    while compared < 1000 {
        seed += 1;
        let case = support::random_case(seed);
        let Some(oracle) = support::gauss_seidel::solve(&case, 1e-11, 200_000) else { continue };
        let sol = newton(&case).map_err(|e| format!("seed {seed}: {e}"))?;
        for i in 0..case.buses.len() {
            worst = worst.max((sol.vm[i] - oracle.vm(i)).abs());
        }
        compared += 1;
    }
    let elapsed = started.elapsed().as_secs_f64();
    ensure!(worst <= 1e-5, "worst |dV| {worst:e}");
    ensure!(elapsed < 10.0, "took {elapsed:.1} s");
    Ok(format!("1000 random cases, worst |dV| {worst:.1e} pu, fixtures in ≤{max_fixture_iters} iterations, {elapsed:.1} s"))
}

fn scenario_timing() -> Outcome {
    let (sc, case) = load_scenario(&common::repo_root().join("scenarios/education.json"), None).map_err(|e| e.to_string())?;
    let header = Header::new(sc.clone(), case.clone());
    let session = Session::new(sc.clone(), case);
    let gw = Gateway::new(Broker::new(), session.desk().clone(), sc.tokens.clone(), sc.sim_start, sc.dt);
    let writer = RecordWriter::new(std::io::sink(), &header).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let (report, _) = run_live(session, &gw, writer, LiveOptions::default(), &mut |_| {}).map_err(|e| e.to_string())?;
    let wall = started.elapsed().as_secs_f64();
    ensure!((wall - 600.0).abs() <= 5.0, "ran {wall:.2} wall s");
    ensure!(gw.sim_time() == 72000.0 && report.sim_end == "20:00:00", "ended at {} ({})", gw.sim_time(), report.sim_end);
    ensure!(report.steps == 18000, "{} steps", report.steps);
    Ok(format!("{wall:.2} wall s, final clock {}", report.sim_end))
}

fn capacity() -> Outcome {
    const CLIENTS: usize = 16;
    let sc = scenario("capacity", 3600.0, json!({ "dt": 60, "timescale": 60 }));
    let case = generate_case(2000, 1);
    let session = Session::new(sc.clone(), case);
    let gw = Arc::new(Gateway::new(Broker::new(), session.desk().clone(), sc.tokens.clone(), sc.sim_start, sc.dt));
    let server = serve_ws(TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?, gw.clone()).map_err(|e| e.to_string())?;
    let addr = server.local_addr();

    #[derive(serde::Deserialize)]
    struct Head {
        topic: String,
        wall_ts: f64,
    }
    let stop = Arc::new(AtomicBool::new(false));
    let latencies = Arc::new(Mutex::new(Vec::<f64>::new()));
    let ready = Arc::new(std::sync::Barrier::new(CLIENTS + 1));
    let clients: Vec<_> = (0..CLIENTS)
        .map(|i| {
            let (stop, latencies, ready) = (stop.clone(), latencies.clone(), ready.clone());
            std::thread::spawn(move || -> Result<usize, String> {
                let (mut ws, _) = tungstenite::connect(format!("ws://{addr}/?token=ov&name=c{i}")).map_err(|e| e.to_string())?;
                if let tungstenite::stream::MaybeTlsStream::Plain(s) = ws.get_ref() {
                    s.set_read_timeout(Some(Duration::from_millis(200))).map_err(|e| e.to_string())?;
                }
                ws.send(tungstenite::Message::text(json!({ "op": "sub", "filter": "data/#" }).to_string())).map_err(|e| e.to_string())?;
                ready.wait();
                let mut mine = Vec::new();
                while !stop.load(Ordering::Relaxed) {
                    match ws.read() {
                        Ok(tungstenite::Message::Text(t)) => {
                            let now = wall_now();
                            let head: Head = serde_json::from_str(t.as_str()).map_err(|e| e.to_string())?;
                            if head.topic.starts_with("data/") {
                                mine.push(now - head.wall_ts);
                            }
                        }
                        Ok(tungstenite::Message::Close(c)) => return Err(format!("client {i} closed: {c:?}")),
                        Ok(_) => {}
                        Err(tungstenite::Error::Io(e)) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
                        Err(e) => return Err(format!("client {i}: {e}")),
                    }
                }
                let n = mine.len();
                latencies.lock().unwrap().extend(mine);
                Ok(n)
            })
        })
        .collect();
    ready.wait();
    let deadline = Instant::now() + Duration::from_secs(10);
    while gw.broker().client_count() < CLIENTS {
        ensure!(Instant::now() < deadline, "only {} clients connected", gw.broker().client_count());
        std::thread::sleep(Duration::from_millis(10));
    }

    // Depth of every client queue, sampled just before each step is due.
    let depths = Arc::new(Mutex::new(Vec::<usize>::new()));
    let min_clients = Arc::new(Mutex::new(CLIENTS));
    let sampler = {
        let (gw, depths, min_clients, stop) = (gw.clone(), depths.clone(), min_clients.clone(), stop.clone());
        std::thread::spawn(move || {
            while !stop.load(Ordering::Relaxed) {
                let d = gw.broker().queue_depths();
                let mut m = min_clients.lock().unwrap();
                *m = (*m).min(d.len());
                depths.lock().unwrap().push(d.iter().map(|x| x.2).max().unwrap_or(0));
                drop(m);
                std::thread::sleep(Duration::from_millis(20));
            }
        })
    };
    let mut step_times = Vec::new();
    let mut last = Instant::now();
    let writer = RecordWriter::new(std::io::sink(), &Header::new(sc.clone(), session.engine().case().clone())).map_err(|e| e.to_string())?;
    let (report, _) = run_live(session, &gw, writer, LiveOptions::default(), &mut |_| {
        step_times.push(last.elapsed().as_secs_f64());
        last = Instant::now();
    })
    .map_err(|e| e.to_string())?;
    std::thread::sleep(Duration::from_secs(2));
    stop.store(true, Ordering::Relaxed);
    sampler.join().unwrap();
    let mut per_client = Vec::new();
    for c in clients {
        per_client.push(c.join().unwrap()?);
    }
    drop(server);

    ensure!(report.steps == 60, "{} steps", report.steps);
    let mut lat = latencies.lock().unwrap().clone();
    ensure!(!lat.is_empty(), "no envelopes delivered");
    lat.sort_by(f64::total_cmp);
    let p99 = lat[(lat.len() * 99).div_ceil(100) - 1];
    let expected = per_client[0];
    ensure!(per_client.iter().all(|&n| n == expected), "uneven delivery {per_client:?}");
    ensure!(p99 < 1.0, "p99 latency {p99:.3} s");
    let evicted = CLIENTS - *min_clients.lock().unwrap();
    ensure!(evicted == 0, "{evicted} clients evicted");
    let d = depths.lock().unwrap().clone();
    let third = d.len() / 3;
    let (head, tail) = (&d[..third], &d[d.len() - third..]);
    let per_step = expected / 61 + 1;
    let (hmax, tmax) = (head.iter().max().copied().unwrap_or(0), tail.iter().max().copied().unwrap_or(0));
    ensure!(tmax <= hmax.max(per_step), "queue depth grew from {hmax} to {tmax}");
    let slowest = step_times.iter().skip(1).fold(0.0f64, |m, &t| m.max(t));
    Ok(format!(
        "{CLIENTS} clients × {expected} envelopes, p99 {:.1} ms, max {:.1} ms, max queue depth {} (early) / {} (late), slowest step interval {slowest:.2} s",
        p99 * 1e3,
        lat.last().unwrap() * 1e3,
        hmax,
        tmax
    ))
}

fn gic_physics() -> Outcome {
    let event = |north: f64, east: f64| FieldEvent {
        onset: 0.0,
        duration: 600.0,
        waveform: vec![FieldBreakpoint { t_offset: 0.0, e_north: north, e_east: east }],
        latitude_scaling: None,
    };
    let case = gic_fixture_case();
    let net = build_dc_network(&case).map_err(|e| e.to_string())?;
    let unit = line_emfs(&net, &event(0.0, 1.0), FieldVector { north: 0.0, east: 1.0 })[0];
    let field = FieldVector { north: 0.0, east: 100.0 / unit };
    let sol = solve_gic(&net, &line_emfs(&net, &event(0.0, field.east), field)).map_err(|e| e.to_string())?;
    // Oracle: two neutral nodes, each 0.5 Ω to ground, joined by 3 Ω with a
    // 100 V source: I = 100 / (0.5 + 3 + 0.5).
    let want = 100.0 / (0.5 + 3.0 + 0.5);
    let (a, b) = (sol.neutral_current[0], sol.neutral_current[1]);
    ensure!((a.abs() - want).abs() < 1e-9 && (b.abs() - want).abs() < 1e-9, "fixture currents {a}, {b}");
    ensure!(a * b < 0.0, "fixture currents share a sign");

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_sum, mut worst_lin) = (0.0f64, 0.0f64);
    for seed in 0..100 {
        let mut case = generate_case(rng.random_range(16..=150), seed);
        for s in &mut case.substations {
            s.grounding_resistance_ohm = rng.random_range(0.05..3.0);
        }
        let net = build_dc_network(&case).map_err(|e| format!("seed {seed}: {e}"))?;
        let e = FieldVector { north: rng.random_range(-8.0..8.0), east: rng.random_range(-8.0..8.0) };
        let ev = event(0.0, 0.0);
        let s1 = solve_gic(&net, &line_emfs(&net, &ev, e)).map_err(|e| e.to_string())?;
        let s2 = solve_gic(&net, &line_emfs(&net, &ev, e.scaled(2.0))).map_err(|e| e.to_string())?;
        let scale = s1.neutral_current.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        worst_sum = worst_sum.max(s1.neutral_current.iter().sum::<f64>().abs() / scale);
        for (x, y) in s1.neutral_current.iter().zip(&s2.neutral_current) {
            worst_lin = worst_lin.max((y - 2.0 * x).abs() / scale);
        }
    }
    ensure!(worst_sum <= 1e-9, "Σ neutral currents {worst_sum:e} (relative)");
    ensure!(worst_lin <= 1e-12, "linearity error {worst_lin:e} (relative)");
    Ok(format!("fixture ±{want} A, worst Σ {worst_sum:.1e}, worst linearity {worst_lin:.1e} over 100 networks"))
}

fn rbac() -> Outcome {
    let (mut sc, case) = load_scenario(&common::repo_root().join("scenarios/education.json"), None).map_err(|e| e.to_string())?;
    sc.sim_span = 120.0;
    sc.tokens = common::TOKENS.iter().map(|(t, r)| (t.to_string(), r.to_string())).collect();
    let quiet = run_scripted(sc.clone(), case.clone(), &[]);
    let run = run_scripted(sc, case, &[cmd(10, "voltage_support", "ShedLoadPercent", json!({ "target": 1, "value": 50 }))]);
    let acks = run.on_topic("notif/command");
    ensure!(acks.len() == 1, "{} command notifications", acks.len());
    let d = &acks[0]["detail"];
    ensure!(d["outcome"] == "deny" && d["suspicious"] == true, "notification detail {d}");
    ensure!(run.digests() == quiet.digests(), "engine state differs from the run without the command");
    let other: usize = run.outputs.iter().map(|o| o.notifications.len()).sum::<usize>() - quiet.outputs.iter().map(|o| o.notifications.len()).sum::<usize>();
    ensure!(other == 0, "{other} extra engine notifications");
    Ok(format!("deny ({}), suspicious, {} identical step digests, 1 notification", d["code"], run.digests().len()))
}

fn education_script() -> Vec<Scripted> {
    vec![
        cmd(5, "generation", "SetGenMW", json!({ "target": 2, "value": 60 })),
        cmd(5, "voltage_support", "ShedLoadPercent", json!({ "target": 3, "value": 10 })),
        cmd(40, "voltage_support", "SwitchShuntOff", json!({ "target": 1, "duration": 120 })),
        cmd(41, "generation", "OpenBranchTimed", json!({ "target": 7, "duration": 45 })),
        cmd(90, "instructor", "ShedLoadPercent", json!({ "target": 3, "value": 15, "activate_at": "10:05:00" })),
        cmd(200, "overview", "ToggleAreaAGC", json!({ "target": 1, "value": false })),
        cmd(300, "generation", "SetGenMW", json!({ "target": 2, "value": 1e9 })),
        cmd(310, "generation", "SetGenVoltageSetpoint", json!({ "target": 3, "value": 1.03 })),
        cmd(450, "instructor", "RestoreLoadPercent", json!({ "target": 3, "value": 25 })),
        cmd(500, "generation", "DecommitGen", json!({ "target": 4 })),
    ]
}

fn replay_determinism() -> Outcome {
    let (mut sc, case) = load_scenario(&common::repo_root().join("scenarios/education.json"), None).map_err(|e| e.to_string())?;
    sc.sim_span = 1200.0;
    sc.tokens = common::TOKENS.iter().map(|(t, r)| (t.to_string(), r.to_string())).collect();
    let run = run_scripted(sc.clone(), case.clone(), &education_script());
    let again = run_scripted(sc, case, &education_script());
    ensure!(run.record == again.record, "two runs of the same script wrote different records");

    let path = std::env::temp_dir().join(format!("gridops-acceptance-{}.gorec", std::process::id()));
    std::fs::write(&path, &run.record).map_err(|e| e.to_string())?;
    let rec = Record::read_from(std::fs::File::open(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_file(&path);
    let mut digests = Vec::new();
    let report = replay(&rec, &mut |out| digests.extend(out.digest.clone())).map_err(|e| e.to_string())?;
    ensure!(report.to_bytes() == run.report.to_bytes(), "report bytes differ");
    ensure!(digests == run.digests(), "step digests differ");
    let accepted = run.report.actions.iter().filter(|a| a.verdict.is_allow()).count();
    Ok(format!("{} steps, {} commands ({accepted} accepted), {}-byte report identical", digests.len(), run.report.actions.len(), report.to_bytes().len()))
}

fn gmd_scenario() -> Outcome {
    let (sc, case) = load_scenario(&common::repo_root().join("scenarios/gmd.json"), None).map_err(|e| e.to_string())?;
    let run = run_scripted(sc, case, &[]);
    let onset: Vec<_> = run.on_topic("notif/alarm").into_iter().filter(|n| n["kind"] == "gmd_onset").collect();
    ensure!(onset.len() == 1, "{} onset alarms", onset.len());
    ensure!(onset[0]["sim_time"] == 59280.0, "onset alarm at {}", onset[0]["sim_time"]);

    let gmd: Vec<_> = run.seen.iter().filter(|e| e.topic.starts_with("data/gmd/")).collect();
    let (first, last) = gmd.iter().fold((f64::MAX, f64::MIN), |(a, b), e| (a.min(e.sim_ts), b.max(e.sim_ts)));
    ensure!(first == 59280.0 && last == 59880.0, "data/gmd envelopes span {first}..{last}");
    let steps_in_window = run.outputs.iter().filter_map(|o| o.measurements.as_ref()).filter(|m| (59280.0..=59880.0).contains(&m.sim_time)).count();
    let field_msgs = gmd.iter().filter(|e| e.topic == "data/gmd/field").count();
    ensure!(field_msgs == steps_in_window, "{field_msgs} field envelopes for {steps_in_window} steps in the window");

    let mut by_time: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for e in &gmd {
        let v = e.payload_value();
        let slot = by_time.entry(e.sim_ts as u64).or_default();
        match e.topic.as_str() {
            "data/gmd/field" => slot.0 = v["magnitude"].as_f64().unwrap(),
            "data/gmd/transformers" => slot.1 = v.as_array().unwrap().iter().map(|t| t["temp_C"].as_f64().unwrap()).collect(),
            _ => {}
        }
    }
    let series: Vec<_> = by_time.into_iter().collect();
    let mut rising_pairs = 0;
    for w in series.windows(2) {
        let ((t0, (e0, temp0)), (t1, (e1, temp1))) = (&w[0], &w[1]);
        if e1 >= e0 {
            rising_pairs += 1;
            for (k, (a, b)) in temp0.iter().zip(temp1).enumerate() {
                ensure!(b >= a, "transformer {k} cooled from {a} to {b} between {t0} and {t1} while |E| rose");
            }
        }
    }
    let peak = series.iter().flat_map(|(_, (_, t))| t.iter().copied()).fold(f64::MIN, f64::max);
    Ok(format!("alarm at 16:28:00, data/gmd/# on {steps_in_window} steps 16:28:00-16:38:00, temperatures monotone over {rising_pairs} rising-field steps (peak {peak:.0} °C)"))
}

fn reliability_score() -> Outcome {
    let sc = scenario("score", 300.0, json!({}));
    let run = run_scripted(sc, two_bus_with_capacitor(), &[cmd(10, "voltage_support", "SwitchShuntOn", json!({ "target": 1, "duration": 60 }))]);
    ensure!(run.report.violations.len() == 1, "{} violations", run.report.violations.len());
    ensure!(run.report.final_score == 99.5, "final score {}", run.report.final_score);
    let long = run_scripted(
        scenario("floor", 14400.0, json!({ "dt": 60 })),
        two_bus_with_capacitor(),
        &[cmd(1, "voltage_support", "SwitchShuntOn", json!({ "target": 1 }))],
    );
    for s in [&run.report.series.score, &long.report.series.score] {
        ensure!(s.iter().all(|v| (0.0..=100.0).contains(v)), "score outside [0, 100]");
        ensure!(s.windows(2).all(|w| w[1] <= w[0]), "score increased");
    }
    Ok(format!("60 s one-bus violation gives {}, sustained violation floors at {}", run.report.final_score, long.report.final_score))
}

fn codec() -> Outcome {
    ensure!(crc_ccitt(b"123456789") == 0x29B1 && support::crc_bitwise(b"123456789") == 0x29B1, "check value");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for len in 0..4096 {
        let mut buf = vec![0u8; len];
        rng.fill_bytes(&mut buf);
        ensure!(crc_ccitt(&buf) == support::crc_bitwise(&buf), "CRC differs from the bitwise oracle at length {len}");
    }
    let head = |rng: &mut ChaCha8Rng| FrameHeader { idcode: rng.random(), soc: rng.random(), fracsec: rng.random() };
    for i in 0..10_000 {
        if i % 10 == 0 {
            let frame = ConfigFrame { header: head(&mut rng), nominal_hz: 60, channels: (0..rng.random_range(0..8)).map(|k| format!("BUS{k}")).collect() };
            let back = decode_frame(&encode_config_frame(&frame).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            ensure!(back == PhasorFrame::Config(frame), "config frame {i} changed");
        } else {
            let n = rng.random_range(0..=32);
            let frame = DataFrame {
                header: head(&mut rng),
                phasors: (0..n).map(|_| (f32::from_bits(rng.random()), f32::from_bits(rng.random()))).collect(),
                freq_deviation: f32::from_bits(rng.random()),
            };
            let bytes = encode_data_frame(&frame, 32).map_err(|e| e.to_string())?;
            let PhasorFrame::Data(back) = decode_frame(&bytes).map_err(|e| e.to_string())? else { return Err(format!("frame {i} decoded as config")) };
            let bits = |f: &DataFrame| (f.header, f.phasors.iter().map(|(a, b)| (a.to_bits(), b.to_bits())).collect::<Vec<_>>(), f.freq_deviation.to_bits());
            ensure!(bits(&back) == bits(&frame), "data frame {i} changed");
        }
    }
    let mut crashes = 0;
    for i in 0..100_000 {
        let len = if i % 100 == 0 { rng.random_range(0..=65_536) } else { rng.random_range(0..=256) };
        let mut buf = vec![0u8; len];
        rng.fill_bytes(&mut buf);
        if i % 3 == 0 && len >= 4 {
            buf[0] = 0xAA;
            buf[1] = if i % 2 == 0 { 0x01 } else { 0x31 };
            buf[2..4].copy_from_slice(&(len.min(u16::MAX as usize) as u16).to_be_bytes());
        }
        if catch_unwind(|| decode_frame(&buf)).is_err() {
            crashes += 1;
        }
    }
    ensure!(crashes == 0, "{crashes} fuzz inputs crashed the decoder");
    Ok("CRC matches the bitwise oracle, 10^4 round trips identical, 10^5 fuzz inputs without a crash".into())
}

fn capacity_exhaustion() -> Outcome {
    let (sc, case) = load_scenario(&common::repo_root().join("scenarios/education.json"), None).map_err(|e| e.to_string())?;
    let (start, timescale) = (sc.sim_start, sc.timescale);
    let mut session = Session::new(sc, case);
    while !session.is_finished() {
        let out = session.step(Vec::new()).map_err(|e| e.to_string())?;
        let m = out.measurements.ok_or("session stopped")?;
        if m.capacity.utilization_pct >= 100.0 {
            let wall = (m.sim_time - start) / timescale;
            ensure!((150.0..=250.0).contains(&wall), "utilization reached 100% at {wall:.1} wall s");
            return Ok(format!(
                "utilization reached {:.1}% at {wall:.1} wall-second-equivalents (sim {})",
                m.capacity.utilization_pct,
                gridops_core::clock::format_clock(m.sim_time)
            ));
        }
    }
    Err("utilization never reached 100%".into())
}
