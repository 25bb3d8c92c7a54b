use std::io::{BufReader, Write};
use std::process::Command;

use eee_bundle::harness::{
    emit_csv, parse_csv, run_experiment, sweep, write_report_csv, ExperimentConfig, SweepAxis, TraceSource,
    CSV_HEADER,
};
use eee_bundle::scheduling::Algorithm;
use eee_bundle::Error;

/// Two-second, 1 Gb/s version of the reference workload.
fn small(algorithm: Algorithm) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::parse(
        "duration = 2\n\
         mean_aggregate_rate = 1.5e9\n\
         n_end_to_end_flows = 400\n",
    )
    .unwrap();
    cfg.algorithm = algorithm;
    cfg
}

fn sig9_eq(a: f64, b: f64) -> bool {
    a == b || ((a - b) / b).abs() <= 5e-9
}

#[test]
fn empty_trace_sleeps_all_the_time() {
    let trace = tempfile::NamedTempFile::new().unwrap();
    let cfg = ExperimentConfig {
        source: TraceSource::File {
            path: trace.path().to_path_buf(),
            format: eee_bundle::traffic::TraceFormat::Csv,
        },
        duration: 2.0,
        ..ExperimentConfig::default()
    };
    let r = run_experiment(&cfg).unwrap();
    assert!((r.energy_fraction - 0.1).abs() < 1e-12);
    assert_eq!(r.loss_percent, 0.0);
    assert_eq!(r.mean_delay, None);
    assert_eq!(r.intervals.len(), 4);
    let mut out = Vec::new();
    write_report_csv(&r, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.lines().last().unwrap().contains(",,"), "{text}");
}

#[test]
fn runs_are_reproducible() {
    let cfg = small(Algorithm::Greedy);
    let (a, b) = (run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
    assert_eq!(a, b);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_report_csv(&a, &mut ca).unwrap();
    write_report_csv(&b, &mut cb).unwrap();
    assert_eq!(ca, cb);
    assert_ne!(run_experiment(&cfg.clone().with_seed(2)).unwrap(), a);
}

#[test]
fn aggregates_follow_included_intervals() {
    let r = run_experiment(&small(Algorithm::BoundedGreedy { bound: 2e8 })).unwrap();
    let inc: Vec<_> = r.intervals.iter().filter(|i| i.included).collect();
    assert_eq!(inc.len(), 3);
    let offered: u64 = inc.iter().map(|i| i.packets_offered).sum();
    let dropped: u64 = inc.iter().map(|i| i.packets_dropped).sum();
    assert_eq!(r.packets_offered, offered);
    assert_eq!(r.loss_percent, if offered == 0 { 0.0 } else { 100.0 * dropped as f64 / offered as f64 });
    let energy = inc.iter().map(|i| i.energy_fraction).sum::<f64>() / 3.0;
    assert!((r.energy_fraction - energy).abs() < 1e-12);
}

#[test]
fn conservative_beats_equitable() {
    let eq = run_experiment(&small(Algorithm::Equitable)).unwrap();
    let cons = run_experiment(&small(Algorithm::Conservative { margin: 0.2 })).unwrap();
    assert!(cons.energy_fraction < eq.energy_fraction);
    assert!(cons.lower_bound <= cons.energy_fraction);
}

#[test]
fn single_value_sweep_equals_run() {
    let cfg = small(Algorithm::Conservative { margin: 0.2 });
    let swept = sweep(&cfg, SweepAxis::BufferSize, &[10000.0]).unwrap();
    assert_eq!(swept, vec![run_experiment(&cfg).unwrap()]);
}

#[test]
fn greedy_loss_shrinks_with_buffer() {
    let cfg = small(Algorithm::Greedy);
    let reports = sweep(&cfg, SweepAxis::BufferSize, &[100.0, 1000.0, 10000.0]).unwrap();
    let losses: Vec<f64> = reports.iter().map(|r| r.loss_percent).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
    assert_eq!(reports.iter().map(|r| r.buffer_size).collect::<Vec<_>>(), [100, 1000, 10000]);
}

#[test]
fn sampling_period_sweep_is_sane() {
    let cfg = small(Algorithm::Conservative { margin: 0.2 });
    let reports = sweep(&cfg, SweepAxis::SamplingPeriod, &[0.05, 0.25, 1.0]).unwrap();
    for r in &reports {
        assert!(r.loss_percent.is_finite() && r.loss_percent >= 0.0);
        assert!((0.1..=1.0).contains(&r.energy_fraction));
    }
}

#[test]
fn csv_round_trips_at_nine_digits() {
    let cfg = small(Algorithm::Greedy);
    let r = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    emit_csv(&path, std::slice::from_ref(&r), None).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    let rows = parse_csv(BufReader::new(text.as_bytes())).unwrap();
    assert_eq!(rows.len(), r.intervals.len() + 1);
    let all = rows.last().unwrap();
    assert_eq!(all.axis_value, "all");
    assert_eq!(all.algorithm, "greedy");
    assert!(sig9_eq(all.energy_fraction, r.energy_fraction));
    assert!(sig9_eq(all.loss_percent, r.loss_percent));
    assert!(sig9_eq(all.lower_bound, r.lower_bound));
    assert!(sig9_eq(all.mean_delay_us.unwrap(), r.mean_delay.unwrap() * 1e6));
    for (row, interval) in rows.iter().zip(&r.intervals) {
        assert_eq!(row.axis_value, interval.index.to_string());
        assert!(sig9_eq(row.energy_fraction, interval.energy_fraction));
    }

    let path = dir.path().join("sweep.csv");
    let values = [0.1, 0.5];
    let reports = sweep(&cfg, SweepAxis::SamplingPeriod, &values).unwrap();
    emit_csv(&path, &reports, Some(&values)).unwrap();
    let rows = parse_csv(BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(rows.iter().map(|r| r.axis_value.as_str()).collect::<Vec<_>>(), ["0.1", "0.5"]);
}

#[test]
fn unwritable_output_names_the_path() {
    let r = run_experiment(&small(Algorithm::Greedy)).unwrap();
    let err = emit_csv("/nonexistent/dir/out.csv", &[r], None).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
}

#[test]
fn bad_configs_are_rejected() {
    assert!(ExperimentConfig::parse("sampling_period = 0").and_then(|c| c.validate()).is_err());
    assert!(ExperimentConfig::parse("duration = 0.5").and_then(|c| c.validate()).is_err());
    assert!(ExperimentConfig::parse("colour = blue").is_err());
    assert!(ExperimentConfig::parse("algorithm = magic").is_err());
    assert!(ExperimentConfig::parse("no equals sign").is_err());
}

#[test]
fn cli_run_and_sweep() {
    let bin = env!("CARGO_BIN_EXE_eee-bundle");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    let mut f = std::fs::File::create(&cfg).unwrap();
    writeln!(f, "# small run\nalgorithm = greedy\nduration = 1\nmean_aggregate_rate = 5e8").unwrap();
    drop(f);

    let out = Command::new(bin).args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 + 1);

    let out = Command::new(bin)
        .args(["sweep", "--axis", "buffer_size", "--values", "10,100", "--seed", "3", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows = parse_csv(BufReader::new(&out.stdout[..])).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].buffer_pkts, 100);

    let out = Command::new(bin).args(["sigma-curve"]).output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 102);

    let out = Command::new(bin).args(["run", "--config", "/nonexistent.cfg"]).output().unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn cli_generate_then_histogram() {
    let bin = env!("CARGO_BIN_EXE_eee-bundle");
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let out = Command::new(bin)
        .args(["generate", "--flows", "50", "--rate", "1e8", "--duration", "0.1", "--out"])
        .arg(&trace)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = Command::new(bin).args(["histogram", "--trace"]).arg(&trace).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().starts_with("#variance,"));
}
