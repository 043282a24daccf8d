use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use xeff_core::catalog::io::save_catalog;
use xeff_core::catalog::synthetic::bundled_corpus;

fn xeff(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_xeff"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "xeff {args:?}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// Starts `xeff serve` on an ephemeral port and returns its base URL.
fn start_server(catalog: &Path, logs: &Path) -> (Server, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_xeff"))
        .args(["serve", "--port", "0", "--catalog", p(catalog), "--logs", p(logs)])
        .env("RUST_LOG", "info")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let stderr = child.stderr.take().unwrap();
    let server = Server(child);
    for line in BufReader::new(stderr).lines() {
        let line = line.unwrap();
        if let Some(url) = line.split("listening on ").nth(1) {
            return (server, url.trim().to_string());
        }
    }
    panic!("server exited before listening");
}

#[test]
fn ingest_simulate_analyze_and_serve() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    let paths = save_catalog(&bundled_corpus(), &raw).unwrap();
    let cat = tmp.path().join("catalog");
    let mut args = vec!["ingest", "--movies", p(&paths.movies), "--out", p(&cat), "--epochs", "20"];
    let tags = paths.tags.clone().unwrap();
    args.extend(["--tags", p(&tags)]);
    xeff(&args);
    assert!(cat.join("movies.csv").exists());
    assert!(cat.join("embed.json").exists());

    let sim = tmp.path().join("sim");
    let out = xeff(&[
        "simulate", "--catalog", p(&cat), "--sessions", "2", "--trials", "3", "--eeg", "--out", p(&sim),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("Feedback: first-five"), "{stdout}");
    assert_eq!(std::fs::read_dir(sim.join("sessions")).unwrap().count(), 4);
    assert!(sim.join("summary.json").exists());

    let report = tmp.path().join("report");
    xeff(&[
        "analyze",
        "--sessions-dir",
        p(&sim.join("sessions")),
        "--eeg-dir",
        p(&sim.join("eeg")),
        "--out",
        p(&report),
    ]);
    for t in ["correlations.csv", "efficacy_tests.csv", "classification.csv", "lateralization.csv"] {
        let body = std::fs::read_to_string(report.join(t)).unwrap();
        assert!(body.lines().count() > 1, "{t} is empty");
    }

    let logs = tmp.path().join("logs");
    let (server, url) = start_server(&cat, &logs);
    let health: serde_json::Value = serde_json::from_slice(&xeff(&["session", "--server", &url, "health"]).stdout).unwrap();
    assert_eq!(health["status"], "ok");

    let items: serde_json::Value =
        serde_json::from_slice(&xeff(&["session", "--server", &url, "onboarding", "--count", "5"]).stdout).unwrap();
    let mut args = vec![
        "session".to_string(),
        "--server".into(),
        url.clone(),
        "create".into(),
        "--group".into(),
        "feedback".into(),
        "--id".into(),
        "cli1".into(),
    ];
    for (i, e) in items.as_array().unwrap().iter().enumerate() {
        args.push("--rate".into());
        args.push(format!("{}={}", e["item"], 1 + i % 5));
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let list: serde_json::Value = serde_json::from_slice(&xeff(&args).stdout).unwrap();
    let first = list["items"][0]["item"].to_string();
    xeff(&["session", "--server", &url, "explain", "cli1", &first]);
    let next: serde_json::Value = serde_json::from_slice(&xeff(&["session", "--server", &url, "next", "cli1"]).stdout).unwrap();
    assert_eq!(next["trial"], 2);
    drop(server);

    // The log written by the first server is replayed by the second.
    assert!(logs.join("cli1.jsonl").exists());
    let (_server, url) = start_server(&cat, &logs);
    let sessions: serde_json::Value = serde_json::from_slice(&xeff(&["session", "--server", &url, "list"]).stdout).unwrap();
    assert_eq!(sessions[0]["id"], "cli1");
    assert_eq!(sessions[0]["trial"], 2);
}

#[test]
fn bad_rating_argument_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_xeff"))
        .args(["session", "create", "--group", "feedback", "--rate", "12"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ITEM=RATING"));
}
