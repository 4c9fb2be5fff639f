mod common;

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::fixture_url;
use kbts_core::rule_model::{self, seed_corpus};

fn kbts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbts"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn seeded_file(dir: &Path) -> String {
    let path = dir.join("rules.json");
    rule_model::save(&seed_corpus(), &path).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn diagnose_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let rules = seeded_file(dir.path());

    let out = kbts(&[
        "--rulebase",
        &rules,
        "diagnose",
        "--fact",
        "keyboard",
        "--fact",
        "Keys are   Sticking",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout(&out),
        "Keyboard might have Spilled Drink or Trapped Debris under Keys -> Remove Keytops and Clean under Keys, or Wash-out Keyboard\n"
    );

    let out = kbts(&["--rulebase", &rules, "diagnose", "--fact", "Nonsense"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).is_empty());

    let missing = dir.path().join("absent.json");
    let out = kbts(&[
        "--rulebase",
        missing.to_str().unwrap(),
        "diagnose",
        "--fact",
        "Audio",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        !missing.exists(),
        "read-only commands must not create the rule base"
    );
}

#[test]
fn beep_outputs() {
    for (args, expected) in [
        (
            vec!["--seconds", "0.1"],
            "very short: normal POST, system is OK\n",
        ),
        (vec!["--seconds", "3"], "very long: 3270 keyboard card\n"),
        (
            vec!["--seconds", "0.1", "--repeating"],
            "infinite: power supply or system board problem or keyboard\n",
        ),
    ] {
        let mut full = vec!["beep"];
        full.extend(args);
        let out = kbts(&full);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(stdout(&out), expected);
    }
    assert_eq!(kbts(&["beep", "--seconds", "-1"]).status.code(), Some(2));
    assert_eq!(kbts(&["beep"]).status.code(), Some(2));
}

#[test]
fn rules_list_export_import() {
    let dir = tempfile::tempdir().unwrap();
    let rules = seeded_file(dir.path());

    let out = kbts(&["--rulebase", &rules, "rules", "list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 34);
    assert!(text.lines().next().unwrap().starts_with("IF"));
    assert!(text.contains("SMART Warning Displayed"));

    let out = kbts(&["--rulebase", &rules, "rules", "export"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), std::fs::read_to_string(&rules).unwrap());

    // A bad import leaves the target untouched.
    let before = std::fs::read(&rules).unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"version": 1, "rules": [{"id": 1, "if": "a", "and": "b", "then": "", "solution": "d"}]}"#)
        .unwrap();
    let out = kbts(&[
        "--rulebase",
        &rules,
        "rules",
        "import",
        "--file",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(std::fs::read(&rules).unwrap(), before);

    let other = dir.path().join("other.json");
    let out = kbts(&[
        "--rulebase",
        other.to_str().unwrap(),
        "rules",
        "import",
        "--file",
        &rules,
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&other).unwrap(), before);
    assert_eq!(
        kbts(&["--rulebase", &rules, "rules", "import"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn agent_sync_command() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("kbts.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "rulebase_path": "rules.json",
            "seed_if_missing": true,
            "agent": {"sources": [fixture_url("monitor.html"), fixture_url("network.html")]}
        })
        .to_string(),
    )
    .unwrap();
    let config = config.to_str().unwrap();

    let out = kbts(&["--config", config, "agent", "sync"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("added: 7\n"), "{text}");
    assert!(text.contains("skipped duplicates: 1\n"), "{text}");

    let out = kbts(&["--config", config, "agent", "sync"]);
    assert!(stdout(&out).contains("added: 0\n"));
    assert_eq!(
        rule_model::load(&dir.path().join("rules.json"))
            .unwrap()
            .len(),
        40
    );
    assert_eq!(
        std::fs::read_to_string(dir.path().join("rules.agent.jsonl"))
            .unwrap()
            .lines()
            .count(),
        2
    );

    // No sources configured.
    assert_eq!(kbts(&["agent", "sync"]).status.code(), Some(2));
}

#[test]
fn serve_refuses_corrupt_rule_base() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("rules.json");
    std::fs::write(&rules, "{ \"version\": 3, \"rules\": [").unwrap();
    let config = dir.path().join("kbts.json");
    std::fs::write(
        &config,
        r#"{"listen_addr": "127.0.0.1:0", "seed_if_missing": true}"#,
    )
    .unwrap();
    let out = kbts(&["--config", config.to_str().unwrap(), "serve"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
    assert_eq!(
        std::fs::read_to_string(&rules).unwrap(),
        "{ \"version\": 3, \"rules\": ["
    );
}

#[test]
fn serve_seeds_missing_rule_base() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("kbts.json");
    std::fs::write(
        &config,
        r#"{"listen_addr": "127.0.0.1:0", "seed_if_missing": true}"#,
    )
    .unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_kbts"))
        .args(["--config", config.to_str().unwrap(), "serve"])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let base = line
        .trim()
        .strip_prefix("kbts listening on ")
        .unwrap()
        .to_string();
    let health: serde_json::Value = reqwest::blocking::get(format!("{base}/health"))
        .unwrap()
        .json()
        .unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(health["rule_count"], 33);
    assert_eq!(
        rule_model::load(&dir.path().join("rules.json"))
            .unwrap()
            .len(),
        33
    );
}
