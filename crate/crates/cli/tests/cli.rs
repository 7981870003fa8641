//! Drives the `qot` binary as a user would.

use std::net::TcpListener;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

const S0: &str = "0123abcd";
const S1: &str = "fedc9876";

fn qot() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qot"))
}

fn run(args: &[&str]) -> Output {
    qot().args(args).output().expect("spawn qot")
}

fn tmp(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn free_port() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().to_string()
}

#[test]
fn local_hybrid_prints_chosen_secret() {
    let secrets = format!("{S0},{S1}");
    let out = run(&["--mode", "hybrid", "--secrets", &secrets, "--choice", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), S1);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["--secrets", "zz23abcd,fedc9876", "--choice", "0"],
        vec!["--secrets", "0123,fedc9876", "--choice", "0"],
        vec!["--secrets", "0123abcd", "--choice", "0"],
        vec!["--secrets", "0123abcd,fedc9876", "--choice", "2"],
        vec!["--mode", "semi:nope", "--secrets", "0123abcd,fedc9876", "--choice", "0"],
        vec!["--role", "sender", "--mode", "hybrid", "--secrets", "0123abcd,fedc9876", "--broker", "127.0.0.1:1", "--listen", "127.0.0.1:0"],
        vec!["--no-such-flag"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn same_seed_gives_identical_transcript_files() {
    let secrets = format!("{S0},{S1}");
    let dirs = [tmp("det-a"), tmp("det-b")];
    for d in &dirs {
        let out = run(&["--mode", "hybrid", "--seed", "7", "--secrets", &secrets, "--choice", "0", "--transcript-out", d.to_str().unwrap()]);
        assert!(out.status.success());
    }
    for f in ["sender.jsonl", "receiver.jsonl"] {
        let a = std::fs::read(dirs[0].join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, std::fs::read(dirs[1].join(f)).unwrap(), "{f}");
    }
}

#[test]
fn aborted_run_exits_3_and_transcript_ends_with_abort() {
    let secrets = format!("{S0},{S1}");
    let d = tmp("abort");
    let out = run(&["--mode", "hybrid", "--secrets", &secrets, "--choice", "0", "--adversary", "guess-committing-receiver", "--transcript-out", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["sender.jsonl", "receiver.jsonl"] {
        let text = std::fs::read_to_string(d.join(f)).unwrap();
        let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
        assert_eq!((last["kind"].as_str(), last["layer"].as_str()), (Some("CONTROL"), Some("bbcs")), "{f}");
        let payload = hex::decode(last["payload_hex"].as_str().unwrap()).unwrap();
        let s = String::from_utf8_lossy(&payload);
        assert!(s.contains("ABORT"), "{f}: {s}");
        assert!(s.contains("bbcs"), "abort names its layer: {s}");
    }
}

#[test]
fn three_process_tcp_run() {
    let (broker, party) = (free_port(), free_port());
    let secrets = format!("{S0},{S1}");
    let d = tmp("tcp");
    std::fs::create_dir_all(&d).unwrap();
    let mut b = qot().args(["--role", "broker", "--seed", "3", "--listen", &broker]).stderr(Stdio::inherit()).spawn().unwrap();
    let sender_log = d.join("sender.jsonl");
    let mut s = qot()
        .args(["--role", "sender", "--seed", "3", "--secrets", &secrets, "--listen", &party, "--broker", &broker, "--transcript-out", sender_log.to_str().unwrap()])
        .stderr(Stdio::inherit())
        .spawn()
        .unwrap();
    let r = qot().args(["--role", "receiver", "--seed", "3", "--choice", "0", "--connect", &party, "--broker", &broker]).output().unwrap();
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(String::from_utf8_lossy(&r.stdout).trim(), S0);
    assert!(s.wait().unwrap().success());
    assert!(b.wait().unwrap().success());
    assert!(std::fs::read_to_string(sender_log).unwrap().lines().count() > 10);
}
