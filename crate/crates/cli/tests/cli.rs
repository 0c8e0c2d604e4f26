use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use spc_core::context::load_corpus;

fn spc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spc")).args(args).output().unwrap()
}

fn spc_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_spc"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gen_is_deterministic_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for p in [&a, &b] {
        let o = spc(&["gen", "--seed", "5", "--count", "200", "--k", "4", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{o:?}");
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(load_corpus(&text).unwrap().len(), 200);
}

#[test]
fn infeasible_board_is_a_data_error() {
    let o = spc(&["gen", "--k", "8", "--n", "7", "--count", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(spc(&["selfplay", "--policy-a", "spcc"]).status.code(), Some(1));
    assert_eq!(spc(&["selfplay", "--theta", "1.5", "--count", "1"]).status.code(), Some(1));
    assert_eq!(spc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(spc(&["--help"]).status.code(), Some(0));
}

#[test]
fn selfplay_over_a_corpus_writes_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let out = dir.path().join("t.jsonl");
    assert!(spc(&["gen", "--count", "6", "--out", corpus.to_str().unwrap()]).status.success());
    let o = spc(&["selfplay", "--corpus", corpus.to_str().unwrap(), "--out", out.to_str().unwrap(), "--json"]);
    assert!(o.status.success(), "{o:?}");
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["games"], 6);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 6);
    let seq = spc(&["selfplay", "--corpus", corpus.to_str().unwrap(), "--json", "--sequential"]);
    assert_eq!(stdout(&seq), stdout(&o));
}

#[test]
fn empty_corpus_reports_zero_games() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("empty.jsonl");
    std::fs::write(&corpus, "").unwrap();
    let o = spc(&["selfplay", "--corpus", corpus.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("games        0"), "{}", stdout(&o));
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "not json\n").unwrap();
    assert_eq!(spc(&["selfplay", "--corpus", bad.to_str().unwrap()]).status.code(), Some(2));
}

fn report(args: &[&str]) -> Value {
    let o = spc(args);
    assert!(o.status.success(), "{o:?}");
    let mut v: Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    v["report"].as_object_mut().unwrap().remove("elapsed_ms");
    v
}

#[test]
fn readbench_recovers_everything_and_is_repeatable() {
    let r = report(&["readbench", "--samples", "500", "--seed", "3", "--json"]);
    assert_eq!(r["report"]["exact"], 500);
    assert_eq!(r, report(&["readbench", "--samples", "500", "--seed", "3", "--json"]));
    let empty = report(&["readbench", "--samples", "0", "--json"]);
    assert_eq!(empty["report"]["samples"], 0);
}

#[test]
fn readbench_without_a_model_falls_back_to_grammar() {
    let dir = tempfile::tempdir().unwrap();
    let o = spc(&["readbench", "--samples", "5", "--backend", "external", "--cache", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("grammar: 5/5"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unavailable"));
}

#[test]
fn play_scripted_human_lines_completes() {
    let lines = "No. Do you see a pair of medium sized dots, close together, one is dark grey the other light grey. \
                 The light grey one is slightly above and the left of the dark one.\n\
                 No, do you see a lone medium sized grey dot?\n\
                 No. do you see a pair where the right one is medium and grey and the left one is smaller and lighter. \
                 The smaller one is slightly below the medium sized one.\n\
                 Yes\n\
                 select 0\n";
    let o = spc_stdin(&["play", "--seed", "0"], lines);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(!text.contains("Sorry, I did not understand"), "{text}");
    assert!(text.contains("agent selected"), "{text}");
    assert!(text.contains("success") || text.contains("failure"));
}

#[test]
fn play_immediate_select_and_commands() {
    let o = spc_stdin(&["play", "--seed", "1", "--role", "agent"], "/help\n/bogus\nselect\nselect 3\n");
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.matches("select <n>   select dot n").count(), 2, "{text}");
    assert!(text.contains("usage: select <n>"));
    assert!(text.contains("agent selected"));
}

#[test]
fn play_ends_gracefully_on_eof() {
    let o = spc_stdin(&["play"], "No\n");
    assert!(o.status.success());
    assert!(stdout(&o).contains("input ended"));
}

#[test]
fn serve_answers_health_checks() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_spc"))
        .args(["serve", "--addr", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut first).unwrap();
    let addr = first.trim().strip_prefix("listening on ").expect("listen line").to_string();
    let mut s = TcpStream::connect(&addr).unwrap();
    s.write_all(b"GET /healthz HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.ends_with("ok"));
}
