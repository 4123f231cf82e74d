// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

use std::io::{BufRead, BufReader};
use std::process::{Command, Stdio};
use std::time::Duration;

use btlab::external::ExternalOracle;
use btlab_core::{Oracle, OracleError, OracleHandle, TokenId};

const BIN: &str = env!("CARGO_BIN_EXE_btlab");

fn mock(args: &[&str]) -> Vec<String> {
    let mut command = vec![BIN.to_string(), "mock-oracle".to_string()];
    command.extend(args.iter().map(|s| s.to_string()));
    command
}

#[test]
fn thousand_round_trips_over_stdio() {
    let oracle = ExternalOracle::spawn(&mock(&["--vocab", "4"]), 4, Duration::from_secs(10)).unwrap();
    let handle = OracleHandle::new(oracle);
    for i in 0..1000u32 {
        let prefix: Vec<TokenId> = (0..i % 17).map(|j| (i + j) % 4).collect();
        let dist = handle.query(&prefix).unwrap();
        assert_eq!(dist.probs(), &[0.25; 4], "request {i}");
    }
    assert_eq!(handle.call_count(), 1000);
}

#[test]
fn thousand_round_trips_over_tcp() {
    let mut server = Command::new(BIN)
        .args(["mock-oracle", "--vocab", "3", "--listen", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut address = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut address).unwrap();
    let oracle = ExternalOracle::tcp(address.trim(), 3, Duration::from_secs(10)).unwrap();
    for i in 0..1000u32 {
        let dist = oracle.query(&[i % 3, 0, 2]).unwrap();
        assert!(dist.probs().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    }
    drop(oracle);
    server.kill().unwrap();
    server.wait().unwrap();
}

#[test]
fn unnormalized_reply_is_malformed() {
    let oracle = ExternalOracle::spawn(&mock(&["--vocab", "2", "--scale", "0.8"]), 2, Duration::from_secs(10)).unwrap();
    match oracle.query(&[1, 0]) {
        Err(OracleError::MalformedResponse { payload, .. }) => assert_eq!(payload, "{\"probs\":[0.4,0.4]}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn wrong_length_is_malformed() {
    let oracle = ExternalOracle::spawn(&mock(&["--vocab", "3"]), 2, Duration::from_secs(10)).unwrap();
    assert!(matches!(oracle.query(&[]), Err(OracleError::MalformedResponse { .. })));
}

#[test]
fn slow_server_times_out_and_poisons_the_connection() {
    let oracle = ExternalOracle::spawn(&mock(&["--delay-ms", "2000"]), 2, Duration::from_millis(100)).unwrap();
    match oracle.query(&[0, 1]) {
        Err(OracleError::Timeout { request }) => assert_eq!(request, "{\"prefix\":[0,1]}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(oracle.query(&[]), Err(OracleError::ConnectionLost { .. })));
}

#[test]
fn exited_server_is_connection_loss() {
    let command = vec!["sh".to_string(), "-c".to_string(), "exit 0".to_string()];
    let oracle = ExternalOracle::spawn(&command, 2, Duration::from_secs(5)).unwrap();
    std::thread::sleep(Duration::from_millis(100));
    assert!(matches!(oracle.query(&[0]), Err(OracleError::ConnectionLost { .. })));
    let missing = vec!["/nonexistent/oracle-server".to_string()];
    assert!(matches!(ExternalOracle::spawn(&missing, 2, Duration::from_secs(1)), Err(OracleError::ConnectionLost { .. })));
}
