use std::net::Ipv4Addr;

use vrqos::ingest::{assign_direction, parse_pcap, Direction, FlowKey, IngestError, Protocol};

/// One 42-byte Ethernet/IPv4/UDP frame, 10.0.0.1:9944 → 10.0.0.2:50000,
/// captured at t = 1.000500 s with an on-wire length of 1400 bytes.
fn frame() -> Vec<u8> {
    let mut f = Vec::new();
    f.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01, 0x08, 0x00]);
    f.extend_from_slice(&[
        0x45, 0x00, 0x05, 0x6a, 0x00, 0x00, 0x40, 0x00, 0x40, 0x11, 0x00, 0x00, 10, 0, 0, 1, 10, 0, 0, 2,
    ]);
    f.extend_from_slice(&[0x26, 0xd8, 0xc3, 0x50, 0x05, 0x56, 0x00, 0x00]);
    f
}

fn le_us_capture() -> Vec<u8> {
    let mut b = vec![
        0xd4, 0xc3, 0xb2, 0xa1, 0x02, 0x00, 0x04, 0x00, 0, 0, 0, 0, 0, 0, 0, 0, 0xff, 0xff, 0, 0, 0x01, 0, 0, 0,
    ];
    b.extend_from_slice(&[0x01, 0, 0, 0, 0xf4, 0x01, 0, 0, 42, 0, 0, 0, 0x78, 0x05, 0, 0]);
    b.extend_from_slice(&frame());
    b
}

fn be_ns_capture() -> Vec<u8> {
    let mut b = vec![
        0xa1, 0xb2, 0x3c, 0x4d, 0x00, 0x02, 0x00, 0x04, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xff, 0xff, 0, 0, 0, 0x01,
    ];
    // 500_999 ns truncates to 500 µs
    b.extend_from_slice(&[0, 0, 0, 0x01, 0x00, 0x07, 0xa5, 0x07, 0, 0, 0, 42, 0, 0, 0x05, 0x78]);
    b.extend_from_slice(&frame());
    b
}

fn expected_flow() -> FlowKey {
    FlowKey::new(Ipv4Addr::new(10, 0, 0, 1), 9944, Ipv4Addr::new(10, 0, 0, 2), 50000, Protocol::Udp)
}

#[test]
fn hand_assembled_little_endian_micro() {
    let e = parse_pcap(&le_us_capture()).unwrap();
    assert_eq!(e.len(), 1);
    assert_eq!(e[0].ts_us, 1_000_500);
    assert_eq!(e[0].orig_len, 1400);
    assert_eq!(e[0].flow, Some(expected_flow()));
}

#[test]
fn hand_assembled_big_endian_nano() {
    let e = parse_pcap(&be_ns_capture()).unwrap();
    assert_eq!(e[0].ts_us, 1_000_500);
    assert_eq!(e[0].orig_len, 1400);
    assert_eq!(e[0].flow, Some(expected_flow()));
}

#[test]
fn truncated_record_reports_offset() {
    let mut b = le_us_capture();
    b.truncate(b.len() - 10);
    match parse_pcap(&b) {
        Err(IngestError::TruncatedPacket { index, offset, .. }) => {
            assert_eq!(index, 0);
            assert_eq!(offset, 24);
        }
        other => panic!("expected truncation error, got {other:?}"),
    }
    assert!(parse_pcap(&b[..10]).is_err());
}

#[test]
fn direction_relative_to_client() {
    let e = parse_pcap(&le_us_capture()).unwrap();
    let dl = assign_direction(&e, Ipv4Addr::new(10, 0, 0, 2));
    assert_eq!(dl.records[0].direction, Direction::Dl);
    assert_eq!(dl.records[0].timestamp_us, 0);
    assert_eq!(dl.metadata.t0_us, 1_000_500);
    let ul = assign_direction(&e, Ipv4Addr::new(10, 0, 0, 1));
    assert_eq!(ul.records[0].direction, Direction::Ul);
    let none = assign_direction(&e, Ipv4Addr::new(192, 168, 1, 1));
    assert!(none.records.is_empty());
    assert_eq!(none.dropped, 1);
}

#[test]
fn cli_ingest_pcap() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = dir.path().join("cap.pcap");
    std::fs::write(&pcap, le_us_capture()).unwrap();
    let out = dir.path().join("trace.csv");
    let args = |ip: &str, input: &std::path::Path| {
        vec![
            "vrqos".to_string(),
            "ingest".into(),
            input.display().to_string(),
            "--client-ip".into(),
            ip.into(),
            "-o".into(),
            out.display().to_string(),
        ]
    };
    assert_eq!(vrqos::cli::main_with_args(args("10.0.0.2", &pcap)), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# vrqos"));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 2, "{text}");
    assert!(data[1].starts_with("0,DL,1400,10.0.0.1,9944,10.0.0.2,50000"), "{}", data[1]);

    // no matching client: still succeeds with a header-only trace
    assert_eq!(vrqos::cli::main_with_args(args("192.168.0.9", &pcap)), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1);

    let missing = dir.path().join("nope.pcap");
    assert_eq!(vrqos::cli::main_with_args(args("10.0.0.2", &missing)), vrqos::cli::EXIT_IO);
    let garbage = dir.path().join("bad.pcap");
    let mut bad = le_us_capture();
    bad.truncate(50);
    std::fs::write(&garbage, bad).unwrap();
    assert_eq!(vrqos::cli::main_with_args(args("10.0.0.2", &garbage)), vrqos::cli::EXIT_PARSE);
}
