//! Packet trace ingestion.
//!
//! Two input formats are supported: classic pcap captures (Ethernet link
//! type, IPv4 UDP/TCP) and a canonical CSV trace that the rest of the
//! pipeline uses as its interchange format. Both end up as an ordered list
//! of [`PacketRecord`]s with a DL/UL direction relative to the client.

mod csv_trace;
mod pcap;

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorKind;

pub use csv_trace::{emit_canonical_csv, parse_canonical_csv, CsvWarning, ParsedTrace};
pub use pcap::{parse_pcap, write_pcap, ByteOrder, PcapEntry, PcapFrame, TsResolution};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("pcap format error: {0}")]
    Format(String),
    #[error("pcap packet {index} truncated at byte offset {offset}: {detail}")]
    TruncatedPacket {
        index: usize,
        offset: usize,
        detail: String,
    },
    #[error("unsupported pcap link type {0} (only Ethernet, link type 1, is supported)")]
    UnsupportedLinkType(u32),
    #[error("CSV line {line}: {message}")]
    Csv { line: u64, message: String },
}

impl IngestError {
    pub fn kind(&self) -> ErrorKind {
        ErrorKind::Parse
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    Udp,
    Tcp,
}

impl Protocol {
    pub fn from_ip_proto(value: u8) -> Option<Self> {
        match value {
            17 => Some(Protocol::Udp),
            6 => Some(Protocol::Tcp),
            _ => None,
        }
    }

    pub fn ip_proto(self) -> u8 {
        match self {
            Protocol::Udp => 17,
            Protocol::Tcp => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Udp => "UDP",
            Protocol::Tcp => "TCP",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "UDP" => Ok(Protocol::Udp),
            "TCP" => Ok(Protocol::Tcp),
            other => Err(format!("unknown protocol {other:?} (expected UDP or TCP)")),
        }
    }
}

/// Transport five-tuple of a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub src_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
    pub protocol: Protocol,
}

impl FlowKey {
    pub fn new(
        src_ip: Ipv4Addr,
        src_port: u16,
        dst_ip: Ipv4Addr,
        dst_port: u16,
        protocol: Protocol,
    ) -> Self {
        FlowKey {
            src_ip,
            src_port,
            dst_ip,
            dst_port,
            protocol,
        }
    }

    pub fn reversed(&self) -> Self {
        FlowKey {
            src_ip: self.dst_ip,
            src_port: self.dst_port,
            dst_ip: self.src_ip,
            dst_port: self.src_port,
            protocol: self.protocol,
        }
    }

    /// Canonical key of the bidirectional flow: the endpoint that sorts
    /// lower is placed on the source side.
    pub fn normalized(&self) -> Self {
        if (self.src_ip, self.src_port) <= (self.dst_ip, self.dst_port) {
            *self
        } else {
            self.reversed()
        }
    }

    pub fn same_bidirectional(&self, other: &FlowKey) -> bool {
        self.normalized() == other.normalized()
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{} -> {}:{} {}",
            self.src_ip, self.src_port, self.dst_ip, self.dst_port, self.protocol
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Dl,
    Ul,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Dl => "DL",
            Direction::Ul => "UL",
        }
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "DL" => Ok(Direction::Dl),
            "UL" => Ok(Direction::Ul),
            other => Err(format!("invalid direction {other:?} (expected DL or UL)")),
        }
    }
}

/// One captured packet, timestamp relative to trace start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub timestamp_us: u64,
    pub direction: Direction,
    pub size_bytes: u32,
    pub flow: FlowKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceMetadata {
    pub client_ip: Ipv4Addr,
    pub t0_us: u64,
    pub packet_count: usize,
    pub duration_us: u64,
}

/// Output of [`assign_direction`].
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedTrace {
    pub records: Vec<PacketRecord>,
    /// Entries matching the client on neither side, or carrying no flow key.
    pub dropped: usize,
    pub metadata: TraceMetadata,
}

impl DirectedTrace {
    pub fn dl_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.direction == Direction::Dl)
            .count()
    }

    pub fn ul_count(&self) -> usize {
        self.records.len() - self.dl_count()
    }
}

/// Labels each entry DL (towards `client_ip`) or UL (from `client_ip`).
///
/// Timestamps are rebased to the first retained packet. A packet whose both
/// endpoints equal the client is treated as DL.
pub fn assign_direction(entries: &[PcapEntry], client_ip: Ipv4Addr) -> DirectedTrace {
    let mut kept: Vec<(u64, Direction, u32, FlowKey)> = Vec::with_capacity(entries.len());
    let mut dropped = 0usize;
    for entry in entries {
        let Some(flow) = entry.flow else {
            dropped += 1;
            continue;
        };
        let direction = if flow.dst_ip == client_ip {
            Direction::Dl
        } else if flow.src_ip == client_ip {
            Direction::Ul
        } else {
            dropped += 1;
            continue;
        };
        kept.push((entry.ts_us, direction, entry.orig_len, flow));
    }
    let t0_us = kept.first().map(|k| k.0).unwrap_or(0);
    let records: Vec<PacketRecord> = kept
        .into_iter()
        .map(|(ts, direction, size, flow)| PacketRecord {
            timestamp_us: ts.saturating_sub(t0_us),
            direction,
            size_bytes: size,
            flow,
        })
        .collect();
    let metadata = trace_metadata(&records, client_ip, t0_us);
    DirectedTrace {
        records,
        dropped,
        metadata,
    }
}

pub fn trace_metadata(records: &[PacketRecord], client_ip: Ipv4Addr, t0_us: u64) -> TraceMetadata {
    let duration_us = match (records.first(), records.last()) {
        (Some(first), Some(last)) => last.timestamp_us.saturating_sub(first.timestamp_us),
        _ => 0,
    };
    TraceMetadata {
        client_ip,
        t0_us,
        packet_count: records.len(),
        duration_us,
    }
}

/// Keeps the packets of one flow, preserving order.
pub fn filter_flow(records: &[PacketRecord], flow: &FlowKey, bidirectional: bool) -> Vec<PacketRecord> {
    let reversed = flow.reversed();
    records
        .iter()
        .filter(|r| r.flow == *flow || (bidirectional && r.flow == reversed))
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ip(last: u8) -> Ipv4Addr {
        Ipv4Addr::new(192, 168, 1, last)
    }

    fn entry(ts: u64, src: u8, dst: u8) -> PcapEntry {
        PcapEntry {
            ts_us: ts,
            orig_len: 100,
            flow: Some(FlowKey::new(ip(src), 1000, ip(dst), 2000, Protocol::Udp)),
        }
    }

    #[test]
    fn direction_assignment() {
        let client = ip(50);
        let entries = vec![
            entry(10, 1, 50),
            entry(20, 50, 1),
            entry(30, 1, 2),
            PcapEntry {
                ts_us: 40,
                orig_len: 60,
                flow: None,
            },
        ];
        let out = assign_direction(&entries, client);
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].direction, Direction::Dl);
        assert_eq!(out.records[1].direction, Direction::Ul);
        assert_eq!(out.records[0].timestamp_us, 0);
        assert_eq!(out.records[1].timestamp_us, 10);
        assert_eq!(out.dropped, 2);
        assert_eq!(out.dl_count() + out.ul_count() + out.dropped, entries.len());
        assert_eq!(out.metadata.t0_us, 10);
        assert_eq!(out.metadata.duration_us, 10);
    }

    #[test]
    fn neither_side_is_dropped() {
        let out = assign_direction(&[entry(0, 1, 2)], ip(50));
        assert!(out.records.is_empty());
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn normalized_flow_key_is_direction_free() {
        let k = FlowKey::new(ip(9), 5, ip(3), 7, Protocol::Tcp);
        assert_ne!(k, k.reversed());
        assert_eq!(k.normalized(), k.reversed().normalized());
        assert!(k.same_bidirectional(&k.reversed()));
    }

    #[test]
    fn filter_flow_on_mixed_trace() {
        let a = FlowKey::new(ip(1), 1000, ip(50), 2000, Protocol::Udp);
        let b = FlowKey::new(ip(2), 3000, ip(50), 4000, Protocol::Udp);
        let rec = |ts: u64, flow: FlowKey| PacketRecord {
            timestamp_us: ts,
            direction: Direction::Dl,
            size_bytes: 10 + ts as u32,
            flow,
        };
        let trace = vec![
            rec(0, a),
            rec(1, b),
            rec(2, a.reversed()),
            rec(3, b.reversed()),
            rec(4, a),
            rec(5, b),
        ];
        let bidir: Vec<u64> = filter_flow(&trace, &a, true).iter().map(|r| r.timestamp_us).collect();
        assert_eq!(bidir, vec![0, 2, 4]);
        let exact: Vec<u64> = filter_flow(&trace, &a, false).iter().map(|r| r.timestamp_us).collect();
        assert_eq!(exact, vec![0, 4]);
        let other = FlowKey::new(ip(7), 1, ip(8), 2, Protocol::Tcp);
        assert!(filter_flow(&trace, &other, true).is_empty());
        assert!(filter_flow(&[], &a, true).is_empty());
    }
}
