//! Classic (libpcap) capture files.

use std::net::Ipv4Addr;

use super::{FlowKey, IngestError, Protocol};

const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
const LINKTYPE_ETHERNET: u32 = 1;
const MAGIC_US: u32 = 0xA1B2_C3D4;
const MAGIC_NS: u32 = 0xA1B2_3C4D;
const ETHERTYPE_IPV4: u16 = 0x0800;
const ETH_HEADER_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsResolution {
    Micro,
    Nano,
}

/// One packet record of a capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapEntry {
    /// Absolute capture time in microseconds since the epoch.
    pub ts_us: u64,
    /// The record header's original (on-the-wire) length.
    pub orig_len: u32,
    /// `None` for frames that are not IPv4 carrying UDP or TCP.
    pub flow: Option<FlowKey>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    order: ByteOrder,
}

impl Reader<'_> {
    fn u32_at(&self, offset: usize) -> u32 {
        let b: [u8; 4] = self.bytes[offset..offset + 4].try_into().expect("4 bytes");
        match self.order {
            ByteOrder::Little => u32::from_le_bytes(b),
            ByteOrder::Big => u32::from_be_bytes(b),
        }
    }
}

/// Parses a classic pcap file held in memory.
///
/// Both byte orders and both timestamp resolutions are accepted; nanosecond
/// timestamps are truncated to microseconds.
pub fn parse_pcap(bytes: &[u8]) -> Result<Vec<PcapEntry>, IngestError> {
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(IngestError::Format(format!(
            "global header truncated: {} of {GLOBAL_HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    let magic_le = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let (order, resolution) = match magic_le {
        MAGIC_US => (ByteOrder::Little, TsResolution::Micro),
        MAGIC_NS => (ByteOrder::Little, TsResolution::Nano),
        m if m.swap_bytes() == MAGIC_US => (ByteOrder::Big, TsResolution::Micro),
        m if m.swap_bytes() == MAGIC_NS => (ByteOrder::Big, TsResolution::Nano),
        m => return Err(IngestError::Format(format!("bad magic number {m:#010x}"))),
    };
    let reader = Reader { bytes, order };
    let link_type = reader.u32_at(20);
    if link_type != LINKTYPE_ETHERNET {
        return Err(IngestError::UnsupportedLinkType(link_type));
    }

    let mut entries = Vec::new();
    let mut offset = GLOBAL_HEADER_LEN;
    while offset < bytes.len() {
        let index = entries.len();
        if bytes.len() - offset < RECORD_HEADER_LEN {
            return Err(IngestError::TruncatedPacket {
                index,
                offset,
                detail: format!(
                    "record header needs {RECORD_HEADER_LEN} bytes, {} left",
                    bytes.len() - offset
                ),
            });
        }
        let ts_sec = reader.u32_at(offset) as u64;
        let ts_frac = reader.u32_at(offset + 4) as u64;
        let incl_len = reader.u32_at(offset + 8) as usize;
        let orig_len = reader.u32_at(offset + 12);
        let body_start = offset + RECORD_HEADER_LEN;
        if bytes.len() - body_start < incl_len {
            return Err(IngestError::TruncatedPacket {
                index,
                offset,
                detail: format!(
                    "body needs {incl_len} bytes, {} left",
                    bytes.len() - body_start
                ),
            });
        }
        let frac_us = match resolution {
            TsResolution::Micro => ts_frac,
            TsResolution::Nano => ts_frac / 1000,
        };
        let frame = &bytes[body_start..body_start + incl_len];
        entries.push(PcapEntry {
            ts_us: ts_sec * 1_000_000 + frac_us,
            orig_len,
            flow: flow_of_frame(frame),
        });
        offset = body_start + incl_len;
    }
    Ok(entries)
}

/// Walks Ethernet, IPv4 and the UDP/TCP header. Network byte order throughout.
fn flow_of_frame(frame: &[u8]) -> Option<FlowKey> {
    if frame.len() < ETH_HEADER_LEN {
        return None;
    }
    let ethertype = u16::from_be_bytes([frame[12], frame[13]]);
    if ethertype != ETHERTYPE_IPV4 {
        return None;
    }
    let ip = &frame[ETH_HEADER_LEN..];
    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return None;
    }
    let ihl = ((ip[0] & 0x0F) as usize) * 4;
    if ihl < 20 || ip.len() < ihl + 4 {
        return None;
    }
    // Non-first fragments carry no transport header.
    let frag_offset = u16::from_be_bytes([ip[6], ip[7]]) & 0x1FFF;
    if frag_offset != 0 {
        return None;
    }
    let protocol = Protocol::from_ip_proto(ip[9])?;
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_ip = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    let l4 = &ip[ihl..];
    let src_port = u16::from_be_bytes([l4[0], l4[1]]);
    let dst_port = u16::from_be_bytes([l4[2], l4[3]]);
    Some(FlowKey::new(src_ip, src_port, dst_ip, dst_port, protocol))
}

/// A frame to be written by [`write_pcap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapFrame {
    pub ts_us: u64,
    /// Original frame length, Ethernet header included.
    pub orig_len: u32,
    pub flow: FlowKey,
}

/// Serializes frames as a classic pcap capture with synthetic
/// Ethernet/IPv4/L4 headers and zero payload. Frames longer than `snaplen`
/// are truncated in the file while keeping their original length.
pub fn write_pcap(
    frames: &[PcapFrame],
    order: ByteOrder,
    resolution: TsResolution,
    snaplen: u32,
) -> Vec<u8> {
    let put16 = |out: &mut Vec<u8>, v: u16| match order {
        ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
        ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
    };
    let put32 = |out: &mut Vec<u8>, v: u32| match order {
        ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
        ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
    };
    let mut out = Vec::new();
    put32(
        &mut out,
        match resolution {
            TsResolution::Micro => MAGIC_US,
            TsResolution::Nano => MAGIC_NS,
        },
    );
    put16(&mut out, 2);
    put16(&mut out, 4);
    put32(&mut out, 0);
    put32(&mut out, 0);
    put32(&mut out, snaplen);
    put32(&mut out, LINKTYPE_ETHERNET);

    for frame in frames {
        let body = synth_frame(frame);
        let incl = body.len().min(snaplen as usize);
        put32(&mut out, (frame.ts_us / 1_000_000) as u32);
        let frac = frame.ts_us % 1_000_000;
        put32(
            &mut out,
            match resolution {
                TsResolution::Micro => frac as u32,
                TsResolution::Nano => (frac * 1000) as u32,
            },
        );
        put32(&mut out, incl as u32);
        put32(&mut out, frame.orig_len);
        out.extend_from_slice(&body[..incl]);
    }
    out
}

fn synth_frame(frame: &PcapFrame) -> Vec<u8> {
    let l4_len = match frame.flow.protocol {
        Protocol::Udp => 8,
        Protocol::Tcp => 20,
    };
    let min_len = ETH_HEADER_LEN + 20 + l4_len;
    let total = (frame.orig_len as usize).max(min_len);
    let mut buf = vec![0u8; total];
    buf[0..6].copy_from_slice(&[0x02, 0, 0, 0, 0, 0x02]);
    buf[6..12].copy_from_slice(&[0x02, 0, 0, 0, 0, 0x01]);
    buf[12..14].copy_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
    let ip = &mut buf[ETH_HEADER_LEN..];
    ip[0] = 0x45;
    let ip_total = (total - ETH_HEADER_LEN) as u16;
    ip[2..4].copy_from_slice(&ip_total.to_be_bytes());
    ip[8] = 64;
    ip[9] = frame.flow.protocol.ip_proto();
    ip[12..16].copy_from_slice(&frame.flow.src_ip.octets());
    ip[16..20].copy_from_slice(&frame.flow.dst_ip.octets());
    let l4 = &mut ip[20..];
    l4[0..2].copy_from_slice(&frame.flow.src_port.to_be_bytes());
    l4[2..4].copy_from_slice(&frame.flow.dst_port.to_be_bytes());
    match frame.flow.protocol {
        Protocol::Udp => {
            let udp_len = (total - ETH_HEADER_LEN - 20) as u16;
            l4[4..6].copy_from_slice(&udp_len.to_be_bytes());
        }
        Protocol::Tcp => l4[12] = 0x50,
    }
    buf
}
