//! Canonical CSV trace format:
//!
//! ```text
//! timestamp_us,direction,size_bytes,src_ip,src_port,dst_ip,dst_port,protocol
//! 0,DL,1490,10.0.0.1,9944,10.0.0.2,9943,UDP
//! ```
//!
//! Lines starting with `#` are provenance comments and are skipped.

use std::io::{Read, Write};
use std::net::Ipv4Addr;

use super::{Direction, FlowKey, IngestError, PacketRecord, Protocol};

pub const TRACE_HEADER: [&str; 8] = [
    "timestamp_us",
    "direction",
    "size_bytes",
    "src_ip",
    "src_port",
    "dst_ip",
    "dst_port",
    "protocol",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvWarning {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub records: Vec<PacketRecord>,
    pub warnings: Vec<CsvWarning>,
}

impl ParsedTrace {
    pub fn duration_us(&self) -> u64 {
        let min = self.records.iter().map(|r| r.timestamp_us).min().unwrap_or(0);
        let max = self.records.iter().map(|r| r.timestamp_us).max().unwrap_or(0);
        max - min
    }
}

fn field<T: std::str::FromStr>(value: &str, name: &str, line: u64) -> Result<T, IngestError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| IngestError::Csv {
        line,
        message: format!("field {name}: {e} (value {value:?})"),
    })
}

/// Reads a canonical CSV trace; timestamps are rebased so the earliest
/// packet sits at 0.
pub fn parse_canonical_csv<R: Read>(input: R) -> Result<ParsedTrace, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| csv_error(&e))?.clone();
    let got: Vec<&str> = headers.iter().collect();
    // An empty file has no header row at all; treat it like a header-only file.
    if !(got.is_empty() || got == [""]) && got != TRACE_HEADER {
        return Err(IngestError::Csv {
            line: headers.position().map(|p| p.line()).unwrap_or(1),
            message: format!("expected header {:?}, found {:?}", TRACE_HEADER.join(","), got.join(",")),
        });
    }

    let mut raw = Vec::new();
    let mut warnings = Vec::new();
    let mut last_ts: Option<u64> = None;
    for result in reader.records() {
        let record = result.map_err(|e| csv_error(&e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != TRACE_HEADER.len() {
            return Err(IngestError::Csv {
                line,
                message: format!("expected {} fields, found {}", TRACE_HEADER.len(), record.len()),
            });
        }
        let ts: u64 = field(&record[0], "timestamp_us", line)?;
        let direction: Direction = field(&record[1], "direction", line)?;
        let size: u32 = field(&record[2], "size_bytes", line)?;
        if size == 0 {
            return Err(IngestError::Csv {
                line,
                message: "size_bytes must be at least 1".into(),
            });
        }
        let flow = FlowKey::new(
            field::<Ipv4Addr>(&record[3], "src_ip", line)?,
            field(&record[4], "src_port", line)?,
            field::<Ipv4Addr>(&record[5], "dst_ip", line)?,
            field(&record[6], "dst_port", line)?,
            field::<Protocol>(&record[7], "protocol", line)?,
        );
        if let Some(prev) = last_ts {
            if ts < prev {
                warnings.push(CsvWarning {
                    line,
                    message: format!("timestamp {ts} precedes previous {prev}"),
                });
            }
        }
        last_ts = Some(ts);
        raw.push(PacketRecord {
            timestamp_us: ts,
            direction,
            size_bytes: size,
            flow,
        });
    }
    let t0 = raw.iter().map(|r| r.timestamp_us).min().unwrap_or(0);
    for r in &mut raw {
        r.timestamp_us -= t0;
    }
    Ok(ParsedTrace { records: raw, warnings })
}

fn csv_error(e: &csv::Error) -> IngestError {
    IngestError::Csv {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    }
}

pub fn emit_canonical_csv<W: Write>(records: &[PacketRecord], out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(TRACE_HEADER)?;
    for r in records {
        writer.write_record([
            r.timestamp_us.to_string(),
            r.direction.as_str().to_string(),
            r.size_bytes.to_string(),
            r.flow.src_ip.to_string(),
            r.flow.src_port.to_string(),
            r.flow.dst_ip.to_string(),
            r.flow.dst_port.to_string(),
            r.flow.protocol.as_str().to_string(),
        ])?;
    }
    writer.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "timestamp_us,direction,size_bytes,src_ip,src_port,dst_ip,dst_port,protocol\n";

    #[test]
    fn header_only() {
        let parsed = parse_canonical_csv(HEADER.as_bytes()).unwrap();
        assert!(parsed.records.is_empty());
    }

    #[test]
    fn two_rows() {
        let text = format!(
            "{HEADER}0,DL,1490,10.0.0.1,1,10.0.0.2,2,UDP\n400,UL,254,10.0.0.2,2,10.0.0.1,1,UDP\n"
        );
        let parsed = parse_canonical_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.duration_us(), 400);
        assert_eq!(parsed.records[1].direction, Direction::Ul);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn lowercase_direction_is_error_on_line_2() {
        let text = format!("{HEADER}0,dl,1490,10.0.0.1,1,10.0.0.2,2,UDP\n");
        match parse_canonical_csv(text.as_bytes()).unwrap_err() {
            IngestError::Csv { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn comments_do_not_shift_line_numbers() {
        let text = format!("# provenance\n{HEADER}0,DL,abc,10.0.0.1,1,10.0.0.2,2,UDP\n");
        match parse_canonical_csv(text.as_bytes()).unwrap_err() {
            IngestError::Csv { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn reordered_timestamps_warn_and_rebase() {
        let text = format!(
            "{HEADER}1000,DL,100,10.0.0.1,1,10.0.0.2,2,UDP\n900,DL,100,10.0.0.1,1,10.0.0.2,2,UDP\n"
        );
        let parsed = parse_canonical_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].line, 3);
        assert_eq!(parsed.records[0].timestamp_us, 100);
        assert_eq!(parsed.records[1].timestamp_us, 0);
    }

    #[test]
    fn zero_size_rejected() {
        let text = format!("{HEADER}0,DL,0,10.0.0.1,1,10.0.0.2,2,UDP\n");
        assert!(parse_canonical_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "ts,direction\n0,DL\n";
        assert!(parse_canonical_csv(text.as_bytes()).is_err());
    }
}
