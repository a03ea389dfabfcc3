use std::io::{self, BufRead, Write};

use super::SimEvent;

/// Writes one JSON object per event: `{"time_s":..,"kind":..,"resource_id":..}`.
pub fn write_timeline_jsonl<W: Write>(mut out: W, events: &[SimEvent]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_timeline_jsonl<R: BufRead>(input: R) -> io::Result<Vec<SimEvent>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}
