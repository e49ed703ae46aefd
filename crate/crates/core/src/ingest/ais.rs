use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::IngestError;

/// One AIS position report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    pub vessel_id: String,
    /// UTC seconds since the Unix epoch.
    pub timestamp: f64,
    pub lat: f64,
    pub lon: f64,
    /// Speed over ground (kn).
    pub sog: f64,
    /// Course over ground (deg).
    pub cog: f64,
    pub vessel_type: Option<u32>,
    /// Draft (m).
    pub draft: Option<f64>,
}

/// CSV header names for each record field. Defaults follow the NOAA schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub vessel_id: String,
    pub timestamp: String,
    pub lat: String,
    pub lon: String,
    pub sog: String,
    pub cog: String,
    pub vessel_type: String,
    pub draft: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            vessel_id: "MMSI".into(),
            timestamp: "BaseDateTime".into(),
            lat: "LAT".into(),
            lon: "LON".into(),
            sog: "SOG".into(),
            cog: "COG".into(),
            vessel_type: "VesselType".into(),
            draft: "Draft".into(),
        }
    }
}

/// Parsed records plus drop accounting: `rows = records.len() + dropped`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AisReadResult {
    pub records: Vec<AisRecord>,
    pub rows: usize,
    /// Rows rejected as invalid or superseded by a later duplicate.
    pub dropped: usize,
    pub duplicates: usize,
}

/// Parses `2024-01-01T00:00:00`, `2024-01-01 00:00:00` or plain epoch seconds.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let s = s.strip_suffix('Z').unwrap_or(s);
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            let utc = t.and_utc();
            return Some(utc.timestamp() as f64 + utc.timestamp_subsec_nanos() as f64 * 1e-9);
        }
    }
    None
}

fn optional<T: std::str::FromStr>(s: Option<&str>) -> Result<Option<T>, ()> {
    match s.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| ()),
    }
}

/// Reads AIS reports from CSV text.
pub fn parse_ais_csv<R: Read>(input: R, columns: &ColumnMap) -> Result<AisReadResult, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| IngestError::Format(format!("CSV header: {e}")))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| find(name).ok_or_else(|| IngestError::Format(format!("missing mandatory column '{name}'")));
    let (c_id, c_t, c_lat, c_lon, c_sog, c_cog) = (
        need(&columns.vessel_id)?,
        need(&columns.timestamp)?,
        need(&columns.lat)?,
        need(&columns.lon)?,
        need(&columns.sog)?,
        need(&columns.cog)?,
    );
    let (c_type, c_draft) = (find(&columns.vessel_type), find(&columns.draft));

    let mut out = AisReadResult::default();
    let mut seen: HashMap<(String, u64), usize> = HashMap::new();
    for row in reader.records() {
        out.rows += 1;
        let Ok(row) = row else {
            out.dropped += 1;
            continue;
        };
        let parsed = (|| -> Result<AisRecord, ()> {
            let vessel_id = row.get(c_id).filter(|s| !s.is_empty()).ok_or(())?.to_string();
            let timestamp = row.get(c_t).and_then(parse_timestamp).ok_or(())?;
            let num = |c: usize| row.get(c).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite()).ok_or(());
            let (lat, lon, sog, cog) = (num(c_lat)?, num(c_lon)?, num(c_sog)?, num(c_cog)?);
            if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                return Err(());
            }
            let vessel_type = optional::<u32>(c_type.and_then(|c| row.get(c)))?;
            let draft = optional::<f64>(c_draft.and_then(|c| row.get(c)))?.filter(|d| d.is_finite() && *d >= 0.0);
            Ok(AisRecord { vessel_id, timestamp, lat, lon, sog, cog, vessel_type, draft })
        })();
        match parsed {
            Ok(rec) => {
                let key = (rec.vessel_id.clone(), rec.timestamp.to_bits());
                if let Some(&i) = seen.get(&key) {
                    out.records[i] = rec;
                    out.dropped += 1;
                    out.duplicates += 1;
                } else {
                    seen.insert(key, out.records.len());
                    out.records.push(rec);
                }
            }
            Err(()) => out.dropped += 1,
        }
    }
    if out.dropped > 0 {
        log::info!("AIS ingest: kept {} of {} rows ({} dropped, {} duplicates)", out.records.len(), out.rows, out.dropped, out.duplicates);
    }
    Ok(out)
}

/// Reads an AIS CSV file.
pub fn read_ais_csv(path: &Path, columns: &ColumnMap) -> Result<AisReadResult, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))?;
    parse_ais_csv(std::io::BufReader::new(file), columns)
}
