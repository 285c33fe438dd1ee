use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{default_channel_names, Dataset, Record};
use crate::signal::{Label, SAMPLE_RATE};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"EEGD";
const UNLABELLED: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// Little-endian `EEGD` container with f32 samples.
    Binary,
    /// One window per row: `subject,label,s0,s1,...`.
    Csv,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "eegd" | "canonical-binary" => Ok(DatasetFormat::Binary),
            "csv" => Ok(DatasetFormat::Csv),
            _ => Err(Error::invalid(format!("unknown dataset format `{s}`"))),
        }
    }
}

impl DatasetFormat {
    /// `Csv` for a `.csv` extension, `Binary` otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Binary,
        }
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        DatasetFormat::Binary => read_binary(&bytes[..]),
        DatasetFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|e| Error::Format {
                what: "CSV dataset",
                detail: e.to_string(),
            })?;
            parse_csv(&text, SAMPLE_RATE)
        }
    }
}

pub fn save_dataset(path: &Path, dataset: &Dataset, format: DatasetFormat) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        DatasetFormat::Binary => write_binary(dataset, &mut buf).map_err(|e| Error::io(path, e))?,
        DatasetFormat::Csv => write_csv(dataset, &mut buf)?,
    }
    crate::io::write_atomic(path, &buf)
}

fn header_err(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "dataset header",
        detail: detail.into(),
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Dataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| header_err("file too short"))?;
    if &magic != MAGIC {
        return Err(header_err(format!("bad magic {magic:?}")));
    }
    let mut fields = [0u32; 4];
    for f in fields.iter_mut() {
        *f = read_u32(&mut r).map_err(|_| header_err("file too short"))?;
    }
    let [n_windows, n_channels, window_len, rate] = fields.map(|v| v as usize);
    if n_channels == 0 || window_len == 0 || rate == 0 {
        return Err(header_err(
            "channel count, window length and sample rate must be positive",
        ));
    }
    let per_window = n_channels * window_len;
    let mut records = Vec::with_capacity(n_windows.min(1 << 16));
    let mut raw = vec![0u8; per_window * 4];
    for index in 0..n_windows {
        let truncated = |_| Error::Window {
            index,
            detail: "file ends inside this window".into(),
        };
        let mut head = [0u8; 3];
        r.read_exact(&mut head).map_err(truncated)?;
        let subject_id = u16::from_le_bytes([head[0], head[1]]);
        let label = match head[2] {
            UNLABELLED => None,
            v => Some(Label::from_index(v as usize).map_err(|_| Error::Window {
                index,
                detail: format!("unknown label code {v}"),
            })?),
        };
        r.read_exact(&mut raw).map_err(truncated)?;
        let samples: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let channels = samples
            .chunks_exact(window_len)
            .map(<[f64]>::to_vec)
            .collect();
        records.push(Record {
            subject_id,
            label,
            channels,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io("<dataset>", e))? != 0 {
        return Err(header_err(format!(
            "trailing bytes after {n_windows} windows"
        )));
    }
    Dataset::new(
        records,
        default_channel_names(n_channels),
        window_len,
        rate as f64,
    )
}

/// Samples are stored as f32; values that are not f32-exact are rounded.
pub fn write_binary<W: Write>(dataset: &Dataset, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    for v in [
        dataset.len(),
        dataset.n_channels(),
        dataset.window_len,
        dataset.sample_rate.round() as usize,
    ] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for r in &dataset.records {
        w.write_all(&r.subject_id.to_le_bytes())?;
        w.write_all(&[r.label.map_or(UNLABELLED, |l| l.index() as u8)])?;
        for c in &r.channels {
            for &s in c {
                w.write_all(&(s as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()
}

/// Parses single-channel CSV. A first line starting with `subject` is a
/// header. Labels may be `0`/`1`, `Alert`/`Drowsiness`, or empty.
pub fn parse_csv(text: &str, sample_rate: f64) -> Result<Dataset> {
    let mut records = Vec::new();
    let mut window_len = None;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    if lines
        .peek()
        .is_some_and(|l| l.trim_start().to_ascii_lowercase().starts_with("subject"))
    {
        lines.next();
    }
    for (index, line) in lines.enumerate() {
        let bad = |detail: String| Error::Window { index, detail };
        let mut cells = line.split(',').map(str::trim);
        let subject_id = cells
            .next()
            .unwrap_or("")
            .parse::<u16>()
            .map_err(|e| bad(format!("subject: {e}")))?;
        let label = match cells.next().unwrap_or("") {
            "" | "255" => None,
            "0" => Some(Label::Alert),
            "1" => Some(Label::Drowsiness),
            s if s.eq_ignore_ascii_case("alert") => Some(Label::Alert),
            s if s.eq_ignore_ascii_case("drowsiness") => Some(Label::Drowsiness),
            other => return Err(bad(format!("unknown label `{other}`"))),
        };
        let samples = cells
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|e| bad(format!("sample `{c}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = *window_len.get_or_insert(samples.len());
        if samples.len() != expected || expected == 0 {
            return Err(bad(format!(
                "expected {expected} samples, got {}",
                samples.len()
            )));
        }
        records.push(Record {
            subject_id,
            label,
            channels: vec![samples],
        });
    }
    let window_len = window_len.ok_or_else(|| Error::Format {
        what: "CSV dataset",
        detail: "no rows".into(),
    })?;
    Dataset::new(records, default_channel_names(1), window_len, sample_rate)
}

pub fn write_csv<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    if dataset.n_channels() != 1 {
        return Err(Error::invalid("CSV holds single-channel data only"));
    }
    let io = |e| Error::io("<csv>", e);
    let header: Vec<String> = (0..dataset.window_len).map(|i| format!("s{i}")).collect();
    writeln!(w, "subject,label,{}", header.join(",")).map_err(io)?;
    for r in &dataset.records {
        let label = r.label.map_or(String::new(), |l| l.index().to_string());
        let samples: Vec<String> = r.channels[0].iter().map(|s| s.to_string()).collect();
        writeln!(w, "{},{},{}", r.subject_id, label, samples.join(",")).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let records = vec![
            Record {
                subject_id: 7,
                label: Some(Label::Drowsiness),
                channels: vec![vec![0.5, -1.25, 3.0]],
            },
            Record {
                subject_id: 8,
                label: None,
                channels: vec![vec![1.0, 2.0, 4.0]],
            },
        ];
        Dataset::new(records, default_channel_names(1), 3, 500.0).unwrap()
    }

    #[test]
    fn binary_layout() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        assert_eq!(buf.len(), 20 + 2 * (3 + 12));
        assert_eq!(&buf[20..23], &[7, 0, 1]);
        assert_eq!(read_binary(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn truncation_names_the_window() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        buf.truncate(buf.len() - 2);
        let err = read_binary(&buf[..]).unwrap_err();
        assert!(matches!(err, Error::Window { index: 1, .. }), "{err}");
        assert!(err.to_string().contains("window 1"));
    }

    #[test]
    fn unknown_label_code() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        buf[22] = 3;
        assert!(matches!(
            read_binary(&buf[..]),
            Err(Error::Window { index: 0, .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_label_names() {
        let mut buf = Vec::new();
        write_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(parse_csv(&text, 500.0).unwrap(), sample());
        let d = parse_csv("3,Alert,1,2\n3,drowsiness,3,4\n", 250.0).unwrap();
        assert_eq!(
            d.labels(),
            vec![Some(Label::Alert), Some(Label::Drowsiness)]
        );
        assert!(matches!(
            parse_csv("3,0,1,2\n3,1,3\n", 500.0),
            Err(Error::Window { index: 1, .. })
        ));
    }
}
