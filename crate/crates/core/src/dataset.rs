//! Labeled signal collections and their on-disk formats.
//!
//! Binary layout, all integers `u32` little-endian:
//!
//! ```text
//! magic      8 bytes  "LDBDSET\0"
//! version    u32      1
//! length     u32      samples per signal
//! classes    u32      number of distinct labels
//! per class  (label u32, count u32), ascending label
//! records    (label u32, length x f64 LE), in dataset order
//! ```
//!
//! The CSV export has one signal per row with the label in column 0.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LDBDSET\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    signal_length: usize,
    signals: Vec<Vec<f64>>,
    labels: Vec<u32>,
}

impl Dataset {
    pub fn new(signal_length: usize) -> Self {
        Dataset {
            signal_length,
            signals: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, label: u32, signal: Vec<f64>) -> Result<()> {
        if signal.len() != self.signal_length {
            return Err(Error::DimensionMismatch {
                expected: self.signal_length,
                actual: signal.len(),
            });
        }
        self.signals.push(signal);
        self.labels.push(label);
        Ok(())
    }

    pub fn extend(
        &mut self,
        label: u32,
        signals: impl IntoIterator<Item = Vec<f64>>,
    ) -> Result<()> {
        for s in signals {
            self.push(label, s)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn signal_length(&self) -> usize {
        self.signal_length
    }

    pub fn signals(&self) -> &[Vec<f64>] {
        &self.signals
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Sample counts per label, ascending.
    pub fn class_counts(&self) -> BTreeMap<u32, usize> {
        let mut m = BTreeMap::new();
        for &l in &self.labels {
            *m.entry(l).or_insert(0) += 1;
        }
        m
    }

    pub fn classes(&self) -> Vec<u32> {
        self.class_counts().into_keys().collect()
    }

    pub fn indices_of(&self, label: u32) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i] == label)
            .collect()
    }

    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        let counts = self.class_counts();
        w.write_all(MAGIC)?;
        for v in [
            FORMAT_VERSION,
            self.signal_length as u32,
            counts.len() as u32,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for (&label, &count) in &counts {
            w.write_all(&label.to_le_bytes())?;
            w.write_all(&(count as u32).to_le_bytes())?;
        }
        for (s, &label) in self.signals.iter().zip(&self.labels) {
            w.write_all(&label.to_le_bytes())?;
            for x in s {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("dataset", "bad magic"));
        }
        let u32s = |r: &mut dyn Read| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        };
        let version = u32s(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::format(
                "dataset",
                format!("unsupported version {version}"),
            ));
        }
        let n = u32s(r)? as usize;
        let classes = u32s(r)? as usize;
        let mut header = BTreeMap::new();
        for _ in 0..classes {
            let label = u32s(r)?;
            let count = u32s(r)? as usize;
            header.insert(label, count);
        }
        let total: usize = header.values().sum();
        let mut ds = Dataset::new(n);
        let mut buf = vec![0u8; 8 * n];
        for _ in 0..total {
            let label = u32s(r)?;
            r.read_exact(&mut buf)?;
            let sig = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            ds.push(label, sig)?;
        }
        if ds.class_counts() != header {
            return Err(Error::format(
                "dataset",
                "class counts disagree with header",
            ));
        }
        Ok(ds)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        for (s, label) in self.signals.iter().zip(&self.labels) {
            write!(w, "{label}")?;
            for x in s {
                write!(w, ",{x:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut ds: Option<Dataset> = None;
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |d: String| Error::format("csv dataset", format!("line {}: {d}", lineno + 1));
            let mut fields = line.split(',');
            let label: u32 = fields
                .next()
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| bad(format!("label: {e}")))?;
            let sig = fields
                .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("{e}"))))
                .collect::<Result<Vec<f64>>>()?;
            ds.get_or_insert_with(|| Dataset::new(sig.len()))
                .push(label, sig)?;
        }
        ds.ok_or(Error::EmptyDataset)
    }

    /// Reads `.csv` as CSV and anything else as the binary format.
    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path)?;
        if path.extension().is_some_and(|e| e == "csv") {
            Self::read_csv(f)
        } else {
            Self::read_binary(&mut BufReader::new(f))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(&mut f)?;
        } else {
            self.write_binary(&mut f)?;
        }
        f.flush()?;
        Ok(())
    }
}
