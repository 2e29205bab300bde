//! Sample batch files.
//!
//! One header line
//!
//! ```text
//! ising-sample-batch v1 n_sites=6 k=3 model=<hex> seed=1 burn_in=320 thinning=0 mode=independent encoding=text
//! ```
//!
//! followed by either `k` lines of `+`/`-` characters (`encoding=text`) or
//! `k` rows of `⌈N/8⌉` bytes each (`encoding=binary`, site `i` on bit `i % 8`
//! of byte `i / 8`, set bit = +1).

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::sampler::{Provenance, SampleBatch, SamplingMode};

const MAGIC: &str = "ising-sample-batch";
const VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchEncoding {
    Text,
    Binary,
}

impl BatchEncoding {
    fn as_str(&self) -> &'static str {
        match self {
            BatchEncoding::Text => "text",
            BatchEncoding::Binary => "binary",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(BatchEncoding::Text),
            "binary" => Ok(BatchEncoding::Binary),
            other => Err(Error::Parse(format!("unknown batch encoding {other:?}"))),
        }
    }
}

pub fn write_batch<W: Write>(batch: &SampleBatch, encoding: BatchEncoding, out: &mut W) -> Result<()> {
    let p = batch.provenance();
    writeln!(
        out,
        "{MAGIC} {VERSION} n_sites={} k={} model={} seed={} burn_in={} thinning={} mode={} encoding={}",
        batch.n_sites(),
        batch.len(),
        p.model_digest,
        p.seed,
        p.burn_in,
        p.thinning,
        p.mode.as_str(),
        encoding.as_str()
    )?;
    match encoding {
        BatchEncoding::Text => {
            let mut line = Vec::with_capacity(batch.n_sites() + 1);
            for row in batch.rows() {
                line.clear();
                line.extend(row.iter().map(|&s| if s > 0 { b'+' } else { b'-' }));
                line.push(b'\n');
                out.write_all(&line)?;
            }
        }
        BatchEncoding::Binary => {
            let width = batch.n_sites().div_ceil(8);
            let mut bytes = vec![0u8; width];
            for row in batch.rows() {
                bytes.iter_mut().for_each(|b| *b = 0);
                for (i, &s) in row.iter().enumerate() {
                    if s > 0 {
                        bytes[i / 8] |= 1 << (i % 8);
                    }
                }
                out.write_all(&bytes)?;
            }
        }
    }
    Ok(())
}

pub fn read_batch<R: BufRead>(input: &mut R) -> Result<SampleBatch> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let mut words = header.split_whitespace();
    if words.next() != Some(MAGIC) {
        return Err(Error::Parse("missing sample batch header".into()));
    }
    match words.next() {
        Some(VERSION) => {}
        other => return Err(Error::Parse(format!("unsupported batch version {other:?}"))),
    }
    let fields: HashMap<&str, &str> = words
        .map(|w| w.split_once('=').ok_or_else(|| Error::Parse(format!("bad header field {w:?}"))))
        .collect::<Result<_>>()?;
    let get = |key: &str| {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| Error::Parse(format!("header lacks {key}")))
    };
    let num = |key: &str| -> Result<u64> {
        get(key)?
            .parse()
            .map_err(|e| Error::Parse(format!("header field {key}: {e}")))
    };
    let n = num("n_sites")? as usize;
    let k = num("k")? as usize;
    if n == 0 {
        return Err(Error::Parse("n_sites must be positive".into()));
    }
    let provenance = Provenance {
        model_digest: get("model")?.to_string(),
        seed: num("seed")?,
        burn_in: num("burn_in")?,
        thinning: num("thinning")?,
        mode: SamplingMode::parse(get("mode")?)?,
    };
    let mut samples = Vec::with_capacity(n * k);
    match BatchEncoding::parse(get("encoding")?)? {
        BatchEncoding::Text => {
            let mut line = String::new();
            for r in 0..k {
                line.clear();
                if input.read_line(&mut line)? == 0 {
                    return Err(Error::Parse(format!("expected {k} rows, found {r}")));
                }
                let row = line.trim_end_matches(['\n', '\r']);
                if row.len() != n {
                    return Err(Error::Parse(format!("row {r} has length {}, expected {n}", row.len())));
                }
                for c in row.bytes() {
                    samples.push(match c {
                        b'+' => 1,
                        b'-' => -1,
                        other => {
                            return Err(Error::Parse(format!("row {r}: unexpected byte {other:#x}")))
                        }
                    });
                }
            }
        }
        BatchEncoding::Binary => {
            let width = n.div_ceil(8);
            let mut bytes = vec![0u8; width];
            for r in 0..k {
                input
                    .read_exact(&mut bytes)
                    .map_err(|e| Error::Parse(format!("row {r}: {e}")))?;
                samples.extend((0..n).map(|i| if bytes[i / 8] >> (i % 8) & 1 == 1 { 1i8 } else { -1 }));
            }
        }
    }
    SampleBatch::new(n, samples, provenance)
}
