//! Plain-text state snapshots.
//!
//! ```text
//! entbound-snapshot 1
//! n_sites 4
//! kind mixed
//! meta step 120
//! meta time 3.0e0
//! data
//! <re> <im>
//! ...
//! ```
//!
//! Entries are row-major; floats are written in shortest round-trip form so a
//! snapshot reloads bit-for-bit.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::StateVector;
use crate::basis;
use crate::error::{Error, Result};

const MAGIC: &str = "entbound-snapshot 1";

#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotState {
    Pure(Vec<C64>),
    /// Raw matrix; not validated, checkpoints may carry integration drift.
    Mixed(DMatrix<C64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n_sites: usize,
    pub state: SnapshotState,
    pub meta: BTreeMap<String, String>,
}

impl Snapshot {
    pub fn pure(psi: &StateVector) -> Self {
        Self {
            n_sites: psi.n_sites(),
            state: SnapshotState::Pure(psi.amplitudes().to_vec()),
            meta: BTreeMap::new(),
        }
    }

    pub fn mixed(n_sites: usize, matrix: DMatrix<C64>) -> Self {
        Self {
            n_sites,
            state: SnapshotState::Mixed(matrix),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }
}

pub fn write_snapshot<W: Write>(mut w: W, snap: &Snapshot) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "n_sites {}", snap.n_sites)?;
    let kind = match snap.state {
        SnapshotState::Pure(_) => "pure",
        SnapshotState::Mixed(_) => "mixed",
    };
    writeln!(w, "kind {kind}")?;
    for (k, v) in &snap.meta {
        writeln!(w, "meta {k} {v}")?;
    }
    writeln!(w, "data")?;
    match &snap.state {
        SnapshotState::Pure(v) => {
            for z in v {
                writeln!(w, "{:e} {:e}", z.re, z.im)?;
            }
        }
        SnapshotState::Mixed(m) => {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    let z = m[(r, c)];
                    writeln!(w, "{:e} {:e}", z.re, z.im)?;
                }
            }
        }
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<Snapshot> {
    let mut lines = r.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(parse_err(0, format!("unexpected end of file, expected {what}"))),
        }
    };
    let (ln, magic) = next("header")?;
    if magic.trim() != MAGIC {
        return Err(parse_err(ln, "not a snapshot file"));
    }
    let (ln, l) = next("n_sites")?;
    let n_sites: usize = l
        .strip_prefix("n_sites ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| parse_err(ln, "expected `n_sites <int>`"))?;
    if n_sites == 0 || n_sites > super::MAX_PURE_SITES {
        return Err(parse_err(ln, format!("unsupported n_sites {n_sites}")));
    }
    let (ln, l) = next("kind")?;
    let pure = match l.trim() {
        "kind pure" => true,
        "kind mixed" => false,
        _ => return Err(parse_err(ln, "expected `kind pure` or `kind mixed`")),
    };
    let mut meta = BTreeMap::new();
    loop {
        let (ln, l) = next("data")?;
        let l = l.trim();
        if l == "data" {
            break;
        }
        let rest = l
            .strip_prefix("meta ")
            .ok_or_else(|| parse_err(ln, "expected `meta <key> <value>` or `data`"))?;
        let (k, v) = rest
            .split_once(' ')
            .ok_or_else(|| parse_err(ln, "meta line needs a key and a value"))?;
        meta.insert(k.to_string(), v.to_string());
    }
    let dim = basis::dim(n_sites);
    let count = if pure { dim } else { dim * dim };
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, l) = next("amplitude")?;
        let mut it = l.split_whitespace();
        let mut num = || -> Result<f64> {
            it.next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(ln, "expected `<re> <im>`"))
        };
        let re = num()?;
        let im = num()?;
        values.push(C64::new(re, im));
    }
    let state = if pure {
        SnapshotState::Pure(values)
    } else {
        SnapshotState::Mixed(DMatrix::from_row_slice(dim, dim, &values))
    };
    Ok(Snapshot {
        n_sites,
        state,
        meta,
    })
}
