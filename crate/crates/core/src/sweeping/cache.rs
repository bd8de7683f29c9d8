//! Binary cache for a finished [`SweepingFactorization`].
//!
//! Layout: one ASCII header line
//! `helmsweep-fact v1 dim=.. n=.. sweep=.. leaf=.. index_dim=.. adm=.. max_rank=.. eps=.. oversampling=.. power_iters=.. seed=..`
//! followed by the couplings as little-endian `f64` pairs and then every
//! `T_m` in the H-matrix block format.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::discretization::{SweepDirection, SweepOrdering};
use crate::hmatrix::{build_partition, Admissibility, CompressionPolicy, HMatrix};
use crate::C64;

use super::{SweepError, SweepingFactorization};

const MAGIC: &str = "helmsweep-fact v1";

pub fn write_factorization(path: &Path, fact: &SweepingFactorization) -> Result<(), SweepError> {
    let mut w = BufWriter::new(File::create(path)?);
    let tree = &fact.tree;
    let p = &fact.policy;
    writeln!(
        w,
        "{MAGIC} dim={} n={} sweep={} leaf={} index_dim={} adm={} max_rank={} eps={:e} oversampling={} power_iters={} seed={}",
        fact.ordering.dim,
        fact.ordering.n,
        fact.ordering.sweep,
        tree.leaf_size,
        tree.index_dim,
        tree.admissibility.name(),
        p.max_rank,
        p.eps,
        p.oversampling,
        p.power_iters,
        p.seed
    )?;
    for d in &fact.couplings {
        for z in d {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    for t in &fact.t {
        t.write_to(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(map: &HashMap<&str, &str>, key: &str) -> Result<T, SweepError> {
    map.get(key)
        .ok_or_else(|| SweepError::Format(format!("missing header field {key}")))?
        .parse()
        .map_err(|_| SweepError::Format(format!("bad header field {key}")))
}

pub fn read_factorization(path: &Path) -> Result<SweepingFactorization, SweepError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let rest = header
        .trim_end()
        .strip_prefix(MAGIC)
        .ok_or_else(|| SweepError::Format("missing helmsweep-fact v1 header".into()))?;
    let map: HashMap<&str, &str> = rest.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    let dim: usize = field(&map, "dim")?;
    let n: usize = field(&map, "n")?;
    let sweep: SweepDirection = field(&map, "sweep")?;
    let leaf: usize = field(&map, "leaf")?;
    let index_dim: usize = field(&map, "index_dim")?;
    let adm = match map.get("adm").copied() {
        Some("weak") => Admissibility::Weak,
        Some("strong") => Admissibility::Strong,
        _ => return Err(SweepError::Format("bad header field adm".into())),
    };
    let policy = CompressionPolicy {
        max_rank: field(&map, "max_rank")?,
        eps: field(&map, "eps")?,
        oversampling: field(&map, "oversampling")?,
        power_iters: field(&map, "power_iters")?,
        seed: field(&map, "seed")?,
    };
    if !(2..=3).contains(&dim) || sweep.axis >= dim || index_dim != dim - 1 {
        return Err(SweepError::Format("inconsistent dimensions in header".into()));
    }
    let ordering = SweepOrdering::new(dim, n, sweep);
    let tree = build_partition(n, leaf, index_dim, adm)?;
    let face_len = ordering.face_len();
    if tree.size() != face_len {
        return Err(SweepError::Format("tree does not match the face size".into()));
    }
    let mut buf = [0u8; 8];
    let mut next = |r: &mut dyn Read| -> Result<f64, SweepError> {
        r.read_exact(&mut buf)?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut couplings = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        let mut d = Vec::with_capacity(face_len);
        for _ in 0..face_len {
            let re = next(&mut r)?;
            let im = next(&mut r)?;
            d.push(C64::new(re, im));
        }
        couplings.push(d);
    }
    let mut t = Vec::with_capacity(n);
    for _ in 0..n {
        t.push(HMatrix::read_from(tree.clone(), &mut r)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(SweepError::Format("trailing bytes after the last layer".into()));
    }
    Ok(SweepingFactorization { ordering, tree, policy, t, couplings })
}
