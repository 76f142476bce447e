//! Persistence of sample sets.
//!
//! CSV: optional `#`-prefixed provenance line, then
//! `chain_id,step_index,x_1,...,x_d`, floats with 17 significant digits.
//!
//! Binary: magic `PHNEM001`, `u64` row count, `u64` column count (`d + 2`),
//! then rows of little-endian `f64` in the CSV column order.

use std::io::{BufRead, Read, Write};

use crate::em::{Provenance, SampleSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PHNEM001";

/// Fixed 17-significant-digit rendering.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(set: &SampleSet, header: Option<&str>, mut w: W) -> Result<()> {
    if let Some(h) = header {
        writeln!(w, "# {h}")?;
    }
    let cols: Vec<String> = (1..=set.dim).map(|i| format!("x_{i}")).collect();
    writeln!(w, "chain_id,step_index,{}", cols.join(","))?;
    for i in 0..set.len() {
        let xs: Vec<String> = set.point(i).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{},{},{}", set.chain_ids[i], set.step_indices[i], xs.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R, provenance: Provenance) -> Result<SampleSet> {
    let mut dim = None;
    let mut set = SampleSet::from_rows(0, Vec::new(), provenance);
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if dim.is_none() {
            let n = line.split(',').count();
            if n < 3 || !line.starts_with("chain_id") {
                return Err(Error::Format(format!("bad csv header: {line}")));
            }
            dim = Some(n - 2);
            set.dim = n - 2;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != set.dim + 2 {
            return Err(Error::Format(format!("expected {} fields: {line}", set.dim + 2)));
        }
        let bad = |e: &dyn std::fmt::Display| Error::Format(format!("{e}: {line}"));
        set.chain_ids.push(fields[0].parse().map_err(|e| bad(&e))?);
        set.step_indices.push(fields[1].parse().map_err(|e| bad(&e))?);
        for f in &fields[2..] {
            set.points.push(f.parse().map_err(|e| bad(&e))?);
        }
    }
    if dim.is_none() {
        return Err(Error::Format("missing csv header".into()));
    }
    Ok(set)
}

pub fn write_binary<W: Write>(set: &SampleSet, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    w.write_all(&(set.dim as u64 + 2).to_le_bytes())?;
    for i in 0..set.len() {
        w.write_all(&(set.chain_ids[i] as f64).to_le_bytes())?;
        w.write_all(&(set.step_indices[i] as f64).to_le_bytes())?;
        for v in set.point(i) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R, provenance: Provenance) -> Result<SampleSet> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    if &word != MAGIC {
        return Err(Error::Format("bad magic header".into()));
    }
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    if cols < 3 {
        return Err(Error::Format(format!("column count {cols} < 3")));
    }
    let dim = cols - 2;
    let mut set = SampleSet::from_rows(dim, Vec::with_capacity(rows * dim), provenance);
    let mut next = || -> Result<f64> {
        r.read_exact(&mut word)?;
        Ok(f64::from_le_bytes(word))
    };
    for _ in 0..rows {
        set.chain_ids.push(next()? as u64);
        set.step_indices.push(next()? as u64);
        for _ in 0..dim {
            set.points.push(next()?);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            eta: 0.1,
            burn_in: 0,
            thin: 1,
            seeds: vec![1],
            generator: "test".into(),
        }
    }

    #[test]
    fn binary_layout() {
        let set = SampleSet::from_rows(1, vec![1.5, -2.0], prov());
        let mut buf = Vec::new();
        write_binary(&set, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"PHNEM001");
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 24 + 2 * 3 * 8);
        // row 1: chain 0, step 1, x = -2
        assert_eq!(f64::from_le_bytes(buf[48..56].try_into().unwrap()), 0.0);
        assert_eq!(f64::from_le_bytes(buf[56..64].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(buf[64..72].try_into().unwrap()), -2.0);
        assert!(read_binary(&b"PHNEM002xxxxxxxxxxxxxxxx"[..], prov()).is_err());
    }

    #[test]
    fn csv_layout() {
        let set = SampleSet::from_rows(2, vec![0.1, 1.0, -3.0, 2.5], prov());
        let mut buf = Vec::new();
        write_csv(&set, Some("phnlab test"), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# phnlab test");
        assert_eq!(lines[1], "chain_id,step_index,x_1,x_2");
        assert_eq!(lines[2], "0,0,1.0000000000000001e-1,1.0000000000000000e0");
        let back = read_csv(&buf[..], prov()).unwrap();
        assert_eq!(back, set);
    }
}
