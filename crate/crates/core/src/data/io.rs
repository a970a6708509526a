// SPDX-License-Identifier: MIT OR Apache-2.0

//! FDT1 binary tensors and long-format CSV.
//!
//! FDT1: magic `FDT1`, then `n`, `T`, `p` as little-endian `u64`, then
//! `n*T*p` little-endian `f64` in `[subject][time][variable]` order.
//!
//! Long CSV: header `subject,time,variable,value`, rows in any order. Keys are
//! sorted numerically when every key on an axis parses as an integer, and
//! lexicographically otherwise.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AxisLabels, FunctionalSample};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FDT1";
const HEADER_LEN: usize = 4 + 3 * 8;

/// Loads either format, sniffing the FDT1 magic bytes.
pub fn load_sample(path: impl AsRef<Path>) -> Result<FunctionalSample> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = [0u8; 4];
    let got = file.read(&mut head).map_err(|e| Error::io(path, e))?;
    if got == 4 && &head == MAGIC {
        read_fdt1(path)
    } else {
        read_long_csv(path)
    }
}

/// Writes FDT1; see [`write_fdt1`].
pub fn write_sample(sample: &FunctionalSample, path: impl AsRef<Path>) -> Result<()> {
    write_fdt1(sample, path)
}

pub fn read_fdt1(path: impl AsRef<Path>) -> Result<FunctionalSample> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_fdt1(&bytes)
}

pub(crate) fn decode_fdt1(bytes: &[u8]) -> Result<FunctionalSample> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing FDT1 header".into()));
    }
    let dim = |k: usize| {
        let raw: [u8; 8] = bytes[4 + 8 * k..12 + 8 * k].try_into().unwrap();
        usize::try_from(u64::from_le_bytes(raw))
            .map_err(|_| Error::Format("dimension does not fit in memory".into()))
    };
    let (n, t, p) = (dim(0)?, dim(1)?, dim(2)?);
    let count = n
        .checked_mul(t)
        .and_then(|x| x.checked_mul(p))
        .ok_or_else(|| Error::Format(format!("header dims ({n}, {t}, {p}) overflow")))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * 8 {
        return Err(Error::Dimension(format!(
            "header declares ({n}, {t}, {p}) = {count} values but body holds {} bytes",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FunctionalSample::new(n, t, p, values)
}

pub fn write_fdt1(sample: &FunctionalSample, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(MAGIC)?;
    for d in [sample.n(), sample.t(), sample.p()] {
        write(&(d as u64).to_le_bytes())?;
    }
    for v in sample.values() {
        write(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn sorted_keys(keys: BTreeSet<String>) -> Vec<String> {
    let mut keys: Vec<String> = keys.into_iter().collect();
    if keys.iter().all(|k| k.parse::<i64>().is_ok()) {
        keys.sort_by_key(|k| k.parse::<i64>().unwrap());
    }
    keys
}

pub fn read_long_csv(path: impl AsRef<Path>) -> Result<FunctionalSample> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("unreadable CSV header: {e}")))?;
    let expected = ["subject", "time", "variable", "value"];
    if headers.len() != 4
        || headers
            .iter()
            .zip(expected)
            .any(|(h, e)| !h.eq_ignore_ascii_case(e))
    {
        return Err(Error::Format(format!(
            "CSV header must be `subject,time,variable,value`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut rows = Vec::new();
    let (mut subjects, mut times, mut vars) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("CSV row {}: {e}", line + 2)))?;
        if record.len() != 4 {
            return Err(Error::Format(format!(
                "CSV row {} has {} fields",
                line + 2,
                record.len()
            )));
        }
        let value: f64 = record[3].parse().map_err(|_| {
            Error::Format(format!("CSV row {}: bad value `{}`", line + 2, &record[3]))
        })?;
        subjects.insert(record[0].to_string());
        times.insert(record[1].to_string());
        vars.insert(record[2].to_string());
        rows.push((
            record[0].to_string(),
            record[1].to_string(),
            record[2].to_string(),
            value,
        ));
    }
    if rows.is_empty() {
        return Err(Error::Format("CSV contains no data rows".into()));
    }

    let (subjects, times, vars) = (sorted_keys(subjects), sorted_keys(times), sorted_keys(vars));
    let index = |keys: &[String]| -> HashMap<String, usize> {
        keys.iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect()
    };
    let (si, ti, vi) = (index(&subjects), index(&times), index(&vars));
    let (n, t, p) = (subjects.len(), times.len(), vars.len());
    if rows.len() != n * t * p {
        return Err(Error::Dimension(format!(
            "expected {n}*{t}*{p} = {} distinct cells, found {} rows",
            n * t * p,
            rows.len()
        )));
    }
    let mut values = vec![0.0; n * t * p];
    let mut seen = vec![false; n * t * p];
    for (s, tt, v, value) in rows {
        let (a, b, c) = (si[&s], ti[&tt], vi[&v]);
        let pos = (a * t + b) * p + c;
        if seen[pos] {
            return Err(Error::Dimension(format!(
                "duplicate cell (subject {s}, time {tt}, variable {v})"
            )));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite {
                subject: a + 1,
                time: b + 1,
                variable: c + 1,
            });
        }
        seen[pos] = true;
        values[pos] = value;
    }
    FunctionalSample::new(n, t, p, values)?.with_labels(AxisLabels {
        subjects: Some(subjects),
        times: Some(times),
        variables: Some(vars),
    })
}

/// Long CSV with 1-based integer keys (or the sample's labels when present).
pub fn write_long_csv(sample: &FunctionalSample, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| Error::Format(format!("CSV write failed: {e}"));
    w.write_record(["subject", "time", "variable", "value"])
        .map_err(to_err)?;
    let label = |v: &Option<Vec<String>>, i: usize| {
        v.as_ref()
            .map(|l| l[i].clone())
            .unwrap_or_else(|| (i + 1).to_string())
    };
    let labels = sample.labels();
    for i in 0..sample.n() {
        for t in 0..sample.t() {
            let obs = sample.observation(i, t + 1);
            for (k, v) in obs.iter().enumerate() {
                w.write_record([
                    label(&labels.subjects, i),
                    label(&labels.times, t),
                    label(&labels.variables, k),
                    format!("{v:?}"),
                ])
                .map_err(to_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(sample: &FunctionalSample) -> Vec<u8> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.fdt");
        write_fdt1(sample, &path).unwrap();
        std::fs::read(path).unwrap()
    }

    #[test]
    fn fdt1_header_dims() {
        let sample = FunctionalSample::new(17, 3, 2, vec![1.25; 17 * 3 * 2]).unwrap();
        let bytes = encode(&sample);
        assert_eq!(&bytes[..4], b"FDT1");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 17);
        assert_eq!(bytes.len(), 28 + 17 * 3 * 2 * 8);
        assert_eq!(decode_fdt1(&bytes).unwrap(), sample);
    }

    #[test]
    fn fdt1_errors() {
        assert!(matches!(decode_fdt1(b"FDT2xxxx"), Err(Error::Format(_))));
        let sample = FunctionalSample::new(2, 2, 2, vec![0.0; 8]).unwrap();
        let mut bytes = encode(&sample);
        bytes.truncate(bytes.len() - 8);
        assert!(matches!(decode_fdt1(&bytes), Err(Error::Dimension(_))));
        let mut bytes = encode(&sample);
        let pos = 28 + 8 * ((1 * 2 + 1) * 2 + 0);
        bytes[pos..pos + 8].copy_from_slice(&f64::INFINITY.to_le_bytes());
        match decode_fdt1(&bytes) {
            Err(Error::NonFinite {
                subject,
                time,
                variable,
            }) => {
                assert_eq!((subject, time, variable), (2, 2, 1))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_minimal_and_unordered() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        std::fs::write(&path, "subject,time,variable,value\n1,2,1,0\n1,1,1,0\n").unwrap();
        let s = load_sample(&path).unwrap();
        assert_eq!((s.n(), s.t(), s.p()), (1, 2, 1));

        std::fs::write(
            &path,
            "subject,time,variable,value\n1,10,x,3.5\n1,9,x,1.5\n2,9,x,2\n2,10,x,4\n",
        )
        .unwrap();
        let s = load_sample(&path).unwrap();
        assert_eq!(s.observation(0, 1), &[1.5]);
        assert_eq!(s.observation(1, 2), &[4.0]);
        assert_eq!(
            s.labels().times.as_deref(),
            Some(&["9".to_string(), "10".to_string()][..])
        );
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        std::fs::write(
            &path,
            "subject,time,variable,value\n1,1,1,0\n1,2,1,0\n2,1,1,0\n",
        )
        .unwrap();
        assert!(matches!(load_sample(&path), Err(Error::Dimension(_))));
        std::fs::write(&path, "a,b,c\n1,1,1\n").unwrap();
        assert!(matches!(load_sample(&path), Err(Error::Format(_))));
        std::fs::write(&path, "subject,time,variable,value\n1,1,1,NaN\n").unwrap();
        assert!(matches!(load_sample(&path), Err(Error::NonFinite { .. })));
        assert!(matches!(
            load_sample(dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let sample =
            FunctionalSample::new(2, 3, 2, (0..12).map(|x| x as f64 / 3.0).collect()).unwrap();
        write_long_csv(&sample, &path).unwrap();
        let back = load_sample(&path).unwrap();
        assert_eq!(back.values(), sample.values());
    }

    proptest! {
        #[test]
        fn fdt1_round_trip_is_bit_exact(
            n in 1usize..4, t in 1usize..4, p in 1usize..4,
            seed in proptest::collection::vec(-1e300f64..1e300, 27)
        ) {
            let values: Vec<f64> = seed.iter().cycle().take(n * t * p).copied().collect();
            let sample = FunctionalSample::new(n, t, p, values).unwrap();
            let bytes = encode(&sample);
            let again = encode(&decode_fdt1(&bytes).unwrap());
            prop_assert_eq!(bytes, again);
        }
    }
}
