use std::path::Path;

use super::{validate_truth, GroundTruthInterval, TorqueSample};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn record_line(rec: &csv::StringRecord, fallback: usize) -> usize {
    rec.position().map_or(fallback, |p| p.line() as usize)
}

fn map_csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => parse_err(path, line, format!("{kind:?}")),
    }
}

fn parse_field(path: &Path, line: usize, name: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_err(path, line, format!("column `{name}`: cannot parse `{raw}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("column `{name}`: non-finite value `{raw}`")));
    }
    Ok(v)
}

/// Reads a `t,tau1,...,taun` file, validating shape, finiteness and strictly
/// increasing time. Errors carry the 1-based file line.
pub fn read_torque_csv(path: &Path) -> Result<Vec<TorqueSample>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| map_csv_err(path, e))?.clone();
    if headers.len() < 2 || &headers[0] != "t" {
        return Err(parse_err(path, 1, "expected header `t,tau1,...,taun`"));
    }
    for (i, h) in headers.iter().enumerate().skip(1) {
        if h != format!("tau{i}") {
            return Err(parse_err(path, 1, format!("header column {} should be `tau{i}`, found `{h}`", i + 1)));
        }
    }
    let n = headers.len() - 1;
    let mut out = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(map_csv_err(path, e)),
        }
        let line = record_line(&rec, out.len() + 2);
        if rec.len() != n + 1 {
            return Err(parse_err(path, line, format!("expected {} columns, found {}", n + 1, rec.len())));
        }
        let t = parse_field(path, line, "t", &rec[0])?;
        let tau = (1..=n)
            .map(|i| parse_field(path, line, &headers[i], &rec[i]))
            .collect::<Result<Vec<_>>>()?;
        if t <= prev {
            return Err(Error::NonMonotonicTime { line, prev, t });
        }
        prev = t;
        out.push(TorqueSample { t, tau });
    }
    Ok(out)
}

/// Writes samples with shortest round-trip float formatting.
pub fn write_torque_csv(path: &Path, samples: &[TorqueSample]) -> Result<()> {
    let n = samples.first().map_or(0, TorqueSample::n_motors);
    let mut w = csv::Writer::from_path(path).map_err(|e| map_csv_err(path, e))?;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("tau{i}")))
        .collect();
    w.write_record(&header).map_err(|e| map_csv_err(path, e))?;
    let mut row = Vec::with_capacity(n + 1);
    for s in samples {
        if s.n_motors() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.n_motors(),
            });
        }
        row.clear();
        row.push(s.t.to_string());
        row.extend(s.tau.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| map_csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<GroundTruthInterval>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| map_csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["start", "end", "level"] {
        return Err(parse_err(path, 1, "expected header `start,end,level`"));
    }
    let mut out = Vec::new();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(map_csv_err(path, e)),
        }
        let line = record_line(&rec, out.len() + 2);
        if rec.len() != 3 {
            return Err(parse_err(path, line, format!("expected 3 columns, found {}", rec.len())));
        }
        let start = parse_field(path, line, "start", &rec[0])?;
        let end = parse_field(path, line, "end", &rec[1])?;
        let level: u8 = rec[2]
            .parse()
            .ok()
            .filter(|l| *l <= 3)
            .ok_or_else(|| parse_err(path, line, format!("column `level`: expected 0-3, found `{}`", &rec[2])))?;
        out.push(GroundTruthInterval { start, end, level });
    }
    validate_truth(&out)?;
    Ok(out)
}

pub fn write_truth_csv(path: &Path, truth: &[GroundTruthInterval]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| map_csv_err(path, e))?;
    w.write_record(["start", "end", "level"]).map_err(|e| map_csv_err(path, e))?;
    for iv in truth {
        w.write_record([iv.start.to_string(), iv.end.to_string(), iv.level.to_string()])
            .map_err(|e| map_csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn reads_hand_written_file() {
        let f = write("t,tau1,tau2\n0,1.5,-2\n0.01,1.25,-2.5\n0.02,1e-3,3\n");
        let s = read_torque_csv(f.path()).unwrap();
        assert_eq!(
            s,
            vec![
                TorqueSample::new(0.0, vec![1.5, -2.0]),
                TorqueSample::new(0.01, vec![1.25, -2.5]),
                TorqueSample::new(0.02, vec![0.001, 3.0]),
            ]
        );
    }

    #[test]
    fn nan_entry_names_the_line() {
        let f = write("t,tau1\n0,1\n0.01,NaN\n");
        let err = read_torque_csv(f.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn non_monotonic_time_rejected() {
        let f = write("t,tau1\n0,1\n0.02,1\n0.01,1\n");
        assert!(matches!(read_torque_csv(f.path()), Err(Error::NonMonotonicTime { line: 4, .. })));
    }

    #[test]
    fn column_count_mismatch_rejected() {
        let f = write("t,tau1,tau2\n0,1,2\n0.01,1\n");
        let err = read_torque_csv(f.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn bad_header_rejected() {
        let f = write("time,a\n0,1\n");
        assert!(read_torque_csv(f.path()).is_err());
    }

    #[test]
    fn truth_round_trip_and_validation() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let truth = vec![
            GroundTruthInterval { start: 10.0, end: 20.0, level: 1 },
            GroundTruthInterval { start: 30.0, end: 31.5, level: 3 },
        ];
        write_truth_csv(f.path(), &truth).unwrap();
        assert_eq!(read_truth_csv(f.path()).unwrap(), truth);
        let bad = write("start,end,level\n10,20,1\n15,25,2\n");
        assert!(matches!(read_truth_csv(bad.path()), Err(Error::UnorderedTruth(1))));
    }

    proptest! {
        #[test]
        fn torque_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..40)) {
            let samples: Vec<_> = rows.into_iter().enumerate()
                .map(|(i, tau)| TorqueSample::new(i as f64 * 0.01, tau)).collect();
            let f = tempfile::NamedTempFile::new().unwrap();
            write_torque_csv(f.path(), &samples).unwrap();
            prop_assert_eq!(read_torque_csv(f.path()).unwrap(), samples);
        }
    }
}
