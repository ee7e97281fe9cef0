use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::ConfidenceSample;
use crate::error::{Error, Result};

const HEADER: [&str; 4] = ["z_e", "z_c", "correct_e", "correct_c"];

/// Reads a trace CSV (`z_e,z_c,correct_e,correct_c`).
pub fn ingest_csv(path: impl AsRef<Path>, num_classes: usize) -> Result<Vec<ConfidenceSample>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_samples(BufReader::new(file), path, num_classes)
}

pub fn read_samples<R: Read>(
    reader: R,
    path: &Path,
    num_classes: usize,
) -> Result<Vec<ConfidenceSample>> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(parse_err(
            1,
            format!("expected header {}, found {:?}", HEADER.join(","), header),
        ));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let real = |i: usize| -> Result<f64> {
            let s = record[i].trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("{}: `{s}` is not a number", HEADER[i])))
        };
        let flag = |i: usize| -> Result<bool> {
            match record[i].trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                s => Err(parse_err(line, format!("{}: `{s}` is not 0 or 1", HEADER[i]))),
            }
        };
        let sample = ConfidenceSample {
            z_e: real(0)?,
            z_c: real(1)?,
            correct_e: flag(2)?,
            correct_c: flag(3)?,
        };
        sample.check(num_classes).map_err(|msg| Error::Validation {
            path: path.to_path_buf(),
            line,
            msg,
        })?;
        out.push(sample);
    }
    Ok(out)
}

/// Writes the canonical trace format: 9 fractional digits, LF endings.
pub fn emit_csv(path: impl AsRef<Path>, samples: &[ConfidenceSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_samples(&mut w, samples)?;
    w.flush()?;
    Ok(())
}

pub fn write_samples<W: Write>(w: &mut W, samples: &[ConfidenceSample]) -> Result<()> {
    writeln!(w, "{}", HEADER.join(","))?;
    for s in samples {
        writeln!(
            w,
            "{:.9},{:.9},{},{}",
            s.z_e, s.z_c, s.correct_e as u8, s.correct_c as u8
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use crate::trace::{generate_synthetic, GeneratorConfig};
    use std::path::PathBuf;

    fn read(text: &str) -> Result<Vec<ConfidenceSample>> {
        read_samples(text.as_bytes(), &PathBuf::from("mem.csv"), 10)
    }

    #[test]
    fn parses_well_formed_rows() {
        let text = "z_e,z_c,correct_e,correct_c\n0.500000,0.900000,1,1\n0.2,0.3,0,1\n1.0,1.0,1,0\n";
        let s = read(text).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[1].z_c, 0.3);
        assert!(!s[1].correct_e && s[1].correct_c);
    }

    #[test]
    fn rejects_out_of_range_confidence() {
        let text = "z_e,z_c,correct_e,correct_c\n0.5,0.9,1,1\n1.2,0.9,1,1\n";
        match read(text) {
            Err(Error::Validation { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("z_e"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
        assert!(read("z_e,z_c,correct_e,correct_c\n0.05,0.9,1,1\n").is_err());
    }

    #[test]
    fn reports_malformed_rows_with_line() {
        match read("z_e,z_c,correct_e,correct_c\n0.5,0.9,1,1\n0.5,abc,1,1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            read("z_e,z_c,correct_e,correct_c\n0.5,0.9,2,1\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(read("a,b,c,d\n0.5,0.9,1,1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            read("z_e,z_c,correct_e,correct_c\n0.5,0.9,1\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn canonical_files_round_trip_byte_identical() {
        let s = generate_synthetic(500, &GeneratorConfig::default(), &mut rng_from_seed(2)).unwrap();
        let mut first = Vec::new();
        write_samples(&mut first, &s).unwrap();
        let back = read_samples(first.as_slice(), Path::new("x"), 10).unwrap();
        let mut second = Vec::new();
        write_samples(&mut second, &back).unwrap();
        assert_eq!(first, second);
    }
}
