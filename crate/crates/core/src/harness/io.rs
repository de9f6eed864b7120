//! Asset loading and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::LearningCurve;

use super::aec::ECHO_PATH_LEN;

/// Whitespace-separated decimal taps, exactly [`ECHO_PATH_LEN`] of them.
pub fn load_echo_path(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut taps = Vec::with_capacity(ECHO_PATH_LEN);
    for (n, line) in text.lines().enumerate() {
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                token: token.to_string(),
            })?;
            taps.push(v);
        }
    }
    if taps.len() != ECHO_PATH_LEN {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected {ECHO_PATH_LEN} values, found {}", taps.len()),
        });
    }
    Ok(taps)
}

/// One tap per line in shortest round-trip form.
pub fn write_echo_path(path: &Path, taps: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(taps.len() * 24);
    for t in taps {
        writeln!(s, "{t}").expect("write to String");
    }
    fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

/// 16-bit mono linear PCM, scaled by 1/32768.
pub fn load_wav(path: &Path) -> Result<Audio> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let unsupported = |field, value: String| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        field,
        value,
    };
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(unsupported("sample_format", "float".into()));
    }
    if spec.channels != 1 {
        return Err(unsupported("channels", spec.channels.to_string()));
    }
    if spec.bits_per_sample != 16 {
        return Err(unsupported("bits_per_sample", spec.bits_per_sample.to_string()));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Audio {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Write samples in [−1, 1] as 16-bit mono PCM.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for s in samples {
        w.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?;
    }
    w.finalize()?;
    Ok(())
}

/// Six significant digits in fixed notation: `-29.6634`, `-300.000`.
pub fn format_sig6(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.00000".into();
    }
    let int_digits = v.abs().log10().floor() as i32 + 1;
    let decimals = (6 - int_digits).max(0) as usize;
    format!("{v:.decimals$}")
}

/// A header plus string rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Self {
        let mut lines = text.lines();
        let split = |l: &str| l.split(',').map(str::to_string).collect::<Vec<_>>();
        let header = lines.next().map(split).unwrap_or_default();
        Self {
            header,
            rows: lines.map(split).collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    /// Column `name` parsed as numbers.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        self.rows
            .iter()
            .map(|r| r.get(k).and_then(|v| v.parse().ok()))
            .collect()
    }
}

/// `iteration` followed by one dB column per curve.
pub fn curves_table(curves: &[(String, LearningCurve)]) -> Result<CsvTable> {
    let Some((_, first)) = curves.first() else {
        return Err(Error::InvalidParameter("no curves to write".into()));
    };
    let len = first.len();
    if let Some((name, c)) = curves.iter().find(|(_, c)| c.len() != len) {
        return Err(Error::InvalidParameter(format!(
            "curve {name} has {} points, expected {len}",
            c.len()
        )));
    }
    let mut header = vec!["iteration".to_string()];
    header.extend(curves.iter().map(|(n, _)| n.clone()));
    let mut t = CsvTable::new(header);
    for i in 0..len {
        let mut row = Vec::with_capacity(curves.len() + 1);
        row.push(i.to_string());
        row.extend(curves.iter().map(|(_, c)| format_sig6(c.values_db[i])));
        t.push(row);
    }
    Ok(t)
}

pub fn write_csv(curves: &[(String, LearningCurve)], path: &Path) -> Result<()> {
    curves_table(curves)?.write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_format() {
        assert_eq!(format_sig6(-300.0), "-300.000");
        assert_eq!(format_sig6(-29.66341), "-29.6634");
        assert_eq!(format_sig6(0.0), "0.00000");
        assert_eq!(format_sig6(0.00123), "0.00123000");
        assert_eq!(format_sig6(123456.7), "123457");
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let a = LearningCurve {
            values_db: vec![0.0, -12.345678, -300.0],
            runs: 1,
        };
        write_csv(&[("a".into(), a.clone())], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.ends_with('\n'));
        assert!(text.contains("-300.000"));
        let back = CsvTable::read(&path).unwrap().column("a").unwrap();
        for (x, y) in back.iter().zip(&a.values_db) {
            let rel = if *y == 0.0 { x.abs() } else { ((x - y) / y).abs() };
            assert!(rel < 5e-6, "{x} vs {y}");
        }
        assert!(write_csv(&[], &path).is_err());
    }

    #[test]
    fn echo_path_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("zeros.txt");
        fs::write(&p, "0 ".repeat(ECHO_PATH_LEN)).unwrap();
        assert_eq!(load_echo_path(&p).unwrap(), vec![0.0; ECHO_PATH_LEN]);
        fs::write(&p, "0\n".repeat(ECHO_PATH_LEN - 1)).unwrap();
        assert!(matches!(load_echo_path(&p), Err(Error::Format { .. })));
        fs::write(&p, "0.1 0.2\n0.3 zz\n").unwrap();
        match load_echo_path(&p) {
            Err(Error::Parse { line, token, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(token, "zz");
            }
            other => panic!("{other:?}"),
        }
        let taps: Vec<f64> = (0..ECHO_PATH_LEN).map(|k| (k as f64 * 0.37).sin() / 7.0).collect();
        write_echo_path(&p, &taps).unwrap();
        assert_eq!(load_echo_path(&p).unwrap(), taps);
    }

    #[test]
    fn wav_contract() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        for s in [0i16, 32767, -32768, 0] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        let a = load_wav(&p).unwrap();
        assert_eq!(a.sample_rate, 8000);
        assert_eq!(a.samples, vec![0.0, 32767.0 / 32768.0, -1.0, 0.0]);

        write_wav(&p, &[0.0; 16], 8000).unwrap();
        assert!(load_wav(&p).unwrap().samples.iter().all(|s| *s == 0.0));

        let stereo = hound::WavSpec { channels: 2, ..spec };
        let mut w = hound::WavWriter::create(&p, stereo).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            load_wav(&p),
            Err(Error::UnsupportedFormat { field: "channels", .. })
        ));
    }
}
