//! Features CSV: header `task_id,label,f_000,...,f_{D-1}`, one row per window.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::FeatureVector;
use crate::dataset::Label;
use crate::error::{Error, Result};

pub fn write_features_to<W: Write>(out: W, vectors: &[FeatureVector]) -> Result<()> {
    let d = vectors.first().map_or(0, FeatureVector::dim);
    if let Some(v) = vectors.iter().find(|v| v.dim() != d) {
        return Err(Error::Data(format!("row of task `{}` has dimension {}, expected {d}", v.task_id, v.dim())));
    }
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = ["task_id".to_string(), "label".to_string()]
        .into_iter()
        .chain((0..d).map(|j| format!("f_{j:03}")))
        .collect();
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    w.write_record(&header).map_err(ser)?;
    for v in vectors {
        let mut rec = Vec::with_capacity(d + 2);
        rec.push(v.task_id.clone());
        rec.push(v.label.as_u8().to_string());
        rec.extend(v.values.iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialize(e.to_string()))
}

pub fn write_features(path: impl AsRef<Path>, vectors: &[FeatureVector]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_features_to(file, vectors)
}

pub fn read_features_from<R: Read>(input: R) -> Result<Vec<FeatureVector>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    if header.len() < 2 || &header[0] != "task_id" || &header[1] != "label" {
        return Err(Error::parse(1, "header must start with task_id,label"));
    }
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("f_{j:03}") {
            return Err(Error::parse(1, format!("unexpected column `{name}`, expected f_{j:03}")));
        }
    }
    let d = header.len() - 2;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let label = rec[1]
            .parse::<u8>()
            .ok()
            .and_then(Label::from_u8)
            .ok_or_else(|| Error::parse(line, format!("label must be 0 or 1, got `{}`", &rec[1])))?;
        let values = (0..d)
            .map(|j| {
                rec[j + 2]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(line, format!("f_{j:03}: not a finite number `{}`", &rec[j + 2])))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(FeatureVector {
            values,
            label,
            task_id: rec[0].to_string(),
        });
    }
    Ok(out)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_features_from(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_header() {
        let v = vec![
            FeatureVector { values: vec![0.1, -2e-300, 1.0 / 3.0], label: Label::Pain, task_id: "a".into() },
            FeatureVector { values: vec![5.0, 6.0, 7.0], label: Label::NoPain, task_id: "b".into() },
        ];
        let mut buf = Vec::new();
        write_features_to(&mut buf, &v).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("task_id,label,f_000,f_001,f_002\n"));
        assert_eq!(read_features_from(&buf[..]).unwrap(), v);
    }

    #[test]
    fn bad_rows() {
        let text = "task_id,label,f_000\na,1,0.5\nb,2,0.5\n";
        assert!(matches!(read_features_from(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let text = "task_id,label,f_000\na,1,nan\n";
        assert!(matches!(read_features_from(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let text = "id,label,f_000\n";
        assert!(read_features_from(text.as_bytes()).is_err());
    }
}
