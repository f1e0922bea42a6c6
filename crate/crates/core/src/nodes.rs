//! Scattered node sets and their CSV representation.
//!
//! The file format is a header `x,y,z` or `x,y,z,value` followed by one node
//! per line. Exact duplicate coordinates are rejected with the offending line.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Point3;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeSet {
    pub points: Vec<Point3>,
    pub values: Option<Vec<f64>>,
    pub id: String,
}

impl NodeSet {
    pub fn new(points: Vec<Point3>) -> Self {
        Self {
            points,
            values: None,
            id: String::new(),
        }
    }

    pub fn with_values(points: Vec<Point3>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            points,
            values: Some(values),
            id: String::new(),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks the value-length invariant and that no two points coincide.
    pub fn validate(&self) -> Result<()> {
        if let Some(v) = &self.values {
            if v.len() != self.points.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.points.len(),
                    found: v.len(),
                });
            }
        }
        let mut seen: HashMap<[u64; 3], usize> = HashMap::with_capacity(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            if let Some(first) = seen.insert(point_key(p), i) {
                return Err(Error::Domain(format!(
                    "nodes {first} and {i} coincide at ({}, {}, {})",
                    p[0], p[1], p[2]
                )));
            }
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_lowercase()).collect();
        let has_value = match headers.as_slice() {
            [x, y, z] if x == "x" && y == "y" && z == "z" => false,
            [x, y, z, v] if x == "x" && y == "y" && z == "z" && v == "value" => true,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!(
                        "expected header `x,y,z` or `x,y,z,value`, found `{}`",
                        headers.join(",")
                    ),
                })
            }
        };
        let mut points = Vec::new();
        let mut values = Vec::new();
        let mut seen: HashMap<[u64; 3], u64> = HashMap::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let parse = |idx: usize| -> Result<f64> {
                let field = record.get(idx).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("missing column {}", idx + 1),
                })?;
                field.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("bad number `{field}`: {e}"),
                })
            };
            let expected = if has_value { 4 } else { 3 };
            if record.len() != expected {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {expected} columns, found {}", record.len()),
                });
            }
            let p = [parse(0)?, parse(1)?, parse(2)?];
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::Parse {
                    line,
                    message: "non-finite coordinate".into(),
                });
            }
            if let Some(&first) = seen.get(&point_key(&p)) {
                return Err(Error::DuplicateNode {
                    line,
                    first,
                    x: p[0],
                    y: p[1],
                    z: p[2],
                });
            }
            seen.insert(point_key(&p), line);
            points.push(p);
            if has_value {
                values.push(parse(3)?);
            }
        }
        Ok(Self {
            points,
            values: has_value.then_some(values),
            id: String::new(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self::read_csv(file)?.with_id(id))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        match &self.values {
            Some(values) => {
                wtr.write_record(["x", "y", "z", "value"])?;
                for (p, v) in self.points.iter().zip(values) {
                    wtr.write_record(&[fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(*v)])?;
                }
            }
            None => {
                wtr.write_record(["x", "y", "z"])?;
                for p in &self.points {
                    wtr.write_record(&[fmt(p[0]), fmt(p[1]), fmt(p[2])])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

// `{:?}` prints the shortest string that parses back to the same f64
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn point_key(p: &Point3) -> [u64; 3] {
    // +0.0 and -0.0 are the same location
    let norm = |c: f64| if c == 0.0 { 0.0f64 } else { c };
    [norm(p[0]).to_bits(), norm(p[1]).to_bits(), norm(p[2]).to_bits()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_preserves_bits() {
        let ns = NodeSet::with_values(
            vec![[0.1, 0.2, 0.3], [1.0 / 3.0, -2.5e-7, 7.0]],
            vec![std::f64::consts::PI, -1.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        ns.write_csv(&mut buf).unwrap();
        let back = NodeSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.points, ns.points);
        assert_eq!(back.values, ns.values);
    }

    #[test]
    fn duplicate_rejected_with_line_number() {
        let text = "x,y,z\n0,0,0\n1,0,0\n0.0,0,-0.0\n";
        match NodeSet::read_csv(text.as_bytes()) {
            Err(Error::DuplicateNode { line, first, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(first, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(
            NodeSet::read_csv("a,b,c\n1,2,3\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            NodeSet::read_csv("x,y,z,value\n1,2,3,oops\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let no_values = NodeSet::read_csv("x,y,z\n1,2,3\n".as_bytes()).unwrap();
        assert!(no_values.values.is_none());
    }

    #[test]
    fn validate_catches_mismatch_and_duplicates() {
        let mut ns = NodeSet::new(vec![[0.0; 3], [1.0; 3]]);
        ns.values = Some(vec![1.0]);
        assert!(ns.validate().is_err());
        let dup = NodeSet::new(vec![[0.5; 3], [0.5; 3]]);
        assert!(dup.validate().is_err());
    }
}
