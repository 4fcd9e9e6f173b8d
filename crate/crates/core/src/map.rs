//! World-frame pole maps and their text file format.
//!
//! ```text
//! # format poleloc-map/1
//! # params-hash 3f2a9c0d1e7b6a55
//! 12.5 -3.25 0.15 4
//! 40.125 8 0.2 inf
//! ```
//!
//! Each record is `x y radius count`. Header lines carry `# key value`
//! metadata. Numbers are written with 9 significant digits, so a map read
//! back from disk and written again reproduces the file byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kdtree::KdTree2;
use crate::textfmt::{data_fields, header_pair, sig9};

pub const MAP_FORMAT: &str = "poleloc-map/1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPole {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    /// Number of segments the pole was observed in. Ground-truth maps use
    /// [`MapPole::UNBOUNDED`].
    pub count: u32,
}

impl MapPole {
    pub const UNBOUNDED: u32 = u32::MAX;

    pub fn new(x: f64, y: f64, radius: f64, count: u32) -> Self {
        Self {
            x,
            y,
            radius,
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoleMap {
    pub poles: Vec<MapPole>,
    /// Ordered `key value` header entries, excluding the format line.
    pub metadata: Vec<(String, String)>,
}

impl PoleMap {
    pub fn new(poles: Vec<MapPole>) -> Self {
        Self {
            poles,
            metadata: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.set_meta(key, value);
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        self.poles.iter().map(|p| [p.x, p.y]).collect()
    }

    /// Spatial index over pole centers; indices refer to `self.poles`.
    pub fn index(&self) -> KdTree2 {
        KdTree2::build(self.centers())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# format {MAP_FORMAT}");
        for (k, v) in &self.metadata {
            if v.is_empty() {
                let _ = writeln!(out, "# {k}");
            } else {
                let _ = writeln!(out, "# {k} {v}");
            }
        }
        for p in &self.poles {
            let count = if p.count == MapPole::UNBOUNDED {
                "inf".to_string()
            } else {
                p.count.to_string()
            };
            let _ = writeln!(out, "{} {} {} {}", sig9(p.x), sig9(p.y), sig9(p.radius), count);
        }
        out
    }

    /// Parses the map format; `origin` only labels error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut map = PoleMap::default();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let Some(fields) = data_fields(line) else {
                if let Some((k, v)) = header_pair(line) {
                    if k == "format" {
                        if v != MAP_FORMAT {
                            return Err(Error::format(origin, lineno, format!("unsupported map format {v:?}")));
                        }
                    } else {
                        map.metadata.push((k, v));
                    }
                }
                continue;
            };
            if fields.len() != 4 {
                return Err(Error::format(
                    origin,
                    lineno,
                    format!("expected `x y radius count`, found {} fields", fields.len()),
                ));
            }
            let num = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(origin, lineno, format!("invalid {what} {s:?}")))
            };
            let x = num(fields[0], "x")?;
            let y = num(fields[1], "y")?;
            let radius = num(fields[2], "radius")?;
            if radius < 0.0 {
                return Err(Error::format(origin, lineno, "negative radius"));
            }
            let count = match fields[3] {
                "inf" => MapPole::UNBOUNDED,
                s => s
                    .parse::<u32>()
                    .map_err(|_| Error::format(origin, lineno, format!("invalid count {s:?}")))?,
            };
            map.poles.push(MapPole::new(x, y, radius, count));
        }
        Ok(map)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8(bytes).map_err(|_| Error::format(path, 0, "file is not UTF-8"))?;
        Self::parse(&text, path)
    }
}
