use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Number of synthetic points appended by [`LandmarkSet::with_border`].
pub const BORDER_POINTS: usize = 8;

/// Ordered facial landmarks; index `i` names the same feature across images.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub points: Vec<Point>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate_bounds(&self, width: u32, height: u32) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            let inside = p.x.is_finite()
                && p.y.is_finite()
                && p.x >= 0.0
                && p.y >= 0.0
                && p.x < width as f64
                && p.y < height as f64;
            if !inside {
                return Err(Error::LandmarkMismatch(format!(
                    "point {i} ({}, {}) outside {width}x{height}",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    /// Appends the four corners and four edge midpoints so a triangulation
    /// covers the whole frame.
    pub fn with_border(&self, width: u32, height: u32) -> LandmarkSet {
        let (r, b) = ((width - 1) as f64, (height - 1) as f64);
        let mut points = self.points.clone();
        points.extend([
            Point::new(0.0, 0.0),
            Point::new(r, 0.0),
            Point::new(0.0, b),
            Point::new(r, b),
            Point::new(r / 2.0, 0.0),
            Point::new(r / 2.0, b),
            Point::new(0.0, b / 2.0),
            Point::new(r, b / 2.0),
        ]);
        LandmarkSet { points }
    }

    /// Sidecar text: point count on the first line, then one `x y` pair per line.
    pub fn to_sidecar(&self) -> String {
        let mut out = format!("{}\n", self.points.len());
        for p in &self.points {
            let _ = writeln!(out, "{} {}", p.x, p.y);
        }
        out
    }

    pub fn parse_sidecar(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::LandmarkMismatch(msg);
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let count: usize = lines
            .next()
            .ok_or_else(|| bad("empty landmark file".into()))?
            .parse()
            .map_err(|_| bad("first line must be the point count".into()))?;
        let mut points = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let mut it = line.split_whitespace();
            let (Some(x), Some(y), None) = (it.next(), it.next(), it.next()) else {
                return Err(bad(format!("line {}: expected `x y`", i + 2)));
            };
            let parse = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("line {}: bad number {v:?}", i + 2)))
            };
            points.push(Point::new(parse(x)?, parse(y)?));
        }
        if points.len() != count {
            return Err(bad(format!(
                "declared {count} points, found {}",
                points.len()
            )));
        }
        Ok(Self { points })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_sidecar(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_sidecar()).map_err(|e| Error::io(path, e))
    }
}

/// `<image>.landmarks.txt` next to the image.
pub fn sidecar_path(image: &Path) -> PathBuf {
    let mut name = image.as_os_str().to_owned();
    name.push(".landmarks.txt");
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_round_trip() {
        let set = LandmarkSet::new(vec![Point::new(1.5, 2.25), Point::new(100.0, 3.0)]);
        let text = set.to_sidecar();
        assert!(text.starts_with("2\n"));
        assert_eq!(LandmarkSet::parse_sidecar(&text).unwrap(), set);
    }

    #[test]
    fn sidecar_count_must_match() {
        assert!(LandmarkSet::parse_sidecar("3\n1 2\n3 4\n").is_err());
        assert!(LandmarkSet::parse_sidecar("x\n").is_err());
        assert!(LandmarkSet::parse_sidecar("1\n1 2 3\n").is_err());
    }

    #[test]
    fn border_points_are_in_bounds() {
        let set = LandmarkSet::default().with_border(224, 100);
        assert_eq!(set.len(), BORDER_POINTS);
        set.validate_bounds(224, 100).unwrap();
        assert!(LandmarkSet::new(vec![Point::new(224.0, 1.0)])
            .validate_bounds(224, 100)
            .is_err());
    }

    #[test]
    fn sidecar_path_convention() {
        assert_eq!(
            sidecar_path(Path::new("faces/a.png")),
            PathBuf::from("faces/a.png.landmarks.txt")
        );
    }
}
