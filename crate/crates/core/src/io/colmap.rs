use std::path::Path;

use super::{read_file, IoError};

/// A colored point used to seed a scene.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitPoint {
    pub position: [f64; 3],
    /// Linear color in `[0, 1]`.
    pub rgb: [f64; 3],
}

/// Parse COLMAP `points3D.txt`: `ID X Y Z R G B ERROR TRACK...` per line,
/// `#` comments and blank lines ignored.
pub fn parse_points3d(text: &str) -> Result<Vec<InitPoint>, IoError> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| IoError::Parse(format!("points3D line {}: {what}", lineno + 1));
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 7 {
            return Err(bad("expected at least 7 columns"));
        }
        cols[0].parse::<u64>().map_err(|_| bad("bad point id"))?;
        let mut position = [0.0; 3];
        for (p, s) in position.iter_mut().zip(&cols[1..4]) {
            *p = s.parse::<f64>().map_err(|_| bad("bad coordinate"))?;
            if !p.is_finite() {
                return Err(bad("non-finite coordinate"));
            }
        }
        let mut rgb = [0.0; 3];
        for (c, s) in rgb.iter_mut().zip(&cols[4..7]) {
            *c = f64::from(s.parse::<u8>().map_err(|_| bad("bad color"))?) / 255.0;
        }
        points.push(InitPoint { position, rgb });
    }
    Ok(points)
}

pub fn load_points3d(path: &Path) -> Result<Vec<InitPoint>, IoError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| IoError::Parse("points3D is not UTF-8".into()))?;
    parse_points3d(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_colmap_rows() {
        let text = "# 3D point list with one line of data per point:\n\
                    #   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n\
                    \n\
                    1 0.5 -1.25 3 255 0 51 0.8 1 2 3 4\n\
                    7 1e-3 2 -4 10 20 30 0.1\n";
        let pts = parse_points3d(text).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].position, [0.5, -1.25, 3.0]);
        assert_eq!(pts[0].rgb, [1.0, 0.0, 0.2]);
        assert_eq!(pts[1].position, [1e-3, 2.0, -4.0]);
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(parse_points3d("1 0 0 0 255 255").is_err());
        assert!(parse_points3d("1 0 0 x 255 255 255 0").is_err());
        assert!(parse_points3d("1 0 0 0 256 0 0 0").is_err());
        assert!(parse_points3d("1 nan 0 0 0 0 0 0").is_err());
    }
}
