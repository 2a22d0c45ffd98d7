use serde::{Deserialize, Serialize};

use super::field::displacement_km;

/// One point value of the field magnitude, V/km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub latitude: f64,
    pub longitude: f64,
    pub value: f64,
}

/// `[lat_min, lon_min, lat_max, lon_max]`, degrees.
pub type BoundingBox = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub bbox: BoundingBox,
}

/// Row-major scalar grid. Row 0 is the northern edge, column 0 the western.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub rows: usize,
    pub cols: usize,
    pub bbox: BoundingBox,
    pub values: Vec<f64>,
}

impl GridSpec {
    /// Latitude/longitude of grid point `(r, c)`.
    pub fn point(&self, r: usize, c: usize) -> (f64, f64) {
        let [lat_min, lon_min, lat_max, lon_max] = self.bbox;
        let frac = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
        (lat_max - frac(r, self.rows) * (lat_max - lat_min), lon_min + frac(c, self.cols) * (lon_max - lon_min))
    }

    /// Box around `points` padded by `margin` degrees on every side.
    pub fn around(points: impl IntoIterator<Item = (f64, f64)>, rows: usize, cols: usize, margin: f64) -> GridSpec {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (lat, lon) in points {
            b = [b[0].min(lat), b[1].min(lon), b[2].max(lat), b[3].max(lon)];
        }
        if !b[0].is_finite() {
            b = [0.0; 4];
        }
        GridSpec { rows, cols, bbox: [b[0] - margin, b[1] - margin, b[2] + margin, b[3] + margin] }
    }
}

/// Inverse-distance-weighted (power 2) interpolation of the samples onto the
/// grid. A grid point on top of a sample takes that sample's value.
pub fn sample_field_contour(samples: &[FieldSample], spec: &GridSpec) -> ContourGrid {
    let mut values = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let (lat, lon) = spec.point(r, c);
            values.push(idw(samples, lat, lon));
        }
    }
    ContourGrid { rows: spec.rows, cols: spec.cols, bbox: spec.bbox, values }
}

fn idw(samples: &[FieldSample], lat: f64, lon: f64) -> f64 {
    if let [only] = samples {
        return only.value;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for s in samples {
        let (dn, de) = displacement_km(lat, lon, s.latitude, s.longitude);
        let d2 = dn * dn + de * de;
        if d2 == 0.0 {
            return s.value;
        }
        num += s.value / d2;
        den += 1.0 / d2;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}
