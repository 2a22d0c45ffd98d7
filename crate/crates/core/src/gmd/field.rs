use serde::{Deserialize, Serialize};

use crate::clock::deserialize_clock;

/// Mean Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FieldVector {
    /// V/km, positive northward.
    pub north: f64,
    /// V/km, positive eastward.
    pub east: f64,
}

impl FieldVector {
    pub fn magnitude(&self) -> f64 {
        self.north.hypot(self.east)
    }

    pub fn scaled(&self, k: f64) -> FieldVector {
        FieldVector { north: self.north * k, east: self.east * k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldBreakpoint {
    /// Seconds after onset.
    pub t_offset: f64,
    pub e_north: f64,
    pub e_east: f64,
}

/// Optional north–south variation of field strength: the uniform field is
/// multiplied by `1 + per_degree · (latitude − reference_latitude)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatitudeScaling {
    pub reference_latitude: f64,
    pub per_degree: f64,
}

impl LatitudeScaling {
    pub fn factor(&self, latitude: f64) -> f64 {
        (1.0 + self.per_degree * (latitude - self.reference_latitude)).max(0.0)
    }
}

/// A geomagnetic disturbance: a geoelectric field waveform starting at
/// `onset` (simulated clock) and lasting `duration` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEvent {
    #[serde(deserialize_with = "deserialize_clock")]
    pub onset: f64,
    pub duration: f64,
    pub waveform: Vec<FieldBreakpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latitude_scaling: Option<LatitudeScaling>,
}

impl FieldEvent {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration > 0.0) {
            return Err("duration must be positive".into());
        }
        if self.waveform.is_empty() {
            return Err("waveform needs at least one breakpoint".into());
        }
        if self.waveform.windows(2).any(|w| w[1].t_offset < w[0].t_offset) {
            return Err("waveform breakpoints must be sorted by t_offset".into());
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.onset && t <= self.end()
    }

    pub fn scale_at(&self, latitude: f64) -> f64 {
        self.latitude_scaling.map_or(1.0, |s| s.factor(latitude))
    }
}

/// Uniform field of the event at simulated time `t`, or `None` outside
/// `[onset, onset + duration]`. Linear between breakpoints, held flat beyond
/// the first and last.
pub fn gmd_event_field(t: f64, event: &FieldEvent) -> Option<FieldVector> {
    if !event.is_active(t) {
        return None;
    }
    let dt = t - event.onset;
    let wf = &event.waveform;
    let at = |b: &FieldBreakpoint| FieldVector { north: b.e_north, east: b.e_east };
    if dt <= wf[0].t_offset {
        return Some(at(&wf[0]));
    }
    for w in wf.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if dt == b.t_offset {
            return Some(at(b));
        }
        if dt < b.t_offset {
            let span = b.t_offset - a.t_offset;
            let f = if span > 0.0 { (dt - a.t_offset) / span } else { 1.0 };
            return Some(FieldVector { north: a.e_north + f * (b.e_north - a.e_north), east: a.e_east + f * (b.e_east - a.e_east) });
        }
    }
    Some(at(wf.last().unwrap()))
}

/// North and east displacement in km from `(lat1, lon1)` to `(lat2, lon2)`
/// under an equirectangular projection about the mean latitude.
pub fn displacement_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> (f64, f64) {
    let k = EARTH_RADIUS_KM.to_radians();
    let mean_lat = (0.5 * (lat1 + lat2)).to_radians();
    ((lat2 - lat1) * k, (lon2 - lon1) * k * mean_lat.cos())
}

/// End coordinates of one line, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineGeometry {
    pub from: (f64, f64),
    pub to: (f64, f64),
}

/// Series EMF induced along each line by a uniform field, volts, oriented
/// from the `from` end to the `to` end.
pub fn induced_line_voltages(lines: &[LineGeometry], field: FieldVector) -> Vec<f64> {
    lines
        .iter()
        .map(|l| {
            let (north, east) = displacement_km(l.from.0, l.from.1, l.to.0, l.to.1);
            field.north * north + field.east * east
        })
        .collect()
}
