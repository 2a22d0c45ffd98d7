//! Simulated time of day. Simulation timestamps are seconds since midnight of
//! the scenario day, so `16:28:00` is `59280.0`.

use serde::{de, Deserialize, Deserializer};

pub fn parse_clock(text: &str) -> Option<f64> {
    let mut parts = text.trim().split(':');
    let h: u32 = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let s: f64 = match parts.next() {
        Some(s) => s.parse().ok()?,
        None => 0.0,
    };
    if parts.next().is_some() || m >= 60 || !(0.0..60.0).contains(&s) {
        return None;
    }
    Some(f64::from(h) * 3600.0 + f64::from(m) * 60.0 + s)
}

/// Formats seconds since midnight as `HH:MM:SS`, with fractional seconds
/// only when present. Hours may exceed 24 for multi-day spans.
pub fn format_clock(t: f64) -> String {
    let whole = t.floor();
    let frac = t - whole;
    let secs = whole as i64;
    let base = format!("{:02}:{:02}:{:02}", secs / 3600, (secs / 60) % 60, secs % 60);
    if frac == 0.0 {
        base
    } else {
        format!("{base}{}", &format!("{frac:.3}")[1..])
    }
}

/// Accepts either a number of seconds or an `HH:MM[:SS]` string.
pub fn deserialize_clock<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Seconds(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Seconds(s) => Ok(s),
        Raw::Text(t) => parse_clock(&t).ok_or_else(|| de::Error::custom(format!("invalid clock time `{t}`"))),
    }
}
