//! Binary data and config frames, big-endian throughout:
//!
//! ```text
//! sync(2) frame_size(2) idcode(2) soc(4) fracsec(4) payload(..) chk(2)
//! ```
//!
//! Data payload: `n × (magnitude f32, angle f32)` then frequency deviation
//! f32. Config payload: nominal frequency u16, channel count u16, then a
//! 16-byte space-padded ASCII name per channel.

use serde::{Deserialize, Serialize};

use super::crc::crc_ccitt;

pub const SYNC_LEAD: u8 = 0xAA;
/// Second sync byte: frame type in the high nibble, version 1 in the low.
pub const SYNC_DATA: u8 = 0x01;
pub const SYNC_CONFIG: u8 = 0x31;

pub const HEADER_LEN: usize = 14;
pub const CHK_LEN: usize = 2;
pub const NAME_LEN: usize = 16;
/// Largest channel count a data frame can carry within a 16-bit size.
pub const MAX_CHANNELS: usize = (u16::MAX as usize - HEADER_LEN - CHK_LEN - 4) / 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameHeader {
    pub idcode: u16,
    pub soc: u32,
    /// 24-bit fraction of second in the low bits, quality flags in the top
    /// byte.
    pub fracsec: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFrame {
    pub header: FrameHeader,
    /// (magnitude pu, angle rad) per channel.
    pub phasors: Vec<(f32, f32)>,
    /// Hz.
    pub freq_deviation: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFrame {
    pub header: FrameHeader,
    pub nominal_hz: u16,
    pub channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhasorFrame {
    Data(DataFrame),
    Config(ConfigFrame),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("{count} channels exceed the limit of {limit}")]
    TooManyChannels { count: usize, limit: usize },
    #[error("channel name {0:?} is not ASCII of at most 16 bytes")]
    BadChannelName(String),
    #[error("bad sync bytes {0:#04x} {1:#04x}")]
    BadSync(u8, u8),
    #[error("frame size mismatch: declared {declared}, got {actual} bytes")]
    SizeMismatch { declared: usize, actual: usize },
    #[error("checksum mismatch: computed {computed:#06x}, frame carries {carried:#06x}")]
    Checksum { computed: u16, carried: u16 },
    #[error("payload of {0} bytes does not fit the frame layout")]
    Payload(usize),
}

fn finish(sync: u8, header: &FrameHeader, payload: &[u8]) -> Vec<u8> {
    let size = HEADER_LEN + payload.len() + CHK_LEN;
    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(&[SYNC_LEAD, sync]);
    out.extend_from_slice(&(size as u16).to_be_bytes());
    out.extend_from_slice(&header.idcode.to_be_bytes());
    out.extend_from_slice(&header.soc.to_be_bytes());
    out.extend_from_slice(&header.fracsec.to_be_bytes());
    out.extend_from_slice(payload);
    let chk = crc_ccitt(&out);
    out.extend_from_slice(&chk.to_be_bytes());
    out
}

/// Encodes a data frame carrying at most `channel_limit` phasors.
pub fn encode_data_frame(frame: &DataFrame, channel_limit: usize) -> Result<Vec<u8>, CodecError> {
    let limit = channel_limit.min(MAX_CHANNELS);
    if frame.phasors.len() > limit {
        return Err(CodecError::TooManyChannels { count: frame.phasors.len(), limit });
    }
    let mut payload = Vec::with_capacity(frame.phasors.len() * 8 + 4);
    for (m, a) in &frame.phasors {
        payload.extend_from_slice(&m.to_be_bytes());
        payload.extend_from_slice(&a.to_be_bytes());
    }
    payload.extend_from_slice(&frame.freq_deviation.to_be_bytes());
    Ok(finish(SYNC_DATA, &frame.header, &payload))
}

pub fn encode_config_frame(frame: &ConfigFrame) -> Result<Vec<u8>, CodecError> {
    let limit = (u16::MAX as usize - HEADER_LEN - CHK_LEN - 4) / NAME_LEN;
    if frame.channels.len() > limit {
        return Err(CodecError::TooManyChannels { count: frame.channels.len(), limit });
    }
    let mut payload = Vec::with_capacity(4 + frame.channels.len() * NAME_LEN);
    payload.extend_from_slice(&frame.nominal_hz.to_be_bytes());
    payload.extend_from_slice(&(frame.channels.len() as u16).to_be_bytes());
    for name in &frame.channels {
        if !name.is_ascii() || name.len() > NAME_LEN || name.ends_with(' ') {
            return Err(CodecError::BadChannelName(name.clone()));
        }
        let mut field = [b' '; NAME_LEN];
        field[..name.len()].copy_from_slice(name.as_bytes());
        payload.extend_from_slice(&field);
    }
    Ok(finish(SYNC_CONFIG, &frame.header, &payload))
}

fn be_u16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

fn be_u32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn be_f32(b: &[u8], at: usize) -> f32 {
    f32::from_bits(be_u32(b, at))
}

/// Decodes exactly one frame; the input must end where `frame_size` says.
pub fn decode_frame(bytes: &[u8]) -> Result<PhasorFrame, CodecError> {
    if bytes.len() < 2 {
        return Err(CodecError::SizeMismatch { declared: HEADER_LEN + CHK_LEN, actual: bytes.len() });
    }
    let (lead, kind) = (bytes[0], bytes[1]);
    if lead != SYNC_LEAD || (kind != SYNC_DATA && kind != SYNC_CONFIG) {
        return Err(CodecError::BadSync(lead, kind));
    }
    if bytes.len() < 4 {
        return Err(CodecError::SizeMismatch { declared: HEADER_LEN + CHK_LEN, actual: bytes.len() });
    }
    let declared = be_u16(bytes, 2) as usize;
    if declared != bytes.len() || declared < HEADER_LEN + CHK_LEN {
        return Err(CodecError::SizeMismatch { declared, actual: bytes.len() });
    }
    let body = declared - CHK_LEN;
    let computed = crc_ccitt(&bytes[..body]);
    let carried = be_u16(bytes, body);
    if computed != carried {
        return Err(CodecError::Checksum { computed, carried });
    }
    let header = FrameHeader { idcode: be_u16(bytes, 4), soc: be_u32(bytes, 6), fracsec: be_u32(bytes, 10) };
    let payload = &bytes[HEADER_LEN..body];
    if kind == SYNC_DATA {
        if payload.len() < 4 || (payload.len() - 4) % 8 != 0 {
            return Err(CodecError::Payload(payload.len()));
        }
        let n = (payload.len() - 4) / 8;
        let phasors = (0..n).map(|i| (be_f32(payload, 8 * i), be_f32(payload, 8 * i + 4))).collect();
        Ok(PhasorFrame::Data(DataFrame { header, phasors, freq_deviation: be_f32(payload, 8 * n) }))
    } else {
        if payload.len() < 4 {
            return Err(CodecError::Payload(payload.len()));
        }
        let n = be_u16(payload, 2) as usize;
        if payload.len() != 4 + n * NAME_LEN {
            return Err(CodecError::Payload(payload.len()));
        }
        let mut channels = Vec::with_capacity(n);
        for chunk in payload[4..].chunks_exact(NAME_LEN) {
            if !chunk.is_ascii() {
                return Err(CodecError::Payload(payload.len()));
            }
            let name = std::str::from_utf8(chunk).map_err(|_| CodecError::Payload(payload.len()))?;
            channels.push(name.trim_end_matches(' ').to_string());
        }
        Ok(PhasorFrame::Config(ConfigFrame { header, nominal_hz: be_u16(payload, 0), channels }))
    }
}
