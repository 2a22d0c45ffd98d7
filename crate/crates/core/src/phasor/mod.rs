//! Synchrophasor-style binary frames for the optional side-channel.

mod crc;
mod frame;

pub use crc::crc_ccitt;
pub use frame::{
    decode_frame, encode_config_frame, encode_data_frame, CodecError, ConfigFrame, DataFrame, FrameHeader, PhasorFrame, CHK_LEN, HEADER_LEN, MAX_CHANNELS,
    NAME_LEN, SYNC_CONFIG, SYNC_DATA, SYNC_LEAD,
};
