mod support;

use gridops_core::phasor::{
    crc_ccitt, decode_frame, encode_config_frame, encode_data_frame, CodecError, ConfigFrame, DataFrame, FrameHeader, PhasorFrame, MAX_CHANNELS,
};
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::crc_bitwise;

#[test]
fn crc_check_value() {
    assert_eq!(crc_bitwise(b"123456789"), 0x29B1);
    assert_eq!(crc_ccitt(b"123456789"), 0x29B1);
    assert_eq!(crc_ccitt(b""), 0xFFFF);
}

#[test]
fn table_crc_matches_bitwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for len in 0..2048 {
        let mut buf = vec![0u8; len];
        rng.fill_bytes(&mut buf);
        assert_eq!(crc_ccitt(&buf), crc_bitwise(&buf), "len {len}");
    }
}

#[test]
fn golden_data_frame() {
    let frame = DataFrame { header: FrameHeader { idcode: 7, soc: 1, fracsec: 2 }, phasors: vec![(1.0, 0.0)], freq_deviation: 0.5 };
    let mut expect = vec![
        0xAA, 0x01, 0x00, 0x1C, // sync, size 28
        0x00, 0x07, // idcode
        0x00, 0x00, 0x00, 0x01, // soc
        0x00, 0x00, 0x00, 0x02, // fracsec
        0x3F, 0x80, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, // 1.0, 0.0
        0x3F, 0x00, 0x00, 0x00, // 0.5
    ];
    let chk = crc_bitwise(&expect);
    expect.extend_from_slice(&chk.to_be_bytes());
    assert_eq!(encode_data_frame(&frame, 8).unwrap(), expect);
    assert_eq!(decode_frame(&expect).unwrap(), PhasorFrame::Data(frame));
}

#[test]
fn golden_config_frame() {
    let frame = ConfigFrame { header: FrameHeader { idcode: 1, soc: 0, fracsec: 0 }, nominal_hz: 60, channels: vec!["BUS1".into()] };
    let mut expect = vec![0xAA, 0x31, 0x00, 0x24, 0x00, 0x01, 0, 0, 0, 0, 0, 0, 0, 0, 0x00, 0x3C, 0x00, 0x01];
    expect.extend_from_slice(b"BUS1            ");
    let chk = crc_bitwise(&expect);
    expect.extend_from_slice(&chk.to_be_bytes());
    assert_eq!(encode_config_frame(&frame).unwrap(), expect);
    assert_eq!(decode_frame(&expect).unwrap(), PhasorFrame::Config(frame));
}

#[test]
fn distinct_error_kinds() {
    let frame = DataFrame { header: FrameHeader { idcode: 1, soc: 2, fracsec: 3 }, phasors: vec![(0.5, 0.25)], freq_deviation: 0.0 };
    let good = encode_data_frame(&frame, 8).unwrap();

    let mut bad = good.clone();
    bad[0] = 0xAB;
    assert!(matches!(decode_frame(&bad), Err(CodecError::BadSync(0xAB, 0x01))));

    let mut trailing = good.clone();
    trailing.push(0);
    assert!(matches!(decode_frame(&trailing), Err(CodecError::SizeMismatch { declared: 28, actual: 29 })));
    assert!(matches!(decode_frame(&good[..good.len() - 1]), Err(CodecError::SizeMismatch { .. })));

    let mut corrupt = good.clone();
    corrupt[16] ^= 0x01;
    assert!(matches!(decode_frame(&corrupt), Err(CodecError::Checksum { .. })));

    assert!(matches!(encode_data_frame(&DataFrame { phasors: vec![(0.0, 0.0); 9], ..frame.clone() }, 8), Err(CodecError::TooManyChannels { .. })));
}

#[test]
fn channel_limit_is_bounded_by_the_size_field() {
    let frame = DataFrame { header: FrameHeader { idcode: 0, soc: 0, fracsec: 0 }, phasors: vec![(1.0, 1.0); MAX_CHANNELS], freq_deviation: 0.0 };
    let bytes = encode_data_frame(&frame, MAX_CHANNELS).unwrap();
    assert!(bytes.len() <= u16::MAX as usize);
    assert_eq!(decode_frame(&bytes).unwrap(), PhasorFrame::Data(frame));
}

fn random_data_frame(rng: &mut ChaCha8Rng) -> DataFrame {
    let n = rng.random_range(0..=32);
    DataFrame {
        header: FrameHeader { idcode: rng.random(), soc: rng.random(), fracsec: rng.random() },
        // Any bit pattern, NaNs included, must survive the trip.
        phasors: (0..n).map(|_| (f32::from_bits(rng.random()), f32::from_bits(rng.random()))).collect(),
        freq_deviation: f32::from_bits(rng.random()),
    }
}

fn bits(f: &DataFrame) -> (FrameHeader, Vec<(u32, u32)>, u32) {
    (f.header, f.phasors.iter().map(|(a, b)| (a.to_bits(), b.to_bits())).collect(), f.freq_deviation.to_bits())
}

#[test]
fn ten_thousand_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..10_000 {
        if i % 10 == 0 {
            let n = rng.random_range(0..=8);
            let frame = ConfigFrame {
                header: FrameHeader { idcode: rng.random(), soc: rng.random(), fracsec: rng.random() },
                nominal_hz: if rng.random_bool(0.5) { 50 } else { 60 },
                channels: (0..n).map(|k| format!("CH{k}_{}", rng.random_range(0..1000))).collect(),
            };
            let bytes = encode_config_frame(&frame).unwrap();
            assert_eq!(decode_frame(&bytes).unwrap(), PhasorFrame::Config(frame));
        } else {
            let frame = random_data_frame(&mut rng);
            let bytes = encode_data_frame(&frame, 32).unwrap();
            match decode_frame(&bytes).unwrap() {
                PhasorFrame::Data(back) => assert_eq!(bits(&back), bits(&frame)),
                other => panic!("decoded {other:?}"),
            }
        }
    }
}

#[test]
fn hundred_thousand_fuzz_inputs_never_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut accepted = 0;
    for i in 0..100_000 {
        let len = if i % 100 == 0 { rng.random_range(0..=65_536) } else { rng.random_range(0..=256) };
        let mut buf = vec![0u8; len];
        rng.fill_bytes(&mut buf);
        // Some inputs get a plausible header so decoding gets past the sync
        // and size checks.
        if i % 3 == 0 && len >= 4 {
            buf[0] = 0xAA;
            buf[1] = if rng.random_bool(0.5) { 0x01 } else { 0x31 };
            buf[2..4].copy_from_slice(&(len.min(u16::MAX as usize) as u16).to_be_bytes());
            if i % 6 == 0 && len >= 16 && len <= u16::MAX as usize {
                let chk = crc_bitwise(&buf[..len - 2]);
                buf[len - 2..].copy_from_slice(&chk.to_be_bytes());
            }
        }
        if decode_frame(&buf).is_ok() {
            accepted += 1;
        }
    }
    // Random payloads with a valid checksum decode whenever their length fits.
    assert!(accepted > 0);
}

#[test]
fn every_single_bit_flip_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let frame = random_data_frame(&mut rng);
        let mut bytes = encode_data_frame(&frame, 32).unwrap();
        let bit = rng.random_range(0..bytes.len() * 8);
        bytes[bit / 8] ^= 0x80 >> (bit % 8);
        assert!(decode_frame(&bytes).is_err(), "bit {bit} flip accepted");
    }
}

proptest! {
    #[test]
    fn config_names_round_trip(names in prop::collection::vec("[A-Za-z0-9_.:-]{1,16}", 0..20), idcode in any::<u16>()) {
        let frame = ConfigFrame { header: FrameHeader { idcode, soc: 0, fracsec: 0 }, nominal_hz: 60, channels: names };
        let bytes = encode_config_frame(&frame).unwrap();
        prop_assert_eq!(decode_frame(&bytes).unwrap(), PhasorFrame::Config(frame));
    }

    #[test]
    fn oversized_names_are_refused(name in "[A-Z]{17,40}") {
        let frame = ConfigFrame { header: FrameHeader { idcode: 0, soc: 0, fracsec: 0 }, nominal_hz: 60, channels: vec![name] };
        prop_assert!(matches!(encode_config_frame(&frame), Err(CodecError::BadChannelName(_))));
    }
}
