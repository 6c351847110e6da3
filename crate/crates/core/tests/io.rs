mod common;

use std::fs;

use common::random_field;
use flowseg::io::{read_flo, read_flow_png16, write_flo, write_flow_png16, IoError};
use flowseg::FlowField;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn hand_assembled_single_pixel_file_decodes() {
    let bytes: [u8; 20] = [
        b'P', b'I', b'E', b'H', // magic 202021.25
        1, 0, 0, 0, // width
        1, 0, 0, 0, // height
        0x00, 0x00, 0x40, 0x40, // u = 3.0
        0x00, 0x00, 0x80, 0x40, // v = 4.0
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.flo");
    fs::write(&path, bytes).unwrap();
    let flow = read_flo(&path).unwrap();
    assert_eq!((flow.width(), flow.height()), (1, 1));
    assert_eq!(flow.at(0, 0), (3.0, 4.0));

    let again = dir.path().join("again.flo");
    write_flo(&flow, &again).unwrap();
    assert_eq!(fs::read(&again).unwrap(), bytes);
}

#[test]
fn random_fields_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..100 {
        let (w, h) = (1 + i % 13, 1 + (i * 7) % 11);
        let mut flow = random_field(&mut rng, w, h, 1e4);
        flow.set(0, 0, -0.0, f32::MIN_POSITIVE / 4.0);
        let path = dir.path().join(format!("{i}.flo"));
        write_flo(&flow, &path).unwrap();
        let back = read_flo(&path).unwrap();
        let bits = |f: &FlowField| f.u().iter().chain(f.v()).map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!((back.width(), back.height()), (w, h));
        assert_eq!(bits(&back), bits(&flow));
        assert_eq!(fs::read(&path).unwrap().len(), 12 + 8 * w * h);
    }
}

#[test]
fn malformed_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.flo");
    fs::write(&path, b"PIEH").unwrap();
    assert!(matches!(read_flo(&path), Err(IoError::Truncated { .. })));
    fs::write(&path, [0u8; 20]).unwrap();
    assert!(matches!(read_flo(&path), Err(IoError::BadMagic { .. })));
    let mut short = b"PIEH".to_vec();
    short.extend([2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0x40, 0x40]);
    fs::write(&path, &short).unwrap();
    assert!(read_flo(&path).is_err());
}

#[test]
fn png16_flow_keeps_quantized_vectors_and_validity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.png");
    let u = vec![1.5, -3.25, 0.0, 100.0];
    let v = vec![-0.5, 2.0, 0.0, -64.0];
    let flow = FlowField::with_validity(2, 2, u.clone(), v.clone(), vec![true, true, false, true]);
    write_flow_png16(&flow, &path).unwrap();
    let back = read_flow_png16(&path).unwrap();
    assert_eq!(back.valid(), &[true, true, false, true]);
    for i in [0, 1, 3] {
        assert!((back.u()[i] - u[i]).abs() <= 1.0 / 128.0);
        assert!((back.v()[i] - v[i]).abs() <= 1.0 / 128.0);
    }
}
