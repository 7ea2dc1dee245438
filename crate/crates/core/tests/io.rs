mod common;

use akgeom::forms::{FormField, ScalarField};
use akgeom::io::{read_triple, write_triple, Array, Container, MAGIC};
use akgeom::Error;
use proptest::prelude::*;

#[test]
fn triple_round_trip_is_bitwise() {
    let t = common::modulated_triple([8, 4, 8, 4], 0.2);
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.akg");
    write_triple(&file, &t).unwrap();
    let back = read_triple(&file).unwrap();
    assert_eq!(back.omega(), t.omega());
    assert_eq!(back.j_field(), t.j_field());
    assert_eq!(back.grid(), t.grid());
}

#[test]
fn header_is_self_describing() {
    let g = common::grid([4, 4, 4, 6]);
    let f = ScalarField::from_fn(g, |x| x[3]);
    let bytes = Container::new(g).push(Array::scalar("f", &f)).to_bytes().unwrap();
    assert_eq!(&bytes[..8], MAGIC);
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + hlen]).unwrap();
    assert_eq!(header["endianness"], "little");
    assert_eq!(header["grid"]["resolution"], serde_json::json!([4, 4, 4, 6]));
    assert_eq!(header["arrays"][0]["components"], serde_json::json!([[]]));
    // point (0, 0, 0, 1) is the second value: x³ = 1/6
    let v = f64::from_le_bytes(bytes[16 + hlen + 8..16 + hlen + 16].try_into().unwrap());
    assert_eq!(v, 1.0 / 6.0);
    assert_eq!(bytes.len(), 16 + hlen + 8 * g.len());
}

#[test]
fn damaged_containers_are_rejected() {
    let g = common::grid([4; 4]);
    let psi = FormField::constant(g, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let bytes = Container::new(g).push(Array::form("w", &psi)).to_bytes().unwrap();
    assert!(matches!(Container::from_bytes(&bytes[..bytes.len() - 8]), Err(Error::Format(_))));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(Container::from_bytes(&extra), Err(Error::Format(_))));
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(Container::from_bytes(&magic), Err(Error::Format(_))));
}

#[test]
fn reordered_components_are_rejected_on_conversion() {
    let g = common::grid([4; 4]);
    let psi = FormField::constant(g, 1, &[1.0, 2.0, 3.0, 4.0]);
    let mut a = Array::form("v", &psi);
    a.header.components.swap(0, 1);
    let c = Container::from_bytes(&Container::new(g).push(a).to_bytes().unwrap()).unwrap();
    assert!(c.get("v").unwrap().to_form(g).is_err());
}

#[test]
fn incompatible_j_fails_to_load_as_triple() {
    let t = common::modulated_triple([4; 4], 0.1);
    let mut j = t.j_field().clone();
    j.j[5] = -j.j[5];
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.akg");
    Container::new(*t.grid())
        .push(Array::form("omega", t.omega()))
        .push(Array::almost_complex("J", &j))
        .write(&file)
        .unwrap();
    assert!(matches!(read_triple(&file), Err(Error::Compatibility { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn form_round_trip(res in prop::array::uniform4(prop::sample::select(vec![4usize, 6, 8])),
                       degree in 0usize..=4,
                       seed in any::<u64>()) {
        let g = common::grid(res);
        let sp = akgeom::fft::Spectral::new(g);
        let psi = akgeom::random::FieldSampler::new(&sp, seed).form(degree);
        let bytes = Container::new(g).push(Array::form("psi", &psi)).to_bytes().unwrap();
        let back = Container::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.get("psi").unwrap().to_form(g).unwrap(), psi);
    }
}
