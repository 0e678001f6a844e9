use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use memk::{lift, table1, BpOptions, LdpcCode, SoftWord};

fn lifting(c: &mut Criterion) {
    let (proto, _) = table1(5).unwrap();
    c.bench_function("lift_m5_z100", |b| b.iter(|| lift(black_box(&proto), 100, 1).unwrap()));
}

fn belief_propagation(c: &mut Criterion) {
    let (proto, _) = table1(5).unwrap();
    let code = LdpcCode::from_protograph(&proto, 100, 2, 1).unwrap();
    let info: Vec<u8> = (0..code.k_bits()).map(|i| (i % 3 == 0) as u8).collect();
    let word = code.encode(&info).unwrap();
    // a few weak and flipped positions keep the decoder iterating
    let llrs: Vec<f64> = word
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let mag = if i % 37 == 0 {
                -0.5
            } else if i % 5 == 0 {
                0.8
            } else {
                2.5
            };
            if b == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let soft = SoftWord::Binary(llrs);
    let opts = BpOptions::default();
    c.bench_function("bp_binary_n1500", |b| {
        b.iter(|| code.decode(black_box(&soft), &opts).unwrap())
    });
}

criterion_group!(benches, lifting, belief_propagation);
criterion_main!(benches);
