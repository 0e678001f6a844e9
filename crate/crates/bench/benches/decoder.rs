use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use memk::{default_drift_window, transmit, ChannelParams, InnerBlock, InnerCode, JointDecoder};

fn inner_decoding(c: &mut Criterion) {
    let mut group = c.benchmark_group("joint_decoder");
    group.sample_size(20);
    for k in [1usize, 2, 3] {
        let params = ChannelParams::iid(k, 2, [0.01, 0.02, 0.02, 0.95]).unwrap();
        let block = InnerBlock::new(&InnerCode::default(), 162, 0).unwrap();
        let payload: Vec<u8> = (0..162).map(|i| ((i * 7 + 3) % 5 % 2) as u8).collect();
        let x = block.encode(&payload).unwrap();
        let (y, _) = transmit(&x, &params, 1).unwrap();
        let window = default_drift_window(block.channel_len(), &params).unwrap();
        let decoder = JointDecoder::new(&block, &params, window).unwrap();
        let priors = vec![0.5; 162];
        group.bench_function(format!("n110_k{k}"), |b| {
            b.iter(|| decoder.decode(black_box(y.as_slice()), &priors, 1).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, inner_decoding);
criterion_main!(benches);
