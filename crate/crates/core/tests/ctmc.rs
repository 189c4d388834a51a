mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::benchmark_sim;
use pinsync::markov::{generate_path, sample_transition};

#[test]
fn long_path_matches_sojourn_and_jump_statistics() {
    let net = benchmark_sim().network;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let path = generate_path(&net, 2, 10_200.0, &mut rng).unwrap();
    let segs = &path.segments[..path.segments.len() - 1];
    assert!(segs.len() >= 100_000);
    let segs = &segs[..100_000];
    let mean = segs.iter().map(|s| s.end - s.start).sum::<f64>() / segs.len() as f64;
    assert!((mean - 0.1).abs() <= 0.005, "mean sojourn {mean}");
    for w in segs.windows(2) {
        assert_ne!(w[0].mode, w[1].mode);
        assert_eq!(w[0].end, w[1].start);
    }
    let mut counts = [[0usize; 4]; 4];
    for w in segs.windows(2) {
        counts[w[0].mode][w[1].mode] += 1;
    }
    for u in 0..4 {
        let from: usize = counts[u].iter().sum();
        for v in (0..4).filter(|&v| v != u) {
            let p = -net.generator[(u, v)] / net.generator[(u, u)];
            let f = counts[u][v] as f64 / from as f64;
            assert!((f - p).abs() <= 0.01, "{u}->{v}: {f} vs {p}");
        }
    }
}

#[test]
fn jump_chain_never_enters_zero_rate_modes() {
    let net = benchmark_sim().network;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        // mode 1 never jumps to mode 3
        assert_ne!(sample_transition(&net, 0, &mut rng).unwrap(), 2);
    }
}

#[test]
fn same_seed_same_path() {
    let net = benchmark_sim().network;
    let a = generate_path(&net, 0, 50.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = generate_path(&net, 0, 50.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a.segments, b.segments);
}
