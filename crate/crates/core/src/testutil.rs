use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{BeamformerSet, ChannelSet, NetworkConfig, C64};

pub(crate) fn random_instance(
    rng: &mut ChaCha8Rng,
    k: usize,
    mt: usize,
    nt: usize,
) -> (BeamformerSet, ChannelSet, NetworkConfig) {
    let cfg = NetworkConfig::new(
        k,
        mt,
        nt,
        (0..k).map(|_| rng.random_range(0.5..5.0)).collect(),
        0.1,
        1.0,
        (0..k * nt).map(|_| rng.random_range(0.1..2.0)).collect(),
    )
    .unwrap();
    let (m, n) = (cfg.antennas(), cfg.users());
    let h = DMatrix::from_fn(n, m, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let w = DMatrix::from_fn(m, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (BeamformerSet::new(w), ChannelSet::from_rows(h).unwrap(), cfg)
}
