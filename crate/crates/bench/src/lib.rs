//! Fixtures shared by the benchmarks.

use pamq_core::{ChannelModel, Constellation, Quantizer};

/// Equidistant `M`-PAM with unit symbol energy, geometric
/// quantizer and Nakagami-`m` channel at `snr_db`.
pub fn fixture(order: usize, bits: u32, m: f64, snr_db: f64) -> (Constellation, Quantizer, ChannelModel) {
    let c = Constellation::equidistant(order, 1.0).unwrap().unit_energy();
    let rho = c.amplitudes();
    let q = Quantizer::geometric(0.5 * rho[0], c.min_adjacent_ratio().recip(), bits).unwrap();
    let ch = ChannelModel::at_snr_db(m, 1.0, &c, snr_db).unwrap();
    (c, q, ch)
}
