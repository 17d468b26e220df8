//! Hyper path: 2x2 pooling of the latent into mean and scale banks, and the
//! prediction of mu / sigma from the decoded hyper-latent.

use super::tensor::{HyperLatent, LatentTensor};
use crate::entropy::{sigma_grid_index, sigma_grid_value};
use crate::gain::{apply_sigma_gain, GainVector};

/// Pools the latent per channel: the mean bank is the 2x2 group average, the
/// scale bank the group average of absolute deviations from that mean. Ragged
/// edge groups (odd latent dims) pool over the cells that exist.
pub fn hyper_encode(latent: &LatentTensor) -> HyperLatent {
    let gh = latent.height.div_ceil(2);
    let gw = latent.width.div_ceil(2);
    let mut mean_bank = LatentTensor::new(latent.channels, gh, gw);
    let mut scale_bank = LatentTensor::new(latent.channels, gh, gw);
    for c in 0..latent.channels {
        for gi in 0..gh {
            for gj in 0..gw {
                let mut sum = 0.0;
                let mut n = 0.0;
                for i in gi * 2..(gi * 2 + 2).min(latent.height) {
                    for j in gj * 2..(gj * 2 + 2).min(latent.width) {
                        sum += latent.get(c, i, j);
                        n += 1.0;
                    }
                }
                let mean = sum / n;
                let mut dev = 0.0;
                for i in gi * 2..(gi * 2 + 2).min(latent.height) {
                    for j in gj * 2..(gj * 2 + 2).min(latent.width) {
                        dev += (latent.get(c, i, j) - mean).abs();
                    }
                }
                mean_bank.set(c, gi, gj, mean);
                scale_bank.set(c, gi, gj, dev / n);
            }
        }
    }
    HyperLatent {
        mean_bank,
        scale_bank,
    }
}

/// Expands the decoded hyper-latent back to the latent grid: mu is the
/// nearest-neighbor upsampled mean bank; sigma is the upsampled scale bank
/// with the sigma gain applied, clamped and snapped to the entropy module's
/// sigma grid so encoder and decoder derive identical models.
pub fn predict_mu_sigma(
    zhat: &HyperLatent,
    sigma_gain: &GainVector,
    height: usize,
    width: usize,
) -> (LatentTensor, LatentTensor) {
    let channels = zhat.channels();
    let mut mu = LatentTensor::new(channels, height, width);
    let mut sigma = LatentTensor::new(channels, height, width);
    for c in 0..channels {
        for i in 0..height {
            for j in 0..width {
                mu.set(c, i, j, zhat.mean_bank.get(c, i / 2, j / 2));
                sigma.set(c, i, j, zhat.scale_bank.get(c, i / 2, j / 2));
            }
        }
    }
    let sigma = apply_sigma_gain(&sigma, sigma_gain).expect("channel counts match");
    let snapped = LatentTensor {
        data: sigma
            .data
            .iter()
            .map(|&v| sigma_grid_value(sigma_grid_index(v)))
            .collect(),
        ..sigma
    };
    (mu, snapped)
}
