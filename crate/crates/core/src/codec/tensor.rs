//! Dense channel-major tensors for the latent and hyper-latent grids.

/// Real-valued `C x H x W` tensor; the spatial grid is the padded image
/// divided by 16, one element per 16x16 block.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl LatentTensor {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        LatentTensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    #[inline]
    pub fn idx(&self, c: usize, i: usize, j: usize) -> usize {
        (c * self.height + i) * self.width + j
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[self.idx(c, i, j)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: usize, j: usize, v: f64) {
        let k = self.idx(c, i, j);
        self.data[k] = v;
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    /// Element-wise combination of two same-shape tensors.
    pub fn zip_map(&self, other: &LatentTensor, f: impl Fn(f64, f64) -> f64) -> LatentTensor {
        assert_eq!(
            (self.channels, self.height, self.width),
            (other.channels, other.height, other.width)
        );
        LatentTensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// Hyper-latent: two banks at half the latent grid resolution. The mean bank
/// feeds the prediction, the scale bank feeds the entropy model sigma.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperLatent {
    pub mean_bank: LatentTensor,
    pub scale_bank: LatentTensor,
}

impl HyperLatent {
    pub fn channels(&self) -> usize {
        self.mean_bank.channels
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.mean_bank.height, self.mean_bank.width)
    }
}
