//! Spatial bit-allocation toolkit for learned-codec-style image compression.
//!
//! The crate is organised around a deterministic block-DCT surrogate codec
//! that keeps the spatial geometry of a hyperprior latent codec (latent grid
//! at 1/16 scale, hyper-latent grid at 1/32 scale) while staying fully
//! reproducible:
//!
//! - [`image`] — planar images, PNM I/O, BT.709 conversion, padding, block
//!   statistics and PSNR.
//! - [`entropy`] — a 64-bit range coder, adaptive and quantized-Laplacian
//!   models, and exact per-cell bit ledgers.
//! - [`gain`] — channel-wise gain vectors for continuous variable rate and
//!   the bit-rate matcher.
//! - [`qmap`] — the spatial quality index map: step table, prediction,
//!   lossless delta coding, and the ROI / BDM / variance / R-D generators.
//! - [`codec`] — the surrogate codec itself: color separation, transforms,
//!   hyper path, two-bitstream container, and bit accounting.
//! - [`bdm`] — bit-distribution maps from internal ledgers or external
//!   encoder traces, regrouping, normalization, and rendering.

pub mod bdm;
pub mod codec;
pub mod entropy;
pub mod fixtures;
pub mod gain;
pub mod image;
pub mod qmap;
