//! A small, fully deterministic transform-coding laboratory: a learned
//! image codec whose analysis and synthesis transforms carry a linear
//! wavelet shortcut alongside a strided-conv branch, trained end to end on
//! a rate-distortion objective — entirely in f64 on the CPU, with every
//! gradient written by hand.
//!
//! The shortcut is the interesting part. Each analysis stage decomposes
//! the signal with a 2d wavelet, rescales each subband by a learnable
//! `e^s` (initialized to favor low frequencies), and mixes channels with a
//! projection held near-orthogonal by a Frobenius penalty; the synthesis
//! side runs the exact inverses in reverse. Because that path is linear
//! and energy-preserving at init, the codec starts from a working
//! multiscale transform rather than random filters — the conv branch only
//! has to learn a correction, which shows up as faster convergence, a more
//! energy-compact latent, and decorrelated channels. All three effects are
//! measurable with the tools in [`analysis`].
//!
//! What's in the box, bottom up:
//!
//! - [`tensor`], [`mat`]: HWC tensors and small dense matrices.
//! - [`netpbm`]: PGM/PPM image reading and writing.
//! - [`wavelet`]: Haar, Daubechies-4, and a 5/3 biorthogonal pair, with
//!   forward/inverse/adjoint 2d transforms plus average-pool stand-ins.
//! - [`auxt`]: the shortcut stages themselves (scaling, projection, their
//!   inverses and backward passes).
//! - [`mainbranch`]: strided conv / transposed-conv stacks.
//! - [`entropy`]: uniform-noise-relaxed quantization and the factorized
//!   Gaussian rate model that prices each latent symbol in bits.
//! - [`rangecoder`], [`bitstream`]: a byte-oriented range coder driven by
//!   the rate model's interval probabilities, and the file container.
//! - [`model`]: the assembled codec — forward passes (training-relaxed and
//!   hard-quantized), the full hand-written backward pass, encode/decode
//!   to bytes, and parameter flattening/hashing.
//! - [`training`]: Adam, the rate-distortion(+orthogonality) loss, config
//!   resolution, logging, snapshots, divergence handling.
//! - [`checkpoint`]: a self-describing binary model container.
//! - [`analysis`]: energy-compaction reports, branch energy split, the
//!   exact effective linear operator of a linear config, channel
//!   similarity histograms, and BD-rate between RD curves.
//! - [`toy`]: the committed 12-image synthetic corpus used by tests and
//!   examples.
//! - [`cli`]: the `auxt` binary — train / encode / decode / eval /
//!   analyze / bdrate.
//!
//! Determinism is a design constraint throughout: one seed fixes
//! initialization, data sampling, and quantization noise, and every CLI
//! subcommand produces byte-identical outputs across runs. The examples
//! directory is the guided tour; `tests/acceptance.rs` is the gate that
//! checks the headline behaviors end to end.

pub mod analysis;
pub mod auxt;
pub mod bitstream;
pub mod checkpoint;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod mainbranch;
pub mod mat;
pub mod model;
pub mod netpbm;
pub mod rangecoder;
pub mod tensor;
pub mod toy;
pub mod training;
pub mod wavelet;
