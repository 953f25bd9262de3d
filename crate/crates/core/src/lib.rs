//! Multi-point chest displacement from FMCW MIMO radar.
//!
//! The crate simulates raw IF data from moving point scatterers seen by a
//! cascaded 12 Tx / 16 Rx 77 GHz board and recovers one displacement trace per
//! chest region:
//!
//! 1. [`range`]: fast-time FFT and the subject's range bin,
//! 2. [`doa`]: azimuth beamforming over an 86-element virtual ULA with
//!    near-field phase compensation, plus elevation matched filtering,
//! 3. [`vitals`]: phase extraction, unwrapping and conversion to millimetres.
//!
//! Accelerometer (SCG) records are integrated to displacement in [`scg`] and
//! compared with radar traces in [`metrics`].
//!
//! ```
//! use multivital::waveform::{derive_waveform, ChirpConfig};
//!
//! let wf = derive_waveform(&ChirpConfig::single_target()).unwrap();
//! assert!((wf.bandwidth_b - 4.61e9).abs() < 5e6);
//! assert!((wf.range_resolution - 0.0325).abs() < 5e-5);
//! ```

pub mod array;
pub mod doa;
pub mod error;
pub mod filter;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod range;
pub mod scg;
pub mod sim;
pub mod vitals;
pub mod waveform;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/waveform.md")]
    mod waveform {}
    #[doc = include_str!("../../../book/src/array.md")]
    mod array {}
    #[doc = include_str!("../../../book/src/near-field.md")]
    mod near_field {}
    #[doc = include_str!("../../../book/src/vitals.md")]
    mod vitals {}
    #[doc = include_str!("../../../book/src/scg.md")]
    mod scg {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
