//! Azimuth and elevation beamforming at the subject range bin, with near-field
//! phase compensation at the junctions of the azimuth ULA.
//!
//! A target at azimuth cosine `u` puts phase `-π p u` on the ULA element at
//! position `p` (half wavelengths). The azimuth spectrum stores the literal
//! zero-padded DFT in bin order, so grid index `l` (the angle with
//! `sin θ_l = 2l/N`) lives in bin `-l mod N`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{
    build_virtual_array, select_azimuth_ula, ArrayGeometry, AzimuthUlaSelection, Position,
    VirtualArray, VirtualElement,
};
use crate::error::{Error, Result};
use crate::range::BinSignals;

/// Half-width of the usable field of view of the board, degrees.
pub const FIELD_OF_VIEW_DEG: f64 = 70.0;

/// Default azimuth FFT length.
pub const DEFAULT_N_FFT_AZIMUTH: usize = 128;

/// `sin θ_l = 2l / n_fft`.
pub fn grid_sin(l: i64, n_fft: usize) -> f64 {
    2.0 * l as f64 / n_fft as f64
}

/// Grid angle in radians, clamped to ±90° at the evanescent edge.
pub fn grid_angle(l: i64, n_fft: usize) -> f64 {
    grid_sin(l, n_fft).clamp(-1.0, 1.0).asin()
}

/// Grid index whose sine is nearest `s`, within `[-N/2, N/2 - 1]`.
pub fn nearest_grid_index(s: f64, n_fft: usize) -> i64 {
    let half = (n_fft / 2) as i64;
    ((s * n_fft as f64 / 2.0).round() as i64).clamp(-half, half - 1)
}

/// Grid indices `-N/2 ..= N/2 - 1` in ascending order.
pub fn grid_indices(n_fft: usize) -> impl Iterator<Item = i64> {
    let half = (n_fft / 2) as i64;
    -half..half
}

#[derive(Debug, Clone, PartialEq)]
pub struct AzimuthSpectrum {
    /// DFT bins `0..n_fft`.
    pub values: Vec<Complex64>,
    pub n_fft: usize,
}

impl AzimuthSpectrum {
    pub fn bin_of_grid(&self, l: i64) -> usize {
        (-l).rem_euclid(self.n_fft as i64) as usize
    }

    pub fn at_grid(&self, l: i64) -> Complex64 {
        self.values[self.bin_of_grid(l)]
    }

    /// `|value|²` in ascending grid order.
    pub fn power_by_grid(&self) -> Vec<f64> {
        grid_indices(self.n_fft)
            .map(|l| self.at_grid(l).norm_sqr())
            .collect()
    }

    /// Grid index of the largest power; lowest index wins ties.
    pub fn peak_grid_index(&self) -> i64 {
        argmax_grid(&self.power_by_grid(), self.n_fft)
    }

    pub fn peak_angle(&self) -> f64 {
        grid_angle(self.peak_grid_index(), self.n_fft)
    }
}

/// Peak of a power vector in ascending grid order.
pub fn argmax_grid(power: &[f64], n_fft: usize) -> i64 {
    let mut best = 0;
    for (i, &p) in power.iter().enumerate() {
        if p > power[best] {
            best = i;
        }
    }
    best as i64 - (n_fft / 2) as i64
}

/// Junction phase errors: `dphi[j][l + N/2]` for junction `j` and grid index `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseErrorTable {
    pub dphi: Vec<Vec<f64>>,
    pub range_z: f64,
    pub n_fft: usize,
}

impl PhaseErrorTable {
    pub fn zeros(n_junctions: usize, n_fft: usize) -> Self {
        Self {
            dphi: vec![vec![0.0; n_fft]; n_junctions],
            range_z: f64::INFINITY,
            n_fft,
        }
    }

    pub fn n_junctions(&self) -> usize {
        self.dphi.len()
    }

    pub fn get(&self, junction: usize, l: i64) -> f64 {
        self.dphi[junction][(l + (self.n_fft / 2) as i64) as usize]
    }

    pub fn max_abs(&self) -> f64 {
        self.dphi
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

fn check_azimuth_nfft(n_fft: usize, len: usize) -> Result<()> {
    if n_fft < len {
        return Err(Error::InvalidNfft {
            n_fft,
            reason: "must be at least the ULA length",
        });
    }
    if n_fft % 2 != 0 {
        return Err(Error::InvalidNfft {
            n_fft,
            reason: "must be even",
        });
    }
    Ok(())
}

fn block_combine(
    x: &[Complex64],
    sel: &AzimuthUlaSelection,
    n_fft: usize,
    table: Option<&PhaseErrorTable>,
) -> Result<AzimuthSpectrum> {
    check_azimuth_nfft(n_fft, sel.len())?;
    if x.len() != sel.len() {
        return Err(Error::InvalidConfig(format!(
            "azimuth snapshot has {} entries, ULA has {}",
            x.len(),
            sel.len()
        )));
    }
    let twiddle: Vec<Complex64> = (0..n_fft)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n_fft as f64))
        .collect();
    let half = (n_fft / 2) as i64;
    let mut values = vec![Complex64::new(0.0, 0.0); n_fft];
    for (k, out) in values.iter_mut().enumerate() {
        // Grid index served by this bin.
        let l = {
            let g = (n_fft - k) % n_fft;
            let g = g as i64;
            if g >= half {
                g - n_fft as i64
            } else {
                g
            }
        };
        let mut cumulative = 0.0;
        let mut acc = Complex64::new(0.0, 0.0);
        for (b, blk) in sel.blocks.iter().enumerate() {
            if b > 0 {
                if let Some(t) = table {
                    cumulative += t.get(b - 1, l);
                }
            }
            let partial: Complex64 = x[blk.start..blk.start + blk.len]
                .iter()
                .enumerate()
                .map(|(i, xi)| xi * twiddle[(k * i) % n_fft])
                .sum();
            let offset = twiddle[(k * blk.start) % n_fft];
            let term = offset * partial;
            acc += if cumulative != 0.0 {
                term * Complex64::from_polar(1.0, -cumulative)
            } else {
                term
            };
        }
        *out = acc;
    }
    Ok(AzimuthSpectrum { values, n_fft })
}

/// Zero-padded DFT of the ULA snapshot assembled block by block.
pub fn far_field_azimuth_fft(
    x: &[Complex64],
    sel: &AzimuthUlaSelection,
    n_fft: usize,
) -> Result<AzimuthSpectrum> {
    block_combine(x, sel, n_fft, None)
}

/// Block DFT with each block rotated by the accumulated junction phase errors
/// of all junctions before it.
pub fn near_field_azimuth_fft(
    x: &[Complex64],
    sel: &AzimuthUlaSelection,
    table: &PhaseErrorTable,
    n_fft: usize,
) -> Result<AzimuthSpectrum> {
    if table.n_fft != n_fft {
        return Err(Error::TableMismatch(format!(
            "table built for n_fft {}, beamformer uses {n_fft}",
            table.n_fft
        )));
    }
    if table.n_junctions() != sel.junctions.len() {
        return Err(Error::TableMismatch(format!(
            "table has {} junctions, selection has {}",
            table.n_junctions(),
            sel.junctions.len()
        )));
    }
    block_combine(x, sel, n_fft, Some(table))
}

/// Difference of the distances from `P = (px, ·, z)` to two antennas,
/// `|P - a| - |P - b|`, written so it stays accurate when both are large.
fn leg_difference(a: Position, b: Position, wavelength: f64, px: f64, z: f64) -> f64 {
    let [xa, _, ha] = a.to_meters(wavelength);
    let [xb, _, hb] = b.to_meters(wavelength);
    let la = ((px - xa).powi(2) + z * z + ha * ha).sqrt();
    let lb = ((px - xb).powi(2) + z * z + hb * hb).sqrt();
    ((xb - xa) * (2.0 * px - xa - xb) + ha * ha - hb * hb) / (la + lb)
}

/// Two-way path difference Tx → P → Rx between `later` and `earlier` for
/// the point `P` at boresight range `z` seen at angle `theta` from the
/// array origin.
fn path_difference(
    later: &VirtualElement,
    earlier: &VirtualElement,
    geom: &ArrayGeometry,
    wavelength: f64,
    z: f64,
    theta: f64,
) -> f64 {
    let px = z * theta.tan();
    leg_difference(geom.tx[later.tx], geom.tx[earlier.tx], wavelength, px, z)
        + leg_difference(geom.rx[later.rx], geom.rx[earlier.rx], wavelength, px, z)
}

/// Phase error between two virtual elements: the exact near-field phase step
/// from `earlier` to `later` minus the plane-wave step for their position
/// difference. Zero where `|sin θ| ≥ 1`.
pub fn pair_phase_error(
    earlier: &VirtualElement,
    later: &VirtualElement,
    geom: &ArrayGeometry,
    wavelength: f64,
    z: f64,
    theta: f64,
) -> f64 {
    let s = theta.sin();
    if !(s.abs() < 1.0) {
        return 0.0;
    }
    let dp = (later.pos.az - earlier.pos.az) as f64;
    let dl = path_difference(later, earlier, geom, wavelength, z, theta);
    2.0 * PI / wavelength * (dl + dp * 0.5 * wavelength * s)
}

pub fn junction_phase_error(
    sel: &AzimuthUlaSelection,
    geom: &ArrayGeometry,
    wavelength: f64,
    z: f64,
    theta: f64,
    junction: usize,
) -> Result<f64> {
    let j = sel.junctions.get(junction).ok_or(Error::OutOfRange {
        index: junction,
        limit: sel.junctions.len(),
    })?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "range z must be > 0, got {z}"
        )));
    }
    Ok(pair_phase_error(
        &sel.chosen[j.earlier],
        &sel.chosen[j.later],
        geom,
        wavelength,
        z,
        theta,
    ))
}

pub fn build_phase_error_table(
    sel: &AzimuthUlaSelection,
    geom: &ArrayGeometry,
    wavelength: f64,
    z: f64,
    n_fft: usize,
) -> Result<PhaseErrorTable> {
    check_azimuth_nfft(n_fft, sel.len())?;
    let mut dphi = Vec::with_capacity(sel.junctions.len());
    for j in 0..sel.junctions.len() {
        let row = grid_indices(n_fft)
            .map(|l| {
                let s = grid_sin(l, n_fft);
                if s.abs() >= 1.0 {
                    Ok(0.0)
                } else {
                    junction_phase_error(sel, geom, wavelength, z, s.asin(), j)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        dphi.push(row);
    }
    Ok(PhaseErrorTable {
        dphi,
        range_z: z,
        n_fft,
    })
}

/// Matched-filter power `|Σ y_i exp(+jπ p_i sin θ)|²` over sparse elevation
/// rows at positions `p_i` (half wavelengths), one value per grid angle.
///
/// The sign matches the data convention: a target at elevation `θ` leaves
/// phase `-π p sin θ` on row `p`.
pub fn elevation_spectrum(y: &[Complex64], row_positions: &[i32], grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&theta| {
            let s = theta.sin();
            y.iter()
                .zip(row_positions)
                .map(|(yi, &p)| yi * Complex64::from_polar(1.0, PI * p as f64 * s))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect()
}

/// Virtual elements of one elevation row outside the azimuth ULA.
#[derive(Debug, Clone, PartialEq)]
struct ElevationRow {
    el: i32,
    channels: Vec<usize>,
    az: Vec<i32>,
}

/// Beamformed power over an azimuth × elevation grid for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMap {
    /// Azimuth grid angles, rad, ascending.
    pub azimuth: Vec<f64>,
    /// Elevation grid angles, rad, ascending.
    pub elevation: Vec<f64>,
    /// `power[i * elevation.len() + j]` at `(azimuth[i], elevation[j])`.
    pub power: Vec<f64>,
}

impl AngleMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.power[i * self.elevation.len() + j]
    }

    /// `(azimuth, elevation)` of the largest cell.
    pub fn peak(&self) -> (f64, f64) {
        let mut best = 0;
        for (i, &p) in self.power.iter().enumerate() {
            if p > self.power[best] {
                best = i;
            }
        }
        let ne = self.elevation.len();
        (self.azimuth[best / ne], self.elevation[best % ne])
    }
}

/// Slow-time signal steered at one chest region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSignal {
    pub region: String,
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    pub slowtime: Vec<Complex64>,
}

/// Beamformer for a fixed geometry: azimuth via the ULA (optionally
/// near-field compensated), elevation via equal-weight matched filtering over
/// the distinct elevation rows.
#[derive(Debug, Clone)]
pub struct DoaProcessor {
    pub geom: ArrayGeometry,
    pub virtual_array: VirtualArray,
    pub selection: AzimuthUlaSelection,
    pub n_fft: usize,
    pub table: Option<PhaseErrorTable>,
    rows: Vec<ElevationRow>,
}

impl DoaProcessor {
    pub fn new(geom: &ArrayGeometry, n_fft: usize) -> Result<Self> {
        let virtual_array = build_virtual_array(geom)?;
        let selection = select_azimuth_ula(&virtual_array, geom)?;
        check_azimuth_nfft(n_fft, selection.len())?;
        let rows = virtual_array
            .elevation_rows()
            .into_iter()
            .filter(|(el, _)| *el != 0)
            .map(|(el, channels)| {
                let az = channels
                    .iter()
                    .map(|&c| virtual_array.elements[c].pos.az)
                    .collect();
                ElevationRow { el, channels, az }
            })
            .collect();
        Ok(Self {
            geom: geom.clone(),
            virtual_array,
            selection,
            n_fft,
            table: None,
            rows,
        })
    }

    /// Enables near-field compensation for targets at boresight range `z`.
    pub fn with_calibration(mut self, wavelength: f64, z: f64) -> Result<Self> {
        self.table = Some(build_phase_error_table(
            &self.selection,
            &self.geom,
            wavelength,
            z,
            self.n_fft,
        )?);
        Ok(self)
    }

    pub fn is_calibrated(&self) -> bool {
        self.table.is_some()
    }

    /// Elevation positions of the rows used for elevation beamforming, row 0 first.
    pub fn row_positions(&self) -> Vec<i32> {
        std::iter::once(0)
            .chain(self.rows.iter().map(|r| r.el))
            .collect()
    }

    /// ULA entries of a full-channel snapshot, in ULA order.
    pub fn ula_snapshot(&self, snapshot: &[Complex64]) -> Vec<Complex64> {
        self.selection
            .channels
            .iter()
            .map(|&c| snapshot[c])
            .collect()
    }

    pub fn azimuth_spectrum(&self, snapshot: &[Complex64]) -> Result<AzimuthSpectrum> {
        let x = self.ula_snapshot(snapshot);
        match &self.table {
            Some(t) => near_field_azimuth_fft(&x, &self.selection, t, self.n_fft),
            None => far_field_azimuth_fft(&x, &self.selection, self.n_fft),
        }
    }

    /// Per-row azimuth response at grid index `l`, each normalised by its
    /// element count and referenced to azimuth position 0.
    fn row_responses(
        &self,
        spectrum: &AzimuthSpectrum,
        snapshot: &[Complex64],
        l: i64,
    ) -> Vec<Complex64> {
        let u = grid_sin(l, self.n_fft);
        let shift = Complex64::from_polar(1.0, PI * self.selection.first_position as f64 * u);
        let mut out = Vec::with_capacity(self.rows.len() + 1);
        out.push(spectrum.at_grid(l) * shift / self.selection.len() as f64);
        for row in &self.rows {
            let sum: Complex64 = row
                .channels
                .iter()
                .zip(&row.az)
                .map(|(&c, &az)| snapshot[c] * Complex64::from_polar(1.0, PI * az as f64 * u))
                .sum();
            out.push(sum / row.channels.len() as f64);
        }
        out
    }

    /// Beamformed value at grid index `l` and elevation sine `sin_el`.
    fn steer(
        &self,
        spectrum: &AzimuthSpectrum,
        snapshot: &[Complex64],
        l: i64,
        sin_el: f64,
    ) -> Complex64 {
        let rows = self.row_responses(spectrum, snapshot, l);
        let positions = self.row_positions();
        let sum: Complex64 = rows
            .iter()
            .zip(&positions)
            .map(|(y, &p)| y * Complex64::from_polar(1.0, PI * p as f64 * sin_el))
            .sum();
        sum / rows.len() as f64
    }

    /// Power over the azimuth grid × an elevation grid of `n_elevation`
    /// sine-spaced angles.
    pub fn angle_map(&self, snapshot: &[Complex64], n_elevation: usize) -> Result<AngleMap> {
        let spectrum = self.azimuth_spectrum(snapshot)?;
        let az_grid: Vec<i64> = grid_indices(self.n_fft).collect();
        let el_grid: Vec<i64> = grid_indices(n_elevation).collect();
        let elevation: Vec<f64> = el_grid
            .iter()
            .map(|&l| grid_angle(l, n_elevation))
            .collect();
        let positions = self.row_positions();
        let mut power = Vec::with_capacity(az_grid.len() * elevation.len());
        for &l in &az_grid {
            let rows = self.row_responses(&spectrum, snapshot, l);
            let p = elevation_spectrum(&rows, &positions, &elevation);
            let scale = 1.0 / (rows.len() * rows.len()) as f64;
            power.extend(p.into_iter().map(|v| v * scale));
        }
        Ok(AngleMap {
            azimuth: az_grid.iter().map(|&l| grid_angle(l, self.n_fft)).collect(),
            elevation,
            power,
        })
    }

    /// Azimuth power summed over all frames of a bin, in grid order.
    pub fn integrated_azimuth_power(&self, bins: &BinSignals) -> Result<Vec<f64>> {
        let spectra = (0..bins.n_frames)
            .into_par_iter()
            .map(|m| {
                self.azimuth_spectrum(&bins.snapshot(m))
                    .map(|s| s.power_by_grid())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = vec![0.0; self.n_fft];
        for p in spectra {
            total.iter_mut().zip(&p).for_each(|(t, v)| *t += v);
        }
        Ok(total)
    }

    /// One complex value per frame for each region, steered at the grid
    /// index nearest `sin φ*` in azimuth and matched-filtered at `θ*` in
    /// elevation.
    pub fn select_region_signals(
        &self,
        bins: &BinSignals,
        regions: &[(String, f64, f64)],
    ) -> Result<Vec<RegionSignal>> {
        if bins.n_channels != self.virtual_array.elements.len() {
            return Err(Error::InvalidConfig(format!(
                "range-bin data has {} channels, geometry has {}",
                bins.n_channels,
                self.virtual_array.elements.len()
            )));
        }
        let limit = FIELD_OF_VIEW_DEG.to_radians();
        for (_, phi, theta) in regions {
            for a in [*phi, *theta] {
                if !(a.is_finite() && a.abs() <= limit) {
                    return Err(Error::AngleOutOfFov {
                        angle_deg: a.to_degrees(),
                    });
                }
            }
        }
        let targets: Vec<(i64, f64)> = regions
            .iter()
            .map(|(_, phi, theta)| (nearest_grid_index(phi.sin(), self.n_fft), theta.sin()))
            .collect();
        let per_frame = (0..bins.n_frames)
            .into_par_iter()
            .map(|m| {
                let snap = bins.snapshot(m);
                let spectrum = self.azimuth_spectrum(&snap)?;
                Ok(targets
                    .iter()
                    .map(|&(l, s)| self.steer(&spectrum, &snap, l, s))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(regions
            .iter()
            .enumerate()
            .map(|(r, (name, phi, theta))| RegionSignal {
                region: name.clone(),
                azimuth_rad: *phi,
                elevation_rad: *theta,
                slowtime: per_frame.iter().map(|f| f[r]).collect(),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Position;
    use crate::waveform::SPEED_OF_LIGHT;

    fn cascade_sel() -> (ArrayGeometry, AzimuthUlaSelection) {
        let g = ArrayGeometry::cascade_board();
        let va = build_virtual_array(&g).unwrap();
        let sel = select_azimuth_ula(&va, &g).unwrap();
        (g, sel)
    }

    fn lambda() -> f64 {
        SPEED_OF_LIGHT / 77e9
    }

    #[test]
    fn all_ones_peaks_at_boresight() {
        let (_, sel) = cascade_sel();
        let x = vec![Complex64::new(1.0, 0.0); 86];
        let s = far_field_azimuth_fft(&x, &sel, 128).unwrap();
        assert_eq!(s.peak_grid_index(), 0);
    }

    #[test]
    fn far_target_peak_at_nearest_grid() {
        let (_, sel) = cascade_sel();
        let u = 0.6;
        let x: Vec<Complex64> = (0..86)
            .map(|n| Complex64::from_polar(1.0, -PI * n as f64 * u))
            .collect();
        for n_fft in [128, 256, 512] {
            let s = far_field_azimuth_fft(&x, &sel, n_fft).unwrap();
            assert_eq!(s.peak_grid_index(), nearest_grid_index(u, n_fft));
        }
    }

    #[test]
    fn short_fft_rejected() {
        let (_, sel) = cascade_sel();
        let x = vec![Complex64::new(1.0, 0.0); 86];
        assert!(matches!(
            far_field_azimuth_fft(&x, &sel, 64),
            Err(Error::InvalidNfft { .. })
        ));
    }

    #[test]
    fn zero_table_matches_far_field_exactly() {
        let (_, sel) = cascade_sel();
        let x: Vec<Complex64> = (0..86)
            .map(|n| Complex64::new((n as f64).sin(), 0.3 * n as f64))
            .collect();
        let a = far_field_azimuth_fft(&x, &sel, 256).unwrap();
        let b = near_field_azimuth_fft(&x, &sel, &PhaseErrorTable::zeros(20, 256), 256).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_table_rejected() {
        let (_, sel) = cascade_sel();
        let x = vec![Complex64::new(1.0, 0.0); 86];
        assert!(matches!(
            near_field_azimuth_fft(&x, &sel, &PhaseErrorTable::zeros(20, 128), 256),
            Err(Error::TableMismatch(_))
        ));
        assert!(matches!(
            near_field_azimuth_fft(&x, &sel, &PhaseErrorTable::zeros(19, 128), 128),
            Err(Error::TableMismatch(_))
        ));
    }

    #[test]
    fn two_transmitters_two_wavelengths_apart() {
        let lam = 3.896e-3;
        let geom = ArrayGeometry {
            tx: vec![Position::new(0, 0), Position::new(4, 0)],
            rx: vec![Position::new(0, 0)],
        };
        let a = VirtualElement {
            tx: 0,
            rx: 0,
            pos: Position::new(0, 0),
        };
        let b = VirtualElement {
            tx: 1,
            rx: 0,
            pos: Position::new(4, 0),
        };
        let d = pair_phase_error(&a, &b, &geom, lam, 0.5, 0.0);
        // Hand arithmetic: (2π/λ)(sqrt(z² + (2λ)²) - z).
        let want = 2.0 * PI / lam * ((0.25_f64 + (2.0 * lam).powi(2)).sqrt() - 0.5);
        assert!((d - want).abs() < 1e-12);
        assert!((d - 0.098).abs() < 5e-4, "{d}");
    }

    #[test]
    fn mirror_symmetric_pair_has_no_error_at_boresight() {
        let lam = lambda();
        let geom = ArrayGeometry {
            tx: vec![Position::new(-7, 0), Position::new(7, 0)],
            rx: vec![Position::new(-2, 0), Position::new(2, 0)],
        };
        let a = VirtualElement {
            tx: 0,
            rx: 0,
            pos: Position::new(-9, 0),
        };
        let b = VirtualElement {
            tx: 1,
            rx: 1,
            pos: Position::new(9, 0),
        };
        assert!(pair_phase_error(&a, &b, &geom, lam, 0.4, 0.0).abs() < 1e-9);
    }

    #[test]
    fn far_field_table_vanishes() {
        let (g, sel) = cascade_sel();
        // The residual falls as aperture²/z, so z·max|Δφ| settles to a constant.
        let t4 = build_phase_error_table(&sel, &g, lambda(), 1e4, 128).unwrap();
        let t6 = build_phase_error_table(&sel, &g, lambda(), 1e6, 128).unwrap();
        assert_eq!(t6.n_junctions(), 20);
        assert!(t6.max_abs() < 1e-4, "{}", t6.max_abs());
        let (a, b) = (1e4 * t4.max_abs(), 1e6 * t6.max_abs());
        assert!((a / b - 1.0).abs() < 1e-2, "{a} vs {b}");
        let t100 = build_phase_error_table(&sel, &g, lambda(), 100.0, 128).unwrap();
        assert!(t100.max_abs() < 0.05, "{}", t100.max_abs());
    }

    #[test]
    fn cascade_table_at_half_metre_has_twenty_rows() {
        let (g, sel) = cascade_sel();
        let t = build_phase_error_table(&sel, &g, lambda(), 0.5, 128).unwrap();
        assert_eq!(t.dphi.len(), 20);
        assert!(t.dphi.iter().all(|r| r.len() == 128));
        assert!(t.dphi.iter().flatten().all(|v| v.is_finite()));
        // Evanescent edge carries no compensation.
        assert!(t.dphi.iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn symmetric_junction_gives_symmetric_table() {
        let lam = lambda();
        let geom = ArrayGeometry {
            tx: vec![Position::new(-2, 0), Position::new(0, 0)],
            rx: vec![Position::new(0, 0), Position::new(1, 0)],
        };
        let va = build_virtual_array(&geom).unwrap();
        let sel = select_azimuth_ula(&va, &geom).unwrap();
        let t = build_phase_error_table(&sel, &geom, lam, 0.3, 64).unwrap();
        // Geometry mirrored about the origin reverses the sign of θ.
        let mirrored = ArrayGeometry {
            tx: geom.tx.iter().map(|p| Position::new(-p.az, 0)).collect(),
            rx: geom.rx.iter().map(|p| Position::new(-p.az, 0)).collect(),
        };
        for l in 1..32_i64 {
            let theta = grid_angle(l, 64);
            for j in 0..t.n_junctions() {
                let jn = sel.junctions[j];
                let e = sel.chosen[jn.earlier];
                let la = sel.chosen[jn.later];
                let flip = |v: VirtualElement| VirtualElement {
                    pos: Position::new(-v.pos.az, v.pos.el),
                    ..v
                };
                let fwd = pair_phase_error(&e, &la, &geom, lam, 0.3, theta);
                let back = pair_phase_error(&flip(e), &flip(la), &mirrored, lam, 0.3, -theta);
                assert!((fwd - back).abs() < 1e-9, "{fwd} vs {back}");
            }
        }
    }

    #[test]
    fn phase_error_decays_with_range() {
        let (g, sel) = cascade_sel();
        for &theta in &[0.0, 0.2, -0.4] {
            let max_at = |z: f64| {
                (0..20)
                    .map(|j| {
                        junction_phase_error(&sel, &g, lambda(), z, theta, j)
                            .unwrap()
                            .abs()
                    })
                    .fold(0.0, f64::max)
            };
            // Close in, higher-order terms slow the decay; beyond a metre it is 1/z.
            for z in [0.4, 0.8] {
                let ratio = max_at(z) / max_at(2.0 * z);
                assert!(ratio >= 1.5, "theta {theta} z {z} ratio {ratio}");
            }
            for z in [1.0, 2.0, 5.0] {
                let ratio = max_at(z) / max_at(2.0 * z);
                assert!(ratio >= 1.9, "theta {theta} z {z} ratio {ratio}");
            }
        }
    }

    #[test]
    fn elevation_boresight_peak_and_beamwidth() {
        let pos = [0, 1, 4, 6];
        let y = vec![Complex64::new(1.0, 0.0); 4];
        let grid: Vec<f64> = (-900..=900)
            .map(|i| (i as f64 * 0.1).to_radians())
            .collect();
        let p = elevation_spectrum(&y, &pos, &grid);
        let peak = p.iter().cloned().fold(f64::MIN, f64::max);
        let imax = p.iter().position(|&v| v == peak).unwrap();
        assert!(grid[imax].abs() < 1e-12);
        let above: Vec<f64> = grid
            .iter()
            .zip(&p)
            .filter(|(_, &v)| v >= peak / 2.0)
            .map(|(g, _)| g.to_degrees())
            .filter(|g| g.abs() < 30.0)
            .collect();
        let width = above.last().unwrap() - above.first().unwrap();
        // Half-power width of |Σ exp(jπ p sinθ)|² found by bisection.
        let gain = |t: f64| {
            let (re, im) = pos.iter().fold((0.0, 0.0), |(re, im), &q| {
                let ph = PI * q as f64 * t.sin();
                (re + ph.cos(), im + ph.sin())
            });
            re * re + im * im
        };
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if gain(mid) >= 8.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let oracle = 2.0 * lo.to_degrees();
        assert!((width - oracle).abs() < 0.2, "hpbw {width} vs {oracle}");
        assert!((oracle - 12.2).abs() < 0.1, "{oracle}");
    }

    #[test]
    fn nearest_grid_clamps() {
        assert_eq!(nearest_grid_index(0.6, 128), 38);
        assert_eq!(nearest_grid_index(1.0, 128), 63);
        assert_eq!(nearest_grid_index(-1.0, 128), -64);
    }

    #[test]
    fn out_of_fov_region_rejected() {
        let g = ArrayGeometry::cascade_board();
        let p = DoaProcessor::new(&g, 128).unwrap();
        let bins = BinSignals {
            n_channels: 192,
            n_frames: 1,
            data: vec![Complex64::new(1.0, 0.0); 192],
        };
        let r = p.select_region_signals(&bins, &[("A".into(), 80f64.to_radians(), 0.0)]);
        assert!(matches!(r, Err(Error::AngleOutOfFov { .. })));
    }

    #[test]
    fn boresight_region_is_co_phased_sum() {
        let g = ArrayGeometry::cascade_board();
        let p = DoaProcessor::new(&g, 128).unwrap();
        let phases = [0.1, 0.7, -2.0];
        let n_frames = phases.len();
        let mut data = vec![Complex64::new(0.0, 0.0); 192 * n_frames];
        for c in 0..192 {
            for (m, ph) in phases.iter().enumerate() {
                data[c * n_frames + m] = Complex64::from_polar(2.0, *ph);
            }
        }
        let bins = BinSignals {
            n_channels: 192,
            n_frames,
            data,
        };
        let r = p
            .select_region_signals(&bins, &[("A".into(), 0.0, 0.0)])
            .unwrap();
        for (z, ph) in r[0].slowtime.iter().zip(&phases) {
            assert!((z.arg() - ph).abs() < 1e-12);
            assert!((z.norm() - 2.0).abs() < 1e-12);
        }
    }
}
