//! Antenna geometry, MIMO virtual array and the azimuth ULA carved out of it.
//!
//! Positions are integers in units of half a wavelength. The azimuth axis is
//! the scene `x` axis, elevation is scene `z`, and boresight is `+y`.
//!
//! Steering phases follow the transmit/receive convention of the cascaded
//! board: the transmit vector carries `exp(+j 2π p·d)` and the receive vector
//! `exp(-j 2π p·d)` with `p` in wavelengths and `d` the direction cosines, so a
//! (tx, rx) channel sees `b_rx · conj(a_tx) = exp(-jπ (p_tx + p_rx)·d)` with
//! `p` back in half wavelengths.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element position in half-wavelength units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Position {
    pub az: i32,
    pub el: i32,
}

impl Position {
    pub const fn new(az: i32, el: i32) -> Self {
        Self { az, el }
    }

    /// Scene coordinates `[x, y, z]` in metres; the array lies in the `y = 0` plane.
    pub fn to_meters(self, wavelength: f64) -> [f64; 3] {
        let half = 0.5 * wavelength;
        [self.az as f64 * half, 0.0, self.el as f64 * half]
    }
}

impl From<[i32; 2]> for Position {
    fn from([az, el]: [i32; 2]) -> Self {
        Self { az, el }
    }
}

impl From<Position> for [i32; 2] {
    fn from(p: Position) -> Self {
        [p.az, p.el]
    }
}

impl std::ops::Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.az + rhs.az, self.el + rhs.el)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub tx: Vec<Position>,
    pub rx: Vec<Position>,
}

impl ArrayGeometry {
    /// 12 Tx / 16 Rx layout of the four-chip cascade board, in the element
    /// order of its steering vectors.
    pub fn cascade_board() -> Self {
        let mut tx = vec![
            Position::new(11, 6),
            Position::new(10, 4),
            Position::new(9, 1),
        ];
        tx.extend((0..9).rev().map(|i| Position::new(4 * i, 0)));
        let rx = [11, 12, 13, 14, 50, 51, 52, 53, 46, 47, 48, 49, 0, 1, 2, 3]
            .into_iter()
            .map(|az| Position::new(az, 0))
            .collect();
        Self { tx, rx }
    }

    pub fn n_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx.len()
    }

    pub fn n_channels(&self) -> usize {
        self.tx.len() * self.rx.len()
    }

    /// Largest physical extent along azimuth, metres.
    pub fn aperture_m(&self, wavelength: f64) -> f64 {
        let (lo, hi) = self
            .tx
            .iter()
            .chain(&self.rx)
            .fold((i32::MAX, i32::MIN), |(lo, hi), p| {
                (lo.min(p.az), hi.max(p.az))
            });
        (hi - lo).max(0) as f64 * 0.5 * wavelength
    }
}

/// One (tx, rx) pair of the MIMO virtual array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VirtualElement {
    pub tx: usize,
    pub rx: usize,
    pub pos: Position,
}

impl VirtualElement {
    /// Plane-wave channel factor `b_rx · conj(a_tx)` for direction cosines
    /// `u` (azimuth axis) and `v` (elevation axis).
    pub fn channel_factor(&self, u: f64, v: f64) -> Complex64 {
        Complex64::from_polar(1.0, -PI * (self.pos.az as f64 * u + self.pos.el as f64 * v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualArray {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Row-major over (tx, rx); `elements[tx * n_rx + rx]`.
    pub elements: Vec<VirtualElement>,
}

impl VirtualArray {
    pub fn channel_index(&self, tx: usize, rx: usize) -> usize {
        tx * self.n_rx + rx
    }

    /// Distinct elevation rows, ascending, with the channel indices in each.
    pub fn elevation_rows(&self) -> BTreeMap<i32, Vec<usize>> {
        let mut rows: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (c, e) in self.elements.iter().enumerate() {
            rows.entry(e.pos.el).or_default().push(c);
        }
        rows
    }
}

pub fn build_virtual_array(geom: &ArrayGeometry) -> Result<VirtualArray> {
    if geom.tx.is_empty() || geom.rx.is_empty() {
        return Err(Error::InvalidConfig(
            "array geometry needs at least one Tx and one Rx".into(),
        ));
    }
    let elements = geom
        .tx
        .iter()
        .enumerate()
        .flat_map(|(t, &tp)| {
            geom.rx
                .iter()
                .enumerate()
                .map(move |(r, &rp)| VirtualElement {
                    tx: t,
                    rx: r,
                    pos: tp + rp,
                })
        })
        .collect();
    Ok(VirtualArray {
        n_tx: geom.tx.len(),
        n_rx: geom.rx.len(),
        elements,
    })
}

/// Contiguous run of ULA entries served by one transmitter and consecutive
/// receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UlaBlock {
    /// First ULA index of the block (also its offset inside the ULA).
    pub start: usize,
    pub len: usize,
    pub tx: usize,
    /// Index of the contiguous receiver segment the block draws from.
    pub rx_group: usize,
}

/// Boundary between two blocks; the later block's phase must be corrected
/// relative to the earlier one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Junction {
    /// Last ULA index of the earlier block.
    pub earlier: usize,
    /// First ULA index of the later block.
    pub later: usize,
}

/// Uniform half-wavelength azimuth array chosen from the virtual array.
#[derive(Debug, Clone, PartialEq)]
pub struct AzimuthUlaSelection {
    /// Azimuth position of ULA index 0.
    pub first_position: i32,
    /// `chosen[i]` sits at azimuth position `first_position + i`.
    pub chosen: Vec<VirtualElement>,
    pub blocks: Vec<UlaBlock>,
    pub junctions: Vec<Junction>,
    /// Channel indices (row-major tx, rx) in ULA order.
    pub channels: Vec<usize>,
}

impl AzimuthUlaSelection {
    pub fn len(&self) -> usize {
        self.chosen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chosen.is_empty()
    }

    /// Block index each ULA entry belongs to.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for (b, blk) in self.blocks.iter().enumerate() {
            out[blk.start..blk.start + blk.len].fill(b);
        }
        out
    }
}

/// Receivers in the azimuth plane grouped into runs of consecutive positions.
fn receiver_groups(geom_rx: &[Position]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..geom_rx.len()).collect();
    order.sort_by_key(|&r| (geom_rx[r].el, geom_rx[r].az, r));
    let mut group = vec![0; geom_rx.len()];
    let mut current = 0;
    for w in 0..order.len() {
        if w > 0 {
            let (a, b) = (geom_rx[order[w - 1]], geom_rx[order[w]]);
            let contiguous = a.el == b.el && (b.az - a.az) <= 1;
            if !contiguous {
                current += 1;
            }
        }
        group[order[w]] = current;
    }
    group
}

/// Picks one virtual element per azimuth position from the elevation-0 row.
///
/// Each position takes the pair with the lowest transmitter position (then
/// lowest receiver position, then lowest indices). Consecutive positions
/// served by the same transmitter form a block; every block boundary is a
/// junction needing near-field phase compensation. For the cascade board
/// this yields 86 positions in 21 blocks with 20 junctions.
pub fn select_azimuth_ula(va: &VirtualArray, geom: &ArrayGeometry) -> Result<AzimuthUlaSelection> {
    let azimuth_row: Vec<&VirtualElement> = va.elements.iter().filter(|e| e.pos.el == 0).collect();
    if azimuth_row.is_empty() {
        return Err(Error::CoverageGap { position: 0 });
    }
    let lo = azimuth_row.iter().map(|e| e.pos.az).min().unwrap_or(0);
    let hi = azimuth_row.iter().map(|e| e.pos.az).max().unwrap_or(0);

    let mut best: BTreeMap<i32, &VirtualElement> = BTreeMap::new();
    for e in &azimuth_row {
        let key = |x: &VirtualElement| (geom.tx[x.tx].az, geom.rx[x.rx].az, x.tx, x.rx);
        best.entry(e.pos.az)
            .and_modify(|cur| {
                if key(e) < key(cur) {
                    *cur = e;
                }
            })
            .or_insert(e);
    }

    let mut chosen = Vec::with_capacity((hi - lo + 1) as usize);
    for p in lo..=hi {
        match best.get(&p) {
            Some(e) => chosen.push(**e),
            None => return Err(Error::CoverageGap { position: p as i64 }),
        }
    }

    let groups = receiver_groups(&geom.rx);
    let mut blocks: Vec<UlaBlock> = Vec::new();
    for (i, e) in chosen.iter().enumerate() {
        let extends = blocks.last().is_some_and(|b| {
            let prev = &chosen[i - 1];
            b.tx == e.tx && geom.rx[e.rx].az == geom.rx[prev.rx].az + 1
        });
        if extends {
            blocks.last_mut().expect("non-empty").len += 1;
        } else {
            blocks.push(UlaBlock {
                start: i,
                len: 1,
                tx: e.tx,
                rx_group: groups[e.rx],
            });
        }
    }
    let junctions = blocks
        .windows(2)
        .map(|w| Junction {
            earlier: w[1].start - 1,
            later: w[1].start,
        })
        .collect();
    let channels = chosen
        .iter()
        .map(|e| va.channel_index(e.tx, e.rx))
        .collect();

    Ok(AzimuthUlaSelection {
        first_position: lo,
        chosen,
        blocks,
        junctions,
        channels,
    })
}

/// Direction cosines along the azimuth and elevation position axes for the
/// steering-vector angles: `theta` off boresight, `phi` around it.
pub fn direction_cosines(theta: f64, phi: f64) -> (f64, f64) {
    (theta.sin() * phi.cos(), theta.sin() * phi.sin())
}

/// Inverse of [`direction_cosines`].
pub fn angles_from_cosines(u: f64, v: f64) -> (f64, f64) {
    let s = (u * u + v * v).sqrt().min(1.0);
    (s.asin(), v.atan2(u))
}

/// Cosines of a scene point as seen from the array origin.
pub fn cosines_of_point(p: [f64; 3]) -> (f64, f64) {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if r == 0.0 {
        (0.0, 0.0)
    } else {
        (p[0] / r, p[2] / r)
    }
}

/// Transmit (`a`) and receive (`b`) steering vectors.
pub fn steering_vector(
    geom: &ArrayGeometry,
    theta: f64,
    phi: f64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let (u, v) = direction_cosines(theta, phi);
    let phase = |p: &Position| PI * (p.az as f64 * u + p.el as f64 * v);
    let a = geom
        .tx
        .iter()
        .map(|p| Complex64::from_polar(1.0, phase(p)))
        .collect();
    let b = geom
        .rx
        .iter()
        .map(|p| Complex64::from_polar(1.0, -phase(p)))
        .collect();
    (a, b)
}
