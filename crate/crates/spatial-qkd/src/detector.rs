//! Synthetic single-photon camera frames and the event-extraction pipeline.
//!
//! Frames mimic an intensified camera read out by a 1280×1024-pixel CMOS:
//! photon events appear as small intensity blobs on top of Gaussian readout
//! noise. Extraction thresholds the frame, groups surviving pixels into
//! 8-connected clusters, applies size and intensity cuts, and maps the
//! intensity-weighted centroids of the survivors onto grid symbols.

use crate::alphabet::{SymbolGrid, SymbolId};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("event position ({row}, {col}) outside {height}x{width} frame")]
    EventOutOfBounds {
        row: f64,
        col: f64,
        height: usize,
        width: usize,
    },
    #[error("cut range invalid: {0}")]
    BadCuts(String),
    #[error("malformed P5 graymap: {0}")]
    Pgm(String),
    #[error("grid with origin ({0}, {1}) does not fit in the frame")]
    GridDoesNotFit(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const FRAME_WIDTH: usize = 1280;
pub const FRAME_HEIGHT: usize = 1024;

/// A single camera frame of 16-bit pixel counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u16>,
}

impl Frame {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            counts: vec![0; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.counts[row * self.width + col]
    }

    /// Write as a binary 16-bit P5 portable graymap (big-endian samples).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<(), DetectorError> {
        write!(w, "P5\n{} {}\n65535\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.counts.len() * 2);
        for &c in &self.counts {
            buf.extend_from_slice(&c.to_be_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Read back a frame written by [`write_pgm`](Self::write_pgm).
    pub fn read_pgm<R: BufRead>(mut r: R) -> Result<Self, DetectorError> {
        let mut magic = [0u8; 2];
        r.read_exact(&mut magic)
            .map_err(|_| DetectorError::Pgm("truncated header".into()))?;
        if &magic != b"P5" {
            return Err(DetectorError::Pgm("missing P5 magic".into()));
        }
        let mut fields = Vec::new();
        while fields.len() < 3 {
            let mut tok = Vec::new();
            let mut byte = [0u8; 1];
            loop {
                r.read_exact(&mut byte)
                    .map_err(|_| DetectorError::Pgm("truncated header".into()))?;
                if byte[0].is_ascii_whitespace() {
                    if tok.is_empty() {
                        continue;
                    }
                    break;
                }
                tok.push(byte[0]);
            }
            let text =
                String::from_utf8(tok).map_err(|_| DetectorError::Pgm("bad header".into()))?;
            let v: usize = text
                .parse()
                .map_err(|_| DetectorError::Pgm(format!("bad header field {text}")))?;
            fields.push(v);
        }
        let (width, height, maxval) = (fields[0], fields[1], fields[2]);
        if maxval != 65535 {
            return Err(DetectorError::Pgm(format!(
                "expected 16-bit maxval, got {maxval}"
            )));
        }
        let mut buf = vec![0u8; width * height * 2];
        r.read_exact(&mut buf)
            .map_err(|_| DetectorError::Pgm("truncated pixel data".into()))?;
        let counts = buf
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect();
        Ok(Self {
            width,
            height,
            counts,
        })
    }
}

/// Event-selection cuts: the per-pixel noise threshold and the cluster
/// size / intensity windows that reject readout noise and spurious ion
/// events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EventCuts {
    pub pixel_threshold: u16,
    pub cluster_size_min: usize,
    pub cluster_size_max: usize,
    pub cluster_intensity_min: u32,
    pub cluster_intensity_max: u32,
}

impl Default for EventCuts {
    fn default() -> Self {
        Self {
            pixel_threshold: 5,
            cluster_size_min: 2,
            cluster_size_max: 10,
            cluster_intensity_min: 1,
            cluster_intensity_max: 60,
        }
    }
}

impl EventCuts {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.cluster_size_min > self.cluster_size_max {
            return Err(DetectorError::BadCuts(format!(
                "size window {}..{}",
                self.cluster_size_min, self.cluster_size_max
            )));
        }
        if self.cluster_intensity_min > self.cluster_intensity_max {
            return Err(DetectorError::BadCuts(format!(
                "intensity window {}..{}",
                self.cluster_intensity_min, self.cluster_intensity_max
            )));
        }
        Ok(())
    }
}

/// A thresholded cluster, accepted or not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonEvent {
    pub centroid_row: f64,
    pub centroid_col: f64,
    pub size: usize,
    pub intensity: u32,
}

/// Which cut rejected a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooSmall,
    TooLarge,
    TooDim,
    TooBright,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::TooSmall => "too_small",
            RejectReason::TooLarge => "too_large",
            RejectReason::TooDim => "too_dim",
            RejectReason::TooBright => "too_bright",
        }
    }
}

/// Extraction output: accepted events plus per-cluster diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub accepted: Vec<PhotonEvent>,
    pub rejected: Vec<(PhotonEvent, RejectReason)>,
}

/// Relative blob weights: center pixel, 4-connected ring, diagonal ring.
/// An amplitude-30 event puts ~30 counts on the center and ~6 on each
/// 4-connected neighbor, landing inside the default cuts.
const BLOB_CENTER: f64 = 1.0;
const BLOB_EDGE: f64 = 0.2;
const BLOB_CORNER: f64 = 0.05;

/// Render photon events onto a frame and add Gaussian readout noise of the
/// given variance. Negative samples clip to zero; values round to integers.
pub fn synthesize_frame<R: Rng + ?Sized>(
    events: &[(f64, f64, f64)],
    noise_variance: f64,
    rng: &mut R,
) -> Result<Frame, DetectorError> {
    synthesize_frame_sized(events, noise_variance, FRAME_WIDTH, FRAME_HEIGHT, rng)
}

pub fn synthesize_frame_sized<R: Rng + ?Sized>(
    events: &[(f64, f64, f64)],
    noise_variance: f64,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<Frame, DetectorError> {
    let mut field = vec![0.0f64; width * height];
    for &(row, col, amplitude) in events {
        if !(0.0..height as f64).contains(&row) || !(0.0..width as f64).contains(&col) {
            return Err(DetectorError::EventOutOfBounds {
                row,
                col,
                height,
                width,
            });
        }
        let (r0, c0) = (row.round() as isize, col.round() as isize);
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                let (r, c) = (r0 + dr, c0 + dc);
                if r < 0 || c < 0 || r as usize >= height || c as usize >= width {
                    continue;
                }
                let weight = match (dr.abs(), dc.abs()) {
                    (0, 0) => BLOB_CENTER,
                    (0, 1) | (1, 0) => BLOB_EDGE,
                    _ => BLOB_CORNER,
                };
                field[r as usize * width + c as usize] += amplitude * weight;
            }
        }
    }
    let mut frame = Frame::zeros(width, height);
    if noise_variance > 0.0 {
        let noise = Normal::new(0.0, noise_variance.sqrt()).expect("positive variance");
        for (out, base) in frame.counts.iter_mut().zip(&field) {
            let v = (base + noise.sample(rng)).round();
            *out = v.clamp(0.0, u16::MAX as f64) as u16;
        }
    } else {
        for (out, base) in frame.counts.iter_mut().zip(&field) {
            *out = base.round().clamp(0.0, u16::MAX as f64) as u16;
        }
    }
    Ok(frame)
}

/// Threshold, cluster (8-connected), cut, and centroid a frame.
/// Scan order never changes the result: clusters are reported sorted by
/// centroid position.
pub fn extract_events(frame: &Frame, cuts: &EventCuts) -> Result<Extraction, DetectorError> {
    cuts.validate()?;
    let (w, h) = (frame.width, frame.height);
    let mut visited = vec![false; w * h];
    let mut out = Extraction::default();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if visited[start] || frame.counts[start] < cuts.pixel_threshold {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(idx) = stack.pop() {
            pixels.push(idx);
            let (r, c) = (idx / w, idx % w);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr as usize >= h || nc as usize >= w {
                        continue;
                    }
                    let nidx = nr as usize * w + nc as usize;
                    if !visited[nidx] && frame.counts[nidx] >= cuts.pixel_threshold {
                        visited[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        let intensity: u32 = pixels.iter().map(|&i| frame.counts[i] as u32).sum();
        let weight = intensity as f64;
        let centroid_row = pixels
            .iter()
            .map(|&i| (i / w) as f64 * frame.counts[i] as f64)
            .sum::<f64>()
            / weight;
        let centroid_col = pixels
            .iter()
            .map(|&i| (i % w) as f64 * frame.counts[i] as f64)
            .sum::<f64>()
            / weight;
        let event = PhotonEvent {
            centroid_row,
            centroid_col,
            size: pixels.len(),
            intensity,
        };
        let verdict = if event.size < cuts.cluster_size_min {
            Some(RejectReason::TooSmall)
        } else if event.size > cuts.cluster_size_max {
            Some(RejectReason::TooLarge)
        } else if event.intensity < cuts.cluster_intensity_min {
            Some(RejectReason::TooDim)
        } else if event.intensity > cuts.cluster_intensity_max {
            Some(RejectReason::TooBright)
        } else {
            None
        };
        match verdict {
            Some(reason) => out.rejected.push((event, reason)),
            None => out.accepted.push(event),
        }
    }
    let by_pos = |a: &PhotonEvent, b: &PhotonEvent| {
        (a.centroid_row, a.centroid_col)
            .partial_cmp(&(b.centroid_row, b.centroid_col))
            .unwrap()
    };
    out.accepted.sort_by(by_pos);
    out.rejected.sort_by(|a, b| by_pos(&a.0, &b.0));
    Ok(out)
}

/// Symbols recovered from events, plus the number of events that fell
/// outside the active region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappedSymbols {
    pub symbols: Vec<SymbolId>,
    pub dropped: usize,
}

/// Default active-region origin: the grid centered in the frame.
pub fn centered_origin(grid: &SymbolGrid) -> (usize, usize) {
    (
        (FRAME_HEIGHT - grid.height_pixels()) / 2,
        (FRAME_WIDTH - grid.width_pixels()) / 2,
    )
}

/// Map centroids onto grid cells. Cells are half-open in both axes, so a
/// centroid exactly on a boundary belongs to the higher-index cell.
pub fn events_to_symbols(
    events: &[PhotonEvent],
    grid: &SymbolGrid,
    origin: (usize, usize),
    frame_height: usize,
    frame_width: usize,
) -> Result<MappedSymbols, DetectorError> {
    let (origin_row, origin_col) = origin;
    if origin_row + grid.height_pixels() > frame_height
        || origin_col + grid.width_pixels() > frame_width
    {
        return Err(DetectorError::GridDoesNotFit(origin_row, origin_col));
    }
    let mut symbols = Vec::new();
    let mut dropped = 0usize;
    for e in events {
        let r = e.centroid_row - origin_row as f64;
        let c = e.centroid_col - origin_col as f64;
        if r < 0.0 || c < 0.0 || r >= grid.height_pixels() as f64 || c >= grid.width_pixels() as f64
        {
            dropped += 1;
            continue;
        }
        let row = (r / grid.cell_pixels() as f64).floor() as usize;
        let col = (c / grid.cell_pixels() as f64).floor() as usize;
        symbols.push(grid.symbol_from_rc(row, col).expect("bounds checked"));
    }
    Ok(MappedSymbols { symbols, dropped })
}

/// Pixel position of the center of a symbol's cell in the frame.
pub fn symbol_center(grid: &SymbolGrid, s: SymbolId, origin: (usize, usize)) -> (f64, f64) {
    let (row, col) = grid.row_col(s);
    (
        origin.0 as f64 + (row as f64 + 0.5) * grid.cell_pixels() as f64,
        origin.1 as f64 + (col as f64 + 0.5) * grid.cell_pixels() as f64,
    )
}
