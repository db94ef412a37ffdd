//! Stochastic model of the quantum channel and detection.
//!
//! Compatible basis pairs (II, FF) see a crosstalk profile: most of the
//! probability lands on the target cell, the rest spills to the nearest and
//! next-nearest neighbor rings and a uniform background that also absorbs
//! dark counts. Incompatible pairs (IF, FI) see a Gaussian spot that is
//! independent of the sent symbol.

use crate::alphabet::{SymbolGrid, SymbolId, NEAREST_OFFSETS, NEXT_NEAREST_OFFSETS};
use rand::Rng;
use statrs::function::erf::erf;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("crosstalk profile does not sum to 1: got {sum}")]
    NotNormalized { sum: f64 },
    #[error("crosstalk bucket out of [0,1]: {value}")]
    BucketOutOfRange { value: f64 },
    #[error("gaussian widths must be positive, got sigma_row={sigma_row}, sigma_col={sigma_col}")]
    NonPositiveSigma { sigma_row: f64, sigma_col: f64 },
    #[error("detection probability must lie in (0,1], got {0}")]
    BadDetectionProbability(f64),
}

/// Measurement / preparation basis: the image plane or its Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Basis {
    Image,
    Fourier,
}

impl Basis {
    pub fn compatible(self, other: Basis) -> bool {
        self == other
    }
}

/// Hit probabilities for the target cell, the 4-cell nearest ring, the
/// 8-cell next-nearest ring, and the uniform background (dark counts
/// included).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CrosstalkProfile {
    p0: f64,
    p1: f64,
    p2: f64,
    p_rest: f64,
}

impl CrosstalkProfile {
    pub fn new(p0: f64, p1: f64, p2: f64, p_rest: f64) -> Result<Self, ChannelError> {
        for v in [p0, p1, p2, p_rest] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ChannelError::BucketOutOfRange { value: v });
            }
        }
        let sum = p0 + p1 + p2 + p_rest;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(ChannelError::NotNormalized { sum });
        }
        Ok(Self { p0, p1, p2, p_rest })
    }

    /// Profile from the measured noise decomposition: fidelity 68.7%,
    /// 13.3% neighbor crosstalk, 13.8% dark counts, remainder in the
    /// next-nearest ring.
    pub fn noise_decomposition() -> Self {
        Self {
            p0: 0.687,
            p1: 0.133,
            p2: 0.042,
            p_rest: 0.138,
        }
    }

    /// Profile fitted so the neighbor-refined mutual information comes out
    /// at 6.75 bit (the II configuration), keeping the noise split of
    /// [`noise_decomposition`](Self::noise_decomposition).
    pub fn fitted_ii() -> Self {
        let p0 = 0.670474;
        Self::with_noise_split(p0)
    }

    /// As [`fitted_ii`](Self::fitted_ii) but for 7.03 bit (FF configuration).
    pub fn fitted_ff() -> Self {
        let p0 = 0.704514;
        Self::with_noise_split(p0)
    }

    /// Distribute the non-target mass 1−p0 in the measured proportions
    /// 0.133 : 0.042 : 0.138 over nearest, next-nearest and background.
    fn with_noise_split(p0: f64) -> Self {
        let q = 1.0 - p0;
        let p1 = q * (0.133 / 0.313);
        let p2 = q * (0.042 / 0.313);
        Self {
            p0,
            p1,
            p2,
            p_rest: q - p1 - p2,
        }
    }

    /// Noiseless channel: all mass on the target cell.
    pub fn noiseless() -> Self {
        Self {
            p0: 1.0,
            p1: 0.0,
            p2: 0.0,
            p_rest: 0.0,
        }
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn p_rest(&self) -> f64 {
        self.p_rest
    }
}

/// Convention for the reported fit "width" of the incompatible-basis spot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WidthConvention {
    /// Width is the standard deviation directly.
    StdDev,
    /// Width is w in exp(-x²/w²), so sigma = w / sqrt(2). This is the
    /// default; it reproduces the reported 9.4-bit send entropy.
    Waist,
    /// Width is the full width at half maximum.
    Fwhm,
}

impl WidthConvention {
    pub fn to_sigma(self, width: f64) -> f64 {
        match self {
            WidthConvention::StdDev => width,
            WidthConvention::Waist => width / std::f64::consts::SQRT_2,
            WidthConvention::Fwhm => width / (8.0 * std::f64::consts::LN_2).sqrt(),
        }
    }
}

/// A separable Gaussian intensity spot on the active detector region,
/// parameterized in pixels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianSpot {
    pub sigma_row: f64,
    pub sigma_col: f64,
    pub center_row: f64,
    pub center_col: f64,
}

impl GaussianSpot {
    pub fn new(
        sigma_row: f64,
        sigma_col: f64,
        center_row: f64,
        center_col: f64,
    ) -> Result<Self, ChannelError> {
        if sigma_row <= 0.0 || sigma_col <= 0.0 {
            return Err(ChannelError::NonPositiveSigma {
                sigma_row,
                sigma_col,
            });
        }
        Ok(Self {
            sigma_row,
            sigma_col,
            center_row,
            center_col,
        })
    }

    /// Spot from fitted widths under a width convention, centered on the grid.
    pub fn from_fit_widths(
        width_row: f64,
        width_col: f64,
        convention: WidthConvention,
        grid: &SymbolGrid,
    ) -> Result<Self, ChannelError> {
        Self::new(
            convention.to_sigma(width_row),
            convention.to_sigma(width_col),
            grid.height_pixels() as f64 / 2.0,
            grid.width_pixels() as f64 / 2.0,
        )
    }

    /// Fitted IF-configuration spot (widths 106.7 px rows, 89.9 px columns).
    pub fn fitted_if(grid: &SymbolGrid) -> Self {
        Self::from_fit_widths(106.7, 89.9, WidthConvention::Waist, grid).unwrap()
    }

    /// Fitted FI-configuration spot (widths 102 px rows, 96.3 px columns).
    pub fn fitted_fi(grid: &SymbolGrid) -> Self {
        Self::from_fit_widths(102.0, 96.3, WidthConvention::Waist, grid).unwrap()
    }
}

/// Probability distribution over received symbols for a compatible basis
/// pair: p0 on the sent cell, p1 split equally over the 4 nominal nearest
/// neighbors, p2 over the 8 next-nearest, everything else (background plus
/// the shares of neighbors truncated at grid edges) uniform over the
/// remaining cells.
pub fn compatible_distribution(
    sent: SymbolId,
    profile: &CrosstalkProfile,
    grid: &SymbolGrid,
) -> Vec<f64> {
    let d = grid.dimension();
    let n = grid.neighbors(sent);
    let mut dist = vec![0.0; d];
    dist[sent.index()] = profile.p0;
    for s in &n.nearest {
        dist[s.index()] = profile.p1 / 4.0;
    }
    for s in &n.next_nearest {
        dist[s.index()] = profile.p2 / 8.0;
    }
    let truncated = profile.p1 * (4 - n.nearest.len()) as f64 / 4.0
        + profile.p2 * (8 - n.next_nearest.len()) as f64 / 8.0;
    let background_cells = d - 1 - n.nearest.len() - n.next_nearest.len();
    let per_cell = (profile.p_rest + truncated) / background_cells as f64;
    for (i, v) in dist.iter_mut().enumerate() {
        if i != sent.index() && *v == 0.0 {
            *v = per_cell;
        }
    }
    dist
}

/// Probability that the separable Gaussian lands in each grid cell,
/// renormalized over the active region. Independent of the sent symbol.
pub fn incompatible_distribution(spot: &GaussianSpot, grid: &SymbolGrid) -> Vec<f64> {
    let row_p = axis_cell_probs(
        grid.rows(),
        grid.cell_pixels(),
        spot.center_row,
        spot.sigma_row,
    );
    let col_p = axis_cell_probs(
        grid.cols(),
        grid.cell_pixels(),
        spot.center_col,
        spot.sigma_col,
    );
    let mut dist = Vec::with_capacity(grid.dimension());
    for r in &row_p {
        for c in &col_p {
            dist.push(r * c);
        }
    }
    dist
}

/// Alice's Gaussian send distribution p(k), with its Shannon entropy in bits.
/// Construction is identical to [`incompatible_distribution`].
pub fn gaussian_send_distribution(spot: &GaussianSpot, grid: &SymbolGrid) -> (Vec<f64>, f64) {
    let dist = incompatible_distribution(spot, grid);
    let entropy = crate::infotheory::shannon_entropy(&dist).expect("normalized by construction");
    (dist, entropy)
}

/// Gaussian mass per cell along one axis, renormalized over the grid extent.
fn axis_cell_probs(cells: usize, cell_pixels: usize, center: f64, sigma: f64) -> Vec<f64> {
    let cdf = |x: f64| 0.5 * (1.0 + erf((x - center) / (sigma * std::f64::consts::SQRT_2)));
    let mut p: Vec<f64> = (0..cells)
        .map(|i| {
            let lo = (i * cell_pixels) as f64;
            let hi = ((i + 1) * cell_pixels) as f64;
            cdf(hi) - cdf(lo)
        })
        .collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    p
}

/// Full channel model: one crosstalk profile per compatible basis pair,
/// one Gaussian spot per incompatible pair, and an overall detection
/// probability combining loss and detector quantum efficiency.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    grid: SymbolGrid,
    compatible_ii: CrosstalkProfile,
    compatible_ff: CrosstalkProfile,
    incompatible_if: GaussianSpot,
    incompatible_fi: GaussianSpot,
    detection_probability: f64,
    // cached cumulative distributions for the incompatible pairs
    cum_if: Vec<f64>,
    cum_fi: Vec<f64>,
}

/// Default detection probability: (1 − 0.182) loss survival times 28%
/// detector quantum efficiency.
pub const DEFAULT_DETECTION_PROBABILITY: f64 = (1.0 - 0.182) * 0.28;

impl ChannelModel {
    pub fn new(
        grid: SymbolGrid,
        compatible_ii: CrosstalkProfile,
        compatible_ff: CrosstalkProfile,
        incompatible_if: GaussianSpot,
        incompatible_fi: GaussianSpot,
        detection_probability: f64,
    ) -> Result<Self, ChannelError> {
        if !(detection_probability > 0.0 && detection_probability <= 1.0) {
            return Err(ChannelError::BadDetectionProbability(detection_probability));
        }
        let cum_if = cumulative(&incompatible_distribution(&incompatible_if, &grid));
        let cum_fi = cumulative(&incompatible_distribution(&incompatible_fi, &grid));
        Ok(Self {
            grid,
            compatible_ii,
            compatible_ff,
            incompatible_if,
            incompatible_fi,
            detection_probability,
            cum_if,
            cum_fi,
        })
    }

    /// Channel with the fitted defaults on the standard grid.
    pub fn paper_defaults() -> Self {
        let grid = SymbolGrid::standard();
        Self::new(
            grid,
            CrosstalkProfile::fitted_ii(),
            CrosstalkProfile::fitted_ff(),
            GaussianSpot::fitted_if(&grid),
            GaussianSpot::fitted_fi(&grid),
            DEFAULT_DETECTION_PROBABILITY,
        )
        .unwrap()
    }

    /// Lossless, noiseless channel for protocol sanity checks.
    pub fn noiseless() -> Self {
        let grid = SymbolGrid::standard();
        Self::new(
            grid,
            CrosstalkProfile::noiseless(),
            CrosstalkProfile::noiseless(),
            GaussianSpot::fitted_if(&grid),
            GaussianSpot::fitted_fi(&grid),
            1.0,
        )
        .unwrap()
    }

    pub fn grid(&self) -> &SymbolGrid {
        &self.grid
    }

    pub fn detection_probability(&self) -> f64 {
        self.detection_probability
    }

    pub fn compatible_profile(&self, basis: Basis) -> &CrosstalkProfile {
        match basis {
            Basis::Image => &self.compatible_ii,
            Basis::Fourier => &self.compatible_ff,
        }
    }

    pub fn incompatible_spot(&self, alice: Basis) -> &GaussianSpot {
        match alice {
            Basis::Image => &self.incompatible_if,
            Basis::Fourier => &self.incompatible_fi,
        }
    }

    /// One gated detection round. Returns `None` on no-detection (loss).
    /// Sampling is exact for the distributions above; deterministic given
    /// the rng state.
    pub fn transmit<R: Rng + ?Sized>(
        &self,
        sent: SymbolId,
        alice_basis: Basis,
        bob_basis: Basis,
        rng: &mut R,
    ) -> Option<SymbolId> {
        if self.detection_probability < 1.0 && rng.gen::<f64>() >= self.detection_probability {
            return None;
        }
        if alice_basis.compatible(bob_basis) {
            Some(self.sample_compatible(sent, self.compatible_profile(alice_basis), rng))
        } else {
            let cum = match alice_basis {
                Basis::Image => &self.cum_if,
                Basis::Fourier => &self.cum_fi,
            };
            Some(sample_cumulative(cum, rng))
        }
    }

    /// Bucket sampling of the compatible-pair distribution: pick the target,
    /// a nominal ring slot, or the background; nominal slots that fall off
    /// the grid re-route to the background, matching the edge redistribution
    /// of [`compatible_distribution`].
    fn sample_compatible<R: Rng + ?Sized>(
        &self,
        sent: SymbolId,
        profile: &CrosstalkProfile,
        rng: &mut R,
    ) -> SymbolId {
        let (row, col) = self.grid.row_col(sent);
        let u: f64 = rng.gen();
        let pick = |offsets: &[(isize, isize)], slot: usize| -> Option<SymbolId> {
            let (dr, dc) = offsets[slot];
            let r = row as isize + dr;
            let c = col as isize + dc;
            if r >= 0
                && c >= 0
                && (r as usize) < self.grid.rows()
                && (c as usize) < self.grid.cols()
            {
                Some(SymbolId(r as usize * self.grid.cols() + c as usize))
            } else {
                None
            }
        };
        if u < profile.p0 {
            return sent;
        }
        let mut hit = None;
        if u < profile.p0 + profile.p1 {
            let slot = (((u - profile.p0) / profile.p1) * 4.0) as usize;
            hit = pick(&NEAREST_OFFSETS, slot.min(3));
        } else if u < profile.p0 + profile.p1 + profile.p2 {
            let slot = (((u - profile.p0 - profile.p1) / profile.p2) * 8.0) as usize;
            hit = pick(&NEXT_NEAREST_OFFSETS, slot.min(7));
        }
        match hit {
            Some(s) => s,
            // background: uniform over cells outside the target and its rings
            None => {
                let n = self.grid.neighbors(sent);
                loop {
                    let s = SymbolId(rng.gen_range(0..self.grid.dimension()));
                    if s != sent && !n.nearest.contains(&s) && !n.next_nearest.contains(&s) {
                        return s;
                    }
                }
            }
        }
    }
}

fn cumulative(dist: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cum = Vec::with_capacity(dist.len());
    for p in dist {
        acc += p;
        cum.push(acc);
    }
    if let Some(last) = cum.last_mut() {
        *last = 1.0;
    }
    cum
}

fn sample_cumulative<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> SymbolId {
    let u: f64 = rng.gen();
    let idx = cum.partition_point(|&c| c <= u);
    SymbolId(idx.min(cum.len() - 1))
}
