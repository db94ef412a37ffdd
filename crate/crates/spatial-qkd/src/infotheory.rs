//! Information measures for the discrete symbol channel.
//!
//! Four routes to the shared information are provided: the sampled mutual
//! information of a joint count matrix, the fidelity-only closed form, the
//! neighbor-refined closed form built on the crosstalk buckets, and the
//! hidden-basis form for a non-uniform Gaussian send distribution. The
//! effective-fidelity inversion links the fidelity form to the refined one.
//!
//! All values are in bits; 0·log 0 is treated as 0 throughout.

use crate::alphabet::SymbolGrid;
use crate::channel::CrosstalkProfile;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InfoError {
    #[error("joint count matrix is empty")]
    EmptyMatrix,
    #[error("fidelity {0} outside (1/d, 1]")]
    FidelityOutOfRange(f64),
    #[error("mutual information {0} outside (0, log2 d)")]
    InfoOutOfRange(f64),
    #[error("probability vector not normalized: sum = {0}")]
    NotNormalized(f64),
    #[error("send probability p({0}) = 1 makes the hidden-basis sum singular")]
    DegenerateSendDistribution(usize),
    #[error("crosstalk profile not normalized")]
    BadProfile,
    #[error("malformed joint-counts CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Average symbol hit probability. Must exceed 1/d for the information
/// formulas to be non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Fidelity(f64);

impl Fidelity {
    pub fn new(value: f64, d: usize) -> Result<Self, InfoError> {
        if value <= 1.0 / d as f64 || value > 1.0 {
            return Err(InfoError::FidelityOutOfRange(value));
        }
        Ok(Self(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

fn xlog2(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// d×d matrix of (sent, received) event counts sampling p(x, y).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointCounts {
    d: usize,
    counts: Vec<u64>,
    total: u64,
}

impl JointCounts {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            counts: vec![0; d * d],
            total: 0,
        }
    }

    pub fn from_counts(d: usize, counts: Vec<u64>) -> Result<Self, InfoError> {
        if counts.len() != d * d {
            return Err(InfoError::Csv(format!(
                "expected {} entries, got {}",
                d * d,
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(Self { d, counts, total })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, sent: usize, received: usize) -> u64 {
        self.counts[sent * self.d + received]
    }

    pub fn increment(&mut self, sent: usize, received: usize) {
        self.counts[sent * self.d + received] += 1;
        self.total += 1;
    }

    /// Sampled mutual information, Σ p(x,y) log2[p(x,y)/(p(x)p(y))].
    /// Under-sampled matrices are used as-is; no smoothing.
    pub fn mutual_information(&self) -> Result<f64, InfoError> {
        if self.total == 0 {
            return Err(InfoError::EmptyMatrix);
        }
        let total = self.total as f64;
        let mut px = vec![0.0; self.d];
        let mut py = vec![0.0; self.d];
        for (x, row) in self.counts.chunks_exact(self.d).enumerate() {
            for (y, &count) in row.iter().enumerate() {
                px[x] += count as f64;
                py[y] += count as f64;
            }
        }
        let mut mi = 0.0;
        for (row, &px_x) in self.counts.chunks_exact(self.d).zip(&px) {
            if px_x == 0.0 {
                continue;
            }
            for (&count, &py_y) in row.iter().zip(&py) {
                if count > 0 {
                    let pxy = count as f64 / total;
                    mi += pxy * (pxy * total * total / (px_x * py_y)).log2();
                }
            }
        }
        Ok(mi)
    }

    /// Bucket-averaged crosstalk profile: the fractions of all events that
    /// hit the target cell, the nearest ring, the next-nearest ring, and
    /// anything else.
    pub fn fit_profile(&self, grid: &SymbolGrid) -> Result<CrosstalkProfile, InfoError> {
        if self.total == 0 {
            return Err(InfoError::EmptyMatrix);
        }
        let (mut c0, mut c1, mut c2) = (0u64, 0u64, 0u64);
        for x in 0..self.d {
            let s = grid.symbol_from_index(x).expect("dimension checked");
            c0 += self.count(x, x);
            let n = grid.neighbors(s);
            for y in n.nearest {
                c1 += self.count(x, y.index());
            }
            for y in n.next_nearest {
                c2 += self.count(x, y.index());
            }
        }
        let t = self.total as f64;
        let (p0, p1, p2) = (c0 as f64 / t, c1 as f64 / t, c2 as f64 / t);
        CrosstalkProfile::new(p0, p1, p2, 1.0 - p0 - p1 - p2).map_err(|_| InfoError::BadProfile)
    }

    /// Write as CSV: a header row of received-symbol indices, then one row
    /// per sent symbol.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), InfoError> {
        let header: Vec<String> = (0..self.d).map(|i| i.to_string()).collect();
        writeln!(w, "{}", header.join(","))?;
        for x in 0..self.d {
            let row: Vec<String> = (0..self.d)
                .map(|y| self.counts[x * self.d + y].to_string())
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Read back a matrix produced by [`write_csv`](Self::write_csv).
    /// Comment lines starting with `#` are skipped.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, InfoError> {
        let mut lines = r
            .lines()
            .map_while(Result::ok)
            .filter(|l| !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| InfoError::Csv("empty file".into()))?;
        let d = header.split(',').count();
        if d == 0 || header.trim().is_empty() {
            return Err(InfoError::Csv("empty header".into()));
        }
        let mut counts = Vec::with_capacity(d * d);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<u64>, _> = line.split(',').map(|f| f.trim().parse()).collect();
            let row = row.map_err(|e| InfoError::Csv(format!("row {}: {e}", i + 1)))?;
            if row.len() != d {
                return Err(InfoError::Csv(format!(
                    "row {} has {} fields, expected {d}",
                    i + 1,
                    row.len()
                )));
            }
            counts.extend(row);
        }
        Self::from_counts(d, counts)
    }
}

/// Fidelity-only mutual information:
/// log2(d) + F log2 F + (1−F) log2[(1−F)/(d−1)].
pub fn mi_fidelity(f: Fidelity, d: usize) -> f64 {
    let fv = f.value();
    (d as f64).log2()
        + xlog2(fv)
        + if fv < 1.0 {
            (1.0 - fv) * ((1.0 - fv) / (d - 1) as f64).log2()
        } else {
            0.0
        }
}

/// Neighbor-refined mutual information from the crosstalk buckets:
/// log2 d + P0 log2 P0 + P1 log2(P1/4) + P2 log2(P2/8)
/// + P_rest log2(P_rest/(d−13)). Zero buckets contribute nothing.
pub fn mi_neighbor(profile: &CrosstalkProfile, d: usize) -> f64 {
    let mut mi = (d as f64).log2();
    mi += xlog2(profile.p0());
    if profile.p1() > 0.0 {
        mi += profile.p1() * (profile.p1() / 4.0).log2();
    }
    if profile.p2() > 0.0 {
        mi += profile.p2() * (profile.p2() / 8.0).log2();
    }
    if profile.p_rest() > 0.0 {
        mi += profile.p_rest() * (profile.p_rest() / (d - 13) as f64).log2();
    }
    mi
}

/// The unique F with mi_fidelity(F, d) = i_ab, by bisection on
/// (1/d + 1e-12, 1), where the map is strictly increasing.
pub fn effective_fidelity(i_ab: f64, d: usize) -> Result<Fidelity, InfoError> {
    let max = (d as f64).log2();
    if !(i_ab > 0.0 && i_ab < max) {
        if (i_ab - max).abs() < f64::EPSILON {
            return Fidelity::new(1.0, d);
        }
        return Err(InfoError::InfoOutOfRange(i_ab));
    }
    let mut lo = 1.0 / d as f64 + 1e-12;
    let mut hi = 1.0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let v = mi_fidelity(Fidelity(mid), d);
        if v < i_ab {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Fidelity::new(0.5 * (lo + hi), d)
}

/// Shannon entropy in bits of a normalized probability vector.
pub fn shannon_entropy(p: &[f64]) -> Result<f64, InfoError> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(InfoError::NotNormalized(sum));
    }
    Ok(-p.iter().map(|&v| xlog2(v)).sum::<f64>())
}

/// Mutual information with the basis hidden from Eve, for send
/// distribution p(k) and effective fidelity F_eff:
///
/// I(Alice) + Σ_k p(k) F log2 F
/// + Σ_k Σ_{j≠k} [p(k)(1−F)p(j)/(1−p(k))] log2[(1−F)p(j)/(1−p(k))].
///
/// For uniform p this collapses to [`mi_fidelity`].
pub fn mi_hidden_basis(p: &[f64], f_eff: Fidelity) -> Result<f64, InfoError> {
    let f = f_eff.value();
    let i_alice = shannon_entropy(p)?;
    if let Some(k) = p.iter().position(|&v| v >= 1.0) {
        return Err(InfoError::DegenerateSendDistribution(k));
    }
    let mut term_f = 0.0;
    let mut term_cross = 0.0;
    // Σ_j p(j) log2 p(j) and Σ_j p(j), adjusted per k by removing j = k.
    let s_plogp: f64 = p.iter().map(|&v| xlog2(v)).sum();
    for &pk in p {
        if pk == 0.0 {
            continue;
        }
        term_f += pk * f * f.log2();
        let a = (1.0 - f) / (1.0 - pk);
        if a > 0.0 {
            // Σ_{j≠k} p(j) log2(a p(j)) = (Σ_j p(j) log2 p(j) − p(k) log2 p(k))
            //                             + (1 − p(k)) log2 a
            let inner = (s_plogp - xlog2(pk)) + (1.0 - pk) * a.log2();
            term_cross += pk * a * inner;
        }
    }
    Ok(i_alice + term_f + term_cross)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::SymbolGrid;

    const D: usize = 1024;

    /// Test-only oracle: mutual information of an explicit real-valued joint
    /// distribution, straight from the defining sum. Independent of the
    /// count-matrix implementation and of the closed forms.
    fn mi_of_joint(p: &[Vec<f64>]) -> f64 {
        let d = p.len();
        let px: Vec<f64> = p.iter().map(|row| row.iter().sum()).collect();
        let mut py = vec![0.0; d];
        for row in p {
            for (y, &v) in row.iter().enumerate() {
                py[y] += v;
            }
        }
        let mut mi = 0.0;
        for x in 0..d {
            for y in 0..d {
                if p[x][y] > 0.0 {
                    mi += p[x][y] * (p[x][y] / (px[x] * py[y])).log2();
                }
            }
        }
        mi
    }

    #[test]
    fn mi_identity_matrix_is_10_bit() {
        let mut j = JointCounts::new(D);
        for i in 0..D {
            j.increment(i, i);
        }
        assert!((j.mutual_information().unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn mi_rank_one_uniform_is_zero() {
        let mut j = JointCounts::new(D);
        for x in 0..D {
            for y in 0..D {
                j.counts[x * D + y] = 3;
            }
        }
        j.total = 3 * (D * D) as u64;
        assert!(j.mutual_information().unwrap().abs() < 1e-12);
    }

    #[test]
    fn mi_empty_matrix_errors() {
        let j = JointCounts::new(D);
        assert!(j.mutual_information().is_err());
    }

    #[test]
    fn mi_fidelity_boundaries() {
        assert!((mi_fidelity(Fidelity::new(1.0, D).unwrap(), D) - 10.0).abs() < 1e-12);
        // F -> 1/d gives 0 bit; 1/d itself is excluded, probe just above
        let f = Fidelity::new(1.0 / D as f64 + 1e-13, D).unwrap();
        assert!(mi_fidelity(f, D).abs() < 1e-9);
        assert!(Fidelity::new(1.0 / D as f64, D).is_err());
        assert!(Fidelity::new(1.01, D).is_err());
    }

    #[test]
    fn mi_fidelity_against_joint_sum_oracle() {
        // Eq. 2 is the mutual information of the symmetric channel with
        // uniform input, F on the diagonal and (1-F)/(d-1) elsewhere.
        // Evaluate that channel through the defining sum instead.
        let f = 0.687;
        let mut joint = vec![vec![(1.0 - f) / ((D - 1) as f64 * D as f64); D]; D];
        for (x, row) in joint.iter_mut().enumerate() {
            row[x] = f / D as f64;
        }
        let oracle = mi_of_joint(&joint);
        let closed = mi_fidelity(Fidelity::new(f, D).unwrap(), D);
        assert!((oracle - closed).abs() < 1e-9);
        // frozen value from the oracle
        assert!((closed - 5.973835).abs() < 1e-3);
    }

    #[test]
    fn mi_neighbor_against_joint_sum_oracle() {
        // Interior-symbol structure realized on a torus so every symbol has
        // full rings and uniform marginals; Eq. 3 must match the raw sum.
        let grid = SymbolGrid::standard();
        let profile = CrosstalkProfile::noise_decomposition();
        let (rows, cols) = (grid.rows() as isize, grid.cols() as isize);
        let mut joint = vec![vec![0.0; D]; D];
        for r in 0..rows {
            for c in 0..cols {
                let x = (r * cols + c) as usize;
                let wrap = |dr: isize, dc: isize| {
                    let rr = (r + dr).rem_euclid(rows);
                    let cc = (c + dc).rem_euclid(cols);
                    (rr * cols + cc) as usize
                };
                let row = &mut joint[x];
                row.fill(profile.p_rest() / (D - 13) as f64);
                row[x] = profile.p0();
                for (dr, dc) in crate::alphabet::NEAREST_OFFSETS {
                    row[wrap(dr, dc)] = profile.p1() / 4.0;
                }
                for (dr, dc) in crate::alphabet::NEXT_NEAREST_OFFSETS {
                    row[wrap(dr, dc)] = profile.p2() / 8.0;
                }
                for v in row.iter_mut() {
                    *v /= D as f64;
                }
            }
        }
        let oracle = mi_of_joint(&joint);
        let closed = mi_neighbor(&profile, D);
        assert!(
            (oracle - closed).abs() < 1e-9,
            "oracle {oracle} closed {closed}"
        );
        // frozen value from the oracle
        assert!((closed - 6.884968).abs() < 1e-3);
    }

    #[test]
    fn mi_neighbor_boundaries_and_fitted_defaults() {
        assert!((mi_neighbor(&CrosstalkProfile::noiseless(), D) - 10.0).abs() < 1e-12);
        assert!((mi_neighbor(&CrosstalkProfile::fitted_ii(), D) - 6.75).abs() < 1e-4);
        assert!((mi_neighbor(&CrosstalkProfile::fitted_ff(), D) - 7.03).abs() < 1e-4);
    }

    #[test]
    fn mi_neighbor_exceeds_mi_fidelity_at_equal_f() {
        for p0 in [0.4, 0.55, 0.687, 0.8, 0.95] {
            let q = 1.0 - p0;
            let profile = CrosstalkProfile::new(p0, q * 0.4, q * 0.15, q * 0.45).unwrap();
            let with_rings = mi_neighbor(&profile, D);
            let fidelity_only = mi_fidelity(Fidelity::new(p0, D).unwrap(), D);
            assert!(with_rings > fidelity_only);
        }
    }

    #[test]
    fn effective_fidelity_paper_values() {
        let f_ii = effective_fidelity(6.75, D).unwrap().value();
        assert!((f_ii - 0.755).abs() < 0.005, "f_ii {f_ii}");
        let f_ff = effective_fidelity(7.03, D).unwrap().value();
        assert!((f_ff - 0.779).abs() < 0.005, "f_ff {f_ff}");
        assert!((effective_fidelity(10.0, D).unwrap().value() - 1.0).abs() < 1e-12);
        assert!(effective_fidelity(10.5, D).is_err());
        assert!(effective_fidelity(-0.1, D).is_err());
    }

    #[test]
    fn effective_fidelity_inverts_mi_fidelity() {
        for f in [0.2, 0.35, 0.5, 0.687, 0.755, 0.9, 0.99] {
            let i = mi_fidelity(Fidelity::new(f, D).unwrap(), D);
            let back = effective_fidelity(i, D).unwrap().value();
            assert!((back - f).abs() < 1e-9, "f {f} back {back}");
        }
    }

    #[test]
    fn mi_fidelity_strictly_increasing() {
        let mut last = f64::MIN;
        for i in 1..=1000 {
            let f = 1.0 / D as f64 + (1.0 - 1.0 / D as f64) * i as f64 / 1000.0;
            let v = mi_fidelity(Fidelity::new(f, D).unwrap(), D);
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn entropy_basics() {
        let uniform = vec![1.0 / D as f64; D];
        assert!((shannon_entropy(&uniform).unwrap() - 10.0).abs() < 1e-9);
        let mut delta = vec![0.0; D];
        delta[7] = 1.0;
        assert!(shannon_entropy(&delta).unwrap().abs() < 1e-12);
        assert!(shannon_entropy(&[0.1; 3]).is_err());
    }

    #[test]
    fn hidden_basis_uniform_limit_collapses_to_fidelity_form() {
        let p = vec![1.0 / D as f64; D];
        for f in [0.3, 0.687, 0.755, 0.9] {
            let fid = Fidelity::new(f, D).unwrap();
            let hb = mi_hidden_basis(&p, fid).unwrap();
            let closed = mi_fidelity(fid, D);
            assert!((hb - closed).abs() < 1e-9, "f {f}: {hb} vs {closed}");
        }
    }

    #[test]
    fn hidden_basis_degenerate_send_distribution_errors() {
        let mut p = vec![0.0; D];
        p[0] = 1.0;
        assert!(mi_hidden_basis(&p, Fidelity::new(0.7, D).unwrap()).is_err());
    }

    #[test]
    fn hidden_basis_paper_values() {
        let grid = SymbolGrid::standard();
        let (p, h) = crate::channel::gaussian_send_distribution(
            &crate::channel::GaussianSpot::fitted_if(&grid),
            &grid,
        );
        assert!((h - 9.4).abs() < 0.1);
        let hb_ii = mi_hidden_basis(&p, Fidelity::new(0.755, D).unwrap()).unwrap();
        assert!((hb_ii - 6.3).abs() < 0.1, "hb_ii {hb_ii}");
        let hb_ff = mi_hidden_basis(&p, Fidelity::new(0.779, D).unwrap()).unwrap();
        assert!((hb_ff - 6.6).abs() < 0.1, "hb_ff {hb_ff}");
    }

    #[test]
    fn hidden_basis_matches_direct_double_sum() {
        // the implementation folds the inner sum; check against the raw
        // O(d^2) double sum on a small non-uniform distribution
        let d = 16usize;
        let mut p: Vec<f64> = (0..d)
            .map(|i| 1.0 + (i as f64 * 0.37).sin().abs())
            .collect();
        let s: f64 = p.iter().sum();
        for v in &mut p {
            *v /= s;
        }
        let f = 0.6;
        let i_alice = shannon_entropy(&p).unwrap();
        let mut direct = i_alice;
        for k in 0..d {
            direct += p[k] * f * f.log2();
            for j in 0..d {
                if j != k {
                    let t = p[k] * (1.0 - f) * p[j] / (1.0 - p[k]);
                    direct += t * ((1.0 - f) * p[j] / (1.0 - p[k])).log2();
                }
            }
        }
        let folded = mi_hidden_basis(&p, Fidelity(f)).unwrap();
        assert!((folded - direct).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let mut j = JointCounts::new(4);
        j.increment(0, 0);
        j.increment(0, 1);
        j.increment(3, 2);
        let mut buf = Vec::new();
        j.write_csv(&mut buf).unwrap();
        let back = JointCounts::read_csv(&buf[..]).unwrap();
        assert_eq!(back, j);
    }

    #[test]
    fn csv_malformed_inputs() {
        assert!(JointCounts::read_csv(&b""[..]).is_err());
        assert!(JointCounts::read_csv(&b"0,1\n5\n"[..]).is_err());
        assert!(JointCounts::read_csv(&b"0,1\na,b\n"[..]).is_err());
    }
}
