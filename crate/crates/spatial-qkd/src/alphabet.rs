//! The spatial symbol alphabet: a rectangular grid of detection cells, its
//! neighbor topology, and the per-axis Gray-code bit codec.
//!
//! Symbols live on a 32×32 grid by default, giving a 1024-symbol alphabet
//! (10 bit per photon). Positions are Gray-coded per axis so that moving to
//! a 4-connected neighbor flips exactly one bit of the code word, which keeps
//! the bit error rate low when most errors are crosstalk to adjacent cells.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("grid coordinates ({row}, {col}) out of range for {rows}x{cols} grid")]
    OutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("symbol index {index} out of range for dimension {d}")]
    IndexOutOfRange { index: usize, d: usize },
    #[error("grid rows and cols must be powers of two >= 2, got {rows}x{cols}")]
    NotPowerOfTwo { rows: usize, cols: usize },
    #[error("cell_pixels must be >= 1")]
    EmptyCell,
    #[error("bit word length mismatch: expected {expected}, got {got}")]
    WordLength { expected: usize, got: usize },
}

/// Geometry of the symbol alphabet: `rows` × `cols` cells, each spanning
/// `cell_pixels` × `cell_pixels` detector pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SymbolGrid {
    rows: usize,
    cols: usize,
    cell_pixels: usize,
}

impl SymbolGrid {
    /// Both axes must be powers of two so symbols admit a fixed-width
    /// per-axis Gray code.
    pub fn new(rows: usize, cols: usize, cell_pixels: usize) -> Result<Self, AlphabetError> {
        if rows < 2 || cols < 2 || !rows.is_power_of_two() || !cols.is_power_of_two() {
            return Err(AlphabetError::NotPowerOfTwo { rows, cols });
        }
        if cell_pixels == 0 {
            return Err(AlphabetError::EmptyCell);
        }
        Ok(Self {
            rows,
            cols,
            cell_pixels,
        })
    }

    /// The 32×32 grid of 10×10-pixel cells used throughout the defaults.
    pub fn standard() -> Self {
        Self {
            rows: 32,
            cols: 32,
            cell_pixels: 10,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_pixels(&self) -> usize {
        self.cell_pixels
    }

    /// Alphabet size d = rows · cols.
    pub fn dimension(&self) -> usize {
        self.rows * self.cols
    }

    /// Active detector region height in pixels.
    pub fn height_pixels(&self) -> usize {
        self.rows * self.cell_pixels
    }

    /// Active detector region width in pixels.
    pub fn width_pixels(&self) -> usize {
        self.cols * self.cell_pixels
    }

    pub fn row_bits(&self) -> usize {
        self.rows.trailing_zeros() as usize
    }

    pub fn col_bits(&self) -> usize {
        self.cols.trailing_zeros() as usize
    }

    /// Code word length log2(d) = row_bits + col_bits.
    pub fn word_bits(&self) -> usize {
        self.row_bits() + self.col_bits()
    }

    /// Row-major flat index from grid coordinates.
    pub fn symbol_from_rc(&self, row: usize, col: usize) -> Result<SymbolId, AlphabetError> {
        if row >= self.rows || col >= self.cols {
            return Err(AlphabetError::OutOfRange {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(SymbolId(row * self.cols + col))
    }

    pub fn symbol_from_index(&self, index: usize) -> Result<SymbolId, AlphabetError> {
        if index >= self.dimension() {
            return Err(AlphabetError::IndexOutOfRange {
                index,
                d: self.dimension(),
            });
        }
        Ok(SymbolId(index))
    }

    /// Inverse of [`symbol_from_rc`](Self::symbol_from_rc).
    pub fn row_col(&self, s: SymbolId) -> (usize, usize) {
        (s.0 / self.cols, s.0 % self.cols)
    }

    /// 4-connected and next-nearest neighbor sets, truncated at grid edges.
    ///
    /// The next-nearest ring is the 4 diagonal cells plus the 4 cells at
    /// axial distance 2. The membership is fixed by [`NEXT_NEAREST_OFFSETS`]
    /// so the alternative ring choice is a one-line change.
    pub fn neighbors(&self, s: SymbolId) -> Neighbors {
        let (row, col) = self.row_col(s);
        let collect = |offsets: &[(isize, isize)]| {
            offsets
                .iter()
                .filter_map(|&(dr, dc)| {
                    let r = row as isize + dr;
                    let c = col as isize + dc;
                    if r >= 0 && c >= 0 && (r as usize) < self.rows && (c as usize) < self.cols {
                        Some(SymbolId(r as usize * self.cols + c as usize))
                    } else {
                        None
                    }
                })
                .collect()
        };
        Neighbors {
            nearest: collect(&NEAREST_OFFSETS),
            next_nearest: collect(&NEXT_NEAREST_OFFSETS),
        }
    }

    /// Per-axis binary-reflected Gray code: the row code word followed by
    /// the column code word. 4-connected neighbors differ in exactly one bit.
    pub fn gray_encode(&self, s: SymbolId) -> BitWord {
        let (row, col) = self.row_col(s);
        let g = |n: usize| n ^ (n >> 1);
        let word = (g(row) << self.col_bits()) | g(col);
        BitWord {
            bits: word as u32,
            len: self.word_bits(),
        }
    }

    /// Inverse of [`gray_encode`](Self::gray_encode).
    pub fn gray_decode(&self, w: &BitWord) -> Result<SymbolId, AlphabetError> {
        if w.len != self.word_bits() {
            return Err(AlphabetError::WordLength {
                expected: self.word_bits(),
                got: w.len,
            });
        }
        let gray_row = (w.bits as usize) >> self.col_bits();
        let gray_col = (w.bits as usize) & (self.cols - 1);
        let inv = |mut g: usize| {
            let mut n = g;
            while g > 0 {
                g >>= 1;
                n ^= g;
            }
            n
        };
        self.symbol_from_rc(inv(gray_row), inv(gray_col))
    }
}

/// Offsets of the 4-connected nearest-neighbor cells.
pub const NEAREST_OFFSETS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Offsets of the 8-cell next-nearest ring: 4 diagonals plus 4 cells at
/// axial distance 2.
pub const NEXT_NEAREST_OFFSETS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 1),
    (1, -1),
    (1, 1),
    (-2, 0),
    (2, 0),
    (0, -2),
    (0, 2),
];

/// A symbol of the alphabet, identified by its row-major flat index.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct SymbolId(pub usize);

impl SymbolId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Neighbor sets of a symbol; disjoint, and never contain the center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbors {
    pub nearest: Vec<SymbolId>,
    pub next_nearest: Vec<SymbolId>,
}

/// A fixed-length bit word (log2(d) bits), MSB-first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitWord {
    bits: u32,
    len: usize,
}

impl BitWord {
    pub fn new(bits: u32, len: usize) -> Self {
        debug_assert!(len <= 32 && (len == 32 || bits < (1 << len)));
        Self { bits, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn raw(&self) -> u32 {
        self.bits
    }

    /// Bit at position `i`, MSB first.
    pub fn bit(&self, i: usize) -> u8 {
        ((self.bits >> (self.len - 1 - i)) & 1) as u8
    }

    /// Bits as a vector of 0/1 bytes, MSB first.
    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }
}

/// Number of differing bit positions between two equal-length words.
pub fn hamming(a: &BitWord, b: &BitWord) -> Result<u32, AlphabetError> {
    if a.len != b.len {
        return Err(AlphabetError::WordLength {
            expected: a.len,
            got: b.len,
        });
    }
    Ok((a.bits ^ b.bits).count_ones())
}

/// Plain binary (non-Gray) encoding of a symbol, used to quantify the
/// Gray code's error-rate advantage.
pub fn binary_encode(grid: &SymbolGrid, s: SymbolId) -> BitWord {
    let (row, col) = grid.row_col(s);
    BitWord {
        bits: ((row << grid.col_bits()) | col) as u32,
        len: grid.word_bits(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> SymbolGrid {
        SymbolGrid::standard()
    }

    #[test]
    fn row_major_indexing() {
        let g = grid();
        assert_eq!(g.symbol_from_rc(0, 0).unwrap().index(), 0);
        assert_eq!(g.symbol_from_rc(1, 0).unwrap().index(), 32);
        assert_eq!(g.symbol_from_rc(31, 31).unwrap().index(), 1023);
        assert!(g.symbol_from_rc(32, 0).is_err());
        assert!(g.symbol_from_rc(0, 32).is_err());
    }

    #[test]
    fn rc_round_trips_for_all_cells() {
        let g = grid();
        for r in 0..32 {
            for c in 0..32 {
                let s = g.symbol_from_rc(r, c).unwrap();
                assert_eq!(g.row_col(s), (r, c));
            }
        }
    }

    #[test]
    fn grid_validation() {
        assert!(SymbolGrid::new(31, 32, 10).is_err());
        assert!(SymbolGrid::new(32, 32, 0).is_err());
        assert!(SymbolGrid::new(16, 64, 1).is_ok());
    }

    #[test]
    fn neighbor_counts() {
        let g = grid();
        let interior = g.symbol_from_rc(16, 16).unwrap();
        let n = g.neighbors(interior);
        assert_eq!(n.nearest.len(), 4);
        assert_eq!(n.next_nearest.len(), 8);

        let corner = g.symbol_from_rc(0, 0).unwrap();
        assert_eq!(g.neighbors(corner).nearest.len(), 2);

        let edge = g.symbol_from_rc(0, 16).unwrap();
        assert_eq!(g.neighbors(edge).nearest.len(), 3);
    }

    #[test]
    fn neighbor_sets_disjoint_and_exclude_center() {
        let g = grid();
        for i in 0..g.dimension() {
            let s = SymbolId(i);
            let n = g.neighbors(s);
            assert!(!n.nearest.contains(&s));
            assert!(!n.next_nearest.contains(&s));
            for x in &n.nearest {
                assert!(!n.next_nearest.contains(x));
            }
        }
    }

    #[test]
    fn gray_axis_example() {
        // n ^ (n >> 1) for n = 5 is 0b00111
        let g5 = 5usize ^ (5 >> 1);
        assert_eq!(g5, 0b00111);
    }

    #[test]
    fn gray_bijection_exhaustive() {
        let g = grid();
        let mut seen = vec![false; g.dimension()];
        for i in 0..g.dimension() {
            let w = g.gray_encode(SymbolId(i));
            assert_eq!(w.len(), 10);
            let back = g.gray_decode(&w).unwrap();
            assert_eq!(back.index(), i);
            assert!(!seen[w.raw() as usize], "duplicate code word");
            seen[w.raw() as usize] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn gray_decode_zero_and_length_check() {
        let g = grid();
        let s = g.gray_decode(&BitWord::new(0, 10)).unwrap();
        assert_eq!(g.row_col(s), (0, 0));
        assert!(g.gray_decode(&BitWord::new(0, 9)).is_err());
    }

    #[test]
    fn neighbor_hamming_distances_exhaustive() {
        // 4-connected neighbors at distance exactly 1, diagonals exactly 2.
        let g = grid();
        for r in 0..32usize {
            for c in 0..32usize {
                let w = g.gray_encode(g.symbol_from_rc(r, c).unwrap());
                for (dr, dc) in [(0i64, 1i64), (1, 0)] {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 32 && nc < 32 {
                        let wn = g.gray_encode(g.symbol_from_rc(nr as usize, nc as usize).unwrap());
                        assert_eq!(hamming(&w, &wn).unwrap(), 1);
                    }
                }
                for (dr, dc) in [(1i64, 1i64), (1, -1)] {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 32 && (0..32).contains(&nc) {
                        let wn = g.gray_encode(g.symbol_from_rc(nr as usize, nc as usize).unwrap());
                        assert_eq!(hamming(&w, &wn).unwrap(), 2);
                    }
                }
            }
        }
    }

    #[test]
    fn hamming_basics() {
        let a = BitWord::new(0, 10);
        let b = BitWord::new(0b1111111111, 10);
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        assert_eq!(hamming(&a, &b).unwrap(), 10);
        assert!(hamming(&a, &BitWord::new(0, 9)).is_err());
    }

    #[test]
    fn hamming_mean_over_all_pairs() {
        // Mean Hamming distance over all ordered pairs of a balanced code
        // equals len/2 scaled by d/(d-1) restricted to distinct pairs.
        let g = grid();
        let words: Vec<BitWord> = (0..g.dimension())
            .map(|i| g.gray_encode(SymbolId(i)))
            .collect();
        let mut total = 0u64;
        let mut pairs = 0u64;
        for i in 0..words.len() {
            for j in 0..words.len() {
                if i != j {
                    total += hamming(&words[i], &words[j]).unwrap() as u64;
                    pairs += 1;
                }
            }
        }
        let mean = total as f64 / pairs as f64;
        // exhaustive mean: 5 * d / (d - 1)
        assert!((mean - 5.0 * 1024.0 / 1023.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(i in 0usize..1024) {
            let g = grid();
            let s = SymbolId(i);
            prop_assert_eq!(g.gray_decode(&g.gray_encode(s)).unwrap(), s);
        }

        #[test]
        fn hamming_symmetric(a in 0u32..1024, b in 0u32..1024) {
            let wa = BitWord::new(a, 10);
            let wb = BitWord::new(b, 10);
            prop_assert_eq!(hamming(&wa, &wb).unwrap(), hamming(&wb, &wa).unwrap());
            prop_assert_eq!(hamming(&wa, &wb).unwrap() == 0, a == b);
        }
    }
}
