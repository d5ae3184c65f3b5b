//! Rate-1/2 regular (3, 6) LDPC code, length 1024.
//!
//! The parity-check matrix is drawn from a seeded quasi-random ensemble with
//! 4-cycle avoidance, then column-permuted so the last `n - k` positions form
//! an invertible parity block; encoding is systematic through the reduced
//! row-echelon form. Decoding is flooding normalized min-sum (factor 0.8,
//! up to 25 iterations, early exit on a zero syndrome).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::phy::PhyError;

const ROW_WORDS: usize = 16; // 1024 bits
const INFO_WORDS: usize = 8; // 512 bits

/// Rate-1/2 LDPC code with a systematic encoder and min-sum decoder.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    pub n: usize,
    pub k: usize,
    pub max_iterations: usize,
    pub normalization: f32,
    pub seed: u64,
    /// Variable indices per check row (weight 6).
    check_vars: Vec<[u32; 6]>,
    /// (check, slot) pairs per variable (weight 3).
    var_checks: Vec<[(u32, u8); 3]>,
    /// Parity generator: row r gives the info-bit mask of parity bit r.
    encoder: Vec<[u64; INFO_WORDS]>,
}

impl LdpcCode {
    /// The (n = 1024, k = 512) code used throughout the pipeline.
    pub fn standard(seed: u64) -> Result<Self, PhyError> {
        Self::build(1024, 512, seed)
    }

    fn build(n: usize, k: usize, seed: u64) -> Result<Self, PhyError> {
        assert_eq!(n, 1024, "construction is sized for n = 1024");
        assert_eq!(k, 512);
        let m = n - k;
        const MAX_ATTEMPTS: usize = 64;
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng =
                ChaCha12Rng::seed_from_u64(seed.wrapping_add(attempt as u64 * 0x9E37_79B9_7F4A_7C15));
            let Some(columns) = sample_regular_graph(n, m, &mut rng) else {
                continue;
            };
            // Dense H for rank work: m rows of n bits.
            let mut h = vec![[0u64; ROW_WORDS]; m];
            for (var, rows) in columns.iter().enumerate() {
                for &r in rows {
                    h[r as usize][var / 64] |= 1u64 << (var % 64);
                }
            }
            let Some((pivot_cols, rref)) = gauss_jordan(&h, n, m) else {
                continue;
            };

            // Permutation: non-pivot columns become info positions 0..k,
            // pivot columns become parity positions k..n.
            let mut is_pivot = vec![false; n];
            for &c in &pivot_cols {
                is_pivot[c] = true;
            }
            let non_pivot: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
            let mut new_index = vec![0usize; n];
            for (i, &c) in non_pivot.iter().enumerate() {
                new_index[c] = i;
            }
            for (j, &c) in pivot_cols.iter().enumerate() {
                new_index[c] = k + j;
            }

            // Parity masks over info bits from the reduced rows.
            let mut encoder = vec![[0u64; INFO_WORDS]; m];
            for (r, row) in rref.iter().enumerate() {
                for (i, &c) in non_pivot.iter().enumerate() {
                    if row[c / 64] >> (c % 64) & 1 == 1 {
                        encoder[r][i / 64] |= 1u64 << (i % 64);
                    }
                }
            }

            // Sparse adjacency in permuted column order.
            let mut check_vars = vec![[0u32; 6]; m];
            let mut fill = vec![0usize; m];
            for (var, rows) in columns.iter().enumerate() {
                for &r in rows {
                    let r = r as usize;
                    check_vars[r][fill[r]] = new_index[var] as u32;
                    fill[r] += 1;
                }
            }
            debug_assert!(fill.iter().all(|&f| f == 6));
            for row in &mut check_vars {
                row.sort_unstable();
            }
            let mut var_checks = vec![[(0u32, 0u8); 3]; n];
            let mut vfill = vec![0usize; n];
            for (c, vars) in check_vars.iter().enumerate() {
                for (slot, &v) in vars.iter().enumerate() {
                    let v = v as usize;
                    var_checks[v][vfill[v]] = (c as u32, slot as u8);
                    vfill[v] += 1;
                }
            }
            debug_assert!(vfill.iter().all(|&f| f == 3));

            return Ok(Self {
                n,
                k,
                max_iterations: 25,
                normalization: 0.8,
                seed,
                check_vars,
                var_checks,
                encoder,
            });
        }
        Err(PhyError::LdpcConstruction {
            seed,
            attempts: MAX_ATTEMPTS,
        })
    }

    /// Systematic encoding: codeword = [info | parity].
    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        assert_eq!(info.len(), self.k, "info block must be k bits");
        let mut packed = [0u64; INFO_WORDS];
        for (i, &b) in info.iter().enumerate() {
            packed[i / 64] |= (b as u64 & 1) << (i % 64);
        }
        let mut out = Vec::with_capacity(self.n);
        out.extend_from_slice(info);
        for mask in &self.encoder {
            let mut acc = 0u64;
            for (a, b) in mask.iter().zip(&packed) {
                acc ^= a & b;
            }
            out.push((acc.count_ones() & 1) as u8);
        }
        out
    }

    /// Whether `bits` satisfies every parity check.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        assert_eq!(bits.len(), self.n);
        self.check_vars.iter().all(|vars| {
            vars.iter().fold(0u8, |acc, &v| acc ^ bits[v as usize]) == 0
        })
    }

    /// Normalized min-sum decoding from channel LLRs (positive = bit 0).
    ///
    /// Returns the info bits, whether the syndrome was satisfied, and the
    /// number of iterations run (0 when the hard decision already checks).
    pub fn decode(&self, llrs: &[f32]) -> Result<(Vec<u8>, bool, usize), PhyError> {
        if llrs.len() != self.n {
            return Err(PhyError::BadBlockLength {
                got: llrs.len(),
                expected: self.n,
            });
        }
        let mut hard: Vec<u8> = llrs.iter().map(|&l| (l < 0.0) as u8).collect();
        if self.syndrome_ok(&hard) {
            hard.truncate(self.k);
            return Ok((hard, true, 0));
        }

        let m = self.n - self.k;
        let mut v2c = vec![0f32; m * 6];
        for (c, vars) in self.check_vars.iter().enumerate() {
            for (slot, &v) in vars.iter().enumerate() {
                v2c[c * 6 + slot] = llrs[v as usize];
            }
        }
        let mut c2v = vec![0f32; m * 6];
        let mut totals = vec![0f32; self.n];

        for iteration in 1..=self.max_iterations {
            // check update: signs and two smallest magnitudes per row
            for c in 0..m {
                let row = &v2c[c * 6..c * 6 + 6];
                let mut sign = 1.0f32;
                let mut min1 = f32::INFINITY;
                let mut min2 = f32::INFINITY;
                let mut argmin = 0usize;
                for (slot, &msg) in row.iter().enumerate() {
                    if msg < 0.0 {
                        sign = -sign;
                    }
                    let mag = msg.abs();
                    if mag < min1 {
                        min2 = min1;
                        min1 = mag;
                        argmin = slot;
                    } else if mag < min2 {
                        min2 = mag;
                    }
                }
                for slot in 0..6 {
                    let msg = row[slot];
                    let self_sign = if msg < 0.0 { -1.0 } else { 1.0 };
                    let mag = if slot == argmin { min2 } else { min1 };
                    c2v[c * 6 + slot] = self.normalization * sign * self_sign * mag;
                }
            }
            // variable update
            for v in 0..self.n {
                let edges = &self.var_checks[v];
                let mut total = llrs[v];
                for &(c, slot) in edges {
                    total += c2v[c as usize * 6 + slot as usize];
                }
                totals[v] = total;
                for &(c, slot) in edges {
                    let e = c as usize * 6 + slot as usize;
                    v2c[e] = total - c2v[e];
                }
            }
            for (h, &t) in hard.iter_mut().zip(&totals) {
                *h = (t < 0.0) as u8;
            }
            if self.syndrome_ok(&hard) {
                hard.truncate(self.k);
                return Ok((hard, true, iteration));
            }
        }
        hard.truncate(self.k);
        Ok((hard, false, self.max_iterations))
    }
}

/// Draws a (3, 6)-regular bipartite graph without 4-cycles: three distinct
/// check rows per variable, no two variables sharing two rows.
fn sample_regular_graph(n: usize, m: usize, rng: &mut ChaCha12Rng) -> Option<Vec<[u16; 3]>> {
    let mut capacity = vec![6u8; m];
    let mut pair_used = vec![false; m * m];
    let mut columns = Vec::with_capacity(n);
    for _var in 0..n {
        let mut sockets: Vec<u16> = Vec::with_capacity(3072);
        for (r, &cap) in capacity.iter().enumerate() {
            for _ in 0..cap {
                sockets.push(r as u16);
            }
        }
        if sockets.len() < 3 {
            return None;
        }
        let mut chosen: Option<[u16; 3]> = None;
        'tries: for _ in 0..400 {
            let a = sockets[rng.random_range(0..sockets.len())];
            let b = sockets[rng.random_range(0..sockets.len())];
            let c = sockets[rng.random_range(0..sockets.len())];
            if a == b || a == c || b == c {
                continue;
            }
            let mut rows = [a, b, c];
            rows.sort_unstable();
            for w in [(0, 1), (0, 2), (1, 2)] {
                let key = rows[w.0] as usize * m + rows[w.1] as usize;
                if pair_used[key] {
                    continue 'tries;
                }
            }
            for w in [(0, 1), (0, 2), (1, 2)] {
                pair_used[rows[w.0] as usize * m + rows[w.1] as usize] = true;
            }
            for &r in &rows {
                capacity[r as usize] -= 1;
            }
            chosen = Some(rows);
            break;
        }
        columns.push(chosen?);
    }
    Some(columns)
}

/// Gauss-Jordan elimination over GF(2). Returns the pivot columns (ascending)
/// and the reduced rows ordered by pivot, or None when rank < m.
fn gauss_jordan(h: &[[u64; ROW_WORDS]], n: usize, m: usize) -> Option<(Vec<usize>, Vec<[u64; ROW_WORDS]>)> {
    let mut rows = h.to_vec();
    let mut pivot_cols = Vec::with_capacity(m);
    let mut rank = 0usize;
    for col in 0..n {
        let (word, bit) = (col / 64, col % 64);
        let Some(pivot_row) = (rank..m).find(|&r| rows[r][word] >> bit & 1 == 1) else {
            continue;
        };
        rows.swap(rank, pivot_row);
        let pivot = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[word] >> bit & 1 == 1 {
                for (a, b) in row.iter_mut().zip(&pivot) {
                    *a ^= b;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == m {
            break;
        }
    }
    (rank == m).then_some((pivot_cols, rows))
}
