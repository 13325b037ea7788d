//! Systematic encoding for unstructured parity-check matrices.
//!
//! `H` is brought to reduced row-echelon form over GF(2) once. Pivot columns
//! carry parity, the remaining columns carry the message, and redundant rows
//! are dropped so `K = N − rank(H)`.

use crate::error::{Error, Result};
use crate::peg::TannerGraph;

type Word = u64;
const BITS: usize = Word::BITS as usize;

fn words(n: usize) -> usize {
    n.div_ceil(BITS)
}

#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    k: usize,
    /// Codeword positions holding message bits, in message order.
    message_positions: Vec<usize>,
    /// Codeword positions holding parity bits, one per independent row.
    parity_positions: Vec<usize>,
    /// For each parity bit, the packed set of message indices it sums.
    parity_rows: Vec<Vec<Word>>,
}

impl Encoder {
    pub fn build(graph: &TannerGraph) -> Result<Self> {
        let n = graph.n_var();
        let m = graph.n_chk();
        let w = words(n);
        let mut rows: Vec<Vec<Word>> = graph
            .chk_adj()
            .iter()
            .map(|adj| {
                let mut r = vec![0 as Word; w];
                for &c in adj {
                    r[c / BITS] ^= 1 << (c % BITS);
                }
                r
            })
            .collect();

        let mut pivots: Vec<usize> = Vec::with_capacity(m);
        let mut rank = 0usize;
        for col in 0..n {
            if rank == m {
                break;
            }
            let (wi, bit) = (col / BITS, 1 << (col % BITS));
            let Some(p) = (rank..m).find(|&r| rows[r][wi] & bit != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[wi] & bit != 0 {
                    for (a, b) in row[wi..].iter_mut().zip(&pivot_row[wi..]) {
                        *a ^= *b;
                    }
                }
            }
            pivots.push(col);
            rank += 1;
        }
        let k = n - rank;
        if k == 0 {
            return Err(Error::EncoderBuild(format!("H has full column rank {rank}; no message bits")));
        }
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let message_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let kw = words(k);
        let parity_rows = rows[..rank]
            .iter()
            .map(|row| {
                let mut packed = vec![0 as Word; kw];
                for (mi, &c) in message_positions.iter().enumerate() {
                    if row[c / BITS] >> (c % BITS) & 1 == 1 {
                        packed[mi / BITS] |= 1 << (mi % BITS);
                    }
                }
                packed
            })
            .collect();
        Ok(Self { n, k, message_positions, parity_positions: pivots, parity_rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn message_positions(&self) -> &[usize] {
        &self.message_positions
    }

    pub fn parity_positions(&self) -> &[usize] {
        &self.parity_positions
    }

    /// Encodes `u` (bits as `0/1` bytes) into an `N`-bit codeword.
    pub fn encode(&self, u: &[u8]) -> Result<Vec<u8>> {
        if u.len() != self.k {
            return Err(Error::Dimension(format!("message length {} != K = {}", u.len(), self.k)));
        }
        let mut packed = vec![0 as Word; words(self.k)];
        for (i, &b) in u.iter().enumerate() {
            if b & 1 == 1 {
                packed[i / BITS] |= 1 << (i % BITS);
            }
        }
        let mut v = vec![0u8; self.n];
        for (&pos, &b) in self.message_positions.iter().zip(u) {
            v[pos] = b & 1;
        }
        for (&pos, row) in self.parity_positions.iter().zip(&self.parity_rows) {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            v[pos] = (ones & 1) as u8;
        }
        Ok(v)
    }

    /// Reads the message bits back out of a codeword-length vector.
    pub fn extract_message(&self, v: &[u8]) -> Vec<u8> {
        self.message_positions.iter().map(|&p| v[p]).collect()
    }
}
