//! Regular UEP interleavers, precoders, signal mappers and the average
//! Euclidean weight enumerator.
//!
//! Bit-order convention, used everywhere in the crate: after interleaving,
//! the bit pair `(b[2i], b[2i+1])` forms the label `(Z1, Z2)` of symbol `i`,
//! so `Z1` sits at even (0-based) positions. The RLL constrainer works on
//! label values `2·Z1 + Z2`; a [`Labeling`] turns labels into amplitude
//! levels `0..3`, and level `s` is sent at `(2s − 3)/√5`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelingKind {
    #[default]
    Natural,
    Gray,
}

/// Bijection between 2-bit labels and 4-PAM levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Labeling {
    kind: LabelingKind,
    level_of_label: [u8; 4],
    label_of_level: [u8; 4],
}

impl Labeling {
    pub fn new(kind: LabelingKind) -> Self {
        // Levels in increasing amplitude carry these labels.
        let label_of_level = match kind {
            LabelingKind::Natural => [0b00, 0b01, 0b10, 0b11],
            LabelingKind::Gray => [0b00, 0b01, 0b11, 0b10],
        };
        let mut level_of_label = [0u8; 4];
        for (level, &label) in label_of_level.iter().enumerate() {
            level_of_label[label as usize] = level as u8;
        }
        Self { kind, level_of_label, label_of_level }
    }

    pub fn kind(&self) -> LabelingKind {
        self.kind
    }

    pub fn level(&self, label: u8) -> u8 {
        self.level_of_label[label as usize]
    }

    pub fn label(&self, level: u8) -> u8 {
        self.label_of_level[level as usize]
    }

    /// `(Z1, Z2)` of a level.
    pub fn bits(&self, level: u8) -> (u8, u8) {
        let l = self.label(level);
        (l >> 1, l & 1)
    }

    /// Average Euclidean weight enumerator: for each error label `e`, the
    /// `(squared distance, weight)` terms of `(1/4) Σ_z X^{‖f(z) − f(z⊕e)‖²}`,
    /// sorted by distance.
    pub fn aewe(&self) -> [Vec<(f64, f64)>; 4] {
        std::array::from_fn(|e| {
            let mut terms: Vec<(u32, f64)> = Vec::new();
            for z in 0..4u8 {
                let a = self.level(z) as i32;
                let b = self.level(z ^ e as u8) as i32;
                // ((2a − 3) − (2b − 3))² / 5, kept as an integer numerator.
                let num = (4 * (a - b) * (a - b)) as u32;
                match terms.iter_mut().find(|(d, _)| *d == num) {
                    Some(t) => t.1 += 0.25,
                    None => terms.push((num, 0.25)),
                }
            }
            terms.sort_by_key(|&(d, _)| d);
            terms.into_iter().map(|(d, w)| (d as f64 / 5.0, w)).collect()
        })
    }
}

pub const PAM4_SCALE: f64 = 0.447_213_595_499_957_9; // 1/√5

/// 4-PAM amplitude of a level.
#[inline]
pub fn pam4_amplitude(level: u8) -> f64 {
    (2.0 * level as f64 - 3.0) * PAM4_SCALE
}

/// Binary antipodal amplitude `(−1)^z`.
#[inline]
pub fn bpsk_amplitude(z: u8) -> f64 {
    if z == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Maps precoded symbols to amplitudes: `base = 2` gives `(−1)^z`, `base = 4`
/// gives 4-PAM levels.
pub fn map_signal(z: &[u8], base: u8) -> Result<Vec<f64>> {
    if let Some(&s) = z.iter().find(|&&s| s >= base) {
        return Err(Error::Input(format!("symbol {s} outside alphabet of size {base}")));
    }
    Ok(match base {
        2 => z.iter().map(|&s| bpsk_amplitude(s)).collect(),
        4 => z.iter().map(|&s| pam4_amplitude(s)).collect(),
        _ => return Err(Error::Input(format!("unsupported alphabet size {base}"))),
    })
}

/// Packs bit pairs into label values and converts them to levels.
pub fn bits_to_symbols(bits: &[u8], labeling: &Labeling) -> Result<Vec<u8>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::Dimension(format!("odd bit count {}", bits.len())));
    }
    Ok(bits.chunks_exact(2).map(|p| labeling.level((p[0] & 1) << 1 | (p[1] & 1))).collect())
}

pub fn symbols_to_bits(levels: &[u8], labeling: &Labeling) -> Result<Vec<u8>> {
    if let Some(&s) = levels.iter().find(|&&s| s > 3) {
        return Err(Error::Input(format!("level {s} outside 0..3")));
    }
    Ok(levels
        .iter()
        .flat_map(|&s| {
            let (a, b) = labeling.bits(s);
            [a, b]
        })
        .collect())
}

/// Packs bit pairs into label values `2·Z1 + Z2` (no labeling applied).
pub fn bits_to_labels(bits: &[u8]) -> Vec<u8> {
    bits.chunks_exact(2).map(|p| (p[0] & 1) << 1 | (p[1] & 1)).collect()
}

pub fn labels_to_bits(labels: &[u8]) -> Vec<u8> {
    labels.iter().flat_map(|&l| [l >> 1 & 1, l & 1]).collect()
}

/// Running sum modulo `base` from a zero initial state.
pub fn precode(seq: &[u8], base: u8) -> Vec<u8> {
    let mut state = 0u8;
    seq.iter()
        .map(|&s| {
            state = (state + s) % base;
            state
        })
        .collect()
}

/// First difference modulo `base`; inverse of [`precode`].
pub fn unprecode(seq: &[u8], base: u8) -> Vec<u8> {
    let mut prev = 0u8;
    seq.iter()
        .map(|&s| {
            let d = (s + base - prev) % base;
            prev = s;
            d
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// No interleaving.
    #[default]
    None,
    #[serde(alias = "type_I")]
    TypeI,
    #[serde(alias = "type_II")]
    TypeII,
}

/// Regular two-class interleaver. `output[perm[l]] = input[l]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    kind: Scheme,
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Interleaver {
    pub fn new(kind: Scheme, n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::Input(format!("interleaver length {n} must be even and ≥ 2")));
        }
        let perm: Vec<usize> = match kind {
            Scheme::None => (0..n).collect(),
            Scheme::TypeI => (0..n).map(|l| if l + 1 == n { l } else { (2 * l) % (n - 1) }).collect(),
            Scheme::TypeII => (0..n).map(|l| if l + 1 == n { l - 1 } else { (2 * l + 1) % (n + 1) }).collect(),
        };
        let mut inverse = vec![usize::MAX; n];
        for (l, &p) in perm.iter().enumerate() {
            if p >= n || inverse[p] != usize::MAX {
                return Err(Error::Construction(format!("{kind:?} interleaver is not a bijection for n = {n}")));
            }
            inverse[p] = l;
        }
        Ok(Self { kind, perm, inverse })
    }

    pub fn kind(&self) -> Scheme {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn interleave<T: Copy + Default>(&self, v: &[T]) -> Result<Vec<T>> {
        self.check_len(v.len())?;
        let mut out = vec![T::default(); v.len()];
        for (l, &p) in self.perm.iter().enumerate() {
            out[p] = v[l];
        }
        Ok(out)
    }

    pub fn deinterleave<T: Copy + Default>(&self, v: &[T]) -> Result<Vec<T>> {
        self.check_len(v.len())?;
        Ok(self.perm.iter().map(|&p| v[p]).collect())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(Error::Dimension(format!("sequence length {len} != interleaver length {}", self.perm.len())));
        }
        Ok(())
    }
}
