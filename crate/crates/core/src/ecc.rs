//! In-word error-correcting codecs.
//!
//! Both schemes work inside a single 32-bit word by repurposing the
//! low-impact mantissa bits as redundancy:
//!
//! * [`rep3_encode`]/[`rep3_decode`] — triplicate the seven highest-impact
//!   bits (indices 2, 3, 4, 5, 7, 8, 9) into the fourteen slots 18-31 and
//!   recover them by majority vote.
//! * [`hamming_encode`]/[`hamming_decode`] — a Hamming single-error
//!   correcting code over the first 24 bits with 5 parity bits in slots
//!   24-28 (code length 29), optionally extended by an overall parity bit
//!   in slot 29 for genuine double-error detection.
//!
//! Decoders are total: feeding them arbitrary words is mechanically fine,
//! the reports are only meaningful for words produced by the encoders.

use crate::float32_bits::{BitIndex, Float32Word};

/// Layout of the 3-bit repetition scheme: which bits are protected and
/// where their two extra copies live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rep3Layout;

impl Rep3Layout {
    /// Protected bit positions, most significant first. Exponent bits 1 and
    /// 6 are excluded: flips there exceed the amplitude norm and halt the
    /// pulse, so protecting them buys nothing.
    pub const PROTECTED: [u8; 7] = [2, 3, 4, 5, 7, 8, 9];

    /// Indices whose original content is sacrificed to hold copies.
    pub const SACRIFICED: std::ops::RangeInclusive<u8> = 18..=31;

    /// Per-codeword parameters: each protected bit becomes a length-3,
    /// distance-3 repetition codeword.
    pub const N: u8 = 3;
    pub const K: u8 = 1;
    pub const DISTANCE: u8 = 3;

    /// Copy slots for the `i`-th protected bit (i in 0..7).
    pub const fn copy_slots(i: usize) -> (u8, u8) {
        (18 + i as u8, 25 + i as u8)
    }
}

/// Layout of the Hamming code: 24 data bits, 5 parity bits, 3 zeroed bits.
///
/// Word indices map onto abstract codeword positions 1..=29: the parity
/// slots 24-28 occupy the power-of-two positions 1, 2, 4, 8, 16 and the
/// data bits 0-23 fill the remaining positions in index order. The map is
/// a fixed bijection in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HammingLayout {
    /// When set, word index 29 carries the overall parity of the 29
    /// codeword bits, upgrading single-error correction to SECDED.
    overall_parity: bool,
}

impl HammingLayout {
    pub const DATA_BITS: u8 = 24;
    pub const PARITY_BITS: u8 = 5;
    pub const CODE_LEN: u8 = 29;
    const PARITY_POSITIONS: [u32; 5] = [1, 2, 4, 8, 16];

    /// The 5-parity single-error-correcting layout (the default).
    pub const fn new() -> Self {
        HammingLayout {
            overall_parity: false,
        }
    }

    /// Layout with a sixth overall-parity bit at index 29 for true
    /// double-error detection. Off by default.
    pub const fn with_overall_parity() -> Self {
        HammingLayout {
            overall_parity: true,
        }
    }

    /// Codeword position (1..=29) for a word index (0..=28).
    pub fn position_for_index(index: u8) -> u32 {
        debug_assert!(index < Self::CODE_LEN);
        if index < Self::DATA_BITS {
            // Data indices fill the non-power-of-two positions in order.
            let mut seen = 0u8;
            for pos in 1..=Self::CODE_LEN as u32 {
                if !pos.is_power_of_two() {
                    if seen == index {
                        return pos;
                    }
                    seen += 1;
                }
            }
            unreachable!("24 data positions exist below 30");
        } else {
            Self::PARITY_POSITIONS[(index - Self::DATA_BITS) as usize]
        }
    }

    /// Word index (0..=28) for a codeword position (1..=29).
    pub fn index_for_position(pos: u32) -> u8 {
        debug_assert!((1..=Self::CODE_LEN as u32).contains(&pos));
        if pos.is_power_of_two() {
            let k = Self::PARITY_POSITIONS
                .iter()
                .position(|&p| p == pos)
                .expect("power of two below 32");
            Self::DATA_BITS + k as u8
        } else {
            (1..pos).filter(|p| !p.is_power_of_two()).count() as u8
        }
    }

    /// Columns of the parity-check matrix: the binary representation of
    /// each codeword position 1..=29. Distinct and nonzero, so the code
    /// has minimum distance 3.
    pub fn parity_check_columns() -> [u32; 29] {
        let mut cols = [0u32; 29];
        for (i, col) in cols.iter_mut().enumerate() {
            *col = i as u32 + 1;
        }
        cols
    }

    /// Syndrome of a stored word: XOR of the positions of all set codeword
    /// bits. Zero for a clean codeword.
    fn syndrome(self, stored: Float32Word) -> u32 {
        let mut s = 0u32;
        for index in 0..Self::CODE_LEN {
            if stored.bit(bit(index)) {
                s ^= Self::position_for_index(index);
            }
        }
        s
    }

    fn overall_parity_of(stored: Float32Word) -> bool {
        (0..Self::CODE_LEN).filter(|&i| stored.bit(bit(i))).count() % 2 == 1
    }

    pub fn encode(self, word: Float32Word) -> Float32Word {
        let mut out = word;
        // Parity bit for position 2^k covers every position with bit k set;
        // solving the zero-syndrome condition gives each parity directly
        // from the data bits.
        for (k, &parity_pos) in Self::PARITY_POSITIONS.iter().enumerate() {
            let mut parity = false;
            for data_index in 0..Self::DATA_BITS {
                let pos = Self::position_for_index(data_index);
                if pos & parity_pos != 0 {
                    parity ^= word.bit(bit(data_index));
                }
            }
            out = out.with_bit(bit(Self::DATA_BITS + k as u8), parity);
        }
        for index in 29..32 {
            out = out.with_bit(bit(index), false);
        }
        if self.overall_parity {
            out = out.with_bit(bit(29), Self::overall_parity_of(out));
        }
        out
    }

    pub fn decode(self, stored: Float32Word) -> DecodeReport {
        let syndrome = self.syndrome(stored);
        if self.overall_parity {
            let expected = stored.bit(bit(29));
            let actual = Self::overall_parity_of(stored);
            if syndrome != 0 && expected == actual {
                // A position-syndrome without an overall-parity violation
                // means two bits flipped: detect, do not touch.
                return DecodeReport {
                    corrected_word: stored,
                    corrections: Vec::new(),
                    detected_uncorrectable: true,
                };
            }
        }
        if syndrome == 0 {
            return DecodeReport {
                corrected_word: zero_tail(stored, 29),
                corrections: Vec::new(),
                detected_uncorrectable: false,
            };
        }
        if syndrome > Self::CODE_LEN as u32 {
            return DecodeReport {
                corrected_word: stored,
                corrections: Vec::new(),
                detected_uncorrectable: true,
            };
        }
        let index = bit(Self::index_for_position(syndrome));
        let original = stored.bit(index);
        DecodeReport {
            corrected_word: zero_tail(stored.flip(index), 29),
            corrections: vec![Correction {
                index: index.get(),
                original_bit: original,
                corrected_bit: !original,
            }],
            detected_uncorrectable: false,
        }
    }
}

impl Default for HammingLayout {
    fn default() -> Self {
        Self::new()
    }
}

/// One decoder override: the stored bit at `index` lost against the
/// redundancy and was replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Correction {
    pub index: u8,
    pub original_bit: bool,
    pub corrected_bit: bool,
}

/// Outcome of a decode: the corrected word plus what the decoder changed.
///
/// `corrections` records only error corrections, not the structural zeroing
/// of sacrificed slots that every decode performs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeReport {
    pub corrected_word: Float32Word,
    pub corrections: Vec<Correction>,
    pub detected_uncorrectable: bool,
}

fn bit(index: u8) -> BitIndex {
    BitIndex::new(index).expect("index below 32")
}

fn zero_tail(word: Float32Word, from: u8) -> Float32Word {
    let mut out = word;
    for index in from..32 {
        out = out.with_bit(bit(index), false);
    }
    out
}

/// Majority vote over a replicated bit triplet.
pub fn majority3(a: bool, b: bool, c: bool) -> bool {
    (a & b) | (a & c) | (b & c)
}

/// Store the seven protected bits in triplicate: the word keeps its upper
/// 18 bits and the copy slots 18-31 are overwritten with the two extra
/// copies of each protected bit.
pub fn rep3_encode(word: Float32Word) -> Float32Word {
    let mut out = word;
    for (i, &p) in Rep3Layout::PROTECTED.iter().enumerate() {
        let value = word.bit(bit(p));
        let (c1, c2) = Rep3Layout::copy_slots(i);
        out = out.with_bit(bit(c1), value);
        out = out.with_bit(bit(c2), value);
    }
    out
}

/// Majority-vote decode of a rep3-encoded word.
///
/// Each protected bit is replaced by the majority over its triplet, the
/// sacrificed slots 18-31 come back zeroed (their original content is
/// gone by design), and everything else passes through unchanged.
pub fn rep3_decode(stored: Float32Word) -> DecodeReport {
    let mut out = stored;
    let mut corrections = Vec::new();
    for (i, &p) in Rep3Layout::PROTECTED.iter().enumerate() {
        let (c1, c2) = Rep3Layout::copy_slots(i);
        let triplet = [
            (p, stored.bit(bit(p))),
            (c1, stored.bit(bit(c1))),
            (c2, stored.bit(bit(c2))),
        ];
        let voted = majority3(triplet[0].1, triplet[1].1, triplet[2].1);
        for (index, value) in triplet {
            if value != voted {
                corrections.push(Correction {
                    index,
                    original_bit: value,
                    corrected_bit: voted,
                });
            }
        }
        out = out.with_bit(bit(p), voted);
    }
    DecodeReport {
        corrected_word: zero_tail(out, 18),
        corrections,
        detected_uncorrectable: false,
    }
}

/// Hamming-encode with the default 5-parity layout.
pub fn hamming_encode(word: Float32Word) -> Float32Word {
    HammingLayout::new().encode(word)
}

/// Hamming-decode with the default 5-parity layout.
pub fn hamming_decode(stored: Float32Word) -> DecodeReport {
    HammingLayout::new().decode(stored)
}
