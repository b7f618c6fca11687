//! Bit-exact operations on 32-bit IEEE 754 words.
//!
//! Bit indices count from the most significant bit: index 0 is the sign,
//! indices 1-8 the exponent (MSB first), indices 9-31 the mantissa. This is
//! the convention used throughout the flip campaigns and the ECC layouts.

use std::fmt;

use thiserror::Error;

/// Number of bits in a word.
pub const WORD_BITS: u8 = 32;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("bit index {0} out of range 0..=31")]
pub struct InvalidBitIndex(pub u8);

/// A 32-bit IEEE 754 single-precision pattern.
///
/// Wraps the raw pattern rather than an `f32` so that NaN payloads, both
/// zeroes, and infinities are all distinct, comparable values.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Float32Word(u32);

impl Float32Word {
    pub const fn from_bits(bits: u32) -> Self {
        Float32Word(bits)
    }

    pub fn from_f32(value: f32) -> Self {
        Float32Word(value.to_bits())
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn to_f32(self) -> f32 {
        f32::from_bits(self.0)
    }

    /// Value of the bit at `index` (index 0 = MSB).
    pub fn bit(self, index: BitIndex) -> bool {
        self.0 & index.mask() != 0
    }

    pub fn with_bit(self, index: BitIndex, value: bool) -> Self {
        if value {
            Float32Word(self.0 | index.mask())
        } else {
            Float32Word(self.0 & !index.mask())
        }
    }

    /// Word with bit `index` inverted. Involution: flipping twice restores.
    pub fn flip(self, index: BitIndex) -> Self {
        Float32Word(self.0 ^ index.mask())
    }

    pub const fn sign_bit(self) -> bool {
        self.0 >> 31 != 0
    }

    /// Raw biased exponent field (8 bits).
    pub const fn exponent_field(self) -> u8 {
        ((self.0 >> 23) & 0xff) as u8
    }

    /// Raw mantissa field (23 bits, no implicit leading one).
    pub const fn mantissa_field(self) -> u32 {
        self.0 & 0x007f_ffff
    }

    pub fn is_nan(self) -> bool {
        self.to_f32().is_nan()
    }
}

impl fmt::Debug for Float32Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Float32Word({self})")
    }
}

impl fmt::Display for Float32Word {
    /// Full 32-character binary pattern, MSB first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032b}", self.0)
    }
}

/// A bit position counted from the most significant end: 0 = sign,
/// 1-8 = exponent,
/// 9-31 = mantissa, MSB to LSB within each field.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitIndex(u8);

impl BitIndex {
    pub const SIGN: BitIndex = BitIndex(0);

    pub fn new(index: u8) -> Result<Self, InvalidBitIndex> {
        if index < WORD_BITS {
            Ok(BitIndex(index))
        } else {
            Err(InvalidBitIndex(index))
        }
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    /// Mask of the addressed bit within the u32 pattern.
    pub const fn mask(self) -> u32 {
        1u32 << (31 - self.0)
    }

    pub fn class(self) -> BitClass {
        classify_bit(self)
    }

    /// All 32 indices, sign first.
    pub fn all() -> impl Iterator<Item = BitIndex> {
        (0..WORD_BITS).map(BitIndex)
    }
}

impl fmt::Debug for BitIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitIndex({})", self.0)
    }
}

impl fmt::Display for BitIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Field classification of a bit position.
///
/// The mantissa splits at index 17/18: the high part carries enough weight
/// to disturb gate behaviour, the low part does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitClass {
    Sign,
    Exponent,
    MantissaHigh,
    MantissaLow,
}

impl fmt::Display for BitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            BitClass::Sign => "sign",
            BitClass::Exponent => "exponent",
            BitClass::MantissaHigh => "mantissa-high",
            BitClass::MantissaLow => "mantissa-low",
        };
        f.write_str(name)
    }
}

/// Encode a real value as the nearest-even single-precision pattern.
///
/// Callers must reject non-finite inputs at the boundary; `value` is
/// expected to be finite (or signed zero).
pub fn encode_f32(value: f64) -> Float32Word {
    debug_assert!(value.is_finite(), "encode_f32 requires a finite input");
    Float32Word::from_f32(value as f32)
}

/// Decode a pattern to its IEEE 754 value. Total: zeroes, subnormals,
/// infinities and NaN all come back as-is for downstream validity checks.
pub fn decode_f32(word: Float32Word) -> f32 {
    word.to_f32()
}

/// Flip exactly one bit of the word.
pub fn flip_bit(word: Float32Word, index: BitIndex) -> Float32Word {
    word.flip(index)
}

/// Classify a bit position into sign / exponent / mantissa-high / mantissa-low.
pub fn classify_bit(index: BitIndex) -> BitClass {
    match index.get() {
        0 => BitClass::Sign,
        1..=8 => BitClass::Exponent,
        9..=17 => BitClass::MantissaHigh,
        _ => BitClass::MantissaLow,
    }
}
