use std::ops::{Add, Mul};

use dslad::codec::need;
use dslad::{CodecError, DslType};

/// Four `f32` lanes, 16-byte aligned.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[repr(C, align(16))]
pub struct F32x4(pub [f32; 4]);

impl F32x4 {
    pub const ZERO: Self = Self([0.0; 4]);

    pub fn splat(v: f32) -> Self {
        Self([v; 4])
    }

    #[inline]
    pub fn scale(self, s: f32) -> Self {
        Self(self.0.map(|x| x * s))
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> f32 {
        // fixed order so results do not depend on the build
        ((self.0[0] * other.0[0] + self.0[1] * other.0[1]) + self.0[2] * other.0[2])
            + self.0[3] * other.0[3]
    }

    #[inline]
    pub fn sum(&self) -> f32 {
        ((self.0[0] + self.0[1]) + self.0[2]) + self.0[3]
    }
}

impl Add for F32x4 {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2], self.0[3] + o.0[3]])
    }
}

impl Mul<f32> for F32x4 {
    type Output = Self;
    fn mul(self, s: f32) -> Self {
        self.scale(s)
    }
}

impl DslType for F32x4 {
    const NAME: &'static str = "F32x4";
    const FIXED_SIZE: Option<usize> = Some(16);

    fn zero_like(&self) -> Self {
        Self::ZERO
    }

    fn accumulate(&mut self, other: &Self) {
        *self = *self + *other;
    }

    fn encode(&self, out: &mut Vec<u8>) {
        for x in self.0 {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn decode(bytes: &[u8]) -> Result<(Self, usize), CodecError> {
        need(Self::NAME, bytes, 16)?;
        let lane = |i: usize| f32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
        Ok((Self([lane(0), lane(1), lane(2), lane(3)]), 16))
    }
}
