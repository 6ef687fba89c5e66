//! Conversion of DSL values to and from the shared byte streams.
//!
//! The lhs-old-data and constant streams are shared by every type on the
//! tape, so each type converts its values to bytes on recording and back
//! on reverse evaluation. Encodings must be self-delimiting: `decode`
//! reports how many bytes it consumed.

use std::mem::size_of;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("need {needed} bytes to decode `{type_name}`, have {available}")]
    Truncated {
        type_name: &'static str,
        needed: usize,
        available: usize,
    },
}

/// A value type that can live on the tape.
///
/// Implementors provide what the tape cannot know about a foreign type:
/// how to build a zero adjoint with the right shape, how to accumulate
/// adjoints, and how to serialize the value into the shared streams.
pub trait DslType: Clone + Send + 'static {
    const NAME: &'static str;
    /// Encoded size in bytes when it does not depend on the value.
    const FIXED_SIZE: Option<usize>;

    fn zero_like(&self) -> Self;
    fn accumulate(&mut self, other: &Self);
    fn encode(&self, out: &mut Vec<u8>);
    fn decode(bytes: &[u8]) -> Result<(Self, usize), CodecError>;

    /// Heap memory owned by the value, for memory reports.
    fn heap_bytes(&self) -> usize {
        0
    }
}

/// Fails with [`CodecError::Truncated`] when `bytes` is shorter than `needed`.
pub fn need(
    type_name: &'static str,
    bytes: &[u8],
    needed: usize,
) -> Result<(), CodecError> {
    if bytes.len() < needed {
        Err(CodecError::Truncated {
            type_name,
            needed,
            available: bytes.len(),
        })
    } else {
        Ok(())
    }
}

macro_rules! float_codec {
    ($t:ty, $name:literal) => {
        impl DslType for $t {
            const NAME: &'static str = $name;
            const FIXED_SIZE: Option<usize> = Some(size_of::<$t>());

            #[inline]
            fn zero_like(&self) -> Self {
                0.0
            }
            #[inline]
            fn accumulate(&mut self, other: &Self) {
                *self += *other;
            }
            #[inline]
            fn encode(&self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            #[inline]
            fn decode(bytes: &[u8]) -> Result<(Self, usize), CodecError> {
                const N: usize = size_of::<$t>();
                need($name, bytes, N)?;
                let mut raw = [0u8; N];
                raw.copy_from_slice(&bytes[..N]);
                Ok((<$t>::from_le_bytes(raw), N))
            }
        }
    };
}

float_codec!(f32, "f32");
float_codec!(f64, "f64");

/// Writes a `u32` length/dimension header.
pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Reads a `u32` header written by [`put_u32`].
pub fn get_u32(type_name: &'static str, bytes: &[u8]) -> Result<u32, CodecError> {
    need(type_name, bytes, 4)?;
    Ok(u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]))
}

#[cfg(feature = "nalgebra")]
mod nalgebra_impls {
    use super::*;
    use crate::Real;
    use nalgebra::{DMatrix, DVector};

    impl<T: Real + nalgebra::Scalar> DslType for DMatrix<T> {
        const NAME: &'static str = "DMatrix";
        const FIXED_SIZE: Option<usize> = None;

        fn zero_like(&self) -> Self {
            DMatrix::from_element(self.nrows(), self.ncols(), T::zero())
        }

        fn accumulate(&mut self, other: &Self) {
            assert_eq!(self.shape(), other.shape(), "adjoint shape mismatch");
            for (a, b) in self.iter_mut().zip(other.iter()) {
                *a = *a + *b;
            }
        }

        fn encode(&self, out: &mut Vec<u8>) {
            put_u32(out, self.nrows() as u32);
            put_u32(out, self.ncols() as u32);
            for v in self.iter() {
                v.encode(out);
            }
        }

        fn decode(bytes: &[u8]) -> Result<(Self, usize), CodecError> {
            let rows = get_u32(Self::NAME, bytes)? as usize;
            let cols = get_u32(Self::NAME, &bytes[4..])? as usize;
            let elem = size_of::<T>();
            need(Self::NAME, bytes, 8 + rows * cols * elem)?;
            let mut pos = 8;
            let data = (0..rows * cols)
                .map(|_| {
                    let (v, used) = T::decode(&bytes[pos..])?;
                    pos += used;
                    Ok(v)
                })
                .collect::<Result<Vec<T>, CodecError>>()?;
            Ok((DMatrix::from_vec(rows, cols, data), pos))
        }

        fn heap_bytes(&self) -> usize {
            self.len() * size_of::<T>()
        }
    }

    impl<T: Real + nalgebra::Scalar> DslType for DVector<T> {
        const NAME: &'static str = "DVector";
        const FIXED_SIZE: Option<usize> = None;

        fn zero_like(&self) -> Self {
            DVector::from_element(self.len(), T::zero())
        }

        fn accumulate(&mut self, other: &Self) {
            assert_eq!(self.len(), other.len(), "adjoint shape mismatch");
            for (a, b) in self.iter_mut().zip(other.iter()) {
                *a = *a + *b;
            }
        }

        fn encode(&self, out: &mut Vec<u8>) {
            put_u32(out, self.len() as u32);
            for v in self.iter() {
                v.encode(out);
            }
        }

        fn decode(bytes: &[u8]) -> Result<(Self, usize), CodecError> {
            let len = get_u32(Self::NAME, bytes)? as usize;
            need(Self::NAME, bytes, 4 + len * size_of::<T>())?;
            let mut pos = 4;
            let data = (0..len)
                .map(|_| {
                    let (v, used) = T::decode(&bytes[pos..])?;
                    pos += used;
                    Ok(v)
                })
                .collect::<Result<Vec<T>, CodecError>>()?;
            Ok((DVector::from_vec(data), pos))
        }

        fn heap_bytes(&self) -> usize {
            self.len() * size_of::<T>()
        }
    }
}
