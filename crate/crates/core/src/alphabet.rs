//! Gray-mapped square QAM alphabets with unit average energy.
//!
//! Bits are `u8` values in `{0, 1}`. The first half of each symbol's bits
//! selects the in-phase level and the second half the quadrature level.
//! 4-QAM maps each axis bit as `0 → +1`, `1 → −1`; 16-QAM uses the Gray
//! level order `00 → −3`, `01 → −1`, `11 → +1`, `10 → +3`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet<T> {
    order: usize,
    bit_width: usize,
    points: Vec<Complex<T>>,
}

/// Unnormalized per-axis level for a Gray-coded axis label.
fn axis_level(order: usize, label: usize) -> f64 {
    match order {
        4 => {
            if label == 0 {
                1.0
            } else {
                -1.0
            }
        }
        16 => match label {
            0b00 => -3.0,
            0b01 => -1.0,
            0b11 => 1.0,
            0b10 => 3.0,
            _ => unreachable!(),
        },
        _ => unreachable!(),
    }
}

impl<T: Real> Alphabet<T> {
    pub fn qam(order: usize) -> Result<Self> {
        let (bit_width, scale) = match order {
            4 => (2, 1.0 / 2f64.sqrt()),
            16 => (4, 1.0 / 10f64.sqrt()),
            _ => return Err(Error::AlphabetOrder(order)),
        };
        let half = bit_width / 2;
        let mask = (1 << half) - 1;
        // point index = bits read MSB first
        let points = (0..order)
            .map(|idx| {
                let i_label = idx >> half;
                let q_label = idx & mask;
                Complex::new(
                    T::of(axis_level(order, i_label) * scale),
                    T::of(axis_level(order, q_label) * scale),
                )
            })
            .collect();
        Ok(Self { order, bit_width, points })
    }

    pub fn qpsk() -> Self {
        Self::qam(4).expect("4-QAM")
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn bit_width(&self) -> usize {
        self.bit_width
    }

    #[inline]
    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    #[inline]
    pub fn point(&self, idx: usize) -> Complex<T> {
        self.points[idx]
    }

    /// Point index for one symbol's worth of bits (MSB first).
    pub fn index_of_bits(&self, bits: &[u8]) -> usize {
        debug_assert_eq!(bits.len(), self.bit_width);
        bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    pub fn bits_of_index(&self, idx: usize, out: &mut Vec<u8>) {
        for shift in (0..self.bit_width).rev() {
            out.push(((idx >> shift) & 1) as u8);
        }
    }

    pub fn modulate_bits(&self, bits: &[u8]) -> Result<Vec<Complex<T>>> {
        if !bits.len().is_multiple_of(self.bit_width) {
            return Err(Error::BitLength { len: bits.len(), width: self.bit_width });
        }
        Ok(bits
            .chunks_exact(self.bit_width)
            .map(|chunk| self.points[self.index_of_bits(chunk)])
            .collect())
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn nearest(&self, s: Complex<T>) -> usize {
        let mut best = 0;
        let mut best_d = (s - self.points[0]).norm_sqr();
        for (i, p) in self.points.iter().enumerate().skip(1) {
            let d = (s - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn demodulate(&self, symbols: &[Complex<T>]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bit_width);
        for &s in symbols {
            self.bits_of_index(self.nearest(s), &mut out);
        }
        out
    }

    pub fn indices_to_bits(&self, indices: &[usize]) -> Vec<u8> {
        let mut out = Vec::with_capacity(indices.len() * self.bit_width);
        for &i in indices {
            self.bits_of_index(i, &mut out);
        }
        out
    }

    pub fn mean_energy(&self) -> T {
        self.points.iter().map(|p| p.norm_sqr()).sum::<T>() / T::of_usize(self.order)
    }
}
