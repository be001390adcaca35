//! Component sequences for the 2D pilot.
//!
//! m-sequences come from a Fibonacci LFSR. The feedback polynomial is written
//! as an integer with the highest-degree coefficient in the most significant
//! bit: `x^3 + x + 1` is `0b1011`. Bit `i` of the register holds `s[t+i]`;
//! each step outputs bit 0 and shifts in
//! `s[t+m] = XOR of s[t+i] over the x^i terms, i < m`.
//! Output bits are BPSK-mapped with `0 → +1` and `1 → -1`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Two primitive polynomials per register degree, `2..=10`.
///
/// The second entry of each pair lets the two pilot axes use different
/// generators when they share a length.
pub const PRIMITIVE_POLYS: [(u32, [u32; 2]); 9] = [
    (2, [0b111, 0b111]),
    (3, [0b1011, 0b1101]),
    (4, [0x13, 0x19]),
    (5, [0x25, 0x29]),
    (6, [0x43, 0x61]),
    (7, [0x83, 0x89]),
    (8, [0x11D, 0x171]),
    (9, [0x211, 0x221]),
    (10, [0x409, 0x481]),
];

/// Look up a tabulated primitive polynomial; `variant` picks one of the pair.
pub fn primitive_poly(degree: u32, variant: usize) -> Option<u32> {
    PRIMITIVE_POLYS
        .iter()
        .find(|(d, _)| *d == degree)
        .map(|(_, polys)| polys[variant % 2])
}

/// A real-valued (normally ±1) sequence used along one pilot axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSequence {
    values: Vec<f64>,
    generator_poly: Option<u32>,
    label: String,
}

impl ComponentSequence {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("sequence must not be empty"));
        }
        Ok(Self {
            values,
            generator_poly: None,
            label: label.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn generator_poly(&self) -> Option<u32> {
        self.generator_poly
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Mean of `value²`.
    pub fn mean_power(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }

    /// Repeat the sequence cyclically and truncate it to `len` entries.
    pub fn cyclic_extend(&self, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(invalid("extension length must be positive"));
        }
        let values = (0..len).map(|i| self.values[i % self.len()]).collect();
        Ok(Self {
            values,
            generator_poly: self.generator_poly,
            label: if len == self.len() {
                self.label.clone()
            } else {
                format!("{}/ext{len}", self.label)
            },
        })
    }

    /// Largest off-peak magnitude of the normalized periodic autocorrelation.
    pub fn peak_sidelobe(&self) -> f64 {
        (1..self.len() as i64)
            .map(|s| periodic_correlation(self, self, s).map(f64::abs).unwrap_or(0.0))
            .fold(0.0, f64::max)
    }
}

fn lfsr_step(state: u32, taps: u32, degree: u32) -> (u32, u32) {
    let out = state & 1;
    let feedback = (state & taps).count_ones() & 1;
    ((state >> 1) | (feedback << (degree - 1)), out)
}

/// Generate the `2^m − 1` chip m-sequence for a primitive polynomial.
///
/// `poly` must have bit `m` set. The full period is checked while generating,
/// so a polynomial that is not primitive is rejected.
pub fn generate_m_sequence(poly: u32, degree: u32, init_state: u32) -> Result<ComponentSequence> {
    if !(2..=31).contains(&degree) {
        return Err(invalid(format!("register degree {degree} outside 2..=31")));
    }
    let mask = (1u32 << degree) - 1;
    if poly >> degree != 1 {
        return Err(invalid(format!("polynomial {poly:#x} does not have degree {degree}")));
    }
    if init_state & mask == 0 {
        return Err(invalid("LFSR initial state must be nonzero"));
    }
    let taps = poly & mask;
    let init = init_state & mask;
    let period = (1u64 << degree) - 1;

    let mut state = init;
    let mut values = Vec::with_capacity(period as usize);
    let mut steps = 0u64;
    loop {
        let (next, bit) = lfsr_step(state, taps, degree);
        values.push(if bit == 0 { 1.0 } else { -1.0 });
        state = next;
        steps += 1;
        if state == init || steps > period {
            break;
        }
    }
    if steps != period {
        return Err(Error::NotPrimitive {
            poly,
            degree,
            period: steps,
        });
    }
    Ok(ComponentSequence {
        values,
        generator_poly: Some(poly),
        label: format!("mseq(m={degree},g={poly:#x})"),
    })
}

/// m-sequence of the given degree from the built-in polynomial table,
/// register initialised to all ones.
pub fn default_m_sequence(degree: u32, variant: usize) -> Result<ComponentSequence> {
    let poly = primitive_poly(degree, variant)
        .ok_or_else(|| invalid(format!("no tabulated polynomial for degree {degree}")))?;
    generate_m_sequence(poly, degree, (1u32 << degree) - 1)
}

/// m-sequence whose natural length `2^m − 1` is closest to `len` from below or
/// equal (e.g. 64 → 63, 512 → 511).
pub fn m_sequence_for_length(len: usize, variant: usize) -> Result<ComponentSequence> {
    let degree = (2..=10u32)
        .rev()
        .find(|d| (1usize << d) - 1 <= len)
        .ok_or_else(|| invalid(format!("no m-sequence fits length {len}")))?;
    default_m_sequence(degree, variant)
}

/// `out[i] = seq[(i − s) mod L]`.
pub fn cyclic_shift(seq: &ComponentSequence, shift: i64) -> ComponentSequence {
    let len = seq.len() as i64;
    let s = shift.rem_euclid(len) as usize;
    let n = seq.len();
    let values = (0..n).map(|i| seq.values[(i + n - s) % n]).collect();
    ComponentSequence {
        values,
        generator_poly: seq.generator_poly,
        label: seq.label.clone(),
    }
}

/// Normalized periodic correlation `(1/L)·Σ x[i]·y[(i − s) mod L]`.
pub fn periodic_correlation(x: &ComponentSequence, y: &ComponentSequence, shift: i64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(invalid(format!(
            "sequence lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    let s = shift.rem_euclid(n as i64) as usize;
    let acc: f64 = (0..n).map(|i| x.values[i] * y.values[(i + n - s) % n]).sum();
    Ok(acc / n as f64)
}
