//! 4x quadrature decoding.
//!
//! Channel states walk the Gray sequence `00 -> 01 -> 11 -> 10 -> 00` (written
//! `(a, b)`) when the shaft turns forward. Every edge is one count.

/// Levels of encoder channels A and B.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct PhasePair {
    pub a: bool,
    pub b: bool,
}

const GRAY: [PhasePair; 4] = [
    PhasePair { a: false, b: false },
    PhasePair { a: false, b: true },
    PhasePair { a: true, b: true },
    PhasePair { a: true, b: false },
];

impl PhasePair {
    pub const fn new(a: bool, b: bool) -> Self {
        PhasePair { a, b }
    }

    pub fn from_bits(a: u8, b: u8) -> Self {
        PhasePair { a: a != 0, b: b != 0 }
    }

    /// Channel levels at absolute count position `n`.
    pub fn at_position(n: i64) -> Self {
        GRAY[n.rem_euclid(4) as usize]
    }

    fn gray_index(self) -> u8 {
        match (self.a, self.b) {
            (false, false) => 0,
            (false, true) => 1,
            (true, true) => 2,
            (true, false) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepResult {
    pub delta: i8,
    /// Both channels changed at once; direction is unknowable.
    pub invalid: bool,
}

pub fn quad_step(prev: PhasePair, curr: PhasePair) -> StepResult {
    match (curr.gray_index() + 4 - prev.gray_index()) % 4 {
        0 => StepResult { delta: 0, invalid: false },
        1 => StepResult { delta: 1, invalid: false },
        3 => StepResult { delta: -1, invalid: false },
        _ => StepResult { delta: 0, invalid: true },
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuadratureDecoder {
    prev: PhasePair,
    count: i64,
    invalid_transitions: u64,
}

impl QuadratureDecoder {
    pub fn new(initial: PhasePair) -> Self {
        QuadratureDecoder { prev: initial, count: 0, invalid_transitions: 0 }
    }

    pub fn update(&mut self, curr: PhasePair) -> StepResult {
        let r = quad_step(self.prev, curr);
        self.count += r.delta as i64;
        if r.invalid {
            self.invalid_transitions += 1;
        }
        self.prev = curr;
        r
    }

    pub fn update_all(&mut self, edges: &[PhasePair]) {
        for &e in edges {
            self.update(e);
        }
    }

    pub fn count(&self) -> i64 {
        self.count
    }

    pub fn invalid_transitions(&self) -> u64 {
        self.invalid_transitions
    }

    pub fn phase(&self) -> PhasePair {
        self.prev
    }
}
