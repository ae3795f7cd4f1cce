use serde::{Deserialize, Serialize};
use std::fmt;

/// Identifies one variable: a kind tag, the joint/link it belongs to and the
/// trajectory step.
///
/// Planning graphs use `q`, `v`, `a` (joint angle, velocity, acceleration),
/// `V`, `A` (link twist, link acceleration), `F` (wrench) and `T` (torque).
/// Keys order time-major, then by entity, then by symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VariableKey {
    pub time: u32,
    pub entity: u32,
    pub symbol: char,
}

impl VariableKey {
    pub const fn new(symbol: char, entity: u32, time: u32) -> Self {
        VariableKey { time, entity, symbol }
    }

    pub const fn q(joint: usize, step: usize) -> Self {
        Self::new('q', joint as u32, step as u32)
    }
    pub const fn v(joint: usize, step: usize) -> Self {
        Self::new('v', joint as u32, step as u32)
    }
    pub const fn a(joint: usize, step: usize) -> Self {
        Self::new('a', joint as u32, step as u32)
    }
    pub const fn twist(link: usize, step: usize) -> Self {
        Self::new('V', link as u32, step as u32)
    }
    pub const fn accel(link: usize, step: usize) -> Self {
        Self::new('A', link as u32, step as u32)
    }
    pub const fn wrench(link: usize, step: usize) -> Self {
        Self::new('F', link as u32, step as u32)
    }
    pub const fn torque(joint: usize, step: usize) -> Self {
        Self::new('T', joint as u32, step as u32)
    }

    pub fn step(&self) -> usize {
        self.time as usize
    }

    pub fn index(&self) -> usize {
        self.entity as usize
    }
}

impl fmt::Display for VariableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}@{}", self.symbol, self.entity, self.time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_time_major() {
        let mut keys = vec![
            VariableKey::q(1, 0),
            VariableKey::q(0, 1),
            VariableKey::twist(0, 0),
            VariableKey::q(0, 0),
        ];
        keys.sort();
        assert_eq!(
            keys,
            vec![
                VariableKey::twist(0, 0),
                VariableKey::q(0, 0),
                VariableKey::q(1, 0),
                VariableKey::q(0, 1)
            ]
        );
    }

    #[test]
    fn display() {
        assert_eq!(VariableKey::wrench(2, 7).to_string(), "F2@7");
    }
}
