use alloc::vec::Vec;
use core::fmt;
use core::num::NonZeroU32;

/// Opaque processor label. The processor set may be infinite; only ids that
/// appear in a schedule or are registered as observers are ever materialized.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ProcessorId(pub u32);

impl fmt::Display for ProcessorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl From<u32> for ProcessorId {
    fn from(id: u32) -> Self {
        ProcessorId(id)
    }
}

/// A 1-based synchronous round index.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Round(NonZeroU32);

impl Round {
    pub const FIRST: Round = Round(NonZeroU32::MIN);

    pub fn new(index: u32) -> Option<Round> {
        NonZeroU32::new(index).map(Round)
    }

    /// Panics on zero; meant for literals and loop indices already known to
    /// be positive.
    pub fn at(index: u32) -> Round {
        Round::new(index).expect("rounds are 1-based")
    }

    pub fn get(self) -> u32 {
        self.0.get()
    }

    pub fn next(self) -> Round {
        Round::at(self.get() + 1)
    }

    /// The round `offset` rounds after this one (`offset = 0` is `self`).
    pub fn plus(self, offset: u32) -> Round {
        Round::at(self.get() + offset)
    }
}

impl fmt::Display for Round {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.get())
    }
}

/// Protocol input/output value. Ordered lexicographically on bytes, which is
/// the order the deterministic conciliator uses for its "smallest value" rule.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Value(Vec<u8>);

impl Value {
    pub fn new(bytes: Vec<u8>) -> Value {
        Value(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value(s.as_bytes().to_vec())
    }
}

impl From<&[u8]> for Value {
    fn from(bytes: &[u8]) -> Self {
        Value(bytes.to_vec())
    }
}

impl From<Vec<u8>> for Value {
    fn from(bytes: Vec<u8>) -> Self {
        Value(bytes)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match core::str::from_utf8(&self.0) {
            Ok(s) if s.chars().all(|c| !c.is_control()) => write!(f, "{s:?}"),
            _ => {
                f.write_str("0x")?;
                for b in &self.0 {
                    write!(f, "{b:02x}")?;
                }
                Ok(())
            }
        }
    }
}
