use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES input")]
    EmptyInput,
    #[error("non-ASCII input at byte {0}")]
    NonAscii(usize),
    #[error("unknown token at position {0}")]
    UnknownToken(usize),
    #[error("unterminated bracket atom opened at position {0}")]
    UnterminatedBracket(usize),
    #[error("malformed bracket atom at position {0}")]
    InvalidBracket(usize),
    #[error("unknown element symbol at position {0}")]
    UnknownElement(usize),
    #[error("invalid charge in bracket atom at position {0}")]
    InvalidCharge(usize),
    #[error("ring closure {0} was opened but never closed")]
    UnclosedRing(u16),
    #[error("unbalanced parenthesis at position {0}")]
    UnbalancedParenthesis(usize),
    #[error("bond symbol at position {0} is not between two atoms")]
    DanglingBond(usize),
    #[error("conflicting bond symbols on ring closure {0}")]
    RingBondConflict(u16),
    #[error("ring closure {0} bonds an atom to itself")]
    SelfBond(u16),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
}
