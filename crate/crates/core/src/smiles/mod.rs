//! SMILES parsing into molecular graphs.
//!
//! Supported: organic subset atoms, aromatic lowercase atoms, bracket atoms
//! with isotope / H-count / charge, ring closures (`1`..`9`, `%nn`), branches
//! and dot-separated fragments. Stereo markers are parsed and dropped.
//! Aromaticity comes only from lowercase notation; there is no perception.

mod elements;
mod error;
mod molecule;
mod parser;
mod tokenizer;
mod writer;

pub use elements::{atomic_number, default_valence, symbol};
pub use error::SmilesError;
pub use molecule::{Atom, Bond, BondOrder, Molecule};
pub use parser::{assign_implicit_hydrogens, parse};
pub use tokenizer::{tokenize, AtomToken, BondSymbol, BracketProps, Token, TokenKind};
pub use writer::{write_random, write_ranked};
