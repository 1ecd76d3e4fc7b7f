use std::collections::{BTreeMap, HashSet};

use super::elements;
use super::error::SmilesError;
use super::molecule::{Atom, Bond, BondOrder, Molecule};
use super::tokenizer::{tokenize, AtomToken, BondSymbol, TokenKind};

struct RingOpening {
    atom: usize,
    symbol: Option<BondSymbol>,
}

/// Parses a SMILES string into a molecule with ring flags and implicit
/// hydrogens assigned. Stereo markers are accepted and dropped.
pub fn parse(smiles: &str) -> Result<Molecule, SmilesError> {
    let trimmed = smiles.trim();
    if trimmed.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    let offset = smiles.len() - smiles.trim_start().len();
    let tokens = tokenize(trimmed).map_err(|e| shift(e, offset))?;

    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondSymbol, usize)> = None;
    let mut branches: Vec<(usize, usize)> = Vec::new();
    let mut rings: BTreeMap<u16, RingOpening> = BTreeMap::new();

    let mut add_bond = |atoms: &[Atom], a: usize, b: usize, symbol: Option<BondSymbol>| -> Result<(), SmilesError> {
        let key = (a.min(b), a.max(b));
        if !seen.insert(key) {
            return Err(SmilesError::DuplicateBond(key.0, key.1));
        }
        let order = match symbol {
            Some(BondSymbol::Single) => BondOrder::Single,
            Some(BondSymbol::Double) => BondOrder::Double,
            Some(BondSymbol::Triple) => BondOrder::Triple,
            Some(BondSymbol::Aromatic) => BondOrder::Aromatic,
            Some(BondSymbol::Directional) | None => {
                if atoms[a].aromatic && atoms[b].aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                }
            }
        };
        bonds.push(Bond { a, b, order });
        Ok(())
    };

    for tok in &tokens {
        let pos = tok.pos + offset;
        match tok.kind {
            TokenKind::Atom(spec) => {
                let idx = atoms.len();
                atoms.push(new_atom(spec));
                match prev {
                    Some(p) => add_bond(&atoms, p, idx, pending.take().map(|(s, _)| s))?,
                    None => {
                        if let Some((_, bpos)) = pending {
                            return Err(SmilesError::DanglingBond(bpos));
                        }
                    }
                }
                prev = Some(idx);
            }
            TokenKind::Bond(sym) => {
                if prev.is_none() || pending.is_some() {
                    return Err(SmilesError::DanglingBond(pos));
                }
                pending = Some((sym, pos));
            }
            TokenKind::BranchOpen => {
                let p = prev.ok_or(SmilesError::UnbalancedParenthesis(pos))?;
                if let Some((_, bpos)) = pending {
                    return Err(SmilesError::DanglingBond(bpos));
                }
                branches.push((p, pos));
            }
            TokenKind::BranchClose => {
                if let Some((_, bpos)) = pending {
                    return Err(SmilesError::DanglingBond(bpos));
                }
                let (p, _) = branches.pop().ok_or(SmilesError::UnbalancedParenthesis(pos))?;
                prev = Some(p);
            }
            TokenKind::Ring(digit) => {
                let p = prev.ok_or(SmilesError::DanglingBond(pos))?;
                let symbol = pending.take().map(|(s, _)| s);
                if let Some(open) = rings.remove(&digit) {
                    if open.atom == p {
                        return Err(SmilesError::SelfBond(digit));
                    }
                    let symbol = match (open.symbol, symbol) {
                        (Some(a), Some(b)) if a != b => return Err(SmilesError::RingBondConflict(digit)),
                        (a, b) => a.or(b),
                    };
                    add_bond(&atoms, open.atom, p, symbol)?;
                } else {
                    rings.insert(digit, RingOpening { atom: p, symbol });
                }
            }
            TokenKind::Dot => {
                if let Some((_, bpos)) = pending {
                    return Err(SmilesError::DanglingBond(bpos));
                }
                prev = None;
            }
        }
    }

    if let Some((_, bpos)) = pending {
        return Err(SmilesError::DanglingBond(bpos));
    }
    if let Some(&(_, pos)) = branches.last() {
        return Err(SmilesError::UnbalancedParenthesis(pos));
    }
    if let Some((&digit, _)) = rings.iter().next() {
        return Err(SmilesError::UnclosedRing(digit));
    }

    if atoms.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    let mol = Molecule::from_parts(atoms, bonds, smiles.to_string());
    Ok(assign_implicit_hydrogens(mol))
}

fn shift(err: SmilesError, offset: usize) -> SmilesError {
    use SmilesError::*;
    match err {
        NonAscii(p) => NonAscii(p + offset),
        UnknownToken(p) => UnknownToken(p + offset),
        UnterminatedBracket(p) => UnterminatedBracket(p + offset),
        InvalidBracket(p) => InvalidBracket(p + offset),
        UnknownElement(p) => UnknownElement(p + offset),
        InvalidCharge(p) => InvalidCharge(p + offset),
        other => other,
    }
}

fn new_atom(spec: AtomToken) -> Atom {
    let (formal_charge, explicit_h, isotope) = match spec.bracket {
        Some(b) => (b.charge, Some(b.hydrogens), b.isotope),
        None => (0, None, None),
    };
    Atom {
        element: spec.element,
        aromatic: spec.aromatic,
        formal_charge,
        explicit_h,
        implicit_h: 0,
        isotope,
        in_ring: false,
    }
}

/// Sets `implicit_h` for organic-subset atoms to default valence minus the
/// bond order sum (aromatic bonds count 1.5), floored and clamped at zero.
/// Bracket atoms keep `implicit_h = 0`.
pub fn assign_implicit_hydrogens(mut mol: Molecule) -> Molecule {
    for i in 0..mol.atoms.len() {
        let atom = &mol.atoms[i];
        let h = if atom.is_bracket() {
            0
        } else {
            let valence_half = 2 * elements::default_valence(atom.element) as u32;
            let used = mol.bond_order_sum_half(i);
            (valence_half.saturating_sub(used) / 2) as u8
        };
        mol.atoms[i].implicit_h = h;
    }
    mol
}
