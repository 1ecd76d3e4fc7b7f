use super::elements;
use super::error::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `/` or `\`; stereo is discarded so these behave like an unmarked bond.
    Directional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomToken {
    pub element: u8,
    pub aromatic: bool,
    /// `Some` for bracket atoms.
    pub bracket: Option<BracketProps>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BracketProps {
    pub isotope: Option<u16>,
    pub hydrogens: u8,
    pub charge: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Atom(AtomToken),
    Bond(BondSymbol),
    BranchOpen,
    BranchClose,
    Ring(u16),
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the token start.
    pub pos: usize,
    pub len: usize,
}

const AROMATIC_ORGANIC: [(u8, u8); 6] = [(b'b', 5), (b'c', 6), (b'n', 7), (b'o', 8), (b'p', 15), (b's', 16)];

pub fn tokenize(smiles: &str) -> Result<Vec<Token>, SmilesError> {
    if smiles.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    if let Some(i) = smiles.bytes().position(|b| !b.is_ascii()) {
        return Err(SmilesError::NonAscii(i));
    }
    let bytes = smiles.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let c = bytes[i];
        let kind = match c {
            b'B' if bytes.get(i + 1) == Some(&b'r') => {
                i += 2;
                organic(35)
            }
            b'C' if bytes.get(i + 1) == Some(&b'l') => {
                i += 2;
                organic(17)
            }
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => {
                i += 1;
                organic(elements::atomic_number(std::str::from_utf8(&bytes[start..i]).unwrap()).unwrap())
            }
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                i += 1;
                let z = AROMATIC_ORGANIC.iter().find(|(s, _)| *s == c).unwrap().1;
                TokenKind::Atom(AtomToken { element: z, aromatic: true, bracket: None })
            }
            b'[' => {
                let close = bytes[i..]
                    .iter()
                    .position(|&b| b == b']')
                    .ok_or(SmilesError::UnterminatedBracket(start))?;
                let inner = &smiles[i + 1..i + close];
                i += close + 1;
                TokenKind::Atom(parse_bracket(inner, start)?)
            }
            b'-' => bond(&mut i, BondSymbol::Single),
            b'=' => bond(&mut i, BondSymbol::Double),
            b'#' => bond(&mut i, BondSymbol::Triple),
            b':' => bond(&mut i, BondSymbol::Aromatic),
            b'/' | b'\\' => bond(&mut i, BondSymbol::Directional),
            b'(' => {
                i += 1;
                TokenKind::BranchOpen
            }
            b')' => {
                i += 1;
                TokenKind::BranchClose
            }
            b'.' => {
                i += 1;
                TokenKind::Dot
            }
            b'0'..=b'9' => {
                i += 1;
                TokenKind::Ring((c - b'0') as u16)
            }
            b'%' => {
                let digits = bytes.get(i + 1..i + 3).ok_or(SmilesError::UnknownToken(start))?;
                if !digits.iter().all(u8::is_ascii_digit) {
                    return Err(SmilesError::UnknownToken(start));
                }
                i += 3;
                TokenKind::Ring(((digits[0] - b'0') * 10 + (digits[1] - b'0')) as u16)
            }
            _ => return Err(SmilesError::UnknownToken(start)),
        };
        tokens.push(Token { kind, pos: start, len: i - start });
    }
    Ok(tokens)
}

fn organic(z: u8) -> TokenKind {
    TokenKind::Atom(AtomToken { element: z, aromatic: false, bracket: None })
}

fn bond(i: &mut usize, sym: BondSymbol) -> TokenKind {
    *i += 1;
    TokenKind::Bond(sym)
}

/// Bracket grammar: isotope? symbol chirality? hcount? charge? class?
fn parse_bracket(inner: &str, pos: usize) -> Result<AtomToken, SmilesError> {
    let b = inner.as_bytes();
    let mut i = 0;

    let digits_end = b.iter().position(|c| !c.is_ascii_digit()).unwrap_or(b.len());
    let isotope = if digits_end > 0 {
        Some(inner[..digits_end].parse::<u16>().map_err(|_| SmilesError::InvalidBracket(pos))?)
    } else {
        None
    };
    i = digits_end.max(i);

    let (element, aromatic) = match b.get(i) {
        Some(c) if c.is_ascii_uppercase() => {
            let two = b.get(i + 1).filter(|c| c.is_ascii_lowercase()).and_then(|&c2| {
                let s = [b[i], c2];
                elements::atomic_number(std::str::from_utf8(&s).unwrap())
            });
            if let Some(z) = two {
                i += 2;
                (z, false)
            } else {
                let z = elements::atomic_number(&inner[i..i + 1]).ok_or(SmilesError::UnknownElement(pos))?;
                i += 1;
                (z, false)
            }
        }
        Some(c) if c.is_ascii_lowercase() => {
            // aromatic bracket symbols: b c n o p s se as te
            let rest = &inner[i..];
            let (z, len) = if rest.starts_with("se") {
                (34, 2)
            } else if rest.starts_with("as") {
                (33, 2)
            } else if rest.starts_with("te") {
                (52, 2)
            } else {
                match AROMATIC_ORGANIC.iter().find(|(s, _)| s == c) {
                    Some(&(_, z)) => (z, 1),
                    None => return Err(SmilesError::UnknownElement(pos)),
                }
            };
            i += len;
            (z, true)
        }
        _ => return Err(SmilesError::InvalidBracket(pos)),
    };

    // chirality: @, @@, or @ followed by a class tag like TH1 / AL2 / SP3 / TB10 / OH25
    if b.get(i) == Some(&b'@') {
        i += 1;
        if b.get(i) == Some(&b'@') {
            i += 1;
        } else if b.get(i).is_some_and(|c| c.is_ascii_uppercase()) && b.get(i + 1).is_some_and(|c| c.is_ascii_uppercase()) {
            i += 2;
            while b.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
        }
    }

    let mut hydrogens = 0u8;
    if b.get(i) == Some(&b'H') {
        i += 1;
        hydrogens = 1;
        if let Some(c) = b.get(i).filter(|c| c.is_ascii_digit()) {
            hydrogens = c - b'0';
            i += 1;
        }
    }

    let mut charge = 0i8;
    if let Some(&sign) = b.get(i).filter(|c| **c == b'+' || **c == b'-') {
        i += 1;
        let unit: i8 = if sign == b'+' { 1 } else { -1 };
        if b.get(i) == Some(&sign) {
            // ++ or --
            i += 1;
            charge = 2 * unit;
            if b.get(i) == Some(&sign) {
                i += 1;
                charge = 3 * unit;
            }
        } else if b.get(i).is_some_and(u8::is_ascii_digit) {
            let start = i;
            while b.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
            let mag: i8 = inner[start..i].parse().map_err(|_| SmilesError::InvalidCharge(pos))?;
            if mag > 15 {
                return Err(SmilesError::InvalidCharge(pos));
            }
            charge = unit * mag;
        } else {
            charge = unit;
        }
        if b.get(i).is_some_and(|c| *c == b'+' || *c == b'-') {
            return Err(SmilesError::InvalidCharge(pos));
        }
    }

    if b.get(i) == Some(&b':') {
        i += 1;
        let start = i;
        while b.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i == start {
            return Err(SmilesError::InvalidBracket(pos));
        }
    }

    if i != b.len() {
        return Err(SmilesError::InvalidBracket(pos));
    }
    Ok(AtomToken {
        element,
        aromatic,
        bracket: Some(BracketProps { isotope, hydrogens, charge }),
    })
}
