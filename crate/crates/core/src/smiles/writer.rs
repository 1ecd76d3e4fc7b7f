use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use super::elements::symbol;
use super::molecule::{BondOrder, Molecule};

/// Writes `mol` as SMILES, starting each component at its lowest-ranked
/// atom and visiting neighbors in rank order. Stereo is not written.
pub fn write_ranked(mol: &Molecule, rank: &[usize]) -> String {
    assert_eq!(rank.len(), mol.atom_count(), "one rank per atom");
    let n = mol.atom_count();
    let mut plan = Plan {
        children: vec![Vec::new(); n],
        rings: vec![Vec::new(); n],
        visited: vec![false; n],
        used: vec![false; mol.bond_count()],
    };
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&a| rank[a]);
    let mut roots = Vec::new();
    for s in starts {
        if !plan.visited[s] {
            roots.push(s);
            plan.visit(mol, rank, s);
        }
    }

    let mut out = String::new();
    let mut digits: Vec<Option<usize>> = vec![None; mol.bond_count()];
    let mut free: Vec<bool> = Vec::new();
    for (i, &r) in roots.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        emit(mol, &plan, r, &mut digits, &mut free, &mut out);
    }
    out
}

/// Random atom-order spelling of the same graph.
pub fn write_random<R: Rng + ?Sized>(mol: &Molecule, rng: &mut R) -> String {
    let mut rank: Vec<usize> = (0..mol.atom_count()).collect();
    rank.shuffle(rng);
    write_ranked(mol, &rank)
}

struct Plan {
    /// Tree children as (atom, bond).
    children: Vec<Vec<(usize, usize)>>,
    /// Ring-closure bonds touching each atom, in emission order.
    rings: Vec<Vec<usize>>,
    visited: Vec<bool>,
    used: Vec<bool>,
}

impl Plan {
    fn visit(&mut self, mol: &Molecule, rank: &[usize], u: usize) {
        self.visited[u] = true;
        let mut nbrs = mol.adjacency[u].clone();
        nbrs.sort_by_key(|&(v, _)| rank[v]);
        for (v, bi) in nbrs {
            if self.used[bi] {
                continue;
            }
            self.used[bi] = true;
            if self.visited[v] {
                self.rings[v].push(bi);
                self.rings[u].push(bi);
            } else {
                self.children[u].push((v, bi));
                self.visit(mol, rank, v);
            }
        }
    }
}

fn emit(mol: &Molecule, plan: &Plan, u: usize, digits: &mut [Option<usize>], free: &mut Vec<bool>, out: &mut String) {
    write_atom(mol, u, out);
    for &bi in &plan.rings[u] {
        match digits[bi].take() {
            Some(d) => {
                free[d] = true;
                write_digit(d, out);
            }
            None => {
                let d = match free.iter().position(|&f| f) {
                    Some(d) => d,
                    None => {
                        free.push(true);
                        free.len() - 1
                    }
                };
                free[d] = false;
                digits[bi] = Some(d);
                let b = mol.bonds[bi];
                out.push_str(bond_symbol(mol, b.a, b.b, b.order));
                write_digit(d, out);
            }
        }
    }
    let kids = &plan.children[u];
    for (i, &(v, bi)) in kids.iter().enumerate() {
        let last = i + 1 == kids.len();
        if !last {
            out.push('(');
        }
        out.push_str(bond_symbol(mol, u, v, mol.bonds[bi].order));
        emit(mol, plan, v, digits, free, out);
        if !last {
            out.push(')');
        }
    }
}

fn write_digit(d: usize, out: &mut String) {
    let d = d + 1;
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

/// Symbol needed so the parser reads back `order`; empty when implied.
fn bond_symbol(mol: &Molecule, a: usize, b: usize, order: BondOrder) -> &'static str {
    let both_aromatic = mol.atoms[a].aromatic && mol.atoms[b].aromatic;
    match order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
    }
}

fn write_atom(mol: &Molecule, u: usize, out: &mut String) {
    let a = &mol.atoms[u];
    let sym = symbol(a.element);
    let sym = if a.aromatic { sym.to_ascii_lowercase() } else { sym.to_string() };
    let Some(h) = a.explicit_h else {
        out.push_str(&sym);
        return;
    };
    out.push('[');
    if let Some(iso) = a.isotope {
        let _ = write!(out, "{iso}");
    }
    out.push_str(&sym);
    match h {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match a.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    out.push(']');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    fn identity(mol: &Molecule) -> String {
        write_ranked(mol, &(0..mol.atom_count()).collect::<Vec<_>>())
    }

    #[test]
    fn identity_order_examples() {
        for (src, want) in [
            ("CCO", "CCO"),
            ("c1ccccc1", "c1ccccc1"),
            ("CC(=O)Oc1ccccc1C(=O)O", "CC(=O)Oc1ccccc1C(=O)O"),
            ("[Na+].[Cl-]", "[Na+].[Cl-]"),
            ("[13CH4]", "[13CH4]"),
            ("c1ccccc1-c1ccccc1", "c1ccccc1-c1ccccc1"),
            ("[nH]1cccc1", "[nH]1cccc1"),
            ("C#N", "C#N"),
        ] {
            assert_eq!(identity(&parse(src).unwrap()), want, "{src}");
        }
    }

    #[test]
    fn reversed_order_reparses_to_same_counts() {
        let mol = parse("OC(=O)C1CCC(CC1)N").unwrap();
        let rank: Vec<usize> = (0..mol.atom_count()).rev().collect();
        let s = write_ranked(&mol, &rank);
        let back = parse(&s).unwrap();
        assert_eq!(back.atom_count(), mol.atom_count());
        assert_eq!(back.bond_count(), mol.bond_count());
        assert!(s.starts_with('N'), "{s}");
    }

    #[test]
    fn ring_digits_past_nine() {
        let mut s = String::new();
        write_digit(0, &mut s);
        write_digit(8, &mut s);
        write_digit(9, &mut s);
        write_digit(41, &mut s);
        assert_eq!(s, "19%10%42");
    }
}
