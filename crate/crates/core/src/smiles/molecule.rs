use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Bond order in half units (aromatic = 3, i.e. 1.5).
    pub fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    /// Symbol used in fingerprint neighbor tuples; aromatic is its own value.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: u8,
    pub aromatic: bool,
    pub formal_charge: i8,
    /// Hydrogen count written inside a bracket atom; authoritative when present.
    pub explicit_h: Option<u8>,
    pub implicit_h: u8,
    pub isotope: Option<u16>,
    pub in_ring: bool,
}

impl Atom {
    pub fn is_bracket(&self) -> bool {
        self.explicit_h.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Molecular graph parsed from a SMILES string. Dot-separated fragments
/// stay in one molecule as separate connected components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Molecule {
    pub(crate) atoms: Vec<Atom>,
    pub(crate) bonds: Vec<Bond>,
    pub(crate) source: String,
    /// Per atom: (neighbor, bond index).
    pub(crate) adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    pub(crate) fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>, source: String) -> Self {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let mut mol = Molecule { atoms, bonds, source, adjacency };
        mol.mark_rings();
        mol
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Neighbors of `atom` with the connecting bond order.
    pub fn neighbors(&self, atom: usize) -> impl Iterator<Item = (usize, BondOrder)> + '_ {
        self.adjacency[atom]
            .iter()
            .map(move |&(n, bi)| (n, self.bonds[bi].order))
    }

    /// Number of non-hydrogen neighbors.
    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.adjacency[atom]
            .iter()
            .filter(|(n, _)| self.atoms[*n].element != 1)
            .count()
    }

    /// Implicit + bracket hydrogens + explicit hydrogen atoms bonded to `atom`.
    pub fn total_h(&self, atom: usize) -> u32 {
        let a = &self.atoms[atom];
        let graph_h = self.adjacency[atom]
            .iter()
            .filter(|(n, _)| self.atoms[*n].element == 1)
            .count() as u32;
        a.implicit_h as u32 + a.explicit_h.unwrap_or(0) as u32 + graph_h
    }

    /// Sum of incident bond orders in half units.
    pub(crate) fn bond_order_sum_half(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.half_units())
            .sum()
    }

    /// Marks `in_ring` on atoms incident to at least one non-bridge bond.
    /// Iterative Tarjan bridge search so deep chains cannot overflow the stack.
    fn mark_rings(&mut self) {
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut bridge = vec![false; self.bonds.len()];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (atom, bond used to enter, next adjacency index)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(frame) = stack.last_mut() {
                let (v, via, idx) = *frame;
                if idx < self.adjacency[v].len() {
                    frame.2 += 1;
                    let (w, bi) = self.adjacency[v][idx];
                    if bi == via {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, bi, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(parent, _, _)) = stack.last() {
                        low[parent] = low[parent].min(low[v]);
                        if low[v] > disc[parent] {
                            bridge[via] = true;
                        }
                    }
                }
            }
        }
        for atom in 0..n {
            self.atoms[atom].in_ring = self.adjacency[atom].iter().any(|&(_, bi)| !bridge[bi]);
        }
    }
}
