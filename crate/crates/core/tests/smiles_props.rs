use proptest::prelude::*;
use rxfuse::cohort::corpus_smiles;
use rxfuse::smiles::{parse, tokenize, write_random, Molecule, TokenKind};
use rxfuse::seed;

/// Sorted atom signatures and sorted edge signatures; equal for isomorphic
/// graphs.
fn graph_signature(m: &Molecule) -> (Vec<(u8, usize, u8)>, Vec<((u8, usize, u8), (u8, usize, u8), u8)>) {
    let sig = |i: usize| (m.atoms()[i].element, m.neighbors(i).count(), m.atoms()[i].implicit_h);
    let mut atoms: Vec<_> = (0..m.atom_count()).map(sig).collect();
    atoms.sort();
    let mut edges: Vec<_> = m
        .bonds()
        .iter()
        .map(|b| {
            let (x, y) = (sig(b.a), sig(b.b));
            (x.min(y), x.max(y), b.order.code())
        })
        .collect();
    edges.sort();
    (atoms, edges)
}

#[test]
fn cco_and_occ_are_isomorphic() {
    let a = parse("CCO").unwrap();
    let b = parse("OCC").unwrap();
    assert_eq!(graph_signature(&a), graph_signature(&b));
    assert_ne!(graph_signature(&a), graph_signature(&parse("COC").unwrap()));
}

#[test]
fn every_corpus_molecule_respells_to_an_isomorphic_graph() {
    let mut rng = seed::rng(11);
    for s in corpus_smiles() {
        let m = parse(&s).unwrap();
        for _ in 0..5 {
            let r = write_random(&m, &mut rng);
            let back = parse(&r).unwrap_or_else(|e| panic!("{s} -> {r}: {e}"));
            assert_eq!(graph_signature(&back), graph_signature(&m), "{s} -> {r}");
        }
    }
}

fn smiles_alphabet() -> impl Strategy<Value = String> {
    proptest::string::string_regex(r"[CNOSPFIBrcnos()=#\-+\[\]@/\\.%0-9H]{0,40}").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn parse_never_panics_on_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let s = String::from_utf8_lossy(&bytes);
        let _ = parse(&s);
    }

    #[test]
    fn parse_never_panics_on_smiles_like_text(s in smiles_alphabet()) {
        let _ = parse(&s);
    }

    #[test]
    fn reparse_from_source_is_identical(s in smiles_alphabet()) {
        if let Ok(m) = parse(&s) {
            prop_assert_eq!(parse(m.source()).unwrap(), m);
        }
    }

    #[test]
    fn atom_and_bond_counts_follow_tokens(s in smiles_alphabet()) {
        if let Ok(m) = parse(&s) {
            let toks = tokenize(s.trim()).unwrap();
            let atoms = toks.iter().filter(|t| matches!(t.kind, TokenKind::Atom(_))).count();
            let mut fragments = 0;
            let mut fresh = true;
            for t in &toks {
                match t.kind {
                    TokenKind::Atom(_) if fresh => {
                        fragments += 1;
                        fresh = false;
                    }
                    TokenKind::Dot => fresh = true,
                    _ => {}
                }
            }
            let rings = toks.iter().filter(|t| matches!(t.kind, TokenKind::Ring(_))).count();
            prop_assert_eq!(m.atom_count(), atoms);
            // every atom but the first of each fragment bonds to its predecessor
            prop_assert_eq!(m.bond_count(), atoms - fragments + rings / 2);
        }
    }

    #[test]
    fn respelling_preserves_counts(i in 0usize..100, s in any::<u64>()) {
        let smiles = &corpus_smiles()[i];
        let m = parse(smiles).unwrap();
        let r = write_random(&m, &mut seed::rng(s));
        let back = parse(&r).unwrap();
        prop_assert_eq!(back.atom_count(), m.atom_count());
        prop_assert_eq!(back.bond_count(), m.bond_count());
        prop_assert_eq!(parse(back.source()).unwrap(), back);
    }
}
