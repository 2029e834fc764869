import itertools
import random

import pytest
from hypothesis import given, strategies as st

from csmiles.chem import (
    AtomDescriptor,
    Bond,
    BondOrder,
    MolGraph,
    canonical_smiles,
    canonicalize,
    check_valence,
    parse_smiles,
    strip_atom_maps,
    write_smiles,
)
from csmiles.chem.canonical import canonical_ranks
from csmiles.corpus import property_corpus
from csmiles.exceptions import DanglingBond, InvalidRoot, UnbalancedBranch, UnmatchedRingClosure

CORPUS = property_corpus()


def bond_set(graph):
    return {(min(b.i, b.j), max(b.i, b.j), b.order) for b in graph.bonds}


def test_branch_parse():
    g = parse_smiles("C(C)O")
    assert len(g.atoms) == 3
    assert bond_set(g) == {(0, 1, BondOrder.SINGLE), (0, 2, BondOrder.SINGLE)}


def test_ring_closure_parse():
    g = parse_smiles("C1CC1")
    assert bond_set(g) == {(0, 1, BondOrder.SINGLE), (1, 2, BondOrder.SINGLE), (0, 2, BondOrder.SINGLE)}


def test_aromatic_default_bond():
    g = parse_smiles("c1ccccc1-c1ccccc1")
    orders = [b.order for b in g.bonds]
    assert orders.count(BondOrder.AROMATIC) == 12
    assert orders.count(BondOrder.SINGLE) == 1


def test_ring_bond_order_on_either_digit():
    assert bond_set(parse_smiles("C=1CC1")) == bond_set(parse_smiles("C1CC=1"))


@pytest.mark.parametrize(
    "text, error",
    [
        ("C(C", UnbalancedBranch),
        ("C)C", UnbalancedBranch),
        ("(C)C", UnbalancedBranch),
        ("C1CC", UnmatchedRingClosure),
        ("C11", UnmatchedRingClosure),
        ("CC=", DanglingBond),
        ("C=(C)", UnbalancedBranch),
        ("C(C=)C", DanglingBond),
        ("=C", DanglingBond),
        ("C(C.C)C", UnbalancedBranch),
    ],
)
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse_smiles(text)


def test_write_linear_chain_roots():
    g = parse_smiles("CCO")
    assert write_smiles(g, 0) == "CCO"
    assert write_smiles(g, 2) == "OCC"


@pytest.mark.parametrize("root", [0, 1, 2])
def test_write_three_cycle(root):
    out = parse_smiles(write_smiles(parse_smiles("C1CC1"), root))
    assert len(out.atoms) == 3 and len(out.bonds) == 3


def test_write_single_bracket_atom():
    assert write_smiles(parse_smiles("[NH4+]")) == "[NH4+]"


def test_write_invalid_root():
    with pytest.raises(InvalidRoot):
        write_smiles(parse_smiles("CC"), 5)


def test_ring_digits_first_use_order():
    # Two ring bonds open at the root: digits are handed out 1 then 2.
    out = write_smiles(parse_smiles("C12CC1CC2"), 0)
    assert out.index("1") < out.index("2")
    assert canonicalize(parse_smiles(out)) == canonicalize(parse_smiles("C12CC1CC2"))


def test_write_keeps_atom_maps():
    g = parse_smiles("[CH3:1][C:2](=[O:3])[OH:4]")
    out = write_smiles(g, 3)
    assert out.startswith("[OH:4]")
    assert canonicalize(parse_smiles(out)) == canonicalize(g)


@given(st.sampled_from(CORPUS), st.integers(min_value=0, max_value=10_000))
def test_write_roundtrip_any_root(smiles, seed):
    g = parse_smiles(smiles)
    root = seed % len(g.atoms)
    assert canonicalize(parse_smiles(write_smiles(g, root))) == canonicalize(g)


def test_write_roundtrip_every_root_small():
    for smi in ["c1ccc2ccccc2c1", "C1CC2CCC1C2", "OC(=O)c1ccccc1O", "[NH3+]CC([O-])=O"]:
        g = parse_smiles(smi)
        for root in range(len(g.atoms)):
            assert canonicalize(parse_smiles(write_smiles(g, root))) == canonicalize(g)


def permute(graph: MolGraph, rng: random.Random) -> MolGraph:
    perm = list(range(len(graph.atoms)))
    rng.shuffle(perm)
    g = graph.permuted(perm)
    bonds = list(g.bonds)
    rng.shuffle(bonds)
    bonds = [Bond(b.j, b.i, b.order) if rng.random() < 0.5 else b for b in bonds]
    return MolGraph(g.atoms, tuple(bonds))


def test_canonical_all_orderings_of_ethanol():
    g = parse_smiles("CCO")
    outs = {canonicalize(g.permuted(p)) for p in itertools.permutations(range(3))}
    assert len(outs) == 1


def test_canonical_permuted_benzene():
    g = parse_smiles("c1ccccc1")
    rng = random.Random(0)
    ref = canonicalize(g)
    assert all(canonicalize(permute(g, rng)) == ref for _ in range(50))


def test_canonical_single_atom():
    assert canonicalize(parse_smiles("C")) == "C"


def test_canonical_distinguishes_isomers():
    assert canonical_smiles("CCO") != canonical_smiles("COC")
    assert canonical_smiles("Oc1ccccc1C") != canonical_smiles("Oc1ccc(C)cc1")


def test_canonical_fragment_order():
    assert canonical_smiles("O.CC") == canonical_smiles("CC.O")


@given(st.sampled_from(CORPUS), st.integers(min_value=0, max_value=2**32 - 1))
def test_canonical_permutation_invariance(smiles, seed):
    g = parse_smiles(smiles)
    assert canonicalize(permute(g, random.Random(seed))) == canonicalize(g)


@given(st.sampled_from(CORPUS))
def test_canonical_ranks_reproduce_canonical_string(smiles):
    g = parse_smiles(smiles)
    ranks = canonical_ranks(g)
    assert sorted(ranks) == list(range(len(g.atoms)))
    assert write_smiles(g, ranks.index(0), ranks) == canonicalize(g)


def test_canonical_is_idempotent(corpus):
    for smi in corpus[:200]:
        c = canonical_smiles(smi)
        assert canonical_smiles(c) == c


@pytest.mark.parametrize(
    "smiles, n_violations",
    [
        ("C(C)(C)(C)(C)C", 1),
        ("[NH4+]", 0),
        ("O=C=O", 0),
        ("c1ccccc1", 0),
        ("c1cc[nH]c1", 0),
        ("O=N(=O)c1ccccc1", 0),
        ("C[N+](=O)[O-]", 0),
        ("[CH5]", 1),
        ("FF(F)", 1),
        ("CS(=O)(=O)C", 0),
        ("[Cu+2]", 0),
    ],
)
def test_valence_examples(smiles, n_violations):
    assert len(check_valence(parse_smiles(smiles))) == n_violations


def test_curated_and_random_molecules_are_valence_clean(corpus):
    bad = [s for s in corpus if check_valence(parse_smiles(s))]
    assert bad == []


# Allowed valences for the combinations the property test draws from.
ORACLE_TABLE = {
    ("C", 0): {4},
    ("N", 0): {3, 5},
    ("N", 1): {4},
    ("O", 0): {2},
    ("O", -1): {1},
    ("O", 1): {3},
    ("S", 0): {2, 4, 6},
    ("Cl", 0): {1},
    ("B", 0): {3},
}


@st.composite
def bracket_graphs(draw):
    n = draw(st.integers(min_value=1, max_value=6))
    kinds = draw(st.lists(st.sampled_from(sorted(ORACLE_TABLE)), min_size=n, max_size=n))
    hs = draw(st.lists(st.integers(min_value=0, max_value=4), min_size=n, max_size=n))
    atoms = tuple(AtomDescriptor(e, charge=c, explicit_h=h, bracket=True) for (e, c), h in zip(kinds, hs))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    orders = draw(st.lists(st.sampled_from([BondOrder.SINGLE, BondOrder.DOUBLE, BondOrder.TRIPLE]), min_size=len(chosen), max_size=len(chosen)))
    return MolGraph(atoms, tuple(Bond(i, j, o) for (i, j), o in zip(chosen, orders)))


@given(bracket_graphs())
def test_valence_matches_bruteforce_sum(graph):
    expected = set()
    for k, atom in enumerate(graph.atoms):
        total = atom.explicit_h
        for b in graph.bonds:
            if k in (b.i, b.j):
                total += {BondOrder.SINGLE: 1, BondOrder.DOUBLE: 2, BondOrder.TRIPLE: 3}[b.order]
        if total not in ORACLE_TABLE[(atom.element, atom.charge)]:
            expected.add(k)
    assert {v.atom for v in check_valence(graph)} == expected


def test_strip_atom_maps():
    mapped = parse_smiles("[CH3:1][OH:2]")
    assert strip_atom_maps(mapped) == parse_smiles("[CH3][OH]")
    plain = parse_smiles("CCO")
    assert strip_atom_maps(plain) == plain
    once = strip_atom_maps(mapped)
    assert strip_atom_maps(once) == once
