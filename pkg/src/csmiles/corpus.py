"""Bundled corpora: curated molecules, random small graphs and synthetic
atom-mapped reactions built by graph edits on building blocks.

The reaction generator exists so the artifact ships with a realistic mapped
corpus without downloading anything.  Every reaction is produced by applying
a named template (bond cuts, bond formations, charge changes) to real
building blocks, so leaving groups, hydrogen changes and bond-order changes
all show up the way they do in patent data.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from importlib import resources
from typing import Callable, Iterable, Iterator, Sequence

from csmiles.chem.canonical import canonical_ranks, canonical_smiles, canonicalize
from csmiles.chem.graph import Bond, BondOrder, MolGraph, parse_smiles
from csmiles.chem.tokenizer import AtomDescriptor
from csmiles.chem.valence import (
    allowed_valences,
    bond_order_sum,
    check_valence,
    implicit_hydrogens,
    simplify_brackets,
)
from csmiles.chem.writer import render, write_items


def curated_molecules() -> list[str]:
    text = resources.files("csmiles.data").joinpath("molecules.smi").read_text()
    return [ln.split()[0] for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


# ---------------------------------------------------------------------------
# random small molecules

_RING_FRAGMENTS = (
    "c1ccccc1", "c1ccncc1", "c1ccoc1", "c1ccsc1", "c1cc[nH]c1", "c1cnc[nH]1",
    "C1CCCCC1", "C1CCNCC1", "C1COCCN1", "C1CC1", "C1CCOC1", "c1ccc2ccccc2c1",
    "c1cncnc1", "C1=CCCC1", "c1ccc2[nH]ccc2c1",
)
_CHAIN_ATOMS = ("C", "C", "C", "C", "N", "O", "S", "F", "Cl", "Br")
_MAX_BONDS = {"C": 4, "N": 3, "O": 2, "S": 2, "F": 1, "Cl": 1, "Br": 1}


def _free_valence(g_atoms: list[AtomDescriptor], bonds: dict, k: int) -> int:
    atom = g_atoms[k]
    if atom.aromatic:
        # Only aromatic carbons carrying an implicit H may take a substituent.
        if atom.element != "C":
            return 0
        deg = sum(1 for key in bonds if k in key)
        return 1 if deg == 2 else 0
    used = sum(o.valence for key, o in bonds.items() if k in key)
    if atom.charge == 1 and atom.element == "N":
        return 4 - used
    return _MAX_BONDS.get(atom.element, 0) - used


def random_molecule(rng: random.Random, max_atoms: int = 14) -> MolGraph:
    """A random valence-correct graph assembled from rings and chain atoms."""
    atoms: list[AtomDescriptor] = []
    bonds: dict[tuple[int, int], BondOrder] = {}

    def add_fragment(smiles: str) -> list[int]:
        frag = parse_smiles(smiles)
        base = len(atoms)
        atoms.extend(frag.atoms)
        for b in frag.bonds:
            bonds[(base + b.i, base + b.j)] = b.order
        return list(range(base, base + len(frag.atoms)))

    if rng.random() < 0.6:
        add_fragment(rng.choice(_RING_FRAGMENTS))
    else:
        add_fragment(rng.choice(("C", "N", "O", "C")))
    target = rng.randint(2, max_atoms)
    while len(atoms) < target:
        open_sites = [k for k in range(len(atoms)) if _free_valence(atoms, bonds, k) > 0]
        if not open_sites:
            break
        site = rng.choice(open_sites)
        if rng.random() < 0.12 and len(atoms) + 6 <= max_atoms + 4:
            new = add_fragment(rng.choice(_RING_FRAGMENTS))
            hook = [k for k in new if _free_valence(atoms, bonds, k) > 0]
            if not hook:
                continue
            bonds[(site, rng.choice(hook))] = BondOrder.SINGLE
            continue
        elem = rng.choice(_CHAIN_ATOMS)
        atoms.append(AtomDescriptor(elem))
        new = len(atoms) - 1
        room = min(_free_valence(atoms, bonds, site), _MAX_BONDS[elem])
        order = BondOrder.SINGLE
        if room >= 2 and not atoms[site].aromatic and rng.random() < 0.2:
            order = BondOrder.DOUBLE
            if room >= 3 and elem in ("C", "N") and rng.random() < 0.3:
                order = BondOrder.TRIPLE
        bonds[(site, new)] = order
    # Sprinkle charges, isotopes and ring closures on chain atoms.
    for k, atom in enumerate(atoms):
        if atom.aromatic:
            continue
        r = rng.random()
        if r < 0.03 and atom.element == "N" and _free_valence(atoms, bonds, k) >= 1:
            atoms[k] = replace(atom, charge=1, bracket=True)
        elif r < 0.05 and atom.element == "O" and _free_valence(atoms, bonds, k) == 1:
            atoms[k] = replace(atom, charge=-1, bracket=True)
        elif r < 0.06 and atom.element == "C":
            atoms[k] = replace(atom, isotope=13, bracket=True)
    if rng.random() < 0.15 and len(atoms) >= 5:
        cand = [k for k in range(len(atoms)) if not atoms[k].aromatic and _free_valence(atoms, bonds, k) > 0]
        if len(cand) >= 2:
            a, b = rng.sample(cand, 2)
            if (a, b) not in bonds and (b, a) not in bonds:
                bonds[(a, b)] = BondOrder.SINGLE
    graph = MolGraph(tuple(atoms), tuple(Bond(i, j, o) for (i, j), o in bonds.items()))
    # Bracket atoms need their hydrogen count made explicit.
    fixed = list(graph.atoms)
    for k, atom in enumerate(fixed):
        if atom.bracket:
            used = bond_order_sum(graph, k)
            allowed = allowed_valences(atom.element, atom.charge) or (used,)
            fixed[k] = replace(atom, explicit_h=min(v for v in allowed if v >= used) - used)
    return graph.with_atoms(fixed)


def random_molecules(n: int, seed: int = 0, exclude: Iterable[str] = ()) -> list[str]:
    """``n`` distinct valence-correct random molecules as canonical SMILES,
    none of them equal to a canonical string in ``exclude``."""
    rng = random.Random(seed)
    skip = set(exclude)
    out: dict[str, None] = {}
    while len(out) < n:
        g = random_molecule(rng)
        if check_valence(g):
            continue
        smi = canonicalize(g)
        if smi not in skip:
            out.setdefault(smi)
    return list(out)


def property_corpus(n_random: int = 800, seed: int = 0) -> list[str]:
    """Curated molecules followed by ``n_random`` distinct random ones."""
    curated = curated_molecules()
    return curated + random_molecules(n_random, seed, exclude=(canonical_smiles(s) for s in curated))


# ---------------------------------------------------------------------------
# synthetic atom-mapped reactions


@dataclass
class _Frag:
    graph: MolGraph
    handles: dict[int, int]


def _fragment(smiles: str) -> _Frag:
    g = parse_smiles(smiles)
    handles = {a.atom_map: k for k, a in enumerate(g.atoms) if a.atom_map is not None}
    atoms = [a.without_map() for a in g.atoms]
    return _Frag(simplify_brackets(g.with_atoms(atoms)), handles)


class _Editor:
    """Mutable reaction workspace over the union of the reactant fragments."""

    def __init__(self, frags: Sequence[_Frag]):
        self.atoms: list[AtomDescriptor] = []
        self.bonds: dict[tuple[int, int], BondOrder] = {}
        self.handles: list[dict[int, int]] = []
        for f in frags:
            base = len(self.atoms)
            self.atoms.extend(f.graph.atoms)
            for b in f.graph.bonds:
                self.bonds[self._key(base + b.i, base + b.j)] = b.order
            self.handles.append({m: base + k for m, k in f.handles.items()})

    @staticmethod
    def _key(i: int, j: int) -> tuple[int, int]:
        return (i, j) if i < j else (j, i)

    def h(self, frag: int, label: int) -> int:
        return self.handles[frag][label]

    def _shift_h(self, k: int, delta: int) -> None:
        atom = self.atoms[k]
        if atom.bracket:
            self.atoms[k] = replace(atom, explicit_h=max(atom.explicit_h + delta, 0))

    def bond(self, i: int, j: int, order: BondOrder = BondOrder.SINGLE) -> None:
        self.bonds[self._key(i, j)] = order
        self._shift_h(i, -order.valence)
        self._shift_h(j, -order.valence)

    def cut(self, i: int, j: int) -> None:
        order = self.bonds.pop(self._key(i, j))
        self._shift_h(i, order.valence)
        self._shift_h(j, order.valence)

    def set_order(self, i: int, j: int, order: BondOrder) -> None:
        old = self.bonds[self._key(i, j)]
        self.bonds[self._key(i, j)] = order
        delta = old.valence - order.valence
        self._shift_h(i, delta)
        self._shift_h(j, delta)

    def set_atom(self, k: int, **changes) -> None:
        self.atoms[k] = replace(self.atoms[k], **changes)

    def graph(self) -> MolGraph:
        g = MolGraph(tuple(self.atoms), tuple(Bond(i, j, o) for (i, j), o in self.bonds.items()))
        return simplify_brackets(g)


@dataclass(frozen=True)
class Template:
    name: str
    reaction_class: int
    roles: tuple[str, ...]
    # ``prepare`` joins fragments into the reactant side; ``react`` edits it
    # into the product.  Both return the atom whose component is kept.
    prepare: Callable[[_Editor], None] | None
    react: Callable[[_Editor], int]


def _mapped_text(atom: AtomDescriptor, hcount: int, amap: int) -> str:
    return replace(atom, bracket=True, explicit_h=hcount, atom_map=amap).to_smiles()


def _write_side(graph: MolGraph, keep: Sequence[int], amap: dict[int, int]) -> str:
    sub = graph.subgraph(keep)
    ranks = canonical_ranks(sub)
    items = write_items(sub, ranks.index(0), ranks)
    out = []
    for it in items:
        if isinstance(it, int):
            k = keep[it]
            atom = sub.atoms[it]
            if k in amap:
                out.append(_mapped_text(atom, implicit_hydrogens(sub, it), amap[k]))
            else:
                out.append(atom.to_smiles())
        else:
            out.append(it)
    return "".join(out)


def _component_of(graph: MolGraph, k: int) -> list[int]:
    return next(c for c in graph.components() if k in c)


def apply_template(template: Template, smiles: Sequence[str]) -> tuple[str, str] | None:
    """Run ``template`` on building blocks; returns mapped (reactants, product)."""
    ed = _Editor([_fragment(s) for s in smiles])
    if template.prepare is not None:
        template.prepare(ed)
    reactant_graph = ed.graph()
    keep_atom = template.react(ed)
    product_graph = ed.graph()
    if check_valence(reactant_graph) or check_valence(product_graph):
        return None
    keep = _component_of(product_graph, keep_atom)
    # Reactant molecules that contribute nothing to the product are reagents
    # or byproducts of preparation; drop them.
    contributing = [
        c for c in reactant_graph.components() if any(k in keep for k in c)
    ]
    # Atom maps follow the product's canonical write order.
    sub = product_graph.subgraph(keep)
    ranks = canonical_ranks(sub)
    order = [it for it in write_items(sub, ranks.index(0), ranks) if isinstance(it, int)]
    amap = {keep[it]: n + 1 for n, it in enumerate(order)}
    product = _write_side(product_graph, keep, amap)
    reactants = ".".join(
        sorted(_write_side(reactant_graph, c, amap) for c in contributing)
    )
    return reactants, product


def _two(a_label: int = 1, cut_label: int | None = 2, b_label: int = 1):
    """Template: cut fragment 0's leaving atom, join fragment 0 to fragment 1."""

    def react(ed: _Editor) -> int:
        a = ed.h(0, a_label)
        if cut_label is not None:
            ed.cut(a, ed.h(0, cut_label))
        ed.bond(a, ed.h(1, b_label))
        return a

    return react


def _two_cut_both(ed: _Editor) -> int:
    a, b = ed.h(0, 1), ed.h(1, 1)
    ed.cut(a, ed.h(0, 2))
    ed.cut(b, ed.h(1, 2))
    ed.bond(a, b)
    return a


def _alkylate(ed: _Editor) -> int:
    # fragment 0 nucleophile, fragment 1 alkyl halide
    c = ed.h(1, 1)
    ed.cut(c, ed.h(1, 2))
    ed.bond(ed.h(0, 1), c)
    return c


def _reductive_amination(ed: _Editor) -> int:
    c = ed.h(0, 1)
    ed.cut(c, ed.h(0, 2))
    ed.bond(c, ed.h(1, 1))
    return c


def _urea(ed: _Editor) -> int:
    c = ed.h(0, 1)
    ed.set_order(c, ed.h(0, 3), BondOrder.SINGLE)
    ed.bond(c, ed.h(1, 1))
    return c


def _nitro(ed: _Editor) -> int:
    n = ed.h(0, 1)
    ed.cut(n, ed.h(0, 2))
    ed.cut(n, ed.h(0, 3))
    ed.set_atom(n, charge=0, explicit_h=2)
    return n


def _carbonyl_reduction(ed: _Editor) -> int:
    c = ed.h(0, 1)
    ed.set_order(c, ed.h(0, 2), BondOrder.SINGLE)
    return c


def _join_prepare(ed: _Editor) -> None:
    # Build a protected molecule: fragment 1's handle 1 bonds to fragment 0's handle 1
    # after fragment 1 loses its handle-2 atom.
    c = ed.h(1, 1)
    ed.cut(c, ed.h(1, 2))
    ed.bond(ed.h(0, 1), c)


def _deprotect(ed: _Editor) -> int:
    x = ed.h(0, 1)
    ed.cut(x, ed.h(1, 1))
    return x


AMINES = (
    "[NH2:1]Cc1ccccc1", "[NH2:1]c1ccccc1", "[NH2:1]c1ccc(F)cc1", "[NH2:1]c1ccc(OC)cc1",
    "C1CC[NH:1]CC1", "C1COCC[NH:1]1", "CN1CC[NH:1]CC1", "C[NH:1]C", "CC[NH2:1]",
    "CC(C)[NH2:1]", "[NH2:1]CCO", "[NH2:1]C1CC1", "[NH2:1]c1ccncc1", "[NH2:1]c1cccc(Cl)c1",
    "[NH2:1]Cc1ccc(Cl)cc1", "C1CC[NH:1]C1", "[NH2:1]CCc1ccccc1", "COC(=O)C[NH2:1]",
    "[NH2:1]c1ccc2ccccc2c1", "[NH2:1]C1CCCCC1", "CC(C)(C)OC(=O)N1CC[NH:1]CC1",
    "[NH2:1]c1nccs1", "Cc1cc([NH2:1])no1", "[NH2:1]Cc1ccco1", "c1ccc2c(c1)CC[NH:1]C2",
)
ACIDS = (
    "C[C:1](=O)[OH:2]", "O=[C:1]([OH:2])c1ccccc1", "O=[C:1]([OH:2])c1ccc(Cl)cc1",
    "O=[C:1]([OH:2])c1ccncc1", "O=[C:1]([OH:2])c1ccc(cc1)[N+](=O)[O-]", "O=[C:1]([OH:2])C1CC1",
    "O=[C:1]([OH:2])Cc1ccccc1", "CC(C)(C)OC(=O)NC[C:1](=O)[OH:2]", "O=[C:1]([OH:2])c1ccco1",
    "O=[C:1]([OH:2])c1cccs1", "COc1ccc(cc1)[C:1](=O)[OH:2]", "O=[C:1]([OH:2])c1ccc2ccccc2c1",
    "O=[C:1]([OH:2])C1CCCCC1", "Cc1ccc(cc1)[C:1](=O)[OH:2]", "O=[C:1]([OH:2])c1cc(F)cc(F)c1",
    "O=[C:1]([OH:2])c1ccc(cc1)C(F)(F)F", "O=[C:1]([OH:2])c1cnccn1", "CC(C)[C:1](=O)[OH:2]",
    "O=[C:1]([OH:2])c1ccc(Br)cc1",
)
ACID_CHLORIDES = tuple(a.replace("[OH:2]", "[Cl:2]") for a in ACIDS)
ARYL_BROMIDES = (
    "[Br:2][c:1]1ccccc1", "[Br:2][c:1]1ccc(cc1)C#N", "[Br:2][c:1]1ccc(cc1)C(=O)OC",
    "[Br:2][c:1]1cccnc1", "[Br:2][c:1]1ccc(F)cc1", "[Br:2][c:1]1ccc(OC)cc1",
    "[Br:2][c:1]1cccc(c1)C(F)(F)F", "[Br:2][c:1]1ccc2ccccc2c1", "[Br:2][c:1]1ccsc1",
    "[Br:2][c:1]1ccc(C)cc1", "[Br:2][c:1]1cncnc1", "[Br:2][c:1]1ccc(cc1)N1CCOCC1",
)
BORONIC = (
    "O[B:2](O)[c:1]1ccccc1", "O[B:2](O)[c:1]1ccc(F)cc1", "O[B:2](O)[c:1]1ccc(OC)cc1",
    "O[B:2](O)[c:1]1cccnc1", "O[B:2](O)[c:1]1ccc(C)cc1", "O[B:2](O)[c:1]1ccco1",
    "O[B:2](O)[c:1]1ccc(Cl)cc1", "CC1(C)O[B:2](OC1(C)C)[c:1]1ccccc1",
)
ALKYL_BROMIDES = (
    "[Br:2][CH2:1]c1ccccc1", "[Br:2][CH2:1]C", "[Br:2][CH2:1]CC", "[Br:2][CH2:1]c1ccc(F)cc1",
    "[Br:2][CH2:1]C(=O)OCC", "[Br:2][CH2:1]C=C", "[Br:2][CH2:1]C1CC1", "[Br:2][CH2:1]c1ccccn1",
    "C[CH:1]([Br:2])C", "[Br:2][CH2:1]c1ccc(cc1)C#N", "[I:2][CH3:1]",
)
ALCOHOLS = (
    "[OH:1]c1ccccc1", "[OH:1]c1ccc(Cl)cc1", "[OH:1]c1ccc(cc1)C=O", "[OH:1]c1ccc(cc1)C(=O)OC",
    "COc1ccc([OH:1])cc1", "[OH:1]c1cccnc1", "[OH:1]c1ccc2ccccc2c1", "[OH:1]CC", "[OH:1]C",
    "[OH:1]C(C)C", "[OH:1]Cc1ccccc1", "[OH:1]CCN1CCOCC1",
)
ALDEHYDES = (
    "[O:2]=[CH:1]c1ccccc1", "[O:2]=[CH:1]c1ccc(F)cc1", "[O:2]=[CH:1]c1ccncc1",
    "[O:2]=[CH:1]c1ccco1", "[O:2]=[CH:1]C1CCCCC1", "[O:2]=[CH:1]c1ccc(OC)cc1",
    "CC(C)[CH:1]=[O:2]", "[O:2]=[CH:1]c1cccs1",
)
KETONES = (
    "C[C:1](=[O:2])c1ccccc1", "[O:2]=[C:1]1CCCCC1", "C[C:1](=[O:2])c1ccc(Cl)cc1",
    "[O:2]=[C:1](c1ccccc1)c1ccccc1", "CC(C)(C)OC(=O)N1CC[C:1](=[O:2])CC1",
    "C[C:1](=[O:2])c1ccncc1",
) + ALDEHYDES
SULFONYL_CHLORIDES = (
    "Cc1ccc(cc1)[S:1](=O)(=O)[Cl:2]", "C[S:1](=O)(=O)[Cl:2]", "O=[S:1](=O)([Cl:2])c1ccccc1",
    "O=[S:1](=O)([Cl:2])c1ccc(F)cc1", "O=[S:1](=O)([Cl:2])c1cccs1", "CC[S:1](=O)(=O)[Cl:2]",
)
ISOCYANATES = (
    "[O:2]=[C:1]=[N:3]c1ccccc1", "[O:2]=[C:1]=[N:3]c1ccc(Cl)cc1", "[O:2]=[C:1]=[N:3]C1CCCCC1",
    "CC(C)[N:3]=[C:1]=[O:2]", "[O:2]=[C:1]=[N:3]c1ccc(C)cc1",
)
NITROARENES = (
    "[O-:3][N+:1](=[O:2])c1ccccc1", "[O-:3][N+:1](=[O:2])c1ccc(Cl)cc1",
    "COC(=O)c1ccc(cc1)[N+:1](=[O:2])[O-:3]", "Cc1ccc(cc1)[N+:1](=[O:2])[O-:3]",
    "[O-:3][N+:1](=[O:2])c1cccnc1", "[O-:3][N+:1](=[O:2])c1ccc(cc1)N1CCOCC1",
    "Oc1ccc(cc1)[N+:1](=[O:2])[O-:3]", "[O-:3][N+:1](=[O:2])c1ccc(F)cc1",
)
SNAR_ARENES = (
    "[F:2][c:1]1ccc(cc1)[N+](=O)[O-]", "[F:2][c:1]1ccc(cc1)C#N", "[F:2][c:1]1ccccn1",
    "[Cl:2][c:1]1ncccn1", "[Cl:2][c:1]1ccnc2ccccc12",
)
BOC = ("CC(C)(C)O[C:1](=O)[Cl:2]",)
BOC_ANHYDRIDE = ("CC(C)(C)OC(=O)[O:2][C:1](=O)OC(C)(C)C",)
BENZYL = ("[Br:2][CH2:1]c1ccccc1", "COc1ccc([CH2:1][Br:2])cc1")
METHYL = ("[I:2][CH3:1]", "[Br:2][CH2:1]C")

def _ester_prepare(ed: _Editor) -> None:
    # acid OH oxygen picks up the alkyl group of fragment 1
    c = ed.h(1, 1)
    ed.cut(c, ed.h(1, 2))
    ed.bond(ed.h(0, 2), c)


def _ester_hydrolysis(ed: _Editor) -> int:
    ed.cut(ed.h(0, 2), ed.h(1, 1))
    return ed.h(0, 1)


TEMPLATES: tuple[Template, ...] = (
    Template("amide_coupling", 2, ("ACIDS", "AMINES"), None, _two()),
    Template("acyl_chloride_amidation", 2, ("ACID_CHLORIDES", "AMINES"), None, _two()),
    Template("esterification", 2, ("ACIDS", "ALCOHOLS"), None, _two()),
    Template("sulfonamide", 2, ("SULFONYL_CHLORIDES", "AMINES"), None, _two()),
    Template("urea", 2, ("ISOCYANATES", "AMINES"), None, _urea),
    Template("n_alkylation", 1, ("AMINES", "ALKYL_BROMIDES"), None, _alkylate),
    Template("o_alkylation", 1, ("ALCOHOLS", "ALKYL_BROMIDES"), None, _alkylate),
    Template("buchwald", 1, ("ARYL_BROMIDES", "AMINES"), None, _two()),
    Template("snar", 1, ("SNAR_ARENES", "AMINES"), None, _two()),
    Template("suzuki", 3, ("ARYL_BROMIDES", "BORONIC"), None, _two_cut_both),
    Template("boc_protection", 5, ("BOC_ANHYDRIDE", "AMINES"), None, _two()),
    Template("boc_deprotection", 6, ("AMINES", "BOC"), _join_prepare, _deprotect),
    Template("benzyl_deprotection", 6, ("ALCOHOLS", "BENZYL"), _join_prepare, _deprotect),
    Template("ester_hydrolysis", 6, ("ACIDS", "METHYL"), _ester_prepare, _ester_hydrolysis),
    Template("nitro_reduction", 7, ("NITROARENES",), None, _nitro),
    Template("carbonyl_reduction", 7, ("KETONES",), None, _carbonyl_reduction),
    Template("reductive_amination", 7, ("ALDEHYDES", "AMINES"), None, _reductive_amination),
)


_POOLS = {
    name: value
    for name, value in globals().items()
    if name.isupper() and isinstance(value, tuple) and value and isinstance(value[0], str)
}


@dataclass(frozen=True)
class SyntheticReaction:
    template: str
    reaction_class: int
    reactants: str
    product: str

    def line(self) -> str:
        return f"{self.reaction_class}\t{self.reactants}>>{self.product}"


def _enumerate(template: Template) -> Iterator[tuple[str, ...]]:
    pools = [_POOLS[r] for r in template.roles]
    if len(pools) == 1:
        yield from ((s,) for s in pools[0])
        return
    for a in pools[0]:
        for b in pools[1]:
            yield (a, b)


def synthetic_reactions(n: int, seed: int = 0, max_product_atoms: int = 40) -> list[SyntheticReaction]:
    """Up to ``n`` distinct reactions, sampled round-robin over templates."""
    rng = random.Random(seed)
    queues = []
    for t in TEMPLATES:
        combos = list(_enumerate(t))
        rng.shuffle(combos)
        queues.append((t, combos))
    out: list[SyntheticReaction] = []
    seen: set[str] = set()
    while len(out) < n and any(q for _, q in queues):
        for t, combos in queues:
            if len(out) >= n:
                break
            while combos:
                res = apply_template(t, combos.pop())
                if res is None:
                    continue
                reactants, product = res
                if product in seen or product.count(":") > max_product_atoms:
                    continue
                seen.add(product)
                out.append(SyntheticReaction(t.name, t.reaction_class, reactants, product))
                break
    return out
