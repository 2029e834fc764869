"""Valence checks and hydrogen bookkeeping without kekulization.

Aromatic bonds contribute 1 to an atom's bond-order sum and every aromatic
atom may use one extra unit of slack, which stands in for its share of the
delocalised pi system.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from csmiles.chem.elements import ORGANIC_SUBSET
from csmiles.chem.graph import MolGraph
from csmiles.chem.tokenizer import AtomDescriptor, Chirality

log = logging.getLogger(__name__)

NEUTRAL_VALENCE: dict[str, tuple[int, ...]] = {
    "H": (1,),
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
    "Se": (2, 4, 6),
    "Si": (4,),
    "As": (3, 5),
}

_CATION_RAISES = frozenset({"N", "O", "S", "P", "Se", "As"})
# Second-row atoms cannot expand their octet.
_OCTET_LIMITED = frozenset({"B", "C", "N", "O"})
# Isoelectronic overrides that the shift rule gets wrong.
_SPECIAL: dict[tuple[str, int], tuple[int, ...]] = {
    ("B", -1): (4,),
    ("C", 1): (3,),
    ("C", -1): (3,),
}


def allowed_valences(element: str, charge: int) -> tuple[int, ...] | None:
    """Allowed total valences for ``element`` at ``charge``; ``None`` if unknown."""
    if (element, charge) in _SPECIAL:
        return _SPECIAL[(element, charge)]
    base = NEUTRAL_VALENCE.get(element)
    if base is None:
        return None
    if charge == 0:
        return base
    if charge > 0 and element in _CATION_RAISES:
        shifted = [v + charge for v in base]
    else:
        shifted = [v - abs(charge) for v in base]
    if element in _OCTET_LIMITED:
        shifted = [v for v in shifted if v <= 4]
    return tuple(v for v in shifted if v >= 0) or None


@dataclass(frozen=True)
class ValenceViolation:
    atom: int
    element: str
    charge: int
    valence: int
    allowed: tuple[int, ...]

    def __str__(self) -> str:
        return (
            f"atom {self.atom} ({self.element}, charge {self.charge:+d}) has valence "
            f"{self.valence}, allowed {self.allowed}"
        )


def bond_order_sum(graph: MolGraph, k: int) -> int:
    return sum(order.valence for _, order in graph.neighbors(k))


def atom_ok(atom: AtomDescriptor, bond_sum: int, allowed: tuple[int, ...]) -> bool:
    """Brute per-atom rule shared by :func:`check_valence` and hydrogen counting."""
    slack = (0, 1) if atom.aromatic else (0,)
    totals = [bond_sum + atom.explicit_h + s for s in slack]
    if atom.bracket:
        return any(t in allowed for t in totals)
    # Implicit hydrogens can fill any gap below the largest allowed valence.
    return min(totals) <= max(allowed)


def check_valence(graph: MolGraph) -> list[ValenceViolation]:
    """Atoms whose bond-order sum plus hydrogens is not an allowed valence."""
    violations = []
    for k, atom in enumerate(graph.atoms):
        allowed = allowed_valences(atom.element, atom.charge)
        if allowed is None:
            log.warning("valence unchecked for %s with charge %+d", atom.element, atom.charge)
            continue
        bsum = bond_order_sum(graph, k)
        if not atom_ok(atom, bsum, allowed):
            violations.append(
                ValenceViolation(k, atom.element, atom.charge, bsum + atom.explicit_h, allowed)
            )
    return violations


def implicit_hydrogens(graph: MolGraph, k: int) -> int:
    """Hydrogens a bare (unbracketed) spelling of atom ``k`` would imply.

    Bracket atoms return their stated count.
    """
    atom = graph.atoms[k]
    if atom.bracket:
        return atom.explicit_h
    allowed = allowed_valences(atom.element, atom.charge)
    if allowed is None:
        return 0
    bsum = bond_order_sum(graph, k)
    if atom.aromatic:
        if bsum + 1 in allowed or bsum in allowed:
            return 0
        bsum += 1
    for v in sorted(allowed):
        if v >= bsum:
            return v - bsum
    return 0


def simplify_brackets(graph: MolGraph) -> MolGraph:
    """Drop brackets from atoms whose bare spelling means the same thing.

    Atom maps must already be stripped.  ``[CH3][OH]`` becomes ``CO`` while
    ``[nH]``, ``[NH4+]`` and ``[C@@H]`` keep their brackets.
    """
    atoms = list(graph.atoms)
    for k, atom in enumerate(atoms):
        if not atom.bracket or atom.atom_map is not None:
            continue
        if (
            atom.element not in ORGANIC_SUBSET
            or atom.charge
            or atom.isotope is not None
            or atom.chirality is not Chirality.NONE
        ):
            continue
        bare = replace(atom, bracket=False, explicit_h=0)
        if bare.needs_brackets():
            continue
        probe = graph.with_atoms(atoms[:k] + [bare] + atoms[k + 1 :])
        if implicit_hydrogens(probe, k) == atom.explicit_h:
            atoms[k] = bare
    return graph.with_atoms(atoms)


def with_explicit_hydrogens(graph: MolGraph) -> MolGraph:
    """Bracket every atom and make its hydrogen count explicit."""
    atoms = [
        replace(a, bracket=True, explicit_h=implicit_hydrogens(graph, k))
        for k, a in enumerate(graph.atoms)
    ]
    return graph.with_atoms(atoms)


def demapped_token_texts(smiles: str) -> list[str]:
    """Token texts of ``smiles`` with atom maps and redundant brackets removed.

    Token ``i`` of the result corresponds to token ``i`` of the input, which
    lets alignments computed on mapped strings carry over unchanged.
    """
    from csmiles.chem.graph import parse, strip_atom_maps
    from csmiles.chem.tokenizer import TokenKind, tokenize

    tokens = tokenize(smiles)
    graph = simplify_brackets(strip_atom_maps(parse(tokens)))
    out, k = [], 0
    for tok in tokens:
        if tok.kind is TokenKind.ATOM:
            out.append(graph.atoms[k].to_smiles())
            k += 1
        else:
            out.append(tok.text)
    return out


def demap_smiles(smiles: str) -> str:
    return "".join(demapped_token_texts(smiles))
