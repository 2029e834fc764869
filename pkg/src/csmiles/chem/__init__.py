"""SMILES grammar substrate: tokenize, parse, write, canonicalize, validate."""

from csmiles.chem.canonical import canonical_smiles, canonicalize
from csmiles.chem.graph import Bond, BondOrder, MolGraph, parse, parse_smiles, strip_atom_maps
from csmiles.chem.tokenizer import AtomDescriptor, Chirality, Token, TokenKind, tokenize
from csmiles.chem.valence import (
    ValenceViolation,
    check_valence,
    implicit_hydrogens,
    simplify_brackets,
)
from csmiles.chem.writer import write_smiles

__all__ = [
    "AtomDescriptor",
    "Bond",
    "BondOrder",
    "Chirality",
    "MolGraph",
    "Token",
    "TokenKind",
    "ValenceViolation",
    "canonical_smiles",
    "canonicalize",
    "check_valence",
    "implicit_hydrogens",
    "parse",
    "parse_smiles",
    "simplify_brackets",
    "strip_atom_maps",
    "tokenize",
    "write_smiles",
]
