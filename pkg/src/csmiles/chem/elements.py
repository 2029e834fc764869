"""Element tables used by the tokenizer, writer and valence checks."""

from __future__ import annotations

PERIODIC_SYMBOLS: frozenset[str] = frozenset(
    """
    H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni
    Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe
    Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg
    Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg
    Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og
    """.split()
)

# Atoms that may appear without brackets.
ORGANIC_SUBSET: frozenset[str] = frozenset({"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"})

# Elements that have a lowercase (aromatic) spelling.
AROMATIC_ELEMENTS: frozenset[str] = frozenset({"B", "C", "N", "O", "P", "S", "Se", "As"})

# Aromatic spellings accepted outside brackets.
BARE_AROMATIC: frozenset[str] = frozenset({"b", "c", "n", "o", "p", "s"})
