"""Decomposed SMILES (C-SMILES), alignment maps and a copy-augmented
Transformer for template-free retrosynthesis at desk scale."""

__version__ = "0.1.0"
