"""Formal concept analysis with neural embeddings.

Core pieces: formal contexts and their derivation operators, concept
enumeration with the covering relation and the canonical implication base,
an exact threshold network for the closure operator, closure2vec (a siamese
net for attribute sets) and object2vec / attribute2vec (word2vec over
concept extents).
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .context import (AttrSet, BitSet, ContextError, DimensionError, FormalContext, NominalTable, ObjSet,
                      ParseError, chd, closure_attrs, closure_objs, derive_attrs, derive_objs, dualize,
                      load_burmeister, load_context, save_burmeister, scale_nominal)
from .lattice import (Concept, ConceptLattice, Implication, canonical_base, covering_relation,
                      enumerate_concepts)

__all__ = [
    "AttrSet", "BitSet", "Concept", "ConceptLattice", "ContextError", "DimensionError", "FormalContext",
    "Implication", "NominalTable", "ObjSet", "ParseError", "__version__", "canonical_base", "chd",
    "closure_attrs", "closure_objs", "covering_relation", "derive_attrs", "derive_objs", "dualize",
    "enumerate_concepts", "load_burmeister", "load_context", "save_burmeister", "scale_nominal",
]
