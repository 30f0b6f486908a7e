"""Export torch GNN checkpoints and graph datasets to verifier interchange files."""

from .datasets import LoadedGraph, load_dataset, make_citation_dataset, make_molecule_dataset
from .export import (
    ExportJob,
    FORWARD_TOLERANCE,
    export_graph,
    export_model,
    file_semantics_forward,
    forward_equivalence_gap,
)
from .torch_models import MessagePassingGNN

__version__ = "0.1.0"
