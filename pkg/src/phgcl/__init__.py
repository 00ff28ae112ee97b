"""Importance-driven graph contrastive learning with a dual-domain graph transformer."""

from phgcl.graph import Dataset, Graph, generate_synthetic, load_dataset, save_dataset, sparsify

__version__ = "0.1.0"

__all__ = ["Dataset", "Graph", "generate_synthetic", "load_dataset", "save_dataset", "sparsify"]
