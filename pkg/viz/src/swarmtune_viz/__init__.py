"""Figures for swarm-controller optimization exports."""

from .bundle import VizBundle
from .embedding import compute_embedding, embed_and_panel
from .traces import traceplots
from .training import training_figures

__version__ = "0.1.0"
