"""Heterogeneous-graph attention policy for joint beamforming and antenna placement."""

from .graph import HetGraph, build_graph
from .model import GnnPolicy, PolicyOutput
from .train import TrainResult, composite_loss, train

__all__ = ["HetGraph", "build_graph", "GnnPolicy", "PolicyOutput", "TrainResult", "composite_loss", "train"]
