"""Marked random connection model on random simplicial complexes: sampling,
q-percolation graphs, exploration and Monte Carlo estimation."""
from __future__ import annotations

__version__ = "0.1.0"

from .complex import Complex, build, count_faces, restrict  # noqa: E402
from .connection import (  # noqa: E402
    ConnectionFamily,
    MarkLaw,
    Profile,
    boolean_balls,
    cech,
    custom,
    diam_kernel,
    kappa,
    phi,
    verify_v1_v2,
    vietoris_rips,
)
from .geometry import CubeGrid, Window, cube_index, diam, window_for_radius  # noqa: E402
from .graphs import QGraph, components, down_graph, duality_check, event_B_r, up_graph  # noqa: E402
from .sampler import MarkedPoint, Realization, coordinates, sample  # noqa: E402

__all__ = [
    "__version__", "Complex", "build", "count_faces", "restrict", "ConnectionFamily", "MarkLaw", "Profile",
    "boolean_balls", "cech", "custom", "diam_kernel", "kappa", "phi", "verify_v1_v2", "vietoris_rips",
    "CubeGrid", "Window", "cube_index", "diam", "window_for_radius", "QGraph", "components", "down_graph",
    "duality_check", "event_B_r", "up_graph", "MarkedPoint", "Realization", "coordinates", "sample",
]
