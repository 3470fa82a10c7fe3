"""OSC checks and topology diagnostics."""

from .osc import OscReport, check_osc, injectivity_modulus
from .separate import SeparatingCurve, separating_curve
from .topology import (CauchyReport, CellGraph, ConnectivityVerdict, LcProfile, PieceGraph,
                       WitnessResult, connecting_radius, connectivity_verdict, hausdorff_cauchy_limit,
                       lc_profile, minimax_sweep, non_lc_witness, piece_graph)
