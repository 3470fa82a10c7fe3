"""Markov iterated function systems: attractor approximation on voxel grids and topology diagnostics."""

__version__ = "0.1.0"

from .analysis import (check_osc, connectivity_verdict, hausdorff_cauchy_limit, lc_profile,  # noqa: E402
                       non_lc_witness, piece_graph, separating_curve)
from .attractor import AttractorApprox, grid_for, iterate_attractor  # noqa: E402
from .contractions import AffineMap, BilinearQuad, BoxSpec, MarkovIfs, PolygonSpec, ProductMap  # noqa: E402
from .errors import (CertificationError, DomainError, GeometryError, GuardError, InstanceError,  # noqa: E402
                     InvariantError, MarkovIfsError)
from .instances import load_instance, make_instance, save_instance  # noqa: E402
from .setrep import VoxelSet  # noqa: E402
from .symbolic import TransitionMatrix  # noqa: E402
