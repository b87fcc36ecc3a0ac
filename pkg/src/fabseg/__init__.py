"""Functionality-aware mesh segmentation, classification, and styling."""

from .errors import (
    ClassificationError,
    CorpusError,
    EigenConvergenceError,
    FabsegError,
    GraphError,
    MeshParseError,
    MeshValidationError,
    RemeshError,
    SimilarityError,
    StyleError,
)
from .dualgraph import DualGraph, build_dual_graph, normalized_laplacian
from .eigen import Spectrum, eigendecompose
from .mesh import MeshTopology, TriangleMesh, build_topology, connected_components, submesh
from .meshio import load_mesh, parse_obj, parse_stl, save_mesh, write_obj
from .remesh import RemeshParams, remesh
from .segmentation import (
    SegmentationResult,
    SegmentParams,
    SweepPoint,
    predict_k,
    segment,
    stabilized_at,
    stability_sweep,
)
from .similarity import (
    MRG,
    MRGLevel,
    MuField,
    SegmentMesh,
    SimilarityScore,
    build_mrg,
    compute_mu,
    contextual_similarity,
    load_mrg,
    mrg_similarity,
    mrg_to_dict,
    save_mrg,
    segment_submesh,
)

__version__ = "0.1.0"
