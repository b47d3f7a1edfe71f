"""Matrix-free cut finite element Poisson solver on Cartesian meshes.

The package solves -lap(u) = f on implicitly defined domains {phi > 0}
embedded in an axis-aligned background mesh.  Dirichlet conditions are
imposed weakly (Nitsche), cut-induced ill-conditioning is cured by a
ghost-penalty term whose face operator is applied as a Kronecker product
of precomputed 1D matrices, and all operator actions are matrix-free.
"""

from .tensor1d import (
    ReferenceElement1D,
    build_reference_element,
    gauss_lobatto_nodes,
    gauss_rule,
    ghost_matrix_1d,
    ghost_penalty_1d,
    jump_vector,
    mass_matrix_1d,
    patch_nodes,
)
from .sumfac import TensorField, apply_axis, cell_laplacian, kron_apply
from .geometry import (
    box_mesh,
    BallUnionLevelSet,
    CartesianMesh,
    CellClassification,
    DofMap,
    GhostFace,
    HalfSpaceLevelSet,
    Label,
    SphereLevelSet,
    build_dofmap,
    cell_weight,
    classify_cells,
    gather_face_patch,
    generate_balls,
    ghost_faces,
    load_balls,
    save_balls,
    scatter_add_face_patch,
)
from .cutquad import (
    CutCellQuadrature,
    cut_cell_quadrature,
    interior_quadrature,
    surface_quadrature,
)
from .operators import (
    OperatorContext,
    Parameters,
    apply_ghost_penalty,
    assemble_rhs,
    breakdown_report,
    build_context,
    cut_cell_apply,
    ghost_face_apply,
    reset_timers,
    vmult,
)
from .solver import (
    SolveReport,
    cg_solve,
    l2_error,
    manufactured_problem,
    radial_cosine_problem,
)

__version__ = "0.1.0"

__all__ = [
    "ReferenceElement1D",
    "build_reference_element",
    "gauss_lobatto_nodes",
    "gauss_rule",
    "ghost_matrix_1d",
    "ghost_penalty_1d",
    "jump_vector",
    "mass_matrix_1d",
    "patch_nodes",
    "TensorField",
    "apply_axis",
    "cell_laplacian",
    "kron_apply",
    "BallUnionLevelSet",
    "CartesianMesh",
    "CellClassification",
    "DofMap",
    "GhostFace",
    "HalfSpaceLevelSet",
    "Label",
    "SphereLevelSet",
    "box_mesh",
    "build_dofmap",
    "cell_weight",
    "classify_cells",
    "gather_face_patch",
    "generate_balls",
    "ghost_faces",
    "load_balls",
    "save_balls",
    "scatter_add_face_patch",
    "CutCellQuadrature",
    "cut_cell_quadrature",
    "interior_quadrature",
    "surface_quadrature",
    "OperatorContext",
    "Parameters",
    "apply_ghost_penalty",
    "assemble_rhs",
    "breakdown_report",
    "build_context",
    "cut_cell_apply",
    "ghost_face_apply",
    "reset_timers",
    "vmult",
    "SolveReport",
    "cg_solve",
    "l2_error",
    "manufactured_problem",
    "radial_cosine_problem",
    "__version__",
]
