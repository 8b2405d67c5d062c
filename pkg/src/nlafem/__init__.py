"""Adaptive finite elements for nonlinear Schrodinger-type eigenvalue problems
on 2D polygons, plus an exact-arithmetic radical-annihilator companion."""

__version__ = "1.0.0"

from .errors import (
    ClosureError,
    ConfigError,
    ConformityError,
    DimensionError,
    DomainError,
    EigenConvergenceError,
    GeometryError,
    LinearSolveError,
    NlafemError,
    OperatorError,
    ParseError,
    RankError,
    ScfConvergenceError,
    SizeError,
    SpaceTooSmall,
    WeightSingularError,
)
from .mesh import (
    DomainSpec,
    Mesh,
    create_initial_mesh,
    element_sizes,
    export_mesh,
    import_mesh,
    mesh_quality,
    refine,
    uniform_refine,
)
from .fem import (
    FESpace,
    assemble_stiffness,
    assemble_weighted_mass,
    build_space,
    interpolate,
    mass_matrix,
    norms,
    unit_stiffness,
)
from .physics import (
    N1Preset,
    Potential,
    ProblemSpec,
    density,
    energy,
    eval_n1,
    eval_potential,
    hartree_energy,
    hartree_potential,
    n1_antiderivative,
)
from .eigensolve import EigenResult, b_orthonormalize, solve_lowest
from .scf import DiscreteState, ScfOptions, apply_hamiltonian, assemble_hamiltonian, prolong, scf_solve
from .estimator import (
    AfemOptions,
    ConvergenceHistory,
    IndicatorField,
    afem_run,
    compute_indicators,
    global_estimate,
    local_indicator,
    mark_dorfler,
    mark_maximum,
)
from .radical import (
    FracPoly,
    MultiPoly,
    annihilator,
    eval_multipoly,
    frac_degree,
    logsum_witness,
    monomial_order,
    nonvanishing_witness,
    parse_multipoly,
    serialize_multipoly,
    verify_annihilation,
)
