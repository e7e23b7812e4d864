"""Numerical toolkit for two-variable matrix quadratic pencils.

The package decides positivity and Gram-matrix factorability of Hermitian
pencils quadratic in two integer (or real) arguments, builds the completely
positive / merely positive contrast through Choi matrices of maps on a
six-dimensional symmetric matrix space, constructs an explicit pencil whose
hat stays unfactorable for every admissible parameter choice, realizes
pencils as weighted shift pairs on a truncated integer lattice, and models
the commuting Jordan-type pairs whose hereditary powers reproduce a pencil
exactly.
"""

from .matrices import (
    DEFAULT_TOL,
    EigenConvergenceError,
    IndefiniteMatrixError,
    PsdVerdict,
    as_hermitian,
    as_matrix,
    eig_hermitian,
    gram_factor,
    inv_sqrt,
    matrix_from_json,
    matrix_to_json,
    psd_check,
    weighted_adjoint,
)
from .pencils import (
    FactorTriple,
    FeasibilityOutcome,
    HatParams,
    PositivityVerdict,
    QuadraticPencil,
    build_counterexample,
    evaluate,
    factor_feasibility,
    feasibility_to_json,
    gram_to_factors,
    hat,
    monicize,
    pencil_from_factors,
    pencil_from_json,
    pencil_to_json,
    positivity_check,
    random_factor_triple,
    suggest_cd,
    verify_factorization,
)
from .cpmaps import (
    CpVerdict,
    LinearMapSym3,
    PositivitySample,
    SymBasis,
    apply,
    choi_map,
    choi_matrix,
    is_cp,
    is_positive_sampled,
    kraus_from_choi,
    map_from_json,
    map_to_json,
    pencil_from_map,
    sym_basis,
)
from .jordan import (
    CommutingUnitaryPair,
    JointSpectrum,
    JordanPair,
    MembershipReport,
    apply_holomorphic,
    build_jordan_pair,
    class_membership,
    fit_pencil,
    hereditary_value,
    joint_eigenvalues,
    jordan_pair_from_json,
    jordan_pair_to_json,
    membership_to_json,
    random_commuting_unitaries,
    sjordan_exp_check,
)
from .shiftspace import (
    LatticeVector,
    ShiftReport,
    ShiftSpace,
    SiteCheck,
    apply_shift,
    build,
    dense_shifts,
    fit_pencil_interior,
    hereditary_value_lattice,
    lattice_inner,
    shift_report_to_json,
    shift_space_config_from_json,
    shift_space_config_to_json,
    verify_3isometry,
    verify_pencil_transfer,
)

__version__ = "0.1.0"
