"""Forward and inverse design of self-morphing printed bilayer plates.

A flat plate printed as two unidirectional layers deploys into a curved
(negative-Gaussian-curvature) shell when heated; this package predicts the
deployed midplane state from the print parameters, sweeps the printing-angle
design space, and inverts target surfaces into complete print plans.
"""

from .errors import (
    BelowTgError,
    GeometryError,
    InfeasibleTargetError,
    MaterialRangeError,
    OutOfRangeError,
    OverConstrainedError,
    PlateMorphError,
    SingularMapError,
    SingularSystemError,
    TopologyError,
    UnsupportedTargetError,
    ValidationError,
)
from .material import (
    ElasticConstants,
    MaterialCard,
    ProcessRecord,
    RecoveryPoint,
    card_from_dict,
    load_material_card,
    recovery_strains,
    reduced_stiffness,
)
from .laminate import (
    ABDMatrices,
    LayerSpec,
    Layup,
    MidplaneState,
    ThermalResultants,
    assemble_abd,
    bilayer,
    free_recovery_state,
    lamina_stresses,
    solve_free_recovery,
    thermal_resultants,
    transform_recovery,
    transform_stiffness,
)
from .designmap import (
    DesignMapGrid,
    ModeLabel,
    PrincipalCurvature,
    classify_mode,
    curvatures_from_principal,
    export_map_csv,
    gaussian_curvature,
    map_summary,
    principal_curvatures,
    render_map_svg,
    sweep_map,
)
from .torusgeom import (
    CurvatureField,
    FlattenedPatch,
    SurfaceMesh,
    TorusPatch,
    TorusSpec,
    estimate_curvatures,
    export_obj,
    fit_torus,
    flatten_patch,
    import_obj,
    quadratic_preview,
    sample_patch,
    torus_curvatures,
    torus_parameters,
    torus_point,
)
from .inverse import (
    Candidate,
    CurvatureTarget,
    FilterCriteria,
    PlanOptions,
    PrintPlan,
    TargetSurface,
    VerificationReport,
    analytic_target_from_state,
    analyze_target,
    curvature_target,
    filter_candidates,
    initial_dimensions,
    load_plan,
    load_target,
    plan_pipeline,
    save_plan,
    search_candidates,
    verify_plan,
)

__version__ = "0.1.0"
