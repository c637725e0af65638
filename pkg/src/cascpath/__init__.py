"""Cascading-failure path search for DC-modeled power networks.

A batch simulator and library that enumerates probable cascading-failure
paths under massive correlated wind/load scenarios, with per-step power-flow
and re-dispatch computations accelerated by a line-status dictionary of
critical regions and rank-updated sensitivity matrices.
"""

from ._accel import NUMBA_ENABLED
from .casedata import (
    Bus,
    CaseData,
    CaseError,
    CaseParseError,
    CaseValidationError,
    Generator,
    Line,
    incidence_column,
    incidence_matrix,
    load_case,
    save_case,
)
from .dcpf import FlowVector, RelayOutcome, dc_power_flow, relay_fixed_point
from .dcopf import (
    DispatchProblem,
    DispatchSolution,
    LpCanonical,
    build_lp,
    build_lp_blocks,
    dump_lp,
    solve_baseline,
    solve_problem,
)
from .gsdf import (
    GsdfMatrix,
    IslandingError,
    SusceptanceSystem,
    build_gsdf,
    build_susceptance,
    island_partition,
    woodbury_update,
)
from .lsd import (
    CriticalRegion,
    Lsd,
    LsdEntry,
    affine_solve,
    lookup_or_build_gsdf,
    region_test,
    solve_dcopf_accelerated,
    state_key,
)
from .report import emit_timing_comparison, write_report
from .rts79 import rts79_case, rts79_hourly_profile, rts79_wind_case, rts79_wind_config
from .scenarios import (
    Scenario,
    WindModelConfig,
    empirical_correlation,
    export_scenarios,
    generate_scenarios,
    import_scenarios,
)
from .search import (
    CascadeEvent,
    CascadePath,
    SearchConfig,
    SearchContext,
    StudyReport,
    SystemState,
    expand_state,
    line_failure_probability,
    run_study,
    search_scenario,
)

__version__ = "0.1.0"
