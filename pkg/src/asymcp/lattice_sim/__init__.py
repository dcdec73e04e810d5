from .engine import (
    block_params,
    run_block_batch,
    run_block_experiment,
    run_single_source,
    run_single_source_batch,
    simulate_raw,
    single_source_arrays,
)
from .model import (
    ASYMPTOMATIC,
    HEALTHY,
    INFINITY,
    SYMPTOMATIC,
    BlockGeometry,
    BlockOutcome,
    Boundary,
    Configuration,
    Lattice,
    RunSummary,
    SimParams,
    apply_closure,
    init_state,
)
from .oracle import OracleResult, exact_small_lattice_oracle
from .step import ABSORBED, StepEvent, gillespie_step
