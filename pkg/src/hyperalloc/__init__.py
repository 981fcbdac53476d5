"""Subspace-scored task allocation over robot/fog/cloud networks."""

from .allocator import (
    IDLE_TASK,
    MAX_SCORE,
    MIN_LOSS,
    NO_CAPABLE_NODE,
    NON_PERTURBING,
    AllocationDecision,
    CandidateReport,
    ImpactReport,
    ScheduleEntry,
    WindowViolation,
    allocate,
    commit_decision,
    reallocation_loss,
    run_arrivals,
    schedule_impact,
)
from .delays import (
    DelaySum,
    ErlangDelay,
    ExponentialDelay,
    combine_delay_sums,
    delay_mean,
    delay_sum,
    delay_variance,
    exp_to_erlang_sum,
    sample_delay,
    substream,
)
from .errors import HyperallocError
from .graphs import (
    AlgorithmGraph,
    AlgorithmId,
    CycleDetected,
    ExecutionFlow,
    FlowExplosion,
    GraphError,
    SemiLattice,
    adjacency_powers,
    algorithm,
    build_graph,
    count_execution_flows,
    execution_flows,
    flow_critical_cost,
    flow_predecessors,
    lifted_vertices,
    max_flow_length,
    to_semilattice,
)
from .network import (
    Link,
    NetworkModel,
    NetworkError,
    NodeRef,
    RequestProfile,
    Route,
    Unreachable,
    com_t_max,
    com_t_pair,
    ict,
    round_trip_matrix,
    shortest_comm_path,
)
from .report import emit_report
from .runner import (
    EngineError,
    RunReport,
    inspect_flows,
    inspect_pi,
    inspect_routes,
    run,
)
from .scenario import (
    DuplicateDefinition,
    ParseError,
    ParseIssue,
    RunOptions,
    Scenario,
    ScenarioError,
    TaskSpec,
    UnresolvedReference,
    format_scenario,
    parse_scenario,
)
from .subspaces import (
    CapabilityState,
    CompatibilityTable,
    DegenerateRow,
    Subspace,
    SubspaceError,
    SubspaceScore,
    capital_pi,
    cmpt_score,
    combine_scores,
    communication_score,
    cplt_score,
    omega_update,
    overall_comm_bound,
    pi_init,
    pi_limit,
)

__version__ = "0.1.0"
