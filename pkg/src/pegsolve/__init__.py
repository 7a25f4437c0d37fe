"""Graph pursuit-evasion games: exact no-exit equilibrium tables by
retrograde expansion, team and exit-matching heuristics, and a seeded
episode engine with reproducible metrics.

The retrograde solver runs on a compiled kernel when the extension is built
(``pegsolve.dp.BACKEND == "compiled"``) and falls back to a bit-identical
pure-Python implementation otherwise; set ``PEGSOLVE_PURE=1`` to force the
fallback.
"""

from .dp import (
    BACKEND,
    STEPS_INF,
    DpTable,
    bellman_residual_check,
    dp_evader_action,
    dp_pursuer_action,
    load_table,
    nash_value,
    save_table,
    solve_dp,
    value_iteration_oracle,
)
from .exits import (
    ExitMatchState,
    build_bipartite,
    heuristic_evader_action,
    heuristic_pursuer_action,
    match_exits,
    max_bipartite_matching,
    max_prefix_perfect_matching,
)
from .features import StateFeature, extract_feature, reconstruct_state
from .game import (
    GlobalState,
    PegSpec,
    closed_neighborhood,
    is_capture,
    is_escape,
    load_spec,
    make_spec,
    reward,
    state_index,
    state_unindex,
    step,
)
from .graph import (
    INF_DIST,
    ApspTable,
    Graph,
    compute_apsp,
    gen_grid,
    gen_scale_free,
    graph_to_text,
    parse_graph,
    parse_graph_with_exits,
)
from .grouping import (
    GroupedOracle,
    build_grouped_oracle,
    enumerate_groupings,
    grouped_evader_action,
    grouped_pursuer_action,
)
from .policies import (
    BestResponseReport,
    PolicyHandle,
    best_response_value,
    greedy_evader_action,
    random_action,
    sps_pursuer_action,
)
from .sim import (
    EpisodeResult,
    EvalReport,
    episode_seed,
    evaluate,
    run_episode,
    sample_initial_multi_exit,
    sample_initial_no_exit,
)

__version__ = "0.1.0"
