"""Experiment families driven by a :class:`~diffgsp.config.ScenarioSpec`.

Each runner writes CSV files into an output directory and returns a list of
summary rows. All randomness is derived from seeds in the spec, so a run is
reproduced byte for byte from its manifest.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import sampling as smp
from .config import ScenarioSpec
from .diffusion import (
    CombinationMatrix,
    DiffusionConfig,
    Experiment,
    SequenceSignal,
    StaticSignal,
    TrackingSignal,
    metropolis_weights,
    run_simulation,
    to_db,
    write_trajectory_csv,
)
from .errors import (
    ConfigInvalid,
    ConnectivityRetryExhausted,
    GeometryInvalid,
    InvariantViolation,
    TooManyCombinations,
    UnstableH,
)
from .fixtures import FIXTURES, load_fixture
from .graph_core import (
    COMMUNICATION,
    FrequencySupport,
    Graph,
    build_graph,
    geometric_adjacency,
    load_edge_list,
    random_geometric_graph,
    spectral_basis,
)
from .protocol import distributed_greedy, write_trace_csv
from .theory import (
    build_theory,
    lyapunov_node_msds,
    spectral_radius,
    stability_report,
    transient_msd,
    write_node_theory_csv,
    write_transient_theory_csv,
)

STRATEGIES = ("maxdet", "maxlambdamin", "random", "exhaustive", "given")
_OBJECTIVE = {"maxdet": smp.MAX_DET, "maxlambdamin": smp.MAX_LAMBDA_MIN}
DEFAULT_HORIZON = 5000


# ---------------------------------------------------------------------------
# building blocks


def processing_graph(spec: ScenarioSpec) -> Graph:
    src = spec["graph.source"]
    if src == "fixture":
        return load_fixture(spec["graph.fixture"])
    if src == "file":
        return load_edge_list(spec["graph.path"])
    if src == "geometric":
        g, _ = random_geometric_graph(int(spec["graph.n_nodes"]), float(spec["graph.radius"]),
                                      int(spec["graph.seed"]))
        return g
    raise ConfigInvalid(f"graph.source {src!r} is not a plain graph source")


def communication_graph(spec: ScenarioSpec, processing: Graph) -> Graph:
    comm = spec["graph.communication"]
    if comm == "same":
        g = processing.with_role(COMMUNICATION)
    elif comm in FIXTURES:
        g = load_fixture(comm, role=COMMUNICATION)
    else:
        g = load_edge_list(comm, role=COMMUNICATION)
    if g.n_nodes != processing.n_nodes:
        raise ConfigInvalid("communication and processing graphs differ in size")
    return g


def combination(spec: ScenarioSpec, comm: Graph) -> CombinationMatrix:
    rule = spec["diffusion.combination"]
    if rule == "metropolis":
        return metropolis_weights(comm)
    raise ConfigInvalid(f"unknown combination rule {rule!r}")


def support_for(spec: ScenarioSpec, g: Graph) -> FrequencySupport:
    basis = spectral_basis(g)
    freqs = spec["signal.frequencies"]
    if freqs == "lowest":
        f = int(spec["signal.bandwidth"])
        if not 1 <= f <= g.n_nodes:
            raise ConfigInvalid(f"bandwidth {f} outside [1, {g.n_nodes}]")
        return basis.lowest(f)
    if not isinstance(freqs, list):
        raise ConfigInvalid("signal.frequencies must be 'lowest' or a list of indices")
    return basis.support(freqs)


def noise_variances(spec: ScenarioSpec, n: int, offset: int = 0) -> np.ndarray:
    lo, hi = float(spec["noise.variance_min"]), float(spec["noise.variance_max"])
    if lo < 0 or hi < lo:
        raise ConfigInvalid("noise variances need 0 <= variance_min <= variance_max")
    if hi == lo:
        return np.full(n, lo)
    return np.random.default_rng(int(spec["noise.seed"]) + offset).uniform(lo, hi, n)


def template_design(spec: ScenarioSpec, n: int, s2: np.ndarray) -> smp.SamplingDesign:
    p = float(spec["sampling.probability"])
    if not 0 < p <= 1:
        raise ConfigInvalid("sampling.probability must lie in (0, 1]")
    return smp.SamplingDesign(np.full(n, p), s2)


def select_nodes(strategy: str, support: FrequencySupport, template: smp.SamplingDesign, budget: int,
                 seed: int = 0, given=None, config: DiffusionConfig | None = None) -> list:
    """Expected sampling set of size ``budget`` under ``strategy``."""
    if strategy in _OBJECTIVE:
        return smp.greedy_select(smp.SelectionObjective(_OBJECTIVE[strategy]), support, template, budget)
    if strategy == "random":
        return list(smp.random_select(support.n_nodes, budget, seed))
    if strategy == "given":
        nodes = [int(i) for i in given or []]
        if len(nodes) != budget:
            raise ConfigInvalid("sampling.nodes must list exactly one set of the budget size")
        return nodes
    if strategy == "exhaustive":
        if config is None:
            raise ConfigInvalid("exhaustive selection needs a diffusion configuration")
        return list(exhaustive_msd_select(support, template, budget, config))
    raise ConfigInvalid(f"unknown sampling strategy {strategy!r}")


def design_for(template: smp.SamplingDesign, nodes, zero_nodes=()) -> smp.SamplingDesign:
    d = template.restricted_to(nodes)
    for k in zero_nodes:
        d = d.with_probability(int(k), 0.0)
    return d


def network_msd(support, design, config) -> float:
    """Theoretical steady-state network MSD; ``inf`` when unstable."""
    if not design.expected_set:
        return math.inf
    try:
        return float(lyapunov_node_msds(build_theory(support, design, config)).sum())
    except UnstableH:
        return math.inf


def exhaustive_msd_select(support, template, budget, config: DiffusionConfig) -> tuple:
    """Subset of size ``budget`` minimising the theoretical network MSD."""
    n = support.n_nodes
    if math.comb(n, budget) > smp.MAX_COMBINATIONS:
        raise TooManyCombinations(f"C({n}, {budget}) exceeds {smp.MAX_COMBINATIONS}")
    return smp.exhaustive_select(lambda s: -network_msd(support, template.restricted_to(s), config), n, budget)


def settle_iterations(b_radius: float, tol: float, fallback: int = DEFAULT_HORIZON) -> int:
    """Iterations for ``rho(B)^k`` to fall below ``tol``."""
    if not 0 < b_radius < 1:
        return fallback
    return int(math.ceil(math.log(tol) / math.log(b_radius)))


def _step_sizes(spec: ScenarioSpec) -> list:
    mus = spec["diffusion.step_sizes"]
    if not mus or any((not isinstance(m, (int, float))) or m <= 0 for m in mus):
        raise ConfigInvalid("diffusion.step_sizes must be a nonempty list of positive numbers")
    return [float(m) for m in mus]


def _budgets(spec: ScenarioSpec, n: int) -> list:
    budgets = [int(b) for b in spec["sampling.budgets"]]
    if not budgets or any(not 1 <= b <= n for b in budgets):
        raise ConfigInvalid(f"sampling.budgets must lie in [1, {n}]")
    return budgets


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _tag(budget: int, mu: float | None = None) -> str:
    return f"M{budget}" if mu is None else f"M{budget}_mu{mu:g}"


@dataclass
class Setup:
    """Objects shared by every runner."""

    graph: Graph
    comm: Graph
    support: FrequencySupport
    w: CombinationMatrix
    s2: np.ndarray
    template: smp.SamplingDesign


def setup(spec: ScenarioSpec) -> Setup:
    g = processing_graph(spec)
    comm = communication_graph(spec, g)
    support = support_for(spec, g)
    s2 = noise_variances(spec, g.n_nodes)
    return Setup(g, comm, support, combination(spec, comm), s2, template_design(spec, g.n_nodes, s2))


def _static_truth(spec: ScenarioSpec, support: FrequencySupport) -> np.ndarray:
    rng = np.random.default_rng(int(spec["signal.coefficient_seed"]))
    return rng.standard_normal(support.bandwidth)


def _selection(spec, st: Setup, budget: int) -> list:
    cfg = DiffusionConfig(_step_sizes(spec)[0], st.w, spec["diffusion.mode"])
    return select_nodes(spec["sampling.strategy"], st.support, st.template, budget,
                        int(spec["sampling.random_seed"]), spec["sampling.nodes"], cfg)


def _write_selection(out: Path, spec, st: Setup, order: list, budget: int) -> None:
    kind = _OBJECTIVE.get(spec["sampling.strategy"], smp.MAX_DET)
    vals = smp.selection_path_values(smp.SelectionObjective(kind), st.support, st.template, order)
    smp.write_selection_csv(out / f"selection_{_tag(budget)}.csv", order, vals)


# ---------------------------------------------------------------------------
# runners


def run_convergence(spec: ScenarioSpec, out: Path) -> list:
    """Noise-free decay curves for each budget."""
    st = setup(spec)
    s_o = _static_truth(spec, st.support)
    x = st.support.u_f @ s_o
    horizon = DEFAULT_HORIZON if spec["run.horizon"] == "auto" else int(spec["run.horizon"])
    rows = []
    for budget in _budgets(spec, st.graph.n_nodes):
        order = _selection(spec, st, budget)
        _write_selection(out, spec, st, order, budget)
        design = design_for(st.template, order, spec["sampling.zero_probability_nodes"])
        ok_cond, norm = smp.reconstruction_condition(st.support, design.expected_set)
        for mu in _step_sizes(spec):
            cfg = DiffusionConfig(mu, st.w, spec["diffusion.mode"])
            res = run_simulation(Experiment(st.support, design, cfg, StaticSignal(x), horizon,
                                            init=spec["run.init"]),
                                 int(spec["run.replicas"]), int(spec["run.seed"]))
            write_trajectory_csv(out / f"trajectory_{_tag(budget, mu)}.csv", res)
            mse = res.mean_squared_error
            ratio = float(mse[-1] / mse[0]) if mse[0] > 0 else float("nan")
            rows.append([budget, mu, ok_cond, norm, ratio, ratio < 1e-10])
    _write_rows(out / "summary.csv",
                ["budget", "step_size", "sampling_condition", "sampling_condition_norm", "final_over_initial", "converged"],
                rows)
    return rows


def run_msd_validate(spec: ScenarioSpec, out: Path) -> list:
    """Simulated steady-state MSD next to its theoretical value."""
    st = setup(spec)
    x = st.support.u_f @ _static_truth(spec, st.support)
    rows = []
    for budget in _budgets(spec, st.graph.n_nodes):
        order = _selection(spec, st, budget)
        _write_selection(out, spec, st, order, budget)
        design = design_for(st.template, order, spec["sampling.zero_probability_nodes"])
        for mu in _step_sizes(spec):
            cfg = DiffusionConfig(mu, st.w, spec["diffusion.mode"])
            model = build_theory(st.support, design, cfg)
            theory_nodes = lyapunov_node_msds(model)
            tag = _tag(budget, mu)
            write_node_theory_csv(out / f"node_theory_{tag}.csv", theory_nodes)
            burn = _burn_in(spec, model)
            window = int(spec["run.window"])
            horizon = burn + window - 1 if spec["run.horizon"] == "auto" else int(spec["run.horizon"])
            res = run_simulation(Experiment(st.support, design, cfg, StaticSignal(x), horizon,
                                            init=spec["run.init"], window_start=min(burn, horizon)),
                                 int(spec["run.replicas"]), int(spec["run.seed"]))
            write_trajectory_csv(out / f"trajectory_{tag}.csv", res)
            sim_nodes = res.node_steady_state()
            _write_rows(out / f"node_sim_{tag}.csv", ["node", "msd_sim"], enumerate(sim_nodes))
            sim, th = res.steady_state(), float(theory_nodes.sum())
            rows.append([budget, mu, burn, to_db(sim), to_db(th), to_db(sim) - to_db(th),
                         float(np.max(np.abs(to_db(sim_nodes) - to_db(theory_nodes)))), res.n_diverged])
    _write_rows(out / "summary.csv",
                ["budget", "step_size", "burn_in", "msd_sim_db", "msd_theory_db", "gap_db",
                 "max_node_gap_db", "diverged"], rows)
    return rows


def _burn_in(spec: ScenarioSpec, model) -> int:
    if spec["run.burn_in"] != "auto":
        return int(spec["run.burn_in"])
    return settle_iterations(spectral_radius(model.b_matrix), float(spec["run.settle_tolerance"]))


def run_transient(spec: ScenarioSpec, out: Path) -> list:
    """Simulated MSD trajectory next to the transient prediction."""
    st = setup(spec)
    s_o = _static_truth(spec, st.support)
    x = st.support.u_f @ s_o
    if spec["run.init"] != "zero":
        raise ConfigInvalid("the transient scenario predicts from the zero initial state")
    e0 = np.tile(-s_o, st.graph.n_nodes)
    rows = []
    for budget in _budgets(spec, st.graph.n_nodes):
        order = _selection(spec, st, budget)
        design = design_for(st.template, order, spec["sampling.zero_probability_nodes"])
        for mu in _step_sizes(spec):
            cfg = DiffusionConfig(mu, st.w, spec["diffusion.mode"])
            model = build_theory(st.support, design, cfg)
            horizon = (settle_iterations(spectral_radius(model.b_matrix), float(spec["run.settle_tolerance"]))
                       if spec["run.horizon"] == "auto" else int(spec["run.horizon"]))
            theory = transient_msd(model, horizon, e0)
            tag = _tag(budget, mu)
            write_transient_theory_csv(out / f"transient_theory_{tag}.csv", theory)
            res = run_simulation(Experiment(st.support, design, cfg, StaticSignal(x), horizon),
                                 int(spec["run.replicas"]), int(spec["run.seed"]))
            write_trajectory_csv(out / f"trajectory_{tag}.csv", res)
            gap = np.abs(to_db(res.mean_squared_error) - to_db(theory))
            rows.append([budget, mu, horizon, float(np.max(gap[10:])) if horizon > 10 else float("nan")])
    _write_rows(out / "summary.csv", ["budget", "step_size", "horizon", "max_gap_db_after_10"], rows)
    return rows


def run_tracking(spec: ScenarioSpec, out: Path) -> list:
    """Tracking of an AR-driven bandlimited signal; per-node traces of replica 0."""
    st = setup(spec)
    src = TrackingSignal(st.support, float(spec["signal.theta"]), float(spec["signal.f_o"]),
                         float(spec["signal.noise_scale"]))
    horizon = DEFAULT_HORIZON if spec["run.horizon"] == "auto" else int(spec["run.horizon"])
    burn = 0 if spec["run.burn_in"] == "auto" else int(spec["run.burn_in"])
    rows = []
    for budget in _budgets(spec, st.graph.n_nodes):
        order = _selection(spec, st, budget)
        _write_selection(out, spec, st, order, budget)
        design = design_for(st.template, order, spec["sampling.zero_probability_nodes"])
        for mu in _step_sizes(spec):
            cfg = DiffusionConfig(mu, st.w, spec["diffusion.mode"])
            res = run_simulation(Experiment(st.support, design, cfg, src, horizon, window_start=burn,
                                            record_trace=True),
                                 int(spec["run.replicas"]), int(spec["run.seed"]))
            tag = _tag(budget, mu)
            write_trajectory_csv(out / f"trajectory_{tag}.csv", res)
            n = st.graph.n_nodes
            head = ["iteration"] + [f"estimate_{i}" for i in range(n)] + [f"truth_{i}" for i in range(n)]
            _write_rows(out / f"tracking_trace_{tag}.csv", head,
                        ([t, *res.trace_estimate[t], *res.trace_truth[t]] for t in range(horizon + 1)))
            err = res.node_steady_state()
            for i in range(n):
                rows.append([budget, mu, i, float(design.probabilities[i]), float(err[i]), to_db(err[i])])
    _write_rows(out / "summary.csv",
                ["budget", "step_size", "node", "probability", "tracking_error", "tracking_error_db"], rows)
    return rows


def compare_strategies(spec: ScenarioSpec, out: Path | None = None) -> list:
    """Mean theoretical steady-state MSD per (strategy, budget) over the seed set.

    Seed ``k`` redraws the noise variances (``noise.seed + k``) and, for
    Random, the subset (``sampling.random_seed + k``). Unstable designs count
    as infinite MSD.
    """
    g = processing_graph(spec)
    comm = communication_graph(spec, g)
    support = support_for(spec, g)
    w = combination(spec, comm)
    cfg = DiffusionConfig(_step_sizes(spec)[0], w, spec["diffusion.mode"])
    strategies = list(spec["compare.strategies"])
    bad = [s for s in strategies if s not in ("maxdet", "maxlambdamin", "random", "exhaustive")]
    if bad:
        raise ConfigInvalid(f"unknown strategies {bad}")
    budgets = _budgets(spec, g.n_nodes)
    if "exhaustive" in strategies:
        for b in budgets:
            if math.comb(g.n_nodes, b) > smp.MAX_COMBINATIONS:
                raise TooManyCombinations(f"C({g.n_nodes}, {b}) exceeds {smp.MAX_COMBINATIONS}")
    n_seeds = int(spec["compare.seeds"])
    acc = {(s, b): [] for s in strategies for b in budgets}
    recon = {(s, b): 0 for s in strategies for b in budgets}
    for k in range(n_seeds):
        template = template_design(spec, g.n_nodes, noise_variances(spec, g.n_nodes, offset=k))
        for b in budgets:
            for s in strategies:
                if s == "exhaustive":
                    nodes = exhaustive_msd_select(support, template, b, cfg)
                else:
                    nodes = select_nodes(s, support, template, b, int(spec["sampling.random_seed"]) + k)
                design = template.restricted_to(nodes)
                ok_cond, _ = smp.reconstruction_condition(support, nodes)
                recon[(s, b)] += ok_cond
                acc[(s, b)].append(network_msd(support, design, cfg))
    rows = []
    for s in strategies:
        for b in budgets:
            vals = np.array(acc[(s, b)])
            mean = float(vals.mean())
            rows.append([s, b, mean, to_db(mean), int(np.sum(~np.isfinite(vals))),
                         recon[(s, b)] / n_seeds])
    if out is not None:
        _write_rows(out / "compare.csv",
                    ["strategy", "budget", "msd_mean", "msd_mean_db", "n_unstable", "reconstructing_fraction"],
                    rows)
    return rows


# ---------------------------------------------------------------------------
# spectrum cartography


@dataclass
class PsdScenario:
    graph: Graph
    positions: np.ndarray
    radius: float
    pu_positions: np.ndarray
    schedule: np.ndarray        # (phases, n_pus) on/off
    maps: np.ndarray            # (phases, n_raps) noise-free received power
    noise_floor: float
    detector_samples: int
    switch_period: int

    @property
    def signal(self) -> np.ndarray:
        """Energy-detector mean of the first phase: received power plus noise floor."""
        return self.maps[0] + self.noise_floor

    @property
    def noise_variances(self) -> np.ndarray:
        """Variance of a ``K``-sample energy estimate of the first phase."""
        return self.signal ** 2 / self.detector_samples

    def truth(self, n: int) -> np.ndarray:
        phase = min(n // self.switch_period, self.maps.shape[0] - 1)
        return self.maps[phase] + self.noise_floor


def received_power(rap_positions, pu_positions, active, tx_power, exponent=2.0, d0=1.0) -> np.ndarray:
    """Free-space received power summed over active transmitters, ``P (d0/d)^a``."""
    p = np.zeros(len(rap_positions))
    for pos, on in zip(pu_positions, active):
        if on:
            d = np.maximum(np.linalg.norm(rap_positions - pos, axis=1), d0)
            p += tx_power * (d0 / d) ** exponent
    return p


def generate_psd_scenario(spec: ScenarioSpec, seed: int | None = None) -> PsdScenario:
    side = float(spec["psd.side"])
    n_raps, n_pus = int(spec["psd.n_raps"]), int(spec["psd.n_pus"])
    tx, samples = float(spec["psd.tx_power"]), int(spec["psd.detector_samples"])
    floor = float(spec["psd.detector_noise"])
    grid = sorted(float(r) for r in spec["psd.radius_grid"])
    if side <= 0 or n_raps < 2 or n_pus < 0 or tx < 0 or samples < 1 or floor < 0:
        raise GeometryInvalid("PSD scenario needs positive geometry and detector parameters")
    if not grid or grid[0] <= 0 or float(spec["psd.reference_distance"]) <= 0:
        raise GeometryInvalid("radius grid and reference distance must be positive")
    if int(spec["psd.phases"]) < 1 or int(spec["psd.switch_period"]) < 1:
        raise GeometryInvalid("need at least one phase of positive length")
    rng = np.random.default_rng(int(spec["psd.seed"]) if seed is None else seed)
    for _ in range(int(spec["psd.max_retries"])):
        pos = rng.uniform(0.0, side, size=(n_raps, 2))
        for r in grid:
            g = build_graph(geometric_adjacency(pos, r))
            if g.connected:
                break
        else:
            continue
        break
    else:
        raise ConnectivityRetryExhausted(f"no connected RAP layout in {spec['psd.max_retries']} draws")
    pus = rng.uniform(0.0, side, size=(n_pus, 2))
    phases = int(spec["psd.phases"])
    schedule = np.ones((phases, n_pus), dtype=bool)
    for k in range(1, phases):
        schedule[k] = schedule[k - 1]
        if n_pus:
            schedule[k, rng.integers(n_pus)] ^= True
    maps = np.array([received_power(pos, pus, schedule[k], tx, float(spec["psd.pathloss_exponent"]),
                                    float(spec["psd.reference_distance"])) for k in range(phases)])
    if np.any(maps < 0):
        raise InvariantViolation("received power map has negative entries")
    return PsdScenario(g, pos, r, pus, schedule, maps, floor, samples,
                       int(spec["psd.switch_period"]))


def run_psd(spec: ScenarioSpec, out: Path) -> list:
    """Online cartography of a switching PU power map."""
    sc = generate_psd_scenario(spec)
    g = sc.graph
    f = int(spec["signal.bandwidth"])
    support = spectral_basis(g).lowest(f)
    w = metropolis_weights(g.with_role(COMMUNICATION))
    template = smp.SamplingDesign(np.full(g.n_nodes, float(spec["sampling.probability"])), sc.noise_variances)
    horizon = (sc.switch_period * sc.maps.shape[0] - 1 if spec["run.horizon"] == "auto"
               else int(spec["run.horizon"]))
    src = SequenceSignal(sc.truth)
    truth_energy = np.array([float(np.sum(sc.truth(t) ** 2)) for t in range(horizon + 1)])
    rows = []
    _write_rows(out / "psd_layout.csv",
                ["node", "x", "y"] + [f"power_phase_{k}" for k in range(sc.maps.shape[0])],
                ([i, *sc.positions[i], *sc.maps[:, i]] for i in range(g.n_nodes)))
    _write_rows(out / "psd_sources.csv", ["pu", "x", "y"] + [f"on_phase_{k}" for k in range(sc.maps.shape[0])],
                ([j, *sc.pu_positions[j], *sc.schedule[:, j]] for j in range(len(sc.pu_positions))))
    for budget in _budgets(spec, g.n_nodes):
        order = select_nodes(spec["sampling.strategy"], support, template, budget,
                             int(spec["sampling.random_seed"]), spec["sampling.nodes"],
                             DiffusionConfig(_step_sizes(spec)[0], w, spec["diffusion.mode"]))
        design = template.restricted_to(order)
        for mu in _step_sizes(spec):
            cfg = DiffusionConfig(mu, w, spec["diffusion.mode"])
            res = run_simulation(Experiment(support, design, cfg, src, horizon), int(spec["run.replicas"]),
                                 int(spec["run.seed"]))
            tag = _tag(budget, mu)
            write_trajectory_csv(out / f"trajectory_{tag}.csv", res)
            nmsd = res.mean_squared_error / truth_energy
            _write_rows(out / f"nmsd_{tag}.csv", ["iteration", "nmsd", "nmsd_db"],
                        ([t, nmsd[t], to_db(nmsd[t])] for t in range(horizon + 1)))
            ends = [min((k + 1) * sc.switch_period - 1, horizon) for k in range(sc.maps.shape[0])]
            for k, t in enumerate(ends):
                rows.append([budget, mu, k, t, nmsd[t], to_db(nmsd[t])])
    _write_rows(out / "summary.csv", ["budget", "step_size", "phase", "iteration", "nmsd", "nmsd_db"], rows)
    return rows


RUNNERS = {
    "convergence": run_convergence,
    "msd-validate": run_msd_validate,
    "transient": run_transient,
    "tracking": run_tracking,
    "compare": compare_strategies,
    "psd": run_psd,
}


def run_scenario(spec: ScenarioSpec, out: Path) -> list:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[spec.kind](spec, out)


# ---------------------------------------------------------------------------
# selection and theory reports


def run_selection(spec: ScenarioSpec, out: Path) -> list:
    """Centralized greedy selection next to the message-level protocol."""
    st = setup(spec)
    strategy = spec["sampling.strategy"]
    if strategy not in _OBJECTIVE:
        raise ConfigInvalid("protocol selection needs the maxdet or maxlambdamin strategy")
    obj = smp.SelectionObjective(_OBJECTIVE[strategy])
    rows = []
    for budget in _budgets(spec, st.graph.n_nodes):
        central = smp.greedy_select(obj, st.support, st.template, budget)
        trace = distributed_greedy(obj, st.support, st.template, budget, st.comm)
        if trace.selected != central:
            raise InvariantViolation(f"protocol picked {trace.selected}, centralized greedy {central}")
        bound = trace.message_bound(st.support.bandwidth)
        if int(trace.messages_per_node.max()) > bound:
            raise InvariantViolation("per-node message count exceeds its worst-case bound")
        _write_selection(out, spec, st, central, budget)
        write_trace_csv(out / f"protocol_trace_{_tag(budget)}.csv", trace)
        rows.append([budget, trace.diameter, trace.messages_total, int(trace.messages_per_node.max()), bound])
    _write_rows(out / "selection_summary.csv",
                ["budget", "diameter", "messages_total", "messages_max_per_node", "per_node_bound"], rows)
    return rows


def run_theory(spec: ScenarioSpec, out: Path) -> list:
    """Stability report and steady-state predictions per (budget, step size)."""
    st = setup(spec)
    rows = []
    for budget in _budgets(spec, st.graph.n_nodes):
        order = _selection(spec, st, budget)
        design = design_for(st.template, order, spec["sampling.zero_probability_nodes"])
        for mu in _step_sizes(spec):
            cfg = DiffusionConfig(mu, st.w, spec["diffusion.mode"])
            model = build_theory(st.support, design, cfg)
            rep = stability_report(model, st.support, design, cfg)
            try:
                nodes = lyapunov_node_msds(model)
                net = float(nodes.sum())
                write_node_theory_csv(out / f"node_theory_{_tag(budget, mu)}.csv", nodes)
            except UnstableH:
                net = math.inf
            rows.append([budget, mu, rep.b_spectral_radius, rep.step_size_bound, rep.step_size_bound_ok,
                         rep.sampling_condition_ok, rep.sampling_condition_norm, rep.stable, net, to_db(net)])
    _write_rows(out / "stability.csv",
                ["budget", "step_size", "b_spectral_radius", "step_size_bound", "step_size_bound_ok",
                 "sampling_condition_ok", "sampling_condition_norm", "stable", "msd_theory", "msd_theory_db"], rows)
    return rows
