"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into an "acceptance criteria" section at the end
of the pytest run.
"""
import csv
import filecmp
import math
from pathlib import Path

import numpy as np
import pytest

from diffgsp import cli
from diffgsp.config import load_spec
from diffgsp.diffusion import (
    DiffusionConfig,
    Experiment,
    StaticSignal,
    metropolis_weights,
    run_simulation,
    step_size_bound,
)
from diffgsp.graph_core import diameter, random_connected_graph, spectral_basis
from diffgsp.protocol import distributed_greedy
from diffgsp.sampling import (
    MAX_DET,
    MAX_LAMBDA_MIN,
    SamplingDesign,
    SelectionObjective,
    exhaustive_select,
    greedy_select,
    objective_value,
    reconstruction_condition,
)
from diffgsp.scenarios import compare_strategies, run_scenario
from diffgsp.theory import (
    apply_H,
    build_H_explicit,
    build_theory,
    h_spectral_radius,
    spectral_radius,
    steady_state_msd,
    vec,
)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_criterion_01_noise_free_reconstruction(tmp_path, criterion):
    spec = load_spec(SCENARIOS / "convergence.cfg")
    run_scenario(spec, tmp_path)
    ratios = {int(r["budget"]): float(r["final_over_initial"]) for r in _read(tmp_path / "summary.csv")}
    traj3 = np.array([float(r["mean_sq_error"]) for r in _read(tmp_path / "trajectory_M3_mu0.5.csv")])
    floor3 = float(traj3.min() / traj3[0])
    ok = all(ratios[b] < 1e-10 for b in (5, 10, 15)) and floor3 > 0.1
    detail = ", ".join(f"|S|={b}: {ratios[b]:.1e}" for b in (5, 10, 15)) + f"; |S|=3 min ratio {floor3:.3f}"
    assert criterion(1, ok, detail), detail


def test_criterion_02_steady_state_theory_vs_simulation(tmp_path, criterion):
    base = load_spec(SCENARIOS / "msd_validate.cfg").with_overrides(
        sampling__budgets=[10], diffusion__step_sizes=[0.1, 0.5], run__replicas=200, run__window=500)
    rows = []
    for p in (0.5, 0.8):
        out = tmp_path / f"p{p}"
        rows += [(p, *r) for r in run_scenario(base.with_overrides(sampling__probability=p), out)]
    net = max(abs(r[6]) for r in rows)
    node = max(r[7] for r in rows)
    ok = net <= 1.0 and node <= 1.5 and all(r[8] == 0 for r in rows)
    detail = f"max network gap {net:.3f} dB (<= 1), max node gap {node:.3f} dB (<= 1.5) over 4 (p, mu) pairs"
    assert criterion(2, ok, detail), detail


def test_criterion_03_transient_prediction(tmp_path, criterion):
    spec = load_spec(SCENARIOS / "transient.cfg")
    rows = run_scenario(spec, tmp_path)
    gaps = {r[1]: r[3] for r in rows}
    ok = len(gaps) == 2 and all(g <= 2.0 for g in gaps.values())
    detail = ", ".join(f"mu={mu:g}: max gap {g:.3f} dB" for mu, g in gaps.items()) + " (<= 2 after n=10)"
    assert criterion(3, ok, detail), detail


def _small_theory_instance(rng):
    n = int(rng.integers(2, 7))
    f = int(rng.integers(1, min(n, 12 // n) + 1))
    g = random_connected_graph(n, rng)
    sup = spectral_basis(g).support(sorted(int(i) for i in rng.choice(n, f, replace=False)))
    design = SamplingDesign(rng.uniform(0.1, 1, n), rng.uniform(0, 0.1, n))
    cfg = DiffusionConfig(rng.uniform(0.05, 0.5, n), metropolis_weights(g))
    return build_theory(sup, design, cfg)


def test_criterion_04_h_operator_oracle(criterion):
    rng = np.random.default_rng(2024)
    worst_h, worst_msd, checked = 0.0, 0.0, 0
    for _ in range(20):
        m = _small_theory_instance(rng)
        assert m.dim <= 12
        s = rng.standard_normal((m.dim, m.dim))
        s = s + s.T
        worst_h = max(worst_h, float(np.abs(vec(apply_H(m, s)) - build_H_explicit(m) @ vec(s)).max()))
        a = steady_state_msd(m, method="explicit")
        b = steady_state_msd(m, method="iterative")
        worst_msd = max(worst_msd, abs(a - b) / abs(a))
        checked += 1
    ok = worst_h <= 1e-10 and worst_msd <= 1e-9
    detail = f"{checked} instances: max |H vec - apply_H| {worst_h:.1e} (<= 1e-10), " \
             f"explicit vs iterative {worst_msd:.1e} rel (<= 1e-9)"
    assert criterion(4, ok, detail), detail


def _stability_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    f = int(rng.integers(1, 4))
    g = random_connected_graph(n, rng)
    sup = spectral_basis(g).lowest(f)
    k = int(rng.integers(f, n + 1))
    members = rng.choice(n, k, replace=False)
    design = SamplingDesign.from_set(n, members, rng.uniform(0.2, 1, n), rng.uniform(0, 0.1, n))
    # step size drawn uniformly below the bound
    mu = float(rng.uniform(0, 1) * step_size_bound(sup, design))
    cfg = DiffusionConfig(mu, metropolis_weights(g))
    return sup, design, cfg, members


def test_criterion_05_stability_consistency(criterion):
    b_violations, unbounded, h_divergent, eligible = [], [], [], 0
    for seed in range(50):
        sup, design, cfg, members = _stability_instance(seed)
        ok_cond, _ = reconstruction_condition(sup, members)
        m = build_theory(sup, design, cfg)
        rho_b = spectral_radius(m.b_matrix)
        rho_h = h_spectral_radius(m)
        x = sup.u_f @ np.random.default_rng(seed).standard_normal(sup.bandwidth)
        res = run_simulation(Experiment(sup, design, cfg, StaticSignal(x), 3000), 5, seed)
        if ok_cond:
            eligible += 1
            if rho_b >= 1.0:
                b_violations.append(seed)
            if res.n_diverged:
                unbounded.append(seed)
        if rho_h < 1.0 and res.n_diverged:
            h_divergent.append(seed)
    ok = not b_violations and not unbounded and not h_divergent
    detail = (f"{eligible}/50 instances meet the sampling condition with mu below the bound: "
              f"rho(B) >= 1 on {len(b_violations)}, divergent on {len(unbounded)}; "
              f"divergent with rho(H) < 1: {len(h_divergent)}")
    assert criterion(5, ok, detail), detail


def test_criterion_06_protocol_equivalence(criterion):
    mismatches, round_breaches, message_breaches, runs = 0, 0, 0, 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 16))
        f = int(rng.integers(1, min(n, 5) + 1))
        budget = int(rng.integers(1, n + 1))
        sup = spectral_basis(random_connected_graph(n, rng)).lowest(f)
        comm = random_connected_graph(n, rng, edge_prob=0.15, role="communication")
        design = SamplingDesign(rng.uniform(0.1, 1, n), rng.uniform(0, 0.1, n))
        d = diameter(comm)
        for kind in (MAX_DET, MAX_LAMBDA_MIN):
            obj = SelectionObjective(kind)
            trace = distributed_greedy(obj, sup, design, budget, comm)
            runs += 1
            mismatches += trace.selected != greedy_select(obj, sup, design, budget)
            round_breaches += any(c > d or fl > d for c, fl in trace.rounds_per_pick)
            message_breaches += int(trace.messages_per_node.max()) > budget * d * (1 + 2 * f)
    ok = mismatches == round_breaches == message_breaches == 0
    detail = f"{runs} runs on 100 instances: {mismatches} mismatches, {round_breaches} round-bound " \
             f"breaches, {message_breaches} message-bound breaches"
    assert criterion(6, ok, detail), detail


def test_criterion_07_greedy_quality(criterion):
    obj = SelectionObjective(MAX_DET)
    below, instances, mono, submod, checks = 0, 0, 0, 0, 0
    for seed in range(300):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 11))
        f = int(rng.integers(1, min(n, 5) + 1))
        budget = int(rng.integers(1, n + 1))
        if math.comb(n, budget) > 252:
            continue
        sup = spectral_basis(random_connected_graph(n, rng)).lowest(f)
        design = SamplingDesign(rng.uniform(0.1, 1, n), rng.uniform(0, 0.1, n))
        val = lambda s: objective_value(obj, sup, design, s)  # noqa: E731
        greedy = val(greedy_select(obj, sup, design, budget))
        best = val(exhaustive_select(val, n, budget))
        instances += 1
        below += greedy < (1 - 1 / math.e) * best - 1e-12
        # spot checks on nested sets A <= B and an outside element j
        order = [int(i) for i in rng.permutation(n)]
        a_size = int(rng.integers(1, n - 1))
        b_size = int(rng.integers(a_size, n))
        a, b, j = order[:a_size], order[:b_size], order[-1]
        checks += 1
        mono += val(b + [j]) < val(b) - 1e-12
        submod += (val(a + [j]) - val(a)) < (val(b + [j]) - val(b)) - 1e-9
    ok = below == 0 and mono == 0 and submod == 0
    detail = f"{instances} instances: greedy below (1-1/e) opt on {below}; " \
             f"{checks} spot checks: {mono} monotonicity, {submod} submodularity violations"
    assert criterion(7, ok, detail), detail


def test_criterion_08_strategy_ordering(tmp_path, criterion):
    spec = load_spec(SCENARIOS / "compare.cfg").with_overrides(sampling__budgets=[5, 6, 7])
    rows = compare_strategies(spec, tmp_path)
    db = {(r[0], r[1]): r[3] for r in rows}
    parts, ok = [], True
    for b in (5, 6, 7):
        md, ml, rnd = db[("maxdet", b)], db[("maxlambdamin", b)], db[("random", b)]
        good = md <= ml + 0.2 and ml <= rnd
        ok &= good
        parts.append(f"|S|={b}: {md:.2f}/{ml:.2f}/{rnd:.2f} dB{'' if good else ' (order broken)'}")
    detail = "MaxDet/MaxLambdaMin/Random " + "; ".join(parts)
    assert criterion(8, ok, detail), detail


def test_criterion_09_tracking_sanity(tmp_path, criterion):
    shipped = load_spec(SCENARIOS / "tracking.cfg")
    node = shipped["sampling.zero_probability_nodes"][0]

    def node_error(name, **overrides):
        rows = run_scenario(shipped.with_overrides(**overrides), tmp_path / name)
        (row,) = [r for r in rows if r[2] == node]
        return row[3], row[5]

    p_on, sampled_db = node_error("sampled", graph__communication="same", sampling__zero_probability_nodes=[])
    p_off, silent_db = node_error("silent", graph__communication="same")
    p_dense, dense_db = node_error("dense")
    ok = p_on == 0.5 and p_off == p_dense == 0.0 and abs(silent_db - sampled_db) <= 6.0 and dense_db < silent_db
    detail = (f"node {node}: p=0.5 {sampled_db:.2f} dB, p=0 {silent_db:.2f} dB (gap {silent_db - sampled_db:.2f}, "
              f"<= 6), p=0 on denser graph {dense_db:.2f} dB")
    assert criterion(9, ok, detail), detail


# reduced run sizes for the rerun check; each family still exercises its full pipeline
REDUCED = {
    "convergence.cfg": {"run__horizon": 800},
    "msd_validate.cfg": {"run__replicas": 10, "run__window": 50},
    "transient.cfg": {"run__replicas": 10, "run__horizon": 200},
    "tracking.cfg": {"run__horizon": 400, "run__burn_in": 100, "run__replicas": 2},
    "compare.cfg": {"compare__seeds": 3},
    "psd.cfg": {"psd__n_raps": 40, "psd__switch_period": 100, "psd__phases": 2, "signal__bandwidth": 8,
                "sampling__budgets": [20]},
}
COMMANDS = {
    "convergence.cfg": ["simulate", "select", "theory"],
    "msd_validate.cfg": ["simulate", "theory"],
    "transient.cfg": ["simulate"],
    "tracking.cfg": ["simulate"],
    "compare.cfg": ["compare"],
    "psd.cfg": ["psd"],
}


def test_criterion_10_manifest_reruns_are_byte_identical(tmp_path, criterion):
    mismatched, compared = [], 0
    for name, overrides in REDUCED.items():
        spec = load_spec(SCENARIOS / name).with_overrides(**overrides)
        cfg = tmp_path / name
        cfg.write_text(spec.to_text())
        for cmd in COMMANDS[name]:
            first, second = tmp_path / f"{name}-{cmd}-1", tmp_path / f"{name}-{cmd}-2"
            args = [cmd, str(cfg), "-o", str(first), "--seed", "5"]
            assert cli.main(args) == 0
            assert cli.main([cmd, str(first / "manifest.cfg"), "-o", str(second)]) == 0
            files = sorted(p.name for p in first.iterdir())
            if files != sorted(p.name for p in second.iterdir()):
                mismatched.append(f"{name}/{cmd}: file sets differ")
                continue
            _, diff, err = filecmp.cmpfiles(first, second, files, shallow=False)
            compared += len(files)
            mismatched += [f"{name}/{cmd}/{f}" for f in diff + err]
    # library-level criteria rerun from the same seeds
    a = [distributed_greedy(SelectionObjective(MAX_DET), *_protocol_args(s)).messages_per_node for s in range(5)]
    b = [distributed_greedy(SelectionObjective(MAX_DET), *_protocol_args(s)).messages_per_node for s in range(5)]
    same_lib = all(np.array_equal(x, y) for x, y in zip(a, b))
    ok = not mismatched and same_lib
    detail = f"{compared} files across {sum(map(len, COMMANDS.values()))} command runs rerun from manifests; " \
             f"{len(mismatched)} differ" + ("" if same_lib else "; library rerun differs")
    assert criterion(10, ok, detail), detail


def _protocol_args(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 12))
    sup = spectral_basis(random_connected_graph(n, rng)).lowest(2)
    design = SamplingDesign(rng.uniform(0.1, 1, n), rng.uniform(0, 0.1, n))
    return sup, design, n // 2, random_connected_graph(n, rng)
