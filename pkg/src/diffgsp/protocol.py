"""Message-level simulation of distributed greedy sampling-set selection.

Synchronous rounds over the communication graph. Transmissions are local
broadcasts: one transmission reaches every neighbour and is charged once to the
sender. A consensus pair costs 2 scalars (value and node id), a flooded row
costs ``|F|`` scalars. The elected value is the composite selection key of
``sampling.score_rows``; its rank and tie-break entries are charged as part of
the value.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetOutOfRange, Disconnected, InvariantViolation
from .graph_core import FrequencySupport, Graph, diameter, eccentricity
from .sampling import SamplingDesign, SelectionObjective, score_rows, weighted_rows

PAIR_SCALARS = 2


@dataclass
class ConsensusOutcome:
    winner: int
    rounds: int
    messages: np.ndarray    # scalars sent per node


def _check_connected(g: Graph):
    if not g.connected:
        raise Disconnected("protocol needs a connected communication graph")


def max_consensus(values, g: Graph, max_rounds: int | None = None, eligible=None) -> ConsensusOutcome:
    """Elect the node holding the largest value by neighbourhood maximisation.

    Nodes compare keys ``(eligible, value, -id)``, so ties go to the lower id
    and ineligible nodes only relay. ``values`` may be any mutually comparable
    objects (floats, or tuples for lexicographic keys). A node rebroadcasts
    only when its key changed. ``rounds`` counts rounds up to the last change;
    the election runs at most ``max_rounds`` rounds (default: until quiescent).
    """
    _check_connected(g)
    n = g.n_nodes
    values = list(values)
    if len(values) != n:
        raise ValueError("one value per node is required")
    elig = [True] * n if eligible is None else [bool(e) for e in eligible]
    own = [(elig[i], values[i], -i) for i in range(n)]
    best = list(own)
    nbrs = [g.neighbors(i) for i in range(n)]
    messages = np.zeros(n, dtype=int)
    announce = [True] * n
    rounds = 0
    r = 0
    while any(announce) and (max_rounds is None or r < max_rounds):
        r += 1
        senders = [i for i in range(n) if announce[i]]
        for i in senders:
            messages[i] += PAIR_SCALARS
        changed = [False] * n
        for i in senders:
            for j in nbrs[i]:
                if best[i] > best[j]:
                    best[j] = best[i]
                    changed[j] = True
        announce = changed
        if any(changed):
            rounds = r
    if len(set(best)) != 1:
        raise InvariantViolation("max consensus did not settle within the round budget")
    winner = -best[0][2]
    return ConsensusOutcome(winner=winner, rounds=rounds, messages=messages)


@dataclass
class FloodOutcome:
    rounds: int
    messages: np.ndarray
    received_round: np.ndarray


def flood(payload, origin: int, g: Graph, max_rounds: int | None = None) -> FloodOutcome:
    """Relay-once broadcast of ``payload`` from ``origin``.

    Returns the number of rounds until every node holds the payload.
    """
    _check_connected(g)
    n = g.n_nodes
    size = int(np.asarray(payload).size)
    got = np.full(n, -1)
    got[origin] = 0
    messages = np.zeros(n, dtype=int)
    relay = [origin]
    r = 0
    while relay:
        if max_rounds is not None and r >= max_rounds:
            break
        r += 1
        nxt = []
        for i in relay:
            messages[i] += size
            for j in g.neighbors(i):
                if got[j] < 0:
                    got[j] = r
                    nxt.append(j)
        relay = sorted(set(nxt))
    if np.any(got < 0):
        raise InvariantViolation("flood did not reach every node")
    rounds = int(got.max())
    if rounds != eccentricity(g, origin):
        raise InvariantViolation("flooding time differs from the origin's eccentricity")
    return FloodOutcome(rounds=rounds, messages=messages, received_round=got)


@dataclass
class PickRecord:
    pick: int
    winner: int
    consensus_rounds: int
    flood_rounds: int
    messages_cumulative: int


@dataclass
class ProtocolTrace:
    selected: list
    picks: list
    messages_per_node: np.ndarray
    diameter: int
    knowledge: dict = field(default_factory=dict)   # node -> {origin: row}

    @property
    def messages_total(self) -> int:
        return int(self.messages_per_node.sum())

    @property
    def rounds_per_pick(self) -> list:
        return [(p.consensus_rounds, p.flood_rounds) for p in self.picks]

    def message_bound(self, bandwidth: int) -> int:
        """Per-node worst case ``M D (1 + 2|F|)``."""
        return len(self.selected) * self.diameter * (1 + 2 * bandwidth)


class _Node:
    """Local protocol state: own data plus rows received by flooding."""

    def __init__(self, idx: int, own_row: np.ndarray):
        self.idx = idx
        self.own_row = own_row
        self.received: dict = {}    # origin -> weighted row, in arrival order
        self.selected = False

    def local_key(self, obj: SelectionObjective, dim: int):
        rows = list(self.received.values()) + [self.own_row]
        return score_rows(obj, rows, dim)


def distributed_greedy(obj: SelectionObjective, support: FrequencySupport, design: SamplingDesign,
                       budget: int, g: Graph) -> ProtocolTrace:
    """Distributed greedy selection: local scoring, max consensus, flooding.

    Each node knows only its own weighted row and the rows flooded so far. The
    election runs for ``D`` rounds (the network diameter, fixed at start-up).
    """
    _check_connected(g)
    n, dim = support.n_nodes, support.bandwidth
    if g.n_nodes != n:
        raise ValueError("communication graph and support disagree on the node count")
    if not 1 <= budget <= n:
        raise BudgetOutOfRange(f"budget must be in [1, {n}], got {budget}")
    diam = diameter(g)
    rows = weighted_rows(support, design)
    nodes = [_Node(i, rows[i]) for i in range(n)]
    messages = np.zeros(n, dtype=int)
    selected: list[int] = []
    picks = []
    for k in range(budget):
        for node in nodes:
            if not node.selected and list(node.received) != selected:
                raise InvariantViolation(f"node {node.idx} holds rows {list(node.received)} at pick {k}")
        keys = [nodes[j].local_key(obj, dim) if not nodes[j].selected else (0, -math.inf, -math.inf)
                for j in range(n)]
        cons = max_consensus(keys, g, max_rounds=diam, eligible=[not nd.selected for nd in nodes])
        winner = cons.winner
        messages += cons.messages
        nodes[winner].selected = True
        selected.append(winner)
        fl = flood(nodes[winner].own_row, winner, g, max_rounds=diam + 1)
        messages += fl.messages
        for node in nodes:
            if node.idx != winner:
                node.received[winner] = nodes[winner].own_row
        if cons.rounds > diam or fl.rounds > diam:
            raise InvariantViolation("round count exceeds the diameter")
        picks.append(PickRecord(k, winner, cons.rounds, fl.rounds, int(messages.sum())))
    knowledge = {nd.idx: dict(nd.received) for nd in nodes}
    return ProtocolTrace(selected=selected, picks=picks, messages_per_node=messages, diameter=diam,
                         knowledge=knowledge)


def write_trace_csv(path, trace: ProtocolTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pick", "winner", "consensus_rounds", "flood_rounds", "messages_cumulative"])
        for p in trace.picks:
            w.writerow([p.pick, p.winner, p.consensus_rounds, p.flood_rounds, p.messages_cumulative])
