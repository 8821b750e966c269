"""Exact branch-and-cut solver and the tree-aware barycenter start heuristic.

Pipeline: validate -> merge equivalent consecutive layers -> run the
barycenter heuristic (its solution provides both the incumbent and the
per-layer variable indexing) -> build the quadratic ordering model -> identify
variables -> reduce to a weighted cut problem -> branch and cut on the LP
relaxation (box bounds only at the root; odd-cycle and transitivity
inequalities separated on demand).

Bounding uses that all weights are integral: a node can be pruned as soon as
ceil(LP bound - eps) reaches the incumbent.  Node selection is best-bound
(ties FIFO), branching picks the most fractional edge variable (ties lowest
index).  Inequalities whose slack stays above 0.1 for 10 consecutive LP
solves leave the LP for a pool that is re-checked before fresh separation
rounds.  Everything is deterministic for threads=1.
"""

from __future__ import annotations

import heapq
import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import INFEASIBLE, NUMERICAL, UNBOUNDED, RelaxationBackend, SimplexBackend
from .maxcut import (
    MaxCutGraph,
    build_maxcut,
    cut_consistency,
    cut_to_solution,
    separate_odd_cycles,
    separate_transitivity,
)
from .mlcm import MlcmInstance, Solution, count_crossings, validate_instance
from .ordering import ReducedModel, build_model, identify_variables
from .transform import expand_solution, identity_merge_map, merge_layers

__all__ = [
    "SolveConfig",
    "SolveStats",
    "OptResult",
    "SolverError",
    "OPTIMAL_STATUS",
    "FEASIBLE_STATUS",
    "TIMEOUT_STATUS",
    "INFEASIBLE_INPUT_STATUS",
    "barycenter_heuristic",
    "branch_and_cut",
    "solve_heuristic",
]

OPTIMAL_STATUS = "optimal"
FEASIBLE_STATUS = "feasible"
TIMEOUT_STATUS = "timeout"
INFEASIBLE_INPUT_STATUS = "infeasible-input"

_SLACK_DROP = 0.1
_SLACK_ROUNDS = 10
_FORCE_BRANCH_ROUNDS = 200


class SolverError(RuntimeError):
    """Internal solver failure (numerical breakdown or broken invariant)."""


@dataclass
class SolveConfig:
    time_limit: float = 3600.0
    tolerance: float = 1e-6
    max_cuts_per_round: int = 500
    branching: str = "most-fractional"
    node_selection: str = "best-bound"
    sweeps: int = 8
    merge: bool = True
    threads: int = 1

    def __post_init__(self) -> None:
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.branching != "most-fractional":
            raise ValueError(f"unsupported branching rule {self.branching!r}")
        if self.node_selection != "best-bound":
            raise ValueError(f"unsupported node selection {self.node_selection!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")


@dataclass
class SolveStats:
    n_var: int = 0
    n_oddc: int = 0
    n_trans: int = 0
    n_sub: int = 0
    n_LPs: int = 0
    time: float = 0.0

    def to_json(self) -> dict:
        return {
            "n_var": self.n_var,
            "n_oddc": self.n_oddc,
            "n_trans": self.n_trans,
            "n_sub": self.n_sub,
            "n_LPs": self.n_LPs,
            "time": self.time,
        }


@dataclass
class OptResult:
    status: str
    solution: Solution | None
    crossings: int | None
    lower_bound: int
    stats: SolveStats
    message: str = ""


# ---------------------------------------------------------------------------
# barycenter heuristic
# ---------------------------------------------------------------------------


def barycenter_heuristic(instance: MlcmInstance, sweeps: int = 8,
                         start: Solution | None = None) -> Solution:
    """Tree-aware barycenter sweeps; always returns a tree-consistent solution.

    A sweep walks the layers left-to-right (odd sweeps right-to-left) and
    reorders each layer against its already-placed neighbor: leaves take the
    mean position of their neighbors on the reference layer (isolated leaves
    keep their current position), internal nodes take the mean of their
    subtree's leaf barycenters, and each internal node's children are sorted
    stably by barycenter.  Reading the tree off in DFS order keeps every
    bundle contiguous.  The best layout over all sweeps is returned.
    """
    p = instance.p
    if p == 0:
        return Solution(())
    orders: list[list[int]] = (
        [list(t.canonical_leaf_order()) for t in instance.trees]
        if start is None
        else [list(o) for o in start.orders]
    )

    up_adj: list[list[list[int]]] = [[[] for _ in range(n)] for n in instance.layer_sizes]
    down_adj: list[list[list[int]]] = [[[] for _ in range(n)] for n in instance.layer_sizes]
    for r, gap_edges in enumerate(instance.edges):
        for u, v in gap_edges:
            down_adj[r][u].append(v)
            up_adj[r + 1][v].append(u)

    def reorder(r: int, ref: int, adj: list[list[int]]) -> None:
        tree = instance.trees[r]
        ref_pos = {v: i for i, v in enumerate(orders[ref])}
        cur_pos = {v: i for i, v in enumerate(orders[r])}
        bc: dict[int, float] = {}
        for v in range(tree.n_leaves):
            nbrs = adj[v]
            bc[v] = (sum(ref_pos[u] for u in nbrs) / len(nbrs)) if nbrs else float(cur_pos[v])
        for v in range(tree.n_leaves, tree.n_nodes):
            leaves = tree.leaf_sets[v]
            bc[v] = sum(bc[x] for x in leaves) / len(leaves)

        def first_leaf_pos(v: int) -> int:
            return min(cur_pos[x] for x in tree.leaf_sets[v])

        out: list[int] = []

        def emit(v: int) -> None:
            if tree.is_leaf(v):
                out.append(v)
                return
            for child in sorted(tree.children[v], key=lambda cvar: (bc[cvar], first_leaf_pos(cvar))):
                emit(child)

        emit(tree.root)
        orders[r] = out

    best = Solution(tuple(tuple(o) for o in orders))
    best_count = count_crossings(instance, best)
    for k in range(sweeps):
        if p == 1:
            break
        if k % 2 == 0:
            for r in range(1, p):
                reorder(r, r - 1, up_adj[r])
        else:
            for r in range(p - 2, -1, -1):
                reorder(r, r + 1, down_adj[r])
        cand = Solution(tuple(tuple(o) for o in orders))
        c = count_crossings(instance, cand)
        if c < best_count:
            best, best_count = cand, c
    return best


def solve_heuristic(instance: MlcmInstance, config: SolveConfig | None = None) -> OptResult:
    """Heuristic-only pipeline: fast, no optimality proof (lower bound 0)."""
    config = config or SolveConfig()
    t0 = time.monotonic()
    report = validate_instance(instance)
    if not report.ok:
        return OptResult(INFEASIBLE_INPUT_STATUS, None, None, 0, SolveStats(), report.summary())
    work, mm = merge_layers(instance) if config.merge else (instance, identity_merge_map(instance))
    sol = expand_solution(mm, barycenter_heuristic(work, sweeps=config.sweeps))
    stats = SolveStats(time=time.monotonic() - t0)
    return OptResult(FEASIBLE_STATUS, sol, count_crossings(instance, sol), 0, stats)


# ---------------------------------------------------------------------------
# branch and cut
# ---------------------------------------------------------------------------


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fixes: tuple[tuple[int, int], ...] = field(compare=False)


class _Shared:
    """State shared by the node-processing workers."""

    def __init__(self, incumbent: Solution, incumbent_count: int, deadline: float, stats: SolveStats):
        self.lock = threading.Lock()
        self.wake = threading.Condition(self.lock)
        self.heap: list[_Node] = []
        self.seq = 0
        self.incumbent = incumbent
        self.incumbent_count = incumbent_count
        self.deadline = deadline
        self.stats = stats
        self.processing: dict[int, float] = {}  # worker id -> bound being processed
        self.timed_out = False
        self.failure: BaseException | None = None

    def push(self, bound: float, fixes: tuple[tuple[int, int], ...]) -> None:
        heapq.heappush(self.heap, _Node(bound, self.seq, fixes))
        self.seq += 1

    def open_bounds(self) -> list[float]:
        return [n.bound for n in self.heap] + list(self.processing.values())


def _int_bound(value: float, tolerance: float) -> int:
    return math.ceil(value - tolerance)


class _Worker:
    def __init__(self, wid: int, shared: _Shared, graph: MaxCutGraph, reduced: ReducedModel,
                 work: MlcmInstance, backend: RelaxationBackend, config: SolveConfig):
        self.wid = wid
        self.shared = shared
        self.graph = graph
        self.reduced = reduced
        self.work = work
        self.backend = backend
        self.config = config
        # per-backend cut bookkeeping: row id -> (cut, consecutive slack count)
        self.active: dict[int, list] = {}
        self.active_keys: set = set()
        self.pool: dict = {}

    # -- cut handling -----------------------------------------------------

    def _add_cuts(self, cuts, kind: str) -> int:
        fresh = []
        for cut in cuts:
            k = cut.key()
            if k in self.active_keys:
                continue
            self.pool.pop(k, None)
            fresh.append(cut)
        if not fresh:
            return 0
        rows = [cut.lp_row() for cut in fresh]
        ids = self.backend.add_rows(rows)
        for rid, cut in zip(ids, fresh):
            self.active[rid] = [cut, 0]
            self.active_keys.add(cut.key())
        with self.shared.lock:
            if kind == "oddc":
                self.shared.stats.n_oddc += len(fresh)
            else:
                self.shared.stats.n_trans += len(fresh)
        return len(fresh)

    def _reactivate_pool(self, y) -> int:
        violated = []
        for k, cut in self.pool.items():
            if cut.violation(y) > self.config.tolerance:
                violated.append((k, cut))
                if len(violated) >= self.config.max_cuts_per_round:
                    break
        if not violated:
            return 0
        rows = [cut.lp_row() for _, cut in violated]
        ids = self.backend.add_rows(rows)
        for (k, cut), rid in zip(violated, ids):
            del self.pool[k]
            self.active[rid] = [cut, 0]
            self.active_keys.add(k)
        return len(violated)

    def _manage_slack(self, slacks: dict[int, float]) -> None:
        drop = []
        for rid, entry in self.active.items():
            if slacks.get(rid, 0.0) > _SLACK_DROP:
                entry[1] += 1
                if entry[1] >= _SLACK_ROUNDS:
                    drop.append(rid)
            else:
                entry[1] = 0
        if drop:
            self.backend.remove_rows(drop)
            for rid in drop:
                cut, _ = self.active.pop(rid)
                k = cut.key()
                self.active_keys.discard(k)
                self.pool[k] = cut

    # -- node processing --------------------------------------------------

    def _apply_fixes(self, fixes: tuple[tuple[int, int], ...]) -> None:
        m = self.graph.n_edges
        for var in range(m):
            self.backend.set_bounds(var, 0.0, 1.0)
        if self.graph.n_root_edges >= 1:
            self.backend.set_bounds(0, 0.0, 0.0)  # cut symmetry: pin one class
        for var, val in fixes:
            self.backend.set_bounds(var, float(val), float(val))

    def process(self, node: _Node) -> None:
        cfg = self.config
        shared = self.shared
        self._apply_fixes(node.fixes)
        rounds = 0
        counted = False
        while True:
            if time.monotonic() > shared.deadline:
                with shared.lock:
                    shared.timed_out = True
                    # node is still open: repost it so the bound stays honest
                    shared.push(node.bound, node.fixes)
                return
            res = self.backend.solve()
            with shared.lock:
                shared.stats.n_LPs += 1
                if not counted:
                    shared.stats.n_sub += 1
                    counted = True
            if res.status == INFEASIBLE:
                return
            if res.status in (NUMERICAL, UNBOUNDED) or res.x is None:
                raise SolverError(f"LP backend failed with status {res.status!r}")
            total = res.objective + self.graph.offset
            node.bound = max(node.bound, total)
            with shared.lock:
                self.processing_bound(total)
                inc = shared.incumbent_count
            if _int_bound(total, cfg.tolerance) >= inc:
                return
            if res.slacks:
                self._manage_slack(res.slacks)
            y = np.asarray(res.x, dtype=float)
            frac = np.minimum(y, 1.0 - y)
            rounds += 1

            if float(frac.max()) <= cfg.tolerance:
                if self._handle_integral(y, total):
                    return
                continue

            if self._reactivate_pool(y):
                continue
            added = self._add_cuts(
                separate_odd_cycles(self.graph, y, cfg.tolerance, cfg.max_cuts_per_round), "oddc")
            if not added:
                added = self._add_cuts(
                    separate_transitivity(self.reduced, y, cfg.tolerance)[:cfg.max_cuts_per_round],
                    "trans")
            if not added or rounds > _FORCE_BRANCH_ROUNDS:
                self._branch(node, y, total)
                return

    def processing_bound(self, bound: float) -> None:
        self.shared.processing[self.wid] = bound

    def _handle_integral(self, y: np.ndarray, total: float) -> bool:
        """True if the node is finished (incumbent accepted or pruned)."""
        cfg = self.config
        yr = np.round(y)
        ok, witness = cut_consistency(self.graph, yr)
        if not ok:
            if not self._add_cuts([witness], "oddc"):
                raise SolverError("no progress at an inconsistent integral point")
            return False
        trans = separate_transitivity(self.reduced, yr, cfg.tolerance)
        if trans:
            if not self._add_cuts(trans[:cfg.max_cuts_per_round], "trans"):
                raise SolverError("no progress at a non-transitive integral point")
            return False
        solution = cut_to_solution(self.reduced, yr, cfg.tolerance)
        value = count_crossings(self.work, solution)
        if value != round(total):
            raise SolverError(
                f"objective mismatch: LP says {total}, recount says {value}")
        with self.shared.lock:
            if value < self.shared.incumbent_count:
                self.shared.incumbent_count = value
                self.shared.incumbent = solution
        return True

    def _branch(self, node: _Node, y: np.ndarray, total: float) -> None:
        frac = np.minimum(y, 1.0 - y)
        j = int(np.argmax(frac))
        if frac[j] <= self.config.tolerance:
            raise SolverError("tried to branch on an integral point")
        with self.shared.lock:
            for val in (0, 1):
                self.shared.push(total, node.fixes + ((j, val),))
            self.shared.wake.notify_all()


def _worker_loop(worker: _Worker) -> None:
    shared = worker.shared
    while True:
        with shared.lock:
            while True:
                if shared.failure is not None or shared.timed_out:
                    return
                if shared.heap:
                    break
                if not shared.processing:
                    shared.wake.notify_all()
                    return
                shared.wake.wait(timeout=0.05)
            node = heapq.heappop(shared.heap)
            if _int_bound(node.bound, worker.config.tolerance) >= shared.incumbent_count:
                # best-bound order: every remaining node is prunable too
                shared.heap.clear()
                shared.wake.notify_all()
                return
            shared.processing[worker.wid] = node.bound
        try:
            worker.process(node)
        except BaseException as exc:  # surface worker crashes to the caller
            with shared.lock:
                shared.failure = exc
                shared.wake.notify_all()
            return
        finally:
            with shared.lock:
                shared.processing.pop(worker.wid, None)
                shared.wake.notify_all()
        if time.monotonic() > shared.deadline:
            with shared.lock:
                shared.timed_out = True
                shared.wake.notify_all()
            return


def branch_and_cut(instance: MlcmInstance, config: SolveConfig | None = None,
                   backend=None) -> OptResult:
    """Solve to optimality (or best effort within the time limit).

    ``backend`` is an LP backend instance (threads=1) or a zero-argument
    factory; by default each worker gets its own :class:`SimplexBackend`.
    """
    config = config or SolveConfig()
    t0 = time.monotonic()
    deadline = t0 + config.time_limit
    stats = SolveStats()

    report = validate_instance(instance)
    if not report.ok:
        return OptResult(INFEASIBLE_INPUT_STATUS, None, None, 0, stats, report.summary())

    work, mm = merge_layers(instance) if config.merge else (instance, identity_merge_map(instance))

    heur = barycenter_heuristic(work, sweeps=config.sweeps)
    incumbent_count = count_crossings(work, heur)

    def finish(status: str, incumbent: Solution, count: int, lower: int) -> OptResult:
        sol = expand_solution(mm, incumbent)
        if count_crossings(instance, sol) != count:
            raise SolverError("merge expansion changed the crossing count")
        stats.time = time.monotonic() - t0
        return OptResult(status, sol, count, lower, stats)

    if time.monotonic() > deadline:
        return finish(TIMEOUT_STATUS, heur, incumbent_count, 0)

    model = build_model(work, order=heur)
    reduced = identify_variables(model)
    graph = build_maxcut(reduced)
    stats.n_var = reduced.n_classes

    if graph.n_edges == 0:
        # no choices anywhere: the heuristic layout is trivially optimal
        return finish(OPTIMAL_STATUS, heur, incumbent_count, incumbent_count)

    if backend is None:
        factory = SimplexBackend
    elif isinstance(backend, type) or (callable(backend) and not hasattr(backend, "solve")):
        factory = backend
    else:
        if config.threads > 1:
            raise ValueError("pass a backend factory (not an instance) when threads > 1")
        factory = lambda: backend  # noqa: E731

    trivial = graph.offset + sum(min(0, w) for w in graph.weights)
    shared = _Shared(heur, incumbent_count, deadline, stats)
    shared.push(float(trivial), ())

    workers = []
    for wid in range(config.threads):
        be = factory()
        be.load([float(w) for w in graph.weights],
                [0.0] * graph.n_edges, [1.0] * graph.n_edges)
        workers.append(_Worker(wid, shared, graph, reduced, work, be, config))

    if config.threads == 1:
        _worker_loop(workers[0])
    else:
        threads = [threading.Thread(target=_worker_loop, args=(w,), daemon=True)
                   for w in workers]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

    if shared.failure is not None:
        raise shared.failure

    if shared.timed_out:
        open_bounds = shared.open_bounds()
        if open_bounds:
            lower = min(_int_bound(min(open_bounds), config.tolerance), shared.incumbent_count)
            lower = max(lower, 0)
            return finish(TIMEOUT_STATUS, shared.incumbent, shared.incumbent_count, lower)
        return finish(OPTIMAL_STATUS, shared.incumbent, shared.incumbent_count,
                      shared.incumbent_count)
    return finish(OPTIMAL_STATUS, shared.incumbent, shared.incumbent_count,
                  shared.incumbent_count)
