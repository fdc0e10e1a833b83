"""Search loop: alternate strict and relaxed queries over a growing grid.

Each round first asks for a finished plan. Failing that, the greedy mode
asks the relaxed query which unexpanded tasks a consistent state
trajectory would actually use, and develops exactly those; a breadth
first mode develops everything instead and never poses the relaxed
query. When nothing is expandable and no plan exists, any method pairs
held back by the recursion blocker are readmitted and the grid rebuilt;
with nothing held back the problem is genuinely unsolvable.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .encoder import Encoder
from .inference import compute_profiles
from .model import ABSTRACT, ACTION, DecompositionTree, METHOD, Problem
from .pdt import Pdt
from .sat import AmoConfig, SolverTimeout, dump_dimacs

GREEDY = "greedy"
BFS = "bfs"


@dataclass(frozen=True)
class PlannerConfig:
    mode: str = GREEDY
    amo_scheme: str = "pairwise"
    use_mutex: bool = True
    mandatory_preconds: bool = True
    timeout: float = 600.0
    max_rounds: int = 10_000
    seed: int = 0
    dump_cnf: str | None = None

    def __post_init__(self):
        if self.mode not in (GREEDY, BFS):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class RunStats:
    mode: str
    seed: int
    rounds: int = 0
    reinsertions: int = 0
    methods_developed: int = 0
    plan_length: int | None = None
    wall_time: float = 0.0
    grounding_time: float = 0.0
    queries: list[dict] = field(default_factory=list)
    events: list[str] = field(default_factory=list)


@dataclass
class PlanResult:
    status: str  # "solved", "unsolvable" or "timeout"
    tree: DecompositionTree | None
    stats: RunStats
    pdt: Pdt | None = None  # final search grid, kept for dot dumps

    @property
    def plan(self) -> list[int] | None:
        return self.tree.plan() if self.tree is not None else None


def plan(problem: Problem, config: PlannerConfig = PlannerConfig()) -> PlanResult:
    start = time.monotonic()
    deadline = start + config.timeout
    stats = RunStats(mode=config.mode, seed=config.seed)
    profiles = compute_profiles(problem)
    pdt = Pdt(problem, profiles)
    enc = _encoder(problem, profiles, pdt, config)

    def finish(status: str, tree=None) -> PlanResult:
        stats.methods_developed = pdt.methods_developed
        stats.wall_time = time.monotonic() - start
        if tree is not None:
            stats.plan_length = len(tree.plan() or [])
        return PlanResult(status=status, tree=tree, stats=stats, pdt=pdt)

    def query(kind: str, solver):
        t0 = time.monotonic()
        cand = solver(deadline=deadline)
        entry = {
            "round": stats.rounds,
            "kind": kind,
            "verdict": "sat" if cand is not None else "unsat",
            "time": time.monotonic() - t0,
            "vars": enc.sess.num_vars,
            "clauses": enc.sess.num_clauses,
        }
        if cand is not None:
            entry["frontier"] = [problem.ref_name(r) for r in cand.frontier]
        stats.queries.append(entry)
        return cand

    while True:
        if stats.rounds >= config.max_rounds:
            stats.events.append("round budget exhausted")
            return finish("timeout")
        stats.rounds += 1
        if time.monotonic() >= deadline:
            return finish("timeout")
        try:
            cand = query("solution", enc.solve_solution)
            if cand is not None:
                stats.events.append(f"solved at round {stats.rounds}")
                return finish("solved", cand.tree)

            expandable = [q for q in pdt.pending_positions() if pdt.expandable(q)]
            if not expandable:
                blocked = pdt.blocked_pairs()
                if not blocked:
                    stats.events.append("fixpoint without blocked methods")
                    return finish("unsolvable")
                stats.events.append(
                    f"fixpoint, reinserting {len(blocked)} blocked pairs")
                stats.reinsertions += 1
                pdt = pdt.reinsert_blocked()
                enc = _encoder(problem, profiles, pdt, config)
                continue

            if config.mode == BFS:
                targets = expandable
            else:
                rel = query("relaxed", enc.solve_relaxed)
                if rel is None:
                    targets = expandable
                else:
                    wanted = {id(q) for q in rel.targets}
                    targets = [q for q in expandable if id(q) in wanted]
                    if not targets:
                        targets = expandable
            pdt.expand(targets)
            enc.sync()
            if config.dump_cnf:
                path = f"{config.dump_cnf}.round{stats.rounds}.cnf"
                with open(path, "w") as fh:
                    fh.write(dump_dimacs(enc.sess))
        except SolverTimeout:
            return finish("timeout")


def _encoder(problem, profiles, pdt, config: PlannerConfig) -> Encoder:
    return Encoder(
        problem, profiles, pdt,
        amo=AmoConfig(config.amo_scheme),
        use_mutex=config.use_mutex,
        mandatory_preconds=config.mandatory_preconds,
        seed=config.seed,
    )


def verify(problem: Problem, tree: DecompositionTree) -> list[str]:
    """Independent check that a decomposition tree is a well-formed, fully
    primitive, executable refinement of the initial task reaching the
    goal. Returns human-readable violations; empty means valid."""
    p = problem
    out: list[str] = []
    if not tree.nodes:
        return ["tree is empty"]
    if not 0 <= tree.root < len(tree.nodes):
        return [f"root index {tree.root} out of range"]
    root = tree.nodes[tree.root]
    if root.kind != ABSTRACT or root.ref != p.root:
        out.append("root node is not the initial task")

    seen: set[int] = set()

    def walk(nid: int) -> None:
        if nid in seen:
            out.append(f"node {nid} appears twice")
            return
        seen.add(nid)
        if not 0 <= nid < len(tree.nodes):
            out.append(f"child index {nid} out of range")
            return
        node = tree.nodes[nid]
        if node.kind == ACTION:
            if node.children:
                out.append(f"action node {nid} has children")
            return
        if node.kind == METHOD:
            out.append(f"method node {nid} reached outside an abstract node")
            return
        if node.kind != ABSTRACT:
            out.append(f"node {nid} has unknown kind {node.kind!r}")
            return
        if not node.children:
            out.append(f"abstract node {nid} ({p.abstracts[node.ref].name}) "
                       "is undeveloped")
            return
        if len(node.children) != 1:
            out.append(f"abstract node {nid} has {len(node.children)} "
                       "method children")
            return
        mid = node.children[0]
        if not 0 <= mid < len(tree.nodes):
            out.append(f"method index {mid} out of range")
            return
        if mid in seen:
            out.append(f"node {mid} appears twice")
            return
        seen.add(mid)
        m = tree.nodes[mid]
        if m.kind != METHOD:
            out.append(f"abstract node {nid} refines into a {m.kind} node")
            return
        method = p.methods[m.ref]
        if method.task != node.ref:
            out.append(f"method {method.name} does not refine task "
                       f"{p.abstracts[node.ref].name}")
        if len(m.children) != len(method.subtasks):
            out.append(f"method {method.name} has {len(m.children)} children, "
                       f"expected {len(method.subtasks)}")
            return
        for slot, (ref, kid) in enumerate(zip(method.subtasks, m.children)):
            if not 0 <= kid < len(tree.nodes):
                out.append(f"child index {kid} out of range")
                continue
            child = tree.nodes[kid]
            kind = ACTION if ref.is_action() else ABSTRACT
            if child.kind != kind or child.ref != ref.id:
                out.append(f"method {method.name} child mismatch at slot {slot}")
                continue
            walk(kid)

    walk(tree.root)
    if out:
        return out
    state = p.init
    for i, aid in enumerate(tree.plan() or []):
        nxt = p.apply(state, aid)
        if nxt is None:
            out.append(f"step {i} ({p.actions[aid].name}) is inapplicable")
            return out
        state = nxt
    if not p.is_goal(state):
        missing = [p.facts[f].name for f in sorted(p.goal)
                   if not state >> f & 1]
        out.append("goal facts missing at the end: " + ", ".join(missing))
    return out
