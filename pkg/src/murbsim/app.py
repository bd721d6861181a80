"""Demo application model: operation catalog and client transition matrix.

Operations map user clicks to component call paths, session-store traffic,
transactional writes, commit points, and base service times. The transition
matrix drives the emulated clients; its stationary distribution is the
workload's request mix.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources

CATEGORIES = ("static", "session_init", "read_only", "search",
              "session_update", "db_update")
FUNCTIONAL_GROUPS = ("bid_buy_sell", "browse_view", "search", "user_account")

SESSION_NONE = "none"
SESSION_CREATE = "create"
SESSION_READ = "read"
SESSION_UPDATE = "update"
SESSION_DELETE = "delete"


class OpCatalogError(Exception):
    pass


@dataclass(frozen=True)
class OpType:
    name: str
    category: str
    path: tuple[str, ...]
    is_commit_point: bool
    idempotent: bool
    session_touch: str
    tx_writes: bool
    service_ms_mean: int
    functional_group: str

    @property
    def needs_session(self) -> bool:
        return self.session_touch in (SESSION_READ, SESSION_UPDATE, SESSION_DELETE)


@dataclass(frozen=True)
class Response:
    op_name: str
    outcome: str                      # ok | retry_after | error:<class>
    body_fingerprint: str
    latency_ms: int
    node: int = -1
    client_id: int = -1
    request_id: int = -1

    @property
    def ok(self) -> bool:
        return self.outcome == "ok"

    @property
    def error_class(self) -> str | None:
        if self.outcome.startswith("error:"):
            return self.outcome.split(":", 1)[1]
        return None


def canonical_fingerprint(op_name: str, session_key: str, variant: str = "") -> str:
    digest = hashlib.blake2b(
        f"{op_name}|{session_key}|{variant}".encode(), digest_size=8
    ).hexdigest()
    return digest


def _flag(value: str, lineno: int) -> bool:
    if value == "yes":
        return True
    if value == "no":
        return False
    raise OpCatalogError(f"line {lineno}: expected yes/no, got {value!r}")


def parse_ops(text: str) -> list[OpType]:
    ops: list[OpType] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] != "op" or len(tokens) < 2:
            raise OpCatalogError(f"line {lineno}: expected 'op <name> ...'")
        kv = {}
        for tok in tokens[2:]:
            if "=" not in tok:
                raise OpCatalogError(f"line {lineno}: expected key=value, got {tok!r}")
            k, v = tok.split("=", 1)
            kv[k] = v
        try:
            op = OpType(
                name=tokens[1],
                category=kv["category"],
                path=tuple(kv["path"].split(",")),
                is_commit_point=_flag(kv["commit"], lineno),
                idempotent=_flag(kv["idempotent"], lineno),
                session_touch=kv["session"],
                tx_writes=_flag(kv["tx"], lineno),
                service_ms_mean=int(kv["service_ms"]),
                functional_group=kv["fgroup"],
            )
        except KeyError as exc:
            raise OpCatalogError(f"line {lineno}: missing field {exc}") from None
        if op.category not in CATEGORIES:
            raise OpCatalogError(f"line {lineno}: unknown category {op.category!r}")
        if op.functional_group not in FUNCTIONAL_GROUPS:
            raise OpCatalogError(f"line {lineno}: unknown fgroup {op.functional_group!r}")
        ops.append(op)
    return ops


class TransitionMatrix:
    def __init__(self, states: list[str], rows: dict[str, list[float]]):
        self.states = states
        self.index = {s: i for i, s in enumerate(states)}
        self.rows = rows
        # Cumulative tables for O(log n) sampling.
        self.cumulative: dict[str, list[float]] = {}
        for s, probs in rows.items():
            acc, cum = 0.0, []
            for p in probs:
                acc += p
                cum.append(acc)
            cum[-1] = 1.0
            self.cumulative[s] = cum

    def check_stochastic(self, tol: float = 1e-6) -> None:
        for s, probs in self.rows.items():
            total = sum(probs)
            if abs(total - 1.0) > tol or any(p < 0 for p in probs):
                raise OpCatalogError(f"matrix row {s} is not a probability distribution")

    def sample(self, state: str, rng) -> str:
        return self.states[rng.choice_index(self.cumulative[state])]


def parse_matrix(text: str) -> TransitionMatrix:
    states: list[str] = []
    rows: dict[str, list[float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "states":
            states = tokens[1:]
        elif tokens[0] == "row":
            if not states:
                raise OpCatalogError(f"line {lineno}: 'row' before 'states'")
            if len(tokens) != 2 + len(states):
                raise OpCatalogError(f"line {lineno}: row {tokens[1]} has wrong arity")
            rows[tokens[1]] = [float(t) for t in tokens[2:]]
        else:
            raise OpCatalogError(f"line {lineno}: unknown record {tokens[0]!r}")
    missing = [s for s in states if s not in rows]
    if missing:
        raise OpCatalogError(f"matrix rows missing for: {', '.join(missing)}")
    return TransitionMatrix(states, rows)


class AppCatalog:
    """Operations plus transition matrix, indexed for the hot path."""

    def __init__(self, ops: list[OpType], matrix: TransitionMatrix):
        self.ops: dict[str, OpType] = {o.name: o for o in ops}
        self.op_list = ops
        self.matrix = matrix
        for s in matrix.states:
            if s not in self.ops:
                raise OpCatalogError(f"matrix state {s} not in op catalog")
        for o in ops:
            if o.name not in matrix.index:
                raise OpCatalogError(f"op {o.name} missing from transition matrix")

    def components_used(self) -> set[str]:
        used: set[str] = set()
        for o in self.op_list:
            used.update(o.path)
        return used

    def validate_against(self, component_names: set[str]) -> None:
        for o in self.op_list:
            for comp in o.path:
                if comp not in component_names:
                    raise OpCatalogError(f"op {o.name} path references unknown component {comp}")
            if not o.path:
                raise OpCatalogError(f"op {o.name} has an empty path")


def load_app_catalog(ops_path: str = "", matrix_path: str = "") -> AppCatalog:
    if ops_path:
        with open(ops_path, encoding="utf-8") as fh:
            ops_text = fh.read()
    else:
        ops_text = resources.files("murbsim.data").joinpath("ops.txt").read_text("utf-8")
    if matrix_path:
        with open(matrix_path, encoding="utf-8") as fh:
            matrix_text = fh.read()
    else:
        matrix_text = resources.files("murbsim.data").joinpath("transitions.txt").read_text("utf-8")
    matrix = parse_matrix(matrix_text)
    matrix.check_stochastic()
    return AppCatalog(parse_ops(ops_text), matrix)


def op_catalog() -> list[OpType]:
    return load_app_catalog().op_list


def stationary_distribution(matrix: TransitionMatrix, iterations: int = 2_000,
                            tol: float = 1e-12) -> dict[str, float]:
    """Stationary vector by power iteration on the row-stochastic matrix."""
    matrix.check_stochastic()
    n = len(matrix.states)
    pi = [1.0 / n] * n
    rows = [matrix.rows[s] for s in matrix.states]
    for _ in range(iterations):
        nxt = [0.0] * n
        for i, weight in enumerate(pi):
            if weight == 0.0:
                continue
            row = rows[i]
            for j in range(n):
                if row[j]:
                    nxt[j] += weight * row[j]
        delta = sum(abs(a - b) for a, b in zip(nxt, pi))
        pi = nxt
        if delta < tol:
            break
    return dict(zip(matrix.states, pi))


def workload_mix_check(catalog: AppCatalog) -> dict[str, float]:
    """Per-category stationary percentages of the client chain."""
    pi = stationary_distribution(catalog.matrix)
    mix = {c: 0.0 for c in CATEGORIES}
    for name, weight in pi.items():
        mix[catalog.ops[name].category] += 100.0 * weight
    return mix
