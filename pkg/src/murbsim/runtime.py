"""Crash-only component host: registry, recovery groups, leases, heap charges.

A Registry holds the deployed components of one node. Recovery groups are
precomputed as the transitive closure of each component's dependents (who
depends on me, directly or through others); components that must come down
together are rebooted together. The actual reboot orchestration is event
driven and lives in world.py; this module owns the state transitions.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

KIND_ENTITY = "entity"
KIND_STATELESS = "stateless"
KIND_WEB = "web"

# Binding states for the name service.
BOUND = "bound"
SENTINEL = "sentinel"
NOT_BOUND = "not_bound"
WRONG = "wrong"


class DeployError(Exception):
    pass


class CatalogError(Exception):
    pass


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    kind: str
    depends_on: frozenset[str]
    crash_ms: int
    init_ms: int
    mem_footprint_bytes: int

    @property
    def murb_ms(self) -> int:
        return self.crash_ms + self.init_ms


@dataclass
class LeaseRecord:
    resource_id: str
    holder: str                      # component name or "unattributed"
    bytes: int
    expires_at: int | None = None    # None: held until released
    acquired_via_runtime: bool = True


class ComponentState:
    __slots__ = ("status", "binding", "binding_arg", "instance_pool_epoch")

    def __init__(self) -> None:
        self.status = "active"             # active | microrebooting | stopped
        self.binding = BOUND
        self.binding_arg: object = None    # sentinel: rebind time; wrong: target name or None
        self.instance_pool_epoch = 0


@dataclass(frozen=True)
class RecoveryGroup:
    anchor: str
    members: frozenset[str]

    @property
    def cost_key(self) -> frozenset[str]:
        return self.members


@dataclass
class GroupOverride:
    name: str
    members: frozenset[str]
    crash_ms: int
    init_ms: int


class Lookup:
    """Result of a name-service lookup."""

    __slots__ = ("state", "arg")

    def __init__(self, state: str, arg: object = None):
        self.state = state
        self.arg = arg

    def __repr__(self) -> str:
        return f"Lookup({self.state}, {self.arg!r})"


class Registry:
    """Per-node component registry and name service."""

    def __init__(self, specs: list[ComponentSpec], overrides: list[GroupOverride]):
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise DeployError(f"duplicate component names: {', '.join(dup)}")
        known = set(names)
        for s in specs:
            for dep in sorted(s.depends_on):
                if dep not in known:
                    raise DeployError(f"{s.name} depends on unknown component {dep}")
        self.specs: dict[str, ComponentSpec] = {s.name: s for s in specs}
        self.order: list[str] = names                      # catalog order
        self.states: dict[str, ComponentState] = {n: ComponentState() for n in names}
        self.overrides = {o.members: o for o in overrides}
        self._dependents = self._reverse_edges()
        self.groups: dict[str, RecoveryGroup] = {
            n: self._closure(n) for n in names
        }
        self.web_component = next((n for n in names if self.specs[n].kind == KIND_WEB), None)

    def _reverse_edges(self) -> dict[str, set[str]]:
        rev: dict[str, set[str]] = {n: set() for n in self.specs}
        for s in self.specs.values():
            for dep in s.depends_on:
                rev[dep].add(s.name)
        return rev

    def _closure(self, anchor: str) -> RecoveryGroup:
        members = {anchor}
        frontier = [anchor]
        while frontier:
            cur = frontier.pop()
            for dependent in self._dependents[cur]:
                if dependent not in members:
                    members.add(dependent)
                    frontier.append(dependent)
        return RecoveryGroup(anchor=anchor, members=frozenset(members))

    def recovery_group(self, anchor: str) -> RecoveryGroup:
        if anchor not in self.groups:
            raise DeployError(f"unknown component {anchor}")
        return self.groups[anchor]

    def group_cost(self, members: frozenset[str]) -> tuple[int, int]:
        """(crash_ms, init_ms) for rebooting `members` as one unit."""
        override = self.overrides.get(members)
        if override is not None:
            return override.crash_ms, override.init_ms
        crash = max(self.specs[m].crash_ms for m in members)
        init = max(self.specs[m].init_ms for m in members)
        return crash, init

    def lookup(self, name: str) -> Lookup:
        state = self.states.get(name)
        if state is None or state.binding == NOT_BOUND or state.status == "stopped":
            return Lookup(NOT_BOUND)
        if state.binding == SENTINEL:
            return Lookup(SENTINEL, state.binding_arg)
        if state.binding == WRONG:
            return Lookup(WRONG, state.binding_arg)
        return Lookup(BOUND)

    def sentinel_remaining(self, name: str, now: int) -> int:
        state = self.states[name]
        rebind_at = state.binding_arg if isinstance(state.binding_arg, int) else now
        return max(0, rebind_at - now)

    def bind_sentinel(self, members: frozenset[str], rebind_at: int) -> None:
        for m in members:
            st = self.states[m]
            st.status = "microrebooting"
            st.binding = SENTINEL
            st.binding_arg = rebind_at

    def rebind(self, members: frozenset[str]) -> None:
        for m in members:
            st = self.states[m]
            st.status = "active"
            st.binding = BOUND
            st.binding_arg = None
            st.instance_pool_epoch += 1

    def stop_all(self) -> None:
        for st in self.states.values():
            st.status = "stopped"
            st.binding = NOT_BOUND
            st.binding_arg = None

    def redeploy_all(self) -> None:
        for st in self.states.values():
            st.status = "active"
            st.binding = BOUND
            st.binding_arg = None
            st.instance_pool_epoch = 0

    def corrupt_binding(self, name: str, mode: str) -> None:
        st = self.states[name]
        if mode == "null":
            st.binding = NOT_BOUND
            st.binding_arg = None
        elif mode == "invalid":
            st.binding = WRONG
            st.binding_arg = None          # type-checks but points nowhere usable
        elif mode == "wrong":
            others = [n for n in self.order if n != name and self.specs[n].kind != KIND_WEB]
            st.binding = WRONG
            st.binding_arg = others[0] if others else None
        else:
            raise ValueError(f"unknown corruption mode {mode}")

    def microrebooting_members(self) -> set[str]:
        return {n for n, st in self.states.items() if st.status == "microrebooting"}


class HeapLedger:
    """Heap accounting for one node: component footprints plus leased charges."""

    def __init__(self, capacity: int, registry: Registry):
        self.capacity = capacity
        self.registry = registry
        self.footprint_total = sum(s.mem_footprint_bytes for s in registry.specs.values())
        self.leases: dict[str, LeaseRecord] = {}
        self._lease_seq = 0
        self.os_leak_bytes = 0           # outside the process; only a node reboot clears it

    def charge(self, holder: str, nbytes: int, *, resource_id: str | None = None,
               expires_at: int | None = None, via_runtime: bool = True) -> LeaseRecord:
        if resource_id is None:
            self._lease_seq += 1
            resource_id = f"lease-{self._lease_seq}"
        rec = self.leases.get(resource_id)
        if rec is None:
            rec = LeaseRecord(resource_id, holder, 0, expires_at, via_runtime)
            self.leases[resource_id] = rec
        rec.bytes += nbytes
        return rec

    def release_holder(self, holders: frozenset[str] | set[str]) -> dict[str, int]:
        """Release runtime-acquired leases of the given holders; returns bytes per holder."""
        released: dict[str, int] = {}
        for rid in [r for r, rec in self.leases.items()
                    if rec.holder in holders and rec.acquired_via_runtime]:
            rec = self.leases.pop(rid)
            released[rec.holder] = released.get(rec.holder, 0) + rec.bytes
        return released

    def release_all_app(self) -> int:
        """Release every component-attributed lease (application restart scope)."""
        holders = frozenset(self.registry.specs)
        return sum(self.release_holder(holders).values())

    def release_unattributed(self) -> int:
        total = 0
        for rid in [r for r, rec in self.leases.items() if rec.holder == "unattributed"]:
            total += self.leases.pop(rid).bytes
        return total

    def reap(self, now: int) -> list[LeaseRecord]:
        """Release every lease whose expiry has passed."""
        out = []
        for rid in [r for r, rec in self.leases.items()
                    if rec.expires_at is not None and rec.expires_at <= now]:
            out.append(self.leases.pop(rid))
        return out

    @property
    def charged(self) -> int:
        return self.footprint_total + sum(r.bytes for r in self.leases.values())

    @property
    def free(self) -> int:
        return self.capacity - self.charged

    def attributed_to(self, holders: frozenset[str]) -> int:
        footprint = sum(self.registry.specs[h].mem_footprint_bytes
                        for h in holders if h in self.registry.specs)
        leased = sum(r.bytes for r in self.leases.values() if r.holder in holders)
        return footprint + leased


# --- catalog file handling ---------------------------------------------------

def _parse_kv(tokens: list[str], lineno: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise CatalogError(f"line {lineno}: expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def parse_catalog(text: str) -> tuple[list[ComponentSpec], list[GroupOverride]]:
    specs: list[ComponentSpec] = []
    overrides: list[GroupOverride] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        record, name = tokens[0], tokens[1] if len(tokens) > 1 else ""
        kv = _parse_kv(tokens[2:], lineno)
        try:
            if record == "component":
                deps = kv["depends"]
                depends = frozenset() if deps == "-" else frozenset(deps.split(","))
                spec = ComponentSpec(
                    name=name,
                    kind=kv["kind"],
                    depends_on=depends,
                    crash_ms=int(kv["crash_ms"]),
                    init_ms=int(kv["init_ms"]),
                    mem_footprint_bytes=int(kv["footprint"]),
                )
                if spec.kind not in (KIND_ENTITY, KIND_STATELESS, KIND_WEB):
                    raise CatalogError(f"line {lineno}: unknown kind {spec.kind!r}")
                if spec.crash_ms < 0 or spec.init_ms <= 0:
                    raise CatalogError(f"line {lineno}: bad cost model for {name}")
                specs.append(spec)
            elif record == "group":
                overrides.append(GroupOverride(
                    name=name,
                    members=frozenset(kv["members"].split(",")),
                    crash_ms=int(kv["crash_ms"]),
                    init_ms=int(kv["init_ms"]),
                ))
            else:
                raise CatalogError(f"line {lineno}: unknown record {record!r}")
        except KeyError as exc:
            raise CatalogError(f"line {lineno}: missing field {exc}") from None
        except ValueError as exc:
            raise CatalogError(f"line {lineno}: {exc}") from None
    return specs, overrides


def load_catalog(path: str = "") -> tuple[list[ComponentSpec], list[GroupOverride]]:
    if path:
        with open(path, encoding="utf-8") as fh:
            return parse_catalog(fh.read())
    text = resources.files("murbsim.data").joinpath("catalog.txt").read_text("utf-8")
    return parse_catalog(text)


def deploy(specs: list[ComponentSpec], overrides: list[GroupOverride] | None = None) -> Registry:
    return Registry(specs, overrides or [])


def compute_recovery_group(registry: Registry, anchor: str) -> RecoveryGroup:
    return registry.recovery_group(anchor)
