"""The simulation world: one cluster, its clients, and the control plane.

Everything here is event-driven on the virtual clock. A request's life:
route -> admit (worker pool) -> walk the component path (name lookups and
fault hooks) -> CPU service -> store traffic -> completion. Recovery actions
bind sentinels, abort intersecting in-flight work, release leases, and rebind
after the configured crash+init cost.
"""

from __future__ import annotations

from . import runtime
from .app import AppCatalog, OpType, Response, canonical_fingerprint, load_app_catalog
from .cluster import LoadBalancer, Node, handle_sentinel
from .config import Scenario
from .detect import DetectorProfile, FailureReport, ReportChannel, classify_response
from .faultlib import ArmedFault, FaultPlan, FaultSpec, RecoveryScope
from .recoverymgr import RecoveryManager, RejuvenationService
from .runtime import HeapLedger, load_catalog
from .simcore import EventLoop, RngStream
from .statestore import READ_DISCARDED, READ_MISSING, SessionStore, TransactionalStore
from .workload import Client, TawLedger

OK = "ok"
ERR_CONNECTION = "error:connection"
ERR_UNAVAILABLE = "error:component_unavailable"
ERR_EXCEPTION = "error:exception"
ERR_TTL = "error:ttl_expired"
ERR_SESSION = "error:session_lost"

_GC_SWEEP_MS = 10_000


class _ReqCtx:
    __slots__ = ("record", "op", "client", "node_id", "path_set", "state",
                 "retried", "divergent", "taint", "ttl_handle")

    def __init__(self, record, op: OpType, client: Client):
        self.record = record
        self.op = op
        self.client = client
        self.node_id = -1
        self.path_set = None
        self.state = "new"       # new | queued | active | parked | done
        self.retried = False
        self.divergent = False
        self.taint = False
        self.ttl_handle = None


class _MurbOp:
    __slots__ = ("members", "node", "on_complete", "released", "label")

    def __init__(self, members: frozenset[str], node: int, label: str):
        self.members = members
        self.node = node
        self.on_complete: list = []
        self.released: dict[str, int] = {}
        self.label = label


class World:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.loop = EventLoop()
        self.rng = RngStream(scenario.seed)
        self.catalog: AppCatalog = load_app_catalog(scenario.ops_path, scenario.matrix_path)

        specs, overrides = load_catalog(scenario.catalog_path)
        self.catalog.validate_against({s.name for s in specs})

        cl = scenario.cluster
        st = scenario.stores
        self.nodes: list[Node] = []
        for i in range(cl.nodes):
            registry = runtime.deploy(specs, overrides)
            heap = HeapLedger(cl.heap_bytes_per_node, registry)
            store = SessionStore("in_process", st.in_process_latency_ms,
                                 st.session_lease_ms, verify_checksums=False)
            self.nodes.append(Node(i, self.loop, registry, heap, store,
                                   cl.workers_per_node, cl.cpu_slots_per_node))
        self.external_store = SessionStore("external", st.external_latency_ms,
                                           st.session_lease_ms, verify_checksums=True)
        self.tx_store = TransactionalStore()
        self.lb = LoadBalancer(self.nodes, self.rng.fork("lb"))

        self.detector = DetectorProfile(
            kind=scenario.detector.kind,
            t_det_ms=scenario.detector.t_det_ms,
            fp_rate=scenario.detector.fp_rate,
            fn_rate=scenario.detector.fn_rate,
        )
        self._detector_rng = self.rng.fork("detector")
        self.rm = RecoveryManager(self, scenario.policy)
        self.channel = ReportChannel(
            self.loop, self.rng.fork("channel"),
            scenario.detector.channel_delay_ms, scenario.detector.drop_rate,
            self.rm.ingest_report)

        self.ledger = TawLedger()
        self.clients: list[Client] = []
        per_node = scenario.workload.clients_per_node
        for i in range(per_node * cl.nodes):
            self.clients.append(Client(i, self.rng))

        self.fault_plan = FaultPlan()
        self._fault_rng = self.rng.fork("faults")
        self._fault_hooks: list[dict] = [self._empty_hooks() for _ in self.nodes]
        self._recovery_history: dict[int, list[RecoveryScope]] = {}
        self._pinned_faults: set[int] = set()
        self._active_murbs: list[list[_MurbOp]] = [[] for _ in self.nodes]
        self._recovery_busy: list[int] = [0 for _ in self.nodes]

        self.rejuvenators = [RejuvenationService(self, scenario.rejuvenation, i)
                             for i in range(cl.nodes)]
        self.action_log: list[dict] = []
        self.recovery_completions: list[tuple[int, int]] = []   # (time, node)
        self.last_release_by_holder: dict[str, int] = {}
        self.fault_session_counts: dict[int, int] = {}          # inject time -> sessions on node
        self._finished = False

        for fc in scenario.faults:
            spec = FaultSpec(
                fault_id=self.fault_plan.new_id(),
                fault_class=fc.fault_class,
                target=fc.target,
                mode=fc.mode,
                node=fc.node,
                inject_at=fc.inject_at_ms,
                bytes_per_invoke=fc.bytes_per_invoke,
                fail_probability=fc.fail_probability,
            )
            armed = self.fault_plan.register(spec)
            self.loop.schedule(spec.inject_at, lambda a=armed: self._arm_fault(a))
        for sm in scenario.scripted_microreboots:
            self.loop.schedule(sm.at_ms, lambda s=sm: self._scripted_murb(s))
        for sr in scenario.scripted_recoveries:
            self.loop.schedule(sr.at_ms, lambda s=sr: self._scripted_recovery(s))

    # -- lifecycle ---------------------------------------------------------

    def run(self) -> None:
        duration = self.scenario.duration_ms
        for client in self.clients:
            first = client.think_ms(self.scenario.workload.think_mean_ms,
                                    self.scenario.workload.think_max_ms)
            self.loop.schedule(min(first, max(duration - 1, 0)),
                               lambda c=client: self._client_tick(c))
        if self.scenario.rejuvenation.enabled:
            for node in self.nodes:
                self._schedule_rejuvenation_poll(node.node_id)
        self._schedule_gc()
        self.loop.run_until(duration)
        self.loop.drain()
        for client in self.clients:
            if client.action is not None and client.action.status == "pending":
                self.ledger.abandon(client.action, duration)
        self._finished = True

    def _schedule_gc(self) -> None:
        if self.loop.now + _GC_SWEEP_MS >= self.scenario.duration_ms:
            return
        self.loop.after(_GC_SWEEP_MS, self._gc_sweep)

    def _gc_sweep(self) -> None:
        now = self.loop.now
        self.external_store.gc(now)
        for node in self.nodes:
            node.in_process_store.gc(now)
            node.heap.reap(now)
        self._schedule_gc()

    def _schedule_rejuvenation_poll(self, node_id: int) -> None:
        poll = self.scenario.rejuvenation.poll_ms
        if self.loop.now + poll >= self.scenario.duration_ms:
            return
        self.loop.after(poll, lambda: self._rejuvenation_poll(node_id))

    def _rejuvenation_poll(self, node_id: int) -> None:
        self.rejuvenators[node_id].tick(self.loop.now)
        self._schedule_rejuvenation_poll(node_id)

    # -- client request flow -------------------------------------------------

    def _client_tick(self, client: Client) -> None:
        if client.stopped or self.loop.now >= self.scenario.duration_ms:
            client.stopped = True
            return
        op_name = client.next_op_name(self.catalog)
        op = self.catalog.ops[op_name]
        if client.action is None or client.action.status != "pending":
            client.action = self.ledger.new_action(client.client_id)
        record = self.ledger.new_request(
            client.client_id, client.session_id, client.action, op_name,
            self.loop.now, self.scenario.workload.request_ttl_ms)
        ctx = _ReqCtx(record, op, client)
        self._route_and_admit(ctx)

    def _route_and_admit(self, ctx: _ReqCtx) -> None:
        session = ctx.client.session_id if ctx.client.logged_in else None
        node_id = self.lb.route(session)
        if node_id is None:
            self._complete(ctx, ERR_CONNECTION)
            return
        ctx.node_id = node_id
        node = self.nodes[node_id]
        if not node.up:
            self._complete(ctx, ERR_CONNECTION)
            return
        if node.workers_busy < node.worker_capacity:
            node.workers_busy += 1
            self._start(ctx)
        else:
            ctx.state = "queued"
            node.worker_queue.append(ctx)

    def _release_worker(self, node: Node) -> None:
        node.workers_busy -= 1
        if node.pumping:
            return
        node.pumping = True
        try:
            # _start can fail a request synchronously, which re-enters
            # _release_worker; the guard keeps this loop iterative.
            while node.up and node.worker_queue and \
                    node.workers_busy < node.worker_capacity:
                nxt = node.worker_queue.popleft()
                if nxt.state != "queued":
                    continue
                node.workers_busy += 1
                self._start(nxt)
        finally:
            node.pumping = False

    def _start(self, ctx: _ReqCtx) -> None:
        ctx.state = "active"
        node = self.nodes[ctx.node_id]
        if not node.up:
            self._fail_in_worker(ctx, node, ERR_CONNECTION)
            return
        registry = node.registry
        op = ctx.op
        for comp in op.path:
            look = registry.lookup(comp)
            if look.state == runtime.BOUND:
                continue
            if look.state == runtime.SENTINEL:
                self._sentinel_hit(ctx, node, comp)
                return
            if look.state == runtime.NOT_BOUND:
                self._fail_in_worker(ctx, node, ERR_UNAVAILABLE)
                return
            # wrong binding: an unusable target errs overtly, a plausible one
            # silently serves the wrong content
            if look.arg is None:
                self._fail_in_worker(ctx, node, ERR_EXCEPTION)
                return
            ctx.divergent = True
        hooks = self._fault_hooks[ctx.node_id]
        if hooks["any"] and not self._apply_fault_hooks(ctx, node, hooks):
            return
        ctx.path_set = op.path if isinstance(op.path, frozenset) else frozenset(op.path)
        node.inflight[ctx] = ctx.path_set
        node.cpu.submit(op.service_ms_mean, lambda: self._cpu_done(ctx))

    def _sentinel_hit(self, ctx: _ReqCtx, node: Node, comp: str) -> None:
        cl = self.scenario.cluster
        decision, delay = handle_sentinel(
            ctx.op.idempotent, cl.retries, ctx.retried, cl.retry_after_ms)
        if decision == "retry":
            ctx.retried = True
            self._release_worker(node)
            ctx.state = "new"
            self.loop.after(delay, lambda: self._route_and_admit(ctx))
        else:
            self._fail_in_worker(ctx, node, ERR_UNAVAILABLE)

    def _fail_in_worker(self, ctx: _ReqCtx, node: Node, outcome: str) -> None:
        self._release_worker(node)
        self._complete(ctx, outcome)

    def _apply_fault_hooks(self, ctx: _ReqCtx, node: Node, hooks: dict) -> bool:
        """Evaluate armed faults against this request; False if it was consumed."""
        op = ctx.op
        by_comp = hooks["by_comp"]
        for comp in op.path:
            for armed in by_comp.get(comp, ()):
                spec = armed.spec
                cls = spec.fault_class
                if cls in ("deadlock", "infinite_loop"):
                    self._park(ctx, node, comp, armed)
                    return False
                if cls == "transient_exception":
                    if spec.fail_probability >= 1.0 or \
                            self._fault_rng.random() < spec.fail_probability:
                        self._fail_in_worker(ctx, node, ERR_EXCEPTION)
                        return False
                elif cls == "app_memory_leak":
                    node.heap.charge(spec.target, spec.bytes_per_invoke,
                                     resource_id=f"leak:{spec.fault_id}")
                    if node.heap.free <= 0:
                        self._fail_in_worker(ctx, node, ERR_EXCEPTION)
                        return False
                elif cls in ("corrupt_tx_map", "corrupt_primary_key"):
                    if op.tx_writes:
                        if spec.mode == "wrong":
                            ctx.divergent = True
                            ctx.taint = True
                        else:
                            self._fail_in_worker(ctx, node, ERR_EXCEPTION)
                            return False
                elif cls == "corrupt_stateless_attr":
                    if spec.mode == "wrong":
                        ctx.divergent = True
                    else:
                        # the bad attribute is replaced after the first failing call
                        armed.active = False
                        self._rebuild_fault_hooks()
                        self._fail_in_worker(ctx, node, ERR_EXCEPTION)
                        return False
                elif cls == "corrupt_db_row":
                    if not op.tx_writes:
                        ctx.divergent = True
        for armed in hooks["process"]:
            spec = armed.spec
            cls = spec.fault_class
            if cls == "leak_outside_app_intra_process":
                node.heap.charge("unattributed", spec.bytes_per_invoke,
                                 resource_id=f"leak:{spec.fault_id}",
                                 via_runtime=False)
                if node.heap.free <= 0:
                    self._fail_in_worker(ctx, node, ERR_EXCEPTION)
                    return False
            elif cls == "leak_outside_process":
                node.heap.os_leak_bytes += spec.bytes_per_invoke
                if node.heap.os_leak_bytes >= node.heap.capacity:
                    self._fail_in_worker(ctx, node, ERR_EXCEPTION)
                    return False
            elif cls in ("process_memory_bitflip", "bad_env"):
                if spec.fail_probability >= 1.0 or \
                        self._fault_rng.random() < spec.fail_probability:
                    self._fail_in_worker(ctx, node, ERR_EXCEPTION)
                    return False
        return True

    def _park(self, ctx: _ReqCtx, node: Node, comp: str, armed: ArmedFault) -> None:
        ctx.state = "parked"
        node.parked[ctx] = comp
        if armed.spec.fault_class == "infinite_loop" and \
                armed.spec.fault_id not in self._pinned_faults:
            self._pinned_faults.add(armed.spec.fault_id)
            node.cpu.pin_slot()
        deadline = ctx.record.issued_at + ctx.record.ttl_ms
        ctx.ttl_handle = self.loop.schedule(
            max(deadline, self.loop.now), lambda: self._ttl_abort(ctx))

    def _ttl_abort(self, ctx: _ReqCtx) -> None:
        if ctx.state != "parked":
            return
        node = self.nodes[ctx.node_id]
        node.parked.pop(ctx, None)
        self._fail_in_worker(ctx, node, ERR_TTL)

    def _cpu_done(self, ctx: _ReqCtx) -> None:
        if ctx.state != "active":
            return                        # aborted while in service
        node = self.nodes[ctx.node_id]
        op = ctx.op
        outcome = OK
        store_ms = 0
        touch = op.session_touch
        if touch != "none":
            store = self._session_store(node)
            client = ctx.client
            if touch == "create":
                store_ms += store.access_latency_ms
            elif touch == "delete":
                store_ms += store.access_latency_ms
                if client.logged_in:
                    store.delete(client.session_id)
            else:   # read or update
                store_ms += store.access_latency_ms
                status, payload = store.read(client.session_id, self.loop.now)
                if status in (READ_MISSING, READ_DISCARDED):
                    outcome = ERR_SESSION
                else:
                    hit = self._inproc_session_symptom(ctx, node, client.session_id)
                    if hit is not None:
                        outcome = hit
                    elif touch == "update":
                        store_ms += store.access_latency_ms
                        store.write(client.session_id, payload, self.loop.now)
        if store_ms > 0:
            self.loop.after(store_ms, lambda: self._finalize(ctx, outcome))
        else:
            self._finalize(ctx, outcome)

    def _inproc_session_symptom(self, ctx: _ReqCtx, node: Node, key: str) -> str | None:
        if self.scenario.stores.session_store != "in_process":
            return None
        hooks = self._fault_hooks[ctx.node_id]
        for armed in hooks["inproc_session"]:
            if armed.spec.target and armed.spec.target != key:
                continue
            if armed.spec.mode == "wrong":
                ctx.divergent = True
                return None
            return ERR_EXCEPTION
        return None

    def _finalize(self, ctx: _ReqCtx, outcome: str) -> None:
        if ctx.state != "active":
            return                        # aborted while waiting on a store
        op = ctx.op
        if outcome == OK and op.tx_writes:
            row = f"{op.name}:{ctx.record.request_id}"
            value = canonical_fingerprint(op.name, str(ctx.client.client_id)).encode()
            owner = op.path[1] if len(op.path) > 1 else op.path[0]
            self.tx_store.execute([(row, value)], owner=owner, taint=ctx.taint)
        node = self.nodes[ctx.node_id]
        node.inflight.pop(ctx, None)
        self._release_worker(node)
        self._complete(ctx, outcome)

    def _session_store(self, node: Node) -> SessionStore:
        if self.scenario.stores.session_store == "external":
            return self.external_store
        return node.in_process_store

    def _complete(self, ctx: _ReqCtx, outcome: str) -> None:
        if ctx.state == "done":
            return
        ctx.state = "done"
        if ctx.ttl_handle is not None:
            ctx.ttl_handle.cancel()
            ctx.ttl_handle = None
        now = self.loop.now
        client = ctx.client
        op = ctx.op

        if outcome == OK:
            if op.session_touch == "create":
                session = client.begin_session()
                node = self.nodes[ctx.node_id]
                payload = canonical_fingerprint(op.name, session).encode()
                self._session_store(node).write(session, payload, now)
                self.lb.establish(session, ctx.node_id)
            elif op.session_touch == "delete" and client.logged_in:
                self.lb.forget(client.session_id)
                client.end_session()
        elif outcome == ERR_SESSION:
            self.lb.forget(client.session_id)
            client.end_session()

        self.ledger.record_outcome(ctx.record, outcome, now,
                                   op.is_commit_point and outcome == OK)

        variant = "divergent" if (outcome == OK and ctx.divergent) else ""
        resp = Response(
            op_name=op.name,
            outcome=outcome,
            body_fingerprint=canonical_fingerprint(op.name, str(client.client_id), variant),
            latency_ms=now - ctx.record.issued_at,
            node=ctx.node_id,
            client_id=client.client_id,
            request_id=ctx.record.request_id,
        )
        failure_class = classify_response(self.detector, resp, self._detector_rng)
        if failure_class is not None:
            report = FailureReport(op.name, failure_class, now, client.client_id,
                                   ctx.node_id)
            self.channel.report(report, self.detector.t_det_ms)

        if not client.stopped:
            if now >= self.scenario.duration_ms:
                client.stopped = True
            else:
                think = client.think_ms(self.scenario.workload.think_mean_ms,
                                        self.scenario.workload.think_max_ms)
                self.loop.after(think, lambda: self._client_tick(client))

    # -- fault arming ---------------------------------------------------------

    def _empty_hooks(self) -> dict:
        return {"any": False, "by_comp": {}, "process": [], "inproc_session": []}

    def _rebuild_fault_hooks(self) -> None:
        self._fault_hooks = [self._empty_hooks() for _ in self.nodes]
        for armed in self.fault_plan.faults.values():
            if not armed.active:
                continue
            hooks = self._fault_hooks[armed.spec.node]
            cls = armed.spec.fault_class
            if cls in ("leak_outside_app_intra_process", "leak_outside_process",
                       "process_memory_bitflip", "bad_env"):
                hooks["process"].append(armed)
            elif cls == "corrupt_inproc_session":
                hooks["inproc_session"].append(armed)
            elif cls in ("corrupt_external_session",):
                continue
            else:
                hooks["by_comp"].setdefault(armed.spec.target, []).append(armed)
            hooks["any"] = True

    def _arm_fault(self, armed: ArmedFault) -> None:
        spec = armed.spec
        armed.armed = True
        armed.active = True
        node = self.nodes[spec.node]
        self.fault_session_counts[spec.inject_at] = sum(
            1 for n in self.lb.affinity.values() if n == spec.node)
        if spec.fault_class == "corrupt_registry_entry":
            node.registry.corrupt_binding(spec.target, spec.mode)
        elif spec.fault_class == "corrupt_external_session":
            # Empty target flips bits across the whole store.
            keys = [spec.target] if spec.target else sorted(self.external_store.records)
            for key in keys:
                self.external_store.corrupt(key, spec.mode or "invalid")
            armed.active = False          # one-shot: checksums take it from here
        elif spec.fault_class == "corrupt_db_row":
            self.tx_store.taint_row(f"row:{spec.target}:{spec.fault_id}")
        self._rebuild_fault_hooks()

    def clear_fault(self, fault_id: int) -> None:
        armed = self.fault_plan.clear(fault_id)
        spec = armed.spec
        if spec.fault_class == "corrupt_registry_entry":
            st = self.nodes[spec.node].registry.states[spec.target]
            st.binding = runtime.BOUND
            st.binding_arg = None
        self._unpin_if_needed(armed)
        self._rebuild_fault_hooks()

    def _unpin_if_needed(self, armed: ArmedFault) -> None:
        if armed.spec.fault_id in self._pinned_faults:
            self._pinned_faults.discard(armed.spec.fault_id)
            self.nodes[armed.spec.node].cpu.unpin_slot()

    def manual_repair_flagged(self, node: int) -> bool:
        if self.tx_store.tainted_rows():
            return True
        return any(f.armed and f.spec.node == node and
                   f.spec.profile.requires_manual_data_repair
                   for f in self.fault_plan.faults.values())

    # -- recovery machinery ---------------------------------------------------

    def node_recovery_busy(self, node_id: int) -> bool:
        return self._recovery_busy[node_id] > 0 or bool(self._active_murbs[node_id])

    def execute_recovery(self, node_id: int, level: str, members: frozenset[str],
                         on_complete, reason: str = "episode") -> None:
        if level in ("murb_group", "murb_web"):
            self.murb(node_id, members, on_complete, reason)
        elif level in ("restart_application", "restart_process", "reboot_node"):
            self.full_restart(node_id, level, on_complete, reason)
        else:
            raise ValueError(f"unknown recovery level {level!r}")

    def murb(self, node_id: int, members: frozenset[str], on_complete=None,
             reason: str = "direct") -> None:
        node = self.nodes[node_id]
        for op in self._active_murbs[node_id]:
            if op.members & members:
                if on_complete is not None:
                    op.on_complete.append(on_complete)
                return
        crash, init = node.registry.group_cost(members)
        drain = self.scenario.cluster.drain_delay_ms
        label = self._group_label(node, members)
        murb_op = _MurbOp(members, node_id, label)
        if on_complete is not None:
            murb_op.on_complete.append(on_complete)
        self._active_murbs[node_id].append(murb_op)
        t0 = self.loop.now
        rebind_at = t0 + drain + crash + init
        node.registry.bind_sentinel(members, rebind_at)
        self.log_action(t0, node_id, "murb_web" if node.registry.web_component in members
                        else "murb_group", label, crash + init, reason)
        self.loop.schedule(t0 + drain, lambda: self._murb_destroy(murb_op))
        self.loop.schedule(rebind_at, lambda: self._murb_rebind(murb_op))

    def _group_label(self, node: Node, members: frozenset[str]) -> str:
        for override in node.registry.overrides.values():
            if override.members == members:
                return override.name
        return ",".join(sorted(members)) if len(members) > 1 else next(iter(members))

    def _murb_destroy(self, murb_op: _MurbOp) -> None:
        node = self.nodes[murb_op.node]
        members = murb_op.members
        for ctx in [c for c, paths in node.inflight.items() if paths & members]:
            node.inflight.pop(ctx, None)
            self._release_worker(node)
            self._complete(ctx, ERR_UNAVAILABLE)
        for ctx in [c for c, comp in node.parked.items() if comp in members]:
            node.parked.pop(ctx, None)
            self._release_worker(node)
            self._complete(ctx, ERR_UNAVAILABLE)
        murb_op.released = node.heap.release_holder(members)

    def _murb_rebind(self, murb_op: _MurbOp) -> None:
        node = self.nodes[murb_op.node]
        node.registry.rebind(murb_op.members)
        includes_web = node.registry.web_component in murb_op.members
        level = "murb_web" if includes_web else "murb_group"
        scope = RecoveryScope(level, murb_op.members, murb_op.node, includes_web)
        cured = self.fault_plan.apply_recovery(scope, self._recovery_history)
        for armed in cured:
            self._unpin_if_needed(armed)
        if cured:
            self._rebuild_fault_hooks()
        self._active_murbs[murb_op.node].remove(murb_op)
        self.recovery_completions.append((self.loop.now, murb_op.node))
        self.last_release_by_holder = murb_op.released
        for cb in murb_op.on_complete:
            cb()

    def full_restart(self, node_id: int, level: str, on_complete=None,
                     reason: str = "direct") -> None:
        node = self.nodes[node_id]
        cl = self.scenario.cluster
        if level == "restart_application":
            cost = cl.app_restart_ms
        elif level == "restart_process":
            cost = cl.process_restart_ms
        else:
            cost = cl.process_restart_ms + cl.os_boot_ms
        self._recovery_busy[node_id] += 1
        t0 = self.loop.now
        self.log_action(t0, node_id, level, f"node{node_id}", cost, reason)
        err = ERR_UNAVAILABLE if level == "restart_application" else ERR_CONNECTION
        if level != "restart_application":
            node.status = "restarting"     # before aborts, so pumped work fails fast
        node.registry.stop_all()
        for ctx in list(node.inflight):
            node.inflight.pop(ctx, None)
            self._release_worker(node)
            self._complete(ctx, err)
        for ctx in list(node.parked):
            node.parked.pop(ctx, None)
            self._release_worker(node)
            self._complete(ctx, err)
        node.heap.release_all_app()
        for fid in [f for f in self._pinned_faults
                    if self.fault_plan.faults[f].spec.node == node_id]:
            self._pinned_faults.discard(fid)
            node.cpu.unpin_slot()
        if level != "restart_application":
            for ctx in list(node.worker_queue):
                if ctx.state == "queued":
                    self._complete(ctx, ERR_CONNECTION)
            node.reset_processing()
            node.in_process_store.clear()
            node.heap.release_unattributed()
            # sessions homed here are gone; the balancer should forget them
            for sid in [s for s, n in self.lb.affinity.items() if n == node_id]:
                self.lb.forget(sid)
        if level == "reboot_node":
            node.heap.os_leak_bytes = 0
        self.loop.after(cost, lambda: self._restart_done(node_id, level, on_complete))

    def _restart_done(self, node_id: int, level: str, on_complete) -> None:
        node = self.nodes[node_id]
        node.registry.redeploy_all()
        node.status = "up"
        scope = RecoveryScope(level, frozenset(node.registry.specs), node_id,
                              includes_web=True)
        cured = self.fault_plan.apply_recovery(scope, self._recovery_history)
        for armed in cured:
            self._unpin_if_needed(armed)
        self._rebuild_fault_hooks()
        self._recovery_busy[node_id] -= 1
        self.recovery_completions.append((self.loop.now, node_id))
        if on_complete is not None:
            on_complete()

    def _scripted_murb(self, sm) -> None:
        node = self.nodes[sm.node]
        members = node.registry.groups[sm.target].members
        self.murb(sm.node, members, reason="scripted")

    def _scripted_recovery(self, sr) -> None:
        members: frozenset[str] = frozenset()
        node = self.nodes[sr.node]
        if sr.level in ("murb_group", "murb_web"):
            anchor = sr.target or node.registry.web_component
            members = node.registry.groups[anchor].members
        self.execute_recovery(sr.node, sr.level, members, None, reason="scripted")

    def episode_finished(self, episode) -> None:
        pass                                  # hook for harness-level accounting

    def log_action(self, t: int, node: int, level: str, target: str,
                   duration: int, reason: str) -> None:
        self.action_log.append({
            "time_ms": t, "node": node, "level": level, "target": target,
            "duration_ms": duration, "reason": reason,
        })

    # -- inspection helpers (tests, summaries) --------------------------------

    def run_single_request(self, client: Client, op_name: str):
        """Drive one operation to completion; test helper, not the hot path."""
        op = self.catalog.ops[op_name]
        if client.action is None or client.action.status != "pending":
            client.action = self.ledger.new_action(client.client_id)
        record = self.ledger.new_request(
            client.client_id, client.session_id, client.action, op_name,
            self.loop.now, self.scenario.workload.request_ttl_ms)
        ctx = _ReqCtx(record, op, client)
        client.stopped = True          # suppress the follow-up think event
        self._route_and_admit(ctx)
        guard = 0
        while record.completed_at < 0 and self.loop.pending() and guard < 10_000:
            self.loop.run_until(self.loop.now + 1_000)
            guard += 1
        return record
