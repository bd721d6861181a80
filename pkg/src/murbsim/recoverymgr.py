"""Recovery manager: report ingestion, score-based diagnosis, the recursive
recovery ladder, heap-threshold rejuvenation, and detection-headroom math.

Diagnosis scores every component on the call path of a failed operation and
recovers the cheapest plausible target first. After each recovery action the
manager waits an observation window; fresh failure reports escalate to the
next, coarser level. A target recovered too often in a short period is handed
to a human instead of rebooted again.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

from .config import PolicyConfig, RejuvenationConfig
from .detect import FAULTY_APP_CHECK, FailureReport
from .faultlib import LEVELS
from .runtime import KIND_WEB

LADDER = LEVELS

@dataclass
class RecoveryAction:
    level: str
    node: int
    members: frozenset[str] = frozenset()
    started_at: int = -1
    completed_at: int = -1
    result: str = ""


class ScoreBoard:
    """Exponentially-decaying per-component failure scores for one node."""

    def __init__(self, half_life_ms: int, threshold: float):
        self.half_life_ms = half_life_ms
        self.threshold = threshold
        self.scores: dict[str, float] = {}
        self.decayed_at = 0

    def decay_to(self, now: int) -> None:
        dt = now - self.decayed_at
        if dt <= 0:
            return
        factor = 0.5 ** (dt / self.half_life_ms)
        if factor < 1e-12:
            self.scores.clear()
        else:
            for comp in self.scores:
                self.scores[comp] *= factor
        self.decayed_at = now

    def bump(self, components, now: int, amount: float = 1.0) -> None:
        self.decay_to(now)
        for comp in components:
            self.scores[comp] = self.scores.get(comp, 0.0) + amount

    def reset(self) -> None:
        self.scores.clear()


@dataclass
class Episode:
    node: int
    started_at: int
    anchor: str
    actions: list[RecoveryAction] = field(default_factory=list)
    terminal_level: str = ""
    cured: bool = False
    manual_repair_flagged: bool = False

    @property
    def levels(self) -> list[str]:
        return [a.level for a in self.actions]


class RecoveryManager:
    """Event-driven actor; all recovery steps for one node are serialized."""

    def __init__(self, world, policy: PolicyConfig):
        self.world = world
        self.policy = policy
        self.boards: dict[int, ScoreBoard] = {}
        self.episodes: list[Episode] = []
        self.active: dict[int, Episode] = {}
        self.halted: set[int] = set()
        # per-node, sorted observation times of scoreable failure reports
        self._report_times: dict[int, list[int]] = {}
        # recurrence bookkeeping: recovery timestamps per (node, target key)
        self._recoveries: dict[tuple[int, object], list[int]] = {}
        self.session_loss_reports = 0
        self.ignored_reports = 0

    def _board(self, node: int) -> ScoreBoard:
        board = self.boards.get(node)
        if board is None:
            board = ScoreBoard(self.policy.half_life_ms, self.policy.threshold)
            self.boards[node] = board
        return board

    # -- ingestion and diagnosis ----------------------------------------

    def ingest_report(self, report: FailureReport) -> None:
        now = self.world.loop.now
        op = self.world.catalog.ops.get(report.op_name)
        if op is None:
            self.ignored_reports += 1
            return
        if report.failure_class == FAULTY_APP_CHECK:
            # Session loss is a state condition, not a component fault; scoring
            # it would send the ladder chasing ghosts after every restart.
            self.session_loss_reports += 1
            return
        self._board(report.node_id).bump(op.path, now)
        self._report_times.setdefault(report.node_id, []).append(report.observed_at)
        if self.policy.enabled:
            self.maybe_act(report.node_id)

    def diagnose(self, node: int):
        """(anchor, group members) when some score crosses the threshold."""
        board = self._board(node)
        board.decay_to(self.world.loop.now)
        registry = self.world.nodes[node].registry
        best = None
        for comp, score in board.scores.items():
            if score < board.threshold:
                continue
            spec = registry.specs.get(comp)
            if spec is None or spec.kind == KIND_WEB:
                continue   # the web component sits on every path; it has its own rung
            members = registry.groups[comp].members
            key = (-score, len(members), comp)
            if best is None or key < best[0]:
                best = (key, comp, members)
        if best is None:
            return None
        return best[1], best[2]

    def maybe_act(self, node: int) -> None:
        if node in self.active or node in self.halted:
            return
        if self.world.node_recovery_busy(node):
            return
        diagnosis = self.diagnose(node)
        if diagnosis is None:
            return
        anchor, members = diagnosis
        episode = Episode(node=node, started_at=self.world.loop.now, anchor=anchor)
        self.active[node] = episode
        self.episodes.append(episode)
        first = "murb_group" if self.policy.recovery_mode == "murb" else "restart_process"
        self._run_action(episode, first, members)

    # -- the ladder -------------------------------------------------------

    def _target_key(self, level: str, members: frozenset[str]) -> object:
        if level in ("murb_group", "murb_web"):
            return members
        return level

    def _run_action(self, episode: Episode, level: str, members: frozenset[str]) -> None:
        now = self.world.loop.now
        key = (episode.node, self._target_key(level, members))
        history = self._recoveries.setdefault(key, [])
        recent = [t for t in history if t > now - self.policy.recurrence_period_ms]
        if level != "escalate_human" and len(recent) >= self.policy.recurrence_limit:
            self._finish_episode(episode, "escalate_human", cured=False)
            return
        if level == "escalate_human":
            self._finish_episode(episode, "escalate_human", cured=False)
            return
        history.append(now)
        action = RecoveryAction(level=level, node=episode.node, members=members,
                                started_at=now)
        episode.actions.append(action)
        # The balancer hears about the recovery first, and again once it is done.
        if self._use_failover():
            self.world.lb.set_failover(episode.node, True)
        self.world.execute_recovery(
            episode.node, level, members,
            lambda: self._action_done(episode, action))

    def _use_failover(self) -> bool:
        return self.world.scenario.cluster.failover and len(self.world.nodes) > 1

    def _action_done(self, episode: Episode, action: RecoveryAction) -> None:
        action.completed_at = self.world.loop.now
        if self._use_failover():
            self.world.lb.set_failover(episode.node, False)
        window = self.policy.observation_window_ms
        self.world.loop.after(window, lambda: self._check_symptoms(episode, action))

    def _check_symptoms(self, episode: Episode, action: RecoveryAction) -> None:
        times = self._report_times.get(episode.node, [])
        fresh = len(times) - bisect_right(times, action.completed_at)
        if fresh == 0:
            action.result = "cured"
            self._finish_episode(episode, action.level, cured=True)
            return
        action.result = "persisted"
        idx = LADDER.index(action.level)
        next_level = LADDER[idx + 1]
        members: frozenset[str] = frozenset()
        if next_level == "murb_web":
            registry = self.world.nodes[episode.node].registry
            web = registry.web_component
            members = registry.groups[web].members if web else frozenset()
        self._run_action(episode, next_level, members)

    def _finish_episode(self, episode: Episode, terminal: str, cured: bool) -> None:
        episode.terminal_level = terminal
        episode.cured = cured
        episode.manual_repair_flagged = self.world.manual_repair_flagged(episode.node)
        if terminal == "escalate_human":
            self.halted.add(episode.node)
            self.world.log_action(self.world.loop.now, episode.node,
                                  "escalate_human", "operator", 0, "handed_off")
        self._board(episode.node).reset()
        self._report_times[episode.node] = []
        del self.active[episode.node]
        if self._use_failover():
            self.world.lb.set_failover(episode.node, False)
        self.world.episode_finished(episode)


class RejuvenationService:
    """Rolling microreboots keyed to free-heap thresholds, per node."""

    def __init__(self, world, config: RejuvenationConfig, node: int):
        self.world = world
        self.config = config
        self.node = node
        registry = world.nodes[node].registry
        self.candidates: list[str] = [
            n for n in registry.order if registry.specs[n].kind != KIND_WEB]
        self.released_by_component: dict[str, int] = {n: 0 for n in self.candidates}
        self.pass_active = False
        self.completed_passes = 0
        self.pass_log: list[dict] = []
        self._pass_queue: list[str] = []
        self._pass_done: set[str] = set()

    def tick(self, now: int) -> None:
        if not self.config.enabled or self.pass_active:
            return
        world = self.world
        if not world.nodes[self.node].up or world.rm.active.get(self.node):
            return
        if world.node_recovery_busy(self.node):
            return
        heap = world.nodes[self.node].heap
        if heap.free >= self.config.alarm_bytes:
            return
        if self.config.mode == "restart":
            self.pass_active = True
            world.execute_recovery(self.node, "restart_process", frozenset(),
                                   self._restart_done, reason="rejuvenation")
            return
        self.pass_active = True
        self._pass_queue = list(self.candidates)
        self._pass_done = set()
        self._next_candidate()

    def _restart_done(self) -> None:
        self.pass_active = False
        self.completed_passes += 1
        self.pass_log.append({
            "at": self.world.loop.now,
            "mode": "restart",
            "free_after": self.world.nodes[self.node].heap.free,
        })

    def _next_candidate(self) -> None:
        world = self.world
        heap = world.nodes[self.node].heap
        if heap.free >= self.config.sufficient_bytes:
            self._complete_pass()
            return
        while self._pass_queue:
            candidate = self._pass_queue.pop(0)
            if candidate in self._pass_done:
                continue
            registry = world.nodes[self.node].registry
            members = registry.groups[candidate].members
            self._pass_done.update(members)
            world.execute_recovery(
                self.node, "murb_group", members,
                lambda m=members: self._candidate_done(m),
                reason="rejuvenation")
            return
        # List exhausted and memory still short: the whole process restarts.
        world.execute_recovery(self.node, "restart_process", frozenset(),
                               self._exhausted_restart_done, reason="rejuvenation")

    def _candidate_done(self, members: frozenset[str]) -> None:
        released = self.world.last_release_by_holder
        for member in members:
            if member in self.released_by_component:
                self.released_by_component[member] = released.get(member, 0)
        self._next_candidate()

    def _exhausted_restart_done(self) -> None:
        self._complete_pass()

    def _complete_pass(self) -> None:
        self.pass_active = False
        self.completed_passes += 1
        order = {name: i for i, name in enumerate(self.candidates)}
        self.candidates.sort(key=lambda n: (-self.released_by_component[n], order[n]))
        self.pass_log.append({
            "at": self.world.loop.now,
            "mode": "murb",
            "free_after": self.world.nodes[self.node].heap.free,
            "head": self.candidates[0],
        })


# -- detection headroom arithmetic -----------------------------------------

def fp_headroom(c_micro: float, c_full: float) -> tuple[int, float]:
    """Largest count n of useless cheap recoveries (false positives) between
    useful ones that still beats one expensive recovery, plus the rate n/(n+1)."""
    if c_micro <= 0:
        raise ValueError("c_micro must be positive")
    if c_full < c_micro:
        raise ValueError("c_full must be at least c_micro")
    n = int(c_full // c_micro) - 1
    while (n + 2) * c_micro <= c_full:
        n += 1
    while n > 0 and (n + 1) * c_micro > c_full:
        n -= 1
    return n, n / (n + 1)


def detection_headroom(fail_rate: float, c_micro: float, c_full: float) -> float:
    """Max detection delay (seconds) for which cheap recovery still beats
    instant detection plus expensive recovery; fail_rate in requests/second."""
    if fail_rate <= 0:
        raise ValueError("fail_rate must be positive")
    return (c_full - c_micro) / fail_rate
