"""End-to-end failure detection at the client edge.

Two detector kinds: a fast heuristic (network errors, error pages,
application-specific checks) and a comparison detector that diffs each
response against a known-good rendering and therefore also catches
wrong-value failures. Reports travel to the recovery manager over a
best-effort channel with configurable delay and drop probability.
"""

from __future__ import annotations

from dataclasses import dataclass

from .app import Response, canonical_fingerprint

FAULTY_CONNECTION = "connection"
FAULTY_HTTP = "http_error"
FAULTY_KEYWORD = "keyword"
FAULTY_APP_CHECK = "app_check"
FAULTY_DIVERGENCE = "divergence"

_ERROR_TO_FAILURE = {
    "connection": FAULTY_CONNECTION,
    "component_unavailable": FAULTY_HTTP,
    "exception": FAULTY_KEYWORD,
    "ttl_expired": FAULTY_KEYWORD,
    "session_lost": FAULTY_APP_CHECK,
}


@dataclass(frozen=True)
class FailureReport:
    op_name: str
    failure_class: str
    observed_at: int
    client_id: int
    node_id: int


@dataclass
class DetectorProfile:
    kind: str = "fast"            # fast | comparison
    t_det_ms: int = 0
    fp_rate: float = 0.0
    fn_rate: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.fp_rate <= 1.0 or not 0.0 <= self.fn_rate <= 1.0:
            raise ValueError("FP/FN rates must lie in [0, 1]")


def compare_responses(resp: Response, oracle_resp: Response | None) -> str | None:
    """Diff against a fault-free rendering; timing fields are normalized away."""
    if oracle_resp is None:
        return None                                   # oracle unavailable: abstain
    if resp.body_fingerprint != oracle_resp.body_fingerprint:
        return FAULTY_DIVERGENCE
    return None


def classify_response(profile: DetectorProfile, resp: Response, rng) -> str | None:
    """Returns a failure class, or None for a response deemed healthy."""
    verdict: str | None = None
    err = resp.error_class
    if err is not None:
        verdict = _ERROR_TO_FAILURE.get(err, FAULTY_KEYWORD)
    elif resp.ok and profile.kind == "comparison":
        oracle = Response(
            op_name=resp.op_name,
            outcome="ok",
            body_fingerprint=canonical_fingerprint(resp.op_name, str(resp.client_id)),
            latency_ms=0,
        )
        verdict = compare_responses(resp, oracle)
    # A retry_after outcome is masked, not failed; noise does not apply to it.
    if resp.outcome == "retry_after":
        return None
    if verdict is None:
        if profile.fp_rate > 0.0 and rng.random() < profile.fp_rate:
            return FAULTY_KEYWORD
        return None
    if profile.fn_rate > 0.0 and rng.random() < profile.fn_rate:
        return None
    return verdict


class ReportChannel:
    """Best-effort report delivery with fixed delay and seeded drops."""

    def __init__(self, loop, rng, delay_ms: int, drop_rate: float, sink):
        self.loop = loop
        self.rng = rng
        self.delay_ms = delay_ms
        self.drop_rate = drop_rate
        self.sink = sink              # callable(report)
        self.sent = 0
        self.delivered = 0

    def report(self, report: FailureReport, t_det_ms: int = 0) -> None:
        self.sent += 1
        if self.drop_rate > 0.0 and self.rng.random() < self.drop_rate:
            return
        deliver_at = report.observed_at + t_det_ms + self.delay_ms
        self.delivered += 1
        self.loop.schedule(max(deliver_at, self.loop.now),
                           lambda r=report: self.sink(r))
