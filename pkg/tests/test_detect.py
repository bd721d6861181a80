import pytest

from murbsim.app import Response, canonical_fingerprint
from murbsim.detect import (DetectorProfile, FailureReport, ReportChannel,
                            classify_response, compare_responses)
from murbsim.simcore import EventLoop, RngStream


def resp(outcome="ok", op="ViewItem", client=3, variant="", latency=15):
    return Response(op_name=op, outcome=outcome,
                    body_fingerprint=canonical_fingerprint(op, str(client), variant),
                    latency_ms=latency, client_id=client)


def oracle_resp(op="ViewItem", client=3, latency=999):
    return resp(op=op, client=client, latency=latency)


class TestFastDetector:
    def setup_method(self):
        self.profile = DetectorProfile(kind="fast")
        self.rng = RngStream(1)

    def test_exception_flagged_as_keyword(self):
        assert classify_response(self.profile, resp("error:exception"), self.rng) == "keyword"

    def test_connection_and_http_classes(self):
        assert classify_response(self.profile, resp("error:connection"), self.rng) == "connection"
        assert classify_response(self.profile, resp("error:component_unavailable"),
                                 self.rng) == "http_error"

    def test_session_loss_is_app_check(self):
        assert classify_response(self.profile, resp("error:session_lost"),
                                 self.rng) == "app_check"

    def test_clean_ok_not_flagged(self):
        assert classify_response(self.profile, resp(), self.rng) is None

    def test_wrong_value_missed_by_fast_detector(self):
        assert classify_response(self.profile, resp(variant="divergent"), self.rng) is None

    def test_retry_after_never_flagged(self):
        assert classify_response(self.profile, resp("retry_after"), self.rng) is None

    def test_fp_fn_bounds_validated(self):
        with pytest.raises(ValueError):
            DetectorProfile(fp_rate=1.5)

    def test_fast_flags_iff_overt_error(self):
        # zero-noise invariant over every outcome class
        for outcome, flagged in [("ok", False), ("error:connection", True),
                                 ("error:component_unavailable", True),
                                 ("error:exception", True), ("error:ttl_expired", True),
                                 ("error:session_lost", True)]:
            got = classify_response(self.profile, resp(outcome), self.rng)
            assert (got is not None) == flagged


class TestComparisonDetector:
    def setup_method(self):
        self.profile = DetectorProfile(kind="comparison")
        self.rng = RngStream(1)

    def test_wrong_value_caught(self):
        assert classify_response(self.profile, resp(variant="divergent"),
                                 self.rng) == "divergence"

    def test_identical_fingerprints_ok(self):
        assert compare_responses(resp(), oracle_resp()) is None

    def test_latency_differences_normalized(self):
        assert compare_responses(resp(latency=5), oracle_resp(latency=5000)) is None

    def test_divergent_fingerprint_flagged(self):
        assert compare_responses(resp(variant="divergent"), oracle_resp()) == "divergence"

    def test_missing_oracle_abstains(self):
        assert compare_responses(resp(variant="divergent"), None) is None


class TestNoise:
    def test_false_positives_at_rate_one(self):
        profile = DetectorProfile(fp_rate=1.0)
        assert classify_response(profile, resp(), RngStream(1)) == "keyword"

    def test_false_negatives_at_rate_one(self):
        profile = DetectorProfile(fn_rate=1.0)
        assert classify_response(profile, resp("error:exception"), RngStream(1)) is None


class TestReportChannel:
    def test_zero_delay_same_tick(self):
        loop = EventLoop()
        seen = []
        ch = ReportChannel(loop, RngStream(1), delay_ms=0, drop_rate=0.0,
                           sink=seen.append)
        ch.report(FailureReport("ViewItem", "keyword", observed_at=0,
                                client_id=1, node_id=0))
        loop.run_until(0)
        assert len(seen) == 1

    def test_delivery_time_is_exact(self):
        loop = EventLoop()
        seen = []
        ch = ReportChannel(loop, RngStream(1), delay_ms=40, drop_rate=0.0,
                           sink=lambda r: seen.append(loop.now))
        ch.report(FailureReport("ViewItem", "keyword", observed_at=100,
                                client_id=1, node_id=0), t_det_ms=7)
        loop.run_until(1_000)
        assert seen == [147]      # observed + t_det + channel delay

    def test_drop_rate_one_never_delivers(self):
        loop = EventLoop()
        seen = []
        ch = ReportChannel(loop, RngStream(1), delay_ms=0, drop_rate=1.0,
                           sink=seen.append)
        for i in range(20):
            ch.report(FailureReport("ViewItem", "keyword", 0, i, 0))
        loop.run_until(10)
        assert seen == []

    def test_drop_rate_matches_seeded_binomial(self):
        loop = EventLoop()
        delivered = []
        rng = RngStream(77).fork("channel")
        ch = ReportChannel(loop, rng, delay_ms=0, drop_rate=0.1,
                           sink=delivered.append)
        for i in range(1_000):
            ch.report(FailureReport("ViewItem", "keyword", 0, i, 0))
        loop.run_until(10)
        # oracle: replay the identical stream and count survivors independently
        replay = RngStream(77).fork("channel")
        expected = sum(1 for _ in range(1_000) if not replay.random() < 0.1)
        assert len(delivered) == expected
        assert 850 <= len(delivered) <= 950
