import numpy as np
import pytest

from murbsim.app import (OpCatalogError, load_app_catalog, op_catalog,
                         parse_matrix, stationary_distribution,
                         workload_mix_check)

TABLE_MIX = {"read_only": 32, "session_init": 23, "static": 12,
             "search": 12, "session_update": 11, "db_update": 10}


@pytest.fixture(scope="module")
def catalog():
    return load_app_catalog()


class TestOpCatalog:
    def test_exactly_25_operations(self, catalog):
        assert len(catalog.op_list) == 25

    def test_named_operations_present(self, catalog):
        for name in ("Login", "Logout", "Home", "AboutMe", "BrowseCategories",
                     "BrowseRegions", "SearchItemsByCategory", "SearchItemsByRegion",
                     "ViewItem", "ViewUserInfo", "ViewBidHistory", "BuyNow",
                     "DoBuyNow", "CommitBuyNow", "MakeBid", "CommitBid",
                     "LeaveUserFeedback", "CommitUserFeedback", "RegisterNewItem",
                     "RegisterNewUser"):
            assert name in catalog.ops

    def test_commit_bid_shape(self, catalog):
        op = catalog.ops["CommitBid"]
        assert op.path[0] == "WebUI"
        assert op.is_commit_point and not op.idempotent
        assert {"Item", "User", "Bid"} <= set(op.path)

    def test_home_is_static(self, catalog):
        op = catalog.ops["Home"]
        assert op.category == "static"
        assert op.path == ("WebUI",)
        assert op.session_touch == "none"

    def test_login_creates_session_and_uses_authenticator(self, catalog):
        op = catalog.ops["Login"]
        assert op.session_touch == "create"
        assert "Authenticate" in op.path

    def test_every_component_covered(self, catalog, registry):
        used = catalog.components_used()
        assert used == set(registry.specs)

    def test_paths_start_at_web_component(self, catalog):
        for op in catalog.op_list:
            assert op.path[0] == "WebUI"

    def test_read_only_ops_idempotent_commits_not(self, catalog):
        for op in catalog.op_list:
            if op.category in ("static", "read_only", "search"):
                assert op.idempotent, op.name
            if op.name.startswith("Commit"):
                assert op.is_commit_point and not op.idempotent


class TestWorkloadMix:
    def test_shipped_matrix_hits_target_mix(self, catalog):
        mix = workload_mix_check(catalog)
        for category, expect in TABLE_MIX.items():
            assert abs(mix[category] - expect) <= 2.0, (category, mix[category])

    def test_absorbing_chain_all_static(self, catalog):
        states = catalog.matrix.states
        rows = {s: [1.0 if t == "Home" else 0.0 for t in states] for s in states}
        matrix = parse_matrix(
            "states " + " ".join(states) + "\n" +
            "\n".join("row " + s + " " + " ".join(str(p) for p in rows[s])
                      for s in states))
        pi = stationary_distribution(matrix)
        assert pi["Home"] == pytest.approx(1.0, abs=1e-9)

    def test_power_iteration_matches_eigenvector(self, catalog):
        matrix = catalog.matrix
        pi = stationary_distribution(matrix)
        P = np.array([matrix.rows[s] for s in matrix.states])
        vals, vecs = np.linalg.eig(P.T)
        k = int(np.argmin(np.abs(vals - 1.0)))
        v = np.real(vecs[:, k])
        v = v / v.sum()
        for i, s in enumerate(matrix.states):
            assert pi[s] == pytest.approx(v[i], abs=1e-9)

    def test_non_stochastic_matrix_rejected(self):
        text = "states a b\nrow a 0.5 0.4\nrow b 0.5 0.5\n"
        matrix = parse_matrix(text)
        with pytest.raises(OpCatalogError):
            matrix.check_stochastic()


def test_op_catalog_helper_returns_ops():
    assert len(op_catalog()) == 25
