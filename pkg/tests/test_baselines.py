import pytest

from greensplit.baselines import PolicyKind, cran_policy, dran_policy
from greensplit.env import NodeAction, Observation
from greensplit.model import DEFAULT_TRAFFIC_TYPES, FunctionChain

CHAIN = FunctionChain(4)
OBS = Observation(0.0, (0.1, 1.0), 12)


class TestPolicies:
    def test_dran_keeps_chain_local(self):
        act = dran_policy(OBS, chain=CHAIN, types=DEFAULT_TRAFFIC_TYPES, n_levels=3)
        assert act == NodeAction(2, (4,))

    def test_cran_offloads(self):
        act = cran_policy(OBS, chain=CHAIN, types=DEFAULT_TRAFFIC_TYPES, n_levels=3)
        assert act == NodeAction(2, (0,))

    def test_cu_actions_have_no_splits(self):
        for policy in (dran_policy, cran_policy):
            act = policy(OBS, chain=CHAIN, types=DEFAULT_TRAFFIC_TYPES, n_levels=3, for_cu=True)
            assert act.split_points == ()
            assert act.dispatch_level == 2

    def test_observation_irrelevant(self):
        other = Observation(55.0, (0.9, 9.0), 3)
        assert dran_policy(OBS, chain=CHAIN, types=DEFAULT_TRAFFIC_TYPES, n_levels=3) == \
            dran_policy(other, chain=CHAIN, types=DEFAULT_TRAFFIC_TYPES, n_levels=3)

    def test_identical_when_chain_degenerate(self):
        chain1 = FunctionChain(1)
        d = dran_policy(OBS, chain=chain1, types=DEFAULT_TRAFFIC_TYPES, n_levels=2)
        c = cran_policy(OBS, chain=chain1, types=DEFAULT_TRAFFIC_TYPES, n_levels=2)
        assert d.dispatch_level == c.dispatch_level
        assert d.split_points == (1,) and c.split_points == (0,)


class TestPolicyKind:
    def test_members(self):
        assert {k.value for k in PolicyKind} == {"dran", "cran", "rldfs_ql", "rldfs_sarsa", "oracle"}

    def test_trained_mapping(self):
        assert PolicyKind.RLDFS_QL.algorithm == "q_learning"
        assert PolicyKind.RLDFS_SARSA.algorithm == "sarsa"
        assert not PolicyKind.DRAN.trained
        with pytest.raises(ValueError):
            PolicyKind.CRAN.algorithm
