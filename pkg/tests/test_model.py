import numpy as np
import pytest
from hypothesis import given, strategies as st

from greensplit.model import (
    DEFAULT_CU_CONFIG,
    DEFAULT_DU_CONFIG,
    DEFAULT_TARIFF,
    DEFAULT_TRAFFIC_TYPES,
    FunctionChain,
    LoadMatrix,
    NodeEnergyConfig,
    SplitVector,
    TariffSchedule,
    cu_energy,
    du_energy,
    step_opex,
    validate_split_chain,
)

CHAIN4 = FunctionChain(4)
DU = NodeEnergyConfig(5.0, 1.0, 100.0, 100.0)
CU = NodeEnergyConfig(10.0, 0.9, 500.0, 500.0)


def chain_rule_reference(a_vector):
    # the raw single-break condition: (1 - a_x) * sum_{y >= x} a_y == 0 for all x
    n = len(a_vector)
    for x in range(n):
        if (1 - a_vector[x]) * sum(a_vector[y] for y in range(x, n)) != 0:
            return False
    return True


class TestValidateSplitChain:
    def test_valid_break(self):
        assert validate_split_chain([1, 1, 0, 0]) is True

    def test_break_then_resume(self):
        assert validate_split_chain([1, 0, 1, 0]) is False

    def test_degenerate_all_ones_all_zeros(self):
        assert validate_split_chain([1, 1, 1, 1]) is True
        assert validate_split_chain([0, 0, 0, 0]) is True

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            validate_split_chain([1, 2, 0])

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=10))
    def test_matches_raw_constraint(self, vec):
        assert validate_split_chain(vec) == chain_rule_reference(vec)


class TestSplitVector:
    def test_expansion_always_valid(self):
        for k in range(CHAIN4.count + 1):
            sv = SplitVector([[k, k]], CHAIN4)
            for i in range(2):
                assert validate_split_chain(sv.expand(0, i))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            SplitVector([[5, 0]], CHAIN4)
        with pytest.raises(ValueError):
            SplitVector([[-1, 0]], CHAIN4)

    def test_uniform_pins(self):
        sv = SplitVector.uniform(3, DEFAULT_TRAFFIC_TYPES, CHAIN4, point=2)
        assert list(sv.points[:, 0]) == [4, 4, 4]  # urllc pinned
        assert list(sv.points[:, 1]) == [2, 2, 2]


class TestDuEnergy:
    def test_embb_full_split(self):
        # 5 + 2.0 * 4 * 1 = 13
        assert du_energy([2.0], [4], DU, CHAIN4) == pytest.approx(13.0, abs=1e-12)

    def test_zero_load_static_only(self):
        assert du_energy([0.0, 0.0], [1, 4], DU, CHAIN4) == pytest.approx(5.0, abs=1e-12)

    def test_two_types(self):
        # 5 + 1.0*2 + 0.1*4 = 7.4
        assert du_energy([1.0, 0.1], [2, 4], DU, CHAIN4) == pytest.approx(7.4, abs=1e-12)

    def test_invalid_split_rejected(self):
        with pytest.raises(ValueError):
            du_energy([1.0], [5], DU, CHAIN4)

    @given(st.floats(0, 50), st.floats(0, 50), st.integers(0, 4), st.integers(0, 4))
    def test_monotone_in_load_and_split(self, u1, u2, k, k2):
        base = du_energy([u1], [k], DU, CHAIN4)
        assert base >= DU.static_energy
        assert du_energy([u1 + u2], [k], DU, CHAIN4) >= base
        if k2 >= k:
            assert du_energy([u1], [k2], DU, CHAIN4) >= base


class TestCuEnergy:
    def test_two_dus(self):
        # 10 + (1.0*2 + 1.0*2) * 0.9 = 13.6
        loads = [[0.0, 1.0], [0.0, 1.0]]
        splits = [[4, 2], [4, 2]]
        assert cu_energy(loads, splits, CU, CHAIN4) == pytest.approx(13.6, abs=1e-12)

    def test_full_dran_static_only(self):
        loads = [[3.0, 7.0]]
        splits = [[4, 4]]
        assert cu_energy(loads, splits, CU, CHAIN4) == pytest.approx(10.0, abs=1e-12)

    def test_full_offload(self):
        # 10 + 0.5 * 4 * 0.9 = 11.8
        assert cu_energy([[0.5]], [[0]], CU, CHAIN4) == pytest.approx(11.8, abs=1e-12)

    def test_mismatched_shapes_rejected(self):
        with pytest.raises(ValueError):
            cu_energy([[1.0, 1.0]], [[4]], CU, CHAIN4)

    @given(st.floats(0, 20), st.integers(0, 4))
    def test_decreasing_in_split(self, u, k):
        if k < 4:
            e_low = cu_energy([[u]], [[k]], CU, CHAIN4)
            e_high = cu_energy([[u]], [[k + 1]], CU, CHAIN4)
            assert e_high <= e_low


@given(st.floats(0.1, 20), st.integers(0, 4))
def test_total_energy_split_invariant_when_coeffs_equal(u, k):
    # with equal dynamic coefficients the system total is split-independent
    cfg = NodeEnergyConfig(5.0, 1.0, 0.0, 0.0)
    cfg_cu = NodeEnergyConfig(10.0, 1.0, 0.0, 0.0)
    total = du_energy([u], [k], cfg, CHAIN4) + cu_energy([[u]], [[k]], cfg_cu, CHAIN4)
    ref = du_energy([u], [0], cfg, CHAIN4) + cu_energy([[u]], [[0]], cfg_cu, CHAIN4)
    assert total == pytest.approx(ref, rel=1e-12)


class TestStepOpex:
    def test_mixed_nodes(self):
        assert step_opex(13.6, 3.6, [(13.0, 13.0)], 0.07) == pytest.approx(0.70, abs=1e-12)

    def test_fully_solar(self):
        assert step_opex(12.0, 12.0, [(7.0, 7.0), (5.0, 5.0)], 0.11) == pytest.approx(0.0, abs=1e-15)

    def test_no_dus(self):
        assert step_opex(10.0, 0.0, [], 0.11) == pytest.approx(1.10, abs=1e-12)

    def test_overdispatch_rejected(self):
        with pytest.raises(ValueError):
            step_opex(10.0, 11.0, [], 0.07)
        with pytest.raises(ValueError):
            step_opex(10.0, 0.0, [(5.0, 6.0)], 0.07)

    @given(st.floats(0, 100), st.floats(0, 1), st.floats(0.01, 0.2))
    def test_linear_in_price_and_residual(self, e, frac, price):
        p = e * frac
        base = step_opex(e, p, [], price)
        assert base == pytest.approx((e - p) * price, rel=1e-12)
        assert step_opex(e, p, [], 2 * price) == pytest.approx(2 * base, rel=1e-9)


class TestTariff:
    def test_default_bands(self):
        # night 22-06 -> 0.03, day 06-17 -> 0.07, peak 17-22 -> 0.11
        t = DEFAULT_TARIFF
        assert t.price(23) == 0.03 and t.price(2) == 0.03
        assert t.price(6) == 0.07 and t.price(16) == 0.07
        assert t.price(17) == 0.11 and t.price(21) == 0.11
        assert t.price(22) == 0.03
        assert t.price(25) == t.price(1)

    def test_length_enforced(self):
        with pytest.raises(ValueError):
            TariffSchedule((0.1,) * 23)
        with pytest.raises(ValueError):
            TariffSchedule((-0.1,) + (0.1,) * 23)


class TestDefaults:
    def test_energy_table(self):
        assert (DEFAULT_CU_CONFIG.static_energy, DEFAULT_CU_CONFIG.dynamic_coeff,
                DEFAULT_CU_CONFIG.panel_size, DEFAULT_CU_CONFIG.battery_capacity) == (10.0, 0.9, 500.0, 500.0)
        assert (DEFAULT_DU_CONFIG.static_energy, DEFAULT_DU_CONFIG.dynamic_coeff,
                DEFAULT_DU_CONFIG.panel_size, DEFAULT_DU_CONFIG.battery_capacity) == (5.0, 1.0, 100.0, 100.0)

    def test_traffic_types(self):
        urllc, embb = DEFAULT_TRAFFIC_TYPES
        assert urllc.pinned_to_du and not embb.pinned_to_du
        assert embb.load_scale == 10 * urllc.load_scale

    def test_negative_config_rejected(self):
        with pytest.raises(ValueError):
            NodeEnergyConfig(-1.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            FunctionChain(0)


class TestLoadMatrix:
    def test_roundtrip_csv(self, tmp_path):
        values = np.array([[[0.5, 1.25], [7.0, 0.0]]])
        lm = LoadMatrix(values, DEFAULT_TRAFFIC_TYPES)
        path = tmp_path / "loads.csv"
        lm.to_csv(path)
        back = LoadMatrix.from_csv(path, DEFAULT_TRAFFIC_TYPES)
        np.testing.assert_array_equal(back.values, values)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            LoadMatrix(np.array([[[-0.1]]]), DEFAULT_TRAFFIC_TYPES[:1])
