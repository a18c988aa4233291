import math

import pytest
from hypothesis import given, strategies as st

from socialreward.core import (
    EmotionTaxonomy,
    FusionConfig,
    Modality,
    ModalitySnapshot,
    average_modality,
    default_weights,
    l2_norm,
    normalize_unit,
    reward,
)
from socialreward.errors import ConfigError, DimensionMismatch, Negative, NonFinite, ZeroVector

K = 7
raw_vectors = st.lists(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False), min_size=K, max_size=K
).filter(lambda v: any(x > 1e-300 for x in v))
unit_vectors = raw_vectors.map(normalize_unit)


def e(i, k=K):
    return tuple(1.0 if j == i else 0.0 for j in range(k))


class TestTaxonomy:
    def test_default_has_seven_labels(self, taxonomy):
        assert taxonomy.k == 7
        assert taxonomy.index("happiness") == 3

    @pytest.mark.parametrize("labels", [("a",), ("a", "a"), ("a", "B"), ("a", "")])
    def test_rejects_bad_labels(self, labels):
        with pytest.raises(ConfigError):
            EmotionTaxonomy(labels)


class TestNormalize:
    def test_unit_vector_unchanged(self):
        assert normalize_unit(e(0)) == e(0)

    def test_three_four_five(self):
        assert normalize_unit((3, 4, 0, 0, 0, 0, 0)) == pytest.approx((0.6, 0.8, 0, 0, 0, 0, 0), abs=1e-15)

    def test_uniform_simplex(self):
        # 1/sqrt(7) to 30 digits: 0.377964473009227227214516536234
        out = normalize_unit((0.2,) * 7)
        assert out == pytest.approx((0.3779644730092272,) * 7, abs=1e-15)

    def test_errors(self):
        with pytest.raises(ZeroVector):
            normalize_unit((0.0,) * 7)
        with pytest.raises(NonFinite):
            normalize_unit((float("nan"),) + (1.0,) * 6)
        with pytest.raises(NonFinite):
            normalize_unit((float("inf"),) + (1.0,) * 6)
        with pytest.raises(Negative):
            normalize_unit((-0.1,) + (1.0,) * 6)

    def test_tiny_values_do_not_underflow(self):
        out = normalize_unit((1e-200, 1e-200) + (0.0,) * 5)
        assert abs(l2_norm(out) - 1) < 1e-12

    @given(raw_vectors)
    def test_unit_norm_and_idempotent(self, v):
        u = normalize_unit(v)
        assert abs(math.fsum(x * x for x in u) - 1) <= 1e-9
        assert max(abs(a - b) for a, b in zip(normalize_unit(u), u)) <= 1e-12

    @given(raw_vectors)
    def test_argmax_preserved(self, v):
        top = max(v)
        if v.count(top) == 1:
            u = normalize_unit(v)
            assert u.index(max(u)) == v.index(top)


class TestAverage:
    def snap(self, *vectors):
        return ModalitySnapshot(Modality.FER, tuple(vectors), tuple(f"m{i}" for i in range(len(vectors))))

    def test_empty_is_absent(self):
        assert average_modality(self.snap()) is None

    def test_single_model(self):
        assert average_modality(self.snap(e(0))) == e(0)

    def test_symmetric_pair(self):
        assert average_modality(self.snap(e(0), e(1))) == (0.5, 0.5, 0, 0, 0, 0, 0)

    def test_mean_is_not_renormalized(self):
        a = (0.6, 0.8, 0, 0, 0, 0, 0)
        b = (0.8, 0.6, 0, 0, 0, 0, 0)
        out = average_modality(self.snap(a, b))
        assert out == pytest.approx((0.7, 0.7, 0, 0, 0, 0, 0), abs=1e-15)
        # sqrt(0.98) = 0.989949493661166534...
        assert l2_norm(out) == pytest.approx(0.9899494936611665, abs=1e-15)

    def test_rejects_non_unit(self):
        with pytest.raises(ConfigError):
            self.snap((0.5,) + (0.0,) * 6)

    @given(st.lists(unit_vectors, min_size=1, max_size=5), st.randoms())
    def test_matches_elementwise_mean_and_order_free(self, vectors, rnd):
        out = average_modality(self.snap(*vectors))
        brute = [sum(v[i] for v in vectors) / len(vectors) for i in range(K)]
        assert out == pytest.approx(brute, abs=1e-15)
        shuffled = list(vectors)
        rnd.shuffle(shuffled)
        assert average_modality(self.snap(*shuffled)) == out


class TestReward:
    def test_cauchy_schwarz_equality(self, cfg):
        cfg1 = FusionConfig(cfg.w_fer, cfg.w_ser, k_fer=1.0, k_ser=0.0, k_presence=0.0)
        r_total, *_ = reward(cfg1.w_fer, None, 0.0, cfg1)
        assert r_total == pytest.approx(1.0, abs=1e-15)

    def test_empty_scene(self, cfg):
        assert reward(None, None, 0.0, cfg) == (0.0, 0.0, 0.0, 0.0)

    def test_mixed_example(self):
        cfg = FusionConfig(e(0), e(0), k_fer=1.0, k_ser=0.5, k_presence=0.1)
        r_total, r_fer, r_ser, r_presence = reward((0.6, 0.8, 0, 0, 0, 0, 0), e(0), 1.0, cfg)
        # independent: 1*0.6 + 0.5*1 + 0.1*1
        assert (r_fer, r_ser, r_presence) == pytest.approx((0.6, 0.5, 0.1), abs=1e-15)
        assert r_total == pytest.approx(1.2, abs=1e-15)
        assert r_total == r_fer + r_ser + r_presence

    def test_dimension_mismatch(self, cfg):
        with pytest.raises(DimensionMismatch):
            reward((1.0, 0.0), None, 0.0, cfg)

    def test_default_weights(self, taxonomy):
        w = default_weights(taxonomy)
        # happiness weight = 1/sqrt(5.25) = 0.436435780471984762...
        assert w[taxonomy.index("happiness")] == pytest.approx(0.43643578047198476, abs=1e-15)
        assert w[taxonomy.index("neutral")] == 0.0

    @given(st.lists(unit_vectors, min_size=1, max_size=5), st.floats(0, 1))
    def test_bound(self, vectors, presence):
        cfg = FusionConfig.default(k_fer=1.5, k_ser=-0.7, k_presence=0.3)
        x = average_modality(ModalitySnapshot(Modality.FER, tuple(vectors), tuple(map(str, range(len(vectors))))))
        r_total, r_fer, r_ser, _ = reward(x, x, presence, cfg)
        assert abs(r_fer) <= abs(cfg.k_fer) + 1e-12
        assert abs(r_ser) <= abs(cfg.k_ser) + 1e-12
        assert abs(r_total) <= cfg.gain_bound + 1e-12

    @given(unit_vectors, st.floats(-10, 10, allow_nan=False).filter(lambda k: k == 0 or abs(k) > 1e-100))
    def test_doubling_gain_doubles_component(self, x, k):
        a = FusionConfig.default(k_fer=k)
        b = FusionConfig.default(k_fer=2 * k)
        assert reward(x, None, 0.0, b)[1] == 2 * reward(x, None, 0.0, a)[1]

    @given(unit_vectors, unit_vectors, st.floats(0, 1), st.floats(0.1, 3))
    def test_linear_in_presence(self, x, y, p, scale):
        cfg = FusionConfig.default()
        base = reward(x, y, 0.0, cfg)
        assert reward(x, y, p, cfg)[3] == pytest.approx(cfg.k_presence * p)
        assert reward(x, y, p, cfg)[1:3] == base[1:3]

    @given(unit_vectors, st.permutations(range(K)))
    def test_permutation_equivariance(self, x, perm):
        cfg = FusionConfig.default()
        permuted = FusionConfig.default(w_fer=[cfg.w_fer[i] for i in perm], w_ser=[cfg.w_ser[i] for i in perm])
        r1 = reward(x, x, 0.5, cfg)
        r2 = reward([x[i] for i in perm], [x[i] for i in perm], 0.5, permuted)
        assert r1 == pytest.approx(r2, abs=1e-15)


class TestFusionConfig:
    def test_non_unit_weights_rejected(self, cfg):
        with pytest.raises(ConfigError, match="unit L2 norm"):
            FusionConfig((1.0,) * 7, cfg.w_ser)

    def test_window_shorter_than_tick_rejected(self):
        with pytest.raises(ConfigError):
            FusionConfig.default(tick_period=100, fer_window=50)

    def test_bad_policy(self):
        with pytest.raises(ConfigError):
            FusionConfig.default(missing_modality_policy="hold")
