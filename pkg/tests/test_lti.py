import json

import numpy as np
import pytest

from conftest import random_stable_tf
from gramscale.lti import (
    LTIError,
    PlantFormatError,
    RationalTF,
    StateSpaceModel,
    TransferMatrix,
    dc_gain,
    divide,
    is_proper,
    is_stable,
    pade,
    rationalize,
    realize,
    step_response,
    zoh,
)


class TestRationalTF:
    def test_leading_zeros_stripped(self):
        tf = RationalTF([0, 0, 2, 1], [0, 1, 3])
        assert tf.num == (2.0, 1.0)
        assert tf.den == (1.0, 3.0)

    def test_zero_numerator_normalizes(self):
        tf = RationalTF([0.0], [5, 1], 0.3)
        assert tf.is_zero and tf.den == (1.0,) and tf.delay == 0.0

    def test_zero_denominator_rejected(self):
        with pytest.raises(LTIError):
            RationalTF([1], [0])

    @pytest.mark.parametrize("num,den,stable,proper", [
        ([1], [1, 1], True, True),
        ([1, 0, 1], [1, 1], True, False),
        ([1], [1, -2], False, True),
        ([1], [1, 0], False, True),
    ])
    def test_stability_and_properness(self, num, den, stable, proper):
        tf = RationalTF(num, den)
        assert is_stable(tf) is stable
        assert is_proper(tf) is proper

    def test_dc_gain_scalar(self):
        assert RationalTF([2], [1, 3]).dc_gain() == pytest.approx(2 / 3)
        assert RationalTF([1, 2], [1, 1, 4], delay=1.0).dc_gain() == pytest.approx(0.5)

    def test_dc_gain_integrator(self):
        with pytest.raises(LTIError, match="integrating channel"):
            RationalTF([1], [1, 0]).dc_gain()

    def test_evaluate_includes_delay(self):
        tf = RationalTF([1], [1, 1], 0.5)
        w = 0.7
        assert tf.freq_response(w) == pytest.approx(np.exp(-0.5j * w) / (1 + 1j * w))

    def test_mul_and_neg(self):
        a = RationalTF([1], [1, 1], 0.2)
        b = RationalTF([2, 1], [1, 3], 0.1)
        s = 0.3 + 1.1j
        assert (a * b).evaluate(s) == pytest.approx(a.evaluate(s) * b.evaluate(s))
        assert (-a).evaluate(s) == pytest.approx(-a.evaluate(s))
        assert (a * 3.0).evaluate(s) == pytest.approx(3.0 * a.evaluate(s))

    def test_minreal_cancels_common_factor(self):
        tf = RationalTF(np.polymul([1, 2], [1, 5]), np.polymul([1, 2], [1, 1, 1]))
        red = tf.minreal()
        assert red.order == 2
        assert red.evaluate(0.4j) == pytest.approx(tf.evaluate(0.4j))

    def test_dict_round_trip(self):
        tf = RationalTF([1.5, -2.0], [3.0, 1.0, 4.0], 0.25)
        assert RationalTF.from_dict(tf.to_dict()) == tf
        assert RationalTF.from_dict(None).is_zero

    def test_hashable_for_caching(self):
        assert hash(RationalTF([1], [1, 1])) == hash(RationalTF([1.0], [1.0, 1.0]))


class TestDivide:
    def test_unity(self):
        q = divide(RationalTF([1], [1, 1]), RationalTF([1], [1, 1]))
        assert q.order == 0 and q.dc_gain() == pytest.approx(1.0)

    def test_cross_multiplication(self):
        q = divide(RationalTF([1], [1, 1]), RationalTF([1], [1, 2]))
        q = q.normalized()
        np.testing.assert_allclose(q.num, [1, 2])
        np.testing.assert_allclose(q.den, [1, 1])

    def test_negative_net_delay_is_non_causal(self):
        q = divide(RationalTF([1], [1, 1]), RationalTF([1], [1, 1], 0.5))
        assert not q.is_causal

    def test_zero_divisor(self):
        with pytest.raises(LTIError):
            divide(RationalTF([1], [1, 1]), RationalTF())

    def test_recovers_numerator(self, rng):
        for _ in range(20):
            a = random_stable_tf(rng, int(rng.integers(1, 4)))
            b = random_stable_tf(rng, int(rng.integers(1, 4)))
            q = divide(a, b)
            for w in np.logspace(-2, 2, 7):
                s = 1j * w
                assert (q * b).evaluate(s) == pytest.approx(a.evaluate(s), rel=1e-8)


class TestPade:
    def test_first_order(self):
        num, den = pade(2.0, 1)
        np.testing.assert_allclose(num, [-1.0, 1.0])
        np.testing.assert_allclose(den, [1.0, 1.0])

    def test_all_pass(self):
        num, den = pade(0.7, 3)
        w = np.logspace(-2, 2, 20) * 1j
        np.testing.assert_allclose(np.abs(np.polyval(num, w) / np.polyval(den, w)), 1.0, atol=1e-12)

    def test_zero_delay_is_unity(self):
        num, den = pade(0.0, 2)
        assert list(num) == [1.0] and list(den) == [1.0]

    def test_rationalize_rejects_noncausal(self):
        with pytest.raises(LTIError):
            rationalize(RationalTF([1], [1, 1], -0.1))


class TestRealize:
    def test_first_order_canonical(self):
        ss = realize(RationalTF([1], [1, 1]), 2)
        np.testing.assert_array_equal(ss.A, [[-1.0]])
        np.testing.assert_array_equal(ss.B, [[1.0]])
        np.testing.assert_array_equal(ss.C, [[1.0]])
        np.testing.assert_array_equal(ss.D, [[0.0]])

    def test_dc_gain_preserved(self):
        ss = realize(RationalTF([2], [1, 3]), 2)
        assert ss.evaluate(0.0)[0, 0].real == pytest.approx(2 / 3)

    def test_pade_frequency_response(self):
        # oracle: exact delayed response evaluated directly
        ss = realize(RationalTF([1], [1, 1], 0.5), 2)
        w = 0.5
        exact = np.exp(-0.25j) / (1 + 0.5j)
        assert abs(ss.freq_response(w)[0, 0] - exact) < 1e-3

    def test_improper_rejected(self):
        with pytest.raises(LTIError, match="improper transfer function"):
            realize(RationalTF([1, 0, 1], [1, 1]), 2)

    def test_biproper_feedthrough(self):
        ss = realize(RationalTF([2, 1], [1, 3]), 2)
        assert ss.D[0, 0] == pytest.approx(2.0)

    def test_round_trip_frequency_response(self, rng):
        for _ in range(30):
            tf = random_stable_tf(rng, int(rng.integers(1, 6)), strictly_proper=rng.random() < 0.5)
            ss = realize(tf, 2)
            for w in np.logspace(-2, 2, 20):
                ref = tf.freq_response(w)
                assert abs(ss.freq_response(w)[0, 0] - ref) <= 1e-8 * max(1.0, abs(ref))

    def test_arrays_read_only(self):
        ss = realize(RationalTF([1], [1, 2, 1]), 2)
        with pytest.raises(ValueError):
            ss.A[0, 0] = 5.0

    def test_state_space_dimension_check(self):
        with pytest.raises(LTIError):
            StateSpaceModel(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), np.zeros((1, 1)))


class TestZOH:
    def test_scalar(self):
        Ad, Bd = zoh(np.array([[-2.0]]), np.array([[1.0]]), 0.1)
        assert Ad[0, 0] == pytest.approx(np.exp(-0.2))
        assert Bd[0, 0] == pytest.approx((1 - np.exp(-0.2)) / 2)


class TestStepResponse:
    def test_first_order(self):
        t = np.linspace(0, 5, 501)
        y = step_response(RationalTF([2], [3, 1]), t)
        np.testing.assert_allclose(y, 2 * (1 - np.exp(-t / 3)), atol=1e-12)

    @pytest.mark.parametrize("delay", [0.3, 0.37, 1.0])
    def test_exact_delay_shift(self, delay):
        t = np.linspace(0, 5, 101)  # 0.37 falls between samples
        y = step_response(RationalTF([1], [1, 1], delay), t)
        ref = np.where(t >= delay, 1 - np.exp(-(t - delay)), 0.0)
        np.testing.assert_allclose(y, ref, atol=1e-12)

    def test_zero_tf(self):
        assert not step_response(RationalTF(), np.linspace(0, 1, 5)).any()

    def test_static_gain(self):
        y = step_response(RationalTF([4], [2]), np.linspace(0, 1, 5))
        np.testing.assert_allclose(y, 2.0)


class TestTransferMatrix:
    def plant(self):
        return TransferMatrix(
            [[RationalTF([1], [1, 1]), RationalTF()],
             [RationalTF([2], [1, 3], 0.5), RationalTF([1, 2], [1, 1, 4])]],
            ["a", "b"], ["x", "y"],
        )

    def test_dc_gain(self):
        np.testing.assert_allclose(dc_gain(self.plant()), [[1, 0], [2 / 3, 0.5]])

    def test_dc_gain_identity(self):
        G = TransferMatrix([[RationalTF([1], [1, 1]), RationalTF()], [RationalTF(), RationalTF([1], [1, 1])]])
        np.testing.assert_array_equal(dc_gain(G), np.eye(2))

    def test_dc_gain_matches_evaluation(self):
        G = self.plant()
        np.testing.assert_allclose(dc_gain(G), G.evaluate(0.0).real)

    def test_json_round_trip(self, tmp_path):
        G = self.plant()
        path = tmp_path / "plant.json"
        G.save(path)
        H = TransferMatrix.load(path)
        assert H.to_dict() == G.to_dict()
        doc = json.loads(path.read_text())
        assert set(doc) == {"inputs", "outputs", "entries"}
        assert doc["entries"][1][0] == {"num": [2.0], "den": [1.0, 3.0], "delay": 0.5}

    def test_default_labels(self):
        G = TransferMatrix([[RationalTF([1], [1, 1])] * 3] * 2)
        assert G.input_names == ("u1", "u2", "u3") and G.output_names == ("y1", "y2")

    @pytest.mark.parametrize("text", ["{", "[]", '{"entries": [[{"den": [1]}]]}',
                                      '{"entries": [[{"num": [1]}], []]}'])
    def test_malformed_json(self, text):
        with pytest.raises(PlantFormatError):
            TransferMatrix.from_json(text)

    def test_label_mismatch(self):
        with pytest.raises(LTIError):
            TransferMatrix([[RationalTF([1], [1, 1])]], ["a", "b"], ["x"])

    def test_permuted_and_scaled(self):
        G = self.plant()
        P = G.permuted([1, 0], [1, 0])
        assert P.output_names == ("y", "x") and P[0, 0] == G[1, 1]
        S = G.scaled([2, 1], [1, 3])
        assert dc_gain(S)[0, 0] == pytest.approx(2.0)
        assert dc_gain(S)[1, 1] == pytest.approx(1.5)
