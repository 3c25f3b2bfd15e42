import itertools

import numpy as np
import pytest

from oracles import ni_exhaustive, ranked_permutations
from gramscale.interaction import InteractionMatrix
from gramscale.lti import RationalTF, TransferMatrix
from gramscale.pairing import (
    NoFeasiblePairingError,
    PairingDecision,
    PairingError,
    feedforward_block,
    max_assignment,
    niederlinski_index,
    pair_with_ni,
    ranked_assignments,
    rga_pairing,
    sparse_scores,
    sparse_structure,
)


class TestDecision:
    def test_not_permutation(self):
        with pytest.raises(PairingError):
            PairingDecision((0, 0), 1.0)

    def test_edge_into_own_input(self):
        with pytest.raises(PairingError):
            PairingDecision((0, 1), 1.0, feedforward=((1, 1),))

    def test_dict_round_trip(self):
        d = PairingDecision((1, 0, 2), 1.5, ni=0.25, feedforward=((0, 2),))
        doc = d.to_dict(output_names=["a", "b", "c"], input_names=["x", "y", "z"])
        assert doc["labels"] == [["a", "y"], ["b", "x"], ["c", "z"]]
        back = PairingDecision.from_dict(doc)
        assert back.assignment == d.assignment and back.feedforward == d.feedforward and back.ni == 0.25


class TestMaxAssignment:
    def test_identity(self):
        d = max_assignment(np.eye(2))
        assert d.assignment == (0, 1) and d.total_interaction == 2.0

    def test_non_square(self):
        with pytest.raises(PairingError):
            max_assignment(np.ones((2, 3)))

    def test_ties_are_lexicographic(self):
        assert max_assignment(np.ones((4, 4))).assignment == (0, 1, 2, 3)
        M = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]], float)
        assert max_assignment(M).assignment == (0, 1, 2)

    def test_exhaustive_oracle(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 7))
            M = rng.random((n, n))
            if rng.random() < 0.3:
                M = np.round(M * 4) / 4  # exact dyadic ties
            total, perm = ranked_permutations(M)[0]
            d = max_assignment(M)
            assert d.assignment == perm
            assert d.total_interaction == total

    def test_equivariance(self, rng):
        for _ in range(50):
            n = 5
            M = rng.random((n, n))
            p, q = rng.permutation(n), rng.permutation(n)
            base = max_assignment(M).assignment
            moved = max_assignment(M[np.ix_(p, q)]).assignment
            qinv = np.argsort(q)
            # output p[i] is paired with input base[p[i]] = q[moved[i]]
            assert all(base[p[i]] == q[moved[i]] for i in range(n))
            assert all(qinv[base[p[i]]] == moved[i] for i in range(n))

    def test_accepts_interaction_matrix(self, hen):
        assert max_assignment(hen["PM"]).assignment == (0, 3, 1, 2)


class TestRanked:
    def test_two_by_two(self):
        out = ranked_assignments(np.array([[2, 1], [1, 1]], float), 5)
        assert [(d.assignment, d.total_interaction) for d in out] == [((0, 1), 3.0), ((1, 0), 2.0)]

    def test_k_one(self, rng):
        M = rng.random((5, 5))
        assert ranked_assignments(M, 1)[0] == max_assignment(M)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            ranked_assignments(np.eye(2), 0)

    def test_exhaustive_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 6))
            M = rng.random((n, n))
            if rng.random() < 0.3:
                M = np.round(M * 2) / 2
            k = int(rng.integers(1, 11))
            ours = [(d.total_interaction, d.assignment) for d in ranked_assignments(M, k)]
            assert ours == ranked_permutations(M)[:k]

    def test_full_enumeration_no_duplicates(self):
        M = np.arange(16, dtype=float).reshape(4, 4) % 5
        out = ranked_assignments(M, 100)
        assert len(out) == 24
        assert len({d.assignment for d in out}) == 24


class TestNiederlinski:
    def test_identity_gain(self, rng):
        M = rng.random((3, 3))
        d = pair_with_ni(M, np.eye(3) + 0.0)
        # the identity gain only admits the diagonal pairing
        assert d.assignment == (0, 1, 2) and d.ni == pytest.approx(1.0)

    def test_top_candidate_with_identity_ni(self):
        d = pair_with_ni(np.eye(2), np.eye(2))
        assert d.assignment == (0, 1) and d.ni == 1.0 and d.rejected_candidates == 0

    def test_swap_rejected(self):
        d = pair_with_ni(np.array([[1, 2], [2, 1]], float), np.array([[1, 0.1], [0.1, 1]]))
        assert niederlinski_index([[1, 0.1], [0.1, 1]], (1, 0)) == pytest.approx((0.01 - 1) / 0.01)
        assert d.assignment == (0, 1)
        assert d.ni == pytest.approx(0.99, abs=1e-12)
        assert d.rejected_candidates == 1

    def test_zero_diagonal_skipped(self):
        assert niederlinski_index(np.array([[0, 1], [1, 1]], float), (0, 1)) is None
        d = pair_with_ni(np.array([[5, 0], [0, 5]], float), np.array([[0, 1], [1, 1]], float))
        assert d.assignment == (1, 0)

    def test_none_feasible(self):
        # a nonsingular gain always admits some NI >= 0 pairing; only structural rank loss fails
        with pytest.raises(NoFeasiblePairingError, match="no integral-stabilizable pairing"):
            pair_with_ni(np.eye(2), np.array([[1.0, 1.0], [0.0, 0.0]]))

    def test_shape_mismatch(self):
        with pytest.raises(PairingError):
            pair_with_ni(np.eye(2), np.eye(3))

    def test_exhaustive_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 5))
            M = rng.random((n, n))
            G0 = rng.standard_normal((n, n))
            ref = ni_exhaustive(M, G0)
            if ref is None:
                with pytest.raises(NoFeasiblePairingError):
                    pair_with_ni(M, G0)
                continue
            d = pair_with_ni(M, G0)
            assert d.ni >= 0
            assert d.total_interaction == ref[0]
            assert d.assignment == ref[1]

    def test_unfiltered_optimum_kept(self, rng):
        for _ in range(30):
            M = rng.random((4, 4))
            G0 = rng.standard_normal((4, 4))
            top = max_assignment(M)
            ni = niederlinski_index(G0, top.assignment)
            if ni is not None and ni >= 0:
                assert pair_with_ni(M, G0).assignment == top.assignment


def test_rga_pairing_closest_to_one():
    L = np.array([[4 / 3, -1 / 3], [-1 / 3, 4 / 3]])
    d = rga_pairing(L)
    assert d.assignment == (0, 1) and d.total_interaction == pytest.approx(8 / 3)


class TestSparse:
    EXAMPLE = np.array([[0.35, 0.05], [0.30, 0.30]])

    def test_worked_example(self):
        dec = max_assignment(self.EXAMPLE)
        gamma = sparse_scores(self.EXAMPLE, dec, 3.0)
        assert gamma[1, 0] == pytest.approx(0.15, abs=1e-12)
        out = sparse_structure(self.EXAMPLE, dec, 3.0)
        assert out.feedforward == ((0, 1),)
        assert out.assignment == dec.assignment

    def test_diagonal_already_over_threshold(self):
        M = np.array([[0.45, 0.05], [0.05, 0.45]])
        assert sparse_structure(M, max_assignment(M), 0.0).feedforward == ()

    def test_nonpositive_score_never_selected(self):
        M = np.array([[0.30, 0.10], [0.30, 0.30]])  # gamma*[1,0] = 0.3 - 3*0.1 = 0
        out = sparse_structure(M, max_assignment(M), 3.0)
        assert out.feedforward == ()

    def test_uses_normalized_values(self):
        dec = max_assignment(self.EXAMPLE)
        a = sparse_structure(self.EXAMPLE * 7.0, dec, 3.0)
        assert a.feedforward == ((0, 1),)

    def test_negative_rho(self):
        with pytest.raises(ValueError):
            sparse_structure(self.EXAMPLE, max_assignment(self.EXAMPLE), -1.0)

    def test_edges_reference_original_indices(self):
        # off-diagonal pairing: loop 0 uses input 1, loop 1 uses input 0
        M = self.EXAMPLE[:, ::-1]
        dec = max_assignment(M)
        assert dec.assignment == (1, 0)
        out = sparse_structure(M, dec, 3.0)
        assert out.feedforward == ((1, 1),)

    def test_edges_positive_and_admissible_set_shrinks(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 6))
            M = rng.random((n, n)) ** 3
            M /= M.sum()
            dec = max_assignment(M)
            inv = np.argsort(dec.assignment)
            previous = None
            for rho in (0, 1, 3, 10):
                gamma = sparse_scores(M, dec, rho)
                for src, loop in sparse_structure(M, dec, rho).feedforward:
                    assert gamma[loop, inv[src]] > 0
                positive = {(i, j) for i in range(n) for j in range(n) if i != j and gamma[i, j] > 0}
                if previous is not None:
                    assert positive <= previous
                previous = positive

    def test_blocks_stable_proper_causal(self):
        lag = lambda k, tau, d=0.0: RationalTF([k], [tau, 1], d)  # noqa: E731
        G = TransferMatrix([
            [lag(1, 1), lag(0.6, 2), lag(0.3, 1)],
            [RationalTF([1, -1], [1, 3, 1]), lag(1, 1, 0.5), lag(0.8, 3)],
            [lag(0.9, 1, 1.0), lag(0.5, 0.5), lag(1, 2, 0.2)],
        ])
        from gramscale.interaction import build_im
        im = build_im(G, "HIIA")
        dec = max_assignment(im)
        out = sparse_structure(im, dec, 0.0, G, threshold=1.0)
        assert out.feedforward
        for src, loop in out.feedforward:
            block = feedforward_block(G, dec.assignment, src, loop)
            assert block.is_causal and block.is_proper() and block.is_stable()
        # without the plant every positive candidate is taken
        loose = sparse_structure(im, dec, 0.0, None, threshold=1.0)
        assert len(loose.feedforward) >= len(out.feedforward)

    def test_no_feedforward_cycles(self, rng):
        for _ in range(50):
            M = rng.random((4, 4))
            dec = max_assignment(M)
            out = sparse_structure(M, dec, 0.0, threshold=10.0)
            graph = {}
            for src, loop in out.feedforward:
                graph.setdefault(src, set()).add(dec.assignment[loop])
            for start in graph:
                stack, seen = list(graph[start]), set()
                while stack:
                    a = stack.pop()
                    assert a != start
                    if a not in seen:
                        seen.add(a)
                        stack.extend(graph.get(a, ()))


def test_hen_ranked_totals_descend(hen):
    out = ranked_assignments(hen["HIIA"], 24)
    totals = [d.total_interaction for d in out]
    assert totals == sorted(totals, reverse=True)
    assert sorted(d.assignment for d in out) == sorted(itertools.permutations(range(4)))


def test_interaction_matrix_input(hen):
    assert isinstance(hen["PM"], InteractionMatrix)
    assert sparse_scores(hen["PM"], max_assignment(hen["PM"]), 1.0).shape == (4, 4)
