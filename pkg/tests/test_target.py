"""Marginal/conditional exactness, context enumeration, and ingestion rules."""

import json

import numpy as np
import pytest

from spectel import (
    CondContext,
    DomainError,
    EMPTY_CONTEXT,
    FiniteTarget,
    conditional,
    free_indices,
    is_supported,
    load_target,
    marginal,
    marginal_mass,
    product_of_marginals,
    product_target,
    random_target,
    supported_contexts,
    target_from_dict,
    target_to_dict,
)

from conftest import oracle_conditional, oracle_marginal, random_small_target


HAND = FiniteTarget([2, 2], [0.1, 0.2, 0.3, 0.4])


class TestMarginal:
    def test_product_target_marginal_is_factor(self):
        p1 = np.array([0.3, 0.7])
        p2 = np.array([0.2, 0.5, 0.3])
        t = product_target([p1, p2])
        np.testing.assert_allclose(marginal(t, (1,)), p1, atol=1e-15)
        np.testing.assert_allclose(marginal(t, (2,)), p2, atol=1e-15)

    def test_full_index_set_returns_tensor(self):
        np.testing.assert_array_equal(marginal(HAND, (1, 2)), HAND.probs)

    def test_hand_summation(self):
        np.testing.assert_allclose(marginal(HAND, (2,)), [0.4, 0.6], atol=1e-15)

    def test_matches_enumeration_oracle(self, rng):
        for _ in range(5):
            t = random_small_target(rng)
            for gamma in [(1,), (2,), (1, 2), tuple(range(1, t.n + 1))]:
                np.testing.assert_allclose(
                    marginal(t, gamma), oracle_marginal(t, gamma), atol=1e-13
                )

    def test_out_of_range_index_rejected(self):
        with pytest.raises(DomainError):
            marginal(HAND, (3,))
        with pytest.raises(DomainError):
            marginal(HAND, ())


class TestConditional:
    def test_product_target_conditional_equals_marginal(self):
        t = product_target([np.array([0.3, 0.7]), np.array([0.2, 0.5, 0.3])])
        for y in range(3):
            np.testing.assert_allclose(
                conditional(t, (1,), CondContext((2,), (y,))),
                marginal(t, (1,)),
                atol=1e-14,
            )

    def test_zero_mass_context_is_uniform(self):
        t = FiniteTarget([2, 2], [0.5, 0.5, 0.0, 0.0])
        out = conditional(t, (2,), CondContext((1,), (1,)))
        np.testing.assert_allclose(out, [0.5, 0.5])

    def test_hand_ratio(self):
        out = conditional(HAND, (1,), CondContext((2,), (0,)))
        np.testing.assert_allclose(out, [0.25, 0.75], atol=1e-15)

    def test_overlapping_sets_rejected(self):
        with pytest.raises(DomainError):
            conditional(HAND, (2,), CondContext((2,), (0,)))

    def test_matches_enumeration_oracle(self, rng):
        for _ in range(5):
            t = random_small_target(rng)
            ctx = CondContext((t.n,), (0,))
            gamma = (1, 2)
            np.testing.assert_allclose(
                conditional(t, gamma, ctx),
                oracle_conditional(t, gamma, ctx.lam, ctx.y),
                atol=1e-13,
            )

    def test_sums_to_one(self, rng):
        t = random_small_target(rng)
        for size in range(t.n):
            for ctx in supported_contexts(t, size):
                free = free_indices(t, ctx)
                assert abs(conditional(t, free, ctx).sum() - 1.0) <= 1e-12

    def test_chain_rule(self, rng):
        for _ in range(5):
            t = random_small_target(rng)
            for ctx in supported_contexts(t, 1):
                gamma = free_indices(t, ctx)[:1]
                joint = marginal(t, tuple(sorted(set(ctx.lam) | set(gamma))))
                mass = marginal_mass(t, ctx)
                cond = conditional(t, gamma, ctx)
                for z in np.ndindex(cond.shape):
                    key = []
                    for i in sorted(set(ctx.lam) | set(gamma)):
                        if i in ctx.lam:
                            key.append(ctx.y[ctx.lam.index(i)])
                        else:
                            key.append(z[gamma.index(i)])
                    assert abs(joint[tuple(key)] - mass * cond[z]) <= 1e-12

    def test_marginal_reconstruction(self, rng):
        # Sum of conditional * context mass over assignments recovers the marginal.
        t = random_small_target(rng)
        gamma = (1,)
        rebuilt = np.zeros(t.axes[0])
        for ctx in supported_contexts(t, t.n - 1):
            if 1 in ctx.lam:
                continue
            rebuilt += marginal_mass(t, ctx) * conditional(t, gamma, ctx)
        np.testing.assert_allclose(rebuilt, marginal(t, gamma), atol=1e-12)


class TestSupportedContexts:
    def test_full_support_singleton_count(self, rng):
        t = random_target([2, 3, 2], rng)
        assert sum(1 for _ in supported_contexts(t, 1)) == 7

    def test_size_zero_yields_single_empty_context(self):
        assert list(supported_contexts(HAND, 0)) == [EMPTY_CONTEXT]

    def test_zero_mass_assignments_excluded(self):
        probs = np.zeros((2, 2, 2))
        probs[1] = 0.25
        t = FiniteTarget([2, 2, 2], probs.ravel())
        contexts = list(supported_contexts(t, 1))
        assert CondContext((1,), (0,)) not in contexts
        assert CondContext((1,), (1,)) in contexts

    def test_out_of_range_size(self):
        with pytest.raises(DomainError):
            list(supported_contexts(HAND, 2))
        with pytest.raises(DomainError):
            list(supported_contexts(HAND, -1))

    def test_supported_flag(self):
        t = FiniteTarget([2, 2], [0.5, 0.5, 0.0, 0.0])
        assert is_supported(t, CondContext((1,), (0,)))
        assert not is_supported(t, CondContext((1,), (1,)))


class TestIngestion:
    def test_row_major_layout(self):
        t = FiniteTarget([2, 3], [0.1, 0.2, 0.1, 0.2, 0.3, 0.1])
        assert t.probs[0, 1] == pytest.approx(0.2)
        assert t.probs[1, 0] == pytest.approx(0.2)

    def test_small_mass_deviation_renormalized(self):
        t = FiniteTarget([2, 2], np.array([0.1, 0.2, 0.3, 0.4]) * (1 + 5e-10))
        assert t.probs.sum() == pytest.approx(1.0, abs=1e-15)

    def test_large_mass_deviation_rejected(self):
        with pytest.raises(DomainError):
            FiniteTarget([2, 2], [0.1, 0.2, 0.3, 0.5])

    def test_negative_entries_rejected(self):
        with pytest.raises(DomainError):
            FiniteTarget([2, 2], [-0.1, 0.4, 0.3, 0.4])

    def test_shape_validation(self):
        with pytest.raises(DomainError):
            FiniteTarget([2], [0.5, 0.5])
        with pytest.raises(DomainError):
            FiniteTarget([2, 1], [0.5, 0.5])
        with pytest.raises(DomainError):
            FiniteTarget([2, 2], [0.5, 0.5])

    def test_tensor_is_immutable(self):
        with pytest.raises(ValueError):
            HAND.probs[0, 0] = 0.9

    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "t.json"
        path.write_text(json.dumps(target_to_dict(HAND)))
        back = load_target(str(path))
        np.testing.assert_array_equal(back.probs, HAND.probs)

    def test_bad_schema_rejected(self):
        with pytest.raises(DomainError):
            target_from_dict({"axes": [2, 2]})


class TestContexts:
    def test_context_validation(self):
        with pytest.raises(DomainError):
            CondContext((2, 1), (0, 0))
        with pytest.raises(DomainError):
            CondContext((1,), (0, 1))
        with pytest.raises(DomainError):
            CondContext((0,), (0,))

    def test_value_range_checked_against_target(self):
        with pytest.raises(DomainError):
            marginal_mass(HAND, CondContext((1,), (5,)))

    def test_product_of_marginals_matches_factors(self, rng):
        t = random_small_target(rng)
        prod = product_of_marginals(t)
        for i in range(1, t.n + 1):
            np.testing.assert_allclose(
                marginal(prod, (i,)), marginal(t, (i,)), atol=1e-14
            )
