"""Energy encoding: matrix construction, slot ladders, exhaustive scans.

Matrix entries are checked two ways that must never be merged: frozen
numbers computed by hand from the term expansion, and a whole-state identity
against energy_by_terms, which evaluates the reward and penalties directly.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knapxbar import encoder
from knapxbar.encoder import (
    CapacityEncoding,
    Hamiltonian,
    PenaltyWeights,
    UNARY,
    build_hamiltonian,
    capacity_slots,
    decode,
    default_penalties,
    energy_by_terms,
    energy_exact,
    exhaustive_min,
    hamiltonian_csv,
    parse_encoding,
    solution_state,
)
from knapxbar.knapsack import KnapsackInstance, brute_force_optimum

from conftest import random_fitting_instance, random_instance


class TestCapacitySlots:
    def test_unary_counts_every_load(self):
        assert capacity_slots(10) == (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)

    def test_shrink_ladder(self):
        # ceil(10 / 3) = 4 rungs; the last one overshoots the capacity.
        assert capacity_slots(10, CapacityEncoding("shrink", 3)) == (3, 6, 9, 12)

    def test_shrink_step_one_is_unary(self):
        assert capacity_slots(7, CapacityEncoding("shrink", 1)) == capacity_slots(7)

    def test_shrink_step_above_capacity_rejected(self):
        with pytest.raises(ValueError, match="exceeds capacity"):
            capacity_slots(4, CapacityEncoding("shrink", 5))

    def test_log_examples(self):
        assert capacity_slots(10, CapacityEncoding("log")) == (1, 2, 4, 3)
        assert capacity_slots(16, CapacityEncoding("log")) == (1, 2, 4, 8, 1)
        assert capacity_slots(1, CapacityEncoding("log")) == (1,)

    @pytest.mark.parametrize("capacity", range(1, 65))
    def test_log_subset_sums_cover_every_load(self, capacity):
        coeffs = capacity_slots(capacity, CapacityEncoding("log"))
        reachable = {0}
        for c in coeffs:
            reachable |= {r + c for r in reachable}
        assert set(range(1, capacity + 1)) <= reachable
        assert max(reachable) == capacity

    def test_log_size_is_logarithmic(self):
        assert len(capacity_slots(64, CapacityEncoding("log"))) == 7

    def test_parse_encoding(self):
        assert parse_encoding("unary") == UNARY
        assert parse_encoding("log").kind == "log"
        assert parse_encoding("shrink:4") == CapacityEncoding("shrink", 4)
        with pytest.raises(ValueError):
            parse_encoding("shrink:x")
        with pytest.raises(ValueError):
            parse_encoding("binary")

    def test_encoding_str_round_trips(self):
        for text in ("unary", "log", "shrink:3"):
            assert str(parse_encoding(text)) == text


class TestPenalties:
    def test_defaults_sit_one_above_max_value(self, fixture_instance):
        p = default_penalties(fixture_instance)
        assert (p.sigma1, p.sigma2, p.sigma3) == (1.0, 12.0, 12.0)

    def test_non_positive_rejected(self):
        with pytest.raises(ValueError, match="sigma2"):
            PenaltyWeights(1.0, 0.0, 5.0)

    def test_weak_penalties_rejected(self, fixture_instance):
        with pytest.raises(ValueError, match="must exceed"):
            build_hamiltonian(
                fixture_instance, penalties=PenaltyWeights(1.0, 11.0, 12.0)
            )


class TestMatrixEntries:
    """Frozen values for the bundled five-item instance under defaults.

    With v = (5, 8, 4, 11, 3), w = (3, 2, 8, 5, 4), W = 10, s1 = 1,
    s2 = s3 = 12 the term expansion gives, for example:
      item diag      H[0,0] = s3*w0^2 - s1*v0   = 12*9 - 5      = 103
      item pair      H[0,1] = 2*s3*w0*w1        = 2*12*3*2      = 144
      item x slot    H[0,5] = -2*s3*w0*c1       = -2*12*3*1     = -72
      slot pair      H[5,6] = 2*s2 + 2*s3*c1*c2 = 24 + 2*12*1*2 = 72
      slot diag      H[6,6] = s3*c2^2 - s2      = 12*4 - 12     = 36
    """

    def test_layout(self, fixture_hamiltonian):
        h = fixture_hamiltonian
        assert h.dimension == 15
        assert h.n_items == 5
        assert h.slot_coeffs == tuple(range(1, 11))
        assert h.offset == 12.0

    def test_frozen_entries(self, fixture_hamiltonian):
        u = fixture_hamiltonian.upper
        assert u[0, 0] == 103.0
        assert u[0, 1] == 144.0
        assert u[0, 5] == -72.0
        assert u[5, 6] == 72.0
        assert u[5, 5] == 0.0
        assert u[6, 6] == 36.0

    def test_frozen_log_register_entries(self, fixture_instance):
        # The log register has no one-hot term: slot entries lose the s2
        # contributions and the constant vanishes. Coefficients are (1,2,4,3).
        h = build_hamiltonian(fixture_instance, CapacityEncoding("log"))
        assert h.slot_coeffs == (1, 2, 4, 3)
        assert h.offset == 0.0
        assert not h.one_hot
        u = h.upper
        assert u[0, 0] == 103.0            # item block is unchanged
        assert u[0, 1] == 144.0
        assert u[0, 5] == -72.0            # -2*12*3*1
        assert u[5, 5] == 12.0             # s3*c^2, no -s2
        assert u[6, 6] == 48.0
        assert u[5, 6] == 48.0             # 2*s3*c1*c2, no 2*s2
        assert u[7, 8] == 2 * 12 * 4 * 3

    def test_one_hot_flag_set_for_ladders(self, fixture_instance):
        for enc in (UNARY, CapacityEncoding("shrink", 2)):
            assert build_hamiltonian(fixture_instance, enc).one_hot

    def test_upper_triangular(self, fixture_hamiltonian):
        u = fixture_hamiltonian.upper
        assert np.array_equal(u, np.triu(u))

    def test_matrix_is_read_only(self, fixture_hamiltonian):
        with pytest.raises(ValueError):
            fixture_hamiltonian.upper[0, 0] = 1.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(["unary", "log", "shrink:2"]))
    def test_energy_matches_term_evaluation(self, seed, enc_text):
        # Integer-valued penalties keep both float paths exact, so the matrix
        # fold and the direct term evaluation must agree to the last bit.
        rng = np.random.default_rng(seed)
        inst = random_instance(rng)
        enc = parse_encoding(enc_text)
        if enc.kind == "shrink" and enc.shrink_step > inst.capacity:
            enc = UNARY  # step larger than the ladder is rejected elsewhere
        h = build_hamiltonian(inst, enc)
        for _ in range(20):
            bits = rng.integers(0, 2, size=h.dimension)
            assert energy_exact(h, bits) == energy_by_terms(inst, bits, enc)

    def test_empty_state_energy_is_offset(self, fixture_hamiltonian):
        zeros = np.zeros(15, dtype=np.uint8)
        assert energy_exact(fixture_hamiltonian, zeros) == 12.0

    def test_empty_register_state_costs_nothing(self, fixture_instance):
        h = build_hamiltonian(fixture_instance, CapacityEncoding("log"))
        assert energy_exact(h, np.zeros(9, dtype=np.uint8)) == 0.0

    def test_state_shape_checked(self, fixture_hamiltonian):
        with pytest.raises(ValueError, match="15 bits"):
            energy_exact(fixture_hamiltonian, [1, 0])
        with pytest.raises(ValueError, match="0 or 1"):
            energy_exact(fixture_hamiltonian, [2] + [0] * 14)


class TestExhaustiveMin:
    def test_two_by_two_fixed_point(self):
        # E(q) = q0 - 4 q0 q1 + 2: states 00,01,10,11 -> 2, 2, 3, -1.
        h = Hamiltonian(
            upper=np.array([[1.0, -4.0], [0.0, 0.0]]),
            offset=2.0,
            n_items=1,
            slot_coeffs=(1,),
            penalties=PenaltyWeights(1.0, 2.0, 2.0),
        )
        state, energy = exhaustive_min(h)
        assert energy == -1.0
        assert state.tolist() == [1, 1]

    def test_tie_takes_lexicographically_smallest_state(self):
        h = Hamiltonian(
            upper=np.zeros((3, 3)),
            offset=0.0,
            n_items=2,
            slot_coeffs=(1,),
            penalties=PenaltyWeights(1.0, 2.0, 2.0),
        )
        state, energy = exhaustive_min(h)
        assert energy == 0.0
        assert state.tolist() == [0, 0, 0]

    def test_refuses_oversized_matrix(self):
        n = encoder.EXHAUSTIVE_CAP + 1
        h = Hamiltonian(np.zeros((n, n)), 0.0, 1, (1,), PenaltyWeights(1, 2, 2))
        with pytest.raises(ValueError, match="capped"):
            exhaustive_min(h)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_log_register_minimum_solves_any_instance(self, seed):
        # The register reaches every load 0..W penalty-free and nothing else,
        # so its argmin is exact for every instance, empty optima included.
        rng = np.random.default_rng(seed)
        inst = random_instance(rng)
        h = build_hamiltonian(inst, CapacityEncoding("log"))
        state, energy = exhaustive_min(h)
        selection, report = decode(h, state, inst)
        best = brute_force_optimum(inst)
        assert selection.feasible
        assert selection.total_value == best.total_value
        assert energy == -best.total_value
        assert report.load_match_ok

    def test_unary_minimum_solves_seeded_batch(self):
        # One-hot ladders are exact when every item fits individually; drawing
        # weights within the capacity keeps the batch inside that domain.
        rng = np.random.default_rng(20240520)
        for _ in range(60):
            inst = random_fitting_instance(rng)
            h = build_hamiltonian(inst)
            state, _ = exhaustive_min(h)
            selection, _ = decode(h, state, inst)
            best = brute_force_optimum(inst)
            assert selection.feasible
            assert selection.total_value == best.total_value

    def test_overweight_item_undercuts_empty_optimum(self):
        # Known boundary of the one-hot form: with no feasible item there is
        # no penalty-free state (load 0 has no slot), so an item one unit
        # above capacity costs s3 - v = 1, beating the s2 = 10 floor. The
        # argmin then decodes an infeasible selection.
        inst = KnapsackInstance(values=(9,), weights=(2,), capacity=1)
        h = build_hamiltonian(inst)
        state, energy = exhaustive_min(h)
        selection, _ = decode(h, state, inst)
        assert energy == 1.0
        assert not selection.feasible
        assert selection.total_value == 9

    def test_paired_slots_can_hide_an_overpack(self):
        # Second boundary: matching an overweight load with two slots costs
        # s2 = 13, which four max-value items overcome (-48 + 13 = -35 beats
        # the feasible optimum -24). Requires this much value concentration;
        # random draws with weights within capacity stay clean in practice.
        inst = KnapsackInstance(
            values=(12, 12, 12, 12), weights=(3, 3, 2, 2), capacity=6
        )
        h = build_hamiltonian(inst)
        state, energy = exhaustive_min(h)
        selection, report = decode(h, state, inst)
        assert energy == -35.0
        assert not selection.feasible
        assert report.active_slots == 2
        assert report.load_match_ok

    def test_no_fit_instance_ties_empty_and_slot_states(self):
        # With no feasible item the empty state and each bare minimal-slot
        # state tie at the constraint floor; lex order picks the empty state.
        inst = KnapsackInstance(values=(5,), weights=(9,), capacity=1)
        h = build_hamiltonian(inst)
        state, energy = exhaustive_min(h)
        assert energy == 6.0
        assert state.tolist() == [0, 0]
        assert energy_exact(h, [0, 1]) == 6.0

    def test_minimum_energy_is_negated_optimum(self, fixture_hamiltonian):
        # Reward is the only negative term, so at the global minimum the two
        # penalties vanish and E = -sum of chosen values.
        state, energy = exhaustive_min(fixture_hamiltonian)
        assert energy == -24.0

    def test_log_register_minimum_on_fixture(self, fixture_instance):
        h = build_hamiltonian(fixture_instance, CapacityEncoding("log"))
        state, energy = exhaustive_min(h)
        selection, _ = decode(h, state, fixture_instance)
        assert energy == -24.0
        assert selection.total_value == 24


class TestDecode:
    def test_ground_truth_state_decodes_cleanly(self, fixture_instance, fixture_hamiltonian):
        best = brute_force_optimum(fixture_instance)
        state = solution_state(fixture_hamiltonian, best)
        selection, report = decode(fixture_hamiltonian, state, fixture_instance)
        assert selection == best
        assert report.one_hot_ok
        assert report.load_match_ok
        assert report.active_slots == 1
        assert report.slot_total == 10

    def test_solution_state_sets_matching_slot(self, fixture_instance, fixture_hamiltonian):
        best = brute_force_optimum(fixture_instance)
        state = solution_state(fixture_hamiltonian, best)
        assert state[:5].tolist() == [1, 1, 0, 1, 0]
        # load 10 lives in the last unary slot
        assert state[5:].tolist() == [0] * 9 + [1]

    def test_solution_state_off_lattice_raises(self, fixture_instance):
        h = build_hamiltonian(fixture_instance, CapacityEncoding("shrink", 4))
        best = brute_force_optimum(fixture_instance)  # load 10, slots 4, 8, 12
        with pytest.raises(ValueError, match="no slot coefficient"):
            solution_state(h, best)

    def test_double_slot_breaks_one_hot(self, fixture_instance, fixture_hamiltonian):
        state = np.zeros(15, dtype=np.uint8)
        state[5] = state[6] = 1
        _, report = decode(fixture_hamiltonian, state, fixture_instance)
        assert not report.one_hot_ok
        assert report.active_slots == 2
        assert report.slot_total == 3

    def test_register_state_spells_load_in_slot_sums(self, fixture_instance):
        # Load 10 over coefficients (1, 2, 4, 3): above 2^3 - 1 the closing
        # slot joins in, the rest is binary: 10 = 1 + 2 + 4 + 3.
        h = build_hamiltonian(fixture_instance, CapacityEncoding("log"))
        best = brute_force_optimum(fixture_instance)
        state = solution_state(h, best)
        assert state[5:].tolist() == [1, 1, 1, 1]
        selection, report = decode(h, state, fixture_instance)
        assert selection == best
        assert report.load_match_ok
        assert energy_exact(h, state) == -24.0

    @pytest.mark.parametrize(
        "load,bits",
        [(0, [0, 0, 0, 0]), (5, [1, 0, 1, 0]), (7, [1, 1, 1, 0]),
         (8, [1, 0, 1, 1]), (9, [0, 1, 1, 1])],
    )
    def test_register_decomposition_rule(self, fixture_instance, load, bits):
        h = build_hamiltonian(fixture_instance, CapacityEncoding("log"))
        got = encoder._register_bits(h.slot_coeffs, load)
        assert got == bits
        assert sum(c * b for c, b in zip(h.slot_coeffs, bits)) == load


class TestCsv:
    def test_header_and_shape(self, fixture_hamiltonian):
        text = hamiltonian_csv(fixture_hamiltonian)
        lines = text.splitlines()
        assert lines[0] == (
            "# n=15,items=5,slots=10,sigma1=1.0,sigma2=12.0,sigma3=12.0,offset=12.0"
        )
        assert len(lines) == 16
        first_row = lines[1].split(",")
        assert first_row[0] == "103.0"
        assert first_row[1] == "144.0"

    def test_values_round_trip_exactly(self, fixture_hamiltonian):
        text = hamiltonian_csv(fixture_hamiltonian)
        rows = [
            [float(x) for x in line.split(",")]
            for line in text.splitlines()[1:]
        ]
        assert np.array_equal(np.array(rows), fixture_hamiltonian.upper)
