"""Mass-function algebra: hand-checked examples plus property suites.

The independent oracle here is a general power-set Dempster combiner working
on frozenset-keyed dictionaries; the package's singleton-plus-theta fast path
must agree with it everywhere, including n-ary brute-force enumeration.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dstrain.errors import (
    AllZeroScoresError,
    DimensionMismatchError,
    EmptyEvidenceError,
    FrameMismatchError,
    OutOfRangeError,
    TotalConflictError,
    UnknownLabelError,
)
from dstrain.evidence import (
    THETA,
    Frame,
    MassFunction,
    belief,
    certainty,
    combine_pair,
    combine_sequential,
    evidence_matrix,
    ignorance_interval,
    mass_from_ground_truth,
    mass_from_softmax,
    normalize_evidence,
    plausibility,
)

# ---------------------------------------------------------------- oracle

from _oracles import powerset_combine, powerset_combine_nary, to_powerset


def assert_matches_powerset(result: MassFunction, oracle: dict, tol: float):
    whole = frozenset(result.frame.labels)
    for label in result.frame.labels:
        assert result.mass(label) == pytest.approx(
            oracle.get(frozenset([label]), 0.0), abs=tol
        )
    assert result.theta == pytest.approx(oracle.get(whole, 0.0), abs=tol)


# ------------------------------------------------------------ strategies

_unit = st.floats(0.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def masses(draw, frame: Frame | None = None, min_n=2, max_n=5, with_theta=True):
    if frame is None:
        n = draw(st.integers(min_n, max_n))
        frame = Frame([f"L{i}" for i in range(n)])
    size = len(frame) + (1 if with_theta else 0)
    weights = draw(
        st.lists(_unit, min_size=size, max_size=size).filter(lambda w: sum(w) > 1e-6)
    )
    weights = np.asarray(weights)
    weights = weights / weights.sum()
    theta = float(weights[-1]) if with_theta else 0.0
    singles = weights[: len(frame)]
    return MassFunction(frame, singles, theta)


@st.composite
def mass_pairs(draw, **kwargs):
    first = draw(masses(**kwargs))
    second = draw(masses(frame=first.frame, **{k: v for k, v in kwargs.items() if k != "frame"}))
    return first, second


# -------------------------------------------------------------- examples


class TestNormalizeEvidence:
    def test_already_normalized(self):
        m = normalize_evidence([("A", 0.5), ("B", 0.3), ("C", 0.2)])
        assert m.as_dict() == pytest.approx({"A": 0.5, "B": 0.3, "C": 0.2})
        assert m.theta == 0.0

    def test_divides_by_total(self):
        m = normalize_evidence([("A", 2.0), ("B", 1.0), ("C", 1.0)])
        assert m.as_dict() == pytest.approx({"A": 0.5, "B": 0.25, "C": 0.25})

    def test_all_zero_scores(self):
        with pytest.raises(AllZeroScoresError):
            normalize_evidence([("A", 0.0), ("B", 0.0)])

    def test_empty(self):
        with pytest.raises(EmptyEvidenceError):
            normalize_evidence([])

    def test_repeated_labels_summed(self):
        m = normalize_evidence([("A", 1.0), ("A", 1.0), ("B", 2.0)])
        assert m.as_dict() == pytest.approx({"A": 0.5, "B": 0.5})

    def test_explicit_frame_alignment(self):
        frame = Frame(["A", "B", "C"])
        m = normalize_evidence([("B", 1.0)], frame)
        assert m.as_dict() == pytest.approx({"A": 0.0, "B": 1.0, "C": 0.0})

    def test_negative_score_rejected(self):
        with pytest.raises(OutOfRangeError):
            normalize_evidence([("A", -0.1)])


class TestMassFromSoftmax:
    def test_uniform(self):
        m = mass_from_softmax([0.0, 0.0], Frame(["A", "B"]))
        assert m.as_dict() == pytest.approx({"A": 0.5, "B": 0.5}, abs=1e-12)
        assert m.theta == 0.0

    def test_log_ratio(self):
        m = mass_from_softmax([math.log(3), math.log(1)], Frame(["A", "B"]))
        assert m.mass("A") == pytest.approx(0.75, abs=1e-12)
        assert m.mass("B") == pytest.approx(0.25, abs=1e-12)

    def test_top_k_residual_to_theta(self):
        m = mass_from_softmax(
            [math.log(6), math.log(3), math.log(1)], Frame(["A", "B", "C"]), top_k=2
        )
        assert m.mass("A") == pytest.approx(0.6, abs=1e-12)
        assert m.mass("B") == pytest.approx(0.3, abs=1e-12)
        assert m.mass("C") == 0.0
        assert m.theta == pytest.approx(0.1, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            mass_from_softmax([0.0, 0.0, 0.0], Frame(["A", "B"]))

    def test_extreme_logits_stable(self):
        m = mass_from_softmax([1e4, 0.0], Frame(["A", "B"]))
        assert m.mass("A") == pytest.approx(1.0)


class TestMassFromGroundTruth:
    def test_full_belief(self):
        m = mass_from_ground_truth("A", Frame(["A", "B"]))
        assert m.as_dict() == {"A": 1.0, "B": 0.0}
        assert m.theta == 0.0

    def test_epsilon_slack(self):
        m = mass_from_ground_truth("B", Frame(["A", "B", "C"]), epsilon=0.05)
        assert m.mass("B") == pytest.approx(0.95)
        assert m.theta == pytest.approx(0.05)

    def test_unknown_label(self):
        with pytest.raises(UnknownLabelError):
            mass_from_ground_truth("D", Frame(["A", "B"]))


class TestBeliefPlausibility:
    def test_singleton_belief(self):
        m = MassFunction.from_dict(Frame(["A", "B"]), {"A": 0.6, "B": 0.4})
        assert belief(m, {"A"}) == pytest.approx(0.6)

    def test_whole_frame_belief(self):
        m = MassFunction.from_dict(Frame(["A", "B"]), {"A": 0.6, "B": 0.3}, theta=0.1)
        assert belief(m, {"A", "B"}) == 1.0
        assert belief(m, THETA) == 1.0

    def test_belief_sums_subset_masses(self):
        m = MassFunction.from_dict(Frame(["A", "B"]), {"A": 0.6, "B": 0.3}, theta=0.1)
        assert belief(m, {"B"}) == pytest.approx(0.3)

    def test_plausibility_includes_theta(self):
        m = MassFunction.from_dict(Frame(["A", "B"]), {"A": 0.6, "B": 0.3}, theta=0.1)
        assert plausibility(m, {"A"}) == pytest.approx(0.7)

    def test_plausibility_disjoint(self):
        m = MassFunction.from_dict(Frame(["A", "B"]), {"A": 1.0})
        assert plausibility(m, {"B"}) == 0.0

    def test_plausibility_of_frame(self):
        m = MassFunction.from_dict(Frame(["A", "B"]), {"A": 0.5, "B": 0.5})
        assert plausibility(m, THETA) == 1.0

    def test_unknown_label(self):
        m = MassFunction.from_dict(Frame(["A", "B"]), {"A": 1.0})
        with pytest.raises(UnknownLabelError):
            belief(m, {"Z"})


class TestIgnoranceInterval:
    def test_fully_committed(self):
        m = MassFunction.from_dict(Frame(["A"]), {"A": 1.0})
        assert ignorance_interval(m) == 0.0

    def test_vacuous(self):
        assert ignorance_interval(MassFunction.vacuous(Frame(["A", "B"]))) == 1.0

    def test_partial(self):
        m = MassFunction.from_dict(Frame(["A", "B"]), {"A": 0.7, "B": 0.1}, theta=0.2)
        assert ignorance_interval(m) == pytest.approx(0.2)
        # equals Pl - Bel of any singleton, here enumerated for A
        assert ignorance_interval(m) == pytest.approx(
            plausibility(m, {"A"}) - belief(m, {"A"})
        )


class TestEvidenceMatrix:
    def test_identity_case(self):
        m = MassFunction.from_dict(Frame(["A"]), {"A": 1.0})
        h = evidence_matrix(m, m)
        assert h.cells.shape == (1, 1)
        assert h.cells[0, 0] == 1.0

    def test_outer_product(self):
        frame = Frame(["A", "B"])
        mx = MassFunction.from_dict(frame, {"A": 0.7, "B": 0.3})
        my = MassFunction.from_dict(frame, {"A": 0.6, "B": 0.4})
        h = evidence_matrix(mx, my)
        assert h.cells == pytest.approx(np.array([[0.42, 0.28], [0.18, 0.12]]))

    def test_symmetric_case(self):
        frame = Frame(["A", "B"])
        m = MassFunction.from_dict(frame, {"A": 0.5, "B": 0.5})
        assert evidence_matrix(m, m).cells == pytest.approx(np.full((2, 2), 0.25))

    def test_frame_mismatch(self):
        with pytest.raises(FrameMismatchError):
            evidence_matrix(
                MassFunction.from_dict(Frame(["A"]), {"A": 1.0}),
                MassFunction.from_dict(Frame(["B"]), {"B": 1.0}),
            )


class TestCombinePair:
    def test_certain_source_overrides(self):
        frame = Frame(["A", "B"])
        m1 = MassFunction.from_dict(frame, {"A": 0.7, "B": 0.3})
        m2 = MassFunction.from_dict(frame, {"A": 1.0})
        result = combine_pair(m1, m2)
        assert result.conflict_k == pytest.approx(0.3, abs=1e-12)
        assert result.certainty_phi == pytest.approx(0.7, abs=1e-12)
        assert result.combined.mass("A") == pytest.approx(1.0, abs=1e-12)
        oracle, k = powerset_combine(to_powerset(m1), to_powerset(m2))
        assert k == pytest.approx(result.conflict_k, abs=1e-12)
        assert_matches_powerset(result.combined, oracle, 1e-12)

    def test_total_conflict(self):
        frame = Frame(["A", "B"])
        with pytest.raises(TotalConflictError):
            combine_pair(
                MassFunction.from_dict(frame, {"A": 1.0}),
                MassFunction.from_dict(frame, {"B": 1.0}),
            )

    def test_partial_conflict(self):
        frame = Frame(["A", "B"])
        m1 = MassFunction.from_dict(frame, {"A": 0.7, "B": 0.3})
        m2 = MassFunction.from_dict(frame, {"A": 0.6, "B": 0.4})
        result = combine_pair(m1, m2)
        assert result.conflict_k == pytest.approx(0.46, abs=1e-12)
        assert result.combined.mass("A") == pytest.approx(0.42 / 0.54, abs=1e-12)
        assert result.combined.mass("B") == pytest.approx(0.12 / 0.54, abs=1e-12)

    def test_frame_mismatch(self):
        with pytest.raises(FrameMismatchError):
            combine_pair(
                MassFunction.from_dict(Frame(["A"]), {"A": 1.0}),
                MassFunction.from_dict(Frame(["B"]), {"B": 1.0}),
            )


class TestCombineSequential:
    def test_vacuous_identity_fold(self):
        frame = Frame(["A", "B"])
        m = MassFunction.from_dict(frame, {"A": 0.6, "B": 0.4})
        result = combine_sequential(
            [m, MassFunction.vacuous(frame), MassFunction.vacuous(frame)]
        )
        assert np.array_equal(result.combined.masses, m.masses)
        assert result.conflict_k == 0.0

    def test_fold_with_certain_evidence(self):
        frame = Frame(["A", "B"])
        seq = [
            MassFunction.from_dict(frame, {"A": 0.7, "B": 0.3}),
            MassFunction.from_dict(frame, {"A": 1.0}),
            MassFunction.from_dict(frame, {"A": 1.0}),
        ]
        result = combine_sequential(seq)
        assert result.combined.mass("A") == pytest.approx(1.0, abs=1e-12)
        assert result.certainty_phi == pytest.approx(0.7, abs=1e-12)

    def test_fold_matches_three_way_enumeration(self):
        frame = Frame(["A", "B"])
        m = MassFunction.from_dict(frame, {"A": 0.6, "B": 0.4})
        result = combine_sequential([m, m, m])
        oracle, k = powerset_combine_nary([to_powerset(m)] * 3)
        assert result.certainty_phi == pytest.approx(1.0 - k, abs=1e-12)
        assert_matches_powerset(result.combined, oracle, 1e-12)

    def test_too_few(self):
        m = MassFunction.from_dict(Frame(["A"]), {"A": 1.0})
        with pytest.raises(OutOfRangeError):
            combine_sequential([m])

    def test_total_conflict_reports_step(self):
        frame = Frame(["A", "B"])
        seq = [
            MassFunction.from_dict(frame, {"A": 1.0}),
            MassFunction.vacuous(frame),
            MassFunction.from_dict(frame, {"B": 1.0}),
        ]
        with pytest.raises(TotalConflictError) as err:
            combine_sequential(seq)
        assert err.value.step == 1


class TestCertainty:
    @pytest.mark.parametrize("k,phi", [(0.0, 1.0), (1.0, 0.0), (0.46, 0.54)])
    def test_values(self, k, phi):
        assert certainty(k) == pytest.approx(phi, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            certainty(1.5)


# ------------------------------------------------------------ properties


@settings(max_examples=200, deadline=None)
@given(masses())
def test_construction_normalized(m):
    assert float(m.masses.sum()) + m.theta == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(mass_pairs())
def test_commutativity(pair):
    m1, m2 = pair
    try:
        r12 = combine_pair(m1, m2)
        r21 = combine_pair(m2, m1)
    except TotalConflictError:
        with pytest.raises(TotalConflictError):
            combine_pair(m2, m1)
        return
    assert abs(r12.conflict_k - r21.conflict_k) < 1e-12
    assert np.all(np.abs(r12.combined.masses - r21.combined.masses) < 1e-12)
    assert abs(r12.combined.theta - r21.combined.theta) < 1e-12


@settings(max_examples=200, deadline=None)
@given(masses())
def test_vacuous_identity(m):
    result = combine_pair(m, MassFunction.vacuous(m.frame))
    assert result.conflict_k == 0.0
    assert np.array_equal(result.combined.masses, m.masses)
    assert result.combined.theta == m.theta


@settings(max_examples=200, deadline=None)
@given(mass_pairs())
def test_combined_against_powerset_oracle(pair):
    m1, m2 = pair
    o1, o2 = to_powerset(m1), to_powerset(m2)
    try:
        result = combine_pair(m1, m2)
    except TotalConflictError:
        _, k = powerset_combine(o1, o2)
        assert k > 1.0 - 1e-9
        return
    oracle, k = powerset_combine(o1, o2)
    assert result.conflict_k == pytest.approx(k, abs=1e-12)
    assert float(result.combined.masses.sum()) + result.combined.theta == pytest.approx(
        1.0, abs=1e-9
    )
    assert_matches_powerset(result.combined, oracle, 1e-9)


@settings(max_examples=200, deadline=None)
@given(mass_pairs())
def test_matrix_consistency(pair):
    m1, m2 = pair
    h = evidence_matrix(m1, m2)
    assert h.cells.shape == (len(m1.frame), len(m2.frame))
    assert np.all((h.cells >= 0.0) & (h.cells <= 1.0))
    assert float(h.cells.sum()) == pytest.approx(
        float(m1.masses.sum()) * float(m2.masses.sum()), abs=1e-9
    )
    try:
        result = combine_pair(m1, m2)
    except TotalConflictError:
        assert h.off_diagonal_sum() > 1.0 - 1e-9
        return
    assert result.conflict_k == pytest.approx(h.off_diagonal_sum(), abs=1e-12)
    # with no theta mass, the unnormalized combined singletons are the diagonal
    if m1.theta == 0.0 and m2.theta == 0.0:
        unnormalized = result.combined.masses * (1.0 - result.conflict_k)
        assert np.all(np.abs(unnormalized - np.diag(h.cells)) < 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_fold_vs_nary_enumeration(data):
    n_labels = data.draw(st.integers(2, 4))
    frame = Frame([f"L{i}" for i in range(n_labels)])
    count = data.draw(st.integers(3, 5))
    seq = [data.draw(masses(frame=frame)) for _ in range(count)]
    try:
        result = combine_sequential(seq)
    except TotalConflictError:
        return
    oracle, k = powerset_combine_nary([to_powerset(m) for m in seq])
    assert result.certainty_phi == pytest.approx(1.0 - k, abs=1e-9)
    assert result.conflict_k == pytest.approx(k, abs=1e-9)
    assert_matches_powerset(result.combined, oracle, 1e-9)


@settings(max_examples=200, deadline=None)
@given(masses(max_n=4))
def test_interval_ordering(m):
    labels = m.frame.labels
    for r in range(len(labels) + 1):
        for subset in itertools.combinations(labels, r):
            assert belief(m, subset) <= plausibility(m, subset) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_conflict_with_ground_truth_closed_form(data):
    m1 = data.draw(masses(with_theta=False))
    gt_label = data.draw(st.sampled_from(m1.frame.labels))
    m2 = mass_from_ground_truth(gt_label, m1.frame, epsilon=0.0)
    try:
        result = combine_pair(m1, m2)
    except TotalConflictError:
        assert m1.mass(gt_label) < 1e-9
        return
    assert result.conflict_k == pytest.approx(1.0 - m1.mass(gt_label), abs=1e-12)
    assert 0.0 <= result.conflict_k <= 1.0
