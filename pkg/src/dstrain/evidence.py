"""Mass-function algebra over a frame of class labels plus the unknown hypothesis.

Focal elements are restricted to singletons and theta, where theta stands for
the whole frame (uncommitted belief). Every constructor used in practice
(normalized detection scores, softmax outputs, ground-truth labels) lives in
this family, and it keeps pairwise combination O(N^2) in the frame size.
"""

from __future__ import annotations

from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllZeroScoresError,
    DimensionMismatchError,
    EmptyEvidenceError,
    FrameMismatchError,
    OutOfRangeError,
    TotalConflictError,
    UnknownLabelError,
)

Label = Hashable

MASS_SUM_TOL = 1e-9
TOTAL_CONFLICT_TOL = 1e-12


class _Theta:
    """Sentinel for the unknown hypothesis (the whole frame)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "THETA"


#: The unknown hypothesis. Usable as the ``subset`` argument of
#: :func:`belief` and :func:`plausibility`, where it means the whole frame.
THETA = _Theta()


class Frame:
    """An ordered frame of discernment: distinct class labels.

    Label order is fixed for the lifetime of the frame; matrix rows/columns
    and mass vectors are indexed by it.
    """

    __slots__ = ("labels", "_index")

    def __init__(self, labels: Iterable[Label]):
        labels = tuple(labels)
        if not labels:
            raise OutOfRangeError("a frame needs at least one label")
        index = {}
        for i, lab in enumerate(labels):
            if lab in index:
                raise OutOfRangeError(f"duplicate label in frame: {lab!r}")
            index[lab] = i
        self.labels = labels
        self._index = index

    def index(self, label: Label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLabelError(f"label {label!r} is not in the frame") from None

    def __contains__(self, label: Label) -> bool:
        return label in self._index

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, Frame) and self.labels == other.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"Frame({list(self.labels)!r})"


@dataclass(frozen=True)
class MassFunction:
    """A basic probability assignment over singletons plus theta.

    ``masses[i]`` is the mass on the i-th frame label; ``theta`` is the mass
    on the unknown hypothesis. All masses lie in [0, 1] and sum to 1 within
    1e-9. Instances are immutable and safe to share.
    """

    frame: Frame
    masses: np.ndarray
    theta: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.masses, dtype=np.float64)
        if arr.shape != (len(self.frame),):
            raise DimensionMismatchError(
                f"expected {len(self.frame)} masses, got shape {arr.shape}"
            )
        # excursions within the sum tolerance are float noise; clamp them
        if np.any(arr < -MASS_SUM_TOL) or np.any(arr > 1.0 + MASS_SUM_TOL):
            raise OutOfRangeError("singleton masses must lie in [0, 1]")
        if not -MASS_SUM_TOL <= self.theta <= 1.0 + MASS_SUM_TOL:
            raise OutOfRangeError("theta mass must lie in [0, 1]")
        total = float(arr.sum()) + self.theta
        if abs(total - 1.0) > MASS_SUM_TOL:
            raise OutOfRangeError(f"masses must sum to 1, got {total!r}")
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, "masses", arr)
        object.__setattr__(self, "theta", min(max(self.theta, 0.0), 1.0))

    @classmethod
    def from_dict(
        cls, frame: Frame, singleton_mass: dict[Label, float], theta: float = 0.0
    ) -> "MassFunction":
        arr = np.zeros(len(frame))
        for label, value in singleton_mass.items():
            arr[frame.index(label)] = value
        return cls(frame, arr, theta)

    @classmethod
    def vacuous(cls, frame: Frame) -> "MassFunction":
        """The mass function carrying all belief on theta."""
        return cls(frame, np.zeros(len(frame)), 1.0)

    def mass(self, label: Label) -> float:
        return float(self.masses[self.frame.index(label)])

    def as_dict(self) -> dict[Label, float]:
        return {lab: float(m) for lab, m in zip(self.frame.labels, self.masses)}

    def argmax_label(self) -> Label:
        return self.frame.labels[int(np.argmax(self.masses))]


@dataclass(frozen=True)
class EvidenceMatrix:
    """Outer product of two normalized score vectors over a shared frame.

    Cell (i, j) is xi_x[i] * xi_y[j]. Diagonal (label-matched) cells feed the
    combined assignment; off-diagonal cells sum to the conflict K.
    """

    frame_x: Frame
    frame_y: Frame
    cells: np.ndarray = field(repr=False)

    def diagonal_sum(self) -> float:
        return float(np.trace(self.cells))

    def off_diagonal_sum(self) -> float:
        return float(self.cells.sum() - np.trace(self.cells))


@dataclass(frozen=True)
class FusionResult:
    """Outcome of Dempster combination: combined mass, conflict K, certainty."""

    combined: MassFunction
    conflict_k: float
    certainty_phi: float


def normalize_evidence(
    items: Sequence[tuple[Label, float]], frame: Frame | None = None
) -> MassFunction:
    """Turn raw (label, score) evidence into a mass function.

    Scores of repeated labels are summed, then every score is divided by the
    grand total; no mass is left on theta. Without an explicit ``frame`` the
    result's frame is the distinct labels in order of first appearance;
    with one, the masses are aligned to it (absent labels get mass 0).
    """
    items = list(items)
    if not items:
        raise EmptyEvidenceError("no evidence items to normalize")
    totals: dict[Label, float] = {}
    for label, score in items:
        if score < 0.0:
            raise OutOfRangeError(f"negative score for {label!r}: {score!r}")
        totals[label] = totals.get(label, 0.0) + float(score)
    grand = sum(totals.values())
    if grand <= 0.0:
        raise AllZeroScoresError("all scores are zero; nothing to normalize")
    if frame is None:
        frame = Frame(totals.keys())
    masses = np.zeros(len(frame))
    for label, total in totals.items():
        masses[frame.index(label)] = total / grand
    return MassFunction(frame, masses, 0.0)


def mass_from_softmax(
    logits: Sequence[float], frame: Frame, top_k: int | None = None
) -> MassFunction:
    """Mass function from classifier logits via a numerically stable softmax.

    With ``top_k`` set, only the k most probable labels keep their mass and
    the remainder goes to theta.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (len(frame),):
        raise DimensionMismatchError(
            f"got {logits.shape[0] if logits.ndim == 1 else logits.shape} logits "
            f"for a frame of size {len(frame)}"
        )
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    probs = exp / exp.sum()
    if top_k is None:
        return MassFunction(frame, probs, 0.0)
    if not 1 <= top_k <= len(frame):
        raise OutOfRangeError(f"top_k must be in [1, {len(frame)}], got {top_k}")
    keep = np.argsort(-probs, kind="stable")[:top_k]
    masses = np.zeros_like(probs)
    masses[keep] = probs[keep]
    theta = 1.0 - float(masses.sum())
    theta = max(theta, 0.0)
    return MassFunction(frame, masses, theta)


def mass_from_ground_truth(
    label: Label, frame: Frame, epsilon: float = 0.0
) -> MassFunction:
    """Near-certain mass on the ground-truth label; epsilon stays on theta."""
    if not 0.0 <= epsilon < 1.0:
        raise OutOfRangeError(f"epsilon must lie in [0, 1), got {epsilon!r}")
    idx = frame.index(label)
    masses = np.zeros(len(frame))
    masses[idx] = 1.0 - epsilon
    return MassFunction(frame, masses, epsilon)


def _subset_indices(m: MassFunction, subset) -> np.ndarray | None:
    """Resolve a subset argument to frame indices; None means the whole frame."""
    if subset is THETA:
        return None
    indices = sorted({m.frame.index(label) for label in subset})
    if len(indices) == len(m.frame):
        return None
    return np.asarray(indices, dtype=np.intp)


def belief(m: MassFunction, subset) -> float:
    """Bel(A): total mass committed to subsets of A.

    ``subset`` is an iterable of frame labels, or THETA for the whole frame.
    Theta's mass counts only when A is the whole frame, where Bel is 1.
    """
    indices = _subset_indices(m, subset)
    if indices is None:
        return 1.0
    return float(m.masses[indices].sum())


def plausibility(m: MassFunction, subset) -> float:
    """Pl(A): total mass not contradicting A.

    Theta intersects every non-empty subset, so its mass always counts.
    """
    indices = _subset_indices(m, subset)
    if indices is None:
        return 1.0
    return float(m.masses[indices].sum()) + m.theta


def ignorance_interval(m: MassFunction) -> float:
    """Width of the Pl - Bel interval: the uncommitted (theta) mass.

    For any singleton A, Pl(A) - Bel(A) = theta, so the interval width is the
    same for every hypothesis and equals the unassigned commitment.
    """
    return m.theta


def evidence_matrix(mx: MassFunction, my: MassFunction) -> EvidenceMatrix:
    """N x N matrix of pairwise products of the two singleton mass vectors."""
    if mx.frame != my.frame:
        raise FrameMismatchError("evidence matrix requires a shared frame")
    cells = np.outer(mx.masses, my.masses)
    cells.setflags(write=False)
    return EvidenceMatrix(mx.frame, my.frame, cells)


def combine_pair(m1: MassFunction, m2: MassFunction) -> FusionResult:
    """Dempster's rule of combination for two mass functions.

    Theta acts as the whole frame, so it never conflicts with anything:
    conflict arises only between distinct singletons. Raises TotalConflictError
    when the conflict K reaches 1 within 1e-12.
    """
    if m1.frame != m2.frame:
        raise FrameMismatchError("cannot combine masses over different frames")
    agree = m1.masses * m2.masses
    conflict = float(m1.masses.sum() * m2.masses.sum() - agree.sum())
    conflict = min(max(conflict, 0.0), 1.0)
    if conflict >= 1.0 - TOTAL_CONFLICT_TOL:
        raise TotalConflictError(f"total conflict between sources (K = {conflict!r})")
    unnorm = agree + m1.masses * m2.theta + m2.masses * m1.theta
    unnorm_theta = m1.theta * m2.theta
    if conflict == 0.0:
        combined = MassFunction(m1.frame, unnorm, unnorm_theta)
    else:
        # dividing by the exact float sum (= 1 - K in real arithmetic) keeps
        # the result normalized even when K is within an ulp of 1
        norm = float(unnorm.sum()) + unnorm_theta
        combined = MassFunction(m1.frame, unnorm / norm, unnorm_theta / norm)
    return FusionResult(combined, conflict, 1.0 - conflict)


def combine_sequential(masses: Sequence[MassFunction]) -> FusionResult:
    """Left fold of pairwise combination over two or more mass functions.

    The reported certainty is the product of the per-step (1 - K) factors,
    which equals the non-conflicting mass of the equivalent n-ary combination;
    the reported conflict is its complement.
    """
    masses = list(masses)
    if len(masses) < 2:
        raise OutOfRangeError("sequential combination needs at least two masses")
    acc = masses[0]
    phi = 1.0
    for step, m in enumerate(masses[1:]):
        try:
            result = combine_pair(acc, m)
        except TotalConflictError as err:
            raise TotalConflictError(
                f"total conflict at fusion step {step}: {err}", step=step
            ) from None
        acc = result.combined
        phi *= result.certainty_phi
    return FusionResult(acc, 1.0 - phi, phi)


def certainty(k: float) -> float:
    """Certainty of a fusion outcome: 1 - K."""
    if not 0.0 <= k <= 1.0:
        raise OutOfRangeError(f"conflict must lie in [0, 1], got {k!r}")
    return 1.0 - k
