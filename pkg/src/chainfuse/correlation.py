"""Pairwise unconditional label dependence: contingency tables, phi, chi-square.

All functions are pure; :class:`PhiMatrix` is immutable and shareable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import MultiLabelDataset

#: chi-square value above which a label pair counts as dependent (99% confidence,
#: one degree of freedom).
CHI_SQUARE_99 = 6.635


@dataclass(frozen=True)
class ContingencyTable:
    """2x2 label co-occurrence counts: both present, first only, second only, neither."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError("contingency counts must be non-negative")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d


@dataclass(frozen=True)
class PhiMatrix:
    """Symmetric m x m matrix of phi coefficients between label pairs."""

    values: np.ndarray
    label_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "label_names", tuple(self.label_names))
        values.setflags(write=False)
        m = len(self.label_names)
        if values.shape != (m, m):
            raise ValueError("phi matrix shape does not match label names")
        if not np.allclose(values, values.T):
            raise ValueError("phi matrix must be symmetric")
        if values.size and (np.abs(values) > 1 + 1e-12).any():
            raise ValueError("phi coefficients must lie in [-1, 1]")

    @property
    def m(self) -> int:
        return len(self.label_names)

    def max_off_diagonal(self) -> float:
        """Largest absolute off-diagonal entry (0.0 for a single label)."""
        if self.m < 2:
            return 0.0
        mask = ~np.eye(self.m, dtype=bool)
        return float(np.abs(self.values[mask]).max())


def contingency(labels: np.ndarray, p: int, q: int) -> ContingencyTable:
    """Co-occurrence counts of label columns p and q over all rows."""
    labels = np.asarray(labels)
    m = labels.shape[1]
    if not (0 <= p < m and 0 <= q < m):
        raise IndexError(f"label index out of range for {m} labels")
    lp = labels[:, p].astype(bool)
    lq = labels[:, q].astype(bool)
    return ContingencyTable(
        a=int(np.count_nonzero(lp & lq)),
        b=int(np.count_nonzero(lp & ~lq)),
        c=int(np.count_nonzero(~lp & lq)),
        d=int(np.count_nonzero(~lp & ~lq)),
    )


def phi(t: ContingencyTable) -> float:
    """Association of two binary variables, in [-1, 1].

    phi = (ad - bc) / sqrt((a+b)(c+d)(a+c)(b+d)); defined as 0 when any
    marginal is zero (a constant label carries no association information).
    """
    ab, cd, ac, bd = t.a + t.b, t.c + t.d, t.a + t.c, t.b + t.d
    denom = float(ab) * cd * ac * bd
    if denom == 0.0:
        return 0.0
    return (t.a * t.d - t.b * t.c) / np.sqrt(denom)


def chi_square(t: ContingencyTable) -> float:
    """chi-square statistic of the 2x2 table; 0 when any marginal is zero.

    Equals n * phi(t)**2, the classical identity for 2x2 tables.
    """
    ab, cd, ac, bd = t.a + t.b, t.c + t.d, t.a + t.c, t.b + t.d
    denom = float(ab) * cd * ac * bd
    if denom == 0.0:
        return 0.0
    return (t.a * t.d - t.b * t.c) ** 2 * t.n / denom


def is_dependent(t: ContingencyTable) -> bool:
    """Dependence call at 99% confidence (chi-square above 6.635)."""
    return chi_square(t) > CHI_SQUARE_99


def phi_matrix_from_labels(labels: np.ndarray, label_names) -> PhiMatrix:
    """Vectorized all-pairs phi over a binary label matrix."""
    y = np.asarray(labels, dtype=np.float64)
    n = y.shape[0]
    pos = y.sum(axis=0)
    a = y.T @ y
    b = pos[:, None] - a
    c = pos[None, :] - a
    d = n - a - b - c
    denom = pos[:, None] * (n - pos[:, None]) * pos[None, :] * (n - pos[None, :])
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(denom > 0, (a * d - b * c) / np.sqrt(denom), 0.0)
    values = np.clip(values, -1.0, 1.0)
    values = (values + values.T) / 2.0  # exact symmetry despite float noise
    return PhiMatrix(values=values, label_names=tuple(label_names))


def phi_matrix(ds: MultiLabelDataset) -> PhiMatrix:
    """Phi coefficients between every pair of the dataset's labels.

    Computed only from the rows of ``ds``; pass the training subset during
    tuning so validation/test rows never leak into the dependence estimate.
    """
    return phi_matrix_from_labels(ds.labels, ds.label_names)


def dependent_labels(pm: PhiMatrix, j: int, phi_t: float) -> tuple[int, ...]:
    """Indices of labels unconditionally dependent on label j, ascending.

    Selects every label p whose absolute phi against j is at least phi_t.
    Label j itself is always a member: it qualifies through its unit
    self-association when non-constant, and is included explicitly when
    constant.
    """
    if not 0.0 <= phi_t <= 1.0:
        raise ValueError("phi threshold must lie in [0, 1]")
    if not 0 <= j < pm.m:
        raise IndexError(f"label index {j} out of range for {pm.m} labels")
    selected = set(np.flatnonzero(np.abs(pm.values[:, j]) >= phi_t).tolist())
    selected.add(j)
    return tuple(sorted(selected))
