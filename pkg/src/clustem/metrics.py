"""Privacy and utility measurements over an anonymization's retained groups.

All measurements are taken on the retained records: the groups passed in are
the equivalence classes left after suppression, and the "global" sensitive
distribution for t-closeness is computed over exactly those rows.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .anonymize import LatticeNode, PrivacyParams
from .tabular import EquivalenceClass, Table


@dataclass
class MetricReport:
    achieved_k: int
    achieved_l: int
    t_closeness: float
    perc_recs: float
    c_avg: float
    requested: PrivacyParams
    node: LatticeNode | None = None

    def to_dict(self) -> dict:
        out = {
            "achieved_k": self.achieved_k,
            "achieved_l": self.achieved_l,
            "t_closeness": self.t_closeness,
            "perc_recs": self.perc_recs,
            "c_avg": self.c_avg,
            "requested": {
                "k": self.requested.k,
                "l": self.requested.l,
                "sup_limit": self.requested.sup_limit,
            },
        }
        if self.node is not None:
            out["node"] = list(self.node)
        return out


def perc_recs(original: Table, retained_count: int) -> float:
    """Fraction of records that survived suppression; 1.0 for an empty table."""
    total = original.row_count
    if not 0 <= retained_count <= total:
        raise ValueError(f"retained count {retained_count} out of range for {total} rows")
    return retained_count / total if total else 1.0


def c_avg(retained_count: int, group_count: int, k: int) -> float:
    """Normalized average group size |D'| / (|groups| * k); 1.0 is optimal."""
    if retained_count == 0:
        return 0.0
    if group_count < 1:
        raise ValueError("retained records require at least one group")
    if k < 1:
        raise ValueError("k must be at least 1")
    return retained_count / (group_count * k)


def t_closeness(groups: Sequence[EquivalenceClass], sa_values: Sequence[str]) -> float:
    """Max over groups of the total-variation distance between the group's
    sensitive-value distribution and the distribution over all retained rows."""
    retained = [i for group in groups for i in group.row_indices]
    if not retained:
        raise ValueError("t-closeness needs at least one retained row")
    global_counts = Counter(sa_values[i] for i in retained)
    total = len(retained)
    worst = 0.0
    for group in groups:
        counts = Counter(sa_values[i] for i in group.row_indices)
        dist = 0.5 * sum(
            abs(counts.get(v, 0) / group.size - global_counts[v] / total)
            for v in global_counts
        )
        worst = max(worst, dist)
    return worst


def achieved_privacy(
    groups: Sequence[EquivalenceClass], sa_values: Sequence[str] | None
) -> tuple[int, int]:
    """(min group size, min distinct sensitive values per group); (0, 0) when
    there are no groups, and l is 0 without a sensitive attribute."""
    if not groups:
        return 0, 0
    k = min(group.size for group in groups)
    if sa_values is None:
        return k, 0
    l = min(len({sa_values[i] for i in group.row_indices}) for group in groups)
    return k, l


def compute_report(
    original: Table,
    groups: Sequence[EquivalenceClass],
    sa_values: Sequence[str] | None,
    params: PrivacyParams,
    node: LatticeNode | None = None,
) -> MetricReport:
    """Assemble the full report from retained groups; pure in its inputs."""
    retained = sum(group.size for group in groups)
    achieved_k, achieved_l = achieved_privacy(groups, sa_values)
    t = t_closeness(groups, sa_values) if sa_values is not None and retained else 0.0
    return MetricReport(
        achieved_k=achieved_k,
        achieved_l=achieved_l,
        t_closeness=t,
        perc_recs=perc_recs(original, retained),
        c_avg=c_avg(retained, len(groups), params.k) if retained else 0.0,
        requested=params,
        node=node,
    )
