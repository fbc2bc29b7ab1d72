"""Full-domain generalization with record suppression over the level lattice.

A lattice node picks one hierarchy level per QI attribute. The search walks
the lattice bottom-up, breadth-first by total level height: privacy is
monotone (generalizing further only merges groups), so once a node passes,
its entire upward cone is tagged as passing and skipped; the tagged cone is
covered in the final minimization because the loss measure grows strictly
along every lattice edge, which makes the first-passing nodes the only
candidates for the optimum. Groups failing k-anonymity or l-diversity are
suppressed whole, and a node passes when the suppressed fraction stays within
the limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import embed
from .errors import InputError
from .tabular import NOMINAL, SUPPRESSED, Column, EquivalenceClass, QiSpec, Table
from .vgh import Vgh, build_vgh, write_hierarchy

MAX_LATTICE_NODES = 10_000_000

LatticeNode = tuple[int, ...]


@dataclass
class PrivacyParams:
    """Requested k-anonymity, l-diversity, and the record suppression limit."""

    k: int
    l: int = 1
    sup_limit: float = 0.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InputError(f"k must be at least 1, got {self.k}")
        if self.l < 1:
            raise InputError(f"l must be at least 1, got {self.l}")
        if not 0.0 <= self.sup_limit <= 1.0:
            raise InputError(f"the suppression limit must lie in [0, 1], got {self.sup_limit}")


@dataclass
class AnonymizationResult:
    """The generalized table (suppressed rows' QI cells are "*"), the chosen
    node, the suppression mask, the node's loss, and whether the privacy
    requirements were met."""

    table: Table
    node: LatticeNode
    suppressed: np.ndarray
    loss: float
    satisfied: bool


def loss(node: LatticeNode, vghs: Sequence[Vgh]) -> float:
    """Mean normalized generalization height: 0 at the identity node, 1 at the
    all-top node, strictly increasing in every component."""
    if len(node) != len(vghs):
        raise InputError("node length does not match the hierarchy count")
    total = 0.0
    for level, vgh in zip(node, vghs):
        if not 0 <= level < vgh.level_count:
            raise InputError(f"level {level} out of range for {vgh.attribute!r}")
        denom = vgh.level_count - 1
        total += level / denom if denom > 0 else 0.0
    return total / len(node)


def apply_node(
    table: Table, spec: QiSpec, vghs: Mapping[str, Vgh], node: LatticeNode
) -> Table:
    """Replace each QI cell by its label at the node's level for that attribute.

    Non-QI columns and row order are untouched.
    """
    spec.validate_against(table)
    if len(node) != len(spec.qi):
        raise InputError("node length does not match the QI attribute count")
    new_columns = []
    for column in table.columns:
        if column.name not in spec.qi:
            new_columns.append(Column(column.name, column.kind, list(column.values)))
            continue
        vgh = _vgh_for(vghs, column.name)
        level_index = node[spec.qi.index(column.name)]
        if not 0 <= level_index < vgh.level_count:
            raise InputError(f"level {level_index} out of range for {column.name!r}")
        mapping = vgh.levels[level_index]
        values = []
        for cell in column.values:
            try:
                values.append(mapping[cell])
            except KeyError:
                raise InputError(
                    f"value {cell!r} in column {column.name!r} is not a hierarchy leaf"
                ) from None
        new_columns.append(Column(column.name, NOMINAL, values))
    return Table(new_columns)


def _vgh_for(vghs: Mapping[str, Vgh], attribute: str) -> Vgh:
    try:
        return vghs[attribute]
    except KeyError:
        raise InputError(f"no hierarchy provided for QI attribute {attribute!r}") from None


class _CodedLattice:
    """Row data factorized for fast per-node privacy checks.

    Rows are collapsed to distinct leaf-value combinations with multiplicities;
    each (attribute, level) gets a lookup table from leaf index to a label
    code, so grouping at a node is integer arithmetic plus one sort.
    """

    def __init__(self, table: Table, spec: QiSpec, vghs: Mapping[str, Vgh]) -> None:
        spec.validate_against(table)
        self.n_rows = table.row_count
        self.qi = list(spec.qi)
        self.vghs = [_vgh_for(vghs, a) for a in self.qi]

        leaf_index_columns = []
        for attr, vgh in zip(self.qi, self.vghs):
            index = {leaf: i for i, leaf in enumerate(vgh.leaves)}
            column = table.column(attr).values
            try:
                leaf_index_columns.append(np.array([index[v] for v in column], dtype=np.int64))
            except KeyError as exc:
                raise InputError(
                    f"value {exc.args[0]!r} in column {attr!r} is not a hierarchy leaf"
                ) from None

        if self.n_rows:
            stacked = np.stack(leaf_index_columns, axis=1)
            self.combos, self.row_combo = np.unique(stacked, axis=0, return_inverse=True)
            self.row_combo = self.row_combo.reshape(-1)
            self.combo_counts = np.bincount(self.row_combo, minlength=len(self.combos))
        else:
            self.combos = np.zeros((0, len(self.qi)), dtype=np.int64)
            self.row_combo = np.zeros(0, dtype=np.int64)
            self.combo_counts = np.zeros(0, dtype=np.int64)

        # luts[j][v]: leaf index -> label code at level v; labels[j][v]: code -> string
        self.luts: list[list[np.ndarray]] = []
        self.labels: list[list[list[str]]] = []
        self.code_counts: list[list[int]] = []
        for vgh in self.vghs:
            attr_luts, attr_labels, attr_counts = [], [], []
            for level in vgh.levels:
                codes: dict[str, int] = {}
                lut = np.zeros(len(vgh.leaves), dtype=np.int64)
                for i, leaf in enumerate(vgh.leaves):
                    label = level[leaf]
                    lut[i] = codes.setdefault(label, len(codes))
                attr_luts.append(lut)
                attr_labels.append(sorted(codes, key=codes.get))
                attr_counts.append(len(codes))
            self.luts.append(attr_luts)
            self.labels.append(attr_labels)
            self.code_counts.append(attr_counts)

        # Packing label codes into one int64 key is safe as long as the
        # product of per-attribute code counts fits; otherwise fall back to
        # re-factorizing after every fold.
        self._single_fold = math.prod(len(v.leaves) for v in self.vghs) < 2**62

        self.sa_codes: np.ndarray | None = None
        self.n_sa = 0
        self.pair_combo: np.ndarray | None = None
        self.pair_sa: np.ndarray | None = None
        if spec.sa is not None and self.n_rows:
            sa_values = table.column(spec.sa).values
            sa_index: dict[str, int] = {}
            self.sa_codes = np.array(
                [sa_index.setdefault(v, len(sa_index)) for v in sa_values], dtype=np.int64
            )
            self.n_sa = len(sa_index)
            pairs = np.unique(self.row_combo * self.n_sa + self.sa_codes)
            self.pair_combo = pairs // self.n_sa
            self.pair_sa = pairs % self.n_sa

    def _combo_group_codes(self, node: LatticeNode) -> tuple[np.ndarray, np.ndarray]:
        """Group id per combo plus group sizes (in rows) at the given node."""
        key = np.zeros(len(self.combos), dtype=np.int64)
        for j, level in enumerate(node):
            key = key * self.code_counts[j][level] + self.luts[j][level][self.combos[:, j]]
            if not self._single_fold:
                _, key = np.unique(key, return_inverse=True)
        _, inverse = np.unique(key, return_inverse=True)
        sizes = np.bincount(inverse, weights=self.combo_counts).astype(np.int64)
        return inverse, sizes

    def _bad_groups(
        self, node: LatticeNode, params: PrivacyParams
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        inverse, sizes = self._combo_group_codes(node)
        bad = sizes < params.k
        if params.l > 1:
            if self.sa_codes is None:
                raise InputError("l-diversity above 1 requires a sensitive attribute")
            pair_group = inverse[self.pair_combo]
            distinct_pairs = np.unique(pair_group * self.n_sa + self.pair_sa)
            distinct = np.bincount(distinct_pairs // self.n_sa, minlength=len(sizes))
            bad |= distinct < params.l
        return inverse, sizes, bad

    def check(self, node: LatticeNode, params: PrivacyParams) -> bool:
        """True when whole-group suppression keeps the suppressed fraction
        within the limit."""
        if self.n_rows == 0:
            return True
        _, sizes, bad = self._bad_groups(node, params)
        suppressed = int(sizes[bad].sum())
        return suppressed / self.n_rows <= params.sup_limit

    def materialize(
        self, node: LatticeNode, params: PrivacyParams
    ) -> tuple[bool, np.ndarray, list[EquivalenceClass]]:
        """(satisfied, per-row suppression mask, retained classes sorted by key)."""
        if self.n_rows == 0:
            return True, np.zeros(0, dtype=bool), []
        inverse, sizes, bad = self._bad_groups(node, params)
        mask = bad[inverse][self.row_combo]
        satisfied = int(mask.sum()) / self.n_rows <= params.sup_limit

        group_rows: dict[int, list[int]] = {}
        for row in range(self.n_rows):
            if not mask[row]:
                group_rows.setdefault(int(inverse[self.row_combo[row]]), []).append(row)
        classes = []
        for group, rows in group_rows.items():
            combo = self.combos[self.row_combo[rows[0]]]
            key = tuple(
                self.labels[j][node[j]][self.luts[j][node[j]][combo[j]]]
                for j in range(len(self.qi))
            )
            classes.append(EquivalenceClass(key, rows))
        classes.sort(key=lambda c: c.key)
        return satisfied, mask, classes


def check_privacy(
    table: Table,
    spec: QiSpec,
    vghs: Mapping[str, Vgh],
    node: LatticeNode,
    params: PrivacyParams,
) -> tuple[bool, np.ndarray, list[EquivalenceClass]]:
    """Group rows at the node's generalization and suppress every group that
    misses k-anonymity or l-diversity.

    Returns whether the suppressed fraction stays within the limit, the
    per-row suppression mask, and the retained equivalence classes.
    """
    return _CodedLattice(table, spec, vghs).materialize(node, params)


def _nodes_by_height(level_counts: Sequence[int]) -> Iterator[LatticeNode]:
    """All lattice nodes, ascending by component sum, lexicographic within a sum."""
    maxes = [c - 1 for c in level_counts]

    def compositions(total: int, j: int, prefix: tuple[int, ...]) -> Iterator[LatticeNode]:
        if j == len(maxes) - 1:
            if total <= maxes[j]:
                yield prefix + (total,)
            return
        remaining_max = sum(maxes[j + 1 :])
        lo = max(0, total - remaining_max)
        hi = min(maxes[j], total)
        for v in range(lo, hi + 1):
            yield from compositions(total - v, j + 1, prefix + (v,))

    for s in range(sum(maxes) + 1):
        yield from compositions(s, 0, ())


def search(
    table: Table, spec: QiSpec, vghs: Mapping[str, Vgh], params: PrivacyParams
) -> AnonymizationResult:
    """Find the satisfying node of minimal loss, ties broken by (level sum,
    lexicographic levels). When nothing satisfies, the all-top node is applied
    and the result is flagged unsatisfied."""
    spec.validate_against(table)
    ordered_vghs = [_vgh_for(vghs, a) for a in spec.qi]
    level_counts = [v.level_count for v in ordered_vghs]
    total_nodes = math.prod(level_counts)
    if total_nodes > MAX_LATTICE_NODES:
        raise InputError(
            f"generalization lattice has {total_nodes} nodes, above the "
            f"{MAX_LATTICE_NODES} limit"
        )

    lattice = _CodedLattice(table, spec, vghs)
    passing = np.zeros(tuple(level_counts), dtype=bool)
    frontier: list[LatticeNode] = []
    for node in _nodes_by_height(level_counts):
        if passing[node]:
            continue
        if lattice.check(node, params):
            passing[tuple(slice(v, None) for v in node)] = True
            frontier.append(node)

    if frontier:
        best = min(frontier, key=lambda nd: (loss(nd, ordered_vghs), sum(nd), nd))
        satisfied = True
    else:
        best = tuple(c - 1 for c in level_counts)
        satisfied = False

    _, mask, _ = lattice.materialize(best, params)
    out = apply_node(table, spec, vghs, best)
    if mask.any():
        for attr in spec.qi:
            column = out.column(attr)
            for row in np.flatnonzero(mask):
                column.values[int(row)] = SUPPRESSED
    return AnonymizationResult(out, best, mask, loss(best, ordered_vghs), satisfied)


def generate_vghs(
    table: Table,
    qi_columns: Sequence[str],
    provider,
    method: str,
    seed: int = 0,
    cache_path: str | None = None,
) -> dict[str, Vgh]:
    """Embed each QI column's distinct values and build one hierarchy per column."""
    vghs = {}
    for attr in qi_columns:
        values = sorted(set(table.column(attr).values))
        if not values:
            raise InputError(f"column {attr!r} has no values to generalize")
        embeddings = embed.embed_all(values, provider, cache_path)
        vghs[attr] = build_vgh(values, embeddings, method, seed, attribute=attr)
    return vghs


def anonymize_table(
    table: Table,
    spec: QiSpec,
    provider,
    method: str,
    params: PrivacyParams,
    seed: int = 0,
    cache_path: str | None = None,
    vgh_dir: str | None = None,
) -> AnonymizationResult:
    """End-to-end pipeline: embed QI values, build hierarchies, search the
    lattice. With ``vgh_dir`` the generated hierarchies are also written there
    as ``<attribute>.csv``."""
    vghs = generate_vghs(table, spec.qi, provider, method, seed, cache_path)
    if vgh_dir is not None:
        out = Path(vgh_dir)
        out.mkdir(parents=True, exist_ok=True)
        for attr, hierarchy in vghs.items():
            write_hierarchy(hierarchy, str(out / f"{attr}.csv"))
    return search(table, spec, vghs, params)
