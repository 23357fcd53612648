"""Symbolic enumeration of the iterated-collapse expansion of the first
marginal.

The k-fold iterated Duhamel expansion writes the first marginal through a
chain of collapse operators B_{mu(2l); 2l, 2l+1}, l = 1..k, applied innermost
(l = k) first.  A collapse map mu fixes which earlier slot each level acts
on; a sign per level says whether the collapse lands on the unprimed (+) or
primed (-) side of the kernel.  Acting at level l consumes five factor slots
(the target-side content of slot mu(2l), and both sides of slots 2l and
2l+1) and replaces the target content with a quintic node.

Node kinds record two structural facts used by the estimate bookkeeping:
whether the node contains at least one bare free-evolved factor (subscript
phi), and whether its subtree contains the innermost, roughest node
(subscript R).  A level with no bare factor in its node is congested; the
count of congested levels is bounded by the consumption argument
4k - 4 <= 5 * (number of unclogged levels).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

BARE = "phi"

PLUS, MINUS = +1, -1


@dataclass(frozen=True)
class CollapseMap:
    """targets[l-1] is the slot acted on at level l (the value mu(2l));
    constraints: targets[0] == 1 and 1 <= targets[l-1] <= 2l - 1."""

    k: int
    targets: tuple[int, ...]

    def __post_init__(self):
        if len(self.targets) != self.k:
            raise ValueError("need one target per level")
        if self.k >= 1 and self.targets[0] != 1:
            raise ValueError("the first collapse always acts on slot 1")
        for l, t in enumerate(self.targets, start=1):
            if not 1 <= t <= 2 * l - 1:
                raise ValueError(f"level {l} target {t} outside 1..{2 * l - 1}")


def enumerate_collapse_maps(k: int) -> list[CollapseMap]:
    """All admissible collapse maps, lexicographically ordered.

    There are prod_{l=2}^{k} (2l-1) = (2k-1)!! of them.
    """
    if not 1 <= k <= 10:
        raise ValueError("supported range is 1 <= k <= 10")
    ranges = [range(1, 2)] + [range(1, 2 * l) for l in range(2, k + 1)]
    return [CollapseMap(k, tuple(t)) for t in itertools.product(*ranges)]


def double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def raw_summand_count(k: int) -> dict[str, int]:
    """Count the signed summands of the k-fold expansion by direct expansion.

    Each level l contributes a sum over 2l-1 slots, each split into a + and a
    - collapse, so the brute-force product is prod_l 2(2l-1) = (2k-1)!! 2^k.
    The alternative closed form (2k+1)!! 2^k is reported alongside; the two
    disagree and the direct expansion is treated as ground truth.
    """
    if not 1 <= k <= 12:
        raise ValueError("supported range is 1 <= k <= 12")
    brute = 1
    for l in range(1, k + 1):
        brute *= 2 * (2 * l - 1)
    return {
        "k": k,
        "brute_force": brute,
        "printed_formula": double_factorial(2 * k + 1) * 2**k,
        "collapse_maps_times_signs": double_factorial(2 * k - 1) * 2**k,
    }


@dataclass(frozen=True)
class SignedExpansion:
    collapse: CollapseMap
    signs: tuple[int, ...]  # +1 (unprimed side) or -1 (primed side) per level

    def __post_init__(self):
        if len(self.signs) != self.collapse.k:
            raise ValueError("need one sign per level")
        if any(s not in (PLUS, MINUS) for s in self.signs):
            raise ValueError("signs must be +1 or -1")

    @property
    def k(self) -> int:
        return self.collapse.k


def all_signed_expansions(k: int):
    """Lexicographic iteration over (collapse map, sign pattern) pairs."""
    for cm in enumerate_collapse_maps(k):
        for signs in itertools.product((PLUS, MINUS), repeat=k):
            yield SignedExpansion(cm, signs)


class NodeKind(Enum):
    Q = "Q"
    Q_PHI = "Q_phi"
    Q_R = "Q_R"
    Q_PHI_R = "Q_phi_R"


@dataclass
class QuinticNode:
    """The quintic factor created at one level of the collapse chain.

    children holds the five consumed contents in the order (target content,
    slot 2l unprimed, slot 2l+1 unprimed, slot 2l primed, slot 2l+1 primed);
    each is either BARE or a deeper QuinticNode.
    """

    level: int
    children: tuple = field(default_factory=tuple)
    kind: NodeKind = NodeKind.Q
    contains_innermost: bool = False

    @property
    def bare_children(self) -> int:
        return sum(1 for c in self.children if c is BARE)

    @property
    def order_label(self) -> int:
        return 2 * self.level + 1


@dataclass
class MarkedExpansion:
    expansion: SignedExpansion
    nodes: list[QuinticNode]  # indexed by level - 1
    top_other_side: object  # content of slot 1 on the side opposite level 1

    @property
    def bare_consumed_classified(self) -> int:
        """Bare factors absorbed by the nodes of levels 1..k-1."""
        return sum(n.bare_children for n in self.nodes[:-1])

    @property
    def bare_available_after_innermost(self) -> int:
        return 4 * self.expansion.k - 3

    @property
    def surviving_bare(self) -> int:
        return 1 if self.top_other_side is BARE else 0


def mark_expansion(e: SignedExpansion) -> MarkedExpansion:
    """Run the collapse chain symbolically, innermost level first, and mark
    the node created at each level with its phi / R subscripts."""
    k = e.k
    unprimed: dict[int, object] = {s: BARE for s in range(1, 2 * k + 2)}
    primed: dict[int, object] = {s: BARE for s in range(1, 2 * k + 2)}
    nodes: list[QuinticNode | None] = [None] * k
    for l in range(k, 0, -1):
        j = e.collapse.targets[l - 1]
        side = unprimed if e.signs[l - 1] == PLUS else primed
        target = side[j]
        children = (
            target,
            unprimed.pop(2 * l),
            unprimed.pop(2 * l + 1),
            primed.pop(2 * l),
            primed.pop(2 * l + 1),
        )
        has_phi = any(c is BARE for c in children)
        contains_inner = l == k or any(
            isinstance(c, QuinticNode) and c.contains_innermost for c in children
        )
        if l == k:
            kind = NodeKind.Q_R  # the roughest factor, by construction
        elif has_phi and contains_inner:
            kind = NodeKind.Q_PHI_R
        elif has_phi:
            kind = NodeKind.Q_PHI
        elif contains_inner:
            kind = NodeKind.Q_R
        else:
            kind = NodeKind.Q
        node = QuinticNode(l, children, kind, contains_inner)
        side[j] = node
        nodes[l - 1] = node
    other = primed[1] if e.signs[0] == PLUS else unprimed[1]
    return MarkedExpansion(e, nodes, other)


def classify_couplings(e: SignedExpansion) -> dict[str, set[int]]:
    """Partition levels 1..k-1 into unclogged (node carries a bare factor)
    and congested (it does not)."""
    marked = mark_expansion(e)
    unclogged = {n.level for n in marked.nodes[:-1] if n.bare_children >= 1}
    congested = set(range(1, e.k)) - unclogged
    return {"unclogged": unclogged, "congested": congested}


ESTIMATE_BY_KIND = {
    NodeKind.Q_PHI_R: "MLFL1",
    NodeKind.Q_PHI: "MLFL2",
    NodeKind.Q_R: "Old1",
    NodeKind.Q: "Old2",
}


def estimate_schedule(e: SignedExpansion) -> dict:
    """Which multilinear estimate each level's node triggers (levels < k);
    nodes carrying a bare factor call the frequency-localized variants."""
    marked = mark_expansion(e)
    schedule = [ESTIMATE_BY_KIND[n.kind] for n in marked.nodes[:-1]]
    freq_localized = sum(1 for s in schedule if s.startswith("MLFL"))
    return {
        "per_level": schedule,
        "freq_localized_count": freq_localized,
        "plain_count": len(schedule) - freq_localized,
    }


def min_unclogged_floor(k: int) -> int:
    """ceil(4(k-1)/5): the consumption-argument lower bound on the number of
    unclogged levels."""
    return -((-4 * (k - 1)) // 5)


def _congested_counts_vectorized(k: int) -> tuple[np.ndarray, list[CollapseMap]]:
    """Congested-level counts for every signed expansion, shape (maps, 2^k).

    Level l (1-based, l < k) is congested iff all five consumed contents are
    nodes, i.e. every one of (slot 2l, both sides), (slot 2l+1, both sides),
    (slot mu(2l), level-l side) is the target of some deeper level with the
    matching side.
    """
    maps = enumerate_collapse_maps(k)
    tg = np.array([cm.targets for cm in maps])  # (M, k)
    nsig = 2**k
    bits = ((np.arange(nsig)[:, None] >> np.arange(k)[None, :]) & 1).astype(bool)
    plus = bits  # (S, k): True means the level acts on the unprimed side
    counts = np.zeros((len(maps), nsig), dtype=np.int64)
    for l in range(1, k):
        deeper = slice(l, k)  # deeper levels l+1..k (0-based columns l..k-1)
        t_deep = tg[:, deeper]  # (M, k-l)
        p_deep = plus[:, deeper]  # (S, k-l)
        m_deep = ~p_deep

        def covered(match: np.ndarray, sign_sel: np.ndarray) -> np.ndarray:
            # exists deeper level with target match and side sign_sel
            return (match.astype(np.int8) @ sign_sel.astype(np.int8).T) > 0

        hit_2l = t_deep == 2 * l
        hit_2l1 = t_deep == 2 * l + 1
        hit_tgt = t_deep == tg[:, l - 1][:, None]
        both_2l = covered(hit_2l, p_deep) & covered(hit_2l, m_deep)
        both_2l1 = covered(hit_2l1, p_deep) & covered(hit_2l1, m_deep)
        tgt_plus = covered(hit_tgt, p_deep)
        tgt_minus = covered(hit_tgt, m_deep)
        tgt_side = np.where(plus[:, l - 1][None, :], tgt_plus, tgt_minus)
        counts += (both_2l & both_2l1 & tgt_side).astype(np.int64)
    return counts, maps


def min_unclogged(k: int) -> dict:
    """Exhaustive minimum of the unclogged-level count over all signed
    expansions, with a witnessing expansion and the consumption-bound check.
    """
    if not 2 <= k <= 7:
        raise ValueError("exhaustive search supported for 2 <= k <= 7")
    counts, maps = _congested_counts_vectorized(k)
    unclogged = (k - 1) - counts
    min_count = int(unclogged.min())
    mi, si = np.unravel_index(int(np.argmin(unclogged)), unclogged.shape)
    signs = tuple(PLUS if (si >> l) & 1 else MINUS for l in range(k))
    witness = SignedExpansion(maps[mi], signs)
    max_congested = int(counts.max())
    bound_ok = bool(np.all(4 * k - 4 <= 5 * ((k - 1) - counts)))
    return {
        "k": k,
        "min_count": min_count,
        "floor": min_unclogged_floor(k),
        "max_congested": max_congested,
        "consumption_bound_holds": bound_ok,
        "witnessing_expansion": witness,
    }
