"""Basis random variables and truncated expansion samples.

From a driver realization we form the basis variables (projections of the
driver onto basis members), then evaluate the truncated multiple series
with one of three diagonal-correction modes:

* ``explicit_k_le_4`` -- the transformed indicator formulas for k = 1..4
  (Gaussian drivers only);
* ``pairing_general`` -- sum over partitions of the slots into singletons
  and disjoint pairs, each pair contributing -1{i_a=i_b!=0} 1{j_a=j_b};
  identical to the explicit formulas for k <= 4;
* ``prelimit`` -- subtract the coincident-index sum evaluated on the
  realization's partition, the universal (finite-N) fallback and the only
  mode for Poisson combos with coincident components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle, quadrature
from .basis import OrthonormalSystem
from .drivers import GaussianMartingalePath, Partition, PoissonRealization, WienerPath
from .kernel import CoeffTensor

__all__ = [
    "BasisVariables",
    "zeta_from_path",
    "xi_from_path",
    "pi_from_realization",
    "wiener_variables",
    "martingale_variables",
    "poisson_variables",
    "ExpansionSample",
    "expand",
    "expand_weighted",
    "pairing_bracket",
    "explicit_bracket",
]


@dataclass(frozen=True)
class BasisVariables:
    """Table of basis random variables.

    For Gaussian drivers the table is keyed by (component, j) and has shape
    (m + 1, p_max + 1); for Poisson drivers it is keyed by (slot, j) with
    shape (k, p_max + 1) because every slot carries its own mark factor.
    """

    kind: str  # "wiener" | "martingale" | "poisson"
    table: np.ndarray
    by_slot: bool
    combo: tuple[int, ...] | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.table)):
            raise ValueError("basis variable table contains non-finite values")

    @property
    def p_max(self) -> int:
        return self.table.shape[1] - 1

    def slot_vector(self, slot: int, component: int, p: int) -> np.ndarray:
        if self.by_slot:
            return self.table[slot, : p + 1]
        return self.table[component, : p + 1]


def _left_projection(path, system: OrthonormalSystem, j: int, i: int) -> float:
    phi = system.eval(j, path.partition.left_nodes)
    return float(np.dot(phi, path.increment(i)))


def zeta_from_path(path: WienerPath, system: OrthonormalSystem, j: int, i: int) -> float:
    """Left-point discretization of int phi_j dw^(i); i = 0 integrates against dt."""
    return _left_projection(path, system, j, i)


def xi_from_path(path: GaussianMartingalePath, system: OrthonormalSystem, j: int, i: int) -> float:
    """Left-point discretization of int phi_j dM^(i)."""
    return _left_projection(path, system, j, i)


def wiener_variables(path: WienerPath, system: OrthonormalSystem, p_max: int) -> BasisVariables:
    phi = system.eval_table(p_max, path.partition.left_nodes)
    return BasisVariables("wiener", path.increments @ phi.T, by_slot=False)


def martingale_variables(path: GaussianMartingalePath, system: OrthonormalSystem,
                         p_max: int) -> BasisVariables:
    phi = system.eval_table(p_max, path.partition.left_nodes)
    return BasisVariables("martingale", path.increments @ phi.T, by_slot=False)


def _basis_time_integrals(system: OrthonormalSystem, p_max: int) -> np.ndarray:
    """int phi_j dt over the interval for j = 0..p_max."""
    a, b = system.interval.start, system.interval.end
    brk = system.breakpoints(p_max)
    out = np.empty(p_max + 1)
    for j in range(p_max + 1):
        out[j], _ = quadrature.integrate(lambda x, j=j: system.eval(j, x), a, b, brk)
    return out


def pi_from_realization(realization: PoissonRealization, system: OrthonormalSystem,
                        j: int, mark_factor, i: int, compensated: bool = True,
                        moment_order: float | None = None) -> float:
    """pi_j for one slot: exact jump sum minus the compensator.

    For i = 0 the measure is Pi(dy) dt and the value is deterministic."""
    if moment_order is not None:
        realization.intensity.moment(mark_factor, moment_order)
    m1 = realization.intensity.mark_integral(mark_factor)
    time_int, _ = quadrature.integrate(lambda x: system.eval(j, x),
                                       realization.interval.start, realization.interval.end,
                                       system.breakpoints(j))
    if i == 0:
        return time_int * m1
    times, marks = realization.jumps(i)
    jump_sum = float(np.sum(system.eval(j, times) * mark_factor(marks))) if len(times) else 0.0
    if not compensated:
        return jump_sum
    return jump_sum - time_int * m1


def poisson_variables(realization: PoissonRealization, system: OrthonormalSystem,
                      mark_factors, combo, p_max: int,
                      moment_order: float | None = None,
                      time_integrals: np.ndarray | None = None) -> BasisVariables:
    """Slot-keyed table of pi_j^(g, i_g) variables, exact in the jump times.

    time_integrals can carry precomputed int phi_j dt values (one per j) to
    avoid re-quadrature inside Monte Carlo loops."""
    combo = tuple(int(i) for i in combo)
    if len(mark_factors) != len(combo):
        raise ValueError("one mark factor per slot is required")
    k = len(combo)
    if moment_order is None:
        moment_order = 2.0 ** (k + 1)
    time_ints = (_basis_time_integrals(system, p_max) if time_integrals is None
                 else np.asarray(time_integrals, dtype=float))
    table = np.empty((k, p_max + 1))
    for g, (i, phi) in enumerate(zip(combo, mark_factors)):
        realization.intensity.moment(phi, moment_order)
        m1 = realization.intensity.mark_integral(phi)
        if i == 0:
            table[g] = time_ints * m1
            continue
        times, marks = realization.jumps(i)
        if len(times):
            basis_vals = system.eval_table(p_max, times)
            table[g] = basis_vals @ phi(marks) - time_ints * m1
        else:
            table[g] = -time_ints * m1
    return BasisVariables("poisson", table, by_slot=True, combo=combo)


@dataclass(frozen=True)
class ExpansionSample:
    value: float
    box: tuple[int, ...]
    combo: tuple[int, ...]
    correction: str


def _pairings(k: int):
    """All ways to split slots 0..k-1 into singletons and disjoint pairs."""
    slots = tuple(range(k))

    def rec(remaining):
        if not remaining:
            yield ()
            return
        first, rest = remaining[0], remaining[1:]
        # first stays a singleton
        for tail in rec(rest):
            yield tail
        for other in rest:
            reduced = tuple(s for s in rest if s != other)
            for tail in rec(reduced):
                yield ((first, other),) + tail

    return list(rec(slots))


def pairing_bracket(values: np.ndarray, vectors, combo) -> float:
    """sum_J C[J] * (prod zeta - pair corrections) via the pairing expansion.

    vectors[g] is the basis-variable vector for slot g; pairs (a, b)
    contribute a factor -1{i_a = i_b != 0} (with j_a = j_b contracted)."""
    k = values.ndim
    total = 0.0
    letters = "abcdefgh"[:k]
    for pairing in _pairings(k):
        pairs = pairing
        sign = (-1.0) ** len(pairs)
        if any(combo[a] != combo[b] or combo[a] == 0 for a, b in pairs):
            continue
        paired_slots = {s for p in pairs for s in p}
        subs = list(letters)
        for a, b in pairs:
            subs[b] = subs[a]
        singles = [g for g in range(k) if g not in paired_slots]
        arr = values
        # trim paired axes to the common extent so einsum can tie them
        for a, b in pairs:
            n = min(arr.shape[a], arr.shape[b])
            slicer = [slice(None)] * k
            slicer[a] = slice(0, n)
            slicer[b] = slice(0, n)
            arr = arr[tuple(slicer)]
        spec = "".join(subs)
        operands = [arr]
        for g in singles:
            spec += "," + subs[g]
            operands.append(vectors[g])
        total += sign * float(np.einsum(spec + "->", *operands))
    return total


def explicit_bracket(values: np.ndarray, vectors, combo) -> float:
    """The transformed indicator formulas, written out verbatim for k = 1..4."""
    k = values.ndim
    z = vectors
    i = combo

    def ind(a, b):
        return 1.0 if (i[a] == i[b] and i[a] != 0) else 0.0

    def tie(axes):
        """Trace of values over a set of tied axes, vectors on the rest."""
        n = min(values.shape[a] for a in axes)
        letters = "abcd"[:k]
        subs = list(letters)
        for a in axes[1:]:
            subs[a] = subs[axes[0]]
        slicer = [slice(None)] * k
        for ax in axes:
            slicer[ax] = slice(0, n)
        arr = values[tuple(slicer)]
        spec = "".join(subs)
        operands = [arr]
        for g in range(k):
            if g in axes:
                continue
            spec += "," + subs[g]
            operands.append(z[g])
        return float(np.einsum(spec + "->", *operands))

    spec = "abcd"[:k]
    full = float(np.einsum(spec + "," + ",".join(spec) + "->", values, *z))
    if k == 1:
        return full
    if k == 2:
        return full - ind(0, 1) * tie((0, 1))
    if k == 3:
        return (full
                - ind(0, 1) * tie((0, 1))
                - ind(1, 2) * tie((1, 2))
                - ind(0, 2) * tie((0, 2)))
    if k == 4:
        def tie2(p, q):
            """Both pairs tied: p and q are disjoint axis pairs."""
            n1 = min(values.shape[p[0]], values.shape[p[1]])
            n2 = min(values.shape[q[0]], values.shape[q[1]])
            subs = list("abcd")
            subs[p[1]] = subs[p[0]]
            subs[q[1]] = subs[q[0]]
            slicer = [slice(None)] * 4
            for ax in p:
                slicer[ax] = slice(0, n1)
            for ax in q:
                slicer[ax] = slice(0, n2)
            return float(np.einsum("".join(subs) + "->", values[tuple(slicer)]))

        out = full
        out -= ind(0, 1) * tie((0, 1))
        out -= ind(0, 2) * tie((0, 2))
        out -= ind(0, 3) * tie((0, 3))
        out -= ind(1, 2) * tie((1, 2))
        out -= ind(1, 3) * tie((1, 3))
        out -= ind(2, 3) * tie((2, 3))
        out += ind(0, 1) * ind(2, 3) * tie2((0, 1), (2, 3))
        out += ind(0, 2) * ind(1, 3) * tie2((0, 2), (1, 3))
        out += ind(0, 3) * ind(1, 2) * tie2((0, 3), (1, 2))
        return out
    raise ValueError("explicit formulas cover multiplicities 1..4 only")


def _distinct_nonzero(combo) -> bool:
    nz = [i for i in combo if i != 0]
    return len(nz) == len(set(nz))


def expand(tensor: CoeffTensor, variables: BasisVariables, combo,
           correction: str = "pairing_general", realization=None,
           mark_factors=None, partition: Partition | None = None) -> ExpansionSample:
    """Truncated expansion sample for one component combination.

    correction is "explicit_k_le_4", "pairing_general" or "prelimit"."""
    combo = tuple(int(i) for i in combo)
    k = len(tensor.box)
    if len(combo) != k:
        raise ValueError("combo length must equal tensor multiplicity")
    if variables.by_slot and variables.combo != combo:
        raise ValueError("slot-keyed variables were built for a different combo")
    if any(p > variables.p_max for p in tensor.box):
        raise ValueError("variable table does not cover the truncation box")
    vectors = [variables.slot_vector(g, combo[g], tensor.box[g]) for g in range(k)]
    gaussian = variables.kind in ("wiener", "martingale")
    if correction == "explicit_k_le_4":
        if not (gaussian or _distinct_nonzero(combo)):
            raise ValueError("explicit correction requires a Gaussian driver "
                             "or pairwise-distinct nonzero components")
        if k > 4:
            raise ValueError("explicit correction covers multiplicities 1..4 only")
        value = explicit_bracket(tensor.values, vectors, combo)
    elif correction == "pairing_general":
        if not (gaussian or _distinct_nonzero(combo)):
            raise ValueError("pairing correction requires a Gaussian driver "
                             "or pairwise-distinct nonzero components")
        value = pairing_bracket(tensor.values, vectors, combo)
    elif correction == "prelimit":
        if realization is None:
            raise ValueError("prelimit correction requires the underlying realization")
        part, incs = oracle.slot_increments(realization, combo, partition, mark_factors)
        left = part.left_nodes
        phi = tensor.system.eval_table(max(tensor.box), left)
        tables = [phi[: tensor.box[g] + 1] for g in range(k)]
        corr = oracle.gk_correction_tensor(tables, incs)
        spec = "abcd"[:k]
        raw = float(np.einsum(spec + "," + ",".join(spec) + "->", tensor.values, *vectors))
        value = raw - float(np.sum(tensor.values * corr))
    else:
        raise ValueError(f"unknown correction mode: {correction}")
    return ExpansionSample(value, tensor.box, combo, correction)


def expand_weighted(tensor: CoeffTensor, variables: BasisVariables, combo, rho,
                    correction: str = "pairing_general", ratio_bound: float = 1e6,
                    grid_size: int = 2048, **kw) -> ExpansionSample:
    """Expansion with weighted coefficients and a weighted basis.

    Checks the compatibility condition sup rho / r < bound on a dense grid
    before delegating to expand; with rho == r == 1 this is exactly expand."""
    if not callable(rho):
        rho_val = float(rho)
        rho = lambda x: np.full_like(np.asarray(x, dtype=float), rho_val)
    interval = tensor.system.interval
    # avoid the endpoints where a vanishing weight is harmless (measure zero)
    x = np.linspace(interval.start, interval.end, grid_size + 2)[1:-1]
    r = tensor.system.weight(x)
    ratio = np.asarray(rho(x), dtype=float) / np.where(r > 0, r, np.inf)
    if np.max(ratio) > ratio_bound:
        raise ValueError(
            f"variance density / weight ratio appears unbounded (sup over grid "
            f"{np.max(ratio):.3g} exceeds {ratio_bound:.3g})")
    return expand(tensor, variables, combo, correction=correction, **kw)
