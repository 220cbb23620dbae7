"""Random operator families and per-realization Hamiltonian assembly.

Three variants share one assembly path:

* ``block``: single-site potential V(x) = v(x) A + B with k x k Hermitian
  blocks and translation-invariant hopping kernel K, scaled by 1/g.
* ``spencer``: the k=2 block model with A = diag(1, -1), B = antidiag(a, a).
* ``alloy``: scalar ambient space; the potential at site n is the finite
  convolution sum_off coeffs[off] * v(n + off), terms reaching outside an
  open box are dropped, periodic boxes wrap.

Matrices are stored complex128 throughout (one numeric path).  Assembly
writes both triangles from the same kernel/potential source, so assembled
instances are Hermitian exactly, not after symmetrization.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .kernels import opnorm
from .topology import GraphTopology

_MAX_BLOCK = 16


def _as_block(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigurationError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] > _MAX_BLOCK:
        raise ConfigurationError(f"{name} exceeds the k <= {_MAX_BLOCK} block limit")
    if not np.all(np.isfinite(m.view(np.float64))):
        raise ConfigurationError(f"{name} has non-finite entries")
    m = m.copy()
    m.setflags(write=False)
    return m


def _require_hermitian(m: np.ndarray, name: str):
    if not np.array_equal(m, m.conj().T):
        raise ConfigurationError(f"{name} must be exactly Hermitian")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    variant: str  # block | spencer | alloy
    k: int  # block size, or alloy coefficient-support cardinality
    g: float
    A: np.ndarray | None = None
    B: np.ndarray | None = None
    hopping: dict | None = None  # offset tuple -> k x k kernel; None = identity
    alloy_coeffs: dict | None = None  # offset tuple -> float
    spencer_a: float | None = None
    sum_zero: bool = False
    constants: dict = field(default_factory=dict)

    @property
    def k_ambient(self) -> int:
        """Internal degrees of freedom per site (1 for alloy models)."""
        return 1 if self.variant == "alloy" else self.k

    @property
    def coupling(self) -> float:
        """Off-diagonal strength 1/g; 0 for the decoupled limit g = inf."""
        return 0.0 if math.isinf(self.g) else 1.0 / self.g

    def describe(self) -> str:
        return f"{self.variant}(k={self.k},g={self.g!r})"


def _normalize_hopping(hopping, k: int) -> dict | None:
    """Validate K(-off) = K(off)* and fill missing mirror offsets."""
    if hopping is None:
        return None
    out = {}
    for off, mat in hopping.items():
        off = tuple(int(o) for o in (off if np.iterable(off) else (off,)))
        if all(o == 0 for o in off):
            raise ConfigurationError("hopping kernel offset 0 collides with the potential")
        mat = _as_block(mat, f"K{off}")
        if mat.shape[0] != k:
            raise ConfigurationError(f"K{off} block size {mat.shape[0]} != k={k}")
        out[off] = mat
    for off in list(out):
        moff = tuple(-o for o in off)
        if moff in out:
            if not np.array_equal(out[moff], out[off].conj().T):
                raise ConfigurationError(f"hopping violates K{moff} = K{off}* exactly")
        else:
            mirror = out[off].conj().T.copy()
            mirror.setflags(write=False)
            out[moff] = mirror
    return out


def block_model(A, B, g: float, hopping=None) -> ModelSpec:
    """Generic block model V(x) = v(x) A + B with optional hopping kernel."""
    if not g > 0:
        raise ConfigurationError(f"coupling g must be > 0, got {g}")
    A = _as_block(A, "A")
    B = _as_block(B, "B")
    _require_hermitian(A, "A")
    _require_hermitian(B, "B")
    if A.shape != B.shape:
        raise ConfigurationError("A and B must have the same block size")
    k = A.shape[0]
    hop = _normalize_hopping(hopping, k)
    norm_a = opnorm(A)
    try:
        inv_norm = opnorm(np.linalg.inv(A)) if abs(np.linalg.det(A)) > 1e-12 else None
    except np.linalg.LinAlgError:
        inv_norm = None
    constants = {
        "C_B1": max(norm_a, inv_norm) if inv_norm is not None else None,
        "norm_A": norm_a,
        "C_B2": opnorm(B),
        "C_B3": max((opnorm(m) for m in hop.values()), default=1.0) if hop else 1.0,
    }
    return ModelSpec(
        variant="block", k=k, g=float(g), A=A, B=B, hopping=hop, constants=constants
    )


def spencer_model(a: float, g: float) -> ModelSpec:
    """2x2 model with V(n) = [[v, a], [a, -v]] and identity hopping."""
    a = float(a)
    spec = block_model([[1.0, 0.0], [0.0, -1.0]], [[0.0, a], [a, 0.0]], g)
    return ModelSpec(
        variant="spencer",
        k=2,
        g=float(g),
        A=spec.A,
        B=spec.B,
        hopping=None,
        spencer_a=a,
        constants=spec.constants,
    )


def singular_covering_model(g: float) -> ModelSpec:
    """k=3 block model with singular A = diag(1, 0, -1) and a generic B.

    A is not invertible, so the covering condition fails; the averaged
    inverse-potential moment stays bounded regardless, which is what the
    relaxed condition asks for.
    """
    A = [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -1.0]]
    B = [[0.0, 1.0, 0.0], [1.0, 0.0, 2.0], [0.0, 2.0, 0.0]]
    spec = block_model(A, B, g)
    return ModelSpec(
        variant="block", k=3, g=float(g), A=spec.A, B=spec.B, constants=spec.constants
    )


def alloy_model(coeffs: dict, g: float) -> ModelSpec:
    """Scalar alloy potential; coeffs[off] multiplies v(site + off)."""
    if not g > 0:
        raise ConfigurationError(f"coupling g must be > 0, got {g}")
    if not coeffs:
        raise ConfigurationError("alloy model needs a non-empty coefficient support")
    norm = {}
    for off, c in coeffs.items():
        off = tuple(int(o) for o in (off if np.iterable(off) else (off,)))
        norm[off] = float(c)
    dims = {len(off) for off in norm}
    if len(dims) != 1:
        raise ConfigurationError(f"alloy offsets mix dimensions: {sorted(norm)}")
    total = math.fsum(norm.values())
    return ModelSpec(
        variant="alloy",
        k=len(norm),
        g=float(g),
        alloy_coeffs=norm,
        sum_zero=(total == 0.0),
        constants={"C_B3": 1.0, "coeff_sum": total},
    )


def decay_exponent_window(k: int, alpha: float, q: float) -> float:
    """Largest fractional power for which the strong-disorder decay bounds run: aq/(2ka+kq)."""
    return alpha * q / (2.0 * k * alpha + k * q)


@dataclass(eq=False)
class HamiltonianInstance:
    topology: GraphTopology
    model: ModelSpec
    v: np.ndarray  # one disorder value per vertex
    matrix: np.ndarray  # (N*ka, N*ka) complex128
    _digest: str | None = None

    @property
    def k(self) -> int:
        return self.model.k_ambient

    @property
    def n_sites(self) -> int:
        return self.topology.n_vertices

    def block_slice(self, site: int) -> slice:
        ka = self.k
        return slice(site * ka, (site + 1) * ka)

    @property
    def digest(self) -> str:
        if self._digest is None:
            h = hashlib.sha256()
            h.update(self.topology.signature().encode())
            h.update(self.model.describe().encode())
            h.update(np.ascontiguousarray(self.v).tobytes())
            h.update(np.ascontiguousarray(self.matrix).tobytes())
            self._digest = h.hexdigest()
        return self._digest


@dataclass(eq=False)
class AssemblyPlan:
    """Disorder-independent part of assembly, reusable across Monte Carlo samples."""

    hop: np.ndarray  # hopping-only matrix (zero diagonal blocks)
    alloy_gather: list | None  # [(coeff, target_idx, source_idx)] per offset


def _lattice_offset(topo: GraphTopology, x: int, y: int):
    delta = topo.coords[y] - topo.coords[x]
    out = []
    for ax, d in enumerate(delta):
        d = int(d)
        if topo.periodic and topo.periodic[ax]:
            side = topo.sides[ax]
            if d == side - 1:
                d = -1
            elif d == -(side - 1):
                d = 1
        out.append(d)
    return tuple(out)


def _vertex_at(topo: GraphTopology, coord) -> int | None:
    sides = topo.sides
    idx = 0
    for ax, c in enumerate(coord):
        c = int(c)
        if topo.periodic and topo.periodic[ax]:
            c %= sides[ax]
        elif not 0 <= c < sides[ax]:
            return None
        idx = idx * sides[ax] + c
    return idx


def assembly_plan(model: ModelSpec, topo: GraphTopology) -> AssemblyPlan:
    """Precompute hopping matrix and alloy gather maps for a (model, topology) pair."""
    n = topo.n_vertices
    ka = model.k_ambient
    hop = np.zeros((n * ka, n * ka), dtype=np.complex128)
    coupling = model.coupling
    identity = np.eye(ka, dtype=np.complex128)
    for x in range(n):
        for y in topo.adjacency[x]:
            if model.hopping is None:
                kern = identity
            else:
                if topo.coords is None:
                    raise ConfigurationError(
                        "offset-keyed hopping kernels need lattice coordinates"
                    )
                off = _lattice_offset(topo, x, y)
                kern = model.hopping.get(off)
                if kern is None:
                    raise ConfigurationError(f"no hopping kernel for offset {off}")
            hop[x * ka:(x + 1) * ka, y * ka:(y + 1) * ka] = coupling * kern

    gather = None
    if model.variant == "alloy":
        if topo.coords is None:
            raise ConfigurationError("alloy models need lattice coordinates")
        dim = topo.coords.shape[1]
        gather = []
        for off, c in sorted(model.alloy_coeffs.items()):
            if len(off) != dim:
                raise ConfigurationError(
                    f"alloy offset {off} does not match lattice dimension {dim}"
                )
            tgt, src = [], []
            for x in range(n):
                sx = _vertex_at(topo, topo.coords[x] + np.asarray(off, dtype=np.int64))
                if sx is not None:
                    tgt.append(x)
                    src.append(sx)
            gather.append((c, np.asarray(tgt, dtype=np.int64), np.asarray(src, dtype=np.int64)))
    return AssemblyPlan(hop=hop, alloy_gather=gather)


def assemble(
    model: ModelSpec,
    topo: GraphTopology,
    v,
    plan: AssemblyPlan | None = None,
) -> HamiltonianInstance:
    """Assemble the Hermitian matrix for one disorder realization v."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (topo.n_vertices,):
        raise ConfigurationError(
            f"disorder vector length {v.shape} != site count {topo.n_vertices}"
        )
    if plan is None:
        plan = assembly_plan(model, topo)
    n = topo.n_vertices
    ka = model.k_ambient
    mat = plan.hop.copy()
    if model.variant == "alloy":
        diag = np.zeros(n)
        for c, tgt, src in plan.alloy_gather:
            diag[tgt] += c * v[src]
        mat[np.arange(n), np.arange(n)] += diag
    else:
        for x in range(n):
            sl = slice(x * ka, (x + 1) * ka)
            mat[sl, sl] += v[x] * model.A + model.B
    return HamiltonianInstance(topology=topo, model=model, v=v.copy(), matrix=mat)


def restrict(h: HamiltonianInstance, sub) -> HamiltonianInstance:
    """Principal submatrix of h on a sub_box result (sub_topo, index_map)."""
    sub_topo, index_map = sub
    if np.any(index_map >= h.n_sites) or np.any(index_map < 0):
        raise ConfigurationError("sub-box index map does not match the instance")
    ka = h.k
    rows = (index_map[:, None] * ka + np.arange(ka)[None, :]).ravel()
    return HamiltonianInstance(
        topology=sub_topo,
        model=h.model,
        v=h.v[index_map].copy(),
        matrix=h.matrix[np.ix_(rows, rows)].copy(),
    )


def potential_block(h: HamiltonianInstance, site: int) -> np.ndarray:
    """The assembled diagonal block at a site (the realized potential V(site))."""
    sl = h.block_slice(site)
    return h.matrix[sl, sl].copy()


def hermiticity_residual(h: HamiltonianInstance) -> float:
    """max |H_ij - conj(H_ji)|; exactly 0 for assembled instances."""
    return float(np.max(np.abs(h.matrix - h.matrix.conj().T)))
