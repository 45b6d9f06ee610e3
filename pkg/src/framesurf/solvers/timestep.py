"""Classical RK4 marching, run configuration and diagnostic series."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

VARIANTS = {
    "LOCAL": ("local", False),
    "LOCSPHnoG": ("locsph", False),
    "LOCSPHwithG": ("locsph", True),
}


class NumericalAbort(RuntimeError):
    """Non-finite state (or non-positive depth) detected during time marching."""

    def __init__(self, step, t, reason="non-finite state"):
        self.step, self.t, self.reason = step, t, reason
        super().__init__(f"{reason} at step {step} (t={t:.6g})")


@dataclass
class SimConfig:
    model: str                         # advection | maxwell_tm | swe
    test_case: str
    frames_e: str = "local"
    frames_d: str | None = None        # divergence frames (swe); defaults to frames_e
    with_G: bool = False
    dt: float = 1e-3
    T_final: float = 1.0
    p: int = 5
    refine: int = 2
    q: int = 3
    surface: str = "sphere"
    ratio: float = 1.003364
    diagnostic_stride: int = 100
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in ("advection", "maxwell_tm", "swe"):
            raise ValueError(f"unknown model {self.model!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.T_final < self.dt:
            raise ValueError("T_final must be at least one time step")
        if self.frames_d is None:
            self.frames_d = self.frames_e
        if self.diagnostic_stride < 1:
            raise ValueError("diagnostic_stride must be >= 1")

    @property
    def n_steps(self):
        return int(round(self.T_final / self.dt))

    @classmethod
    def variant(cls, name, **kwargs):
        """Config for one of LOCAL, LOCSPHnoG, LOCSPHwithG."""
        kind, with_G = VARIANTS[name]
        if kwargs.get("model") == "swe":
            kwargs.setdefault("frames_e", "local")
            return cls(frames_d=kind, with_G=with_G, **kwargs)
        return cls(frames_e=kind, frames_d=kind, with_G=with_G, **kwargs)

    def echo(self):
        return "\n".join(f"{k}={v}" for k, v in asdict(self).items()) + "\n"


CSV_HEADER = ("t", "l2_error", "mass", "mass_err", "energy", "energy_err")


@dataclass
class DiagnosticSeries:
    rows: list = field(default_factory=list)
    aborted: NumericalAbort | None = None

    def append(self, t, l2_error, mass, energy):
        if self.rows and not t > self.rows[-1][0]:
            raise ValueError("diagnostic times must be strictly increasing")
        if self.rows:
            m0, e0 = self.rows[0][2], self.rows[0][4]
            mass_err = abs(mass - m0) / abs(m0) if m0 != 0 else abs(mass - m0)
            energy_err = abs(energy - e0) / abs(e0) if e0 != 0 else abs(energy - e0)
        else:
            mass_err = energy_err = 0.0
        self.rows.append((float(t), float(l2_error), float(mass), float(mass_err),
                          float(energy), float(energy_err)))

    def column(self, name):
        i = CSV_HEADER.index(name)
        return np.array([r[i] for r in self.rows])

    @property
    def final(self):
        return dict(zip(CSV_HEADER, self.rows[-1]))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for row in self.rows:
                w.writerow([repr(x) for x in row])
            if self.aborted is not None:
                w.writerow(["ABORT", self.aborted.step, repr(self.aborted.t), self.aborted.reason, "", ""])


def rk4_step(rhs, t, u, dt):
    k1 = rhs(t, u)
    k2 = rhs(t + 0.5 * dt, u + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, u + 0.5 * dt * k2)
    k4 = rhs(t + dt, u + dt * k3)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_march(rhs, u0, dt, n_steps, diagnostics=None, stride=1, check=None, t0=0.0):
    """March du/dt = rhs(t, u) with classical RK4.

    diagnostics(t, u) -> (l2_error, mass, energy) is recorded at t0 and every
    `stride` steps (and at the end).  `check(u)` may return a reason string to
    abort.  On abort the partial series is returned with `aborted` set.
    """
    series = DiagnosticSeries()
    u = np.array(u0, dtype=float, copy=True)

    def record(t, u):
        with np.errstate(over="ignore", invalid="ignore"):
            series.append(t, *diagnostics(t, u))

    if diagnostics is not None:
        record(t0, u)
    for step in range(1, n_steps + 1):
        t = t0 + step * dt
        u = rk4_step(rhs, t - dt, u, dt)
        reason = None if np.isfinite(u).all() else "non-finite state"
        if reason is None and check is not None:
            reason = check(u)
        if reason is not None:
            series.aborted = NumericalAbort(step, t, reason)
            return u, series
        if diagnostics is not None and (step % stride == 0 or step == n_steps):
            record(t, u)
    return u, series


def distance2_coloring(neighbors):
    """Greedy colouring so that no element shares a colour with any element within two hops."""
    K = len(neighbors)
    nbrs = [set(int(j) for j in neighbors[k] if j >= 0) for k in range(K)]
    colors = -np.ones(K, dtype=int)
    for k in range(K):
        near = set(nbrs[k])
        for j in nbrs[k]:
            near |= nbrs[j]
        near.discard(k)
        used = {colors[j] for j in near if colors[j] >= 0}
        c = 0
        while c in used:
            c += 1
        colors[k] = c
    return colors


def assemble_linear_operator(apply, neighbors, n_nodes, n_fields=1):
    """Sparse matrix of a linear, element-local-plus-face-neighbour operator.

    `apply(u)` maps arrays of shape (K, n_nodes, n_fields) to the same shape;
    the flattened index order is that of `u.ravel()`.  Columns are recovered by
    probing every (node, field) slot in all elements of one colour at once.
    """
    K = len(neighbors)
    colors = distance2_coloring(neighbors)
    stencil = [[k] + [int(j) for j in neighbors[k] if j >= 0] for k in range(K)]
    block = n_nodes * n_fields
    rows, cols, vals = [], [], []
    for c in range(colors.max() + 1):
        members = np.flatnonzero(colors == c)
        for slot in range(block):
            probe = np.zeros((K, block))
            probe[members, slot] = 1.0
            out = apply(probe.reshape(K, n_nodes, n_fields)).reshape(K, block)
            for k in range(K):
                src = [j for j in stencil[k] if colors[j] == c]
                if not src:
                    continue
                nz = np.flatnonzero(out[k])
                rows.append(k * block + nz)
                cols.append(np.full(nz.size, src[0] * block + slot))
                vals.append(out[k, nz])
    n = K * block
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n))
