"""Coupled Burgers' benchmark: record, reverse, verify, and report.

Solves the coupled Burgers' equations

    u_t + u u_x + v u_y = (1/R) (u_xx + u_yy)
    v_t + u v_x + v v_y = (1/R) (v_xx + v_yy)

on the unit square with an explicit scheme: first-order donor-cell upwinding
for the convective terms (direction picked by the sign of the local
velocity) and second-order central differences for the diffusion.  Initial
and boundary values come from the exact solution

    u(x, y, t) = (x + y - 2 x t) / (1 - 2 t^2)
    v(x, y, t) = (x - y - 2 y t) / (1 - 2 t^2)

The interior initial values are registered as inputs, the discrete 2-norm of
the final solution is the output.  The same scheme is implemented twice: once
over ActiveReal (recorded) and once over plain numpy arrays, which serves as
the passive re-run for finite-difference gradient checks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .active import ActiveReal, register_input, register_output, sqrt
from .index_managers import MANAGER_KINDS, make_manager
from .stats import TapeReport, measure_tape
from .tape import JacobianTape, TapeOptions

# Tolerances of the built-in correctness checks.
GRAD_RTOL = 1e-5
EQUIV_RTOL = 1e-12


@dataclass
class BurgersConfig:
    grid_n: int = 61
    iterations: int = 32
    reynolds: float = 100.0
    dt: float | None = None
    manager_kind: str = "all"
    vector_dim: int = 1
    zero_adjoint_on_reverse: bool = True
    copy_heavy: bool = False
    fd_check: bool = True
    fd_epsilon: float = 1e-6
    fd_samples: int = 12
    output_format: str = "table"
    block_size: int = 256
    repetitions: int = 10
    warmup: bool = True

    def __post_init__(self):
        if self.grid_n < 3:
            raise ValueError("grid_n must be >= 3")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    @property
    def dx(self) -> float:
        return 1.0 / (self.grid_n - 1)

    @property
    def time_step_size(self) -> float:
        if self.dt is not None:
            return self.dt
        # Conservative bound covering both the diffusive and the convective
        # stability limits of the explicit scheme.
        dx = self.dx
        return 0.25 * min(dx * dx * self.reynolds, dx) / 2.0

    def manager_kinds(self) -> tuple[str, ...]:
        if self.manager_kind == "all":
            return MANAGER_KINDS
        if self.manager_kind not in MANAGER_KINDS:
            raise ValueError(f"unknown manager kind: {self.manager_kind!r}")
        return (self.manager_kind,)


def exact_solution(x: float, y: float, t: float) -> tuple[float, float]:
    """Closed-form solution used for initial and boundary data."""
    denom = 1.0 - 2.0 * t * t
    if abs(denom) < 1e-12:
        raise ValueError(f"exact solution is singular at t={t}")
    return (x + y - 2.0 * x * t) / denom, (x - y - 2.0 * y * t) / denom


def initial_grid(cfg: BurgersConfig) -> tuple[np.ndarray, np.ndarray]:
    """Exact solution sampled on the full grid at t=0."""
    n = cfg.grid_n
    dx = cfg.dx
    u0 = np.empty((n, n))
    v0 = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            u0[i, j], v0[i, j] = exact_solution(i * dx, j * dx, 0.0)
    return u0, v0


@dataclass
class SolutionField:
    """Velocity fields as grid_n x grid_n tables of ActiveReal."""

    u: list
    v: list


def _interior_exprs(fld: SolutionField, i: int, j: int, cfg: BurgersConfig):
    dx = cfg.dx
    dx2 = dx * dx
    dt = cfg.time_step_size
    nu_dt = dt / cfg.reynolds
    u, v = fld.u, fld.v
    uc, vc = u[i][j], v[i][j]
    uw, ue, us, un = u[i - 1][j], u[i + 1][j], u[i][j - 1], u[i][j + 1]
    vw, ve, vs, vn = v[i - 1][j], v[i + 1][j], v[i][j - 1], v[i][j + 1]
    # Donor-cell upwinding: x-derivatives follow the sign of u, y-derivatives
    # the sign of v, at the point itself.
    if uc.value > 0.0:
        dudx = (uc - uw) / dx
        dvdx = (vc - vw) / dx
    else:
        dudx = (ue - uc) / dx
        dvdx = (ve - vc) / dx
    if vc.value > 0.0:
        dudy = (uc - us) / dx
        dvdy = (vc - vs) / dx
    else:
        dudy = (un - uc) / dx
        dvdy = (vn - vc) / dx
    new_u = uc - dt * (uc * dudx + vc * dudy) + nu_dt * (
        (ue - 2.0 * uc + uw) / dx2 + (un - 2.0 * uc + us) / dx2
    )
    new_v = vc - dt * (uc * dvdx + vc * dvdy) + nu_dt * (
        (ve - 2.0 * vc + vw) / dx2 + (vn - 2.0 * vc + vs) / dx2
    )
    return new_u, new_v


def time_step(fld: SolutionField, cfg: BurgersConfig, t_new: float, boundary=exact_solution) -> SolutionField:
    """One explicit step; returns a new field with boundaries re-pinned."""
    n = cfg.grid_n
    dx = cfg.dx
    new_u = [[None] * n for _ in range(n)]
    new_v = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if 0 < i < n - 1 and 0 < j < n - 1:
                eu, ev = _interior_exprs(fld, i, j, cfg)
                new_u[i][j] = ActiveReal(eu)
                new_v[i][j] = ActiveReal(ev)
            else:
                bu, bv = boundary(i * dx, j * dx, t_new)
                new_u[i][j] = ActiveReal(bu)
                new_v[i][j] = ActiveReal(bv)
    return SolutionField(new_u, new_v)


def _time_step_into(fld: SolutionField, out: SolutionField, cfg: BurgersConfig, t_new: float) -> None:
    # Overwrite variant used by the copy-heavy mode: the output field's
    # variables are reassigned in place.
    n = cfg.grid_n
    dx = cfg.dx
    for i in range(n):
        for j in range(n):
            if 0 < i < n - 1 and 0 < j < n - 1:
                eu, ev = _interior_exprs(fld, i, j, cfg)
                out.u[i][j].assign(eu)
                out.v[i][j].assign(ev)
            else:
                bu, bv = exact_solution(i * dx, j * dx, t_new)
                out.u[i][j].assign(bu)
                out.v[i][j].assign(bv)


def objective(fld: SolutionField, cfg: BurgersConfig) -> ActiveReal:
    """Unweighted discrete 2-norm over the interior of both fields."""
    n = cfg.grid_n
    acc = ActiveReal(0.0)
    for table in (fld.u, fld.v):
        for i in range(1, n - 1):
            row = table[i]
            for j in range(1, n - 1):
                cell = row[j]
                acc.assign(acc + cell * cell)
    return ActiveReal(sqrt(acc))


# -- passive reference path (numpy) -------------------------------------


def _passive_step(u, v, cfg: BurgersConfig, t_new: float, boundary=exact_solution):
    n = cfg.grid_n
    dx = cfg.dx
    dx2 = dx * dx
    dt = cfg.time_step_size
    nu_dt = dt / cfg.reynolds
    uc = u[1:-1, 1:-1]
    vc = v[1:-1, 1:-1]
    uw, ue = u[:-2, 1:-1], u[2:, 1:-1]
    us, un = u[1:-1, :-2], u[1:-1, 2:]
    vw, ve = v[:-2, 1:-1], v[2:, 1:-1]
    vs, vn = v[1:-1, :-2], v[1:-1, 2:]
    xup = uc > 0.0
    yup = vc > 0.0
    dudx = np.where(xup, (uc - uw) / dx, (ue - uc) / dx)
    dvdx = np.where(xup, (vc - vw) / dx, (ve - vc) / dx)
    dudy = np.where(yup, (uc - us) / dx, (un - uc) / dx)
    dvdy = np.where(yup, (vc - vs) / dx, (vn - vc) / dx)
    new_u = np.empty_like(u)
    new_v = np.empty_like(v)
    new_u[1:-1, 1:-1] = uc - dt * (uc * dudx + vc * dudy) + nu_dt * (
        (ue - 2.0 * uc + uw) / dx2 + (un - 2.0 * uc + us) / dx2
    )
    new_v[1:-1, 1:-1] = vc - dt * (uc * dvdx + vc * dvdy) + nu_dt * (
        (ve - 2.0 * vc + vw) / dx2 + (vn - 2.0 * vc + vs) / dx2
    )
    for k in range(n):
        new_u[0, k], new_v[0, k] = boundary(0.0, k * dx, t_new)
        new_u[n - 1, k], new_v[n - 1, k] = boundary((n - 1) * dx, k * dx, t_new)
        new_u[k, 0], new_v[k, 0] = boundary(k * dx, 0.0, t_new)
        new_u[k, n - 1], new_v[k, n - 1] = boundary(k * dx, (n - 1) * dx, t_new)
    return new_u, new_v


def solve_passive(cfg: BurgersConfig, u0: np.ndarray, v0: np.ndarray, boundary=exact_solution) -> float:
    """Plain-float solve returning the objective; the FD oracle path."""
    u, v = u0, v0
    dt = cfg.time_step_size
    for k in range(cfg.iterations):
        u, v = _passive_step(u, v, cfg, (k + 1) * dt, boundary)
    ui = u[1:-1, 1:-1]
    vi = v[1:-1, 1:-1]
    return math.sqrt(float(np.sum(ui * ui) + np.sum(vi * vi)))


# -- recording and benchmark harness -------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class BenchmarkResult:
    reports: list[TapeReport] = field(default_factory=list)
    gradients: dict = field(default_factory=dict)
    objective_values: dict = field(default_factory=dict)
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)


def _record_program(tape: JacobianTape, cfg: BurgersConfig, u0, v0):
    """Record one full solve; returns (input tables, output variable)."""
    n = cfg.grid_n
    dt = cfg.time_step_size
    tape.reset_tape()
    tape.start_recording()
    inputs_u = [[register_input(tape, ActiveReal(u0[i, j])) for j in range(1, n - 1)] for i in range(1, n - 1)]
    inputs_v = [[register_input(tape, ActiveReal(v0[i, j])) for j in range(1, n - 1)] for i in range(1, n - 1)]

    def build_field(copies: bool) -> SolutionField:
        u = [[None] * n for _ in range(n)]
        v = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                if 0 < i < n - 1 and 0 < j < n - 1:
                    iu = inputs_u[i - 1][j - 1]
                    iv = inputs_v[i - 1][j - 1]
                    u[i][j] = ActiveReal(iu) if copies else iu
                    v[i][j] = ActiveReal(iv) if copies else iv
                else:
                    u[i][j] = ActiveReal(u0[i, j])
                    v[i][j] = ActiveReal(v0[i, j])
        return SolutionField(u, v)

    if cfg.copy_heavy:
        fld = build_field(copies=True)
        scratch = SolutionField(
            [[ActiveReal(0.0) for _ in range(n)] for _ in range(n)],
            [[ActiveReal(0.0) for _ in range(n)] for _ in range(n)],
        )
        for k in range(cfg.iterations):
            _time_step_into(fld, scratch, cfg, (k + 1) * dt)
            # Swap through explicit element copies instead of exchanging the
            # field references.  Boundary cells are passive, so only the
            # interior produces copy statements.
            for i in range(n):
                fu, fv = fld.u[i], fld.v[i]
                su, sv = scratch.u[i], scratch.v[i]
                for j in range(n):
                    fu[j].assign(su[j])
                    fv[j].assign(sv[j])
    else:
        fld = build_field(copies=False)
        for k in range(cfg.iterations):
            fld = time_step(fld, cfg, (k + 1) * dt)

    out = objective(fld, cfg)
    register_output(tape, out)
    tape.stop_recording()
    return inputs_u, inputs_v, out


def _extract_gradient(tape: JacobianTape, inputs_u, inputs_v, lane: int = 0) -> np.ndarray:
    m = len(inputs_u)
    grad = np.empty((2, m, m))
    for i in range(m):
        for j in range(m):
            grad[0, i, j] = tape.get_adjoint(inputs_u[i][j].identifier, lane)
            grad[1, i, j] = tape.get_adjoint(inputs_v[i][j].identifier, lane)
    return grad


def _fd_sample_points(cfg: BurgersConfig):
    m = cfg.grid_n - 2
    cells = [(f, i, j) for f in (0, 1) for i in range(m) for j in range(m)]
    k = max(1, min(cfg.fd_samples, len(cells)))
    if k == len(cells):
        return cells
    step = (len(cells) - 1) / (k - 1) if k > 1 else 1.0
    picked = sorted({int(round(t * step)) for t in range(k)})
    return [cells[p] for p in picked]


def _run_one_manager(kind: str, cfg: BurgersConfig, u0, v0, result: BenchmarkResult) -> None:
    manager = make_manager(kind, cfg.block_size)
    options = TapeOptions(zero_adjoint_on_reverse=cfg.zero_adjoint_on_reverse)
    tape = JacobianTape(manager, vector_dim=cfg.vector_dim, options=options)

    runs = cfg.repetitions + (1 if cfg.warmup else 0)
    record_times: list[float] = []
    reverse_times: list[float] = []
    counts = None
    inputs_u = inputs_v = out = None
    for rep in range(runs):
        # Drop the previous recording's variables first, as scope exit would,
        # so their identifiers are reclaimed before the next recording.
        inputs_u = inputs_v = out = None
        t0 = time.perf_counter()
        inputs_u, inputs_v, out = _record_program(tape, cfg, u0, v0)
        t1 = time.perf_counter()
        if not cfg.zero_adjoint_on_reverse:
            tape.clear_adjoints()
        for lane in range(cfg.vector_dim):
            tape.set_adjoint(out.identifier, lane, 1.0)
        t2 = time.perf_counter()
        tape.evaluate_reverse()
        t3 = time.perf_counter()
        if not (cfg.warmup and rep == 0):
            record_times.append(t1 - t0)
            reverse_times.append(t3 - t2)
        snapshot = (tape.statements_recorded, tape.arguments_recorded)
        if counts is None:
            counts = snapshot
        elif counts != snapshot:
            result.checks.append(
                CheckResult(
                    f"{kind}: deterministic recording",
                    False,
                    f"statement/argument counts changed between runs: {counts} vs {snapshot}",
                )
            )

    grad = _extract_gradient(tape, inputs_u, inputs_v)
    if cfg.vector_dim > 1:
        lanes_equal = all(
            np.array_equal(grad, _extract_gradient(tape, inputs_u, inputs_v, lane))
            for lane in range(1, cfg.vector_dim)
        )
        result.checks.append(
            CheckResult(f"{kind}: adjoint lanes agree", lanes_equal)
        )
    result.gradients[kind] = grad
    result.objective_values[kind] = out.value

    c = tape.counters
    expected = {
        "linear": c.s_a + c.s_i,
        "reuse": c.s_a + c.s_c,
        "usecount": c.s_a + c.s_out_unique,
    }[kind]
    result.checks.append(
        CheckResult(
            f"{kind}: statement-count law",
            tape.statements_recorded == expected,
            f"recorded {tape.statements_recorded}, expected {expected} "
            f"(s_a={c.s_a} s_c={c.s_c} s_i={c.s_i} s_u={c.s_out_unique})",
        )
    )

    rec = sum(record_times) / len(record_times) if record_times else 0.0
    rev = sum(reverse_times) / len(reverse_times) if reverse_times else 0.0
    result.reports.append(measure_tape(tape, rec, rev))

    if cfg.fd_check:
        _fd_check(kind, cfg, u0, v0, grad, result)


def _fd_check(kind: str, cfg: BurgersConfig, u0, v0, grad, result: BenchmarkResult) -> None:
    eps = cfg.fd_epsilon
    worst = 0.0
    worst_at = None
    for f, i, j in _fd_sample_points(cfg):
        base = u0 if f == 0 else v0
        keep = base[i + 1, j + 1]
        base[i + 1, j + 1] = keep + eps
        plus = solve_passive(cfg, u0, v0)
        base[i + 1, j + 1] = keep - eps
        minus = solve_passive(cfg, u0, v0)
        base[i + 1, j + 1] = keep
        fd = (plus - minus) / (2.0 * eps)
        ad = float(grad[f, i, j])
        rel = abs(ad - fd) / max(abs(fd), abs(ad), 1e-10)
        if rel > worst:
            worst = rel
            worst_at = (f, i, j, ad, fd)
    result.checks.append(
        CheckResult(
            f"{kind}: gradient vs central differences",
            worst <= GRAD_RTOL,
            f"worst relative error {worst:.3e} at {worst_at}",
        )
    )


def run_benchmark(cfg: BurgersConfig) -> BenchmarkResult:
    """Run the benchmark for the configured manager(s) and verify it."""
    result = BenchmarkResult()
    u0, v0 = initial_grid(cfg)
    kinds = cfg.manager_kinds()
    for kind in kinds:
        _run_one_manager(kind, cfg, u0, v0, result)

    if len(kinds) > 1:
        base_kind = kinds[0]
        base = result.gradients[base_kind]
        for kind in kinds[1:]:
            other = result.gradients[kind]
            denom = np.maximum(np.maximum(np.abs(base), np.abs(other)), 1e-6)
            worst = float(np.max(np.abs(base - other) / denom))
            result.checks.append(
                CheckResult(
                    f"{base_kind}/{kind}: gradients agree",
                    worst <= EQUIV_RTOL,
                    f"worst relative deviation {worst:.3e}",
                )
            )
        by_kind = {r.manager: r for r in result.reports}
        if "reuse" in by_kind and "usecount" in by_kind:
            ok = by_kind["usecount"].adjoint_entries <= by_kind["reuse"].adjoint_entries
            result.checks.append(CheckResult("adjoint entries: usecount <= reuse", ok))
        if "linear" in by_kind and "reuse" in by_kind:
            ok = by_kind["reuse"].adjoint_entries <= by_kind["linear"].adjoint_entries
            result.checks.append(CheckResult("adjoint entries: reuse <= linear", ok))
    return result
