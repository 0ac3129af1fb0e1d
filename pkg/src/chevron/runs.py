"""Run drivers behind the CLI commands: free, zero-stabilized and tracking runs.

Each driver advances the scheme, records diagnostics at every step (the
inequality checks need consecutive pairs), writes rows and snapshots at the
configured strides and returns a :class:`RunResult` whose ``summary`` goes
into the manifest.
"""

from __future__ import annotations

import logging
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import _backend, io
from .control import (
    build_mode_basis,
    check_tracking_conditions,
    continuum_eigenvalue,
    damping_margin,
    discrete_eigenvalues,
    plan_zero_stabilization,
)
from .diagnostics import DiagnosticsRecord, estimate_m0, record, verify_dissipative_bound
from .errors import ChevronError, ConfigError, InvariantBreach
from .linalg import make_solver
from .model import InitialSpec, NoControl, RunConfig, State1D, Tracking, ZeroStabilization, initial_condition
from .stepper import step_free, step_stabilized, step_tracking

__all__ = [
    "RunResult",
    "plateau_stats",
    "run_simulate",
    "run_stabilize",
    "run_track",
    "DECAY_THRESHOLD",
    "MONOTONE_FLOOR",
    "TRACKING_FLOOR",
]

log = logging.getLogger(__name__)

DECAY_THRESHOLD = 1e-6
# below this raw norm the amplitude is at round-off and may stop decreasing
MONOTONE_FLOOR = 1e-13
# tracking errors below TRACKING_FLOOR * initial are round-off noise
TRACKING_FLOOR = 1e-20
LYAPUNOV_TOL = 1e-6


@dataclass
class RunResult:
    final: State1D
    trace: List[DiagnosticsRecord]
    summary: Dict[str, object]
    outputs: List[Path] = field(default_factory=list)
    extra: Dict[str, object] = field(default_factory=dict)


def versions() -> Dict[str, str]:
    import scipy

    from . import __version__

    return {
        "chevron": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "backend": _backend.current(),
    }


def plateau_stats(state: State1D) -> Dict[str, float]:
    """Medians over the middle half of the nodes.

    ``phi_pos`` / ``phi_neg`` are medians over the nodes where ``phi`` has
    that sign (0 when there are none), since the director settles into
    domains of either sign.
    """
    n = state.n
    mid = slice(n // 4, 3 * n // 4 + 1)
    a = np.abs(state.a[mid])
    phi = state.phi[mid]
    pos, neg = phi[phi > 0], phi[phi < 0]
    return {
        "median_abs_a": float(np.median(a)),
        "median_abs_phi": float(np.median(np.abs(phi))),
        "median_phi_pos": float(np.median(pos)) if pos.size else 0.0,
        "median_phi_neg": float(np.median(neg)) if neg.size else 0.0,
        "sign_changes_phi": int(np.count_nonzero(np.diff(np.sign(phi[phi != 0])))),
    }


class _Recorder:
    """Keeps the trace, writes strided rows and snapshots, tallies checks."""

    def __init__(self, cfg: RunConfig, out_dir: Optional[Path], extra_columns=()):
        self.cfg = cfg
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.extra_columns = list(extra_columns)
        self.trace: List[DiagnosticsRecord] = []
        self.outputs: List[Path] = []
        self.violations = 0
        self.lyapunov_increases = 0
        self.iterations = [0, 0, 0]
        self.max_iterations = 0
        self._writer = None
        self._last_written = -1
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            path = self.out_dir / "diagnostics.csv"
            self._writer = io.DiagnosticsWriter(path, DiagnosticsRecord.columns() + self.extra_columns)
            self.outputs.append(path)

    def add(self, state, rec, extra=None, outcome=None):
        if self.trace:
            prev = self.trace[-1].lyapunov
            if rec.lyapunov > prev + LYAPUNOV_TOL * (1 + abs(prev)):
                self.lyapunov_increases += 1
        self.trace.append(rec)
        self.violations += rec.violations
        if outcome is not None:
            for i, it in enumerate(outcome.solver_iterations):
                self.iterations[i] += it
            self.max_iterations = max(self.max_iterations, *outcome.solver_iterations)
        step = rec.step
        if self._writer is not None and step % self.cfg.output.diagnostics_stride == 0:
            self._write(rec, extra)
        stride = self.cfg.output.snapshot_stride
        if self.out_dir is not None and (step == 0 or (stride and step % stride == 0)):
            self.snapshot(state)
        self._pending = (state, rec, extra)

    def _write(self, rec, extra):
        row = rec.as_dict()
        row.update(extra or {})
        self._writer.write(row)
        self._last_written = rec.step

    def snapshot(self, state):
        path = self.out_dir / io.snapshot_name(state.step)
        if path not in self.outputs:
            io.write_snapshot(path, state, self.cfg.grid.dx)
            self.outputs.append(path)

    def close(self):
        """Make sure the last step has a row and a snapshot, then close."""
        if self.out_dir is None:
            return
        state, rec, extra = self._pending
        if self._last_written != rec.step:
            self._write(rec, extra)
        self.snapshot(state)
        self._writer.close()

    def common_summary(self):
        return {
            "steps_run": self.trace[-1].step,
            "final_time": self.trace[-1].time,
            "inequality_violations": self.violations,
            "lyapunov_increases": self.lyapunov_increases,
            "solver_iterations": {"a_re": self.iterations[0], "a_im": self.iterations[1], "phi": self.iterations[2]},
            "max_solver_iterations": self.max_iterations,
        }


def _finish(recorder, cfg, out_dir, summary, manifest):
    recorder.close()
    if out_dir is not None and manifest is not None:
        payload = dict(manifest)
        payload["summary"] = summary
        payload["versions"] = versions()
        path = Path(out_dir) / "manifest.json"
        io.write_manifest(path, payload, recorder.outputs)


def _guarded(recorder, cfg, out_dir, manifest, body):
    """Run ``body``; on failure flush partial outputs and a failure manifest."""
    try:
        return body()
    except ChevronError as exc:
        if recorder.trace:
            summary = recorder.common_summary()
            summary["status"] = "failed"
            summary["error"] = str(exc)
            _finish(recorder, cfg, out_dir, summary, manifest)
        raise


def run_simulate(
    cfg: RunConfig,
    out_dir: Optional[Path] = None,
    manifest: Optional[dict] = None,
    state0: Optional[State1D] = None,
) -> RunResult:
    """Free evolution for ``cfg.steps`` steps."""
    if not isinstance(cfg.control, NoControl):
        raise ConfigError(f"simulate needs control kind 'none', got {cfg.control.name!r}")
    params, grid = cfg.params, cfg.grid
    solver = make_solver(cfg.solver)
    state = initial_condition(cfg.initial, grid) if state0 is None else state0
    rec = _Recorder(cfg, out_dir)
    rec.add(state, record(state, None, params, grid))

    def body():
        nonlocal state
        for _ in range(cfg.steps):
            out = step_free(state, params, grid, solver)
            rec.add(out.state, record(out.state, state, params, grid), outcome=out)
            state = out.state
        summary = rec.common_summary()
        summary.update(status="ok", plateau=plateau_stats(state))
        report = verify_dissipative_bound(rec.trace, params, grid)
        summary["dissipative_bound"] = {"alpha": report.alpha, "label": report.label, "max_ratio": report.max_ratio}
        summary["m0_estimate"] = estimate_m0(rec.trace)
        _finish(rec, cfg, out_dir, summary, manifest)
        return RunResult(state, rec.trace, summary, rec.outputs)

    return _guarded(rec, cfg, out_dir, manifest, body)


def run_stabilize(
    cfg: RunConfig, out_dir: Optional[Path] = None, manifest: Optional[dict] = None
) -> RunResult:
    """Zero-state stabilization of the amplitude.

    With ``auto`` the gain and mode count come from
    :func:`plan_zero_stabilization`. Whenever the mode set damps every mode
    (positive damping margin) a step that fails to decrease ``||A||`` above
    round-off raises :class:`InvariantBreach`; otherwise the run is only
    reported as not decaying.
    """
    control = cfg.control
    if not isinstance(control, ZeroStabilization):
        raise ConfigError(f"stabilize needs control kind 'zero_stabilization', got {control.name!r}")
    params, grid = cfg.params, cfg.grid
    solver = make_solver(cfg.solver)
    state = initial_condition(cfg.initial, grid)
    plan = None
    if control.auto:
        plan = plan_zero_stabilization(state, grid, control.epsilon)
        if plan.clamped:
            log.warning("mode count clamped to n-1=%d (wanted %d)", plan.k_modes, max(plan.formula_k_modes, plan.coverage_k_modes))
        mu, k_modes = plan.mu, plan.k_modes
    else:
        mu, k_modes = control.mu, control.k_modes
    basis = build_mode_basis(grid, k_modes, mu)
    margin = damping_margin(mu, k_modes, discrete_eigenvalues(grid))
    rec = _Recorder(cfg, out_dir)
    rec.add(state, record(state, None, params, grid))
    norms = [rec.trace[0].l2_a_raw]

    def body():
        nonlocal state
        first_below = None
        monotone = True
        for _ in range(cfg.steps):
            out = step_stabilized(state, params, grid, basis, solver)
            r = record(out.state, state, params, grid, out.control_energy, out.feedback_a)
            rec.add(out.state, r, outcome=out)
            old, new = norms[-1], r.l2_a_raw
            norms.append(new)
            if old >= MONOTONE_FLOOR and not new < old:
                monotone = False
                if margin > 0:
                    raise InvariantBreach(
                        f"step {state.step}: ||A|| did not decrease ({old:.17g} -> {new:.17g}) "
                        f"although every mode is damped (margin {margin:.3g})"
                    )
            state = out.state
            if first_below is None and r.l2_a_raw < DECAY_THRESHOLD and r.l2_phi_raw < DECAY_THRESHOLD:
                first_below = r.step
            if cfg.stop_below > 0 and r.l2_a_raw < cfg.stop_below and r.l2_phi_raw < cfg.stop_below:
                break
        summary = rec.common_summary()
        summary.update(
            status="ok",
            mu=mu,
            k_modes=k_modes,
            damping_margin=margin,
            monotone_a=monotone,
            decayed=first_below is not None,
            first_step_below=first_below,
            final_l2_a_raw=rec.trace[-1].l2_a_raw,
            final_l2_phi_raw=rec.trace[-1].l2_phi_raw,
            max_l2_a_raw=max(norms),
        )
        if plan is not None:
            summary["plan"] = {
                "initial_norm2": plan.initial_norm2,
                "formula_k_modes": plan.formula_k_modes,
                "coverage_k_modes": plan.coverage_k_modes,
                "clamped": plan.clamped,
                "satisfied": plan.satisfied,
            }
        _finish(rec, cfg, out_dir, summary, manifest)
        return RunResult(state, rec.trace, summary, rec.outputs, {"l2_a_raw": np.array(norms)})

    return _guarded(rec, cfg, out_dir, manifest, body)


def _rebase(state: State1D) -> State1D:
    return State1D(state.a, state.phi, time=0.0, step=0)


def fit_decay_slope(times, errors, floor) -> float:
    """Least-squares slope of ``log(error)`` against time, using only points
    above ``floor``; ``nan`` with fewer than two such points."""
    t = np.asarray(times, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    keep = e > floor
    if np.count_nonzero(keep) < 2:
        return float("nan")
    return float(np.polyfit(t[keep], np.log(e[keep]), 1)[0])


def monotone_after(errors, start: int, floor: float) -> bool:
    """``errors`` non-increasing from index ``start`` on, up to ``floor``."""
    e = np.asarray(errors, dtype=np.float64)[start:]
    return bool(np.all(e[1:] <= e[:-1] + floor))


def run_track(
    cfg: RunConfig,
    reference: InitialSpec,
    spinup: int = 0,
    m0_steps: int = 500,
    out_dir: Optional[Path] = None,
    manifest: Optional[dict] = None,
    reference_state: Optional[State1D] = None,
) -> RunResult:
    """Advance a free reference run and a tracking-controlled run in lockstep.

    The reference starts from ``reference`` (or ``reference_state``) after
    ``spinup`` free steps. With ``auto`` gains, ``M0`` is the largest squared
    gradient norm over ``m0_steps`` further reference steps and the gains are
    the minimal ones passing the tracking conditions (mode counts clamped to
    ``n - 1``). Failing conditions are reported, not fatal.
    """
    control = cfg.control
    if not isinstance(control, Tracking):
        raise ConfigError(f"track needs control kind 'tracking', got {control.name!r}")
    params, grid = cfg.params, cfg.grid
    solver = make_solver(cfg.solver)
    ref = initial_condition(reference, grid) if reference_state is None else reference_state
    ref.check_grid(grid)
    for _ in range(spinup):
        ref = step_free(ref, params, grid, solver).state
    ref = _rebase(ref)
    ctrl = initial_condition(cfg.initial, grid)

    m = grid.n - 1
    if control.auto:
        probe = ref
        trace = [record(probe, None, params, grid)]
        for _ in range(m0_steps):
            probe = step_free(probe, params, grid, solver).state
            trace.append(record(probe, None, params, grid))
        m0 = estimate_m0(trace)
        needs = check_tracking_conditions(m0, params, 0.0, 0.0, 0, 0)
        mu1, mu2 = needs.mu1_min, needs.mu2_min
        n1, n2 = min(needs.n1_min, m), min(needs.n2_min, m)
    else:
        m0 = None
        mu1, mu2, n1, n2 = control.mu1, control.mu2, control.n1, control.n2
    report = check_tracking_conditions(m0, params, mu1, mu2, n1, n2) if m0 is not None else None
    if report is not None and not report.passed:
        log.warning("tracking conditions unmet: %s", "; ".join(report.lines()))

    tau, dx = params.tau, grid.dx

    def errors(c, r):
        ea = float(dx * np.sum(np.abs(c.a - r.a) ** 2))
        ep = float(dx * np.sum((c.phi - r.phi) ** 2))
        return {"err_a": math.sqrt(ea), "err_phi": math.sqrt(ep), "tracking_error": tau * ea + ep}

    rec = _Recorder(cfg, out_dir, extra_columns=["err_a", "err_phi", "tracking_error"])
    first = errors(ctrl, ref)
    rec.add(ctrl, record(ctrl, None, params, grid), first)
    errs = [first["tracking_error"]]

    def body():
        nonlocal ctrl, ref
        for _ in range(cfg.steps):
            ref_next = step_free(ref, params, grid, solver).state
            out = step_tracking(ctrl, ref, params, grid, mu1, mu2, n1, n2, solver, reference_next=ref_next)
            r = record(out.state, ctrl, params, grid, out.control_energy, out.feedback_a, out.feedback_phi)
            e = errors(out.state, ref_next)
            rec.add(out.state, r, e, outcome=out)
            errs.append(e["tracking_error"])
            ctrl, ref = out.state, ref_next
        e = np.array(errs)
        t = np.arange(e.shape[0]) * grid.dt
        floor = TRACKING_FLOOR * e[0]
        transient = max(1, e.shape[0] // 10)
        lam1 = float(continuum_eigenvalue(1, params.length))
        summary = rec.common_summary()
        summary.update(
            status="ok",
            conditions="pass" if report is not None and report.passed else (
                "conditions unmet" if report is not None else "not checked (fixed gains)"),
            m0=m0,
            gains={"mu1": mu1, "mu2": mu2, "n1": n1, "n2": n2},
            initial_error=float(e[0]),
            final_error=float(e[-1]),
            error_ratio=float(e[-1] / e[0]) if e[0] > 0 else 0.0,
            decay_slope=fit_decay_slope(t, e, floor),
            reference_rate=lam1 * min(1.0 / params.tau, params.d1),
            monotone_after_transient=monotone_after(e, transient, floor),
            converged=bool(e[-1] <= 1e-10 * e[0]) if e[0] > 0 else bool(e[-1] <= 1e-12),
        )
        if report is not None:
            summary["condition_lines"] = report.lines()
        _finish(rec, cfg, out_dir, summary, manifest)
        return RunResult(ctrl, rec.trace, summary, rec.outputs, {"tracking_error": e, "reference": ref})

    return _guarded(rec, cfg, out_dir, manifest, body)

