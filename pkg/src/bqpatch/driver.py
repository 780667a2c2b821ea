"""Run orchestration: execute, re-analyze, probe, and render commands.

The diagnostics pass is a single code path consuming states rebuilt from raw
sample values (spectra recomputed), so an in-run record and a record
recomputed from the stored snapshot see bit-identical inputs and produce
byte-identical CSV rows.
"""

import logging
from pathlib import Path

import numpy as np

from .config import Config, load_config, save_config
from .diagnostics import DiagnosticsRecord, EnergyLedger, StriatedTracker
from .errors import ConfigError, StepFailureError
from .fields import Grid, ScalarField, VectorField2
from .lagrangian import LevelSet, boundary_c1eps_norm, tangency_sines
from .probes import PROBES, inequality_probe, trans_diff_bound_probe
from .runio import (CsvWriter, FIELD_PLANES, fmt, read_manifest, read_snapshot,
                    write_manifest, write_pgm, write_snapshot)
from .scenarios import DiscGeometry, build_disc_scenario, smooth_scenario
from .solver import SimState, StepperConfig, run
from .spectral import velocity_from_vorticity

log = logging.getLogger(__name__)

DIAG_COLUMNS = (
    "config_hash", "t", "energy_eq_residual", "l2_u", "grad_u_l2_sq",
    "theta_l1", "theta_l2", "theta_linf", "v_integral",
    "x_ceps", "div_xw_ceps_m1", "div_xw_ceps_m3", "dx_theta_ceps_m2",
    "dx_u_ceps", "omega_b_lo", "omega_b_hi", "theta_b", "grad_u_b_q",
    "u_q", "w", "z",
)

NORM_ROWS = (
    # quantity_name -> (norms key, s expression, p, r)
    ("x_holder", "x_ceps", lambda e, q: e, "inf", "inf"),
    ("div_xw_holder_m1", "div_xw_ceps_m1", lambda e, q: e - 1, "inf", "inf"),
    ("div_xw_holder_m3", "div_xw_ceps_m3", lambda e, q: e - 3, "inf", "inf"),
    ("dx_theta_holder_m2", "dx_theta_ceps_m2", lambda e, q: e - 2, "inf", "inf"),
    ("dx_u_holder", "dx_u_ceps", lambda e, q: e, "inf", "inf"),
    ("omega_besov_low", "omega_b_lo", lambda e, q: 2 / q - 2, "q", "1"),
    ("omega_besov_high", "omega_b_hi", lambda e, q: 2 / q, "q", "1"),
    ("theta_besov", "theta_b", lambda e, q: 2 / q - 1, "q", "1"),
)

PATCH_COLUMNS = ("config_hash", "t", "area", "det_dev_max",
                 "tangency_sine_max", "boundary_c1eps", "arc_chord_ratio",
                 "spacing_ratio")


def purified_state(state):
    """Rebuild every field from raw sample values with fresh spectral caches.

    This is exactly what reloading a snapshot produces, so diagnostics
    computed in-run and after the fact agree bit for bit.
    """
    g = state.omega.grid
    theta = ScalarField(g, state.theta.values.copy())
    omega = ScalarField(g, state.omega.values.copy())
    u = velocity_from_vorticity(omega)
    X = None
    if state.X is not None:
        X = VectorField2(ScalarField(g, state.X.x_comp.values.copy()),
                         ScalarField(g, state.X.y_comp.values.copy()))
    levelset = None
    if state.levelset is not None:
        levelset = LevelSet(ScalarField(g, state.levelset.f.values.copy()),
                            state.levelset.band_cells)
    return SimState(state.t, theta, omega, u, X, levelset, state.nu)


class DiagnosticsPass:
    """Streaming diagnostics writer fed with purified states.

    ``step`` advances the time integrals and running sups (call at every
    step); ``record`` writes one CSV row using the accumulations plus the
    remaining instantaneous norms.  When record cadence is 1 the whole pass
    is reproducible from stored snapshots alone.
    """

    def __init__(self, cfg, diag_path, norms_path):
        self.cfg = cfg
        self.hash = cfg.hash()
        eps = cfg.get("physics", "eps")
        q = cfg.get("physics", "q")
        self.eps, self.q = eps, q
        grid = Grid(cfg.get("grid", "n"), cfg.get("grid", "length"))
        self.tracker = StriatedTracker(grid, eps, q)
        self.ledger = EnergyLedger(cfg.get("stepper", "mollifier_cells"))
        self.nu = cfg.get("physics", "nu")
        self.diag = CsvWriter(diag_path, DIAG_COLUMNS)
        self.norms_csv = CsvWriter(
            norms_path, ("config_hash", "t", "quantity_name", "s", "p", "r", "value"))
        self._step_cache = None

    def step(self, state):
        """Per-step hook: advance the energy ledger (cheap, exact cadence)."""
        energy = self.ledger.update(state)
        self._step_cache = (state.t, energy)

    def record(self, state):
        if self._step_cache is None or self._step_cache[0] != state.t:
            self.step(state)
        _, (l2u_sq, gsq, _) = self._step_cache
        residual = self.ledger.residual(state, self.nu, l2u_sq)
        norms = self.tracker.evaluate(state)
        rec = DiagnosticsRecord(
            t=state.t,
            energy_eq_residual=residual,
            l2_u=float(np.sqrt(l2u_sq)),
            grad_u_l2_sq=gsq,
            theta_l1=state.theta.lp_norm(1),
            theta_l2=state.theta.lp_norm(2),
            theta_linf=state.theta.lp_norm(np.inf),
            v_integral=self.ledger.v_integral,
            norms=norms,
        )
        rec.validate()
        self.diag.row((self.hash, rec.t, rec.energy_eq_residual, rec.l2_u,
                       rec.grad_u_l2_sq, rec.theta_l1, rec.theta_l2,
                       rec.theta_linf, rec.v_integral,
                       norms["x_ceps"], norms["div_xw_ceps_m1"],
                       norms["div_xw_ceps_m3"], norms["dx_theta_ceps_m2"],
                       norms["dx_u_ceps"], norms["omega_b_lo"],
                       norms["omega_b_hi"], norms["theta_b"],
                       norms["grad_u_b_q"], norms["u_q"], norms["w"],
                       norms["z"]))
        for name, key, s_of, p_tag, r_tag in NORM_ROWS:
            s_val = s_of(self.eps, self.q)
            p_val = "inf" if p_tag == "inf" else fmt(self.q)
            r_val = "inf" if r_tag == "inf" else r_tag
            self.norms_csv.row((self.hash, rec.t, name, fmt(float(s_val)),
                                p_val, r_val, norms[key]))
        return rec

    def close(self):
        self.diag.close()
        self.norms_csv.close()


def geometry_from_config(cfg):
    c = (cfg.get("scenario", "disc_center_x"), cfg.get("scenario", "disc_center_y"))
    return DiscGeometry(center=c, radius=cfg.get("scenario", "disc_radius"),
                        annulus_center=c,
                        annulus_r_inner=cfg.get("scenario", "annulus_r_inner"),
                        annulus_r_outer=cfg.get("scenario", "annulus_r_outer"))


def build_scenario(cfg):
    """Initial (SimState, PatchState-or-None, LevelSet-or-None) from a config."""
    cfg.validate()
    grid = Grid(cfg.get("grid", "n"), cfg.get("grid", "length"))
    name = cfg.get("scenario", "name")
    nu = cfg.get("physics", "nu")
    if name == "disc_patch":
        state, patch, levelset = build_disc_scenario(
            grid, geometry_from_config(cfg),
            m1=cfg.get("physics", "m1"), m2=cfg.get("physics", "m2"), nu=nu,
            n_markers=cfg.get("scenario", "n_markers"))
        return state, patch, levelset
    state = smooth_scenario(grid, nu=nu)
    return state, None, None


def stepper_from_config(cfg):
    return StepperConfig(
        dt=cfg.get("stepper", "dt"),
        cfl_target=cfg.get("stepper", "cfl"),
        scheme=cfg.get("stepper", "scheme"),
        theta_advection=cfg.get("stepper", "theta_advection"),
        x_mode=cfg.get("stepper", "x_mode") if cfg.get("scenario", "name") != "smooth" else "none",
        mollifier_cells=cfg.get("stepper", "mollifier_cells"),
    )


def execute_run(cfg, out_dir):
    """Run a configured simulation, emitting the full artifact set."""
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "snapshots").mkdir(exist_ok=True)
    (out / "contours").mkdir(exist_ok=True)
    save_config(cfg, out / "config.cfg")

    state, patch, _ = build_scenario(cfg)
    stepper = stepper_from_config(cfg)
    record_every = cfg.get("outputs", "record_every")
    snapshot_every = cfg.get("outputs", "snapshot_every")
    if snapshot_every % record_every != 0:
        raise ConfigError("snapshot_every must be a multiple of record_every")
    fields = cfg.field_list()
    if cfg.get("scenario", "name") == "smooth":
        fields = [f for f in fields if f in ("theta", "omega", "u")]
    eps = cfg.get("physics", "eps")

    diag = DiagnosticsPass(cfg, out / "diagnostics.csv", out / "norms.csv")
    markers_csv = CsvWriter(out / "markers.csv",
                            ("t", "i", "x", "y", "tangent_x", "tangent_y"))
    patch_csv = CsvWriter(out / "patch.csv", PATCH_COLUMNS)
    snap_paths = []
    markers_every = cfg.get("outputs", "markers_every") or snapshot_every
    t_end = cfg.get("stepper", "t_end")
    cache = {}

    def on_step(st, pt, k):
        pure = purified_state(st)
        cache["state"], cache["k"] = pure, k
        diag.step(pure)

    def on_record(st, pt, k):
        pure = cache["state"] if cache.get("k") == k else purified_state(st)
        diag.record(pure)
        final = st.t >= t_end - 1e-14
        if pt is not None:
            tan = pt.tangents()
            if k % markers_every == 0 or final:
                for i in range(pt.m):
                    markers_csv.row((st.t, i, pt.markers[i, 0], pt.markers[i, 1],
                                     tan[i, 0], tan[i, 1]))
            bnorm = boundary_c1eps_norm(pt, eps)
            dets = pt.det_jacobians()
            sines = (tangency_sines(pt, pure.X) if pure.X is not None
                     else np.zeros(pt.m))
            patch_csv.row((diag.hash, st.t, pt.area(),
                           float(np.abs(dets - 1.0).max()),
                           float(sines.max()), bnorm["norm"],
                           bnorm["arc_chord_ratio"], pt.spacing_ratio()))
        if k % snapshot_every == 0 or final:
            path = out / "snapshots" / f"snap_{len(snap_paths):05d}.bqp"
            write_snapshot(path, pure, fields)
            snap_paths.append(path)
            if pure.levelset is not None:
                _write_contours(out / "contours" / f"contour_{len(snap_paths)-1:05d}.csv",
                                pure.levelset, st.t)

    write_manifest(out / "manifest.txt", cfg, fields=fields)
    try:
        state, patch, n_steps = run(state, stepper, t_end,
                                    patch=patch, on_record=on_record,
                                    record_every=record_every,
                                    on_step=on_step)
    except StepFailureError as exc:
        fail_path = out / "snapshots" / "last_valid.bqp"
        write_snapshot(fail_path, purified_state(state), fields)
        exc.diagnostics["last_snapshot"] = str(fail_path)
        raise
    finally:
        diag.close()
        markers_csv.close()
        patch_csv.close()

    write_manifest(out / "manifest.txt", cfg, fields=fields,
                   extra={"steps": n_steps, "final_t": fmt(state.t)})
    return state, patch, out


def _write_contours(path, levelset, t):
    polylines = levelset.zero_contour()
    with CsvWriter(path, ("t", "poly_id", "x", "y")) as w:
        for pid, poly in enumerate(polylines):
            for x, y in poly:
                w.row((t, pid, float(x), float(y)))


def analyze_run(run_dir, out_dir=None):
    """Recompute diagnostics.csv and norms.csv from stored snapshots.

    Requires snapshot cadence equal to record cadence.  Output is
    byte-identical to the in-run files for a healthy run directory.
    """
    run_dir = Path(run_dir)
    cfg = load_config(run_dir / "config.cfg")
    manifest = read_manifest(run_dir / "manifest.txt")
    if (cfg.get("outputs", "snapshot_every") != 1
            or cfg.get("outputs", "record_every") != 1):
        raise ConfigError(
            "analyze needs record_every = snapshot_every = 1 (time integrals "
            "accumulate at step cadence)")
    fields = manifest["fields"].split(",")
    out = Path(out_dir) if out_dir else run_dir / "analysis"
    out.mkdir(parents=True, exist_ok=True)

    nu = cfg.get("physics", "nu")
    diag = DiagnosticsPass(cfg, out / "diagnostics.csv", out / "norms.csv")
    snaps = sorted((run_dir / "snapshots").glob("snap_*.bqp"))
    if not snaps:
        raise ConfigError(f"no snapshots found under {run_dir}")
    for snap in snaps:
        data = read_snapshot(snap, fields)
        grid = data["grid"]
        theta = data.get("theta") or ScalarField.zeros(grid)
        omega = data.get("omega") or ScalarField.zeros(grid)
        X = VectorField2(*data["x"]) if "x" in data else None
        levelset = LevelSet(data["levelset"]) if "levelset" in data else None
        state = SimState(data["t"], theta, omega,
                         velocity_from_vorticity(omega), X, levelset, nu)
        diag.step(state)
        diag.record(state)
    diag.close()
    return out


def render_run(run_dir, out_dir=None):
    """Grayscale PGM images of theta and omega per snapshot, marker overlay."""
    run_dir = Path(run_dir)
    cfg = load_config(run_dir / "config.cfg")
    manifest = read_manifest(run_dir / "manifest.txt")
    fields = manifest["fields"].split(",")
    out = Path(out_dir) if out_dir else run_dir / "images"
    out.mkdir(parents=True, exist_ok=True)

    marker_sets = _load_marker_sets(run_dir / "markers.csv")
    written = []
    for snap in sorted((run_dir / "snapshots").glob("snap_*.bqp")):
        data = read_snapshot(snap, fields)
        grid = data["grid"]
        overlay = _nearest_markers(marker_sets, data["t"])
        for name in ("theta", "omega"):
            if name not in data:
                continue
            path = out / f"{name}_{snap.stem.split('_')[1]}.pgm"
            write_pgm(path, data[name].values, overlay_pts=overlay, grid=grid)
            written.append(path)
    return written


def _load_marker_sets(path):
    if not Path(path).exists():
        return []
    sets = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < 4:
                continue
            t = float(parts[0])
            sets.setdefault(t, []).append((float(parts[2]), float(parts[3])))
    return sorted((t, np.array(pts)) for t, pts in sets.items())


def _nearest_markers(marker_sets, t):
    if not marker_sets:
        return None
    times = np.array([m[0] for m in marker_sets])
    idx = int(np.argmin(np.abs(times - t)))
    pts = marker_sets[idx][1]
    return np.vstack([pts, pts[:1]])  # close the loop


# ---------------------------------------------------------------------------
# probe command
# ---------------------------------------------------------------------------

PROBE_IDS = tuple(sorted(PROBES)) + ("transport_smoothing_bound",)


def run_probe(probe_id, out_dir, seed=20240, size=64, base_n=None, cfg=None):
    """Execute one probe and write its report CSV; returns the report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_hash = cfg.hash() if cfg is not None else "none"
    if probe_id == "transport_smoothing_bound":
        report, rows = trans_diff_bound_probe(seed=seed, base_n=base_n or 64)
    else:
        report = inequality_probe(probe_id, seed=seed, size=size,
                                  base_n=base_n or 256)
        rows = None

    path = out / f"probe_{probe_id}.csv"
    with CsvWriter(path, ("config_hash", "probe_id", "row_kind", "index",
                          "base_ratio", "doubled_ratio", "note")) as w:
        for i, (r1, r2) in enumerate(zip(report.ratios, report.ratios_doubled)):
            note = ""
            if rows is not None:
                case = rows[i][0]
                note = (f"s={case.s};p={case.p};r={case.r};rho={case.rho};"
                        f"nu={case.nu};family={case.family};variant={case.variant}")
            w.row((cfg_hash, probe_id, "sample", i, r1, r2, note))
        for i, reason in report.degenerate:
            w.row((cfg_hash, probe_id, "degenerate", i, "nan", "nan", reason))
        pct = report.percentiles()
        w.row((cfg_hash, probe_id, "summary", len(report.ratios),
               report.max_ratio,
               float(np.max(report.ratios_doubled)) if report.ratios_doubled else float("nan"),
               f"growth_factor={fmt(report.growth_factor)};"
               f"p50={fmt(pct[50])};p90={fmt(pct[90])};p99={fmt(pct[99])}"))
    return report, path
