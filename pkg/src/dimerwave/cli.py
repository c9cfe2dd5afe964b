"""Command-line front end: ``dimerwave <subcommand> --config PATH``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import homogenize as hz
from . import layerpot as lp
from . import resonance as rs
from . import scatter as sc
from .layerpot import UNIT_BALL_RADIUS, SolverError

log = logging.getLogger("dimerwave")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

DEFAULTS = {
    "geometry": {"r0": "unit", "d0": "", "gap_ratio": "5", "s": "1", "d": "1, 0, 0", "z": "0, 0, 0"},
    "medium": {"rho": "1", "kappa": "1", "rho_b": "", "kappa_b": "", "delta": "1e-4", "v": "1", "v_b": "1"},
    "sweep": {"omega_min": "4.0", "omega_max": "6.0", "steps": "200"},
    "resonance": {"deltas": "1e-5, 1e-4, 1e-3", "guess1": "", "guess2": "", "calibrate_omega1": ""},
    "homogenize": {"Lambda": "8000", "box_side": "20", "B_convention": "literal"},
    "ensemble": {"box_lo": "0, 0, 0", "box_hi": "1, 1, 1", "N": "125, 512, 1000", "Lambda": "1", "mu": "1",
                 "eta": "", "seed": "", "jitter": "0.5"},
    "foldy": {"omega": "2.0", "direction": "0.3, 0.2, 1.0", "ls_grid": "32", "probes": "300",
              "probe_seed": "7"},
    "scatter": {"s_values": "0.1, 0.05, 0.025", "angles": "16", "mu": "1", "omega": "2.8",
                "direction": "0.6, 0, 0.8", "ring_factor": "50", "orientation": "1, 1, 0.3"},
    "numerics": {"nmax": "8", "nmax_static": "12"},
    "output": {"prefix": ""},
}


class RunConfig:
    """Resolved configuration with typed accessors and key-naming errors."""

    def __init__(self, parser: configparser.ConfigParser, path: str):
        self.parser = parser
        self.path = path

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        p = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        p.optionxform = str
        p.read_dict(DEFAULTS)
        user = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        user.optionxform = str
        try:
            with open(path) as f:
                user.read_file(f)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        for sec in user.sections():
            if sec not in DEFAULTS:
                raise ConfigError(f"unknown section [{sec}]")
            for key, val in user.items(sec):
                if key not in DEFAULTS[sec]:
                    raise ConfigError(f"unknown key '{key}' in [{sec}]")
                p.set(sec, key, val)
        return cls(p, path)

    def raw(self, sec, key) -> str:
        return self.parser.get(sec, key).strip()

    def has(self, sec, key) -> bool:
        return self.raw(sec, key) != ""

    def float(self, sec, key, positive=False, nonneg=False) -> float:
        txt = self.raw(sec, key)
        try:
            val = float(txt)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {key} = {txt!r} is not a number") from exc
        if not math.isfinite(val):
            raise ConfigError(f"[{sec}] {key} must be finite")
        if positive and not val > 0:
            raise ConfigError(f"[{sec}] {key} must be positive, got {val}")
        if nonneg and val < 0:
            raise ConfigError(f"[{sec}] {key} must be nonnegative, got {val}")
        return val

    def int(self, sec, key, minimum=None) -> int:
        txt = self.raw(sec, key)
        try:
            val = int(txt)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {key} = {txt!r} is not an integer") from exc
        if minimum is not None and val < minimum:
            raise ConfigError(f"[{sec}] {key} must be at least {minimum}, got {val}")
        return val

    def floats(self, sec, key, count=None, positive=False) -> list[float]:
        txt = self.raw(sec, key)
        try:
            vals = [float(t) for t in txt.replace(";", ",").split(",") if t.strip()]
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {key} = {txt!r} is not a list of numbers") from exc
        if count is not None and len(vals) != count:
            raise ConfigError(f"[{sec}] {key} needs {count} values, got {len(vals)}")
        if not vals:
            raise ConfigError(f"[{sec}] {key} is empty")
        if positive and any(not v > 0 for v in vals):
            raise ConfigError(f"[{sec}] {key} entries must be positive")
        return vals

    def complex(self, sec, key) -> complex | None:
        txt = self.raw(sec, key)
        if not txt:
            return None
        try:
            return complex(txt.replace(" ", ""))
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {key} = {txt!r} is not a complex number") from exc

    def lines(self) -> list[str]:
        out = []
        for sec in self.parser.sections():
            out.append(f"[{sec}]")
            for key, val in self.parser.items(sec):
                out.append(f"  {key} = {val}")
        return out

    # --- typed blocks -------------------------------------------------

    def r0(self) -> float:
        if self.raw("geometry", "r0") == "unit":
            return UNIT_BALL_RADIUS
        return self.float("geometry", "r0", positive=True)

    def geometry(self) -> lp.DimerGeometry:
        r0 = self.r0()
        if self.has("geometry", "d0"):
            d0 = self.float("geometry", "d0", positive=True)
        else:
            d0 = self.float("geometry", "gap_ratio", positive=True) * r0
        s = self.float("geometry", "s", positive=True)
        d = self.floats("geometry", "d", 3)
        if np.linalg.norm(d) == 0:
            raise ConfigError("[geometry] d must be nonzero")
        z = self.floats("geometry", "z", 3)
        return lp.DimerGeometry(r0, d0, s, tuple(d), tuple(z))

    def medium(self, delta: float | None = None) -> lp.MediumParams:
        if self.has("medium", "rho_b") or self.has("medium", "kappa_b"):
            vals = {k: self.float("medium", k, positive=True) for k in ("rho", "kappa", "rho_b", "kappa_b")}
            return lp.MediumParams(**vals)
        d = delta if delta is not None else self.float("medium", "delta", positive=True)
        return lp.MediumParams.from_contrast(d, self.float("medium", "v", positive=True),
                                             self.float("medium", "v_b", positive=True))


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.15g}"
    return str(x)


class CsvOut:
    def __init__(self, cfg: RunConfig, command: str, seed=None, derived: dict | None = None):
        self.cfg, self.command, self.seed = cfg, command, seed
        self.derived = derived or {}

    def header(self) -> str:
        lines = [f"# dimerwave {__version__} {self.command}", f"# config: {os.path.basename(self.cfg.path)}"]
        if self.seed is not None:
            lines.append(f"# seed = {self.seed}")
        lines += ["# " + ln for ln in self.cfg.lines()]
        for k, v in self.derived.items():
            lines.append(f"# derived {k} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    def write(self, path: str, columns: list[str], rows: list, footer: list[str] | None = None):
        buf = io.StringIO()
        buf.write(self.header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        for ln in footer or []:
            buf.write(f"# {ln}\n")
        with open(path, "w", newline="") as f:
            f.write(buf.getvalue())
        log.info("wrote %s (%d rows)", path, len(rows))


def _out_path(args, cfg, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, cfg.raw("output", "prefix") + name)


def _slope(x, y) -> float:
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_capacitance(cfg: RunConfig, args) -> int:
    nmax = cfg.int("numerics", "nmax_static", 2)
    r0 = cfg.r0()
    if cfg.has("geometry", "d0"):
        d0s = cfg.floats("geometry", "d0", positive=True)
    else:
        d0s = [x * r0 for x in cfg.floats("geometry", "gap_ratio", positive=True)]
    rows = []
    for d0 in d0s:
        geom = lp.DimerGeometry(r0, d0)
        num = lp.capacitance_set(geom, nmax, "numeric")
        ser = lp.capacitance_set(geom, nmax, "series")
        gap = max(abs(num.C11 - ser.C11) / ser.C11, abs(num.C12 - ser.C12) / abs(ser.C12),
                  abs(num.P - ser.P) / abs(ser.P))
        for c in (ser, num):
            rows.append((r0, d0, c.C11, c.C12, c.P, c.method, gap))
    CsvOut(cfg, "capacitance").write(_out_path(args, cfg, "capacitance.csv"),
                                     ["r0", "d0", "C11", "C12", "P", "method", "rel_gap"], rows)
    return EXIT_OK


def _normalized_pair(cfg):
    g = cfg.geometry()
    return g, lp.DimerGeometry.normalized(g.d0 / g.r0)


def cmd_resonances(cfg: RunConfig, args) -> int:
    g, base = _normalized_pair(cfg)
    s = g.radius / UNIT_BALL_RADIUS
    nmax = cfg.int("numerics", "nmax", 2)
    deltas = cfg.floats("resonance", "deltas", positive=True)
    caps = lp.capacitance_set(base, cfg.int("numerics", "nmax_static", 2))
    g1, g2 = cfg.complex("resonance", "guess1"), cfg.complex("resonance", "guess2")
    rows, ok, gaps = [], 0, []
    coeffs = None
    for delta in deltas:
        p = cfg.medium(delta) if not cfg.has("medium", "rho_b") else cfg.medium()
        if coeffs is None:
            try:
                coeffs = rs.anti_resonance_corrections(base, p, max(nmax, 8))
            except SolverError as exc:
                log.warning("corrections unavailable: %s", exc)
        a = rs.asymptotic_resonances(p, caps, coeffs).scaled(s)
        rows.append((p.delta, "asymptotic", a.omega1.real, a.omega1.imag, a.omega2.real, a.omega2.imag, "", "", "ok"))
        q1, q2 = rs.quasi_static_system_roots(caps, p)
        rows.append((p.delta, "quasi-static", q1.real / s, q1.imag / s, q2.real / s, q2.imag / s, "", "", "ok"))
        ok += 2
        try:
            guesses = None if g1 is None or g2 is None else (g1 * s, g2 * s)
            m = rs.muller_resonances(base, p, nmax, guesses).scaled(s)
            rows.append((p.delta, "muller", m.omega1.real, m.omega1.imag, m.omega2.real, m.omega2.imag,
                         m.modes[0], m.modes[1], "ok"))
            gaps.append((p.delta, abs(m.omega1.real * s - math.sqrt(p.delta * p.v_b**2 * (caps.C11 + caps.C12)))))
            ok += 1
        except SolverError as exc:
            log.warning("Muller failed at delta=%g: %s", p.delta, exc)
            rows.append((p.delta, "muller", "", "", "", "", "", "", "FAILED"))
    footer = []
    if len(gaps) >= 2:
        footer.append(f"summary: loglog slope of |Re omega1_muller - leading| vs delta = {_slope(*zip(*gaps)):.6f}")
    CsvOut(cfg, "resonances").write(
        _out_path(args, cfg, "resonances.csv"),
        ["delta", "method", "re_omega1", "im_omega1", "re_omega2", "im_omega2", "mode1", "mode2", "status"],
        rows, footer)
    return EXIT_OK if ok else EXIT_NUMERIC


def dispersion_setup(cfg: RunConfig):
    """Resonances, constants and derived scale for the dispersion sweep."""
    g, base = _normalized_pair(cfg)
    p = cfg.medium()
    nmax = cfg.int("numerics", "nmax", 2)
    caps = lp.capacitance_set(base, cfg.int("numerics", "nmax_static", 2))
    root = rs.muller_resonances(base, p, nmax)
    target = cfg.complex("resonance", "calibrate_omega1")
    if target is not None:
        s = root.omega1.real / target.real
    else:
        s = g.radius / UNIT_BALL_RADIUS
    res = root.scaled(s)
    side = cfg.float("homogenize", "box_side", positive=True)
    Lam = cfg.float("homogenize", "Lambda", nonneg=True)
    vol = side**3
    conv = cfg.raw("homogenize", "B_convention")
    if conv not in ("literal", "moment"):
        raise ConfigError("[homogenize] B_convention must be 'literal' or 'moment'")
    b = 1.0 / (2 * vol) if conv == "literal" else 1.0 / (3 * vol)
    derived = {"s": s, "r0_physical": s * UNIT_BALL_RADIUS, "delta": p.delta,
               "re_omega1": res.omega1.real, "im_omega1": res.omega1.imag,
               "re_omega2": res.omega2.real, "im_omega2": res.omega2.imag,
               "Lambda_V": Lam / vol, "Lambda_B": Lam * b}
    return p, caps, base, res, Lam / vol, Lam * b, derived


def cmd_dispersion(cfg: RunConfig, args) -> int:
    wmin = cfg.float("sweep", "omega_min", positive=True)
    wmax = cfg.float("sweep", "omega_max", positive=True)
    steps = cfg.int("sweep", "steps", 2)
    if wmax <= wmin:
        raise ConfigError("[sweep] omega_max must exceed omega_min")
    p, caps, base, res, LV, LB, derived = dispersion_setup(cfg)
    w = np.linspace(wmin, wmax, steps)
    rows = hz.dispersion_sweep(w, caps, caps.P, base.volume, res.omega1, res.omega2, p.delta, LV, LB, p.v, p.v_b)
    windows = hz.double_negative_windows(rows)
    out = [(r.omega, r.rho_eff.real, r.rho_eff.imag, r.kappa_eff.real, r.kappa_eff.imag,
            r.n_eff.real, r.n_eff.imag, r.regime) for r in rows]
    footer = [f"double-negative window: {a:.15g} .. {b:.15g}" for a, b in windows] or ["no double-negative window"]
    CsvOut(cfg, "dispersion", derived=derived).write(
        _out_path(args, cfg, "dispersion.csv"),
        ["omega", "re_rho_eff", "im_rho_eff", "re_kappa_eff", "im_kappa_eff", "re_n_eff", "im_n_eff", "regime"],
        out, footer)
    if args.svg:
        from .plot import dispersion_svg

        with open(_out_path(args, cfg, "dispersion.svg"), "w") as f:
            f.write(dispersion_svg(rows, windows))
    return EXIT_OK


def foldy_compare_run(cfg: RunConfig, seed: int):
    """Foldy vs Lippmann-Schwinger comparison; returns (summary, probes, timings)."""
    from scipy.spatial import cKDTree

    from . import foldy as fl

    base = lp.DimerGeometry.normalized(cfg.float("geometry", "gap_ratio", positive=True))
    consts = sc.DimerConstants.compute(base, cfg.int("numerics", "nmax_static", 2))
    lo = cfg.floats("ensemble", "box_lo", 3)
    hi = cfg.floats("ensemble", "box_hi", 3)
    Ns = [int(n) for n in cfg.floats("ensemble", "N", positive=True)]
    Lam = cfg.float("ensemble", "Lambda", positive=True)
    mu = cfg.float("ensemble", "mu", positive=True)
    eta = cfg.float("ensemble", "eta", positive=True) if cfg.has("ensemble", "eta") else None
    jitter = cfg.float("ensemble", "jitter", nonneg=True)
    omega = cfg.float("foldy", "omega", positive=True)
    theta = cfg.floats("foldy", "direction", 3)
    n_ls = cfg.int("foldy", "ls_grid", 4)
    nmax = cfg.int("numerics", "nmax", 2)
    prng = np.random.default_rng(cfg.int("foldy", "probe_seed"))
    lo_a, hi_a = np.asarray(lo), np.asarray(hi)
    cand = lo_a + (0.08 + 0.84 * prng.random((cfg.int("foldy", "probes", 1), 3))) * (hi_a - lo_a)
    summary, probe_rows, timings = [], [], []
    for N in Ns:
        t0 = time.perf_counter()
        s = Lam / N
        p = cfg.medium((mu * s) ** 2) if not cfg.has("medium", "rho_b") else cfg.medium()
        try:
            res = rs.muller_resonances(base, p, nmax).scaled(s)
            spec = hz.EnsembleSpec.generate(lo, hi, N, s, mu, seed=seed + N, jitter=jitter, eta=eta)
            wave = sc.IncidentWave(tuple(theta), p.k(omega))
            dc = fl.ensemble_coefficients(spec, base, p, consts, res, omega)
            st = fl.assemble_and_solve_foldy(dc, wave)
            dist, _ = cKDTree(spec.positions).query(cand)
            pts = cand[dist >= math.sqrt(s)]
            probes = fl.ProbeGrid(pts, spec.positions, math.sqrt(s))
            micro = st.total(probes.points, wave)
            med = fl.macroscopic_medium(dc, spec, p.k(omega))
            macro = fl.lippmann_schwinger_solve(med, lo, hi, wave, n_ls)(probes.points)
            uin = wave.value(probes.points)
            err, table = fl.compare_micro_macro(micro, macro, probes, reference=uin)
            frac = fl.volume_fraction(spec)
            summary.append((N, s, err, len(probes.points), frac, spec.measured_eta, med.regime, "ok"))
            for r in table:
                probe_rows.append((N, r[0], r[1], r[2], r[3].real, r[3].imag, r[4].real, r[4].imag, r[5]))
        except SolverError as exc:
            log.warning("N=%d failed: %s", N, exc)
            summary.append((N, s, "", "", "", "", "", "FAILED"))
        timings.append((N, time.perf_counter() - t0))
    return summary, probe_rows, timings


def cmd_foldy_compare(cfg: RunConfig, args) -> int:
    seed = args.seed
    if seed is None:
        seed = cfg.int("ensemble", "seed") if cfg.has("ensemble", "seed") else int.from_bytes(os.urandom(4), "little")
        if not cfg.has("ensemble", "seed"):
            log.warning("no seed given; generated seed %d", seed)
    summary, probe_rows, timings = foldy_compare_run(cfg, seed)
    out = CsvOut(cfg, "foldy-compare", seed=seed)
    out.write(_out_path(args, cfg, "foldy_compare.csv"),
              ["N", "s", "rel_error", "n_probes", "excluded_volume_fraction", "measured_eta", "macro_regime", "status"], summary)
    out.write(_out_path(args, cfg, "foldy_probes.csv"),
              ["N", "x", "y", "z", "re_micro", "im_micro", "re_macro", "im_macro", "abs_diff"], probe_rows)
    # wall-clock times vary between runs and are kept out of the CSV files
    with open(_out_path(args, cfg, "foldy_compare.timing"), "w") as f:
        for N, t in timings:
            f.write(f"N={N} runtime_s={t:.3f}\n")
    return EXIT_OK if any(r[-1] == "ok" for r in summary) else EXIT_NUMERIC


def scatter_run(cfg: RunConfig):
    base = lp.DimerGeometry.normalized(cfg.float("geometry", "gap_ratio", positive=True))
    consts = sc.DimerConstants.compute(base, cfg.int("numerics", "nmax_static", 2))
    nmax = cfg.int("numerics", "nmax", 2)
    svals = cfg.floats("scatter", "s_values", positive=True)
    mu = cfg.float("scatter", "mu", positive=True)
    omega = cfg.float("scatter", "omega", positive=True)
    theta = cfg.floats("scatter", "direction", 3)
    orient = cfg.floats("scatter", "orientation", 3)
    nang = cfg.int("scatter", "angles", 1)
    factor = cfg.float("scatter", "ring_factor", positive=True)
    rows, errs, degenerate = [], [], False
    transparent = cfg.has("medium", "rho_b")
    for s in svals:
        p = cfg.medium() if transparent else cfg.medium((mu * s) ** 2)
        g = lp.DimerGeometry(base.r0, base.d0, s, tuple(orient))
        wave = sc.IncidentWave(tuple(theta), p.k(omega))
        diam = 2 * (g.half_spacing + g.radius)
        pts = sc.ring_points(factor * diam, nang, g.center, (0.0, 1.0, 0.2))
        full = sc.solve_full(g, p, wave, nmax, omega).scattered(pts)
        if p.delta == 1.0 and p.v == p.v_b:
            point = np.zeros_like(full)
        else:
            res = rs.muller_resonances(base, p, nmax).scaled(s)
            point = sc.point_scattered_field(sc.scattering_coefficients(g, p, consts, res, omega), wave, pts)
        # relative to the ring RMS of the full field; with no scattering
        # (matched media) fall back to the incident amplitude
        nrm = np.linalg.norm(full) / math.sqrt(nang)
        ref = abs(wave.amplitude)
        scale = nrm if nrm > 1e-12 * ref else ref
        degenerate = degenerate or scale == ref
        err = np.linalg.norm(point - full) / math.sqrt(nang) / scale
        errs.append(err)
        for t, (a, b) in enumerate(zip(point, full)):
            rows.append((s, 2 * math.pi * t / nang, a.real, a.imag, b.real, b.imag, abs(a - b) / scale))
    return rows, svals, errs, degenerate


def cmd_scatter(cfg: RunConfig, args) -> int:
    rows, svals, errs, degenerate = scatter_run(cfg)
    footer = [f"ring error s={s:.15g}: {e:.15g}" for s, e in zip(svals, errs)]
    if degenerate:
        footer.append("summary: degenerate case (no scattering), errors are absolute "
                      "relative to the incident amplitude; slope not defined")
    elif len(svals) >= 2 and all(e > 0 for e in errs):
        footer.append(f"summary: loglog slope of ring error vs s = {_slope(svals, errs):.6f}")
    CsvOut(cfg, "scatter").write(
        _out_path(args, cfg, "scatter.csv"),
        ["s", "angle", "re_point", "im_point", "re_full", "im_full", "rel_error"], rows, footer)
    return EXIT_OK


COMMANDS = {
    "capacitance": cmd_capacitance,
    "resonances": cmd_resonances,
    "dispersion": cmd_dispersion,
    "foldy-compare": cmd_foldy_compare,
    "scatter": cmd_scatter,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dimerwave", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"dimerwave {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI configuration file")
        sp.add_argument("--svg", action="store_true", help="also write an SVG plot (dispersion)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="random seed for ensembles")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, lp.GeometryError) as exc:
        print(f"dimerwave: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"dimerwave: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
