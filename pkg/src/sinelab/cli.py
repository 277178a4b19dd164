"""The ``sinelab`` command line.

Each subcommand appends JSON records to ``<out>/<command>.jsonl`` and, when
the result is a table, writes ``<out>/<command>.csv``.  Every record carries
the full :class:`ExperimentConfig` and the package version, so one record is
enough to rerun its experiment.

Options come from flags and from an optional ``key = value`` file given with
``--config``; a flag always wins over the file.  The output directory
defaults to ``$SINELAB_OUTPUT_DIR`` or ``./sinelab-output``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from . import __version__, cltlab, funcspace, hankel, sinedpp
from .descriptors import KNOWN, Descriptor, gaussian, hat, lorentzian
from .errors import DomainError, SinelabError

__all__ = ["ExperimentConfig", "RunResult", "run", "main", "selftest_checks", "EXIT_CODES", "OUTPUT_ENV"]

OUTPUT_ENV = "SINELAB_OUTPUT_DIR"
DEFAULT_OUTPUT = "sinelab-output"

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_CONFIG_FILE = 3
EXIT_DESCRIPTOR = 4
EXIT_PARAMETER = 5
EXIT_CHECK_FAILED = 6


class CLIError(Exception):
    exit_code = EXIT_INTERNAL


class UsageError(CLIError):
    """Unknown subcommand or flag, or a flag value that does not parse."""

    exit_code = EXIT_USAGE


class ConfigFileError(CLIError):
    exit_code = EXIT_CONFIG_FILE


class DescriptorError(CLIError):
    exit_code = EXIT_DESCRIPTOR


class ParameterError(CLIError):
    """A numeric option is outside its admissible range."""

    exit_code = EXIT_PARAMETER


def _module_codes():
    from . import errors

    return {
        name: cls.exit_code
        for name, cls in vars(errors).items()
        if isinstance(cls, type) and issubclass(cls, SinelabError)
    }


EXIT_CODES = {
    "ok": EXIT_OK,
    "internal": EXIT_INTERNAL,
    "usage": EXIT_USAGE,
    "config_file": EXIT_CONFIG_FILE,
    "descriptor": EXIT_DESCRIPTOR,
    "parameter": EXIT_PARAMETER,
    "check_failed": EXIT_CHECK_FAILED,
    **_module_codes(),
}


# ---------------------------------------------------------------------------
# option table
# ---------------------------------------------------------------------------


def _split(s):
    return [p.strip() for p in str(s).split(",") if p.strip()]


def _floats(s):
    return [float(p) for p in _split(s)]


def _complexes(s):
    return [complex(p.replace(" ", "")) for p in _split(s)]


def _params(s):
    out = {}
    for item in _split(s):
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        out[key.strip()] = float(val)
    return out


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# name -> (converter, metavar, help)
_OPTIONS = {
    "f": (str, "NAME", f"test function, one of {', '.join(k for k in KNOWN if k != 'custom')}"),
    "param": (_params, "K=V[,K=V]", "descriptor parameters such as width=2"),
    "R": (_floats, "R[,R...]", "dilation scales"),
    "lambda": (_complexes, "LAM[,LAM...]", "spectral parameters, complex allowed (e.g. 0.5,1j)"),
    "N": (int, "N", "number of Monte Carlo replicates (0 skips sampling where optional)"),
    "seed": (int, "SEED", "root seed of the replicate streams"),
    "n_quad": (int, "N", "quadrature nodes for Hankel operators"),
    "n_nodes": (int, "N", "Nystrom nodes for the sine kernel (default 4L + 16)"),
    "L": (float, "L", "window half-width"),
    "margin": (float, "M", "sampling window half-width in units of R for non-compact f"),
    "delta": (float, "D", "strip half-width as a fraction of the distance to the nearest singularity"),
    "model": (str, "MODEL", "rate model: inverse_linear or inverse_log"),
    "T": (_floats, "T[,T...]", "candidate smoothing parameters"),
    "xi_step": (float, "H", "frequency step of the kappa0 scan"),
    "rtol": (float, "TOL", "relative tolerance of the exact variance"),
    "tol": (float, "TOL", "absolute tolerance of the n_quad doubling check"),
    "check_doubling": (_bool, None, "repeat with doubled n_quad and compare"),
    "workers": (int, "W", "cap on worker processes (default: all cores)"),
    "out": (str, "DIR", f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})"),
}

_FUNCTION = {"f": None, "param": None}
_SAMPLING = {"N": 0, "seed": 0, "margin": 8.0, "n_nodes": None}
_BOUND = {"n_quad": 128, "T": None, "xi_step": 0.05}

# per-command defaults; the keys are also the accepted options
_COMMANDS = {
    "norms": {**_FUNCTION, "R": [1.0], "lambda": [1.0 + 0j], "n_quad": 128, "delta": 0.9},
    "sample": {"L": 5.0, "n_nodes": None, "N": 1000, "seed": 0},
    "variance": {**_FUNCTION, "R": [1.0], "rtol": 1e-8},
    "mgf-check": {**_FUNCTION, **_SAMPLING, "R": [2.0], "lambda": [-1.0, -0.5, 0.5, 1.0],
                  "N": 10000, "n_quad": 128},
    "fredholm": {**_FUNCTION, "R": [5.0], "lambda": [1.0 + 0j], "n_quad": 128,
                 "check_doubling": False, "tol": 1e-6},
    "bound": {**_FUNCTION, **_SAMPLING, **_BOUND, "R": [5.0]},
    "rate": {**_FUNCTION, **_SAMPLING, **_BOUND, "R": [5.0, 10.0, 20.0, 40.0], "model": "inverse_linear"},
    "selftest": {},
}

_SUMMARIES = {
    "norms": "Sobolev, strip and Hankel Hilbert-Schmidt norms",
    "sample": "exact samples of the sine process on [-L, L]",
    "variance": "exact variance of the linear statistic against its limit",
    "mgf-check": "empirical MGF against the determinant identity",
    "fredholm": "the Fredholm determinant V(lambda)",
    "bound": "Esseen bound on the Kolmogorov-Smirnov distance",
    "rate": "Esseen bounds over several R with a rate fit",
    "selftest": "identities that hold by construction",
}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run."""

    command: str
    descriptor: dict | None = None
    R: list = field(default_factory=list)
    N: int | None = None
    seed: int | None = None
    n_quad: int | None = None
    n_nodes: int | None = None
    output: str = ""
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def to_record(self):
        rec = asdict(self)
        rec["options"] = {k: _jsonable(v) for k, v in self.options.items()}
        return rec


def _jsonable(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    p = _Parser(prog="sinelab", description="Linear statistics of the sine process.")
    p.add_argument("--version", action="version", version=f"sinelab {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    for name, defaults in _COMMANDS.items():
        sp = sub.add_parser(name, help=_SUMMARIES[name], description=_SUMMARIES[name])
        sp.add_argument("--config", metavar="FILE", help="key = value file; flags win on conflict")
        for key in (*defaults, "workers", "out"):
            conv, metavar, text = _OPTIONS[key]
            flag = "--" + key.replace("_", "-")
            default = defaults.get(key)
            if default is not None:
                text += f" (default: {_jsonable(default)})"
            if conv is _bool:
                sp.add_argument(flag, dest=key, action="store_true", default=None, help=text)
            elif key == "param":
                sp.add_argument(flag, dest=key, action="append", metavar=metavar, help=text)
            else:
                sp.add_argument(flag, dest=key, type=str, metavar=metavar, help=text)
    return p


def _convert(key, raw, error_cls):
    conv = _OPTIONS[key][0]
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise error_cls(f"bad value for {key}: {raw!r} ({exc})") from None


def read_config_file(path, command):
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    allowed = set(_COMMANDS[command]) | {"workers", "out"}
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigFileError(f"cannot read {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigFileError(f"{path}:{lineno}: expected key = value")
        if key not in allowed:
            raise ConfigFileError(f"{path}:{lineno}: option {key!r} does not apply to {command}")
        val = val.strip()
        if key == "param" and "param" in out:
            out[key].update(_convert(key, val, ConfigFileError))
        else:
            out[key] = _convert(key, val, ConfigFileError)
    return out


def _descriptor(name, params):
    if name is None:
        raise DescriptorError("this command needs a test function (--f)")
    if name not in KNOWN or name == "custom":
        raise DescriptorError(f"unknown test function {name!r}")
    try:
        return Descriptor(name, params or {})
    except (DomainError, TypeError, ValueError) as exc:
        raise DescriptorError(str(exc)) from None


def _positive(opts, key, minimum=None, integer=False):
    v = opts.get(key)
    if v is None:
        return
    vals = v if isinstance(v, list) else [v]
    if isinstance(v, list) and not vals:
        raise ParameterError(f"{key} needs at least one value")
    for x in vals:
        if not math.isfinite(x) or (minimum is None and not x > 0) or (minimum is not None and x < minimum):
            bound = "positive" if minimum is None else f">= {minimum}"
            raise ParameterError(f"{key} must be {bound}, got {x}")


def _validate(command, opts):
    for key in ("R", "L", "margin", "xi_step", "rtol", "tol", "delta", "T"):
        _positive(opts, key)
    _positive(opts, "n_quad", minimum=32)
    _positive(opts, "n_nodes", minimum=2)
    _positive(opts, "workers", minimum=1)
    _positive(opts, "seed", minimum=0)
    _positive(opts, "N", minimum=0 if command in ("bound", "rate") else 1)
    if command in ("mgf-check",) and opts["N"] < 2:
        raise ParameterError("mgf-check needs N >= 2")
    if command == "rate":
        if opts["model"] not in ("inverse_linear", "inverse_log"):
            raise ParameterError(f"model must be inverse_linear or inverse_log, got {opts['model']!r}")
        if len(opts["R"]) < 4 or min(opts["R"]) <= 1:
            raise ParameterError("rate needs at least four R values, all greater than 1")
    if "delta" in opts and not opts["delta"] < 1:
        raise ParameterError("delta is a fraction and must be below 1")
    for lam in opts.get("lambda") or []:
        if not (math.isfinite(lam.real) and math.isfinite(lam.imag)):
            raise ParameterError("lambda values must be finite")


def parse_config(argv):
    """Turn ``argv`` into an :class:`ExperimentConfig` plus the descriptor."""
    ns = _build_parser().parse_args(argv)
    if ns.command is None:
        raise UsageError("no subcommand given")
    command = ns.command
    defaults = _COMMANDS[command]
    flags = {}
    for key in (*defaults, "workers", "out"):
        raw = getattr(ns, key, None)
        if raw is None:
            continue
        if key == "param":
            merged = {}
            for item in raw:
                merged.update(_convert(key, item, UsageError))
            flags[key] = merged
        else:
            flags[key] = _convert(key, raw, UsageError)
    from_file = read_config_file(ns.config, command) if ns.config else {}
    opts = {**defaults, "workers": None, "out": None, **from_file, **flags}
    if opts["workers"] is None:
        opts["workers"] = os.cpu_count() or 1
    if opts["out"] is None:
        opts["out"] = os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    _validate(command, opts)
    desc = _descriptor(opts["f"], opts["param"]) if "f" in defaults else None
    core = {"R", "N", "seed", "n_quad", "n_nodes", "out", "f", "param", "rtol", "tol"}
    cfg = ExperimentConfig(
        command=command,
        descriptor=None if desc is None else desc.to_record(),
        R=list(opts.get("R") or []),
        N=opts.get("N"),
        seed=opts.get("seed"),
        n_quad=opts.get("n_quad"),
        n_nodes=opts.get("n_nodes"),
        output=os.path.abspath(opts["out"]),
        tolerances={k: opts[k] for k in ("rtol", "tol") if k in opts},
        options={k: v for k, v in opts.items() if k not in core},
    )
    return cfg, desc


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    status: int
    summary: str
    records: list = field(default_factory=list)
    files: list = field(default_factory=list)
    error: dict | None = None


class _Sink:
    def __init__(self, cfg):
        self.cfg = cfg
        self.records = []
        self.files = []
        os.makedirs(cfg.output, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.cfg.output, name)
        if p not in self.files:
            self.files.append(p)
        return p

    def record(self, kind, result):
        rec = {"command": self.cfg.command, "kind": kind, "version": __version__,
               "config": self.cfg.to_record(), "result": _jsonable(result)}
        self.records.append(rec)
        with open(self.path(f"{self.cfg.command}.jsonl"), "a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        return rec

    def table(self, header, rows, name=None):
        with open(self.path(name or f"{self.cfg.command}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _ring_norms(desc, delta_fraction):
    ring = hankel.ring_grid_function(desc)
    out = {"ring_sup": float(np.max(np.abs(ring.values)))}
    out["hdot_one"] = math.sqrt(desc.hdot_one_sq())
    out["ring_hdot_one_plus_sup"] = out["hdot_one"] + out["ring_sup"]
    if desc.is_holomorphic and math.isfinite(desc.singular_distance):
        delta = delta_fraction * desc.singular_distance
        hd = funcspace.HolomorphicDescriptor(desc, delta, part="ring")
        out["strip_delta"] = delta
        out["strip_norm_ring"] = funcspace.hl_norm(hd)
    return ring, out


def _cmd_norms(cfg, desc, sink):
    opts = cfg.options
    ring, base = _ring_norms(desc, opts["delta"])
    base.update(hdot_half_sq=desc.hdot_half_sq(), sigma2=cltlab.limit_variance(desc))
    sink.record("function", base)
    rows = []
    for R in cfg.R:
        for lam in opts["lambda"]:
            sym = hankel.build_symbol(ring, lam, R)
            plus = hankel.hankel_hs_norm(sym, "plus", n_quad=cfg.n_quad)
            minus = hankel.hankel_hs_norm(sym, "minus", n_quad=cfg.n_quad)
            scaling = hankel.seminorm_scaling(sym)
            sink.record("hankel", {"R": R, "lambda": lam, "method": sym.method, "plus": plus.to_record(),
                                   "minus": minus.to_record(), "scaling": scaling.to_record()})
            rows.append([R, lam.real, lam.imag, sym.method, plus.value, minus.value,
                         plus.relative_gap, minus.relative_gap, plus.printed_seminorm])
    sink.table(["R", "lambda_re", "lambda_im", "method", "hs_plus", "hs_minus",
                "route_gap_plus", "route_gap_minus", "printed_seminorm_plus"], rows)
    return (f"norms: {desc.name} hdot_half^2={base['hdot_half_sq']:.6g} sigma^2={base['sigma2']:.6g} "
            f"{len(rows)} Hankel rows"), EXIT_OK


def _cmd_sample(cfg, desc, sink):
    opts = cfg.options
    res = sinedpp.batch_sample(opts["L"], cfg.n_nodes, cfg.N, cfg.seed, out_dir=cfg.output,
                               workers=opts["workers"])
    for name in ("samples.csv", "manifest.json"):
        sink.path(name)
    sink.record("manifest", res.manifest)
    m = res.manifest
    return (f"sample: N={m['N']} L={m['L']:g} n_nodes={m['n_nodes']} mean count {m['mean_count']:.4f} "
            f"(expected {m['expected_count']:.4f})"), EXIT_OK


def _cmd_variance(cfg, desc, sink):
    limit = cltlab.limit_variance(desc)
    rows = []
    for R in cfg.R:
        v = cltlab.exact_variance(desc.dilate(R), rtol=cfg.tolerances["rtol"])
        gap = abs(v - limit) / limit if limit > 0 else math.nan
        sink.record("variance", {"R": R, "exact_variance": v, "limit_variance": limit, "relative_gap": gap})
        rows.append([R, v, limit, gap])
    sink.table(["R", "exact_variance", "limit_variance", "relative_gap"], rows)
    return f"variance: {desc.name} at {len(rows)} scales, limit {limit:.6g}, last {rows[-1][1]:.6g}", EXIT_OK


def _cmd_mgf(cfg, desc, sink):
    opts = cfg.options
    rows, worst = [], 0.0
    for R in cfg.R:
        chk = cltlab.mgf_check(desc, R, opts["lambda"], cfg.N, cfg.seed, n_quad=cfg.n_quad,
                               margin=opts["margin"], n_nodes=cfg.n_nodes, workers=opts["workers"])
        rec = chk.to_record()
        rec["passed"] = bool(np.all(chk.z <= 3.0))
        sink.record("mgf", rec)
        worst = max(worst, float(np.max(chk.z)))
        for i, lam in enumerate(chk.lam):
            rows.append([R, lam.real, lam.imag, chk.empirical[i].real, chk.empirical[i].imag, chk.stderr[i],
                         chk.predicted[i].real, chk.predicted[i].imag, chk.z[i]])
    sink.table(["R", "lambda_re", "lambda_im", "empirical_re", "empirical_im", "stderr",
                "predicted_re", "predicted_im", "z"], rows)
    status = EXIT_OK if worst <= 3.0 else EXIT_CHECK_FAILED
    return f"mgf-check: {desc.name} {len(rows)} points, max z = {worst:.3f}", status


def _cmd_fredholm(cfg, desc, sink):
    opts = cfg.options
    ring = hankel.ring_grid_function(desc)
    rows = []
    for R in cfg.R:
        for lam in opts["lambda"]:
            ev = hankel.fredholm_det_V(ring, lam, R, n_quad=cfg.n_quad, check_doubling=opts["check_doubling"],
                                       tol=cfg.tolerances["tol"])
            sink.record("determinant", ev.to_record())
            rows.append([R, lam.real, lam.imag, ev.value.real, ev.value.imag, ev.hs_norm_plus, ev.hs_norm_minus])
    sink.table(["R", "lambda_re", "lambda_im", "V_re", "V_im", "hs_plus", "hs_minus"], rows)
    last = rows[-1]
    return f"fredholm: {desc.name} V = {complex(last[3], last[4])} at R={last[0]:g}, lambda={complex(last[1], last[2])}", EXIT_OK


def _bounds(cfg, desc, sink):
    opts = cfg.options
    rows = []
    for R in cfg.R:
        rep = cltlab.esseen_bound(desc, R, T_grid=opts["T"], xi_step=opts["xi_step"], n_quad=cfg.n_quad)
        rec = rep.to_record()
        ks = None
        if cfg.N:
            summ = cltlab.monte_carlo_statistics(desc, R, cfg.N, cfg.seed, margin=opts["margin"],
                                                 n_nodes=cfg.n_nodes, workers=opts["workers"])
            ks = cltlab.ks_distance(summ.values, rep.sigma)
            slack = 3 * 0.8 / math.sqrt(cfg.N)
            rec.update(empirical_ks=ks, ks_slack=slack, ks_within_bound=bool(ks <= rep.bound + slack),
                       window=summ.window, sample_variance=summ.variance)
        sink.record("bound", rec)
        rows.append((R, ks, rep.bound))
    return rows


def _cmd_bound(cfg, desc, sink):
    rows = _bounds(cfg, desc, sink)
    cltlab.write_rate_table(sink.path("bound.csv"), rows)
    text = ", ".join(f"R={R:g}: {b:.4g}" for R, _, b in rows)
    return f"bound: {desc.name} {text}", EXIT_OK


def _cmd_rate(cfg, desc, sink):
    rows = _bounds(cfg, desc, sink)
    pts = [(R, b) for R, _, b in rows]
    model = cfg.options["model"]
    fit = cltlab.rate_fit(pts, model)
    other = cltlab.rate_fit(pts, "inverse_log" if model == "inverse_linear" else "inverse_linear")
    sink.record("fit", {"fit": fit.to_record(), "alternative": other.to_record()})
    cltlab.write_rate_table(sink.path("rate.csv"), rows, [fit])
    return (f"rate: {desc.name} {model} c={fit.c:.4g} residual {fit.residual_norm:.3g} "
            f"(alternative {other.residual_norm:.3g}), log-log slope {fit.loglog_slope:.3f}"), EXIT_OK


def selftest_checks():
    """Identities that hold by construction, as a list of result dicts."""
    checks = []

    def add(name, value, expected, tol):
        value, expected = complex(value), complex(expected)
        err = abs(value - expected)
        checks.append({"name": name, "value": value, "expected": expected, "error": err,
                       "tolerance": tol, "passed": bool(err <= tol)})

    def raises(name, fn, exc_type):
        try:
            fn()
        except exc_type:
            ok = True
        else:
            ok = False
        checks.append({"name": name, "value": None, "expected": exc_type.__name__, "error": 0.0 if ok else 1.0,
                       "tolerance": 0.0, "passed": ok})

    gau, lor, tri = gaussian(), lorentzian(), hat()
    zero = gaussian(amplitude=0.0)

    # closed forms
    g = funcspace.make_grid_function(gau, -8.0, 1 / 64, 1025)
    add("gaussian sample at t = 0", g.values[512], 1.0, 0.0)
    add("lorentzian at t = 1", lor(1.0), 0.5, 0.0)
    add("hat at t = 1", tri(1.0), 0.0, 0.0)
    add("hat at t = -1", tri(-1.0), 0.0, 0.0)

    # transforms and the Hardy split
    z = funcspace.fourier_transform(funcspace.make_grid_function(zero, -8.0, 1 / 64, 1025))
    add("transform of zero", float(np.max(np.abs(z.amplitudes))), 0.0, 0.0)
    add("ring of zero", float(np.max(np.abs(funcspace.hardy_split(z)[2].values))), 0.0, 0.0)
    t = np.linspace(-20, 20, 4001)
    for d in (gau, lor, tri):
        add(f"real part of ring[{d.name}]", float(np.max(np.abs(np.real(d.ring(t))))), 0.0, 1e-14)
    g = funcspace.make_grid_function(gau, -16.0, 1 / 32, 1025)
    spec = funcspace.fourier_transform(g, tail_tol=1e-12)
    fp, fm, _ = funcspace.hardy_split(spec)
    add("f_plus + f_minus = f", float(np.max(np.abs(fp.values + fm.values - g.values))), 0.0, 1e-10)
    l2_time = float(np.sum(np.abs(g.values) ** 2) * g.grid_step)
    add("Parseval", spec.l2_norm() ** 2, l2_time, 1e-12)
    add("Parseval closed form", l2_time, math.sqrt(math.pi / 2), 1e-12)

    # strip norm
    add("strip norm of zero", funcspace.hl_norm(funcspace.HolomorphicDescriptor(lorentzian(amplitude=0.0), 0.5)),
        0.0, 0.0)
    one = funcspace.hl_norm(funcspace.HolomorphicDescriptor(lor, 0.5))
    two = funcspace.hl_norm(funcspace.HolomorphicDescriptor(lor.scaled(2.0), 0.5))
    add("strip norm homogeneity", two, 2 * one, 1e-12 * one)

    # Hankel symbols and the determinant
    xi = np.linspace(-10, 10, 2001)
    band = funcspace.SpectrumGrid(xi[0], xi[1] - xi[0], np.where(np.abs(xi) <= 3, 1.0, 0.0))
    add("seminorm of a band-limited symbol", funcspace.shifted_tail_seminorm(band, 3.0, tail_tol=1.0), 0.0, 0.0)
    ring = hankel.ring_grid_function(lor)
    sym0 = hankel.build_symbol(ring, 0.0, 2.0)
    add("symbol at lambda 0", float(np.max(np.abs(sym0.tail_spectrum().amplitudes), initial=0.0)), 0.0, 0.0)
    add("HS norm at lambda 0", hankel.hankel_hs_norm(sym0).value, 0.0, 0.0)
    add("unimodular symbol", float(np.max(np.abs(np.abs(np.exp(lor.ring(t))) - 1))), 0.0, 1e-14)
    add("determinant at lambda 0", hankel.fredholm_det_V(ring, 0.0, 5.0).value, 1.0, 0.0)
    poly = [("constant", lambda z: 7.0 + 0j, 0.2, 0.0),
            ("z^2 at 0", lambda z: z * z, 0.0, 0.0),
            ("z^2 at 1", lambda z: z * z, 1.0, 2.0),
            ("z^3 at 0.5", lambda z: z**3, 0.5, 0.75),
            ("z^4 at 0.25i", lambda z: z**4, 0.25j, 4 * (0.25j) ** 3)]
    for name, fn, z0, der in poly:
        res = hankel.cauchy_derivative(None, z0, 1.0, n_circle=32, radius=1.0, integrand=fn)
        add(f"Cauchy derivative of {name}", res.derivative, der, 1e-10)

    # sine process
    add("sine kernel K(0, 0)", float(sinedpp.sine_kernel(0.0, 0.0)), 1.0, 0.0)
    add("sine kernel K(0, 1)", float(sinedpp.sine_kernel(0.0, 1.0)), 0.0, 1e-16)
    es = sinedpp.build_kernel_eigensystem(2.0)
    es0 = replace(es, eigenvalues=np.zeros_like(es.eigenvalues))
    add("expected count with zero eigenvalues", sinedpp.expected_count(es0), 0.0, 0.0)
    add("all eigenvectors rejected", sinedpp.sample_configuration(es0, sinedpp.rng_stream(0, 0)).points.size, 0, 0)
    a = sinedpp.sample_batch(es, 3, seed=5)
    b = sinedpp.sample_batch(es, 3, seed=5)
    add("same seed, same samples", float(sum(np.max(np.abs(x.points - y.points), initial=0.0)
                                           for x, y in zip(a, b))), 0.0, 0.0)

    # linear statistics
    add("statistic of the empty configuration",
        cltlab.additive_functional(sinedpp.Configuration(np.array([]), L=5.0), gau), 0.0, 0.0)
    add("gaussian statistic of {0}",
        cltlab.additive_functional(sinedpp.Configuration(np.array([0.0]), L=5.0), gau), 1.0, 0.0)
    add("hat statistic of {0, 1}",
        cltlab.additive_functional(sinedpp.Configuration(np.array([0.0, 1.0]), L=5.0), tri), 1.0, 0.0)
    add("variance of zero", cltlab.exact_variance(zero), 0.0, 0.0)
    n = 500
    quant = ndtri((np.arange(1, n + 1) - 0.5) / n)
    add("KS of exact quantile sample", cltlab.ks_distance(quant, 1.0), 1 / (2 * n), 1e-12)
    add("KS of a point mass at 0", cltlab.ks_distance(np.zeros(10), 1.0), 0.5, 1e-15)
    raises("Esseen bound needs sigma > 0", lambda: cltlab.esseen_bound(zero, 2.0), DomainError)
    rep = cltlab.esseen_bound(None, 1.0, W=lambda xi: 1.0 + 0j, sigma=1.0)
    add("Esseen bound with W = 1", rep.bound, 4.0 / max(cltlab.default_T_grid()), 1e-15)
    Rs = np.array([2.0, 5.0, 10.0, 40.0])
    for model, vals, c in (("inverse_linear", 3.0 / Rs, 3.0), ("inverse_log", 2.0 / np.log(Rs), 2.0)):
        fit = cltlab.rate_fit(np.column_stack([Rs, vals]), model)
        add(f"{model} fit constant", fit.c, c, 1e-12)
        add(f"{model} fit residuals", fit.residual_norm, 0.0, 1e-12)
    return checks


def _cmd_selftest(cfg, desc, sink):
    checks = selftest_checks()
    for c in checks:
        sink.record("check", c)
    sink.table(["name", "error", "tolerance", "passed"],
               [[c["name"], c["error"], c["tolerance"], c["passed"]] for c in checks])
    failed = [c["name"] for c in checks if not c["passed"]]
    if failed:
        return f"selftest: {len(failed)} of {len(checks)} failed: {'; '.join(failed)}", EXIT_CHECK_FAILED
    return f"selftest: all {len(checks)} checks passed", EXIT_OK


_DISPATCH = {
    "norms": _cmd_norms,
    "sample": _cmd_sample,
    "variance": _cmd_variance,
    "mgf-check": _cmd_mgf,
    "fredholm": _cmd_fredholm,
    "bound": _cmd_bound,
    "rate": _cmd_rate,
    "selftest": _cmd_selftest,
}


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def _error_record(exc, code, command):
    return {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
            "command": command, "version": __version__}


def run(argv):
    """Execute one command line and return a :class:`RunResult`; never raises
    for user or numerical errors."""
    argv = list(argv)
    command = next((a for a in argv if a in _COMMANDS), None)
    try:
        cfg, desc = parse_config(argv)
        sink = _Sink(cfg)
        t0 = time.perf_counter()
        summary, status = _DISPATCH[cfg.command](cfg, desc, sink)
        summary += f" [{time.perf_counter() - t0:.1f} s]"
        return RunResult(status, summary, sink.records, sink.files)
    except (CLIError, SinelabError) as exc:
        code, caught = exc.exit_code, exc
    except Exception as exc:  # noqa: BLE001 - reported as a record, never swallowed silently
        code, caught = EXIT_INTERNAL, exc
    err = _error_record(caught, code, command)
    return RunResult(code, f"error: {err['error']}: {err['message']}", error=err)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] in ("-h", "--help", "--version"):
        try:
            _build_parser().parse_args(argv or ["--help"])
        except SystemExit as exc:
            return int(exc.code or 0)
        return EXIT_OK
    if any(a in ("-h", "--help") for a in argv):
        try:
            _build_parser().parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
    res = run(argv)
    if res.error is not None:
        print(json.dumps(res.error, sort_keys=True), file=sys.stderr)
    else:
        print(res.summary)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
