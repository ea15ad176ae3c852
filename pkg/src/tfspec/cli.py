"""Command-line front end: ``tfspec synthesize | estimate | validate | tapers``.

Settings come from an optional ``key=value`` file (``--config``) overridden
by flags.  Exit codes: 0 success, 1 validation failure, 2 config error,
3 I/O or input error.
"""
import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .core import spreading_function, weyl_symbol
from .estimator import (
    PrototypeSpec,
    bias_field,
    estimate_spectrum,
    global_error_report,
    gwv_prototype,
    mvub_prototype,
    noise_bias_correct,
    variance_field,
)
from .io import FORMATS, field_path, read_field, read_json, write_field, write_json
from .multiwindow import (
    embed_tapers,
    matched_windows,
    multiwindow_prototype,
    optimal_rank,
    sinusoidal_multitaper_estimate,
    sinusoidal_tapers,
)
from .process import (
    CorrelationModel,
    SpreadSupport,
    correlation_from_system,
    observe,
    sample_realization,
    synthesize_underspread_system,
)
from .validation import appendix_identity_suite, isserlis_check, run_mc

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
ESTIMATORS = ("gwv", "mvub", "multiwindow", "sinusoidal")
ISSERLIS_MAX_L = 8
ISSERLIS_MIN_REPLICATES = 10_000


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    L: int = 16
    tau_max: int = 0
    nu_max: int = 1
    sigma_n2: float = 0.0
    alpha: float = 0.0
    estimator: str = "gwv"
    T_len: int = None  # defaults to L
    N: int = None  # multiwindow rank; defaults to the rank rule
    K: int = 4
    N_len: int = None  # sinusoidal segment length; defaults to L // 2
    replicates: int = 100_000
    trials: int = 20
    seed: int = 1
    out: str = "tfspec-out"
    format: str = "csv"
    figures: bool = True

    def support(self):
        """Declared spread of the synthesized system."""
        return SpreadSupport(self.L, self.tau_max, self.nu_max)

    def ea_support(self):
        # the correlation H H^+ spreads over twice the system rectangle
        return self.support().doubled()


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_INT = {"L", "tau_max", "nu_max", "T_len", "N", "K", "N_len", "replicates", "trials", "seed"}
_FLOAT = {"sigma_n2", "alpha"}


def _coerce(key, raw):
    if raw is None:
        return None
    try:
        if key in _INT:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if key in _FLOAT:
            return float(raw)
        if key == "figures":
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return str(raw)


def _normalize_key(key):
    k = key.strip().replace("-", "_")
    if k not in _FIELDS:
        for name in _FIELDS:  # tolerate case differences such as t_len
            if name.lower() == k.lower():
                return name
        raise ConfigError(f"unknown config key {key.strip()!r}")
    return k


def read_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, raw = line.split("=", 1)
        key = _normalize_key(key)
        values[key] = _coerce(key, raw.strip())
    return values


def validate_config(cfg):
    """Check every downstream constraint; raise ConfigError naming the field."""
    if cfg.L < 4 or cfg.L % 2:
        raise ConfigError(f"L must be even and >= 4 (got {cfg.L})")
    half = cfg.L // 2
    for name in ("tau_max", "nu_max"):
        v = getattr(cfg, name)
        if v < 0:
            raise ConfigError(f"{name} must be nonnegative (got {v})")
        if v > half:
            raise ConfigError(f"{name} exceeds grid (L/2 = {half}, got {v})")
    if cfg.sigma_n2 < 0:
        raise ConfigError(f"sigma_n2 must be nonnegative (got {cfg.sigma_n2})")
    if abs(cfg.alpha) > 0.5:
        raise ConfigError(f"alpha must satisfy |alpha| <= 1/2 (got {cfg.alpha})")
    if cfg.estimator not in ESTIMATORS:
        raise ConfigError(f"estimator must be one of {', '.join(ESTIMATORS)} (got {cfg.estimator!r})")
    if cfg.T_len is None:
        cfg.T_len = cfg.L
    if not 1 <= cfg.T_len <= cfg.L:
        raise ConfigError(f"T_len must lie in [1, L={cfg.L}] (got {cfg.T_len})")
    if cfg.N is not None and not 1 <= cfg.N <= cfg.T_len:
        raise ConfigError(f"N must lie in [1, T_len={cfg.T_len}] (got {cfg.N})")
    if cfg.N_len is None:
        cfg.N_len = cfg.L // 2
    if not 1 <= cfg.N_len <= cfg.L:
        raise ConfigError(f"N_len must lie in [1, L={cfg.L}] (got {cfg.N_len})")
    if cfg.estimator == "sinusoidal" and not 1 <= cfg.K <= cfg.N_len:
        raise ConfigError(f"K must lie in [1, N_len={cfg.N_len}] (got {cfg.K})")
    if cfg.replicates < 100:
        raise ConfigError(f"replicates must be at least 100 (got {cfg.replicates})")
    if cfg.trials < 1:
        raise ConfigError(f"trials must be at least 1 (got {cfg.trials})")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be nonnegative (got {cfg.seed})")
    if cfg.format not in FORMATS:
        raise ConfigError(f"format must be one of {', '.join(FORMATS)} (got {cfg.format!r})")
    return cfg


def build_config(args):
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = _coerce(name, v)
    return validate_config(RunConfig(**values))


# ---------------------------------------------------------------- helpers

def _prepare_out(cfg):
    try:
        os.makedirs(cfg.out, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {cfg.out}: {exc.strerror}") from None
    return cfg.out


def _emit(cfg, stem, values, kind, alpha=0.0):
    path = field_path(cfg.out, stem, cfg.format)
    return write_field(path, values, kind, alpha, cfg.format, seed=cfg.seed)


def _figure(cfg, name, fig_fn, *args, **kw):
    if not cfg.figures:
        return []
    from .plotting import save_png

    return [save_png(fig_fn(*args, **kw), os.path.join(cfg.out, name))]


def _config_dict(cfg):
    # the output location is left out so reruns elsewhere stay byte-identical
    d = dataclasses.asdict(cfg)
    d.pop("out")
    return d


def _read_signal(path):
    try:
        values, meta = read_field(path)
    except FileNotFoundError:
        raise InputError(f"input file not found: {path}") from None
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"malformed input {path}: {exc}") from None
    if values.shape[0] != 1:
        raise InputError(f"malformed input {path}: expected one signal row, got shape {values.shape}")
    y = values[0]
    if y.size < 4 or y.size % 2:
        raise InputError(f"malformed input {path}: signal length must be even and >= 4, got {y.size}")
    return y


def _find_field(directory, stem):
    for ext in (".csv", ".f64"):
        p = os.path.join(directory, stem + ext)
        if os.path.exists(p):
            return p
    raise InputError(f"model directory {directory} holds no {stem}.csv or {stem}.f64")


def _read_model(path):
    """Model from a ``synthesize`` output directory."""
    if not os.path.isdir(path):
        raise InputError(f"model path {path} is not a directory")
    try:
        meta = read_json(os.path.join(path, "metadata.json"))
        R, _ = read_field(_find_field(path, "R"))
        ea = meta["ea_support"]
        support = SpreadSupport(R.shape[0], int(ea["tau_max"]), int(ea["nu_max"]))
        return CorrelationModel(R, float(meta["config"]["sigma_n2"]), support)
    except InputError:
        raise
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"malformed model in {path}: {exc}") from None


def _prototype(cfg, L, support, trace_R=None):
    """Target prototype, estimator prototype and extra metadata."""
    P = gwv_prototype(L, cfg.alpha)
    extra = {}
    if cfg.estimator == "gwv":
        return P, P, extra
    P_mvub = mvub_prototype(P, support, cfg.alpha)
    if cfg.estimator == "mvub":
        return P, P_mvub, extra
    if cfg.estimator == "multiwindow":
        N = cfg.N
        if N is None:
            choice = optimal_rank(support.s_x, cfg.sigma_n2, trace_R, n_max=cfg.T_len)
            N = choice.N
            extra["rank_condition_holds"] = choice.condition_holds
        ws = matched_windows(P_mvub, cfg.T_len, N)
        extra["N"] = N
        extra["window_eigenvalues"] = [float(v) for v in ws.eigenvalues]
        return P, multiwindow_prototype(ws), extra
    ws = embed_tapers(sinusoidal_tapers(cfg.N_len, cfg.K), L)
    extra["N_len"], extra["K"] = cfg.N_len, cfg.K
    return P, multiwindow_prototype(ws), extra


# ---------------------------------------------------------------- commands

def cmd_synthesize(cfg):
    out = _prepare_out(cfg)
    system = synthesize_underspread_system(cfg.L, cfg.tau_max, cfg.nu_max, cfg.seed)
    model = correlation_from_system(system, cfg.sigma_n2)
    x = sample_realization(model, cfg.seed)
    y = observe(x, cfg.sigma_n2, cfg.seed)
    EA = spreading_function(model.R, 0.5)
    EW = weyl_symbol(model.R, cfg.alpha)
    files = []
    files += _emit(cfg, "H", system.H, "kernel")
    files += _emit(cfg, "R", model.R, "kernel")
    files += _emit(cfg, "EA", EA.values, "ambiguity", 0.5)
    files += _emit(cfg, "EW", EW.values, "tf", cfg.alpha)
    files += _emit(cfg, "realization", y, "signal")
    from .plotting import ambiguity_figure, tf_figure

    files += _figure(cfg, "EW.png", tf_figure, EW.values, "EW", cfg.alpha)
    files += _figure(cfg, "EA.png", ambiguity_figure, EA.values, "|EA|")
    meta = {
        "tool": "tfspec",
        "version": __version__,
        "command": "synthesize",
        "seed": cfg.seed,
        "s_x": model.support.s_x,
        "system_s_x": system.support.s_x,
        "trace_R": model.trace,
        "config": _config_dict(cfg),
        "ea_support": {"tau_max": model.support.tau_max, "nu_max": model.support.nu_max},
        "files": sorted(os.path.basename(f) for f in files),
    }
    write_json(os.path.join(out, "metadata.json"), meta)
    print(f"synthesized L={cfg.L} s_x={model.support.s_x:.6g} -> {out}")
    return EXIT_OK


def cmd_estimate(cfg, input_path, model_path=None):
    y = _read_signal(input_path)
    L = y.size
    if cfg.L != L:
        # the grid follows the input signal
        cfg.L = L
        validate_config(cfg)
    model = _read_model(model_path) if model_path else None
    if model is not None and model.L != L:
        raise InputError(f"model grid L={model.L} differs from signal length {L}")
    support = model.support if model is not None else cfg.ea_support()
    if model is not None:
        trace_R = model.trace
    else:
        trace_R = max(float(np.vdot(y, y).real) - L * cfg.sigma_n2, np.finfo(float).tiny)
    sigma_n2 = model.sigma_n2 if model is not None and cfg.sigma_n2 == 0 else cfg.sigma_n2
    cfg.sigma_n2 = sigma_n2
    P, P_hat, extra = _prototype(cfg, L, support, trace_R)
    if cfg.estimator == "sinusoidal":
        field = sinusoidal_multitaper_estimate(y, cfg.N_len, cfg.K)
    else:
        field = estimate_spectrum(P_hat, y)
    if sigma_n2 > 0:
        field = noise_bias_correct(field, P_hat, sigma_n2)
    out = _prepare_out(cfg)
    files = _emit(cfg, "estimate", field, "tf", cfg.alpha)
    from .plotting import tf_figure

    files += _figure(cfg, "estimate.png", tf_figure, field, f"{cfg.estimator} estimate", cfg.alpha)
    meta = {
        "tool": "tfspec",
        "version": __version__,
        "command": "estimate",
        "input": os.path.basename(input_path),
        "config": _config_dict(cfg),
        "noise_corrected": sigma_n2 > 0,
        "estimator": extra,
    }
    if model is not None:
        spec = PrototypeSpec(P, P_hat, cfg.alpha)
        B = bias_field(spec, model)
        if sigma_n2 > 0:
            B = B - sigma_n2 * float(np.trace(P_hat).real)
        files += _emit(cfg, "bias", B, "tf", cfg.alpha)
        files += _emit(cfg, "variance", variance_field(P_hat, model), "tf", cfg.alpha)
        report = global_error_report(spec, model)
        write_json(os.path.join(out, "error_report.json"), report.to_dict())
        files.append(os.path.join(out, "error_report.json"))
    meta["files"] = sorted(os.path.basename(f) for f in files)
    write_json(os.path.join(out, "estimate_meta.json"), meta)
    print(f"estimated {cfg.estimator} field L={L} -> {out}")
    return EXIT_OK


def validation_model(cfg):
    system = synthesize_underspread_system(cfg.L, cfg.tau_max, cfg.nu_max, cfg.seed)
    return correlation_from_system(system, cfg.sigma_n2)


def cmd_validate(cfg, perturb_variance=1.0):
    out = _prepare_out(cfg)
    t0 = time.perf_counter()
    model = validation_model(cfg)
    P, P_hat, extra = _prototype(cfg, cfg.L, model.support, model.trace)
    spec = PrototypeSpec(P, P_hat, cfg.alpha)
    V = variance_field(P_hat, model)
    mc = run_mc(model, spec, cfg.replicates, cfg.seed,
                analytic_var=None if perturb_variance == 1.0 else perturb_variance * V)
    iss_R = model.R[:ISSERLIS_MAX_L, :ISSERLIS_MAX_L]
    iss = isserlis_check(iss_R, max(cfg.replicates, ISSERLIS_MIN_REPLICATES), cfg.seed)
    app = appendix_identity_suite(cfg.trials, cfg.seed)
    suites = {
        "monte_carlo": {**mc.summary(), "estimator": cfg.estimator},
        "isserlis": {**iss.summary(), "dimension": int(iss_R.shape[0])},
        "appendix_identities": app.summary(),
    }
    failed = [name for name, s in suites.items() if not s["passed"]]
    report = {
        "tool": "tfspec",
        "version": __version__,
        "command": "validate",
        "config": _config_dict(cfg),
        "perturb_variance": perturb_variance,
        "suites": suites,
        "failed": failed,
        "pass": not failed,
    }
    files = []
    files += _emit(cfg, "mc_empirical_mean", mc.empirical_mean_field, "tf", cfg.alpha)
    files += _emit(cfg, "mc_empirical_var", mc.empirical_var_field, "tf", cfg.alpha)
    files += _emit(cfg, "mc_z_mean", mc.z_mean, "tf", cfg.alpha)
    files += _emit(cfg, "mc_z_var", mc.z_var, "tf", cfg.alpha)
    from .plotting import zscore_figure

    files += _figure(cfg, "zscores.png", zscore_figure, mc.z_mean, mc.z_var)
    report["files"] = sorted(os.path.basename(f) for f in files)
    write_json(os.path.join(out, "validation_report.json"), report)

    for name, s in suites.items():
        verdict = "PASS" if s["passed"] else "FAIL"
        if name == "monte_carlo":
            detail = (f"exceed={s['exceed_fraction']:.3g} pooled_z=({s['pooled_z_mean']:.2f}, "
                      f"{s['pooled_z_var']:.2f}) replicates={s['replicates']}")
        elif name == "isserlis":
            detail = f"max|z|={s['max_abs_z']:.2f} exceed={s['exceed_fraction']:.3g}"
        else:
            detail = (f"max discrepancy={s['max_discrepancy']:.3g} "
                      f"(closed-form V_tot gap {s['vtot_closed_form_gap']:.3g}, informational)")
        print(f"{verdict} {name}: {detail}")
    print(f"wall time {time.perf_counter() - t0:.1f} s")
    if failed:
        print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_tapers(cfg):
    out = _prepare_out(cfg)
    meta = {"tool": "tfspec", "version": __version__, "command": "tapers", "config": _config_dict(cfg)}
    if cfg.estimator == "sinusoidal":
        W = sinusoidal_tapers(cfg.N_len, cfg.K).windows
        meta["K"], meta["N_len"] = cfg.K, cfg.N_len
    elif cfg.estimator == "multiwindow":
        support = cfg.ea_support()
        P_mvub = mvub_prototype(gwv_prototype(cfg.L, cfg.alpha), support, cfg.alpha)
        N = cfg.N if cfg.N is not None else optimal_rank(support.s_x, 0.0, 1.0, n_max=cfg.T_len).N
        ws = matched_windows(P_mvub, cfg.T_len, N)
        W = ws.windows
        meta["N"] = N
        meta["eigenvalues"] = [float(v) for v in ws.eigenvalues]
    else:
        raise ConfigError("tapers needs estimator=multiwindow or estimator=sinusoidal")
    files = _emit(cfg, "windows", W, "windows")
    from .plotting import windows_figure

    files += _figure(cfg, "windows.png", windows_figure, W, f"{cfg.estimator} windows")
    meta["files"] = sorted(os.path.basename(f) for f in files)
    write_json(os.path.join(out, "tapers_meta.json"), meta)
    print(f"wrote {W.shape[0]} windows of length {W.shape[1]} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_config_flags(p):
    p.add_argument("--config", help="key=value config file (flags override it)")
    p.add_argument("--L", dest="L", help="grid length (even, >= 4)")
    p.add_argument("--tau-max", dest="tau_max", help="system lag half-width in samples")
    p.add_argument("--nu-max", dest="nu_max", help="system Doppler half-width in bins")
    p.add_argument("--sigma-n2", dest="sigma_n2", help="white observation-noise variance")
    p.add_argument("--alpha", help="symbol parameter, |alpha| <= 1/2")
    p.add_argument("--estimator", help=f"one of {', '.join(ESTIMATORS)}")
    p.add_argument("--T-len", dest="T_len", help="window support length (multiwindow)")
    p.add_argument("--N", dest="N", help="multiwindow rank")
    p.add_argument("--K", dest="K", help="number of sinusoidal tapers")
    p.add_argument("--N-len", dest="N_len", help="sinusoidal segment length")
    p.add_argument("--replicates", help="Monte Carlo replicates (>= 100)")
    p.add_argument("--trials", help="random draws for the identity suite")
    p.add_argument("--seed", help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", help="csv or f64bin")
    p.add_argument("--no-figures", dest="figures", action="store_const", const=False,
                   help="skip PNG figures")


def build_parser():
    parser = argparse.ArgumentParser(prog="tfspec", description="Time-varying spectral estimation toolkit.")
    parser.add_argument("--version", action="version", version=f"tfspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("synthesize", help="draw an underspread model and one realization")
    _add_config_flags(p)
    p = sub.add_parser("estimate", help="estimate a time-varying spectrum from a signal file")
    _add_config_flags(p)
    p.add_argument("--input", required=True, help="signal field file (.csv or .f64)")
    p.add_argument("--model", help="synthesize output directory; adds analytic bias/variance")
    p = sub.add_parser("validate", help="Monte Carlo and identity checks")
    _add_config_flags(p)
    p.add_argument("--perturb-variance", dest="perturb_variance", type=float, default=1.0,
                   help=argparse.SUPPRESS)
    p = sub.add_parser("tapers", help="emit matched windows or sinusoidal tapers")
    _add_config_flags(p)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = build_config(args)
        if args.command == "synthesize":
            return cmd_synthesize(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.input, args.model)
        if args.command == "validate":
            return cmd_validate(cfg, args.perturb_variance)
        return cmd_tapers(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
