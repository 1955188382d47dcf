"""Command-line front end.

Exit codes: 0 when every check of the run passes, 1 when the computation
finished but a check failed, 2 on configuration errors (bad flags, invalid
grid, out-of-domain selections).  Values come from built-in defaults,
overridden by ``--config`` file entries, overridden by explicit flags.  The
effective configuration is echoed into the output record.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import grid as G
from . import oracle as O
from . import protocol as P
from . import serialization as S
from .errors import ConfigurationError, DomainError
from .phase_space import ProtocolSelection

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_COMMON = {"xplus": 0.3, "pminus": -0.2, "xminus": 1.1, "pplus": 0.5, "format": "json", "out": None}

DEFAULTS = {
    "standard": {**_COMMON, "phi_seed": 7, "phi": None, "epsilon": 0.1, "sigma": 0.05,
                 "lambda": 10.0, "grid_n": 512, "grid_l": 40.0},
    "conjunctive": {**_COMMON, "angles": [0.0, math.pi / 3, 2 * math.pi / 3], "widths": [1e-3] * 3,
                    "sigma": 1e-4, "lambda": 1e4},
    "sweep": {**_COMMON, "phi": 0.7, "levels": 4, "epsilon": 0.1, "sigma": 0.05, "lambda": 10.0,
              "grid_n": 1024, "grid_l": 40.0},
    "contextuality": {**_COMMON, "phi": math.pi / 4, "phi_prime": math.pi / 4, "widths": [0.1, 0.1],
                      "sigma": 1e-4, "lambda": 1e4, "ladder_levels": 4},
    "wigner": {"state": "oscillator", "k": 0, "xi": 0.0, "phi": 0.0, "width": 0.5, "grid_n": 256,
               "grid_l": 32.0, "format": "json", "out": None},
}


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors reported through the configuration exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _add_selection(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("selection")
    g.add_argument("--xplus", type=float, help="preselected x_plus")
    g.add_argument("--pminus", type=float, help="preselected p_minus")
    g.add_argument("--xminus", type=float, help="postselected x_minus")
    g.add_argument("--pplus", type=float, help="postselected p_plus")


def _add_grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-n", dest="grid_n", type=int, help="grid points (power of two)")
    p.add_argument("--grid-l", dest="grid_l", type=float, help="grid extent")


def _add_reg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma", type=float, help="width of the sharp collective coordinate")
    p.add_argument("--lambda", dest="lambda", type=float, help="envelope width")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output path (omit for summary only)")
    p.add_argument("--format", choices=("json", "csv"), help="output format")
    p.add_argument("--config", help="JSON file with flag values (flags take precedence)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meanking", description="Continuous-variable mean king simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("standard", help="seeded standard game on the grid")
    _add_selection(p)
    p.add_argument("--phi-seed", dest="phi_seed", type=int, help="seed of the king's angle")
    p.add_argument("--phi", type=float, help="explicit angle instead of the seeded draw")
    p.add_argument("--epsilon", type=float, help="Kraus width")
    _add_reg(p)
    _add_grid(p)
    _add_output(p)

    p = sub.add_parser("conjunctive", help="simultaneous measurement of several quadratures")
    _add_selection(p)
    p.add_argument("--angles", type=_float_list, help="comma-separated angles")
    p.add_argument("--widths", type=_float_list, help="comma-separated pointer widths")
    _add_reg(p)
    _add_output(p)

    p = sub.add_parser("sweep", help="convergence ladder halving sigma and epsilon")
    _add_selection(p)
    p.add_argument("--phi", type=float, help="measured angle")
    p.add_argument("--levels", type=int, help="number of ladder levels")
    p.add_argument("--epsilon", type=float, help="Kraus width at the finest level")
    _add_reg(p)
    _add_grid(p)
    _add_output(p)

    p = sub.add_parser("contextuality", help="particle and ancilla quadratures, alone and jointly")
    _add_selection(p)
    p.add_argument("--phi", type=float, help="angle on particle 1")
    p.add_argument("--phi-prime", dest="phi_prime", type=float, help="angle on particle 2")
    p.add_argument("--widths", type=_float_list, help="two finest pointer widths")
    p.add_argument("--ladder-levels", dest="ladder_levels", type=int, help="width ladder levels")
    _add_reg(p)
    _add_output(p)

    p = sub.add_parser("wigner", help="Wigner function of a single-particle state")
    p.add_argument("--state", choices=("oscillator", "quadrature"), help="state family")
    p.add_argument("--k", type=int, help="oscillator level")
    p.add_argument("--xi", type=float, help="quadrature eigenvalue")
    p.add_argument("--phi", type=float, help="quadrature angle")
    p.add_argument("--width", type=float, help="quadrature eigenstate width")
    _add_grid(p)
    _add_output(p)
    return parser


def _load_config(path: str, command: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a JSON object")
    known = DEFAULTS[command]
    out = {}
    for key, value in data.items():
        name = key.lstrip("-").replace("-", "_")
        if name not in known:
            raise ConfigurationError(f"unknown config key {key!r} for {command}")
        out[name] = value
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit flags."""
    cfg = dict(DEFAULTS[args.command])
    if getattr(args, "config", None):
        cfg.update(_load_config(args.config, args.command))
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _selection(cfg: dict) -> ProtocolSelection:
    return ProtocolSelection(cfg["xplus"], cfg["pminus"], cfg["xminus"], cfg["pplus"])


def _threads() -> int:
    raw = os.environ.get("MEANKING_THREADS")
    if raw is None or raw == "":
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"MEANKING_THREADS must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigurationError(f"MEANKING_THREADS must be a positive integer, got {raw!r}")
    return value


def _positive_int(cfg, key):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
        raise ConfigurationError(f"{key} must be a positive integer, got {v!r}")
    return int(v)


def _run_standard(cfg):
    numerics = P.Numerics(cfg["grid_n"], cfg["grid_l"], cfg["sigma"], cfg["lambda"], cfg["epsilon"])
    numerics.validate()
    sel = _selection(cfg)
    spec = numerics.grid()
    G._check_selection(spec, sel)
    record = P.run_standard_game(sel, numerics, seed=int(cfg["phi_seed"]), phi=cfg["phi"])
    return record, S.record_dict(record, cfg)


def _run_conjunctive(cfg):
    sel = _selection(cfg)
    record = P.run_conjunctive_game(sel, cfg["angles"], O.PointerConfig(tuple(cfg["widths"])),
                                    O.Regularization(cfg["sigma"], cfg["lambda"]))
    return record, S.record_dict(record, cfg)


def _sweep_ladder(cfg):
    levels = _positive_int(cfg, "levels")
    s, lam, eps = cfg["sigma"], cfg["lambda"], cfg["epsilon"]
    return [(s * 2 ** (levels - 1 - k), lam / 2 ** (levels - 1 - k), eps * 2 ** (levels - 1 - k))
            for k in range(levels)]


def _run_sweep(cfg):
    sel = _selection(cfg)
    G._check_selection(G.make_grid(cfg["grid_n"], cfg["grid_l"]), sel)
    table = P.run_convergence_sweep(sel, cfg["phi"], _sweep_ladder(cfg), cfg["grid_n"], cfg["grid_l"],
                                    workers=_threads())
    return table, S.sweep_dict(table, cfg)


def _run_contextuality(cfg):
    sel = _selection(cfg)
    record = P.run_contextuality(sel, cfg["phi"], cfg["phi_prime"], O.PointerConfig(tuple(cfg["widths"])),
                                 O.Regularization(cfg["sigma"], cfg["lambda"]),
                                 ladder_levels=_positive_int(cfg, "ladder_levels"))
    return record, S.record_dict(record, cfg)


def wigner_record(cfg: dict) -> dict:
    """Wigner function of the configured state with normalization and marginal checks."""
    spec = G.make_grid(cfg["grid_n"], cfg["grid_l"])
    if cfg["state"] == "oscillator":
        k = int(cfg["k"])
        if not 0 <= k < spec.n:
            raise ConfigurationError(f"oscillator level must lie in [0, {spec.n}), got {k}")
        psi = G.oscillator_eigenstate(spec, k)
    elif cfg["state"] == "quadrature":
        psi = G.quadrature_eigenstate(spec, cfg["xi"], cfg["phi"], cfg["width"])
    else:
        raise ConfigurationError(f"unknown state {cfg['state']!r}")
    w = G.wigner(psi)
    dens_x = np.abs(psi.amplitudes) ** 2
    dens_p = np.abs(G.fourier(psi).amplitudes) ** 2
    checks = (
        P.Check("normalization_error", abs(float(np.sum(w) * spec.dx * spec.dp) - 1.0), 1e-8),
        P.Check("x_marginal_error", float(np.max(np.abs(w.sum(axis=1) * spec.dp - dens_x))), 1e-8),
        P.Check("p_marginal_error", float(np.max(np.abs(w.sum(axis=0) * spec.dx - dens_p))), 1e-8),
    )
    verdict = P.Verdict(checks)
    k0 = spec.n // 2
    return {
        "kind": "wigner", "config": cfg, "prediction": [], "peak": [], "width": [],
        "distribution": {"xi": spec.x_values.tolist(), "p": dens_x.tolist()},
        "verdict": S.verdict_dict(verdict),
        "extras": {"wigner": {"x": spec.x_values.tolist(), "p": spec.p_values.tolist(),
                              "w": w.tolist()}, "w_origin": float(w[k0, k0])},
    }, verdict


def _summary(doc: dict) -> str:
    lines = [f"kind: {doc['kind']}"]
    if doc["prediction"]:
        lines.append("prediction: " + ", ".join(f"{v:.9g}" for v in doc["prediction"]))
    if doc["peak"]:
        lines.append("peak: " + ", ".join(f"{v:.9g}" for v in doc["peak"]))
    if doc["width"]:
        lines.append("width: " + ", ".join(f"{v:.6g}" for v in doc["width"]))
    v = doc["verdict"]
    for c in v["checks"]:
        ok = (c["value"] > c["tolerance"]) if c["bound"] == "min" else (c["value"] <= c["tolerance"])
        rel = ">" if c["bound"] == "min" else "<="
        lines.append(f"  [{'PASS' if ok else 'FAIL'}] {c['name']} = {c['value']:.3e} (needs {rel} {c['tolerance']:.3e})")
    if v["reason"]:
        lines.append(f"  reason: {v['reason']}")
    lines.append(f"verdict: {'PASS' if v['pass'] else 'FAIL'}")
    return "\n".join(lines)


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg["format"] == "csv" and args.command not in ("sweep", "standard"):
            raise ConfigurationError("csv output is only defined for the sweep and standard subcommands")
        if args.command == "wigner":
            doc, verdict = wigner_record(cfg)
            result = None
        else:
            runner = {"standard": _run_standard, "conjunctive": _run_conjunctive, "sweep": _run_sweep,
                      "contextuality": _run_contextuality}[args.command]
            result, doc = runner(cfg)
            verdict = result.verdict
    except (ConfigurationError, DomainError) as exc:
        parser.print_usage(sys.stderr)
        print(f"meanking: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg["out"]:
        if cfg["format"] == "csv":
            text = (S.sweep_csv(result) if args.command == "sweep"
                    else S.distribution_csv(doc["distribution"]["xi"], doc["distribution"]["p"]))
        else:
            text = S.dumps(doc)
        S.write_text(cfg["out"], text)
    print(_summary(doc))
    return EXIT_PASS if verdict.passed else EXIT_FAIL


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
