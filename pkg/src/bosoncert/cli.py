"""Command-line driver: ``bosoncert {matrix,sample,certify,witness,estimate,figure}``.

Effective settings are resolved as flags > ``--config`` JSON > defaults and are
echoed, with the seed and a config hash, into every file written.

Exit codes: 0 success, 2 precondition violation, 3 cap exceeded, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, certify, experiments
from .events import DEFAULT_CAP, CapExceededError, InputConfig
from .linalg import (
    ModeUnitary,
    make_cyclic_input,
    make_fourier,
    make_haar_random,
    make_walk_matrix,
    perturb,
)
from .rng import fresh_seed
from .samplers import SAMPLER_MODELS, SampleBatch, sample

EXIT_OK, EXIT_PRECONDITION, EXIT_CAP, EXIT_IO = 0, 2, 3, 4

DEFAULTS: dict[str, dict[str, Any]] = {
    "matrix": {"kind": "fourier", "p": 2, "steps": 8},
    "sample": {"model": "boson", "p": 2, "shots": 1000, "cap": DEFAULT_CAP, "steps": 8},
    "certify": {},
    "witness": {"p": 2, "draws": 10_000, "cap": DEFAULT_CAP, "steps": 8},
    "estimate": {},
    "figure": {"cap": DEFAULT_CAP, "draws": None},
}

FIGURE_DEFAULTS = {
    "fig2a": {"n": [3, 4], "ensemble": 100, "draws": 10_000},
    "fig2b": {"n": [3, 4], "m": 8, "steps": 8, "draws": 10_000},
    "fig3": {"n": [2, 3, 4, 5], "draws": 10_000, "sample_size": 10_000},
    "fig4": {"n": [3], "avg_dev": [0.005, 0.01, 0.02, 0.03, 0.05, 0.1], "draws": 400,
             "sample_size": 200},
}


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_PRECONDITION):
        super().__init__(message)
        self.code = code


def _ints(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    sup = argparse.SUPPRESS
    p.add_argument("--n", type=_ints, default=sup, help="particle number(s), comma separated")
    p.add_argument("--m", type=int, default=sup, help="mode count")
    p.add_argument("--p", type=int, default=sup, help="exponent for m = n**p")
    p.add_argument("--model", choices=SAMPLER_MODELS, default=sup)
    p.add_argument("--shots", type=int, default=sup)
    p.add_argument("--seed", type=int, default=sup)
    p.add_argument("--avg-dev", dest="avg_dev", type=_floats, default=sup,
                   help="average |delta|, comma separated for sweeps")
    p.add_argument("--ensemble", type=int, default=sup)
    p.add_argument("--cap", type=int, default=sup, help="largest enumerable event space")
    p.add_argument("--draws", type=int, default=sup, help="phase or perturbation draws")
    p.add_argument("--out", default=sup, help="output path (stdout if omitted)")
    p.add_argument("--config", default=sup, help="JSON file with default settings")


def _add_matrix_source(p: argparse.ArgumentParser) -> None:
    sup = argparse.SUPPRESS
    src = p.add_mutually_exclusive_group()
    src.add_argument("--fourier", action="store_true", default=sup,
                     help="Fourier matrix on m = n**p modes with cyclic input")
    src.add_argument("--haar", action="store_true", default=sup, help="Haar-random matrix")
    src.add_argument("--walk", action="store_true", default=sup, help="brick-wall walk matrix")
    src.add_argument("--matrix", default=sup, help="matrix JSON file")
    p.add_argument("--inputs", type=_ints, default=sup,
                   help="1-based input modes (default: cyclic for --fourier, else 1..n)")
    p.add_argument("--steps", type=int, default=sup)
    p.add_argument("--matrix-seed", dest="matrix_seed", type=int, default=sup)
    p.add_argument("--bad", type=int, default=sup, help="distinguishable particle (1-based)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bosoncert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("matrix", help="build and save a mode matrix")
    _add_common(p)
    p.add_argument("--kind", choices=("fourier", "haar", "walk", "perturbed"), default=argparse.SUPPRESS)
    p.add_argument("--steps", type=int, default=argparse.SUPPRESS)
    p.add_argument("--base", default=argparse.SUPPRESS, help="matrix JSON to perturb (default Fourier)")

    p = sub.add_parser("sample", help="draw an event batch")
    _add_common(p)
    _add_matrix_source(p)
    p.add_argument("--freeze-phases", dest="freeze_phases", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("certify", help="suppression-law violation of a batch")
    _add_common(p)
    p.add_argument("batch", help="JSONL event file")

    p = sub.add_parser("witness", help="P1, clouding and mean occupations")
    _add_common(p)
    _add_matrix_source(p)
    p.add_argument("--batch", default=argparse.SUPPRESS, help="JSONL event file instead of a model")

    p = sub.add_parser("estimate", help="error-budget calculators")
    _add_common(p)
    p.add_argument("--alpha", type=float, default=argparse.SUPPRESS, help="false-accept level")
    p.add_argument("--overlap", default=argparse.SUPPRESS,
                   help="JSON file with the n x n overlap matrix [[re, im], ...] or real entries")

    p = sub.add_parser("figure", help="data table for one figure")
    _add_common(p)
    p.add_argument("which", choices=experiments.FIGURES)
    p.add_argument("--sample-size", dest="sample_size", type=int, default=argparse.SUPPRESS)
    p.add_argument("--steps", type=int, default=argparse.SUPPRESS)
    return parser


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, the optional config file and explicit flags."""
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    cfg: dict[str, Any] = dict(DEFAULTS[args.command])
    if args.command == "figure":
        cfg.update(FIGURE_DEFAULTS[flags["which"]])
    if getattr(args, "config", None):
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except OSError as exc:
            raise CLIError(f"cannot read config {args.config}: {exc}", EXIT_IO) from exc
        except json.JSONDecodeError as exc:
            raise CLIError(f"config {args.config} is not valid JSON: {exc}") from exc
    cfg.update(flags)
    cfg = {k: v for k, v in cfg.items() if v is not None}
    if "n" in cfg and not isinstance(cfg["n"], list):
        cfg["n"] = [int(cfg["n"])]
    if "avg_dev" in cfg and not isinstance(cfg["avg_dev"], list):
        cfg["avg_dev"] = [float(cfg["avg_dev"])]
    if args.command in ("sample", "figure", "witness") and "seed" not in cfg:
        cfg["seed"] = fresh_seed()
    return cfg


def config_hash(cfg: dict[str, Any]) -> str:
    payload = {k: v for k, v in cfg.items() if k != "out"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _single(cfg: dict[str, Any], key: str) -> int:
    vals = cfg.get(key)
    if vals is None:
        raise CLIError(f"--{key} is required")
    if isinstance(vals, list):
        if len(vals) != 1:
            raise CLIError(f"--{key} takes a single value here")
        return int(vals[0])
    return int(vals)


def _emit(text: str, cfg: dict[str, Any]) -> None:
    out = cfg.get("out")
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise CLIError(f"cannot write {out}: {exc}", EXIT_IO) from exc
    else:
        sys.stdout.write(text)


def _meta(cfg: dict[str, Any]) -> dict[str, Any]:
    return {
        "version": __version__,
        "seed": cfg.get("seed", ""),
        "config_hash": config_hash(cfg),
        "config": json.dumps({k: v for k, v in cfg.items() if k != "out"}, sort_keys=True),
    }


def _setup(cfg: dict[str, Any]) -> tuple[ModeUnitary, InputConfig, str]:
    """Matrix, input and a short matrix reference from the source flags."""
    inputs = cfg.get("inputs")
    if cfg.get("matrix"):
        try:
            u = ModeUnitary.load(cfg["matrix"])
        except OSError as exc:
            raise CLIError(f"cannot read matrix {cfg['matrix']}: {exc}", EXIT_IO) from exc
        n = len(inputs) if inputs else _single(cfg, "n")
        inp = InputConfig(tuple(inputs) if inputs else tuple(range(1, n + 1)), m=u.m)
        return u, inp, f"file:{cfg['matrix']}"
    n = _single(cfg, "n") if "n" in cfg else len(inputs or ())
    if n < 1:
        raise CLIError("--n or --inputs is required")
    if cfg.get("haar"):
        m = int(cfg.get("m", n * n))
        seed = int(cfg.get("matrix_seed", cfg.get("seed", 0)))
        u, ref = make_haar_random(m, seed), f"haar:m={m}:seed={seed}"
    elif cfg.get("walk"):
        m, steps = int(cfg.get("m", 8)), int(cfg["steps"])
        u, ref = make_walk_matrix(m, steps), f"walk:m={m}:steps={steps}"
        if not inputs:
            return u, experiments.centered_input(n, m), ref
    else:
        p = int(cfg["p"])
        m = n**p if "m" not in cfg or cfg.get("fourier") else int(cfg["m"])
        u, ref = make_fourier(m), f"fourier:m={m}"
        if not inputs:
            if m != n**p:
                raise CLIError("the cyclic input needs m = n**p; pass --inputs otherwise")
            return u, make_cyclic_input(n, p), ref
    inp = InputConfig(tuple(inputs) if inputs else tuple(range(1, n + 1)), m=u.m)
    return u, inp, ref


# -- commands ----------------------------------------------------------------


def cmd_matrix(cfg: dict[str, Any]) -> int:
    kind = cfg["kind"]
    if kind == "walk":
        u = make_walk_matrix(int(cfg.get("m", 8)), int(cfg["steps"]))
    else:
        if "m" in cfg:
            m = int(cfg["m"])
        else:
            m = _single(cfg, "n") ** int(cfg["p"])
        if kind == "haar":
            u = make_haar_random(m, int(cfg.get("seed", 0)))
        else:
            u = ModeUnitary.load(cfg["base"]) if cfg.get("base") else make_fourier(m)
            if kind == "perturbed":
                devs = cfg.get("avg_dev")
                if not devs or len(devs) != 1:
                    raise CLIError("--avg-dev must be a single value for a perturbed matrix")
                u, _ = perturb(u, devs[0], int(cfg.get("seed", 0)))
    _emit(u.to_json() + "\n", cfg)
    return EXIT_OK


def cmd_sample(cfg: dict[str, Any]) -> int:
    model, shots, seed = cfg["model"], int(cfg["shots"]), int(cfg["seed"])
    if model == "uniform" and not any(cfg.get(k) for k in ("fourier", "haar", "walk", "matrix")):
        n = _single(cfg, "n")
        m = int(cfg["m"]) if "m" in cfg else n ** int(cfg["p"])
        batch = sample("uniform", None, None, shots, seed, n=n, m=m)
        ref = None
    else:
        u, inp, ref = _setup(cfg)
        batch = sample(model, u, inp, shots, seed, cap=int(cfg["cap"]), bad=cfg.get("bad"),
                       freeze_phases=bool(cfg.get("freeze_phases")))
    report = certify.violation(batch)
    out = cfg.get("out")
    summary = {"model": model, "n": batch.n, "m": batch.m, "shots": batch.shots, "seed": seed,
               "forbidden": report.n_forbidden, "violation": report.violation}
    if out:
        try:
            batch.save(out, {"matrix_ref": ref, **_meta(cfg)})
        except OSError as exc:
            raise CLIError(f"cannot write {out}: {exc}", EXIT_IO) from exc
        sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    else:
        for row in batch.events.tolist():
            sys.stdout.write(json.dumps({"k": row}) + "\n")
    return EXIT_OK


def cmd_certify(cfg: dict[str, Any]) -> int:
    path = Path(cfg["batch"])
    if not path.exists():
        raise CLIError(f"no such batch file: {path}", EXIT_IO)
    try:
        batch = SampleBatch.load(path, n=_single(cfg, "n") if "n" in cfg else None,
                                 m=cfg.get("m"))
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    report = certify.violation(batch)
    _emit(report.to_json() + "\n", cfg)
    return EXIT_OK


def cmd_witness(cfg: dict[str, Any]) -> int:
    if cfg.get("batch"):
        batch = SampleBatch.load(cfg["batch"])
        w = certify.witnesses(batch)
    else:
        u, inp, _ = _setup(cfg)
        w = certify.witnesses(cfg.get("model", "boson"), u, inp, cap=int(cfg["cap"]),
                              draws=int(cfg["draws"]), seed=int(cfg["seed"]), bad=cfg.get("bad"))
    _emit(w.to_json() + "\n", cfg)
    return EXIT_OK


def _read_overlap(path: str) -> np.ndarray:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CLIError(f"cannot read overlap matrix {path}: {exc}", EXIT_IO) from exc
    arr = np.asarray(raw, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1] if arr.ndim == 3 else arr.astype(complex)


def cmd_estimate(cfg: dict[str, Any]) -> int:
    n = _single(cfg, "n")
    m = int(cfg["m"]) if "m" in cfg else n * n
    result: dict[str, Any] = {"n": n, "m": m}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        rows = []
        for d in cfg.get("avg_dev", []):
            est = certify.v_dev_estimate(n, m, d)
            rows.append({"avg_dev": d, "p_approx": certify.p_approx(n, m, d),
                         "v_dev": est.general, "v_dev_closed_form": est.closed_form})
        if rows:
            result["deviation"] = rows
    if caught:
        result["warnings"] = sorted({str(w.message) for w in caught})
    if "alpha" in cfg:
        result["required_runs"] = certify.required_runs(n, float(cfg["alpha"]))
    if "overlap" in cfg:
        c = certify.distinguishability_coeffs(_read_overlap(cfg["overlap"]))
        result["indistinguishable_weight"] = certify.indistinguishable_weight(c)
        result["v_partial_bound"] = certify.violation_bound_partial(c, n)
        if rows:
            result["v_total"] = [certify.v_total(result["v_partial_bound"], r["v_dev"]) for r in rows]
    _emit(json.dumps(result, sort_keys=True) + "\n", cfg)
    return EXIT_OK


def cmd_figure(cfg: dict[str, Any]) -> int:
    which, seed, ns = cfg["which"], int(cfg["seed"]), cfg["n"]
    if which == "fig2a":
        rows = experiments.fig2a(ns, int(cfg["ensemble"]), int(cfg["draws"]), seed, int(cfg["cap"]))
    elif which == "fig2b":
        rows = experiments.fig2b(ns, int(cfg["m"]), int(cfg["steps"]), int(cfg["draws"]), seed,
                                 int(cfg["cap"]))
    elif which == "fig3":
        rows = experiments.fig3(ns, int(cfg["draws"]), seed, int(cfg["cap"]), int(cfg["sample_size"]))
    else:
        rows = []
        for n in ns:
            rows += experiments.fig4(n, cfg["avg_dev"], int(cfg["draws"]), int(cfg["sample_size"]), seed)
    _emit(certify.format_csv(rows, _meta(cfg)), cfg)
    return EXIT_OK


COMMANDS = {
    "matrix": cmd_matrix,
    "sample": cmd_sample,
    "certify": cmd_certify,
    "witness": cmd_witness,
    "estimate": cmd_estimate,
    "figure": cmd_figure,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
