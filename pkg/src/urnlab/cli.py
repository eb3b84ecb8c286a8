"""Command line interface: ``urnlab {analyze,simulate,verify,scan,report}``.

Exit status 0 on success, 2 when a verification fails statistically, 1 on
usage or model errors.  Every emitted file starts with ``#`` header lines
(tool version, model digest, seed, the run configuration); the timestamp sits
alone on the last header line so outputs are otherwise byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classes import decompose
from .dynamics import default_checkpoints, simulate
from .errors import UrnError
from .limitcov import limit_law
from .martingale import DEFAULT_CAP, expected_path
from .model import model_from_dict, validate, zoo
from .spectral import dual_bases, eigendecompose
from .verify import scan_csv, threshold_scan, verify_clt

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    family: str | None = None
    config: str | None = None
    params: dict = field(default_factory=dict)
    X0: list | None = None
    n: int = 10**4
    replicas: int = 10**4
    seed: int = 0
    horizon_cap: int = DEFAULT_CAP
    bins: int = 10
    rel_tol: float = 0.1
    z_crit: float = 3.0
    V: list | None = None
    covariance: bool = False
    checkpoints: list | None = None
    scan_from: int | None = None
    scan_to: int | None = None
    workers: int | None = None
    json_out: str | None = None
    csv_out: str | None = None
    out: str | None = None

    def reproducible(self) -> dict:
        d = asdict(self)
        for key in ("json_out", "csv_out", "out", "workers"):
            d.pop(key)
        return d


# -- parsing -----------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _model_args(p):
    src = p.add_argument_group("model")
    src.add_argument("--family", "--model", dest="family",
                     help="zoo family, e.g. friedman or 'mary(27)'")
    src.add_argument("--config", help="JSON model file with R (row-major) and X0")
    src.add_argument("--alpha", type=int)
    src.add_argument("--beta", type=int)
    src.add_argument("--q", type=int)
    src.add_argument("--m", type=int)
    src.add_argument("--X0", type=_int_list, help="initial composition, e.g. 1,1")


def _out_args(p):
    p.add_argument("--json", dest="json_out", help="write JSON to this path")
    p.add_argument("--csv", dest="csv_out", help="write CSV to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="urnlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"urnlab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    a = sub.add_parser("analyze", help="classes, spectrum, regime and limit covariance")
    _model_args(a)
    a.add_argument("--covariance", action="store_true", help="emit Sigma_V and A_V")
    a.add_argument("--V", type=_float_list, help="limit proportions for random-V models")
    _out_args(a)

    s = sub.add_parser("simulate", help="simulate replicas, CSV per checkpoint")
    _model_args(s)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--replicas", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--checkpoints", type=_int_list)
    s.add_argument("--workers", type=int)
    s.add_argument("--out", help="CSV path (default stdout)")

    v = sub.add_parser("verify", help="Monte-Carlo check of the limit covariance")
    _model_args(v)
    v.add_argument("--n", type=int, default=10**4)
    v.add_argument("--replicas", type=int, default=10**4)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--horizon-cap", type=int, default=DEFAULT_CAP)
    v.add_argument("--bins", type=int, default=10)
    v.add_argument("--rel-tol", type=float, default=0.1)
    v.add_argument("--z-crit", type=float, default=3.0)
    v.add_argument("--workers", type=int)
    _out_args(v)

    c = sub.add_parser("scan", help="threshold scan of the largest non-Perron real part")
    c.add_argument("--family", required=True, choices=["mary", "burn", "friedman"])
    c.add_argument("--from", dest="scan_from", type=int, required=True)
    c.add_argument("--to", dest="scan_to", type=int, required=True)
    c.add_argument("--beta", type=int, default=1, help="fixed beta for friedman (alpha scanned)")
    c.add_argument("--out", help="CSV path (default stdout)")

    r = sub.add_parser("report", help="tidy CSV of expectations, simulation moments and limits")
    _model_args(r)
    r.add_argument("--n", type=int, default=1000)
    r.add_argument("--replicas", type=int, default=1000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--V", type=_float_list)
    r.add_argument("--workers", type=int)
    r.add_argument("--out", help="CSV path (default stdout)")
    return parser


def parse_config(argv) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError("a command is required: analyze, simulate, verify, scan or report")
    d = vars(ns)
    cfg = RunConfig(command=ns.command)
    for key in ("family", "config", "X0", "n", "replicas", "seed", "horizon_cap", "bins",
                "rel_tol", "z_crit", "V", "covariance", "checkpoints", "scan_from",
                "scan_to", "workers", "json_out", "csv_out", "out"):
        if d.get(key) is not None:
            setattr(cfg, key, d[key])
    cfg.params = {k: d[k] for k in ("alpha", "beta", "q", "m") if d.get(k) is not None}
    if cfg.command != "scan" and (cfg.family is None) == (cfg.config is None):
        raise UsageError("give exactly one model source: --family or --config")
    if cfg.command != "scan" and cfg.config is not None and cfg.params:
        raise UsageError("family parameters cannot be combined with --config")
    for key in ("n", "replicas", "bins"):
        if getattr(cfg, key) < (0 if key == "bins" else 1):
            raise UsageError(f"--{key} out of range")
    if cfg.seed < 0 or cfg.horizon_cap < 1:
        raise UsageError("--seed must be >= 0 and --horizon-cap >= 1")
    return cfg


def model_of(cfg: RunConfig):
    if cfg.config is not None:
        try:
            doc = json.loads(Path(cfg.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg.config}: {exc}") from None
        if isinstance(doc, dict) and "family" in doc:
            model = zoo(doc)
        else:
            model = model_from_dict(doc)
        return model if cfg.X0 is None else model.with_initial(cfg.X0)
    return zoo(cfg.family, X0=cfg.X0, **cfg.params)


# -- output helpers -------------------------------------------------------

def header(cfg: RunConfig, model=None, extra=()) -> str:
    lines = [f"# urnlab {__version__}"]
    if model is not None:
        lines.append(f"# model {model.name} digest {model.digest()}")
    lines.append(f"# seed {cfg.seed}")
    lines.append("# config " + json.dumps(cfg.reproducible(), sort_keys=True))
    lines += [f"# {x}" for x in extra]
    lines.append("# timestamp " + _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    return "\n".join(lines) + "\n"


def meta_block(cfg: RunConfig, model=None) -> dict:
    meta = {"tool": "urnlab", "version": __version__, "seed": cfg.seed,
            "config": cfg.reproducible()}
    if model is not None:
        meta["model"] = model.to_dict()
        meta["digest"] = model.digest()
    meta["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return meta


def emit(text: str, path: str | None, stdout):
    if path is None or path == "-":
        stdout.write(text)
    else:
        Path(path).write_text(text)


def _fmt(x: complex) -> str:
    x = complex(x)
    if x.imag == 0:
        return f"{x.real:.10g}"
    return f"{x.real:.10g}{x.imag:+.10g}i"


# -- commands --------------------------------------------------------------

def cmd_analyze(cfg: RunConfig, stdout) -> int:
    model = model_of(cfg)
    report = validate(model)
    decomposition = decompose(model)
    lines = [f"model {model.name}  q={model.q}  r={model.r}  X0={model.X0.tolist()}",
             "assumptions:"]
    lines += ["  " + line for line in str(report).splitlines()]
    lines.append(f"classes (d={decomposition.d}, a={decomposition.a},"
                 f" b={decomposition.b}, c={decomposition.c}):")
    for row in decomposition.table():
        lines.append(f"  class {row['class']} {row['block']} type {row['type']}"
                     f" colours {row['colours']}")
    if not report.verdicts()["A1"].passed:
        stdout.write("\n".join(lines) + "\n")
        return EXIT_USAGE
    spectrum = eigendecompose(model, decomposition)
    lines.append("eigenvalues: " + ", ".join(_fmt(z) for z in spectrum.eigenvalues))
    lines.append("Re(lambda)/r: " + ", ".join(f"{x:.6g}" for x in spectrum.ratios))
    lines.append(f"p={spectrum.p}  regime {spectrum.regime.value}"
                 f" (scaling {spectrum.regime.scaling})")
    if spectrum.dominant_colours < 2:
        lines.append("note: a single dominant colour; the sqrt(n) theorem does not apply")
    stdout.write("\n".join(lines) + "\n")
    if not report.passed:
        return EXIT_USAGE

    if cfg.covariance:
        V = None if cfg.V is None else np.asarray(cfg.V, float)
        basis = dual_bases(spectrum, decomposition, model, V=V)
        law = limit_law(model, V, unconditional=V is None, decomposition=decomposition,
                        spectrum=spectrum, basis=basis)
        head = header(cfg, model)
        emit(head + "# Sigma_V\n" + law.to_csv("sigma") + "# A_V\n" + law.to_csv("A"),
             cfg.csv_out, stdout)
        doc = {"meta": meta_block(cfg, model), **json.loads(law.to_json())}
        if cfg.json_out:
            emit(json.dumps(doc, indent=2) + "\n", cfg.json_out, stdout)
        elif not cfg.csv_out:
            stdout.write("# metadata " + json.dumps(law.metadata(), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, stdout) -> int:
    model = model_of(cfg)
    decomposition = decompose(model)
    spectrum = eigendecompose(model, decomposition)
    basis = dual_bases(spectrum, decomposition, model, V=np.full(model.q, 1 / model.q))
    cps = cfg.checkpoints if cfg.checkpoints is not None else default_checkpoints(cfg.n)
    batch = simulate(model, cfg.n, cfg.replicas, cfg.seed, checkpoints=cps,
                     workers=cfg.workers)
    proj = batch.projections(basis)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    q = model.q
    w.writerow(["replica", "n"] + [f"x{j + 1}" for j in range(q)]
               + [f"pi{k + 1}_{part}" for k in range(q) for part in ("re", "im")])
    for i in range(batch.replicas):
        for c, n in enumerate(batch.checkpoints):
            row = [i, int(n)] + [int(x) for x in batch.counts[i, c]]
            for z in proj[i, c]:
                row += [repr(float(z.real)), repr(float(z.imag))]
            w.writerow(row)
    emit(header(cfg, model, [f"batch digest {batch.digest()}"]) + buf.getvalue(),
         cfg.out, stdout)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, stdout) -> int:
    model = model_of(cfg)
    report = verify_clt(model, cfg.n, cfg.replicas, cfg.seed, horizon_cap=cfg.horizon_cap,
                        bins=cfg.bins, workers=cfg.workers, rel=cfg.rel_tol,
                        z_crit=cfg.z_crit)
    meta = dict(report.meta)
    runtime = meta.pop("runtime_s")
    stdout.write(f"{model.name}: n={cfg.n} N={cfg.replicas} seed={cfg.seed}"
                 f" n_est={meta['n_est']} regime {meta['regime']}"
                 f" ({meta['scaling']}) runtime {runtime:.1f}s\n")
    stdout.write(report.summary() + "\n")
    if cfg.json_out:
        doc = report.to_dict()
        doc["meta"] = {**meta_block(cfg, model), **meta}
        Path(cfg.json_out).write_text(json.dumps(doc, indent=2, default=str) + "\n")
    if cfg.csv_out:
        Path(cfg.csv_out).write_text(header(cfg, model) + report.to_csv())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_scan(cfg: RunConfig, stdout, beta: int = 1) -> int:
    lo, hi = cfg.scan_from, cfg.scan_to
    if lo > hi:
        raise UsageError("--from must not exceed --to")
    if cfg.family == "friedman":
        params = [(a, beta) for a in range(lo, hi + 1) if a >= -1 and a + beta > 0]
    else:
        params = range(max(lo, 2), hi + 1)
    rows = threshold_scan(cfg.family, params)
    emit(header(cfg) + scan_csv(rows), cfg.out, stdout)
    return EXIT_OK


def cmd_report(cfg: RunConfig, stdout) -> int:
    model = model_of(cfg)
    decomposition = decompose(model)
    spectrum = eigendecompose(model, decomposition)
    cps = default_checkpoints(cfg.n)
    batch = simulate(model, cfg.n, cfg.replicas, cfg.seed, checkpoints=cps,
                     workers=cfg.workers)
    mean = expected_path(model, cps)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "n", "i", "j", "value"])
    for k, z in enumerate(spectrum.eigenvalues):
        w.writerow(["eigenvalue_re", "", k + 1, "", repr(float(z.real))])
        w.writerow(["eigenvalue_im", "", k + 1, "", repr(float(z.imag))])
    for c, n in enumerate(cps):
        props = batch.counts[:, c, :] / model.balls_at(int(n))
        for j in range(model.q):
            w.writerow(["expected_proportion", int(n), j + 1, "",
                        repr(float(mean[c, j] / model.balls_at(int(n))))])
            w.writerow(["mean_proportion", int(n), j + 1, "", repr(float(props[:, j].mean()))])
            w.writerow(["var_proportion", int(n), j + 1, "", repr(float(props[:, j].var()))])
    V = None if cfg.V is None else np.asarray(cfg.V, float)
    basis = dual_bases(spectrum, decomposition, model, V=V)
    try:
        law = limit_law(model, V, unconditional=V is None, decomposition=decomposition,
                        spectrum=spectrum, basis=basis)
    except ValueError:
        law = None
    if law is not None:
        for (i, j), x in np.ndenumerate(law.A):
            w.writerow(["A_V", "", i + 1, j + 1, repr(float(x))])
    emit(header(cfg, model) + buf.getvalue(), cfg.out, stdout)
    return EXIT_OK


def run(cfg: RunConfig, stdout=None, beta: int = 1) -> int:
    stdout = sys.stdout if stdout is None else stdout
    if cfg.command == "scan":
        return cmd_scan(cfg, stdout, beta)
    return {"analyze": cmd_analyze, "simulate": cmd_simulate, "verify": cmd_verify,
            "report": cmd_report}[cfg.command](cfg, stdout)


def main(argv=None, stdout=None, stderr=None) -> int:
    stderr = sys.stderr if stderr is None else stderr
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
        beta = 1
        if cfg.command == "scan" and "beta" in cfg.params:
            beta = cfg.params["beta"]
        return run(cfg, stdout, beta)
    except UsageError as exc:
        stderr.write(f"urnlab: usage error: {exc}\n")
        return EXIT_USAGE
    except (UrnError, ValueError) as exc:
        stderr.write(f"urnlab: {type(exc).__name__}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
