"""Command-line interface.

::

    poc-mediate analytic   --config run.json [--x 1 --x0 0 --y 0 --c 0]
    poc-mediate estimate   --config run.json [--boot 1000 --seed 7]
    poc-mediate simulate   --config run.json --rows 10000 --out data.csv
    poc-mediate oracle     --config run.json [--mc 1000000 --compare]
    poc-mediate tri-oracle --config tri.json

A run is described by one JSON document (see ``README.md``); flags override
its query, bootstrap and oracle fields.  Errors are reported as a JSON object
on stderr with a nonzero exit status.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .errors import ConfigError, EmptyDataset, MissingColumn, PocMediateError, UnmappableValue
from .estimate import BootstrapConfig, Dataset, bootstrap_ci, estimate_decomposition
from .identify import decompose
from .model import COMPONENTS, SCHEMA, LinearScmSpec, PnsQuery
from .simulate import oracle_decompose, sample_dataset
from .trimediator import TRI_AGGREGATES, TRI_PATHS, TriScmSpec, tri_oracle_decompose

COMMANDS = ("analytic", "estimate", "simulate", "oracle", "tri-oracle")
MISSING = ("", "NA", "N/A", "NaN", "nan", "null")
MC_Z = 3.5

LABELS = {
    "t_pns": "T-PNS",
    "nd_pns": "ND-PNS",
    "ni_pns": "NI-PNS",
    "pns_xy": "PNS X->Y",
    "pns_xny": "PNS X->N->Y",
    "pns_xmny": "PNS X->M->N->Y",
    "pns_xmy": "PNS X->M->Y",
    "pns_xm3y": "PNS X->M3->Y",
    "pns_xm2y": "PNS X->M2->Y",
    "pns_xm2m3y": "PNS X->M2->M3->Y",
    "pns_xm1m2y": "PNS X->M1->M2->Y",
    "pns_xm1m2m3y": "PNS X->M1->M2->M3->Y",
    "pns_xm1y": "PNS X->M1->Y",
    "pns_xm1m3y": "PNS X->M1->M3->Y",
    "agg_xy": "(M1,M2) X->Y",
    "agg_xm2y": "(M1,M2) X->M2->Y",
    "agg_xm1m2y": "(M1,M2) X->M1->M2->Y",
    "agg_xm1y": "(M1,M2) X->M1->Y",
}


@dataclass
class RunConfig:
    command: str
    spec: dict | None = None
    query: dict | None = None
    data_path: str | None = None
    roles: dict | None = None
    encoding: dict = field(default_factory=dict)
    strict: bool = True
    link: str = "auto"
    bootstrap: int = 0
    level: float = 0.95
    seed: int = 0
    n_mc: int = 10 ** 6
    rows: int = 1000
    workers: int | None = None
    fmt: str = "text"
    out: str | None = None
    diagnostics: bool = False
    compare: bool = False
    timing: bool = True


# --------------------------------------------------------------------------- ingestion


def ingest_csv(path, roles: dict, encoding: dict | None = None, strict: bool = True) -> Dataset:
    """Read a CSV with a header row into a :class:`Dataset`.

    Only the columns named in ``roles`` are kept.  String cells are mapped
    through ``encoding[column][value]``.  Rows with a missing cell are dropped
    and counted in ``Dataset.dropped_rows``; a non-numeric cell without an
    encoding raises :class:`UnmappableValue` unless ``strict`` is false, in
    which case the row is dropped as well.
    """
    encoding = encoding or {}
    treatments = list(roles.get("treatments") or [])
    covariates = list(roles.get("covariates") or [])
    try:
        singles = [roles["mediator1"], roles["mediator2"], roles["outcome"]]
    except KeyError as exc:
        raise ConfigError(f"role map is missing {exc}") from None
    wanted = [*covariates, *treatments, *singles]

    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh, **_sniff(fh))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        for name in wanted:
            if name not in header:
                raise MissingColumn(f"column {name!r} referenced in roles is absent from {path}")
        idx = [header.index(n) for n in wanted]
        rows, dropped = [], 0
        for lineno, rec in enumerate(reader, start=1):
            if not rec or all(not v.strip() for v in rec):
                continue
            vals = []
            for name, j in zip(wanted, idx):
                cell = rec[j].strip() if j < len(rec) else ""
                if cell in MISSING:
                    vals = None
                    break
                v = _cell(cell, encoding.get(name))
                if v is None:
                    if strict:
                        raise UnmappableValue(name, lineno, cell)
                    vals = None
                    break
                vals.append(v)
            if vals is None:
                dropped += 1
                continue
            rows.append(vals)
    if not rows:
        raise EmptyDataset(f"no usable rows in {path} ({dropped} dropped)")
    return Dataset(tuple(wanted), np.array(rows), tuple(treatments), singles[0], singles[1],
                   singles[2], tuple(covariates), dropped_rows=dropped)


def _sniff(fh) -> dict:
    # the UCI student files use ';' as delimiter
    head = fh.readline()
    fh.seek(0)
    return {"delimiter": ";"} if head.count(";") > head.count(",") else {}


def _cell(cell: str, mapping: dict | None):
    if mapping is not None:
        key = cell.strip('"')
        if key in mapping:
            return float(mapping[key])
    try:
        return float(cell)
    except ValueError:
        return None


# --------------------------------------------------------------------------- config


def _parse_vec(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _parse_evidence(text: str) -> dict:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (2, 3):
        raise ConfigError("--evidence expects lo,hi[,closed|half]")
    closure = parts[2] if len(parts) == 3 else "half"
    if closure not in ("closed", "half", "half-open"):
        raise ConfigError(f"evidence closure must be 'closed' or 'half', got {closure!r}")

    def bound(s):
        return None if s.lower() in ("", "inf", "+inf", "-inf", "none") else float(s)

    return {"lower": bound(parts[0]), "upper": bound(parts[1]),
            "closure": "closed" if closure == "closed" else "half-open"}


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def load_preset(name: str) -> dict:
    """A configuration document shipped with the package (``student``)."""
    fname = f"{name}_default_config.json"
    res = resources.files("pocmediate") / "data" / fname
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}")
    return json.loads(res.read_text(encoding="utf-8"))


def build_config(args: argparse.Namespace) -> RunConfig:
    doc: dict = {}
    if args.preset:
        doc = load_preset(args.preset)
    if args.config:
        doc = {**doc, **_load_json(args.config)}
    if doc.get("schema", SCHEMA) != SCHEMA:
        raise ConfigError(f"unsupported schema {doc.get('schema')!r}")

    cfg = RunConfig(command=args.command)
    cfg.spec = doc.get("spec")
    if args.spec:
        cfg.spec = _load_json(args.spec)
    data = doc.get("data") or {}
    cfg.data_path = args.data or data.get("path")
    if cfg.data_path and args.config and not Path(cfg.data_path).is_absolute() and not args.data:
        cfg.data_path = str(Path(args.config).parent / cfg.data_path)
    cfg.roles = data.get("roles")
    cfg.encoding = data.get("encoding") or {}
    cfg.strict = bool(data.get("strict", True))
    cfg.link = data.get("link", "auto")

    q = dict(doc.get("query") or {})
    if args.x is not None:
        q["x"] = _parse_vec(args.x)
    if args.x0 is not None:
        q["x_prime"] = _parse_vec(args.x0)
    if args.y is not None:
        q["y"] = args.y
    if args.c is not None:
        q["c"] = _parse_vec(args.c)
    if args.evidence is not None:
        ev = _parse_evidence(args.evidence)
        old = q.get("evidence") or {}
        ev["x_e"] = old.get("x_e")
        q["evidence"] = ev
    if args.xe is not None:
        if not q.get("evidence"):
            raise ConfigError("--xe needs an evidence interval (--evidence)")
        q["evidence"] = {**q["evidence"], "x_e": _parse_vec(args.xe)}
    cfg.query = q or None

    boot = doc.get("bootstrap") or {}
    cfg.bootstrap = args.boot if args.boot is not None else int(boot.get("resamples", 0))
    cfg.level = float(boot.get("level", 0.95))
    orc = doc.get("oracle") or {}
    cfg.n_mc = args.mc if args.mc is not None else int(orc.get("n_mc", 10 ** 6))
    cfg.seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    cfg.rows = args.rows if args.rows is not None else int(doc.get("rows", 1000))
    cfg.workers = args.workers
    out = doc.get("output") or {}
    cfg.fmt = args.format or out.get("format", "text")
    cfg.out = args.out or out.get("path")
    cfg.diagnostics = args.diagnostics
    cfg.compare = args.compare
    cfg.timing = not args.no_timing
    return cfg


def _need(value, what: str):
    if value is None:
        raise ConfigError(f"this command needs {what}")
    return value


def _two_spec(cfg: RunConfig) -> LinearScmSpec:
    return LinearScmSpec.from_dict(_need(cfg.spec, "a spec (config 'spec' or --spec)"))


def _query(cfg: RunConfig) -> PnsQuery:
    q = _need(cfg.query, "a query (config 'query' or --x/--x0/--y)")
    return PnsQuery.from_dict(q)


# --------------------------------------------------------------------------- commands


def _report(cfg, method, query, components, gd=None, ci=None, n=None, flags=(), extra=None):
    meta = {"seed": cfg.seed, "n": n, "runtime_ms": None, "backend": _kernels.backend(),
            "version": __version__, "flags": list(flags)}
    if extra:
        meta.update(extra)
    gammas = delta = None
    if gd is not None:
        gammas = {"gamma1": gd.gamma1, "gamma2": gd.gamma2, "gamma3": gd.gamma3, "gamma4": gd.gamma4,
                  "gamma_total": gd.gamma_total}
        delta = gd.delta
        if cfg.diagnostics:
            meta["thetas"] = dict(gd.thetas)
            meta["evidence_cdf"] = [gd.evid_lower, gd.evid_upper]
    return {
        "query": query.to_dict() if query is not None else None,
        "method": method,
        "components": components,
        "gammas": gammas,
        "delta": delta,
        "ci": None if ci is None else {k: list(v) for k, v in ci.items()},
        "meta": meta,
    }


def run_analytic(cfg: RunConfig) -> dict:
    spec, query = _two_spec(cfg), _query(cfg)
    res = decompose(spec, query)
    return _report(cfg, "analytic", query, res.components(), res.diagnostics, flags=res.flags)


def run_estimate(cfg: RunConfig) -> dict:
    roles = _need(cfg.roles, "column roles (config 'data.roles')")
    ds = ingest_csv(_need(cfg.data_path, "a CSV path (config 'data.path' or --data)"), roles,
                    cfg.encoding, cfg.strict)
    query = _query(cfg)
    if cfg.bootstrap > 0:
        res = bootstrap_ci(ds, query, BootstrapConfig(cfg.bootstrap, cfg.level, cfg.seed, cfg.workers), cfg.link)
    else:
        res = estimate_decomposition(ds, query, cfg.link)
    return _report(cfg, "estimate", query, res.components(), res.diagnostics, res.ci, n=ds.n_obs,
                   flags=res.flags, extra={"dropped_rows": ds.dropped_rows, "bootstrap": cfg.bootstrap,
                                           "level": cfg.level})


def _mc_band(p: float, n: int) -> float:
    return MC_Z * math.sqrt(max(p * (1.0 - p), 0.0) / n)


def run_oracle(cfg: RunConfig) -> dict:
    spec, query = _two_spec(cfg), _query(cfg)
    res = oracle_decompose(spec, query, cfg.n_mc, cfg.seed, workers=cfg.workers)
    retained = int(res.flags[1].split("=")[1])
    comps = res.components()
    extra = {"retained": retained, "mc_band": {k: _mc_band(v, retained) for k, v in comps.items()}}
    if cfg.compare:
        extra["analytic"] = decompose(spec, query).components()
    return _report(cfg, "oracle", query, comps, n=cfg.n_mc, flags=res.flags[:1], extra=extra)


def run_tri_oracle(cfg: RunConfig) -> dict:
    spec = TriScmSpec.from_dict(_need(cfg.spec, "a tri-scm spec"))
    query = _query(cfg)
    res = tri_oracle_decompose(spec, query, cfg.n_mc, cfg.seed, workers=cfg.workers)
    comps = res.components()
    extra = {"retained": res.retained, "counts": list(res.counts),
             "mc_band": {k: _mc_band(v, res.retained) for k, v in comps.items()}}
    return _report(cfg, "tri-oracle", query, comps, n=cfg.n_mc, flags=("oracle",), extra=extra)


def run_simulate(cfg: RunConfig) -> str:
    return sample_dataset(_two_spec(cfg), cfg.rows, cfg.seed).to_csv()


# --------------------------------------------------------------------------- rendering


def _pct(v) -> str:
    return "" if v is None else f"{100.0 * v:.3f}%"


def _vec_text(v) -> str:
    return "(" + ", ".join(f"{float(t):g}" for t in v) + ")"


def _order(report: dict) -> list[str]:
    comps = report["components"]
    if report["method"] == "tri-oracle":
        return [k for k in ("t_pns", "nd_pns", "ni_pns", *TRI_AGGREGATES, *TRI_PATHS) if k in comps]
    return [k for k in COMPONENTS if k in comps]


def render_text(report: dict) -> str:
    q, meta = report["query"], report["meta"]
    lines = [f"method     {report['method']}"]
    if q is not None:
        ev = q["evidence"]
        ev_text = "none" if ev is None else (
            f"X={_vec_text(ev['x_e'])}, Y in [{ev['lower']}, {ev['upper']}"
            f"{']' if ev['closure'] == 'closed' else ')'}"
        )
        lines.append(f"query      x'={_vec_text(q['x_prime'])}  x={_vec_text(q['x'])}  y={q['y']:g}  "
                     f"c={_vec_text(q['c'])}  evidence={ev_text}")
    if meta.get("flags"):
        lines.append(f"flags      {', '.join(meta['flags'])}")
    lines.append(f"seed       {meta['seed']}" + (f"   n={meta['n']}" if meta.get("n") is not None else ""))
    lines.append("")

    ci = report["ci"]
    band = meta.get("mc_band")
    ref = meta.get("analytic")
    head = ["quantity", "estimate"]
    if ci:
        head += ["CI lower", "CI upper"]
    if band:
        head.append("MC band")
    if ref:
        head.append("analytic")
    rows = [head]
    for k in _order(report):
        r = [LABELS.get(k, k), _pct(report["components"][k])]
        if ci:
            r += [_pct(ci[k][0]), _pct(ci[k][1])]
        if band:
            r.append(f"+/-{100.0 * band[k]:.3f}%")
        if ref:
            r.append(_pct(ref.get(k)))
        rows.append(r)
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())

    if report["gammas"] is not None and meta.get("thetas") is not None:
        lines.append("")
        lines.append("diagnostics")
        for k, v in report["gammas"].items():
            lines.append(f"  {k:<16}{v: .10f}")
        lines.append(f"  {'delta':<16}{report['delta']: .10f}")
        for k, v in meta["thetas"].items():
            lines.append(f"  {'theta ' + k:<16}{v: .10f}")
    return "\n".join(lines) + "\n"


def render_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "value", "ci_lower", "ci_upper"])
    ci = report["ci"] or {}
    for k in _order(report):
        lo, hi = ci.get(k, (None, None))
        w.writerow([k, repr(report["components"][k]), "" if lo is None else repr(lo), "" if hi is None else repr(hi)])
    return buf.getvalue()


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, allow_nan=False) + "\n"
    if fmt == "csv":
        return render_csv(report)
    if fmt == "text":
        return render_text(report)
    raise ConfigError(f"unknown format {fmt!r}")


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="poc-mediate", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--preset", help="packaged configuration, e.g. 'student'")
    p.add_argument("--spec", help="model spec JSON (overrides the config's 'spec')")
    p.add_argument("--data", help="input CSV (overrides 'data.path')")
    p.add_argument("--x", help="treated level, comma separated")
    p.add_argument("--x0", help="baseline level x', comma separated")
    p.add_argument("--y", type=float, help="outcome threshold")
    p.add_argument("--c", help="covariate values, comma separated")
    p.add_argument("--evidence", help="outcome interval lo,hi[,closed|half]; 'inf' for open ends")
    p.add_argument("--xe", help="treatment value of the evidence, comma separated")
    p.add_argument("--boot", type=int, help="bootstrap resamples (0 disables)")
    p.add_argument("--seed", type=int)
    p.add_argument("--mc", type=int, help="Monte Carlo draws for the oracles")
    p.add_argument("--rows", type=int, help="rows to sample for 'simulate'")
    p.add_argument("--workers", type=int, help="threads for Monte Carlo chunks and bootstrap")
    p.add_argument("--format", choices=("text", "json", "csv"))
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--diagnostics", action="store_true", help="include raw gammas, delta and thetas")
    p.add_argument("--compare", action="store_true", help="oracle: also report the analytic values")
    p.add_argument("--no-timing", action="store_true", help="report runtime_ms as null")
    return p


def run(cfg: RunConfig) -> str:
    t0 = time.perf_counter()
    if cfg.command == "simulate":
        return run_simulate(cfg)
    handler = {"analytic": run_analytic, "estimate": run_estimate,
               "oracle": run_oracle, "tri-oracle": run_tri_oracle}[cfg.command]
    report = handler(cfg)
    if cfg.timing:
        report["meta"]["runtime_ms"] = round(1000.0 * (time.perf_counter() - t0), 3)
    return render(report, cfg.fmt)


def _fail(code: str, message: str, status: int = 2) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        text = run(cfg)
    except PocMediateError as exc:
        return _fail(exc.code, str(exc))
    except FileNotFoundError as exc:
        return _fail("file_not_found", str(exc))
    except (ValueError, TypeError, KeyError) as exc:
        return _fail("invalid_input", str(exc))
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
