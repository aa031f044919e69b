"""Command line pipeline: ingest -> build -> reduce -> enumerate -> evaluate -> report.

Stages talk through files in one run directory, so long stages can be resumed:
``run`` skips any stage whose output already exists unless ``--force``.

Exit codes: 0 success, 2 configuration error, 3 stage failure, 4 incomplete
(a node cap, limit or timeout was hit).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import enumeration, evaluator, lattice, mertens, reduction, zeros
from .zeros import Mode

log = logging.getLogger("mertens_enum")

EXIT_OK, EXIT_CONFIG, EXIT_STAGE, EXIT_INCOMPLETE = 0, 2, 3, 4
FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage


@dataclass
class RunConfig:
    zeros_path: str = ""
    mode: str = "hp"
    sign: str = "neg"
    N: int = 30
    nu: int = 60
    nu_y: int = 45
    nu_t: int = 10
    radius_scale: float = 1.6
    beta_start: int = 20
    beta_end: int = 20
    delta: float = 0.99
    svp_timeout_secs: float | None = None
    gso_precision: int | None = None
    pruning: str = "linear-beta"
    dedup_b1: bool = True
    node_cap: int | None = None
    limit: int | None = None
    precision_digits: int | None = None  # minimum digits demanded of the zero file
    height_cutoff: float | None = None
    eval_bits: int = 128
    out: str = "run"
    jobs: int = 1
    seed: int = 0

    def validate(self):
        try:
            Mode(self.mode)
            mertens.Sign(self.sign)
            mertens.MertensParams(self.N, self.nu, self.nu_y, self.nu_t, self.radius_scale,
                                  self.mode, self.sign)
            reduction.ReductionParams(self.delta, self.beta_start, self.beta_end)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.pruning not in ("none", "linear-beta"):
            raise ConfigError(f"unknown pruning {self.pruning!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not self.zeros_path:
            raise ConfigError("--zeros is required")
        return self

    @property
    def min_digits(self) -> int:
        # working rule: nu/3 + 20 decimal digits
        return self.precision_digits if self.precision_digits is not None else self.nu // 3 + 20

    def params(self) -> mertens.MertensParams:
        return mertens.MertensParams(self.N, self.nu, self.nu_y, self.nu_t, self.radius_scale,
                                     self.mode, self.sign)

    def to_dict(self) -> dict:
        # reals travel as decimal strings
        return {k: repr(v) if isinstance(v, float) else v for k, v in dataclasses.asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - set(_FLOAT_FIELDS) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for k in _FLOAT_FIELDS:
            if data.get(k) is not None:
                try:
                    data[k] = float(data[k])
                except (TypeError, ValueError):
                    raise ConfigError(f"{k}: not a number: {data[k]!r}") from None
        return cls(**data)


_FLOAT_FIELDS = ("radius_scale", "delta", "svp_timeout_secs", "height_cutoff")


# file helpers -----------------------------------------------------------------

def _write_atomic(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, obj):
    _write_atomic(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise StageError("io", f"missing artifact {path}") from None


def _read_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _check_version(obj, path):
    if obj.get("format_version") != FORMAT_VERSION:
        raise StageError("io", f"{path}: format version {obj.get('format_version')} != {FORMAT_VERSION}")


def _mark_incomplete(out: Path, why: str):
    with open(out / "INCOMPLETE", "a", encoding="utf-8") as fh:
        fh.write(why + "\n")


def load_dataset(cfg: RunConfig) -> zeros.ZeroDataset:
    zs = zeros.parse_zero_file(cfg.zeros_path, cfg.min_digits)
    cutoff = cfg.height_cutoff
    if cutoff is None and Mode(cfg.mode) is Mode.QN:
        cutoff = None
    return zeros.weight_dataset(zs, cfg.mode, cutoff)


# stages ---------------------------------------------------------------------

def stage_ingest(cfg: RunConfig, out: Path) -> int:
    ds = load_dataset(cfg)
    _write_json(out / "ingest.json", {
        "format_version": FORMAT_VERSION,
        "zeros_path": str(cfg.zeros_path),
        "zeros_sha256": zeros.file_sha256(cfg.zeros_path),
        "mode": ds.mode.value,
        "height_cutoff": ds.height_cutoff,
        "count": len(ds),
        "precision_digits": ds.precision_digits,
        "heaviest": [str(z.base.gamma) for z in ds.zeros[:10]],
    })
    return EXIT_OK


def _instance(cfg: RunConfig):
    ds = load_dataset(cfg)
    return ds, mertens.build_instance(zeros.take_top(ds, cfg.N), cfg.params())


def stage_build(cfg: RunConfig, out: Path) -> int:
    ingest = _read_json(out / "ingest.json")
    _check_version(ingest, out / "ingest.json")
    _, inst = _instance(cfg)
    manifest = mertens.instance_manifest(inst, ingest["zeros_sha256"])
    manifest["format_version"] = FORMAT_VERSION
    manifest["config"] = cfg.to_dict()
    manifest["created"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    lattice.dump_basis(inst.basis, out / "basis.txt")
    _write_atomic(out / "target.txt", " ".join(str(x) for x in inst.target_vector) + "\n")
    _write_json(out / "manifest.json", manifest)
    return EXIT_OK


def stage_reduce(cfg: RunConfig, out: Path, load_basis=None, dump_basis=None) -> int:
    basis = lattice.load_basis(load_basis or out / "basis.txt")
    params = reduction.ReductionParams(cfg.delta, cfg.beta_start, min(cfg.beta_end, basis.dim[0]),
                                       svp_timeout=cfg.svp_timeout_secs, gso_precision=cfg.gso_precision)
    t0 = time.monotonic()
    res = reduction.bkz_progressive(
        basis, params, on_tour=lambda r: log.info("tour beta=%d |b1|^2=%d", r.beta, r.b1_norm_sq))
    lattice.dump_basis(res.basis, out / "reduced.txt")
    if dump_basis:
        lattice.dump_basis(res.basis, dump_basis)
    lattice.dump_basis(lattice.LatticeBasis(res.transform.unimodular), out / "transform.txt")
    prof = lattice.profile(res.basis)
    _write_json(out / "reduction.json", {
        "format_version": FORMAT_VERSION,
        "tours": [{"beta": t.beta, "b1_norm_sq": str(t.b1_norm_sq), "skipped_blocks": t.skipped_blocks,
                   "elapsed": f"{t.elapsed:.3f}"} for t in res.tours],
        "profile": {"log_norms": [f"{x:.6f}" for x in prof.log_norms],
                    "normalized_first": f"{prof.normalized_first:.6f}"},
    })
    skipped = sum(t.skipped_blocks for t in res.tours)
    if skipped:
        _mark_incomplete(out, f"reduce: {skipped} SVP blocks skipped on timeout")
    return EXIT_OK


def stage_enumerate(cfg: RunConfig, out: Path, load_basis=None) -> int:
    manifest = _read_json(out / "manifest.json")
    _check_version(manifest, out / "manifest.json")
    _, inst = _instance(cfg)
    basis = lattice.load_basis(load_basis or out / "reduced.txt")
    if lattice.determinant(basis) != inst.det:
        raise StageError("enumerate", "reduced basis does not span the instance lattice")
    target = enumeration.EnumTarget.from_ambient(basis, inst.target_vector)
    K = float(inst.K)
    m = basis.dim[0]
    prof = (enumeration.linear_beta_profile(m, K) if cfg.pruning == "linear-beta"
            else enumeration.full_profile(m, K))
    gso = lattice.gram_schmidt(basis)
    run = enumeration.enumerate_bdd(basis, gso, target, prof, dedup_b1=cfg.dedup_b1,
                                    limit=cfg.limit, node_cap=cfg.node_cap)
    lines = []
    for cand in run:
        cy = mertens.recover_y(cand, inst)
        lines.append(json.dumps({
            "coeffs": [str(c) for c in cand.coeffs],
            "dist_sq": str(cand.dist_sq),
            "residual_sq": str(cy.residual_sq),
            "x": str(cy.x),
            "y": evaluator.fraction_to_decimal(cy.y),
        }, sort_keys=True))
    _write_atomic(out / "candidates.jsonl", "".join(line + "\n" for line in lines))
    _write_json(out / "enumerate.json", {
        "format_version": FORMAT_VERSION, "count": len(lines), "nodes": run.nodes,
        "incomplete": run.incomplete, "rejected_float_accepts": run.rejected,
        "gaussian_estimate": f"{enumeration.gaussian_estimate(inst.det, prof):.6e}",
    })
    if run.incomplete:
        _mark_incomplete(out, "enumerate: node cap or limit reached")
        return EXIT_INCOMPLETE
    return EXIT_OK


_WORKER_DS = None


def _worker_init(cfg_json):
    global _WORKER_DS
    _WORKER_DS = load_dataset(RunConfig.from_json(cfg_json))


def _evaluate_one(args):
    y_str, mode, bits = args
    y = Fraction(evaluator.to_fraction(y_str))
    if y < 0:
        rep = {"y": evaluator.fraction_to_decimal(y), "mode": mode, "hit": False, "in_range": False,
               "h_lo": None, "h_hi": None, "note": "negative y"}
        return rep
    ds = _WORKER_DS
    if Mode(mode) is Mode.QN:
        h = evaluator.eval_qN(y, ds, len(ds), bits)
    else:
        h = evaluator.eval_h(y, ds, bits)
    return evaluator.to_bound(y, h, Mode(mode)).to_json()


def stage_evaluate(cfg: RunConfig, out: Path, candidates=None, output=None) -> int:
    src = Path(candidates or out / "candidates.jsonl")
    rows = _read_jsonl(src)
    jobs = [(r["y"], cfg.mode, cfg.eval_bits) for r in rows]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.jobs, initializer=_worker_init, initargs=(cfg.to_json(),)) as ex:
            reports = list(ex.map(_evaluate_one, jobs, chunksize=4))
    else:
        _worker_init(cfg.to_json())
        reports = [_evaluate_one(j) for j in jobs]
    for r, src_row in zip(reports, rows):
        for key in ("x", "dist_sq"):
            if key in src_row:
                r[key] = src_row[key]
    dest = Path(output or out / "reports.jsonl")
    _write_atomic(dest, "".join(json.dumps(r, sort_keys=True) + "\n" for r in reports))
    return EXIT_OK


def stage_report(cfg: RunConfig, out: Path, reports=None, stream=None) -> int:
    stream = stream or sys.stdout
    reps = _read_jsonl(Path(reports or out / "reports.jsonl"))
    evaluated = [r for r in reps if r.get("h_lo") is not None]
    best = max(evaluated, key=lambda r: min(abs(float(r["h_lo"])), abs(float(r["h_hi"]))), default=None)
    hits = [r for r in evaluated if r["hit"]]
    best_hit = min(hits, key=lambda r: Fraction(evaluator.to_fraction(r["y"])), default=None)
    summary = {
        "format_version": FORMAT_VERSION,
        "candidates": len(reps),
        "evaluated": len(evaluated),
        "hits": len(hits),
        "best_abs_h": None if best is None else {"y": best["y"], "h_lo": best["h_lo"], "h_hi": best["h_hi"]},
        "best_bound": None if best_hit is None else {
            "y": best_hit["y"], "bound_simple": best_hit["bound_simple"],
            "bound_refined": best_hit["bound_refined"], "bound_widened": best_hit["bound_widened"]},
    }
    _write_json(out / "summary.json", summary)
    print(f"{'y':>34}  {'h':>22}  {'y+sqrt(y)':>12}  hit", file=stream)
    for r in evaluated:
        mid = (float(r["h_lo"]) + float(r["h_hi"])) / 2
        bs = r["bound_simple"]
        print(f"{r['y']:>34}  {mid:>22.12f}  {float(bs) if bs else float('nan'):>12.4e}  {r['hit']}", file=stream)
    if all("dist_sq" in r for r in evaluated) and len(evaluated) >= 2 and (out / "manifest.json").exists():
        manifest = _read_json(out / "manifest.json")
        ds = load_dataset(cfg)
        by_gamma = {str(z.base.gamma): z for z in ds.zeros}
        lattice_zeros = [by_gamma[g] for g in manifest["zeros_gamma"]]
        triples = []
        for r in evaluated:
            cand = enumeration.EnumCandidate((), int(r["dist_sq"]), ())
            cy = mertens.CandidateY(int(r.get("x", 0)), evaluator.to_fraction(r["y"]), 0, int(r["dist_sq"]), (0, 0))
            h = evaluator.IntervalValue(evaluator.mpf(r["h_lo"]), evaluator.mpf(r["h_hi"]), r["precision_bits"])
            triples.append((cand, cy, h))
        corr = evaluator.correlation_report(triples, lattice_zeros)
        corr.write_csv(out / "correlation.csv")
        summary["rank_corr_partial_vs_h"] = f"{corr.rank_corr_partial:.6f}"
        summary["rank_corr_dist_vs_abs_h"] = f"{corr.rank_corr_dist:.6f}"
        _write_json(out / "summary.json", summary)
    return EXIT_OK


STAGES = ["ingest", "build", "reduce", "enumerate", "evaluate", "report"]
OUTPUTS = {"ingest": "ingest.json", "build": "manifest.json", "reduce": "reduced.txt",
           "enumerate": "candidates.jsonl", "evaluate": "reports.jsonl", "report": "summary.json"}


def run_pipeline(cfg: RunConfig, force: bool = False, dump_basis=None) -> int:
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg_path = out / "config.json"
    if cfg_path.exists() and not force and cfg_path.read_text(encoding="utf-8") != cfg.to_json():
        raise ConfigError(f"{cfg_path} holds a different configuration; use --force or a new --out")
    _write_atomic(cfg_path, cfg.to_json())
    (out / "INCOMPLETE").unlink(missing_ok=True)  # re-added below if still incomplete
    status = EXIT_OK
    for name in STAGES:
        if not force and (out / OUTPUTS[name]).exists():
            log.info("stage %s: output present, skipping", name)
            continue
        log.info("stage %s", name)
        try:
            fn = globals()[f"stage_{name}"]
            rc = fn(cfg, out, dump_basis=dump_basis) if name == "reduce" else fn(cfg, out)
        except (StageError, ConfigError):
            raise
        except Exception as exc:
            _mark_incomplete(out, f"{name}: {exc}")
            raise StageError(name, exc) from exc
        status = max(status, rc)
    return status


# argument parsing ---------------------------------------------------------------

_FLAGS = {
    "zeros_path": ("--zeros", str), "mode": ("--mode", str), "sign": ("--sign", str),
    "N": ("--n", int), "nu": ("--nu", int), "nu_y": ("--nu-y", int), "nu_t": ("--nu-t", int),
    "radius_scale": ("--radius-scale", float), "beta_start": ("--beta-start", int),
    "beta_end": ("--beta-end", int), "delta": ("--delta", float),
    "svp_timeout_secs": ("--svp-timeout-secs", float), "gso_precision": ("--gso-precision", int),
    "pruning": ("--pruning", str), "node_cap": ("--node-cap", int), "limit": ("--limit", int),
    "precision_digits": ("--precision-digits", int), "height_cutoff": ("--height-cutoff", float),
    "eval_bits": ("--eval-bits", int), "out": ("--out", str), "jobs": ("--jobs", int),
    "seed": ("--seed", int),
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; explicit flags win")
    for name, (flag, typ) in _FLAGS.items():
        kw = {"dest": name, "type": typ, "default": None}
        if name == "mode":
            kw["choices"] = ["hp", "hstr", "qn"]
        elif name == "sign":
            kw["choices"] = ["pos", "neg"]
        elif name == "pruning":
            kw["choices"] = ["none", "linear-beta"]
        p.add_argument(flag, **kw)
    p.add_argument("--dedup-b1", dest="dedup_b1", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mertens-enum", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ["run"] + STAGES:
        p = sub.add_parser(name)
        _add_common(p)
        if name == "run":
            p.add_argument("--force", action="store_true")
        if name in ("run", "reduce"):
            p.add_argument("--dump-basis")
        if name in ("reduce", "enumerate"):
            p.add_argument("--load-basis")
        if name == "evaluate":
            p.add_argument("--candidates", help="JSONL with at least a 'y' field per line")
            p.add_argument("--output")
        if name == "report":
            p.add_argument("--reports")
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            cfg = RunConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    for name in list(_FLAGS) + ["dedup_b1"]:
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if cfg.zeros_path:
        cfg.zeros_path = str(cfg.zeros_path)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = config_from_args(args).validate()
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            return run_pipeline(cfg, force=args.force, dump_basis=args.dump_basis)
        fn = globals()[f"stage_{args.command}"]
        kw = {}
        if args.command == "reduce":
            kw = {"load_basis": args.load_basis, "dump_basis": args.dump_basis}
        elif args.command == "enumerate":
            kw = {"load_basis": args.load_basis}
        elif args.command == "evaluate":
            kw = {"candidates": args.candidates, "output": args.output}
        elif args.command == "report":
            kw = {"reports": args.reports}
        try:
            return fn(cfg, out, **kw)
        except (StageError, ConfigError):
            raise
        except Exception as exc:
            raise StageError(args.command, exc) from exc
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
