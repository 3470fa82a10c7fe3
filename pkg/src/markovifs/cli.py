"""Command-line interface: ``markovifs <command> [options]``.

Every command writes its JSON result to ``--out`` and echoes it on stdout.
Failures print a JSON error document and exit with the code of the error
class (2 usage, 3 invalid instance, 4 resolution or guard, 5 internal).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (check_osc, connectivity_verdict, lc_profile, non_lc_witness, piece_graph,
                       separating_curve)
from .attractor import AttractorApprox, grid_for, iterate_attractor, iterations_for
from .errors import DomainError, GuardError, InstanceError, InvariantError, MarkovIfsError
from .instances import SCHEMA_VERSION, list_instances, load_instance, make_instance, validate_document
from .setrep import connected_components

log = logging.getLogger("markovifs")

DEFAULT_RES = 256
DEFAULT_SEED = 0x5EED
DEFAULT_C = 0.25
MAX_CELLS = 1 << 27
COMMANDS = ("render", "check-osc", "connectivity", "lc-profile", "witness", "separate", "list-instances",
            "report")


class UsageError(MarkovIfsError):
    exit_code = 2


@dataclass
class RunConfig:
    command: str
    instance: Optional[str] = None
    instance_path: Optional[str] = None
    resolution: int = DEFAULT_RES
    iterations: Optional[int] = None
    target_error: Optional[float] = None
    tol: Optional[float] = None
    out: str = "out"
    workers: int = 1
    seed: int = DEFAULT_SEED
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        r = self.resolution
        if not (16 <= r <= 4096 and r & (r - 1) == 0):
            raise UsageError("resolution must be a power of two in [2^4, 2^12]", resolution=r)
        if self.target_error is not None and not self.target_error > 0:
            raise UsageError("target error must be > 0", target_error=self.target_error)
        if self.iterations is not None and self.iterations < 1:
            raise UsageError("iterations must be >= 1", iterations=self.iterations)
        if self.workers < 1:
            raise UsageError("workers must be >= 1", workers=self.workers)

    def to_dict(self) -> dict:
        return asdict(self)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _point(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated coordinates, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="markovifs", description="Markov IFS attractors on voxel grids: render, check the "
                     "open set condition and diagnose (local) connectivity.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    def common(p, needs_instance=True):
        if needs_instance:
            src = p.add_mutually_exclusive_group(required=True)
            src.add_argument("--instance", help="bundled instance name (see list-instances)")
            src.add_argument("--json", dest="instance_path", metavar="PATH", help="instance JSON document")
            p.add_argument("--res", type=int, default=DEFAULT_RES,
                           help=f"cells per axis, power of two in [16, 4096] (default {DEFAULT_RES})")
            it = p.add_mutually_exclusive_group()
            it.add_argument("--iters", type=int, help="Hutchinson iterations k")
            it.add_argument("--err", type=float, help="target contraction error lip^k * diam "
                            "(default: one cell edge)")
            p.add_argument("--tol", type=float, help="tolerance override (connectivity dilation / piece edges)")
            p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
            p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")
        p.add_argument("--out", default="out", help="output directory (default ./out)")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("render", help="iterate the attractor and write PGM (2D) or XYZ (3D) files")
    common(p)
    p = sub.add_parser("check-osc", help="sampled open set condition check")
    common(p)
    p.add_argument("--shrink", type=float, help="shrink of the open set (default two lattice steps)")
    p = sub.add_parser("connectivity", help="component count, certified verdict and level-1 piece graph")
    common(p)
    p = sub.add_parser("lc-profile", help="connecting radius eps* for sampled nearby pairs")
    common(p)
    p.add_argument("--delta-max", type=float, help="largest pair distance (default 8 cells)")
    p = sub.add_parser("witness", help="search for pairs witnessing non-local-connectivity")
    common(p)
    p.add_argument("--c", type=float, default=DEFAULT_C, help=f"threshold on eps* (default {DEFAULT_C})")
    p.add_argument("--count", type=int, default=5, help="pairs to report (default 5)")
    p = sub.add_parser("separate", help="closed polyline separating two components (2D)")
    common(p)
    p.add_argument("--x", type=_point, help="point of the first component, e.g. 0.1,0.1")
    p.add_argument("--y", type=_point, help="point of the second component")
    p = sub.add_parser("list-instances", help="catalogue of bundled instances")
    common(p, needs_instance=False)
    p = sub.add_parser("report", help="render, OSC, connectivity, profile and witness with SVG figures and a TSV")
    common(p)
    p.add_argument("--c", type=float, default=DEFAULT_C, help=f"witness threshold (default {DEFAULT_C})")
    return parser


def config_from_args(args) -> RunConfig:
    params = {}
    for key in ("shrink", "delta_max", "c", "count", "x", "y"):
        if getattr(args, key, None) is not None:
            params[key] = getattr(args, key)
    return RunConfig(
        command=args.command,
        instance=getattr(args, "instance", None),
        instance_path=getattr(args, "instance_path", None),
        resolution=getattr(args, "res", DEFAULT_RES),
        iterations=getattr(args, "iters", None),
        target_error=getattr(args, "err", None),
        tol=getattr(args, "tol", None),
        out=args.out,
        workers=getattr(args, "workers", 1),
        seed=getattr(args, "seed", DEFAULT_SEED),
        params=params,
    )


# -- helpers ------------------------------------------------------------

class Run:
    """Instance, grid and attractor for one config, computed lazily."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out = Path(config.out)
        self.out.mkdir(parents=True, exist_ok=True)
        if config.instance_path:
            try:
                text = Path(config.instance_path).read_text()
            except OSError as exc:
                raise InstanceError(f"cannot read instance file: {exc.strerror}", path=config.instance_path)
            self.ifs = load_instance(text)
            self.bundle = None
        else:
            self.bundle = make_instance(config.instance)
            self.ifs = self.bundle.ifs
        cells = config.resolution ** self.ifs.dim
        if cells > MAX_CELLS:
            raise GuardError("grid too large for this dimension", cells=cells, limit=MAX_CELLS)
        self.geometry = grid_for(self.ifs, config.resolution)
        self._approx = None

    @property
    def name(self):
        return self.config.instance or self.ifs.label or Path(self.config.instance_path).stem

    @property
    def iterations(self) -> int:
        if self.config.iterations is not None:
            return self.config.iterations
        lo, hi = self.ifs.bounding_box()
        diam = float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))
        eps = self.config.target_error if self.config.target_error is not None else self.geometry.h
        return iterations_for(self.ifs, eps, diam)

    @property
    def approx(self) -> AttractorApprox:
        if self._approx is None:
            log.info("iterating %s: k=%d on %s", self.name, self.iterations, self.geometry.shape)
            self._approx = iterate_attractor(self.ifs, self.geometry, self.iterations)
        return self._approx

    def document(self, result: dict) -> dict:
        return {"schema_version": SCHEMA_VERSION, "command": self.config.command,
                "config": self.config.to_dict(), "result": result}

    def write_json(self, name: str, doc: dict) -> Path:
        path = self.out / name
        path.write_text(dump(doc))
        return path


def dump(doc) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


# -- commands -----------------------------------------------------------

def cmd_render(run: Run) -> dict:
    A = run.approx
    files = []
    if run.ifs.dim == 2:
        writes = [("union.pgm", A.union)] + [(f"piece_{i}.pgm", p) for i, p in enumerate(A.pieces, 1)]
        for name, s in writes:
            (run.out / name).write_bytes(s.to_pgm())
            files.append(name)
    else:
        writes = [("union.xyz", A.union)] + [(f"piece_{i}.xyz", p) for i, p in enumerate(A.pieces, 1)]
        for name, s in writes:
            (run.out / name).write_text(s.to_xyz())
            files.append(name)
    result = {"instance": run.name, "manifest": A.manifest(), "files": files}
    run.write_json("manifest.json", run.document(result))
    return result


def cmd_check_osc(run: Run) -> dict:
    rep = check_osc(run.ifs, resolution=run.config.resolution, shrink=run.config.params.get("shrink"))
    return rep.to_dict()


def cmd_connectivity(run: Run) -> dict:
    A = run.approx
    tol = run.config.tol
    verdict = connectivity_verdict(A.union, A.error_bound if tol is None else tol / 2.0)
    pieces = piece_graph(run.ifs, 1, A, tol=None if tol is None else max(tol, 2 * A.error_bound))
    return {"instance": run.name, "error_bound": A.error_bound, "verdict": verdict.to_dict(),
            "piece_graph": pieces.to_dict()}


def cmd_lc_profile(run: Run) -> dict:
    prof = lc_profile(run.approx.union, delta_max=run.config.params.get("delta_max"), seed=run.config.seed,
                      workers=run.config.workers)
    with open(run.out / "lc_profile.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        d = run.ifs.dim
        w.writerow([f"x{k}" for k in range(d)] + [f"y{k}" for k in range(d)] + ["delta", "eps_star"])
        for row in prof.to_rows():
            w.writerow([repr(float(v)) for v in row])
    out = prof.to_dict()
    out["max_ratio"] = prof.max_ratio()
    return out


def cmd_witness(run: Run) -> dict:
    c = run.config.params.get("c", DEFAULT_C)
    res = non_lc_witness(run.approx.union, c, run.config.params.get("count", 5), seed=run.config.seed)
    return res.to_dict()


def _default_points(A):
    labels, n = connected_components(A)
    if n < 2:
        raise DomainError("not separated: the set has a single component")
    first = [np.argwhere(labels == k)[0] for k in (1, 2)]
    return [A.centers(c[None, :])[0].tolist() for c in first]


def cmd_separate(run: Run) -> dict:
    A = run.approx.union
    if A.dim != 2:
        raise UsageError("separate needs a planar instance")
    x, y = run.config.params.get("x"), run.config.params.get("y")
    if x is None or y is None:
        dx, dy = _default_points(A)
        x = dx if x is None else x
        y = dy if y is None else y
    curve = separating_curve(A, x, y)
    (run.out / "separate.svg").write_text(curve.to_svg(A))
    out = curve.to_dict()
    out["svg"] = "separate.svg"
    return out


def cmd_list_instances(run_config: RunConfig) -> dict:
    return {"instances": list_instances()}


def cmd_report(run: Run) -> dict:
    from . import plotting

    A = run.approx
    render = cmd_render(run)
    osc = cmd_check_osc(run) if run.ifs.open_set is not None else None
    conn = cmd_connectivity(run)
    prof = lc_profile(A.union, seed=run.config.seed, workers=run.config.workers)
    c = run.config.params.get("c", DEFAULT_C)
    wit = non_lc_witness(A.union, c, seed=run.config.seed)
    figures = [
        Path(plotting.plot_set(A.union, run.out / "attractor.svg", run.name, A.pieces if A.union.dim == 2 else None)).name,
        Path(plotting.plot_lc_profile(prof.records, run.out / "lc_profile.svg", "local connectivity profile")).name,
        Path(plotting.plot_lc_profile(wit.pairs, run.out / "witness.svg", wit.verdict, threshold=c)).name,
    ]
    rows = [
        ("instance", run.name),
        ("dimension", run.ifs.dim),
        ("resolution", run.config.resolution),
        ("iterations", A.k),
        ("occupied_cells", A.union.count),
        ("error_bound", A.error_bound),
        ("certified_bound", A.certified_bound),
        ("osc_verdict", "n/a" if osc is None else osc["verdict"]),
        ("components", conn["verdict"]["components"]),
        ("connected_at_tolerance", conn["verdict"]["connected_at_tolerance"]),
        ("lc_pairs", len(prof.records)),
        ("lc_max_ratio", prof.max_ratio()),
        ("witness_threshold", c),
        ("witness_verdict", wit.verdict),
        ("witness_pairs", len(wit.pairs)),
    ]
    with open(run.out / "report.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["metric", "value"])
        for k, v in rows:
            w.writerow([k, repr(v) if isinstance(v, float) else v])
    return {"instance": run.name, "render": render, "check_osc": osc, "connectivity": conn,
            "lc_profile": {"pairs": len(prof.records), "max_ratio": prof.max_ratio(), "sampling": prof.sampling},
            "witness": wit.to_dict(), "figures": figures, "table": "report.tsv"}


_HANDLERS = {
    "render": cmd_render,
    "check-osc": cmd_check_osc,
    "connectivity": cmd_connectivity,
    "lc-profile": cmd_lc_profile,
    "witness": cmd_witness,
    "separate": cmd_separate,
    "report": cmd_report,
}


def _validated(doc: dict) -> dict:
    doc = _plain(doc)
    try:
        validate_document(doc, "report.schema.json")
    except InstanceError as exc:
        raise InvariantError("output does not match the report schema", **exc.details) from None
    return doc


def execute(config: RunConfig) -> dict:
    """Run one command and return its schema-validated JSON document (also written to ``config.out``)."""
    if config.command == "list-instances":
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"schema_version": SCHEMA_VERSION, "command": config.command, "config": config.to_dict(),
               "result": cmd_list_instances(config)}
        doc = _validated(doc)
        (out / "list_instances.json").write_text(dump(doc))
        return doc
    run = Run(config)
    doc = _validated(run.document(_HANDLERS[config.command](run)))
    if config.command != "render":
        run.write_json(config.command.replace("-", "_") + ".json", doc)
    return doc


def error_document(exc: MarkovIfsError, config: Optional[RunConfig]) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "exit_code": exc.exit_code, **exc.to_dict()}
    if config is not None:
        doc["config"] = config.to_dict()
    return _plain(doc)


def main(argv=None) -> int:
    parser = build_parser()
    config = None
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing command", commands=list(COMMANDS))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        config = config_from_args(args)
        doc = execute(config)
    except MarkovIfsError as exc:
        sys.stdout.write(dump(error_document(exc, config)))
        return exc.exit_code
    except MemoryError:
        sys.stdout.write(dump(error_document(GuardError("out of memory"), config)))
        return GuardError.exit_code
    except Exception as exc:  # anything unexpected is an internal failure, still reported as JSON
        log.exception("internal error")
        err = MarkovIfsError(f"internal error: {type(exc).__name__}: {exc}")
        sys.stdout.write(dump(error_document(err, config)))
        return err.exit_code
    sys.stdout.write(dump(doc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
