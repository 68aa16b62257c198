"""Command-line surface: ``build``, ``verify`` and ``render``.

``build`` writes one coefficient file per stage (``stage_<k>.coef``), a JSON
manifest with the configuration, the fitted compacts and the construction
provenance, and the verification report ``report.txt``. ``verify`` rebuilds
the stages from those files alone and re-runs every check; with the same
sampling settings it reproduces ``report.txt`` byte for byte, because the
build report itself is computed from the re-parsed artifacts. ``render``
writes the escape-time pixmap of one stage (or of any coefficient file).

Exit codes: 0 success, 2 configuration or parse error, 3 build failure (the
stages finished so far and a failing report are still written), 4
verification failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .certify import certify_build
from .conformal import ConformalError, make_baker_model
from .construct import (Build, ConstructionError, EpsilonBudgetExhausted, PreconditionError, StageFunction,
                        _orbit_points, baker_epsilons, default_epsilons, invariant_epsilons,
                        make_invariant_target, prepare_baker, prepare_invariant, prepare_oscillating)
from .dynamics import escape_grid
from .geometry import Continuum, GeometryError, UnionRegion, region_from_description, step_count
from .polynomial import PolynomialFormatError, PolynomialMap
from .report import ReportFormatError, VerificationReport

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUILD = 3
EXIT_VERIFY = 4

MANIFEST = "manifest.json"
REPORT = "report.txt"
VERIFY_REPORT = "verify_report.txt"
MANIFEST_FORMAT = "fatoukit-manifest 1"
DEFAULT_SEED = 0
DEFAULT_SAMPLES = 256
DEFAULT_RESOLUTION = 1.0 / 64.0
DEFAULT_DELTA = {"invariant": 0.05, "baker": 0.5}
DEFAULT_PHI = "affine(-1,0)"
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ConfigError(ValueError):
    """Invalid configuration or unreadable input (exit status 2)."""


@dataclass
class RunConfig:
    """Everything a build depends on; stored verbatim in the manifest."""

    mode: str = "oscillating"
    stages: int = 1
    samples: int = DEFAULT_SAMPLES
    tol: float = 1.0
    seed: int = DEFAULT_SEED
    delta: float | None = None
    phi: str | None = None
    resolution: float = DEFAULT_RESOLUTION
    continuum: dict | None = None
    domain: dict | None = None

    def __post_init__(self):
        if self.mode not in ("oscillating", "invariant", "baker"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.stages < 1:
            raise ConfigError("--stages must be at least 1")
        if self.samples < 64:
            raise ConfigError("--samples must be at least 64")
        if not 0 < self.tol <= 1:
            raise ConfigError("--tol must lie in (0, 1]: it scales the default stage tolerances")
        if self.mode != "oscillating":
            if self.delta is None:
                self.delta = DEFAULT_DELTA[self.mode]
            if not self.delta > 0:
                raise ConfigError("--delta must be positive")
        if self.mode == "baker" and self.phi is None:
            self.phi = DEFAULT_PHI

    @property
    def phase(self) -> float:
        """Sampling offset (in units of one sample step) derived from the seed."""
        return 0.0 if self.seed == 0 else float(math.fmod(self.seed * GOLDEN, 1.0))


# ---------------------------------------------------------------------------
# Configuration -> build
# ---------------------------------------------------------------------------
def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(mode=args.mode, stages=args.stages, samples=args.samples, tol=args.tol, seed=args.seed,
                    delta=args.delta, phi=args.phi, resolution=args.resolution)
    if cfg.mode == "oscillating":
        if args.input:
            try:
                J = Continuum.from_text(_read_text(args.input), cfg.resolution)
            except GeometryError as exc:
                raise ConfigError(f"continuum {args.input}: {exc}") from exc
        else:
            J = Continuum.segment()
        cfg.continuum = J.describe()
    elif cfg.mode == "invariant" and args.input:
        try:
            cfg.domain = json.loads(_read_text(args.input))
            region_from_description(cfg.domain)
        except (ValueError, KeyError, TypeError, GeometryError) as exc:
            raise ConfigError(f"domain descriptor {args.input}: {exc}") from exc
    elif cfg.mode == "baker" and args.input:
        cfg.phi = _read_text(args.input).strip()
    return cfg


def _continuum(desc: dict) -> Continuum:
    return Continuum(np.array([complex(a, b) for a, b in desc["samples"]]), desc["resolution"], desc["kind"])


def prepare(cfg: RunConfig) -> Build:
    """Plan and geometry for ``cfg`` (no stage is fitted yet)."""
    K = cfg.stages
    try:
        if cfg.mode == "oscillating":
            return prepare_oscillating(_continuum(cfg.continuum), K, [cfg.tol * e for e in default_epsilons(K)])
        if cfg.mode == "invariant":
            D = region_from_description(cfg.domain) if cfg.domain else None
            target = make_invariant_target(D, cfg.delta)
            return prepare_invariant(target, K, [cfg.tol * e for e in invariant_epsilons(cfg.delta, K)])
        model = make_baker_model(cfg.phi, cfg.delta)
        return prepare_baker(model, K, [cfg.tol * e for e in baker_epsilons(cfg.delta, K)])
    except (PreconditionError, ConformalError, GeometryError, EpsilonBudgetExhausted) as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------
def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if v is None or isinstance(v, str):
        return v
    return str(v)


def stage_filename(k: int) -> str:
    return f"stage_{k}.coef"


def serialize(cfg: RunConfig, build: Build, status: str, error: str = "") -> dict:
    """Text of every artifact of ``build``: ``{filename: text}`` (report excluded)."""
    files = {}
    stages = []
    for s in build.stages:
        text = s.poly.to_text()
        name = stage_filename(s.k)
        files[name] = text
        stages.append({
            "k": s.k,
            "file": name,
            "sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
            "degree": int(s.poly.degree),
            "compacts": [{"label": lab, "tolerance": float(tol), "region": comp.describe()}
                         for lab, comp, tol in s.compacts],
            "provenance": _jsonable(s.provenance),
        })
    manifest = {
        "format": MANIFEST_FORMAT,
        "config": _jsonable(asdict(cfg)),
        "status": status,
        "error": error,
        "plan": _jsonable(build.plan.describe()),
        "markers": _jsonable({str(n): build.plan.marker_images[n] for n in sorted(build.plan.marker_images)}),
        "stages": stages,
    }
    if build.baker is not None:
        manifest["model"] = _jsonable(build.baker.describe())
    files[MANIFEST] = json.dumps(manifest, indent=1, sort_keys=True, ensure_ascii=False) + "\n"
    return files


def _compact(label: str, desc: dict, build: Build):
    if label == "U" and "ubar" in build.geo.info:
        return build.geo.info["ubar"]
    if label == "Kdelta" and build.invariant is not None:
        return build.invariant.K
    return region_from_description(desc)


def load_build(files: dict) -> tuple[RunConfig, Build, dict]:
    """Rebuild the configuration and stages from artifact texts (inverse of :func:`serialize`)."""
    try:
        manifest = json.loads(files[MANIFEST])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"manifest unreadable: {exc}") from exc
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ConfigError("not a fatoukit manifest")
    try:
        cfg = RunConfig(**manifest["config"])
    except TypeError as exc:
        raise ConfigError(f"manifest config: {exc}") from exc
    build = prepare(cfg)
    plan = build.plan
    stages = []
    for rec in manifest["stages"]:
        k = int(rec["k"])
        try:
            poly = PolynomialMap.from_text(files[rec["file"]])
        except KeyError as exc:
            raise ConfigError(f"missing coefficient file {rec['file']}") from exc
        except PolynomialFormatError as exc:
            raise ConfigError(f"{rec['file']}: {exc}") from exc
        compacts = [(c["label"], _compact(c["label"], c["region"], build), c["tolerance"]) for c in rec["compacts"]]
        stages.append(StageFunction(k, poly, compacts, UnionRegion(c for _, c, _ in compacts), rec["provenance"]))
    # marker orbits are replayed from the parsed stages, exactly as at build time
    plan.marker_images = {1: [plan.marker(1)]}
    for s in stages:
        if s.k + 1 <= plan.K:
            plan.marker_images[s.k + 1] = list(_orbit_points(s.poly, plan.marker(s.k + 1), step_count(s.k)))
    build.stages = stages
    return cfg, build, manifest


def certify_artifacts(cfg: RunConfig, build: Build, samples: int | None = None) -> VerificationReport:
    report = certify_build(build, samples=samples or cfg.samples, phase=cfg.phase)
    missing = cfg.stages - len(build.stages)
    report.bound("build.stages", "build", float(missing), 0.0, cfg.stages)
    return report


def write_atomic(out: Path, files: dict) -> None:
    """Write every file to a temporary name first, then rename them all into place."""
    out.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out)
            data = text if isinstance(text, bytes) else text.encode("utf-8")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.chmod(tmp, 0o666 & ~_umask())
            staged.append((tmp, out / name))
        for tmp, dst in staged:
            os.replace(tmp, dst)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def _read_dir(path: Path) -> dict:
    try:
        manifest = (path / MANIFEST).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path / MANIFEST}: {exc}") from exc
    files = {MANIFEST: manifest}
    try:
        names = [rec["file"] for rec in json.loads(manifest).get("stages", [])]
    except (ValueError, KeyError, AttributeError) as exc:
        raise ConfigError(f"manifest unreadable: {exc}") from exc
    for name in names:
        try:
            files[name] = (path / name).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read coefficient file {path / name}: {exc}") from exc
    return files


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def _summary(report: VerificationReport, stream) -> None:
    for c in report.failures():
        print(f"FAIL {c.id}: value {c.value:.6g}, tolerance {c.tolerance:.6g}", file=stream)
    print(f"{report.verdict}: {len(report.clauses) - len(report.failures())}/{len(report.clauses)} clauses",
          file=stream)


def cmd_build(cfg: RunConfig, out: Path) -> int:
    build = prepare(cfg)
    status, error = "complete", ""
    try:
        build.run(phase=cfg.phase)
    except ConstructionError as exc:
        build.stages = exc.stages
        status, error = "failed", str(exc)
        print(f"build failed: {exc}", file=sys.stderr)
    files = serialize(cfg, build, status, error)
    _, parsed, _ = load_build(files)
    report = certify_artifacts(cfg, parsed)
    files[REPORT] = report.to_text()
    write_atomic(out, files)
    _summary(report, sys.stdout)
    if status != "complete":
        return EXIT_BUILD
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_verify(src: Path, samples: int | None, out: Path | None) -> int:
    files = _read_dir(src)
    cfg, build, manifest = load_build(files)
    for rec in manifest["stages"]:
        digest = hashlib.sha256(files[rec["file"]].encode("utf-8")).hexdigest()
        if digest != rec.get("sha256"):
            print(f"warning: {rec['file']} differs from the file written at build time", file=sys.stderr)
    report = certify_artifacts(cfg, build, samples)
    text = report.to_text()
    dst = out if out is not None else src / VERIFY_REPORT
    write_atomic(dst.parent, {dst.name: text})
    stored = src / REPORT
    if stored.exists() and (samples is None or samples == cfg.samples):
        same = stored.read_bytes() == text.encode("utf-8")
        print("report matches the build report" if same else "report differs from the build report")
    _summary(report, sys.stdout)
    return EXIT_OK if report.passed else EXIT_VERIFY


def parse_window(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"window {text!r} is not four numbers") from exc
    if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
        raise ConfigError("window must be x0,x1,y0,y1")
    if not (vals[1] > vals[0] and vals[3] > vals[2]):
        raise ConfigError("window must have positive width and height")
    return vals


def parse_res(text: str) -> tuple:
    try:
        parts = [int(v) for v in text.lower().split("x")]
    except ValueError as exc:
        raise ConfigError(f"resolution {text!r} is not an integer or WxH") from exc
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2 or min(parts) < 1:
        raise ConfigError("resolution must be at least one pixel")
    return parts[0], parts[1]


def load_stage_poly(path: Path) -> PolynomialMap:
    """The last stage of a build directory, or a single coefficient file."""
    if path.is_dir():
        files = _read_dir(path)
        names = [rec["file"] for rec in json.loads(files[MANIFEST])["stages"]]
        if not names:
            raise ConfigError(f"{path} holds no stage")
        text = files[names[-1]]
    else:
        text = _read_text(str(path))
    try:
        return PolynomialMap.from_text(text)
    except PolynomialFormatError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def cmd_render(src: Path, window: tuple, res: tuple, max_iter: int, out: Path) -> int:
    if max_iter < 1:
        raise ConfigError("--max-iter must be positive")
    f = load_stage_poly(src)
    grid = escape_grid(f, window, res, max_iter)
    write_atomic(out.parent, {out.name: grid.to_ppm()})
    counts = np.bincount(grid.classes.ravel(), minlength=3)
    print(f"wrote {out}: {grid.width}x{grid.height}, bounded {counts[0]}, escaped {counts[1]}, overflow {counts[2]}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fatoukit", description="Build, verify and render staged polynomial approximations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="fit the stages and write coefficients, manifest and report")
    b.add_argument("--mode", choices=["oscillating", "invariant", "baker"], default="oscillating")
    b.add_argument("--stages", type=int, default=1)
    b.add_argument("--input", help="continuum file (oscillating), domain JSON (invariant) or map descriptor file (baker)")
    b.add_argument("--out", default="out", help="output directory")
    b.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="boundary samples per verification check")
    b.add_argument("--tol", type=float, default=1.0, help="factor in (0, 1] applied to the default stage tolerances")
    b.add_argument("--seed", type=int, default=DEFAULT_SEED, help="offset of the sampling sequences")
    b.add_argument("--delta", type=float, help="inset depth (invariant, default 0.05) or absorbing depth (baker, default 0.5)")
    b.add_argument("--phi", help=f"conformal map descriptor for baker mode (default {DEFAULT_PHI!r})")
    b.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION, help="declared sample gap of the continuum file")

    v = sub.add_parser("verify", help="re-run every check on a build directory")
    v.add_argument("--input", required=True, help="build directory")
    v.add_argument("--samples", type=int, help="override the boundary sample count")
    v.add_argument("--out", help=f"report path (default <input>/{VERIFY_REPORT})")

    r = sub.add_parser("render", help="write the escape-time pixmap of a stage")
    r.add_argument("--input", required=True, help="coefficient file or build directory (last stage)")
    r.add_argument("--window", default="-2,2,-2,2", help="x0,x1,y0,y1")
    r.add_argument("--res", default="256", help="N or WxH pixels")
    r.add_argument("--max-iter", type=int, default=64)
    r.add_argument("--out", default="escape.ppm")
    return p


def main(argv: list | None = None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        if args.command == "build":
            return cmd_build(config_from_args(args), Path(args.out))
        if args.command == "verify":
            if args.samples is not None and args.samples < 64:
                raise ConfigError("--samples must be at least 64")
            return cmd_verify(Path(args.input), args.samples, Path(args.out) if args.out else None)
        return cmd_render(Path(args.input), parse_window(args.window), parse_res(args.res), args.max_iter,
                          Path(args.out))
    except (ConfigError, ReportFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
