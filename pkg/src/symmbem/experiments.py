"""Experiment presets, flat config files, runs and self-checks."""

from __future__ import annotations

import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .error_analysis import ConvergenceTable, MeshSpec, convergence_table
from .geometry import make_l_shape, scale_for_capacity, uniform_mesh
from .problems import HarmonicProblem

PRESETS = ("table1", "kop-uniform", "kop-graded", "custom")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "table1"
    Ns: tuple = ()
    trims: tuple = ()
    mesh: str = "uniform"
    kernel: Optional[tuple] = None
    betas: tuple = (5.0,)
    zone: float = 0.25
    output: str = ""
    jobs: int = 1
    radius_bound: float = 0.4
    error_order: int = 16
    corner_levels: int = 20
    dump_solution: bool = False


def _doubling(lo, hi):
    out = [lo]
    while out[-1] * 2 <= hi:
        out.append(out[-1] * 2)
    return tuple(out)


def preset_config(name: str) -> ExperimentConfig:
    if name == "table1":
        return ExperimentConfig("table1", _doubling(8, 1024), (0.0, 0.02, 0.07, 0.15))
    if name == "kop-uniform":
        return ExperimentConfig("kop-uniform", _doubling(128, 1024), (0.15,), kernel=(2, 2))
    if name == "kop-graded":
        # the kernel window must stay inside the uniform middle part of each
        # segment: trim >= zone + 2h, i.e. 0.375 at N = 128
        return ExperimentConfig("kop-graded", _doubling(128, 1024), (0.4,), mesh="combined",
                                kernel=(2, 2), betas=(3.0, 4.0, 5.0), zone=0.25)
    if name == "custom":
        return ExperimentConfig("custom")
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def _ints(v):
    return tuple(int(x) for x in v.replace(",", " ").split())


def _floats(v):
    return tuple(float(x) for x in v.replace(",", " ").split())


def _kernel(v):
    if v.strip().lower() in ("", "none"):
        return None
    lq = _ints(v)
    if len(lq) != 2 or min(lq) < 1:
        raise ValueError("kernel needs two positive integers l,q")
    return lq


def _bool(v):
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


_FIELDS = {
    "ns": ("Ns", _ints),
    "trims": ("trims", _floats),
    "trim": ("trims", _floats),
    "mesh": ("mesh", str.strip),
    "kernel": ("kernel", _kernel),
    "grading_exponent": ("betas", _floats),
    "zone": ("zone", float),
    "out": ("output", str.strip),
    "output": ("output", str.strip),
    "jobs": ("jobs", int),
    "radius_bound": ("radius_bound", float),
    "error_order": ("error_order", int),
    "corner_levels": ("corner_levels", int),
    "dump_solution": ("dump_solution", _bool),
}
_CUSTOM_REQUIRED = ("ns", "trims", "mesh", "kernel", "out")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Returns raw strings."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key != "preset" and key != "max_n" and key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        raw[key] = (value, lineno)
    return raw


def build_config(raw: dict, source: str = "<config>") -> ExperimentConfig:
    preset = raw.get("preset", ("table1", 0))[0]
    try:
        cfg = preset_config(preset)
    except ConfigError as exc:
        line = raw.get("preset", ("", 0))[1]
        raise ConfigError(f"{source}:{line}: {exc}") from None
    if preset == "custom":
        missing = [k for k in _CUSTOM_REQUIRED if k not in raw and not
                   (k == "trims" and "trim" in raw)]
        if missing:
            raise ConfigError(f"{source}: preset 'custom' needs {', '.join(missing)}")
    updates = {}
    for key, (value, lineno) in raw.items():
        if key in ("preset", "max_n"):
            continue
        name, conv = _FIELDS[key]
        try:
            updates[name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    cfg = replace(cfg, **updates)
    if "max_n" in raw:
        value, lineno = raw["max_n"]
        try:
            cap = int(value)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: max_n must be an integer") from None
        cfg = replace(cfg, Ns=tuple(n for n in cfg.Ns if n <= cap))
    validate(cfg, source)
    return cfg


def validate(cfg: ExperimentConfig, source: str = "<config>"):
    if not cfg.Ns:
        raise ConfigError(f"{source}: no mesh sizes left to run")
    if any(b != 2 * a for a, b in zip(cfg.Ns[:-1], cfg.Ns[1:])):
        raise ConfigError(f"{source}: Ns must double between entries, got {cfg.Ns}")
    if not cfg.trims or any(a < 0 for a in cfg.trims):
        raise ConfigError(f"{source}: trims must be a non-empty list of non-negative numbers")
    if cfg.mesh not in ("uniform", "graded", "combined"):
        raise ConfigError(f"{source}: mesh must be uniform, graded or combined")
    if cfg.jobs < 1:
        raise ConfigError(f"{source}: jobs must be >= 1")
    if not 0 < cfg.radius_bound < 1:
        raise ConfigError(f"{source}: radius_bound must lie in (0, 1)")


def standard_problem(radius_bound: float = 0.4) -> HarmonicProblem:
    """``Im(z^(2/3))`` on the capacity-scaled L-shape."""
    return HarmonicProblem.corner(scale_for_capacity(make_l_shape(), radius_bound))


@dataclass
class RunResult:
    tables: dict  # tag -> ConvergenceTable; tag "" is the main table
    markdown: str
    files: list = field(default_factory=list)


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Compute every table the config asks for (no files written)."""
    prob = standard_problem(cfg.radius_bound)
    quad = {"order": cfg.error_order, "corner_levels": cfg.corner_levels}
    keep = cfg.dump_solution

    def table(spec, kernel, title):
        t = convergence_table(prob, spec, cfg.Ns, cfg.trims, postprocess=kernel,
                              jobs=cfg.jobs, quad=quad, keep_solutions=keep)
        t.metadata["title"] = title
        return t

    kern = f"K-operator (l,q)={cfg.kernel}" if cfg.kernel else "Galerkin"
    tables = {}
    if cfg.mesh == "uniform":
        tables[""] = table(MeshSpec("uniform"), cfg.kernel, f"{kern} error, uniform meshes")
        if cfg.kernel:
            tables["raw"] = table(MeshSpec("uniform"), None, "Galerkin error, uniform meshes")
    else:
        best, best_rate = None, -np.inf
        for beta in cfg.betas:
            spec = MeshSpec(cfg.mesh, beta, cfg.zone)
            tag = f"beta{beta:g}"
            tables[tag] = table(spec, cfg.kernel, f"{kern} error, {spec.describe()}")
            rates = tables[tag].eocs(cfg.trims[0])
            rate = rates[-1] if rates and rates[-1] is not None else -np.inf
            if best is None or rate > best_rate:
                best, best_rate = tag, rate
        tables[""] = tables[best]
    md = []
    for tag, t in tables.items():
        if tag == "" and cfg.mesh != "uniform":
            continue
        md.append(t.to_markdown())
    if cfg.mesh != "uniform":
        md.append(f"best grading: {tables[''].metadata['mesh']}\n")
    return RunResult(tables, "\n".join(md))


def _atomic_write_all(files: dict):
    """Write every ``path -> text`` or none of them."""
    staged = []
    try:
        for path, text in files.items():
            d = os.path.dirname(os.path.abspath(path))
            os.makedirs(d, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def write_outputs(cfg: ExperimentConfig, result: RunResult) -> list:
    prefix = cfg.output or cfg.preset
    files = {}
    for tag, t in result.tables.items():
        name = prefix if tag == "" else f"{prefix}.{tag}"
        files[f"{name}.csv"] = t.to_csv()
    files[f"{prefix}.md"] = result.markdown
    if cfg.dump_solution:
        main = result.tables[""]
        sols = main.metadata.get("solutions", {})
        if sols:
            poly = next(iter(sols.values())).mesh.polygon
            files[f"{prefix}.polygon.txt"] = poly.to_text()
        for N, sol in sols.items():
            files[f"{prefix}.N{N}.solution.txt"] = sol.to_text()
    _atomic_write_all(files)
    return list(files)


# ---------------------------------------------------------------------------
# self-checks
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float

    def line(self) -> str:
        return (f"{'PASS' if self.passed else 'FAIL'}  {self.name}: "
                f"{self.value:.3e} (threshold {self.threshold:.1e})")


def matrix_oracle_error(mesh, tol=1e-11) -> float:
    """Worst relative deviation of the assembled matrix from nested adaptive quadrature."""
    from .operators import assemble_matrix
    from .quadrature import adaptive_integrate

    V = assemble_matrix(mesh)
    a, b = mesh.element_endpoints()
    L = mesh.lengths
    worst = 0.0
    n = mesh.n_elements
    for i in range(n):
        ti = (b[i] - a[i]) / L[i]
        for j in range(i, n):
            tj = (b[j] - a[j]) / L[j]

            def inner(s, i=i, j=j, ti=ti, tj=tj):
                x = a[i] + s * ti
                u = float(np.dot(x - a[j], tj))
                perp = x - a[j] - u * tj

                def f(r):
                    return np.log(np.hypot(r * tj[0] - perp[0], r * tj[1] - perp[1]))

                return adaptive_integrate(f, -u, L[j] - u, 0.1 * tol, points=[0.0])

            ref = -adaptive_integrate(lambda S: np.array([inner(s) for s in S]), 0.0, L[i], tol) / np.pi
            worst = max(worst, abs(V[i, j] - ref) / abs(ref))
    return worst


def verify(tighten: float = 1.0, matrix_n: int = 8) -> list:
    """Run the invariant checks; ``tighten`` divides every threshold."""
    from .operators import double_layer_apply
    from .postprocess import SmoothingKernel, convolve_polynomial, kernel_moments
    from .problems import single_layer_of_density

    checks = []
    prob = standard_problem()
    poly = prob.polygon

    mesh = uniform_mesh(poly, matrix_n)
    checks.append(Check(f"matrix oracle (N={matrix_n})", False,
                        matrix_oracle_error(mesh), 1e-8 / tighten))

    worst = 0.0
    for l in (1, 2, 3):
        for q in (1, 2, 3):
            m = kernel_moments(SmoothingKernel.build(l, q, 1.0), 2 * q - 1)
            m[0] -= 1.0
            worst = max(worst, float(np.max(np.abs(m))))
    checks.append(Check("kernel moment conditions", False, worst, 1e-12 / tighten))

    ker = SmoothingKernel.build(2, 2, 0.01)
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 100)
    coeffs = [0.3, -1.2, 0.7, 2.0]
    dev = np.max(np.abs(convolve_polynomial(ker, coeffs, x)
                        - np.polynomial.polynomial.polyval(x, coeffs)))
    checks.append(Check("polynomial reproduction (l,q)=(2,2)", False, float(dev), 1e-10 / tighten))

    one = double_layer_apply(poly, lambda y: np.ones(y.shape[:-1]), 1,
                             np.array([0.5 * poly.segments[1].length]))
    checks.append(Check("double layer of constant is -1", False, float(abs(one[0] + 1)), 1e-10 / tighten))

    worst = 0.0
    for j, frac in [(0, 0.5), (1, 0.3), (2, 0.6), (3, 0.2), (5, 0.9)]:
        s = frac * poly.segments[j].length
        f = float(prob.rhs(j, s)[0])
        v = single_layer_of_density(prob, j, s)
        worst = max(worst, abs(v - f) / abs(f))
    checks.append(Check("compatibility V psi = (I+K) g", False, worst, 1e-4 / tighten))

    for c in checks:
        c.passed = bool(c.value <= c.threshold)
    return checks
