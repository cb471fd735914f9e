"""Weight-pair generators, per-pair theorem checks, sweeps and refinement
studies.  Every runner returns plain rows (dicts of strings) ready for CSV."""
from __future__ import annotations

import csv
import io
import json
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ..constants import (CSV_FIELDS, a2_alpha, cancellation_constant,
                         cancellation_constant_dual, kappa_cube_testing,
                         kappa_cube_testing_dual, one_tailed_a2, one_tailed_a2_dual,
                         poisson)
from ..exceptions import ConfigError, DegenerateMeasureError
from ..geometry import Cube
from ..measures import (GridMeasure, a_infinity_report, doubling_stats, from_density,
                        load_measure)
from ..norms import good_lambda_verify, search_family, strong_norm
from ..operators import GridFunction
from .config import ExperimentConfig


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


# --- weight pairs -----------------------------------------------------------------

def _corner_rect_integral(a, p, q):
    """Integral of |x|^a over [0, p] x [0, q] in the plane."""
    if p <= 0 or q <= 0:
        return 0.0
    t0 = math.atan2(q, p)
    e = a + 2.0
    i1 = integrate.quad(lambda t: (1.0 / math.cos(t)) ** e, 0.0, t0)[0]
    i2 = integrate.quad(lambda t: (1.0 / math.sin(t)) ** e, t0, math.pi / 2)[0]
    return (p ** e * i1 + q ** e * i2) / e


def _origin_cell_mass(a, lo, hi):
    """Exact integral of |x|^a over the cell [lo, hi] (which touches the origin)."""
    n = len(lo)
    if n == 1:
        F = lambda x: math.copysign(abs(x) ** (a + 1) / (a + 1), x)
        return F(hi[0]) - F(lo[0])
    if n == 2:
        total = 0.0
        for xs in (hi[0], -lo[0]):
            for ys in (hi[1], -lo[1]):
                total += _corner_rect_integral(a, max(xs, 0.0), max(ys, 0.0))
        return total
    raise NotImplementedError("exact origin cells are implemented for n <= 2")


def power_weight(a: float, root: Cube, level: int) -> GridMeasure:
    """|x|^a dx by the midpoint rule, with cells touching the origin integrated exactly."""
    n = root.n
    if a <= -n:
        raise ValueError(f"|x|^a is not locally integrable in R^{n} for a={a}")
    with np.errstate(divide="ignore"):
        mu = from_density(lambda x: np.where(np.linalg.norm(x, axis=1) > 0,
                                             np.linalg.norm(x, axis=1), 1.0) ** a,
                          root, level)
    masses = mu.flat.copy()
    w = mu.cell_width
    lo = mu.centers - w / 2
    hi = mu.centers + w / 2
    touch = np.nonzero(np.all((lo <= 0) & (hi >= 0), axis=1))[0]
    for i in touch:
        masses[i] = _origin_cell_mass(a, lo[i], hi[i])
    return GridMeasure(root, level, masses)


def power_weight_pair(a: float, b: float, root: Cube, level: int):
    """(sigma, omega) = (|x|^a dx, |x|^b dx) discretized on the grid."""
    return power_weight(a, root, level), power_weight(b, root, level)


def _pair_measures(cfg: ExperimentConfig, a, b, level):
    if a is None:
        sigma, omega = load_measure(cfg.sigma_file), load_measure(cfg.omega_file)
        sigma.check_aligned(omega)
        if sigma.resolution != level:
            raise ConfigError(f"measure files have L={sigma.resolution}, run asks for L={level}")
        return sigma, omega
    return power_weight_pair(a, b, cfg.root(), level)


def test_function(spec: str, grid) -> GridFunction:
    """``one`` or ``indicator:LO:HI`` (cells with every center coordinate in [LO, HI])."""
    key, _, rest = spec.partition(":")
    if key == "one":
        return GridFunction.constant(grid, 1.0)
    if key == "indicator":
        try:
            lo, hi = (float(v) for v in rest.split(":"))
        except ValueError:
            raise ConfigError(f"bad test function {spec!r}") from None
        c = grid.centers
        return GridFunction.like(grid, np.all((c >= lo) & (c <= hi), axis=1).astype(float))
    raise ConfigError(f"unknown test function {spec!r}")


# --- per-pair evaluation ---------------------------------------------------------------

ALL_COLUMNS = ("A2", "A2_one_tailed", "A2_one_tailed_dual", "RWT", "BICT", "strong_norm",
               "testing", "testing_dual", "good_lambda", "doubling", "poisson_root")


@dataclass
class TheoremCheckRow:
    pair_id: str
    a: float | None
    b: float | None
    L: int
    values: dict = field(default_factory=dict)
    status: str = "ok"

    def get(self, key, default=float("nan")):
        return self.values.get(key, default)


def _derived(v: dict, cfg: ExperimentConfig, alpha: float, n: int):
    if "RWT" in v and "A2" in v:
        v["RWT2_over_A2"] = v["RWT"] ** 2 / v["A2"] if v["A2"] > 0 else float("inf")
        v["A2_over_RWT2"] = v["A2"] / v["RWT"] ** 2 if v["RWT"] > 0 else float("inf")
    if "BICT" in v and "A2" in v:
        v["BICT2_over_A2"] = v["BICT"] ** 2 / v["A2"] if v["A2"] > 0 else float("inf")
    keys = ("strong_norm", "A2_one_tailed", "A2_one_tailed_dual", "testing", "testing_dual")
    if all(k in v for k in keys):
        bound = (math.sqrt(v["A2_one_tailed"] + v["A2_one_tailed_dual"])
                 + v["testing"] + v["testing_dual"])
        v["tp_bound"] = bound
        v["tp_ratio"] = v["strong_norm"] / bound if bound > 0 else float("inf")
    if "theta_sigma" in v:
        v["kappa1_ok"] = cfg.kappa > v["theta_sigma"] + alpha - n
        v["kappa2_ok"] = cfg.kappa > v["theta_omega"] + alpha - n


def evaluate_pair(cfg: ExperimentConfig, pair_id, a, b, level=None,
                  columns=ALL_COLUMNS) -> TheoremCheckRow:
    """Compute the requested constants for one weight pair at one resolution."""
    level = cfg.level if level is None else level
    row = TheoremCheckRow(pair_id, a, b, level)
    kernel = cfg.kernel_spec()
    alpha = kernel.alpha
    sigma, omega = _pair_measures(cfg, a, b, level)
    family = cfg.family(level)
    ladder = cfg.ladder(level)
    v = row.values
    if "A2" in columns:
        v["A2"] = a2_alpha(sigma, omega, alpha, family).value
    if "A2_one_tailed" in columns:
        v["A2_one_tailed"] = one_tailed_a2(sigma, omega, alpha, family).value
    if "A2_one_tailed_dual" in columns:
        v["A2_one_tailed_dual"] = one_tailed_a2_dual(sigma, omega, alpha, family).value
    if "RWT" in columns or "BICT" in columns:
        rwt, bict = search_family(kernel, sigma, omega, family, ladder, cfg.starts,
                                  cfg.max_iters, cfg.seed)
        v["RWT"], v["BICT"] = rwt.value, bict.value
    if "strong_norm" in columns:
        v["strong_norm"] = strong_norm(kernel, sigma, omega, pair=ladder.pairs[0],
                                       tol=cfg.strong_tol, max_iters=cfg.strong_max_iters)
    if "testing" in columns:
        v["testing"] = kappa_cube_testing(kernel, sigma, omega, cfg.kappa, family, ladder).value
    if "testing_dual" in columns:
        v["testing_dual"] = kappa_cube_testing_dual(kernel, sigma, omega, cfg.kappa,
                                                    family, ladder).value
    if "doubling" in columns:
        v["theta_sigma"] = doubling_stats(sigma, family).theta
        v["theta_omega"] = doubling_stats(omega, family).theta
    if "poisson_root" in columns:
        v["poisson_root"] = poisson(cfg.root(), sigma, alpha)
    if "good_lambda" in columns:
        for beta, res in good_lambda_for_pair(cfg, sigma, omega, level):
            v[f"c_emp[beta={beta:g}]"] = res.c_emp
    _derived(v, cfg, alpha, sigma.n)
    return row


def good_lambda_for_pair(cfg, sigma, omega, level):
    kernel = cfg.kernel_spec()
    family = cfg.family(level)
    lebesgue = GridMeasure.lebesgue(sigma.root, sigma.resolution)
    a_inf = a_infinity_report(omega, lebesgue, family, cfg.n_random_sets, cfg.seed)
    f = test_function(cfg.test_function, sigma)
    ladder = cfg.dyadic_ladder(level)
    return [(beta, good_lambda_verify(kernel, f, sigma, omega, kernel.alpha, beta, family,
                                      ladder, a_inf, cfg.n_lambda))
            for beta in cfg.betas]


def _safe(fn, pair_id, a, b, level):
    try:
        return fn()
    except DegenerateMeasureError as exc:
        return TheoremCheckRow(pair_id, a, b, level, status=f"degenerate: {exc}")


def _map_pairs(cfg: ExperimentConfig, fn):
    pairs = cfg.weight_pairs()
    if cfg.threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            out = list(pool.map(lambda p: fn(*p), pairs))
    else:
        out = [fn(*p) for p in pairs]
    order = {p[0]: i for i, p in enumerate(pairs)}
    return sorted(out, key=lambda r: order[r.pair_id] if hasattr(r, "pair_id") else 0)


def run_constants(cfg: ExperimentConfig, columns=ALL_COLUMNS, level=None) -> list:
    """One :class:`TheoremCheckRow` per weight pair (errors recorded per row)."""
    level = cfg.level if level is None else level

    def one(pair_id, a, b):
        return _safe(lambda: evaluate_pair(cfg, pair_id, a, b, level, columns),
                     pair_id, a, b, level)
    return _map_pairs(cfg, one)


SWEEP_BASE = ("pair_id", "a", "b", "L", "A2", "A2_one_tailed", "A2_one_tailed_dual", "RWT",
              "RWT2_over_A2", "A2_over_RWT2", "BICT", "BICT2_over_A2", "strong_norm",
              "testing", "testing_dual", "tp_bound", "tp_ratio")
SWEEP_TAIL = ("theta_sigma", "theta_omega", "kappa1_ok", "kappa2_ok", "status")


def sweep_columns(cfg: ExperimentConfig) -> tuple:
    return SWEEP_BASE + tuple(f"c_emp[beta={b:g}]" for b in cfg.betas) + SWEEP_TAIL


def rows_to_dicts(rows, columns) -> list:
    out = []
    for r in rows:
        d = {}
        for c in columns:
            if c in ("pair_id", "L", "status"):
                d[c] = _fmt(getattr(r, c))
            elif c in ("a", "b"):
                val = getattr(r, c)
                d[c] = "" if val is None else _fmt(float(val))
            else:
                val = r.values.get(c)
                d[c] = "" if val is None else _fmt(val)
        out.append(d)
    return out


def run_sweep(cfg: ExperimentConfig) -> list:
    return rows_to_dicts(run_constants(cfg), sweep_columns(cfg))


def refinement_study(cfg: ExperimentConfig, levels=None,
                     columns=("A2", "A2_one_tailed", "RWT", "BICT", "poisson_root")) -> list:
    """Recompute constants at each level; report relative change from the
    previous level."""
    levels = tuple(cfg.refine_levels if levels is None else levels)
    if len(levels) < 2:
        raise ConfigError("refinement needs at least two levels")
    per_level = {L: run_constants(cfg, columns, L) for L in levels}
    out = []
    for idx, (pair_id, _, _) in enumerate(cfg.weight_pairs()):
        rows = [per_level[L][idx] for L in levels]
        names = sorted(set().union(*(r.values for r in rows)))
        for name in names:
            prev = None
            for L, r in zip(levels, rows):
                val = r.values.get(name, float("nan"))
                if isinstance(val, (bool, np.bool_)):
                    continue
                change = abs(val / prev - 1.0) if prev not in (None, 0) else float("nan")
                out.append({"pair_id": pair_id, "constant": name, "L": str(L),
                            "value": _fmt(val), "rel_change": _fmt(change),
                            "status": r.status})
                prev = val
    return out


# --- the smaller subcommands -----------------------------------------------------------------

def run_constants_table(cfg: ExperimentConfig) -> list:
    """ConstantReport rows: A2, one-tailed constants and doubling constants."""
    kernel = cfg.kernel_spec()
    alpha = kernel.alpha
    out = []
    for pair_id, a, b in cfg.weight_pairs():
        sigma, omega = _pair_measures(cfg, a, b, cfg.level)
        family = cfg.family()
        reports = [a2_alpha(sigma, omega, alpha, family),
                   one_tailed_a2(sigma, omega, alpha, family),
                   one_tailed_a2_dual(sigma, omega, alpha, family)]
        for r in reports:
            out.append({"pair_id": pair_id, **r.csv_row()})
        for label, mu in (("doubling_sigma", sigma), ("doubling_omega", omega)):
            try:
                d = doubling_stats(mu, family)
                out.append({"pair_id": pair_id, "name": label, "value": _fmt(d.c_doub),
                            "alpha": _fmt(alpha), "kappa": "0", "L": str(cfg.level),
                            "witness_description": f"cube={d.witness.describe()}; "
                                                   f"theta={d.theta:.17g}"})
            except DegenerateMeasureError as exc:
                out.append({"pair_id": pair_id, "name": label, "value": "nan",
                            "alpha": _fmt(alpha), "kappa": "0", "L": str(cfg.level),
                            "witness_description": f"degenerate: {exc}"})
    return out


CONSTANT_COLUMNS = ("pair_id",) + CSV_FIELDS
RWT_COLUMNS = ("pair_id", "value", "Q", "E_cells", "F_cells", "iterations")
GOODLAMBDA_COLUMNS = ("pair_id", "beta", "lambda", "LHS", "RHS", "ratio")
TPTEST_COLUMNS = ("pair_id", "strong_norm", "A2_one_tailed", "A2_one_tailed_dual",
                  "testing", "testing_dual", "tp_bound", "tp_ratio", "theta_sigma",
                  "theta_omega", "kappa1_ok", "kappa2_ok", "status")


def run_rwt_table(cfg: ExperimentConfig) -> list:
    kernel = cfg.kernel_spec()
    out = []
    for pair_id, a, b in cfg.weight_pairs():
        sigma, omega = _pair_measures(cfg, a, b, cfg.level)
        rwt, _ = search_family(kernel, sigma, omega, cfg.family(), cfg.ladder(),
                               cfg.starts, cfg.max_iters, cfg.seed)
        out.append({"pair_id": pair_id, **rwt.csv_row()})
    return out


def run_goodlambda_table(cfg: ExperimentConfig) -> list:
    out = []
    for pair_id, a, b in cfg.weight_pairs():
        sigma, omega = _pair_measures(cfg, a, b, cfg.level)
        for beta, res in good_lambda_for_pair(cfg, sigma, omega, cfg.level):
            for r in res.csv_rows():
                out.append({"pair_id": pair_id, "beta": _fmt(beta), **r})
    return out


def run_tptest_table(cfg: ExperimentConfig) -> list:
    rows = run_constants(cfg, ("strong_norm", "A2_one_tailed", "A2_one_tailed_dual",
                               "testing", "testing_dual", "doubling"))
    return rows_to_dicts(rows, TPTEST_COLUMNS)


def run_cancel_table(cfg: ExperimentConfig) -> list:
    kernel = cfg.kernel_spec()
    out = []
    for pair_id, a, b in cfg.weight_pairs():
        sigma, omega = _pair_measures(cfg, a, b, cfg.level)
        eps = [e * sigma.cell_width for e in cfg.cancel_eps]
        args = (kernel, sigma, omega, cfg.kappa, cfg.cancel_centers, cfg.cancel_radii,
                eps, cfg.poly_trials, cfg.seed)
        for fn in (cancellation_constant, cancellation_constant_dual):
            out.append({"pair_id": pair_id, **fn(*args).csv_row()})
    return out


# --- output --------------------------------------------------------------------------------

def to_csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n",
                            extrasaction="ignore")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()


def manifest(cfg: ExperimentConfig, command: str) -> str:
    from .. import __version__
    import scipy
    info = {
        "command": command,
        "seed": cfg.seed,
        "config": cfg.as_dict(),
        "versions": {"twoweight": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
    }
    return json.dumps(info, indent=2, sort_keys=True) + "\n"
