"""Finite-difference verification of every analytic gradient in the toolkit.

Each check compares an analytic gradient g_a against central differences
g_n with step h and reports ||g_a - g_n||_inf / max(||g_a||_inf, ||g_n||_inf, floor).
While both gradients are smaller than the floor this is an absolute test
with tolerance rtol * floor; the report footer states both numbers.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from config import (
    GRADCHECK_DIM,
    GRADCHECK_DRAWS,
    GRADCHECK_FLOOR,
    GRADCHECK_HIDDEN,
    GRADCHECK_RTOL,
    GRADCHECK_STEP,
    GRADCHECK_STREAM,
)
from ordinal import (
    LossKind,
    LossSpec,
    LossValueGrad,
    ThresholdMode,
    ThresholdParams,
    Thresholds,
    backprop_thresholds,
    build_thresholds,
    example_losses,
)
from scoring import RewardScorer, ScorerKind, param_count
from utils.rng import make_rng

logger = logging.getLogger(__name__)

# (s, thresholds, z, K) -> analytic value and gradients
LossFn = Callable[[float, Thresholds, int, int], LossValueGrad]


@dataclass
class CheckResult:
    """Outcome of one gradient check over all draws."""
    name: str
    draws: int
    max_rel_err: float
    passed: bool
    failures: list[int] = field(default_factory=list)


def central_diff(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = GRADCHECK_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        up = x.copy()
        down = x.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (f(up) - f(down)) / (2.0 * h)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = GRADCHECK_FLOOR) -> float:
    analytic = np.atleast_1d(analytic)
    numeric = np.atleast_1d(numeric)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def _summarize(name: str, errors: list[float], rtol: float) -> CheckResult:
    failures = [i for i, e in enumerate(errors) if not e <= rtol]
    result = CheckResult(name, len(errors), max(errors) if errors else 0.0, not failures, failures)
    log = logger.info if result.passed else logger.error
    log(f"gradcheck {name}: max rel err {result.max_rel_err:.2e} over {result.draws} draws")
    return result


def _random_thresholds(rng: np.random.Generator, K: int) -> Thresholds:
    alpha = np.concatenate(([rng.normal(-K / 2.0, 0.5)], rng.normal(-0.5, 0.4, size=2 * K - 1)))
    return build_thresholds(ThresholdParams(K, ThresholdMode.ASYMMETRIC, alpha))


def _library_loss(spec: LossSpec) -> LossFn:
    def fn(s: float, th: Thresholds, z: int, K: int) -> LossValueGrad:
        return example_losses(spec, [s], [z], th, K).row(0)
    return fn


def check_loss(
    kind: LossKind,
    seed: int,
    draws: int = GRADCHECK_DRAWS,
    analytic: Optional[LossFn] = None,
    rtol: float = GRADCHECK_RTOL,
) -> CheckResult:
    """Check d_s and d_zeta of one loss kind.

    ``analytic`` replaces the gradient under test (finite differences always
    use the library's loss values).
    """
    spec = LossSpec(kind)
    reference = _library_loss(spec)
    analytic = analytic or reference
    errors = []
    for draw in range(draws):
        rng = make_rng(seed, GRADCHECK_STREAM, draw)
        K = int(rng.integers(1, 4))
        th = _random_thresholds(rng, K)
        s = float(rng.normal(0.0, 2.0))
        if kind.skips_ties:
            z = int(rng.choice([k for k in range(-K, K + 1) if k != 0]))
        else:
            z = int(rng.integers(-K, K + 1))

        got = analytic(s, th, z, K)
        x0 = np.concatenate(([s], th.zeta))

        def f(x: np.ndarray) -> float:
            return reference(float(x[0]), Thresholds(K, ThresholdMode.ASYMMETRIC, x[1:]), z, K).value

        numeric = central_diff(f, x0)
        errors.append(rel_error(np.concatenate(([got.d_s], got.d_zeta)), numeric))
    return _summarize(f"loss/{kind.value}", errors, rtol)


def check_scorer(kind: ScorerKind, seed: int, draws: int = GRADCHECK_DRAWS, rtol: float = GRADCHECK_RTOL) -> CheckResult:
    """Check backprop of the score difference."""
    d, h = GRADCHECK_DIM, GRADCHECK_HIDDEN
    errors = []
    for draw in range(draws):
        rng = make_rng(seed, GRADCHECK_STREAM + 1, draw)
        params = rng.normal(0.0, 0.7, size=param_count(kind, d, h))
        fa = rng.normal(size=d)
        fb = rng.normal(size=d)
        upstream = float(rng.normal())
        sc = RewardScorer(kind, d, h if kind is ScorerKind.MLP else 0, params)
        got = sc.backprop_batch(fa[None, :], fb[None, :], np.array([upstream]))

        def f(p: np.ndarray) -> float:
            return upstream * float(sc.with_params(p).diff_batch(fa, fb)[0])

        errors.append(rel_error(got, central_diff(f, params)))
    return _summarize(f"scorer/{kind.value}", errors, rtol)


def check_thresholds(mode: ThresholdMode, seed: int, draws: int = GRADCHECK_DRAWS, rtol: float = GRADCHECK_RTOL) -> CheckResult:
    """Check backprop through the exp reparameterization.

    Uses f(zeta) = w . zeta + 0.5 ||zeta||^2 with random w.
    """
    errors = []
    for draw in range(draws):
        rng = make_rng(seed, GRADCHECK_STREAM + 2, draw)
        K = int(rng.integers(1, 4))
        size = K if mode is ThresholdMode.SYMMETRIC else 2 * K
        alpha = rng.normal(-0.3, 0.5, size=size)
        w = rng.normal(size=2 * K)

        def f(a: np.ndarray) -> float:
            zeta = build_thresholds(ThresholdParams(K, mode, a)).zeta
            return float(w @ zeta + 0.5 * zeta @ zeta)

        params = ThresholdParams(K, mode, alpha)
        zeta = build_thresholds(params).zeta
        got = backprop_thresholds(params, w + zeta)
        errors.append(rel_error(got, central_diff(f, alpha)))
    return _summarize(f"thresholds/{mode.value}", errors, rtol)


def run_gradcheck(
    seed: int = 0,
    draws: int = GRADCHECK_DRAWS,
    loss_overrides: Optional[dict[LossKind, LossFn]] = None,
) -> list[CheckResult]:
    """Run every check: one row per loss kind, scorer kind and threshold mode."""
    overrides = loss_overrides or {}
    results = [check_loss(kind, seed, draws, overrides.get(kind)) for kind in LossKind]
    results += [check_scorer(kind, seed, draws) for kind in ScorerKind]
    results += [check_thresholds(mode, seed, draws) for mode in ThresholdMode]
    return results


def format_results(
    results: list[CheckResult],
    rtol: float = GRADCHECK_RTOL,
    floor: float = GRADCHECK_FLOOR,
) -> str:
    """Per-check table for stdout, with the pass criterion as a footer."""
    lines = [f"{'check':<26}{'draws':>7}{'max_rel_err':>14}  status", "-" * 55]
    for r in results:
        lines.append(f"{r.name:<26}{r.draws:>7}{r.max_rel_err:>14.3e}  {'PASS' if r.passed else 'FAIL'}")
        if not r.passed:
            lines.append(f"{'':<4}failing draws: {', '.join(str(i) for i in r.failures[:20])}")
    lines.append("-" * 55)
    lines.append(f"pass: rel err <= {rtol:.0e}, denominator floored at {floor:.0e}")
    lines.append(f"gradients below the floor are held to absolute error <= {rtol * floor:.0e}")
    return "\n".join(lines)
