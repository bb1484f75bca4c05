"""Central finite-difference verification of the analytic loss gradients.

Every check draws a random point that is provably far from the non-smooth
spots (smooth-L1 kinks at |x| = 1, heatmap clamp bounds) and compares the
analytic gradient against (f(x+h) - f(x-h)) / 2h component by component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .encoder import TargetMaps
from .errors import KinkProximity
from .losses import (
    CLAMP_EPS,
    LossWeights,
    collinear_loss,
    endpoint_loss,
    focal_ip_loss,
    line_loss,
    total_loss,
    vertical_loss,
)

DEFAULT_STEP = 1e-4
DEFAULT_TOLERANCE = 1e-4

# Rejection threshold used when sampling points: far enough from every kink
# that no probe of size `step` can cross one, with a wide margin.
_SAMPLE_MARGIN = 0.05

LOSS_NAMES = ("focal_ip", "endpoint", "collinear", "vertical", "line", "total")


@dataclass
class GradCheckReport:
    name: str
    max_rel_error: float
    tolerance: float
    n_components: int
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(
    value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    point: np.ndarray,
    step: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
    kink_margin: Callable[[np.ndarray], float] | None = None,
    name: str = "loss",
) -> GradCheckReport:
    """Compare an analytic gradient against central differences at one point.

    The error per component is |analytic - numeric| / max(1, |analytic|,
    |numeric|). Raises KinkProximity when kink_margin reports the point
    within 10 * step of a non-smooth spot.
    """
    point = np.asarray(point, dtype=np.float64).ravel()
    if kink_margin is not None:
        margin = kink_margin(point)
        if margin <= 10.0 * step:
            raise KinkProximity(
                f"{name}: point is {margin:.3e} from a kink, need > {10 * step:.3e}"
            )
    _, analytic = value_and_grad(point)
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    if analytic.shape != point.shape:
        raise ValueError(f"gradient shape {analytic.shape} vs point {point.shape}")
    worst = 0.0
    for i in range(point.size):
        probe = point.copy()
        probe[i] = point[i] + step
        up, _ = value_and_grad(probe)
        probe[i] = point[i] - step
        down, _ = value_and_grad(probe)
        numeric = (up - down) / (2.0 * step)
        scale = max(1.0, abs(analytic[i]), abs(numeric))
        worst = max(worst, abs(analytic[i] - numeric) / scale)
    return GradCheckReport(
        name=name,
        max_rel_error=worst,
        tolerance=tolerance,
        n_components=point.size,
        samples=1,
    )


def _sl1_margin(args: np.ndarray) -> float:
    """Distance of smooth-L1 arguments to the nearest kink at |x| = 1."""
    if args.size == 0:
        return np.inf
    return float(np.abs(np.abs(args) - 1.0).min())


def _clamp_margin(p: np.ndarray) -> float:
    return float(min((p - CLAMP_EPS).min(), (1.0 - CLAMP_EPS - p).min()))


def _sample_away_from_kinks(rng: np.ndarray, draw, margin_of) -> np.ndarray:
    """Redraw until every non-smooth spot is at least _SAMPLE_MARGIN away."""
    for _ in range(100):
        x = draw()
        if margin_of(x) > _SAMPLE_MARGIN:
            return x
    raise RuntimeError("could not sample a smooth point")


# --- one random check per loss -------------------------------------------------


def check_focal(rng: np.random.Generator, step=DEFAULT_STEP, tolerance=DEFAULT_TOLERANCE, perturb=0.0):
    shape = (2, 3, 4)
    gt = (rng.random(shape) < 0.3).astype(np.float64)
    pred = rng.uniform(0.05, 0.95, shape)
    n = max(1, int(gt.sum()) // 3)

    def f(x):
        value, grad = focal_ip_loss(x.reshape(shape), gt, n)
        return value, grad.ravel() + perturb

    return grad_check(
        f, pred.ravel(), step, tolerance,
        kink_margin=lambda x: _clamp_margin(x), name="focal_ip",
    )


def _random_mask(rng, shape):
    mask = rng.random(shape) < 0.6
    if not mask.any():
        mask.flat[0] = True
    return mask


def check_endpoint(rng, step=DEFAULT_STEP, tolerance=DEFAULT_TOLERANCE, perturb=0.0):
    shape = (8, 2, 3)
    mask = _random_mask(rng, shape[1:])
    target = rng.normal(0.0, 20.0, shape)

    def draw():
        return target + rng.uniform(-3.0, 3.0, shape)

    pred = _sample_away_from_kinks(rng, draw, lambda x: _sl1_margin(x - target))

    def f(x):
        value, grad = endpoint_loss(x.reshape(shape), target, mask, 2)
        return value, grad.ravel() + perturb

    return grad_check(
        f, pred.ravel(), step, tolerance,
        kink_margin=lambda x: _sl1_margin(x.reshape(shape) - target), name="endpoint",
    )


def _cross_args(reg: np.ndarray) -> np.ndarray:
    return np.stack(
        [reg[0] * reg[3] - reg[2] * reg[1], reg[4] * reg[7] - reg[6] * reg[5]]
    )


def _dot_args(reg: np.ndarray) -> np.ndarray:
    return reg[0] * reg[4] + reg[1] * reg[5]


def check_collinear(rng, step=DEFAULT_STEP, tolerance=DEFAULT_TOLERANCE, perturb=0.0):
    shape = (8, 2, 3)
    mask = _random_mask(rng, shape[1:])
    pred = _sample_away_from_kinks(
        rng, lambda: rng.uniform(-25.0, 25.0, shape),
        lambda x: _sl1_margin(_cross_args(x)),
    )

    def f(x):
        value, grad = collinear_loss(x.reshape(shape), mask, 2)
        return value, grad.ravel() + perturb

    return grad_check(
        f, pred.ravel(), step, tolerance,
        kink_margin=lambda x: _sl1_margin(_cross_args(x.reshape(shape))),
        name="collinear",
    )


def check_vertical(rng, step=DEFAULT_STEP, tolerance=DEFAULT_TOLERANCE, perturb=0.0):
    shape = (8, 2, 3)
    mask = _random_mask(rng, shape[1:])
    pred = _sample_away_from_kinks(
        rng, lambda: rng.uniform(-25.0, 25.0, shape),
        lambda x: _sl1_margin(_dot_args(x)),
    )

    def f(x):
        value, grad = vertical_loss(x.reshape(shape), mask, 2)
        return value, grad.ravel() + perturb

    return grad_check(
        f, pred.ravel(), step, tolerance,
        kink_margin=lambda x: _sl1_margin(_dot_args(x.reshape(shape))),
        name="vertical",
    )


def _line_margin(pred: np.ndarray, target: np.ndarray) -> float:
    return min(
        _sl1_margin(pred - target),
        _sl1_margin(_cross_args(pred)),
        _sl1_margin(_dot_args(pred)),
    )


def check_line(rng, step=DEFAULT_STEP, tolerance=DEFAULT_TOLERANCE, perturb=0.0):
    shape = (8, 2, 3)
    mask = _random_mask(rng, shape[1:])
    target = rng.normal(0.0, 15.0, shape)
    weights = LossWeights(alpha=1.0, beta=1.0)

    def draw():
        return rng.uniform(-25.0, 25.0, shape)

    pred = _sample_away_from_kinks(rng, draw, lambda x: _line_margin(x, target))

    def f(x):
        out = line_loss(x.reshape(shape), target, mask, 2, weights)
        return out.total, out.gradients["regression"].ravel() + perturb

    return grad_check(
        f, pred.ravel(), step, tolerance,
        kink_margin=lambda x: _line_margin(x.reshape(shape), target), name="line",
    )


def _synthetic_pair(rng) -> tuple[TargetMaps, TargetMaps, int, int]:
    """Small random prediction/target map pair for the total-loss check."""
    num_classes, height, width = 1, 2, 3

    def maps(hm, reg, mask, n):
        return TargetMaps(
            stride=4, num_classes=num_classes, width=width, height=height,
            image_w=width * 4, image_h=height * 4,
            heatmap=hm, regression=reg, reg_mask=mask, n_objects=n,
        )

    gt_hm = (rng.random((2, num_classes, height, width)) < 0.3).astype(np.float64)
    mask = np.stack([_random_mask(rng, (height, width)) for _ in range(2)])
    target_reg = rng.normal(0.0, 15.0, (2, 8, height, width))
    target = maps(gt_hm, target_reg, mask, 2)
    hm_size = gt_hm.size
    return target, maps(np.zeros_like(gt_hm), np.zeros_like(target_reg), mask, 2), hm_size, num_classes


def check_total(rng, step=DEFAULT_STEP, tolerance=DEFAULT_TOLERANCE, perturb=0.0):
    target, pred, hm_size, num_classes = _synthetic_pair(rng)
    weights = LossWeights()
    hm_shape = target.heatmap.shape
    reg_shape = target.regression.shape

    def split(x):
        return x[:hm_size].reshape(hm_shape), x[hm_size:].reshape(reg_shape)

    def margin(x):
        hm, reg = split(x)
        return min(
            _clamp_margin(hm),
            min(_line_margin(reg[b], target.regression[b]) for b in range(2)),
        )

    def draw():
        hm = rng.uniform(0.05, 0.95, hm_shape)
        reg = rng.uniform(-25.0, 25.0, reg_shape)
        return np.concatenate([hm.ravel(), reg.ravel()])

    point = _sample_away_from_kinks(rng, draw, margin)

    def f(x):
        hm, reg = split(x)
        pred.heatmap, pred.regression = hm, reg
        out = total_loss(pred, target, weights)
        grad = np.concatenate(
            [out.gradients["heatmap"].ravel(), out.gradients["regression"].ravel()]
        )
        return out.total, grad + perturb

    return grad_check(f, point, step, tolerance, kink_margin=margin, name="total")


_CHECKS = {
    "focal_ip": check_focal,
    "endpoint": check_endpoint,
    "collinear": check_collinear,
    "vertical": check_vertical,
    "line": check_line,
    "total": check_total,
}


def run_gradchecks(
    seed: int = 0,
    samples: int = 100,
    step: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
    perturb: float = 0.0,
) -> list[GradCheckReport]:
    """Run every loss check at `samples` random smooth points each.

    perturb biases the analytic gradients and exists so the harness itself
    can be shown to catch wrong gradients.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rng = np.random.default_rng(seed)
    reports = []
    for name in LOSS_NAMES:
        check = _CHECKS[name]
        worst = 0.0
        n_components = 0
        for _ in range(samples):
            rep = check(rng, step=step, tolerance=tolerance, perturb=perturb)
            worst = max(worst, rep.max_rel_error)
            n_components = rep.n_components
        reports.append(
            GradCheckReport(
                name=name, max_rel_error=worst, tolerance=tolerance,
                n_components=n_components, samples=samples,
            )
        )
    return reports
