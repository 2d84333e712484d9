# ============================================================================
# apps/numcore/gradcheck.py - Central-difference gradient verification
# ============================================================================

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Mapping, Optional

import numpy as np

from shared.errors import GradientCheckError
from shared.utils import format_table, make_rng
from .tensor import Array, Tape, backprop_tape

logger = logging.getLogger(__name__)


@dataclass
class GradCheckEntry:
    name: str
    max_rel_err: float
    max_abs_err: float
    checked: int


@dataclass
class GradCheckReport:
    entries: List[GradCheckEntry] = field(default_factory=list)
    tolerance: float = 1e-4

    @property
    def max_rel_err(self) -> float:
        return max((e.max_rel_err for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return all(e.max_rel_err < self.tolerance for e in self.entries)

    def failures(self) -> List[GradCheckEntry]:
        return [e for e in self.entries if e.max_rel_err >= self.tolerance]

    def to_table(self) -> str:
        rows = [(e.name, e.checked, f"{e.max_abs_err:.3e}", f"{e.max_rel_err:.3e}",
                 "ok" if e.max_rel_err < self.tolerance else "FAIL") for e in self.entries]
        return format_table(["parameter", "checked", "max abs err", "max rel err", "status"], rows)


# Rounding compounds over the ops of a forward pass; this many ulps of loss per
# evaluation is treated as noise, not gradient error.
NOISE_ULPS = 64.0


def relative_error(analytic: float, numeric: float, abs_floor: float, noise: float = 0.0) -> float:
    """Relative disagreement after discounting up to `noise` of absolute error."""
    excess = max(abs(analytic - numeric) - noise, 0.0)
    return excess / max(abs(analytic) + abs(numeric), abs_floor)


def difference_noise(plus: float, minus: float, step: float) -> float:
    """Float64 rounding level of the quotient (plus - minus) / (2 * step)."""
    return NOISE_ULPS * float(np.finfo(np.float64).eps) * max(abs(plus), abs(minus), 1.0) / (2.0 * step)


def check_gradients(forward: Callable[[], Array], params: Mapping[str, Array], eps: float = 1e-4,
                    tolerance: float = 1e-4, abs_floor: float = 1e-5,
                    max_entries: Optional[int] = None, seed: int = 0) -> GradCheckReport:
    """Compare tape gradients of forward() against central differences, per parameter.

    forward must be deterministic (dropout off). The step for an entry x is
    eps * max(1, |x|), and each comparison discounts the float64 rounding level
    of its difference quotient. With max_entries set, that many entries per
    parameter are perturbed, drawn with a seeded generator.
    """
    if eps <= 0:
        raise GradientCheckError(f"step size must be positive, got {eps}")

    first = forward().item()
    second = forward().item()
    if first != second:
        raise GradientCheckError(f"forward is not deterministic: {first!r} != {second!r}")

    for p in params.values():
        p.grad = None
    with Tape() as tape:
        loss = forward()
    backprop_tape(tape, loss)
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.values))
                for name, p in params.items()}

    rng = make_rng(seed)
    report = GradCheckReport(tolerance=tolerance)
    for name, p in params.items():
        flat = p.values.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        worst_rel = 0.0
        worst_abs = 0.0
        grad_flat = analytic[name].reshape(-1)
        for idx in indices:
            original = flat[idx]
            step = eps * max(1.0, abs(float(original)))
            flat[idx] = original + step
            plus = forward().item()
            flat[idx] = original - step
            minus = forward().item()
            flat[idx] = original
            numeric = (plus - minus) / (2.0 * step)
            noise = difference_noise(plus, minus, step)
            worst_abs = max(worst_abs, abs(grad_flat[idx] - numeric))
            worst_rel = max(worst_rel, relative_error(grad_flat[idx], numeric, abs_floor, noise))
        report.entries.append(GradCheckEntry(name, worst_rel, worst_abs, int(indices.size)))

    level = logging.INFO if report.passed else logging.WARNING
    logger.log(level, f"Gradient check over {len(report.entries)} parameters, max rel err {report.max_rel_err:.3e}")
    return report
