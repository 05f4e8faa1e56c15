"""Central finite-difference checks of the analytic loss gradients."""
import numpy as np

from . import appearance, conditional
from .appearance import Balance
from .conditional import ConditionalParams

STEP = 1e-5
TOLERANCE = 1e-4


def relative_error(analytic, numeric):
    """``||a - n|| / max(||a||, ||n||)`` (0 when both vanish)."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def central_difference(f, x, step=STEP):
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        grad[k] = (f(x + e) - f(x - e)) / (2.0 * step)
    return grad


def random_instance(rng, max_side=16):
    h, w = rng.integers(4, max_side + 1, size=2)
    image = rng.integers(0, 256, size=(h, w, 3))
    feats = appearance.extract_features(image)
    truth = rng.random((h, w)) < rng.uniform(0.2, 0.8)
    return feats, truth


def check_appearance(n=50, seed=0, balance=Balance.CLASS_BALANCED, max_side=16):
    """Largest relative error of the appearance gradient over ``n`` instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        feats, truth = random_instance(rng, max_side)
        params = rng.uniform(-1.0, 1.0, feats.shape[-1])
        analytic = appearance.loss_gradient(params, feats, truth, balance)

        def loss(p):
            return appearance.balanced_loss(appearance.predict(p, feats), truth, balance)

        worst = max(worst, relative_error(analytic, central_difference(loss, params)))
    return worst


def check_conditional(n=50, seed=1, balance=Balance.CLASS_BALANCED, max_side=16):
    """Largest relative error of the joint (fg, bg) gradient over ``n`` instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        feats, truth = random_instance(rng, max_side)
        w = rng.random(truth.shape)
        c = feats.shape[-1]
        both = rng.uniform(-1.0, 1.0, 2 * c)
        grad_fg, grad_bg = conditional.joint_gradient(
            ConditionalParams(both[:c], both[c:]), feats, truth, w, balance
        )

        def loss(v):
            return conditional.joint_loss(ConditionalParams(v[:c], v[c:]), feats, truth, w, balance)

        analytic = np.concatenate([grad_fg, grad_bg])
        worst = max(worst, relative_error(analytic, central_difference(loss, both)))
    return worst
