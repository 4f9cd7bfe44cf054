"""Adversarial dropout masks, input perturbations and training objectives.

The mask search linearises the divergence around the all-ones mask::

    D(eps) ~ const + sum_i eps_i * J_i,      J = h * dD/dh  (taken at eps = 1)

and then flips, starting from a sampled mask ``eps_s``, the coordinates with
the largest ``|J|`` whose flip increases the linear term, up to a Hamming
budget of ``floor(delta * H)`` flips.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .divergences import DivergenceKind, div_eval, div_grad
from .errors import ConfigurationError, DomainError, ShapeError
from .network import SplitNetwork, add_grads
from .numerics import DTYPE, RngStream, as_tensor

OBJECTIVES = ("plain", "pi_model", "at", "vat", "sadd", "vadd", "sadd_plus_at", "vadd_plus_vat")
_UNSUPERVISED = ("pi_model", "vat", "vadd", "vadd_plus_vat")
_NEEDS_LABELS = ("plain", "at", "sadd", "sadd_plus_at")


@dataclass(frozen=True)
class AdvBudget:
    delta: float
    H: int

    def __post_init__(self):
        if self.delta < 0:
            raise DomainError("delta must be non-negative")
        if self.H < 0:
            raise DomainError("H must be non-negative")

    @property
    def budget(self) -> int:
        # tolerance keeps products such as 0.29 * 100 from rounding down a whole flip
        return min(self.H, int(math.floor(self.delta * self.H + 1e-9)))


@dataclass(frozen=True)
class LossSpec:
    """Which objective to assemble and with which weights.

    ``lam`` weighs the first regulariser (or the only one); ``lam2`` weighs
    the adversarial-training term of the combined objectives.
    """

    objective: str = "plain"
    divergence: str = "kl"
    lam: float = 1.0
    lam2: float = 0.0
    delta: float = 0.005
    delta_input: float = 0.0
    keep_prob: float | None = None
    supervised_loss: str = "ce"
    stop_gradient: bool = False
    vat_xi: float = 1e-6

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigurationError(f"unknown objective {self.objective!r}")
        DivergenceKind.parse(self.divergence)
        DivergenceKind.parse(self.supervised_loss)
        if min(self.lam, self.lam2, self.delta, self.delta_input) < 0:
            raise ConfigurationError("weights and radii must be non-negative")
        if self.keep_prob is not None and not 0.0 <= self.keep_prob <= 1.0:
            raise ConfigurationError("keep_prob must lie in [0, 1]")

    @property
    def kind(self) -> DivergenceKind:
        return DivergenceKind.parse(self.divergence)

    @property
    def sup_kind(self) -> DivergenceKind:
        return DivergenceKind.parse(self.supervised_loss)


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros(labels.shape + (num_classes,), dtype=DTYPE)
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


# ---------------------------------------------------------------------------
# mask search


def jacobian_estimate(h, grad_h) -> np.ndarray:
    h = as_tensor(h)
    grad_h = as_tensor(grad_h)
    if h.shape != grad_h.shape:
        raise ShapeError(f"h {h.shape} and grad_h {grad_h.shape} differ in shape")
    return h * grad_h


def find_adversarial_mask(J, eps_s, budget) -> np.ndarray:
    """Greedy maximiser of ``sum(eps * J)`` within ``budget`` flips of ``eps_s``.

    Coordinates are visited by decreasing ``|J|`` (lower index first on ties);
    a 0 becomes 1 when ``J > 0`` and a 1 becomes 0 when ``J < 0``. Accepts a
    single vector or a batch of rows (one search per row). ``budget`` is an
    :class:`AdvBudget` or a flip count.
    """
    J = as_tensor(J)
    eps = as_tensor(eps_s)
    if J.shape != eps.shape:
        raise ShapeError(f"J {J.shape} and eps_s {eps.shape} differ in shape")
    b = budget.budget if isinstance(budget, AdvBudget) else int(budget)
    if b < 0:
        raise DomainError("budget must be non-negative")
    single = J.ndim == 1
    J2, e2 = (J[None], eps[None]) if single else (J, eps)
    if b == 0 or J2.shape[1] == 0:
        return eps.copy()
    order = np.argsort(-np.abs(J2), axis=1, kind="stable")
    js = np.take_along_axis(J2, order, axis=1)
    es = np.take_along_axis(e2, order, axis=1)
    gain = ((es == 0) & (js > 0)) | ((es == 1) & (js < 0))
    take = gain & (np.cumsum(gain, axis=1) <= b)
    flip = np.zeros_like(take)
    np.put_along_axis(flip, order, take, axis=1)
    adv = np.where(flip, 1.0 - e2, e2)
    return adv[0] if single else adv


# ---------------------------------------------------------------------------
# branches


def _pass(net: SplitNetwork, x, mask=None, rng=None, noises=None):
    if mask is None and rng is None and noises is None:
        return net.forward(x, train=False)
    return net.forward(x, mask, rng, noises=noises)


@dataclass
class _AdvBranch:
    values: np.ndarray
    eps_adv: np.ndarray
    J: np.ndarray
    trace: object
    noises: dict


def _adversarial_branch(net, x, target, eps_s, kind, budget, rng=None, noises=None, eps_adv=None):
    """Search the adversarial mask for ``D[target, f(x, eps)]`` and evaluate it.

    The expansion pass runs with the all-ones slot mask; its noise (sampled
    from ``rng`` unless ``noises`` is given) is shared by the evaluation pass.
    When ``eps_adv`` is supplied the search is skipped (replay).
    """
    n = target.shape[0]
    _, tr0 = net.forward(x, np.ones((n, net.H)), rng, noises=noises)
    if eps_adv is None:
        g0 = div_grad(kind, target, tr0.output)
        _, gh = net.backward(tr0, g0, stop_at_split=True)
        J = jacobian_estimate(tr0.h, gh)
        eps_adv = find_adversarial_mask(J, eps_s, budget)
    else:
        J = np.zeros((n, net.H))
    out_adv, tr_adv = net.reforward_upper(tr0, eps_adv)
    return _AdvBranch(values=div_eval(kind, target, tr_adv.output), eps_adv=eps_adv, J=J,
                      trace=tr_adv, noises=tr0.noises)


def _squeeze(values, single):
    return float(values[0]) if single else values


def sadd_divergence(net: SplitNetwork, x, y_onehot, eps_s, spec: LossSpec,
                    rng: RngStream | None = None, noises: dict | None = None):
    """Supervised adversarial dropout term ``D[g(y), f(x, eps_adv)]``.

    Returns ``(value, eps_adv)``; batched input gives one value per item.
    """
    xb, single = net._batch(x)
    target = as_tensor(y_onehot).reshape(xb.shape[0], -1)
    eps = as_tensor(eps_s).reshape(xb.shape[0], -1)
    br = _adversarial_branch(net, xb, target, eps, spec.kind, AdvBudget(spec.delta, net.H),
                             rng, noises)
    return _squeeze(br.values, single), (br.eps_adv[0] if single else br.eps_adv)


def vadd_divergence(net: SplitNetwork, x, eps_s, spec: LossSpec, rng: RngStream | None = None,
                    noises: dict | None = None):
    """Virtual adversarial dropout term ``D[f(x, eps_s), f(x, eps_adv)]``.

    The target pass uses ``noises`` (or fresh draws from ``rng``) for the
    other stochastic layers; the adversarial branch draws its own noise.
    """
    xb, single = net._batch(x)
    eps = as_tensor(eps_s).reshape(xb.shape[0], -1)
    target, _ = net.forward(xb, eps, rng, noises=noises)
    br = _adversarial_branch(net, xb, target, eps, spec.kind, AdvBudget(spec.delta, net.H), rng)
    return _squeeze(br.values, single), (br.eps_adv[0] if single else br.eps_adv)


def pi_model_divergence(net: SplitNetwork, x, rng: RngStream, spec: LossSpec):
    xb, single = net._batch(x)
    q = spec.keep_prob
    m1 = net.sample_slot_mask(rng, xb.shape[0], q) if net.slot_index is not None else None
    out1, _ = net.forward(xb, m1, rng)
    m2 = net.sample_slot_mask(rng, xb.shape[0], q) if net.slot_index is not None else None
    out2, _ = net.forward(xb, m2, rng)
    return _squeeze(div_eval(spec.kind, out1, out2), single)


def fgsm_perturbation(net: SplitNetwork, x, y_target, delta_input: float, kind="ce",
                      mask=None, rng: RngStream | None = None, noises: dict | None = None):
    """``x + delta_input * sign(grad_x D[y, f(x)])``.

    Without ``mask``/``rng``/``noises`` the gradient is taken in evaluation
    mode; otherwise in training mode with the given noise.
    """
    if delta_input < 0:
        raise DomainError("delta_input must be non-negative")
    xb, single = net._batch(x)
    target = as_tensor(y_target).reshape(xb.shape[0], -1)
    out, tr = _pass(net, xb, mask, rng, noises)
    _, gx = net.backward(tr, div_grad(kind, target, out))
    x_adv = xb + delta_input * np.sign(gx)
    return x_adv[0] if single else x_adv


def _unit_rows(a):
    flat = a.reshape(a.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1, keepdims=True)
    return (flat / np.where(norms > 0, norms, 1.0)).reshape(a.shape), norms[:, 0]


def vat_perturbation(net: SplitNetwork, x, delta_input: float, rng: RngStream, xi: float = 1e-6,
                     kind="kl", mask=None, noises: dict | None = None, target=None):
    """Virtual adversarial input perturbation from one power iteration.

    The target ``f(x)`` is a constant (no gradient); both passes share the
    same noise, so only the input shift moves the output. Each item's
    perturbation has L2 norm ``delta_input``.
    """
    if delta_input < 0:
        raise DomainError("delta_input must be non-negative")
    xb, single = net._batch(x)
    train = mask is not None or noises is not None
    if target is None:
        target, _ = net.forward(xb, mask, None, train=train, noises=noises)
    d, _ = _unit_rows(rng.normal(xb.shape))
    out_p, tr_p = net.forward(xb + xi * d, mask, None, train=train, noises=noises)
    _, gx = net.backward(tr_p, div_grad(kind, target, out_p))
    u, norms = _unit_rows(gx)
    u = np.where((norms > 0).reshape((-1,) + (1,) * (xb.ndim - 1)), u, d)
    x_adv = xb + delta_input * u
    return x_adv[0] if single else x_adv


# ---------------------------------------------------------------------------
# objective assembly


@dataclass
class Batch:
    """Labeled items (with target vectors) and optional unlabeled items."""

    x_labeled: np.ndarray | None
    y_labeled: np.ndarray | None
    x_unlabeled: np.ndarray | None = None

    @property
    def n_labeled(self) -> int:
        return 0 if self.x_labeled is None else len(self.x_labeled)


@dataclass
class ObjectiveResult:
    total: float
    grads: dict
    nll: float = 0.0
    reg: float = 0.0
    reg2: float = 0.0
    mean_abs_J: float = float("nan")
    mean_flips: float = float("nan")
    n_nll_items: int = 0
    record: dict = field(default_factory=dict)


def _slice_noises(noises, n):
    return {i: v[:n] for i, v in noises.items()}


def assemble_objective(net: SplitNetwork, batch: Batch, spec: LossSpec, rng: RngStream | None,
                       lam: float | None = None, lam2: float | None = None,
                       replay: dict | None = None) -> ObjectiveResult:
    """Loss and parameter gradients for one batch.

    total = NLL(labeled, f(x, eps_s)) + lam * R1 + lam2 * R2, with the
    regularisers chosen by ``spec.objective``. Masks and perturbations found
    by search are constants for differentiation. ``replay`` (the ``record``
    of an earlier result) re-evaluates with identical noise, masks and
    perturbations, which makes the objective a smooth function of the
    parameters for finite-difference checks.
    """
    obj = spec.objective
    lam = spec.lam if lam is None else lam
    lam2 = spec.lam2 if lam2 is None else lam2
    rp = replay or {}
    n_l = batch.n_labeled
    if obj in _NEEDS_LABELS and n_l == 0:
        raise ConfigurationError(f"objective {obj!r} needs labeled items")
    if n_l and batch.y_labeled is None:
        raise ConfigurationError("labeled items given without targets")
    if obj in ("sadd", "vadd", "sadd_plus_at", "vadd_plus_vat") and net.slot_index is None:
        raise ConfigurationError(f"objective {obj!r} needs an adversarial dropout slot")

    parts = [batch.x_labeled] if n_l else []
    if obj in _UNSUPERVISED and batch.x_unlabeled is not None and len(batch.x_unlabeled):
        parts.append(batch.x_unlabeled)
    if not parts:
        raise ConfigurationError("empty batch")
    x_all = np.concatenate(parts) if len(parts) > 1 else parts[0]
    n = x_all.shape[0]
    t_l = as_tensor(batch.y_labeled).reshape(n_l, -1) if n_l else None
    kind = spec.kind
    record: dict = {}
    has_slot = net.slot_index is not None
    budget = AdvBudget(spec.delta, net.H) if has_slot else None

    eps_s = rp.get("eps_s")
    if eps_s is None and has_slot:
        eps_s = net.sample_slot_mask(rng, n, spec.keep_prob)
    out, tr = net.forward(x_all, eps_s, rng, noises=rp.get("main_noises"))
    record["eps_s"], record["main_noises"] = eps_s, tr.noises

    g_out = np.zeros_like(out)
    grads = None
    nll = 0.0
    if n_l:
        nll = float(np.mean(div_eval(spec.sup_kind, t_l, out[:n_l])))
        g_out[:n_l] += div_grad(spec.sup_kind, t_l, out[:n_l]) / n_l
    res = ObjectiveResult(total=0.0, grads={}, nll=nll, n_nll_items=n_l, record=record)

    def adv_dropout(target, x, eps, key):
        br = _adversarial_branch(net, x, target, eps, kind, budget, rng,
                                 noises=rp.get(key + "_noises"), eps_adv=rp.get(key + "_eps_adv"))
        record[key + "_noises"], record[key + "_eps_adv"] = br.noises, br.eps_adv
        if key + "_eps_adv" not in rp:
            res.mean_abs_J = float(np.mean(np.abs(br.J)))
        res.mean_flips = float(np.mean(np.sum(br.eps_adv != eps, axis=1)))
        return br

    def _target(current, key):
        # a stop-gradient target is a constant, so replay must not recompute it
        if spec.stop_gradient:
            record[key] = rp.get(key, current)
            return record[key]
        return current

    reg1 = reg2 = 0.0
    if obj == "pi_model":
        m2 = rp.get("pi_eps")
        if m2 is None and has_slot:
            m2 = net.sample_slot_mask(rng, n, spec.keep_prob)
        out2, tr2 = net.forward(x_all, m2, rng, noises=rp.get("pi_noises"))
        record["pi_eps"], record["pi_noises"] = m2, tr2.noises
        target = _target(out, "pi_target")
        reg1 = float(np.mean(div_eval(kind, target, out2)))
        if lam:
            if not spec.stop_gradient:
                g_out += lam * div_grad(kind, target, out2, wrt="first") / n
            grads = add_grads(grads, net.backward(tr2, lam * div_grad(kind, target, out2) / n)[0])

    if obj in ("vadd", "vadd_plus_vat"):
        target = _target(out, "vadd_target")
        br = adv_dropout(target, x_all, eps_s, "vadd")
        reg1 = float(br.values.mean())
        if lam:
            if not spec.stop_gradient:
                g_out += lam * div_grad(kind, target, br.trace.output, wrt="first") / n
            grads = add_grads(grads, net.backward(br.trace, lam * div_grad(kind, target, br.trace.output) / n)[0])

    if obj in ("sadd", "sadd_plus_at"):
        xl = x_all[:n_l]
        br = adv_dropout(t_l, xl, eps_s[:n_l], "sadd")
        reg1 = float(br.values.mean())
        if lam:
            grads = add_grads(grads, net.backward(br.trace, lam * div_grad(kind, t_l, br.trace.output) / n_l)[0])

    if obj in ("at", "sadd_plus_at"):
        w = lam if obj == "at" else lam2
        sub_eps = eps_s[:n_l] if has_slot else None
        sub_noises = _slice_noises(tr.noises, n_l)
        x_adv = rp.get("x_at")
        if x_adv is None:
            x_adv = fgsm_perturbation(net, x_all[:n_l], t_l, spec.delta_input, kind=spec.sup_kind,
                                      mask=sub_eps, noises=sub_noises)
        record["x_at"] = x_adv
        out_a, tr_a = net.forward(x_adv, sub_eps, None, noises=sub_noises)
        val = float(np.mean(div_eval(kind, t_l, out_a)))
        if obj == "at":
            reg1 = val
        else:
            reg2 = val
        if w:
            grads = add_grads(grads, net.backward(tr_a, w * div_grad(kind, t_l, out_a) / n_l)[0])

    if obj in ("vat", "vadd_plus_vat"):
        w = lam if obj == "vat" else lam2
        target = rp.get("vat_target", out)
        x_v = rp.get("x_vat")
        if x_v is None:
            x_v = vat_perturbation(net, x_all, spec.delta_input, rng, xi=spec.vat_xi, kind=kind,
                                   mask=eps_s, noises=tr.noises, target=target)
        record["x_vat"], record["vat_target"] = x_v, target
        out_v, tr_v = net.forward(x_v, eps_s, None, noises=tr.noises)
        val = float(np.mean(div_eval(kind, target, out_v)))
        if obj == "vat":
            reg1 = val
        else:
            reg2 = val
        if w:
            grads = add_grads(grads, net.backward(tr_v, w * div_grad(kind, target, out_v) / n)[0])

    grads = add_grads(grads, net.backward(tr, g_out)[0])
    w1 = lam
    w2 = lam2 if obj in ("sadd_plus_at", "vadd_plus_vat") else 0.0
    res.total = nll + w1 * reg1 + w2 * reg2
    res.reg, res.reg2, res.grads = reg1, reg2, grads
    return res
