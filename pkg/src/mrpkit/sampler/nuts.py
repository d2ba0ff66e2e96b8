"""No-U-Turn sampler with dual-averaging step size and diagonal mass adaptation.

Single-chain kernel over an arbitrary differentiable log density. The target
is supplied as one callable returning (log density, gradient); everything here
is plain numpy and a per-chain Generator, so a chain is a pure function of
(target, seed, config).

Warmup runs in three phases: a fast initial buffer (step size only), a series
of doubling "slow" windows that accumulate a diagonal variance estimate of the
target (the inverse mass), and a fast terminal buffer. Dual averaging restarts
after every mass update since the step size must be retuned for the new
metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

LogpGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass
class DualAveraging:
    """Nesterov-style dual averaging on log step size (Hoffman & Gelman 2014)."""

    mu: float
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    log_eps: float = 0.0
    log_eps_bar: float = 0.0
    h_bar: float = 0.0
    t: int = 0

    def update(self, accept_stat: float, target: float) -> float:
        self.t += 1
        eta = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (target - accept_stat)
        self.log_eps = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        w = self.t ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def averaged(self) -> float:
        return math.exp(self.log_eps_bar)


class RunningVariance:
    """Welford accumulator for the diagonal posterior variance."""

    def __init__(self, dim: int):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def regularized(self) -> np.ndarray:
        """Shrunk variance estimate; stays positive for short windows."""
        if self.n < 2:
            return np.ones_like(self.mean)
        var = self.m2 / (self.n - 1)
        w = self.n / (self.n + 5.0)
        return w * var + (1.0 - w) * 1e-3


def warmup_schedule(n_warmup: int, fast_initial: float = 0.15, fast_terminal: float = 0.10,
                    base_window: int = 25) -> tuple[int, list[int], int]:
    """(end of initial fast phase, slow-window end indices, start of terminal fast phase)."""
    init_end = int(fast_initial * n_warmup)
    term_start = n_warmup - int(fast_terminal * n_warmup)
    ends: list[int] = []
    if term_start <= init_end:
        return init_end, ends, max(term_start, init_end)
    pos = init_end
    win = min(base_window, term_start - pos)
    while pos + win <= term_start:
        # absorb a trailing stub that could not fit another doubled window
        if term_start - (pos + win) < win:
            ends.append(term_start)
            pos = term_start
            break
        ends.append(pos + win)
        pos += win
        win *= 2
    if pos < term_start:
        ends.append(term_start)
    return init_end, ends, term_start


def leapfrog(
    logp_grad: LogpGrad,
    q: np.ndarray,
    p: np.ndarray,
    grad: np.ndarray,
    eps: float,
    inv_mass: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """One leapfrog step; returns (q, p, log density, gradient) at the new point."""
    p_half = p + 0.5 * eps * grad
    q_new = q + eps * inv_mass * p_half
    lp_new, grad_new = logp_grad(q_new)
    p_new = p_half + 0.5 * eps * grad_new
    return q_new, p_new, lp_new, grad_new


def _kinetic(p: np.ndarray, inv_mass: np.ndarray) -> float:
    return 0.5 * float(np.sum(p * p * inv_mass))


def _hamiltonian(lp: float, p: np.ndarray, inv_mass: np.ndarray) -> float:
    return -lp + _kinetic(p, inv_mass)


@dataclass
class _Tree:
    q_minus: np.ndarray
    p_minus: np.ndarray
    grad_minus: np.ndarray
    q_plus: np.ndarray
    p_plus: np.ndarray
    grad_plus: np.ndarray
    q_prop: np.ndarray
    lp_prop: float
    grad_prop: np.ndarray
    n_valid: int
    keep_going: bool
    alpha_sum: float
    n_alpha: int
    divergent: bool


def _uturn(tree: _Tree, inv_mass: np.ndarray) -> bool:
    dq = tree.q_plus - tree.q_minus
    return (
        float(dq @ (inv_mass * tree.p_minus)) < 0.0
        or float(dq @ (inv_mass * tree.p_plus)) < 0.0
    )


def _build_tree(
    logp_grad: LogpGrad,
    q: np.ndarray,
    p: np.ndarray,
    grad: np.ndarray,
    log_u: float,
    direction: int,
    depth: int,
    eps: float,
    inv_mass: np.ndarray,
    h0: float,
    divergence_threshold: float,
    rng: np.random.Generator,
) -> _Tree:
    if depth == 0:
        q1, p1, lp1, g1 = leapfrog(logp_grad, q, p, grad, direction * eps, inv_mass)
        h1 = _hamiltonian(lp1, p1, inv_mass) if np.isfinite(lp1) else math.inf
        energy_error = h1 - h0
        divergent = (not math.isfinite(h1)) or energy_error > divergence_threshold
        n_valid = int((not divergent) and log_u <= -h1)
        keep_going = (not divergent) and (log_u < divergence_threshold - h1)
        alpha = math.exp(min(0.0, -energy_error)) if math.isfinite(energy_error) else 0.0
        return _Tree(q1, p1, g1, q1, p1, g1, q1, lp1, g1, n_valid, keep_going, alpha, 1, divergent)

    inner = _build_tree(
        logp_grad, q, p, grad, log_u, direction, depth - 1, eps, inv_mass, h0,
        divergence_threshold, rng,
    )
    if not inner.keep_going:
        return inner
    if direction == -1:
        outer = _build_tree(
            logp_grad, inner.q_minus, inner.p_minus, inner.grad_minus, log_u, direction,
            depth - 1, eps, inv_mass, h0, divergence_threshold, rng,
        )
        inner.q_minus, inner.p_minus, inner.grad_minus = (
            outer.q_minus, outer.p_minus, outer.grad_minus,
        )
    else:
        outer = _build_tree(
            logp_grad, inner.q_plus, inner.p_plus, inner.grad_plus, log_u, direction,
            depth - 1, eps, inv_mass, h0, divergence_threshold, rng,
        )
        inner.q_plus, inner.p_plus, inner.grad_plus = (
            outer.q_plus, outer.p_plus, outer.grad_plus,
        )
    total = inner.n_valid + outer.n_valid
    if total > 0 and rng.random() < outer.n_valid / total:
        inner.q_prop, inner.lp_prop, inner.grad_prop = (
            outer.q_prop, outer.lp_prop, outer.grad_prop,
        )
    inner.n_valid = total
    inner.alpha_sum += outer.alpha_sum
    inner.n_alpha += outer.n_alpha
    inner.divergent = inner.divergent or outer.divergent
    inner.keep_going = outer.keep_going and not _uturn(inner, inv_mass)
    return inner


def nuts_transition(
    logp_grad: LogpGrad,
    q: np.ndarray,
    lp: float,
    grad: np.ndarray,
    eps: float,
    inv_mass: np.ndarray,
    max_depth: int,
    divergence_threshold: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, np.ndarray, float, int, bool]:
    """One draw. Returns (q, lp, grad, accept statistic, tree depth, divergent flag)."""
    p0 = rng.standard_normal(q.shape[0]) / np.sqrt(inv_mass)
    h0 = _hamiltonian(lp, p0, inv_mass)
    log_u = -h0 + math.log(rng.random())

    tree = _Tree(q, p0, grad, q, p0, grad, q, lp, grad, 1, True, 0.0, 0, False)
    depth = 0
    divergent = False
    while tree.keep_going and depth < max_depth:
        direction = -1 if rng.random() < 0.5 else 1
        if direction == -1:
            sub = _build_tree(
                logp_grad, tree.q_minus, tree.p_minus, tree.grad_minus, log_u, direction,
                depth, eps, inv_mass, h0, divergence_threshold, rng,
            )
            tree.q_minus, tree.p_minus, tree.grad_minus = sub.q_minus, sub.p_minus, sub.grad_minus
        else:
            sub = _build_tree(
                logp_grad, tree.q_plus, tree.p_plus, tree.grad_plus, log_u, direction,
                depth, eps, inv_mass, h0, divergence_threshold, rng,
            )
            tree.q_plus, tree.p_plus, tree.grad_plus = sub.q_plus, sub.p_plus, sub.grad_plus
        divergent = divergent or sub.divergent
        if sub.keep_going and sub.n_valid > 0:
            if rng.random() < min(1.0, sub.n_valid / tree.n_valid):
                tree.q_prop, tree.lp_prop, tree.grad_prop = sub.q_prop, sub.lp_prop, sub.grad_prop
        tree.n_valid += sub.n_valid
        tree.alpha_sum += sub.alpha_sum
        tree.n_alpha += sub.n_alpha
        tree.keep_going = sub.keep_going and not _uturn(tree, inv_mass)
        depth += 1
    accept_stat = tree.alpha_sum / max(1, tree.n_alpha)
    return tree.q_prop, tree.lp_prop, tree.grad_prop, accept_stat, depth, divergent


def find_initial_point(
    logp_grad: LogpGrad, dim: int, rng: np.random.Generator, radius: float, tries: int = 100
) -> tuple[np.ndarray, float, np.ndarray]:
    for _ in range(tries):
        q = rng.uniform(-radius, radius, size=dim)
        try:
            lp, grad = logp_grad(q)
        except (ValueError, FloatingPointError):
            continue
        if math.isfinite(lp) and np.all(np.isfinite(grad)):
            return q, lp, grad
    raise RuntimeError(f"no finite initial density after {tries} draws")


def initial_step_size(
    logp_grad: LogpGrad,
    q: np.ndarray,
    lp: float,
    grad: np.ndarray,
    inv_mass: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """Doubling/halving heuristic toward a one-step acceptance near 0.5."""
    eps = 1.0
    p0 = rng.standard_normal(q.shape[0]) / np.sqrt(inv_mass)
    h0 = _hamiltonian(lp, p0, inv_mass)

    def log_accept(eps_try: float) -> float:
        _, p1, lp1, _ = leapfrog(logp_grad, q, p0, grad, eps_try, inv_mass)
        if not math.isfinite(lp1):
            return -math.inf
        return -(_hamiltonian(lp1, p1, inv_mass) - h0)

    la = log_accept(eps)
    a = 1.0 if la > math.log(0.5) else -1.0
    for _ in range(64):
        if not a * la > -a * math.log(2.0):
            break
        eps *= 2.0**a
        if eps < 1e-10 or eps > 1e7:
            break
        la = log_accept(eps)
    return eps


@dataclass
class ChainResult:
    draws: np.ndarray  # (iters, dim) unconstrained
    divergent: np.ndarray
    tree_depth: np.ndarray
    accept_stat: np.ndarray
    step_size: np.ndarray
    warmup_divergences: int
    final_step_size: float
    inv_mass: np.ndarray


def sample_chain(
    logp_grad: LogpGrad,
    dim: int,
    rng: np.random.Generator,
    warmup_iters: int,
    sampling_iters: int,
    target_accept: float = 0.8,
    max_depth: int = 10,
    init_radius: float = 2.0,
    divergence_threshold: float = 1000.0,
    progress: Callable[[str, int, int], None] | None = None,
) -> ChainResult:
    q, lp, grad = find_initial_point(logp_grad, dim, rng, init_radius)
    inv_mass = np.ones(dim)

    eps = initial_step_size(logp_grad, q, lp, grad, inv_mass, rng)
    da = DualAveraging(mu=math.log(10.0 * eps))
    init_end, window_ends, _term_start = warmup_schedule(warmup_iters)
    window_ends_set = set(window_ends)
    accum = RunningVariance(dim)
    warmup_divergences = 0

    for it in range(warmup_iters):
        q, lp, grad, accept, _depth, div = nuts_transition(
            logp_grad, q, lp, grad, eps, inv_mass, max_depth, divergence_threshold, rng
        )
        warmup_divergences += int(div)
        eps = da.update(accept, target_accept)
        if init_end <= it:
            accum.update(q)
        if (it + 1) in window_ends_set:
            inv_mass = accum.regularized()
            accum = RunningVariance(dim)
            eps = initial_step_size(logp_grad, q, lp, grad, inv_mass, rng)
            da = DualAveraging(mu=math.log(10.0 * eps))
        if progress is not None and (it + 1) % 100 == 0:
            progress("warmup", it + 1, warmup_iters)

    eps = da.averaged if da.t > 0 else eps
    draws = np.empty((sampling_iters, dim))
    divergent = np.zeros(sampling_iters, dtype=bool)
    tree_depth = np.zeros(sampling_iters, dtype=np.int64)
    accept_stat = np.zeros(sampling_iters)
    for it in range(sampling_iters):
        q, lp, grad, accept, depth, div = nuts_transition(
            logp_grad, q, lp, grad, eps, inv_mass, max_depth, divergence_threshold, rng
        )
        draws[it] = q
        divergent[it] = div
        tree_depth[it] = depth
        accept_stat[it] = accept
        if progress is not None and (it + 1) % 100 == 0:
            progress("sampling", it + 1, sampling_iters)

    return ChainResult(
        draws=draws,
        divergent=divergent,
        tree_depth=tree_depth,
        accept_stat=accept_stat,
        step_size=np.full(sampling_iters, eps),
        warmup_divergences=warmup_divergences,
        final_step_size=eps,
        inv_mass=inv_mass,
    )
