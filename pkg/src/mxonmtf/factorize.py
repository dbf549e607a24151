"""Multiplex orthogonal nonnegative matrix tri-factorization.

Each layer is modelled as ``A_l ~ H S_l H^T + H_l G_l H_l^T`` with ``H``
shared across layers (common communities) and ``H_l`` private to layer ``l``.
Factors are fitted with the multiplicative updates for the orthogonality
constrained problem, swept in the order H, all H_l, all S_l, all G_l.

Those updates descend the Lagrangian of the constrained problem, not the
plain Frobenius objective, and can raise the latter slightly. The membership
updates are therefore safeguarded by default: the full multiplicative step is
taken when it does not increase the objective, otherwise the step exponent is
halved a few times and, failing that, the factor is left unchanged. Pass
``safeguard=False`` for the bare updates.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .numerics import RandomStream, ShapeError, as_generator

log = logging.getLogger(__name__)

EPS = 1e-12
INIT_LO, INIT_HI = 0.1, 1.0
STEP_EXPONENTS = (1.0, 0.5, 0.25, 0.125, 0.0625)
CORE_DIAG = (0.5, 1.0)
CORE_OFF = (0.1, 0.2)


class FactorizationError(FloatingPointError):
    """Non-finite values appeared during the updates."""


@dataclass
class FactorSet:
    """Factors ``H``, ``{H_l}``, ``{S_l}``, ``{G_l}`` of the tri-factorization."""

    H: np.ndarray
    Hl: list
    S: list
    G: list

    @property
    def kc(self):
        return self.H.shape[1]

    @property
    def kp(self):
        return [h.shape[1] for h in self.Hl]

    @property
    def L(self):
        return len(self.Hl)

    def copy(self):
        return FactorSet(
            self.H.copy(),
            [h.copy() for h in self.Hl],
            [s.copy() for s in self.S],
            [g.copy() for g in self.G],
        )

    def arrays(self):
        return [self.H, *self.Hl, *self.S, *self.G]

    def max_abs_diff(self, other):
        return max(
            (float(np.max(np.abs(a - b), initial=0.0)) for a, b in zip(self.arrays(), other.arrays())),
            default=0.0,
        )

    def layer_fit(self, l):
        """Reconstruction ``H S_l H^T + H_l G_l H_l^T`` of layer ``l``."""
        H, Hl = self.H, self.Hl[l]
        return (H @ self.S[l]) @ H.T + (Hl @ self.G[l]) @ Hl.T

    def orthogonality_gap(self):
        """``||H^T H - I||_F`` and ``||H_l^T H_l - I||_F`` per layer (diagnostic only)."""
        def gap(m):
            return float(np.linalg.norm(m.T @ m - np.eye(m.shape[1])))

        return gap(self.H), [gap(h) for h in self.Hl]


@dataclass
class RunResult:
    factors: FactorSet
    objective_trace: list
    iterations_used: int
    seed_index: int
    converged: bool = False
    rescues: int = 0
    rejected_steps: int = 0

    @property
    def final_objective(self):
        return self.objective_trace[-1]


@dataclass
class SolverOptions:
    max_iters: int = 1000
    tol: float = 1e-6
    window: int = 10
    safeguard: bool = True
    eps: float = EPS
    core_init: str = "diagonal"

    @classmethod
    def coerce(cls, opts=None, **overrides):
        base = opts if opts is not None else cls()
        vals = {k: getattr(base, k) for k in cls.__dataclass_fields__}
        vals.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**vals)


def _sym(m):
    return (m + np.swapaxes(m, -1, -2)) / 2


def _core(rng, k, style):
    if style == "uniform":
        return _sym(rng.uniform(INIT_LO, INIT_HI, size=(k, k)))
    # strong self-affinity, weak cross terms: keeps two columns from
    # settling on the same block early on
    m = _sym(rng.uniform(*CORE_OFF, size=(k, k)))
    m[np.diag_indices(k)] = rng.uniform(*CORE_DIAG, size=k)
    return m


def init_factors(stream, n, k_c, k_p, core="diagonal"):
    """Random positive factors with all entries in ``[0.1, 1]``.

    Membership matrices are uniform on ``[0.1, 1]``. ``S_l`` and ``G_l`` are
    symmetric; with ``core="diagonal"`` their diagonal is drawn from
    ``[0.5, 1]`` and the rest from ``[0.1, 0.2]``, with ``core="uniform"``
    every entry is uniform on ``[0.1, 1]`` before symmetrizing.
    """
    if core not in ("diagonal", "uniform"):
        raise ValueError(f"unknown core initialization {core!r}")
    k_p = [int(k) for k in k_p]
    if k_c < 0 or any(k < 0 for k in k_p):
        raise ValueError("community counts must be nonnegative")
    if not k_p:
        raise ValueError("need at least one layer")
    if k_c == 0 and all(k == 0 for k in k_p):
        raise ValueError("model order is empty: k_c = 0 and every k_p = 0")
    for l, k in enumerate(k_p):
        if k_c + k < 1:
            raise ValueError(f"layer {l} has no communities (k_c + k_p = 0)")
    rng = as_generator(stream)
    H = rng.uniform(INIT_LO, INIT_HI, size=(n, k_c))
    Hl = [rng.uniform(INIT_LO, INIT_HI, size=(n, k)) for k in k_p]
    S = [_core(rng, k_c, core) for _ in k_p]
    G = [_core(rng, k, core) for k in k_p]
    return FactorSet(H, Hl, S, G)


def _check_shapes(net, f):
    n, L = net.n, net.L
    if f.L != L or len(f.S) != L or len(f.G) != L:
        raise ShapeError(f"factor set has {f.L} layers, network has {L}")
    if f.H.shape[0] != n:
        raise ShapeError(f"H has {f.H.shape[0]} rows, network has {n} nodes")
    for l in range(L):
        k = f.Hl[l].shape[1]
        if f.Hl[l].shape[0] != n:
            raise ShapeError(f"H_{l} has shape {f.Hl[l].shape}, expected ({n}, k)")
        if f.S[l].shape != (f.kc, f.kc):
            raise ShapeError(f"S_{l} has shape {f.S[l].shape}, expected {(f.kc, f.kc)}")
        if f.G[l].shape != (k, k):
            raise ShapeError(f"G_{l} has shape {f.G[l].shape}, expected {(k, k)}")


def layer_objective(a, f, l):
    r = a - f.layer_fit(l)
    return float(np.sum(r * r))


def objective(net, f):
    """``sum_l ||A_l - H S_l H^T - H_l G_l H_l^T||_F^2``."""
    _check_shapes(net, f)
    return sum(layer_objective(a, f, l) for l, a in enumerate(net.layers))


def _finite(x, what, it=None):
    if not np.all(np.isfinite(x)):
        where = f" at iteration {it}" if it is not None else ""
        raise FactorizationError(f"non-finite values in {what}{where}")
    return x


def _ratio_H(net, f, eps):
    H = f.H
    num = np.zeros_like(H)
    den = np.zeros_like(H)
    for l, a in enumerate(net.layers):
        Hl, S, G = f.Hl[l], f.S[l], f.G[l]
        AH = a @ H
        HtHl = H.T @ Hl
        # H H^T H_l G^T H_l^T H S, grouped to stay O(n k^2)
        cross = (HtHl @ G.T) @ HtHl.T
        num += AH @ S + H @ (cross @ S)
        den += Hl @ (G.T @ (HtHl.T @ S)) + H @ ((H.T @ AH) @ S)
    return num / (den + eps)


def _ratio_Hl(net, f, l, eps):
    a = net.layers[l]
    H, Hl, S, G = f.H, f.Hl[l], f.S[l], f.G[l]
    AHl = a @ Hl
    HltH = Hl.T @ H
    cross = (HltH @ S.T) @ HltH.T
    num = AHl @ G + Hl @ (cross @ G)
    den = H @ (S.T @ (HltH.T @ G.T)) + Hl @ ((Hl.T @ AHl) @ G)
    return num / (den + eps)


def _ratio_S(net, f, l, eps):
    a = net.layers[l]
    H, Hl, S, G = f.H, f.Hl[l], f.S[l], f.G[l]
    HtH = H.T @ H
    HtHl = H.T @ Hl
    num = H.T @ (a @ H)
    den = HtH @ S @ HtH + HtHl @ G @ HtHl.T
    return num / (den + eps)


def _ratio_G(net, f, l, eps):
    a = net.layers[l]
    H, Hl, S, G = f.H, f.Hl[l], f.S[l], f.G[l]
    HltHl = Hl.T @ Hl
    HltH = Hl.T @ H
    num = Hl.T @ (a @ Hl)
    den = HltHl @ G @ HltHl + HltH @ S @ HltH.T
    return num / (den + eps)


def _guarded(current, ratio, evaluate, baseline):
    """Largest step ``current * ratio**e`` that does not raise the objective.

    Returns ``(factor, objective_value, accepted)``.
    """
    for e in STEP_EXPONENTS:
        cand = current * ratio if e == 1.0 else current * ratio**e
        value = evaluate(cand)
        if value <= baseline:
            return cand, value, True
    return current, baseline, False


def update_H(net, f, safeguard=False, eps=EPS):
    """Multiplicative update of the common membership matrix ``H``.

    ``H <- H * sum_l(A_l H S_l + H H^T H_l G_l^T H_l^T H S_l)
              / (sum_l(H_l G_l^T H_l^T H S_l + H H^T A_l H S_l) + eps)``

    With ``safeguard=True`` the step is damped or dropped if it would raise
    the objective.
    """
    _check_shapes(net, f)
    if f.kc == 0:
        return f.H.copy()
    ratio = _finite(_ratio_H(net, f, eps), "H update")
    if not safeguard:
        return f.H * ratio

    def evaluate(H):
        g = FactorSet(H, f.Hl, f.S, f.G)
        return sum(layer_objective(a, g, l) for l, a in enumerate(net.layers))

    return _guarded(f.H, ratio, evaluate, objective(net, f))[0]


def update_Hl(net, f, l, safeguard=False, eps=EPS):
    """Multiplicative update of the private membership matrix ``H_l``.

    ``H_l <- H_l * (A_l H_l G_l + H_l H_l^T H S_l^T H^T H_l G_l)
                 / (H S_l^T H^T H_l G_l^T + H_l H_l^T A_l H_l G_l + eps)``
    """
    _check_shapes(net, f)
    if f.Hl[l].shape[1] == 0:
        return f.Hl[l].copy()
    ratio = _finite(_ratio_Hl(net, f, l, eps), f"H_{l} update")
    if not safeguard:
        return f.Hl[l] * ratio
    a = net.layers[l]

    def evaluate(Hl):
        g = FactorSet(f.H, [*f.Hl[:l], Hl, *f.Hl[l + 1:]], f.S, f.G)
        return layer_objective(a, g, l)

    return _guarded(f.Hl[l], ratio, evaluate, layer_objective(a, f, l))[0]


def update_Sl(net, f, l, eps=EPS):
    """``S_l <- S_l * H^T A_l H / (H^T H S_l H^T H + H^T H_l G_l H_l^T H + eps)``, re-symmetrized."""
    _check_shapes(net, f)
    if f.kc == 0:
        return f.S[l].copy()
    return _sym(f.S[l] * _finite(_ratio_S(net, f, l, eps), f"S_{l} update"))


def update_Gl(net, f, l, eps=EPS):
    """``G_l <- G_l * H_l^T A_l H_l / (H_l^T H_l G_l H_l^T H_l + H_l^T H S_l H^T H_l + eps)``, re-symmetrized."""
    _check_shapes(net, f)
    if f.Hl[l].shape[1] == 0:
        return f.G[l].copy()
    return _sym(f.G[l] * _finite(_ratio_G(net, f, l, eps), f"G_{l} update"))


def _t(m):
    return np.swapaxes(m, -1, -2)


class _Sweeper:
    """One restart's mutable state; owns its factors exclusively.

    Layers are processed together on stacked ``L x n x k`` arrays. Private
    blocks narrower than the widest one are padded with zero columns, which
    multiplicative updates keep at zero. The per-layer ``H_l``, ``S_l`` and
    ``G_l`` updates do not interact across layers, so updating all layers at
    once gives the same result as visiting them in turn.
    """

    def __init__(self, net, f, opts, stream):
        self.opts = opts
        self.stream = stream
        self.A = net.stacked()
        self._buf = np.empty((net.n, net.n))
        L, n = net.L, net.n
        self.kp = f.kp
        kmax = max(self.kp, default=0)
        self.H = f.H.astype(float, copy=True)
        self.S = np.stack(f.S).astype(float)
        self.Hl = np.zeros((L, n, kmax))
        self.G = np.zeros((L, kmax, kmax))
        for l, k in enumerate(self.kp):
            self.Hl[l, :, :k] = f.Hl[l]
            self.G[l, :k, :k] = f.G[l]
        self.has_private = np.array([k > 0 for k in self.kp])
        self.layer_obj = self._objectives()
        self.rescues = 0
        self.rejected = 0

    @property
    def total(self):
        return float(self.layer_obj.sum())

    def factors(self):
        return FactorSet(
            self.H.copy(),
            [self.Hl[l, :, :k].copy() for l, k in enumerate(self.kp)],
            [s.copy() for s in self.S],
            [self.G[l, :k, :k].copy() for l, k in enumerate(self.kp)],
        )

    def _eval(self, l, H, Hl, scale):
        """Exact residual of layer ``l``, optionally after the best rescaling of its cores.

        The reconstruction is written into a reused buffer; allocating a
        fresh ``n x n`` array per call costs more than the arithmetic.
        """
        kc = H.shape[1]
        W = np.hstack([H, Hl])
        C = np.zeros((W.shape[1], W.shape[1]))
        C[:kc, :kc] = self.S[l]
        C[kc:, kc:] = self.G[l]
        F = np.matmul(W @ C, W.T, out=self._buf)
        a = self.A[l]
        alpha = 1.0
        if scale:
            cross, power = np.vdot(a, F), np.vdot(F, F)
            if cross > 0 and power > 0:
                alpha = cross / power
                F *= alpha
        np.subtract(a, F, out=F)
        return float(np.vdot(F, F)), alpha

    def _objectives(self):
        return np.array([self._eval(l, self.H, self.Hl[l], False)[0] for l in range(len(self.kp))])

    def _scaled(self, H, Hl, layers):
        """Per-layer objective after the best rescaling of ``S_l`` and ``G_l``."""
        out = np.array([self._eval(l, H, Hl[j], True) for j, l in enumerate(layers)])
        return out[:, 0], out[:, 1]

    def _rescale(self, idx, alpha):
        self.S[idx] *= alpha[:, None, None]
        self.G[idx] *= alpha[:, None, None]

    def _rescue(self, m, name, it):
        dead = np.flatnonzero(~np.any(m > 0, axis=0))
        if dead.size == 0:
            return m
        rng = as_generator(self.stream.child("rescue", name, it))
        m = m.copy()
        m[:, dead] = rng.uniform(INIT_LO, INIT_HI, size=(m.shape[0], dead.size))
        self.rescues += dead.size
        log.warning("reseeded %d dead column(s) of %s at iteration %d", dead.size, name, it)
        return m

    def _ratio_H(self, eps):
        H, Hl, S, G, A = self.H, self.Hl, self.S, self.G, self.A
        AH = A @ H
        HtHl = H.T @ Hl
        Gt = _t(G)
        cross = (HtHl @ Gt) @ _t(HtHl)
        num = (AH @ S + H @ (cross @ S)).sum(axis=0)
        den = (Hl @ (Gt @ (_t(HtHl) @ S)) + H @ ((H.T @ AH) @ S)).sum(axis=0)
        return num / (den + eps)

    def _ratio_Hl(self, eps):
        H, Hl, S, G, A = self.H, self.Hl, self.S, self.G, self.A
        AHl = A @ Hl
        HltH = _t(Hl) @ H
        St = _t(S)
        cross = (HltH @ St) @ _t(HltH)
        num = AHl @ G + Hl @ (cross @ G)
        den = H @ (St @ (_t(HltH) @ _t(G))) + Hl @ ((_t(Hl) @ AHl) @ G)
        return num / (den + eps)

    def _step_H(self, it):
        ratio = _finite(self._ratio_H(self.opts.eps), "H update", it)
        if not self.opts.safeguard:
            H = self.H * ratio
        else:
            H = self.H
            layers = range(len(self.kp))
            for e in STEP_EXPONENTS:
                cand = self.H * (ratio if e == 1.0 else ratio**e)
                vals, alpha = self._scaled(cand, self.Hl, layers)
                if vals.sum() <= self.total:
                    H = cand
                    self._rescale(slice(None), alpha)
                    self.layer_obj = vals
                    break
            else:
                self.rejected += 1
        self.H = self._rescue(H, "H", it)

    def _step_Hl(self, it):
        ratio = _finite(self._ratio_Hl(self.opts.eps), "H_l update", it)
        if not self.opts.safeguard:
            self.Hl = self.Hl * ratio
        else:
            pending = np.flatnonzero(self.has_private)
            new = self.Hl.copy()
            for e in STEP_EXPONENTS:
                if pending.size == 0:
                    break
                cand = self.Hl[pending] * (ratio[pending] if e == 1.0 else ratio[pending] ** e)
                vals, alpha = self._scaled(self.H, cand, pending)
                ok = vals <= self.layer_obj[pending]
                done = pending[ok]
                new[done] = cand[ok]
                self._rescale(done, alpha[ok])
                self.layer_obj[done] = vals[ok]
                pending = pending[~ok]
            self.rejected += int(pending.size)
            self.Hl = new
        for l, k in enumerate(self.kp):
            if k:
                self.Hl[l, :, :k] = self._rescue(self.Hl[l, :, :k], f"H_{l}", it)

    def _step_S(self, it):
        H, Hl, A, eps = self.H, self.Hl, self.A, self.opts.eps
        HtH = H.T @ H
        HtHl = H.T @ Hl
        num = H.T @ (A @ H)
        den = HtH @ self.S @ HtH + (HtHl @ self.G) @ _t(HtHl)
        self.S = _sym(self.S * _finite(num / (den + eps), "S_l update", it))

    def _step_G(self, it):
        H, Hl, A, eps = self.H, self.Hl, self.A, self.opts.eps
        HltHl = _t(Hl) @ Hl
        HltH = _t(Hl) @ H
        num = _t(Hl) @ (A @ Hl)
        den = HltHl @ self.G @ HltHl + (HltH @ self.S) @ _t(HltH)
        self.G = _sym(self.G * _finite(num / (den + eps), "G_l update", it))

    def sweep(self, it):
        if self.H.shape[1]:
            self._step_H(it)
        if self.Hl.shape[2]:
            self._step_Hl(it)
        if self.H.shape[1]:
            self._step_S(it)
        if self.Hl.shape[2]:
            self._step_G(it)
        self.layer_obj = self._objectives()
        return self.total


def run_factors(net, f, opts=None, stream=None, seed_index=0):
    """Iterate update sweeps from the given factors (modified in place)."""
    opts = SolverOptions.coerce(opts)
    _check_shapes(net, f)
    if stream is None:
        stream = RandomStream(0, seed_index)
    state = _Sweeper(net, f, opts, stream)
    trace = [state.total]
    streak = 0
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        prev = trace[-1]
        # overflow surfaces as the FactorizationError raised by the sweep
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            cur = state.sweep(it)
        trace.append(cur)
        rel = abs(prev - cur) / max(abs(prev), np.finfo(float).tiny)
        streak = streak + 1 if rel < opts.tol else 0
        if streak >= opts.window:
            converged = True
            break
    else:
        it = opts.max_iters
    f_out = state.factors()
    f.H, f.Hl, f.S, f.G = f_out.H, f_out.Hl, f_out.S, f_out.G
    return RunResult(
        factors=f,
        objective_trace=trace,
        iterations_used=it,
        seed_index=seed_index,
        converged=converged,
        rescues=state.rescues,
        rejected_steps=state.rejected,
    )


def run_once(net, order, stream, opts=None, **overrides):
    """Initialize from ``stream`` and iterate to convergence or ``max_iters``.

    ``order`` is a :class:`~mxonmtf.model_order.ModelOrder` or anything with
    ``k_c`` and ``k_p`` attributes. Keyword overrides (``max_iters``, ``tol``,
    ``window``, ``safeguard``, ``core_init``) patch ``opts``.
    """
    opts = SolverOptions.coerce(opts, **overrides)
    if not isinstance(stream, RandomStream):
        stream = RandomStream(int(stream))
    if len(order.k_p) != net.L:
        raise ValueError(f"order has {len(order.k_p)} layers, network has {net.L}")
    f = init_factors(stream.child("init"), net.n, order.k_c, order.k_p, opts.core_init)
    return run_factors(net, f, opts, stream, seed_index=stream.stream_index)


def single_layer_onmtf(a, k, stream, opts=None, **overrides):
    """Single-layer ONMTF ``A ~ U S U^T`` by multiplicative updates.

    Returns ``(U, S)``; ``U[i, j]`` scores how strongly node ``i`` belongs to
    community ``j``. This is the multiplex solver with one layer and no common
    term, whose updates reduce to ``U <- U * A U S / (U U^T A U S)`` and
    ``S <- S * U^T A U / (U^T U S U^T U)``.
    """
    from .multiplex import MultiplexNetwork

    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    net = a if isinstance(a, MultiplexNetwork) else MultiplexNetwork([a], allow_diagonal=True)
    if net.L != 1:
        raise ValueError("single_layer_onmtf expects one layer")
    opts = SolverOptions.coerce(opts, **overrides)
    if not isinstance(stream, RandomStream):
        stream = RandomStream(int(stream))
    f = init_factors(stream.child("init"), net.n, 0, [k], opts.core_init)
    res = run_factors(net, f, opts, stream, seed_index=stream.stream_index)
    return res.factors.Hl[0], res.factors.G[0]


def single_layer_run(a, k, stream, opts=None, **overrides):
    """Like :func:`single_layer_onmtf` but returns the full :class:`RunResult`."""
    from .multiplex import MultiplexNetwork

    net = a if isinstance(a, MultiplexNetwork) else MultiplexNetwork([a], allow_diagonal=True)
    opts = SolverOptions.coerce(opts, **overrides)
    if not isinstance(stream, RandomStream):
        stream = RandomStream(int(stream))
    f = init_factors(stream.child("init"), net.n, 0, [k], opts.core_init)
    return run_factors(net, f, opts, stream, seed_index=stream.stream_index)
