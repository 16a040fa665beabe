"""Online learning with finitely many losses.

A decision set ``X`` and a family of ``D`` loss functions are mapped to the
set ``K = co nu(X)`` in ``[0, 1]^D``, where ``nu(x)`` is the vector of all
losses at ``x``.  Losses become linear on ``K`` (loss ``d`` is the ``d``-th
coordinate), so a regret minimiser for linear losses over ``K`` can be run
there; its iterates are turned back into decisions by a Caratheodory
decomposition followed by a preimage.

Two inner minimisers are provided: projected online gradient descent for
full feedback, and a self-concordant-barrier bandit algorithm (FTRL with the
log-barrier of ``K``, exploring along the Dikin ellipsoid) for bandit
feedback.  Both are available as single-learner state transitions and as a
batched simulator that runs many seeds in lockstep.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NotAMember, NumericalFailure
from .geometry import ImageHull, Polytope, image_hull, linear_preimage, solve_lp
from .rng import round_uniforms, stream_uniforms

OGD = "OgdFull"
BANDIT = "BarrierBandit"
ALGORITHMS = (OGD, BANDIT)


@dataclass(frozen=True, eq=False)
class FiniteLossProblem:
    """Losses ``L_d``, ``d < D``, over a decision set.

    Linear problems carry ``loss_matrix`` (``L_d(x) = (M x)_d``) and the
    decision polytope.  Point-set problems carry only the image hull, whose
    vertex preimages are the candidate decisions.
    """

    image: ImageHull
    loss_matrix: np.ndarray | None = None
    decision_polytope: Polytope | None = None

    @classmethod
    def from_linear(cls, M, X, check=True):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        image = image_hull(M, X)
        if check:
            lo, hi = image.vertices.min(), image.vertices.max()
            if lo < -1e-9 or hi > 1 + 1e-9:
                raise ValueError(f"losses leave [0, 1] on X (range {lo:.3g}..{hi:.3g})")
        return cls(image, M, X)

    @classmethod
    def from_points(cls, decisions, loss_vectors):
        loss_vectors = np.asarray(loss_vectors, dtype=float)
        if loss_vectors.min() < -1e-9 or loss_vectors.max() > 1 + 1e-9:
            raise ValueError("losses must lie in [0, 1]")
        return cls(ImageHull(loss_vectors, np.asarray(decisions, dtype=float)))

    @property
    def D(self):
        return self.image.ambient_dim

    @property
    def linear(self):
        return self.loss_matrix is not None

    def losses(self, x):
        """Loss vector ``nu(x)`` of a decision (linear problems)."""
        return self.loss_matrix @ np.asarray(x, dtype=float)

    def best_fixed(self, counts):
        """``min_z counts . z`` over ``K``: value and a minimising vertex index."""
        vals = self.image.vertices @ np.asarray(counts, dtype=float)
        i = int(np.argmin(vals))
        return float(vals[i]), i


@dataclass(frozen=True, eq=False)
class LearnerState:
    """State of an inner regret minimiser over ``K``.

    ``z`` is the current iterate in ambient coordinates.  The bandit learner
    also keeps its FTRL center and cumulative loss estimate in the reduced
    coordinates of the affine hull of ``K``.  Randomness is drawn from
    counter-based streams indexed by ``(seed, t)``, so every step is a pure
    function of the state.
    """

    algorithm: str
    z: np.ndarray
    t: int
    horizon: int
    eta: float
    seed: int
    image: ImageHull
    center: np.ndarray | None = None
    cum_estimate: np.ndarray | None = None


def ogd_rate(D, T):
    return float(np.sqrt(D / T))


def bandit_rate(image, T):
    """Barrier-FTRL step size ``sqrt(theta log T) / (4 p sqrt T)`` with the
    facet-count barrier parameter ``theta`` and ``p = dim K``."""
    p = max(image.dim, 1)
    theta = max(image.n_facets, 1)
    return float(np.sqrt(theta * np.log(max(T, 2))) / (4 * p * np.sqrt(T)))


def full_feedback_bound(D, T):
    return float(np.sqrt(D * T))


def bandit_feedback_bound(D, T):
    return float(16 * D ** 1.5 * np.sqrt(T * np.log(T))) if T > 1 else 16 * D ** 1.5


# -- log-barrier machinery (batched over rows) ---------------------------

def _barrier_terms(image, Y):
    G, h = image.normals, image.offsets
    slack = h - Y @ G.T
    if np.any(slack <= 0):
        raise NumericalFailure("barrier iterate left the interior")
    inv = 1.0 / slack
    grad = inv @ G
    hess = np.einsum("sm,mp,mq->spq", inv * inv, G, G)
    return grad, hess


def _barrier_minimize(image, Y, linear, tol=1e-9, max_iter=200):
    """Damped Newton for ``min linear . y + barrier(y)`` from interior ``Y``."""
    Y = Y.copy()
    for _ in range(max_iter):
        grad, hess = _barrier_terms(image, Y)
        g = linear + grad
        try:
            step = np.linalg.solve(hess, g[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("barrier Hessian is singular") from exc
        dec = np.sqrt(np.maximum(np.sum(g * step, axis=1), 0.0))
        if dec.max() < tol:
            return Y
        Y -= step / (1.0 + dec)[:, None]
    raise NumericalFailure("barrier Newton iteration did not converge")


def _exploration(image, Y, u):
    """Dikin-ellipsoid exploration: pick eigen-direction ``i`` and sign from
    the uniforms ``u`` (rows ``(u_i, u_sign)``); returns play points, the
    direction vectors scaled by ``sqrt(lambda_i)`` and the signs."""
    _, hess = _barrier_terms(image, Y)
    lam, vec = np.linalg.eigh(hess)
    p = Y.shape[1]
    i = np.minimum((u[:, 0] * p).astype(int), p - 1)
    eps = np.where(u[:, 1] < 0.5, -1.0, 1.0)
    rows = np.arange(len(Y))
    e = vec[rows, :, i]
    root = np.sqrt(lam[rows, i])
    play = Y + (eps / root)[:, None] * e
    return play, (root * eps)[:, None] * e


def _analytic_center(image):
    y0 = image.reduced_vertices.mean(axis=0)[None, :]
    return _barrier_minimize(image, y0, np.zeros_like(y0))[0]


# -- single learner ------------------------------------------------------

def init_learner(problem, algorithm, horizon, seed, eta_scale=1.0):
    """Fresh learner.  ``eta_scale`` multiplies the theory step size."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    image = problem.image
    if algorithm == OGD:
        z0 = image.vertices.mean(axis=0)
        return LearnerState(OGD, z0, 0, int(horizon), eta_scale * ogd_rate(problem.D, horizon),
                            int(seed), image)
    if image.dim == 0:
        y0 = np.zeros(0)
    else:
        y0 = _analytic_center(image)
    return LearnerState(BANDIT, image.lift(y0), 0, int(horizon), eta_scale * bandit_rate(image, horizon),
                        int(seed), image, y0, np.zeros_like(y0))


def recommend(state):
    """Point of ``K`` the inner minimiser plays this round.

    For OGD this is the iterate; the bandit learner plays a random point on
    the Dikin ellipsoid around its center, whose mean is the center.
    """
    if state.algorithm == OGD or state.image.dim == 0:
        return state.z
    u = round_uniforms(state.seed, "explore", state.t)[None, :2]
    play, _ = _exploration(state.image, state.center[None, :], u)
    return state.image.lift(play[0])


def ogd_full_step(state, d):
    """Gradient step on the revealed loss ``d`` followed by projection."""
    if state.algorithm != OGD:
        raise ValueError("ogd_full_step needs a full-feedback learner")
    grad = np.zeros_like(state.z)
    grad[int(d)] = 1.0
    z = state.image.project(state.z - state.eta * grad)
    return replace(state, z=z, t=state.t + 1)


def barrier_bandit_step(state, value):
    """Update from the scalar loss of this round's play.

    The one-point estimate ``p * value * eps * sqrt(lambda_i) e_i`` is
    unbiased for the loss gradient in reduced coordinates.
    """
    if state.algorithm != BANDIT:
        raise ValueError("barrier_bandit_step needs a bandit learner")
    image = state.image
    if image.dim == 0:
        return replace(state, t=state.t + 1)
    u = round_uniforms(state.seed, "explore", state.t)[None, :2]
    _, scaled = _exploration(image, state.center[None, :], u)
    est = state.cum_estimate + image.dim * float(value) * scaled[0]
    center = _barrier_minimize(image, state.center[None, :], state.eta * est[None, :])[0]
    return replace(state, z=image.lift(center), t=state.t + 1, center=center, cum_estimate=est)


def play_decision(problem, z, seed, t):
    """Turn a point of ``K`` into a decision.

    Linear problems use the single atom ``z`` and a preimage of it.  Point-set
    problems decompose ``z`` over hull vertices and sample one atom.
    Returns ``(x, atom)``.
    """
    image = problem.image
    if problem.linear:
        if image.violation(z) > 1e-8:
            raise NotAMember("iterate left the image set")
        x = linear_preimage(problem.loss_matrix, z, problem.decision_polytope, hull=image)
        return x, z
    comb = image.decompose(z)
    u = round_uniforms(seed, "atom", t)[0]
    j = min(int(np.searchsorted(np.cumsum(comb.weights), u, side="right")), len(comb) - 1)
    return comb.preimages[j], comb.points[j]


def algorithm1_round(problem, state, feedback):
    """One round of the reduction.

    ``feedback`` is the loss index ``d_t`` for full feedback, or a callable
    returning the scalar loss of the played decision for bandit feedback.
    Returns ``(x_t, new_state)``.
    """
    z = recommend(state)
    x, atom = play_decision(problem, z, state.seed, state.t)
    if state.algorithm == OGD:
        return x, ogd_full_step(state, int(feedback))
    return x, barrier_bandit_step(state, float(feedback(x)))


# -- batched simulation --------------------------------------------------

@dataclass
class SimulationResult:
    """Per-seed records of a batched run.

    ``expected_loss[s, t]`` is the loss of round ``t`` in expectation over
    the learner's own randomness in that round (``z_t . 1_{d_t}``), and
    ``realized_loss`` the loss of the decision actually played.
    """

    expected_loss: np.ndarray
    realized_loss: np.ndarray
    best_fixed: np.ndarray
    plays: np.ndarray | None = None

    @property
    def regret(self):
        return self.expected_loss.sum(axis=1) - self.best_fixed

    @property
    def realized_regret(self):
        return self.realized_loss.sum(axis=1) - self.best_fixed


def simulate(problem, sequences, algorithm, seeds, record_plays=False, observe=None,
             eta_scale=1.0):
    """Run the reduction for several seeds at once.

    ``sequences`` is an ``(S, T)`` array of loss indices chosen obliviously,
    ``seeds`` the ``S`` learner seeds.  Rows evolve as independent
    single-learner runs driven by :func:`algorithm1_round`.

    ``observe(x, d, t)``, when given, returns the scalar feedback for the
    played decisions ``x`` (rows) in place of their exact loss; it must be
    an unbiased estimate of it (bandit mode only).
    """
    seq = np.atleast_2d(np.asarray(sequences, dtype=int))
    S, T = seq.shape
    if len(seeds) != S:
        raise ValueError("one seed per sequence is required")
    image = problem.image
    rows = np.arange(S)
    exp_loss = np.zeros((S, T))
    real_loss = np.zeros((S, T))
    plays = None
    atom_u = None
    if not problem.linear:
        atom_u = np.stack([stream_uniforms(s, "atom", T)[:, 0] for s in seeds])
    states = [init_learner(problem, algorithm, T, s, eta_scale) for s in seeds]
    eta = states[0].eta
    Z = np.stack([st.z for st in states])
    if algorithm == BANDIT and image.dim > 0:
        Y = np.stack([st.center for st in states])
        est = np.zeros_like(Y)
        explore = np.stack([stream_uniforms(s, "explore", T)[:, :2] for s in seeds])
    for t in range(T):
        d = seq[:, t]
        exp_loss[:, t] = Z[rows, d]
        if algorithm == BANDIT and image.dim > 0:
            playY, scaled = _exploration(image, Y, explore[:, t])
            play = image.lift(playY)
        else:
            play = Z
        if problem.linear:
            real_loss[:, t] = play[rows, d]
            if record_plays or observe is not None:
                x = image.preimage_batch(play)
            if observe is not None:
                real_loss[:, t] = observe(x, d, t)
        else:
            idx, w = image.decompose_batch(play)
            j = (np.cumsum(w, axis=1) <= atom_u[:, t][:, None]).sum(axis=1)
            j = np.minimum(j, w.shape[1] - 1)
            vert = idx[rows, j]
            real_loss[:, t] = image.vertices[vert, d]
            if record_plays:
                x = image.vertex_preimages[vert]
        if record_plays:
            if plays is None:
                plays = np.zeros((S, T, x.shape[1]))
            plays[:, t] = x
        if algorithm == OGD:
            step = Z.copy()
            step[rows, d] -= eta
            Z = image.project(step)
        elif image.dim > 0:
            est += image.dim * real_loss[:, t][:, None] * scaled
            Y = _barrier_minimize(image, Y, eta * est)
            Z = image.lift(Y)
    counts = np.stack([np.bincount(r, minlength=problem.D) for r in seq]).astype(float)
    best = np.array([problem.best_fixed(c)[0] for c in counts])
    return SimulationResult(exp_loss, real_loss, best, plays)


def regret_slope(horizons, regrets):
    """Least-squares slope of ``log R_T`` against ``log T``."""
    r = np.maximum(np.asarray(regrets, dtype=float), 1e-12)
    return float(np.polyfit(np.log(horizons), np.log(r), 1)[0])


# -- synthetic problems ---------------------------------------------------

def synthetic_problem(D, N, seed, n_cuts=2):
    """Random linear finite-loss problem.

    ``X`` is the unit box in ``R^N`` cut by ``n_cuts`` random halfspaces that
    keep the box center; ``M`` is nonnegative with each row scaled so its
    maximum over ``X`` is 1, hence all losses lie in ``[0, 1]``.
    """
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n_cuts, N))
    b = A @ np.full(N, 0.5) + rng.uniform(0.1, 0.3, size=n_cuts)
    X = Polytope.from_constraints(N, A, b, lower=0.0, upper=1.0)
    M = rng.uniform(size=(D, N))
    for i in range(D):
        M[i] /= solve_lp(M[i], X, "Max").value
    return FiniteLossProblem.from_linear(M, X)
