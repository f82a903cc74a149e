"""Dynamic stochastic blockmodel with Markov-chain group memberships.

Model: each node's group follows a hidden Markov chain (initial distribution
``alpha``, transition matrix ``pi``, shared across nodes). Conditional on the
endpoint groups (q, l) at time t, an ordered dyad between present nodes is a
retained tie with probability ``beta[t, q, l]``; a retained tie's log-weight
is Gaussian with mean ``mu[t, q, l]`` and global variance ``sigma2``.
Within-group (diagonal) presence and mean parameters are constant over time,
which pins down the rotation between time-varying connectivity and
time-varying memberships.

Estimation is variational EM with a structured mean-field family: the
posterior factorizes over nodes but keeps each node's chain exact, so the
E-step reduces to per-node forward-backward passes against tie-averaged
emission potentials. Node updates within a sweep read the previous sweep's
marginals (Jacobi semantics, deterministic under any parallel schedule); an
ELBO backtracking guard rejects a sweep that would lower the bound, which
makes the trace provably non-decreasing together with the closed-form M-step.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp

from .netbuild import TemporalNetwork

log = logging.getLogger(__name__)

PROB_EPS = 1e-9       # Bernoulli probabilities inside logs; never emit -inf
LOG_EPS = 1e-12       # floor for chain probabilities inside logs
SIGMA2_FLOOR = 1e-6   # avoids degenerate spikes on near-duplicate weights
SEED_STRIDE = 7919    # restart seeds: master_seed + restart * SEED_STRIDE
DEFAULT_SWEEP_CAP = 50
DEFAULT_SWEEP_TOL = 1e-6
DEFAULT_MAX_ITERS = 100
DEFAULT_RESTARTS = 10
DEFAULT_ELBO_REL_TOL = 1e-8
INIT_SHARPNESS = 0.95


@dataclass
class BlockModel:
    """Fitted parameters for a fixed group count Q."""

    q: int
    alpha: np.ndarray          # (Q,) initial group distribution
    pi: np.ndarray             # (Q, Q) membership transition matrix
    beta: np.ndarray           # (T, Q, Q) tie-presence probabilities
    mu: np.ndarray             # (T, Q, Q) mean log-weight of retained ties
    sigma2: float              # global log-weight variance

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ValueError("Q must be >= 1")
        if abs(self.alpha.sum() - 1.0) > 1e-12:
            raise ValueError("alpha must sum to 1")
        if np.any(np.abs(self.pi.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("pi rows must sum to 1")
        if np.any(self.beta < 0) or np.any(self.beta > 1):
            raise ValueError("beta entries must lie in [0, 1]")
        if self.sigma2 < SIGMA2_FLOOR:
            raise ValueError(f"sigma2 below floor {SIGMA2_FLOOR}")

    @property
    def n_steps(self) -> int:
        return self.beta.shape[0]

    def permuted(self, perm: np.ndarray) -> "BlockModel":
        """Relabel groups by ``perm`` (new index g holds old group perm[g])."""
        idx = np.asarray(perm)
        return BlockModel(
            q=self.q,
            alpha=self.alpha[idx],
            pi=self.pi[np.ix_(idx, idx)],
            beta=self.beta[:, idx][:, :, idx],
            mu=self.mu[:, idx][:, :, idx],
            sigma2=self.sigma2,
        )


@dataclass
class VariationalState:
    """Per-node chain marginals and the bound values accumulated so far."""

    tau: np.ndarray            # (N, T, Q) group marginals, rows on the simplex
    xi: np.ndarray             # (N, T-1, Q, Q) pairwise transition marginals
    elbo_trace: list[float] = field(default_factory=list)

    def permuted(self, perm: np.ndarray) -> "VariationalState":
        idx = np.asarray(perm)
        return VariationalState(
            tau=self.tau[:, :, idx],
            xi=self.xi[:, :, idx][:, :, :, idx],
            elbo_trace=list(self.elbo_trace),
        )


@dataclass
class FitResult:
    """Best-ELBO fit: model, variational state, MAP labels (1-based), ICL."""

    model: BlockModel
    state: VariationalState
    map_labels: np.ndarray     # (N, T) ints in 1..Q
    icl: float
    restarts_tried: int
    seed: int


def transform_weight(w):
    """Map a retained tie weight in (0, 1] to emission space via ln(w)."""
    arr = np.asarray(w, dtype=np.float64)
    if np.any(arr <= 0.0):
        raise ValueError("tie weights must be positive")
    out = np.log(arr)
    return float(out) if np.isscalar(w) else out


# ---------------------------------------------------------------------------
# internal dense view of a TemporalNetwork


class _NetData:
    """Presence masks and per-slice edge arrays extracted once per fit."""

    def __init__(self, net: TemporalNetwork):
        self.n = net.n_nodes
        self.t_len = net.n_steps
        self.presence = net.presence.astype(bool)
        self.present_idx = [np.flatnonzero(self.presence[t]) for t in range(self.t_len)]
        self.edges: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        for t, sl in enumerate(net.slices):
            src, dst = np.nonzero(sl.weights)
            logw = np.log(sl.weights[src, dst])
            self.edges.append((src, dst, logw))
        self.n_dyads = int(sum(len(p) * (len(p) - 1) for p in self.present_idx))


def _emission_tables(model: BlockModel, t: int) -> tuple[np.ndarray, np.ndarray]:
    """(log(1-beta), log(beta)) at time t with the epsilon clamp applied."""
    b = np.clip(model.beta[t], PROB_EPS, 1.0 - PROB_EPS)
    return np.log1p(-b), np.log(b)


def _gauss_log_density(x: np.ndarray, mu: np.ndarray, sigma2: float) -> np.ndarray:
    return -0.5 * np.log(2.0 * np.pi * sigma2) - (x - mu) ** 2 / (2.0 * sigma2)


def emission_logprob(model: BlockModel, t: int, q: int, l: int, y: float | None) -> float:
    """Log-probability of one ordered dyad observation given endpoint groups.

    ``y`` is None for an absent tie, else the retained weight in (0, 1].
    """
    beta = float(np.clip(model.beta[t, q, l], PROB_EPS, 1.0 - PROB_EPS))
    if y is None:
        return float(np.log1p(-beta))
    x = transform_weight(y)
    return float(np.log(beta) + _gauss_log_density(x, model.mu[t, q, l], model.sigma2))


# ---------------------------------------------------------------------------
# forward-backward


def _forward_backward_batch(
    log_e: np.ndarray, log_alpha: np.ndarray, log_pi: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact chain posteriors for a batch of nodes, in log space.

    ``log_e`` has shape (N, T, Q); returns (tau (N,T,Q), xi (N,T-1,Q,Q),
    loglik (N,)).
    """
    n, t_len, q = log_e.shape
    la = np.empty((n, t_len, q))
    c = np.empty((n, t_len))
    a0 = log_alpha[None, :] + log_e[:, 0]
    c[:, 0] = logsumexp(a0, axis=1)
    la[:, 0] = a0 - c[:, 0, None]
    for t in range(1, t_len):
        m = logsumexp(la[:, t - 1, :, None] + log_pi[None, :, :], axis=1)
        at = m + log_e[:, t]
        c[:, t] = logsumexp(at, axis=1)
        la[:, t] = at - c[:, t, None]

    lb = np.zeros((n, t_len, q))
    for t in range(t_len - 2, -1, -1):
        tmp = log_pi[None, :, :] + (log_e[:, t + 1] + lb[:, t + 1])[:, None, :]
        lb[:, t] = logsumexp(tmp, axis=2) - c[:, t + 1, None]

    tau = np.exp(la + lb)
    tau /= tau.sum(axis=2, keepdims=True)

    if t_len > 1:
        lx = (
            la[:, :-1, :, None]
            + log_pi[None, None, :, :]
            + (log_e[:, 1:] + lb[:, 1:])[:, :, None, :]
            - c[:, 1:, None, None]
        )
        xi = np.exp(lx)
        xi /= xi.sum(axis=(2, 3), keepdims=True)
    else:
        xi = np.zeros((n, 0, q, q))
    return tau, xi, c.sum(axis=1)


def forward_backward(
    log_emissions: np.ndarray, alpha: np.ndarray, pi: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Posterior marginals of one hidden chain given per-step log-potentials.

    Computed in log space with per-step normalization; ``loglik`` is the
    emission-integrated chain likelihood.
    """
    log_e = np.asarray(log_emissions, dtype=np.float64)
    if log_e.ndim != 2:
        raise ValueError(f"log_emissions must be (T, Q), got shape {log_e.shape}")
    if not np.all(np.isfinite(log_e)):
        raise ValueError("log_emissions contain non-finite values")
    t_len, q = log_e.shape
    if alpha.shape != (q,) or pi.shape != (q, q):
        raise ValueError("alpha/pi dimensions do not match emissions")
    log_alpha = np.log(np.clip(alpha, LOG_EPS, 1.0))
    log_pi = np.log(np.clip(pi, LOG_EPS, 1.0))
    tau, xi, ll = _forward_backward_batch(log_e[None], log_alpha, log_pi)
    return tau[0], xi[0], float(ll[0])


# ---------------------------------------------------------------------------
# initialization


def init_partition(net: TemporalNetwork, q: int, seed: int) -> VariationalState:
    """Initial responsibilities from clustering time-averaged adjacency profiles.

    Each node's profile is its out-row and in-column of retained weights
    averaged over the years it is present; profiles are clustered into ``q``
    groups and sharpened to 0.95/remaining-mass responsibilities, constant
    over time. Falls back to random simplex draws (with a warning) when there
    are fewer distinct profiles than groups or clustering degenerates.
    """
    if q < 1:
        raise ValueError("Q must be >= 1")
    if net.n_steps == 0:
        raise ValueError("empty network")
    n, t_len = net.n_nodes, net.n_steps
    rng = np.random.default_rng(seed)

    if q == 1:
        tau = np.ones((n, t_len, 1))
        return VariationalState(tau=tau, xi=_product_xi(tau))

    profiles = np.zeros((n, 2 * n))
    counts = net.presence.sum(axis=0).astype(np.float64)
    for t, sl in enumerate(net.slices):
        present = net.presence[t]
        profiles[present, :n] += sl.weights[present, :]
        profiles[present, n:] += sl.weights[:, present].T
    seen = counts > 0
    profiles[seen] /= counts[seen, None]

    labels = None
    n_distinct = np.unique(profiles, axis=0).shape[0]
    if n_distinct >= q:
        _, labels = kmeans2(profiles, q, minit="++", rng=rng)
        if np.unique(labels).size < q:
            labels = None
    if labels is None:
        warnings.warn(
            f"fewer than {q} distinct node profiles; falling back to random simplex init",
            RuntimeWarning,
            stacklevel=2,
        )
        base = rng.dirichlet(np.ones(q), size=n)
    else:
        base = np.full((n, q), (1.0 - INIT_SHARPNESS) / (q - 1))
        base[np.arange(n), labels] = INIT_SHARPNESS

    tau = np.repeat(base[:, None, :], t_len, axis=1)
    return VariationalState(tau=tau, xi=_product_xi(tau))


def _product_xi(tau: np.ndarray) -> np.ndarray:
    """Independence approximation of pairwise marginals; marginally consistent."""
    return np.einsum("ntq,ntl->ntql", tau[:, :-1], tau[:, 1:])


# ---------------------------------------------------------------------------
# E-step


def _emission_potentials(nd: _NetData, model: BlockModel, tau: np.ndarray) -> np.ndarray:
    """Expected emission log-potentials f[i, t, q] under neighbors' marginals.

    Sums both directions of every ordered dyad between present nodes, using
    the current tau of the opposite endpoint. Absent (node, t) rows stay zero.
    """
    n, t_len, q = tau.shape
    f = np.zeros((n, t_len, q))
    for t in range(t_len):
        present = nd.present_idx[t]
        if present.size < 2:
            continue
        log_absent, log_present = _emission_tables(model, t)
        tau_p = tau[present, t]
        s = tau_p.sum(axis=0)
        rest = s[None, :] - tau_p
        f[present, t] = rest @ log_absent.T + rest @ log_absent

        src, dst, logw = nd.edges[t]
        if src.size:
            gauss = _gauss_log_density(logw[:, None, None], model.mu[t][None, :, :], model.sigma2)
            d = (log_present - log_absent)[None, :, :] + gauss
            np.add.at(f[:, t], src, np.einsum("eql,el->eq", d, tau[dst, t]))
            np.add.at(f[:, t], dst, np.einsum("eql,eq->el", d, tau[src, t]))
    return f


def e_step(
    net: TemporalNetwork,
    model: BlockModel,
    state: VariationalState,
    sweeps: int = DEFAULT_SWEEP_CAP,
    tol: float = DEFAULT_SWEEP_TOL,
    guard: bool = True,
) -> VariationalState:
    """Structured mean-field fixed point over per-node chains.

    Repeats Jacobi sweeps (emission potentials from the previous sweep's tau,
    then batched forward-backward) until the max tau change drops below
    ``tol`` or the sweep cap is hit. With ``guard`` on, a sweep that lowers
    the ELBO is rolled back and iteration stops, so the returned state never
    degrades the bound; accepted per-sweep bound values are appended to the
    state's elbo_trace.
    """
    return _e_step(_NetData(net), net, model, state, sweeps=sweeps, tol=tol, guard=guard)


def _e_step(
    nd: _NetData,
    net: TemporalNetwork,
    model: BlockModel,
    state: VariationalState,
    sweeps: int,
    tol: float,
    guard: bool,
    entry_elbo: float | None = None,
) -> VariationalState:
    log_alpha = np.log(np.clip(model.alpha, LOG_EPS, 1.0))
    log_pi = np.log(np.clip(model.pi, LOG_EPS, 1.0))
    tau, xi = state.tau, state.xi
    trace = list(state.elbo_trace)
    best = entry_elbo
    if guard and best is None:
        best = _elbo(nd, model, VariationalState(tau, xi))

    for _ in range(sweeps):
        f = _emission_potentials(nd, model, tau)
        if not np.all(np.isfinite(f)):
            i, t = np.argwhere(~np.isfinite(f).all(axis=2))[0]
            raise ValueError(
                f"non-finite emission potential for node {net.universe[i]!r} at {net.years[t]}"
            )
        tau_new, xi_new, _ = _forward_backward_batch(f, log_alpha, log_pi)
        delta = float(np.max(np.abs(tau_new - tau)))
        if guard:
            e_new = _elbo(nd, model, VariationalState(tau_new, xi_new))
            if e_new < best - 1e-10 * max(1.0, abs(best)):
                break  # keep the previous sweep's state
            best = e_new
            trace.append(e_new)
        tau, xi = tau_new, xi_new
        if delta < tol:
            break
    return VariationalState(tau=tau, xi=xi, elbo_trace=trace)


# ---------------------------------------------------------------------------
# M-step


def _dyad_stats(nd: _NetData, tau: np.ndarray):
    """Per-time expected dyad-mass sufficient statistics.

    Returns (denom, m1, mx, mxx), each (T, Q, Q): expected ordered-dyad mass,
    present-tie mass, and present-tie mass weighted by log-weight and its
    square.
    """
    t_len, q = tau.shape[1], tau.shape[2]
    denom = np.zeros((t_len, q, q))
    m1 = np.zeros((t_len, q, q))
    mx = np.zeros((t_len, q, q))
    mxx = np.zeros((t_len, q, q))
    for t in range(t_len):
        present = nd.present_idx[t]
        if present.size >= 2:
            tau_p = tau[present, t]
            s = tau_p.sum(axis=0)
            denom[t] = np.maximum(np.outer(s, s) - tau_p.T @ tau_p, 0.0)
        src, dst, logw = nd.edges[t]
        if src.size:
            ts, td = tau[src, t], tau[dst, t]
            m1[t] = np.einsum("eq,el->ql", ts, td)
            mx[t] = np.einsum("e,eq,el->ql", logw, ts, td)
            mxx[t] = np.einsum("e,eq,el->ql", logw**2, ts, td)
    return denom, m1, mx, mxx


def _pooled_ratio(num_t: np.ndarray, den_t: np.ndarray) -> np.ndarray:
    """Diagonal of a (T,Q,Q) ratio pooled over time; NaN where no mass."""
    num = np.einsum("tqq->q", num_t)
    den = np.einsum("tqq->q", den_t)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def m_step(
    net: TemporalNetwork,
    state: VariationalState,
    prev: BlockModel | None = None,
    sigma2_floor: float = SIGMA2_FLOOR,
) -> BlockModel:
    """Closed-form parameter maximization given the variational state.

    Off-diagonal presence and weight-mean parameters are estimated per time
    slice; diagonal ones are pooled over all slices (identifiability).
    Cells with zero expected dyad mass carry the previous iterate's value
    (or a neutral default) instead of dividing by zero.
    """
    return _m_step(_NetData(net), state, prev, sigma2_floor=sigma2_floor)


def _m_step(
    nd: _NetData,
    state: VariationalState,
    prev: BlockModel | None,
    sigma2_floor: float = SIGMA2_FLOOR,
) -> BlockModel:
    tau, xi = state.tau, state.xi
    n, t_len, q = tau.shape

    alpha = tau[:, 0, :].mean(axis=0)
    alpha = alpha / alpha.sum()

    if t_len == 1:
        warnings.warn(
            "single-period network: transition matrix defaults to identity",
            RuntimeWarning,
            stacklevel=3,
        )
        pi = np.eye(q)
    else:
        trans = xi.sum(axis=(0, 1))
        rows = trans.sum(axis=1)
        pi = np.empty((q, q))
        for g in range(q):
            if rows[g] > 0:
                pi[g] = trans[g] / rows[g]
            else:
                pi[g] = prev.pi[g] if prev is not None else np.eye(q)[g]

    denom, m1, mx, mxx = _dyad_stats(nd, tau)
    total_mass = m1.sum()
    total_dyads = denom.sum()
    beta_default = total_mass / total_dyads if total_dyads > 0 else 0.5
    mu_default = mx.sum() / total_mass if total_mass > 0 else 0.0

    with np.errstate(invalid="ignore", divide="ignore"):
        beta = np.where(denom > 0, m1 / np.where(denom > 0, denom, 1.0), np.nan)
        mu = np.where(m1 > 0, mx / np.where(m1 > 0, m1, 1.0), np.nan)

    beta_diag = _pooled_ratio(m1, denom)
    mu_diag = _pooled_ratio(mx, m1)
    di = np.arange(q)
    beta[:, di, di] = beta_diag[None, :]
    mu[:, di, di] = mu_diag[None, :]

    n_carried = int(np.isnan(beta).sum() + np.isnan(mu).sum())
    if n_carried:
        log.warning("m_step: %d zero-mass cells carried over", n_carried)
    beta = np.where(np.isnan(beta), prev.beta if prev is not None else beta_default, beta)
    mu = np.where(np.isnan(mu), prev.mu if prev is not None else mu_default, mu)
    beta = np.clip(beta, 0.0, 1.0)

    if total_mass > 0:
        ssq = float(np.sum(mxx - 2.0 * mu * mx + mu**2 * m1))
        sigma2 = max(ssq / total_mass, sigma2_floor)
    else:
        sigma2 = prev.sigma2 if prev is not None else max(1.0, sigma2_floor)

    return BlockModel(q=q, alpha=alpha, pi=pi, beta=beta, mu=mu, sigma2=sigma2)


# ---------------------------------------------------------------------------
# ELBO


def _chain_terms(model: BlockModel, state: VariationalState) -> float:
    tau, xi = state.tau, state.xi
    log_alpha = np.log(np.clip(model.alpha, LOG_EPS, 1.0))
    out = float(np.sum(tau[:, 0, :] * log_alpha[None, :]))
    out -= float(np.sum(np.where(tau[:, 0, :] > 0, tau[:, 0, :] * np.log(np.where(tau[:, 0, :] > 0, tau[:, 0, :], 1.0)), 0.0)))
    if xi.shape[1]:
        log_pi = np.log(np.clip(model.pi, LOG_EPS, 1.0))
        out += float(np.sum(xi * log_pi[None, None, :, :]))
        tau_from = tau[:, :-1, :, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(xi > 0, xi * (np.log(np.where(xi > 0, xi, 1.0)) - np.log(np.where(tau_from > 0, tau_from, 1.0))), 0.0)
        out -= float(np.sum(cond))
    return out


def _emission_terms(nd: _NetData, model: BlockModel, tau: np.ndarray) -> float:
    denom, m1, mx, mxx = _dyad_stats(nd, tau)
    out = 0.0
    for t in range(nd.t_len):
        log_absent, log_present = _emission_tables(model, t)
        out += float(np.sum(log_absent * (denom[t] - m1[t])))
        out += float(np.sum(log_present * m1[t]))
        mu_t = model.mu[t]
        out += float(
            np.sum(
                -0.5 * np.log(2.0 * np.pi * model.sigma2) * m1[t]
                - (mxx[t] - 2.0 * mu_t * mx[t] + mu_t**2 * m1[t]) / (2.0 * model.sigma2)
            )
        )
    return out


def elbo(net: TemporalNetwork, model: BlockModel, state: VariationalState) -> float:
    """Evidence lower bound: expected complete-data log-likelihood plus chain entropy."""
    return _elbo(_NetData(net), model, state)


def _elbo(nd: _NetData, model: BlockModel, state: VariationalState) -> float:
    value = _chain_terms(model, state) + _emission_terms(nd, model, state.tau)
    if not np.isfinite(value):
        raise ValueError("non-finite ELBO")
    return value


# ---------------------------------------------------------------------------
# fit / model selection


def map_labels_of(tau: np.ndarray) -> np.ndarray:
    """1-based MAP labels; argmax breaks ties toward the lower group index."""
    return np.argmax(tau, axis=2).astype(np.int64) + 1


def fit(
    net: TemporalNetwork,
    q: int,
    restarts: int = DEFAULT_RESTARTS,
    max_iters: int = DEFAULT_MAX_ITERS,
    seed: int = 0,
    elbo_rel_tol: float = DEFAULT_ELBO_REL_TOL,
    sweep_cap: int = DEFAULT_SWEEP_CAP,
    sweep_tol: float = DEFAULT_SWEEP_TOL,
    extra_inits: list[VariationalState] | None = None,
) -> FitResult:
    """Best-ELBO variational EM fit over seeded restarts.

    Restart r uses seed ``seed + r * SEED_STRIDE``; results are deterministic
    for a fixed seed and restart count. ``extra_inits`` adds warm-start states
    to the restart pool (used by the Q sweep).
    """
    if q < 1:
        raise ValueError("Q must be >= 1")
    if net.n_steps == 0:
        raise ValueError("empty network")
    nd = _NetData(net)

    inits: list[tuple[str, VariationalState]] = []
    for r in range(restarts):
        inits.append((f"restart {r}", init_partition(net, q, seed + r * SEED_STRIDE)))
    for k, st in enumerate(extra_inits or []):
        if st.tau.shape != (net.n_nodes, net.n_steps, q):
            raise ValueError("extra init state has wrong shape")
        inits.append((f"warm start {k}", VariationalState(st.tau.copy(), st.xi.copy())))
    if not inits:
        raise ValueError("no restarts requested")

    best: tuple[float, BlockModel, VariationalState] | None = None
    last_error: Exception | None = None
    for label, state in inits:
        try:
            model = _m_step(nd, state, prev=None)
            current = _elbo(nd, model, state)
            state = replace(state, elbo_trace=[current])
            for _ in range(max_iters):
                state = _e_step(
                    nd, net, model, state,
                    sweeps=sweep_cap, tol=sweep_tol, guard=True, entry_elbo=current,
                )
                model = _m_step(nd, state, prev=model)
                value = _elbo(nd, model, state)
                state.elbo_trace.append(value)
                if abs(value - current) <= elbo_rel_tol * max(1.0, abs(current)):
                    current = value
                    break
                current = value
        except (ValueError, FloatingPointError) as exc:
            log.warning("fit %s failed: %s", label, exc)
            last_error = exc
            continue
        if best is None or current > best[0]:
            best = (current, model, state)

    if best is None:
        raise RuntimeError(f"all {len(inits)} restarts failed numerically") from last_error

    _, model, state = best
    labels = map_labels_of(state.tau)
    result = FitResult(
        model=model, state=state, map_labels=labels,
        icl=0.0, restarts_tried=len(inits), seed=seed,
    )
    result.icl = _icl(nd, model, labels)
    return result


def _complete_data_loglik(nd: _NetData, model: BlockModel, labels: np.ndarray) -> float:
    """Joint log-likelihood of observations and hard labels (1-based)."""
    n, t_len = labels.shape
    q = model.q
    onehot = np.zeros((n, t_len, q))
    idx_n, idx_t = np.meshgrid(np.arange(n), np.arange(t_len), indexing="ij")
    onehot[idx_n, idx_t, labels - 1] = 1.0

    log_alpha = np.log(np.clip(model.alpha, LOG_EPS, 1.0))
    log_pi = np.log(np.clip(model.pi, LOG_EPS, 1.0))
    out = float(log_alpha[labels[:, 0] - 1].sum())
    if t_len > 1:
        out += float(log_pi[labels[:, :-1] - 1, labels[:, 1:] - 1].sum())
    out += _emission_terms(nd, model, onehot)
    return out


def icl(net: TemporalNetwork, result: FitResult) -> float:
    """Integrated-classification-likelihood score of a fit on its network."""
    return _icl(_NetData(net), result.model, result.map_labels)


def _icl(nd: _NetData, model: BlockModel, labels: np.ndarray) -> float:
    n, t_len, q = nd.n, nd.t_len, model.q
    loglik = _complete_data_loglik(nd, model, labels)
    penalty = 0.5 * (q - 1) * np.log(n)
    if t_len > 1:
        penalty += 0.5 * q * (q - 1) * np.log(n * (t_len - 1))
    n_connect = 2 * (q + t_len * q * (q - 1)) + 1  # beta + mu (diag pooled) + sigma2
    if nd.n_dyads > 0:
        penalty += 0.5 * n_connect * np.log(nd.n_dyads)
    return loglik - penalty


def pad_state(state: VariationalState, q_new: int) -> VariationalState:
    """Embed a fitted state in a larger family by adding empty groups."""
    n, t_len, q = state.tau.shape
    if q_new < q:
        raise ValueError("q_new must be >= current Q")
    tau = np.zeros((n, t_len, q_new))
    tau[:, :, :q] = state.tau
    xi = np.zeros((n, max(t_len - 1, 0), q_new, q_new))
    xi[:, :, :q, :q] = state.xi
    return VariationalState(tau=tau, xi=xi)


@dataclass
class SweepRow:
    q: int
    icl: float | None
    elbo: float | None
    error: str | None = None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    recommended_q: int | None


def sweep_q(
    net: TemporalNetwork,
    q_range,
    restarts: int = DEFAULT_RESTARTS,
    max_iters: int = DEFAULT_MAX_ITERS,
    seed: int = 0,
    **fit_kwargs,
) -> SweepResult:
    """Fit every Q in an inclusive range and recommend the ICL maximizer.

    Each Q gets the same restart budget plus one warm start padded from the
    previous Q's best state, so the optimal bound is non-decreasing in Q. The
    recommendation breaks ICL ties toward the smaller Q; failures are recorded
    per row rather than aborting the sweep.
    """
    qs = sorted(set(int(q) for q in q_range))
    if not qs:
        raise ValueError("empty Q range")
    rows: list[SweepRow] = []
    results: dict[int, FitResult] = {}
    prev_best: VariationalState | None = None
    for q in qs:
        extra = [pad_state(prev_best, q)] if prev_best is not None else []
        try:
            res = fit(
                net, q, restarts=restarts, max_iters=max_iters, seed=seed,
                extra_inits=extra, **fit_kwargs,
            )
        except (ValueError, RuntimeError) as exc:
            rows.append(SweepRow(q=q, icl=None, elbo=None, error=str(exc)))
            continue
        results[q] = res
        rows.append(SweepRow(q=q, icl=res.icl, elbo=res.state.elbo_trace[-1]))
        prev_best = res.state

    recommended = None
    for row in rows:  # rows sorted by Q: strict > keeps the smaller Q on ties
        if row.icl is not None and (recommended is None or row.icl > recommended[1]):
            recommended = (row.q, row.icl)
    return SweepResult(rows=rows, recommended_q=None if recommended is None else recommended[0])
