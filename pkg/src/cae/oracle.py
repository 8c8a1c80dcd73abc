"""Exact dynamic programming on enumerable goal-conditioned MDPs.

Ground truth for everything learned elsewhere in the package:

* ``compute_c_star`` - probability of reaching ``g`` within ``h`` steps,
* ``compute_c_pi``   - the same under a fixed horizon-aware policy,
* ``compute_a_star`` - probability of being at ``g`` after exactly ``h`` steps,
* ``compute_d_star`` - expected ``gamma ** (T - 1)`` for first hitting time ``T``,
* ``compute_q_star`` - discounted goal-reaching Q-values.

Tables are indexed ``[state, action, goal, horizon]`` (``horizon`` is the
gamma-grid index for D, and absent for Q). The transition kernel is a sparse
``(n_states * n_actions, n_states)`` matrix so each backup is one product
with a ``(n_states, n_goals)`` slab; every goal column is independent, and
``threads > 1`` splits the goal columns over a thread pool.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

NORM_TOL = 1e-12


class PolicyError(KeyError):
    pass


@dataclass
class MdpSpec:
    """Enumerable environment: sparse kernel, goal indicator and terminal set.

    ``goals`` holds the environment goal ids that the table columns refer to,
    so an oracle may be restricted to a subset of the goal set.
    """

    P: sp.csr_matrix
    goal_mask: np.ndarray
    terminal: np.ndarray
    n_actions: int
    goals: np.ndarray
    max_episode_length: int = 50
    name: str = ""

    def __post_init__(self):
        n = self.goal_mask.shape[0]
        if self.P.shape != (n * self.n_actions, n):
            raise ValueError(f"kernel shape {self.P.shape} does not match {n} states x {self.n_actions} actions")
        rows = np.asarray(self.P.sum(axis=1)).ravel()
        worst = np.abs(rows - 1.0).max() if len(rows) else 0.0
        if worst > NORM_TOL:
            raise ValueError(f"kernel rows not normalised (max deviation {worst:.3g})")
        if (self.P.data < 0).any():
            raise ValueError("negative transition probability")
        self.deterministic = bool(np.all((self.P.data == 1.0) | (self.P.data == 0.0)))

    @property
    def n_states(self) -> int:
        return self.goal_mask.shape[0]

    @property
    def n_goals(self) -> int:
        return self.goal_mask.shape[1]

    @classmethod
    def from_kernel(cls, entries, n_states: int, n_actions: int, goal_mask, terminal=None,
                    goals=None, **kw) -> "MdpSpec":
        s, a, s2, p = (np.asarray(col) for col in zip(*entries))
        P = sp.csr_matrix((p.astype(float), (s.astype(np.int64) * n_actions + a, s2.astype(np.int64))),
                          shape=(n_states * n_actions, n_states))
        goal_mask = np.asarray(goal_mask, dtype=bool)
        if terminal is None:
            terminal = np.zeros(n_states, dtype=bool)
        if goals is None:
            goals = np.arange(goal_mask.shape[1])
        return cls(P, goal_mask, np.asarray(terminal, dtype=bool), n_actions, np.asarray(goals), **kw)

    @classmethod
    def from_env(cls, env, goals=None) -> "MdpSpec":
        """Build from an enumerable environment, optionally for a goal subset."""
        n, m = env.n_states, env.n_actions
        goals = np.arange(env.n_goals) if goals is None else np.asarray(goals, dtype=np.int64)
        S = np.repeat(np.arange(n), len(goals))
        Gs = np.tile(goals, n)
        mask = env.goal_check_batch(S, Gs).reshape(n, len(goals))
        terminal = env.terminal_batch(np.arange(n))
        return cls.from_kernel(env.enumerate_kernel(), n, m, mask, terminal, goals,
                               max_episode_length=env.max_episode_length, name=env.spec.name)

    def backup(self, V: np.ndarray) -> np.ndarray:
        """``sum_{s'} p(s'|s,a) V[s', g]`` as an ``(n, m, ng)`` array."""
        return np.asarray(self.P @ V).reshape(self.n_states, self.n_actions, V.shape[1])

    def column(self, goal) -> int:
        hits = np.flatnonzero(self.goals == goal)
        if not len(hits):
            raise KeyError(f"goal {goal} not in this oracle")
        return int(hits[0])


@dataclass
class ExactTable:
    variant: str
    values: np.ndarray
    axis: np.ndarray | None
    goals: np.ndarray
    deterministic: bool = False
    converged: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def h_max(self) -> int:
        return len(self.axis) - 1

    def action_values(self, S, G, H) -> np.ndarray:
        """``(B, n_actions)`` values for environment goal ids ``G``."""
        S = np.asarray(S, dtype=np.int64)
        cols = np.searchsorted(self.goals, np.asarray(G, dtype=np.int64))
        if self.values.ndim == 3:
            return self.values[S, :, cols]
        return self.values[S, :, cols, np.asarray(H, dtype=np.int64)]

    # exact tables already satisfy every base case
    predict = action_values

    def rows(self):
        """Yield ``(state, action, goal, horizon, value)`` in row-major order."""
        n, m, ng = self.values.shape[:3]
        axis = self.axis if self.values.ndim == 4 else [None]
        for s in range(n):
            for a in range(m):
                for j in range(ng):
                    for k, h in enumerate(axis):
                        v = self.values[s, a, j, k] if self.values.ndim == 4 else self.values[s, a, j]
                        yield s, a, int(self.goals[j]), h, float(v)

    def to_csv(self, path) -> int:
        count = 0
        label = "gamma" if self.variant == "D" else "horizon"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state", "action", "goal", label, "value"])
            for s, a, g, h, v in self.rows():
                w.writerow([s, a, g, "" if h is None else (repr(float(h)) if self.variant == "D" else int(h)), repr(v)])
                count += 1
        return count


class PolicySpec:
    """Horizon-aware policy ``pi(a | s, g, h)`` over an enumerable MDP.

    Backed by a dense array ``[state, goal_column, h, action]``, a mapping
    ``(s, g, h) -> probs`` (with optional default) or a callable.
    """

    def __init__(self, n_actions: int, *, dense=None, mapping=None, fn=None, default=None):
        self.n_actions = n_actions
        self.dense = dense
        self.mapping = mapping
        self.fn = fn
        self.default = None if default is None else self._check(default)
        if mapping is not None:
            for key, p in mapping.items():
                mapping[key] = self._check(p, key)

    def _check(self, p, key=None) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_actions,) or (p < 0).any() or abs(p.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"invalid action distribution {p} at {key}")
        return p

    @classmethod
    def uniform(cls, n_actions: int) -> "PolicySpec":
        return cls(n_actions, default=np.full(n_actions, 1.0 / n_actions))

    @classmethod
    def from_mapping(cls, mapping: Mapping, n_actions: int, default=None) -> "PolicySpec":
        return cls(n_actions, mapping=dict(mapping), default=default)

    @classmethod
    def from_callable(cls, fn: Callable, n_actions: int) -> "PolicySpec":
        return cls(n_actions, fn=fn)

    @classmethod
    def greedy(cls, table: ExactTable) -> "PolicySpec":
        """Deterministic argmax policy; ties go to the lowest action index."""
        vals = np.moveaxis(table.values, 1, -1)  # (n, ng, H+1, m)
        best = np.argmax(vals, axis=-1)
        dense = np.zeros(vals.shape)
        np.put_along_axis(dense, best[..., None], 1.0, axis=-1)
        return cls(table.values.shape[1], dense=dense)

    def probs(self, s: int, g_col: int, h: int) -> np.ndarray:
        if self.dense is not None:
            return self.dense[s, g_col, h]
        if self.fn is not None:
            return self._check(self.fn(s, g_col, h), (s, g_col, h))
        p = self.mapping.get((s, g_col, h)) if self.mapping is not None else None
        if p is None:
            if self.default is None:
                raise PolicyError(f"policy has no entry for (s={s}, g={g_col}, h={h})")
            return self.default
        return p

    def slab(self, h: int, need: np.ndarray) -> np.ndarray:
        """``(n, ng, m)`` action probabilities at horizon ``h`` where ``need`` is set."""
        if self.dense is not None:
            return self.dense[:, :, h, :]
        out = np.zeros(need.shape + (self.n_actions,))
        for s, j in zip(*np.nonzero(need)):
            out[s, j] = self.probs(int(s), int(j), h)
        return out


def _check_h(h_max: int):
    if h_max < 0:
        raise ValueError("h_max must be >= 0")


def _goal_split(mdp: MdpSpec, threads: int):
    if threads <= 1 or mdp.n_goals < 2:
        return [np.arange(mdp.n_goals)]
    return np.array_split(np.arange(mdp.n_goals), min(threads, mdp.n_goals))


def _sub(mdp: MdpSpec, cols: np.ndarray) -> MdpSpec:
    if len(cols) == mdp.n_goals:
        return mdp
    sub = MdpSpec.__new__(MdpSpec)
    sub.__dict__.update(mdp.__dict__)
    sub.goal_mask = mdp.goal_mask[:, cols]
    sub.goals = mdp.goals[cols]
    return sub


def _parallel(fn, mdp: MdpSpec, threads: int, axis: int = 2):
    parts = _goal_split(mdp, threads)
    if len(parts) == 1:
        return fn(mdp)
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        results = list(pool.map(lambda cols: fn(_sub(mdp, cols)), parts))
    return np.concatenate(results, axis=axis)


def _c_recursion(mdp: MdpSpec, h_max: int, next_value) -> np.ndarray:
    n, m, ng = mdp.n_states, mdp.n_actions, mdp.n_goals
    G = mdp.goal_mask.astype(float)
    dead = mdp.terminal[:, None] & ~mdp.goal_mask
    out = np.empty((n, m, ng, h_max + 1))
    out[..., 0] = G[:, None, :]
    for h in range(1, h_max + 1):
        V = next_value(out[..., h - 1], h - 1)
        C = mdp.backup(V)
        C = np.where(mdp.goal_mask[:, None, :], 1.0, C)
        C = np.where(dead[:, None, :], 0.0, C)
        out[..., h] = C
    return out


def compute_c_star(mdp: MdpSpec, h_max: int, threads: int = 1) -> ExactTable:
    """Optimal cumulative accessibility for ``h = 0..h_max``.

    ``C(s,a,g,h) = G(s,g)`` if ``G(s,g) = 1`` or ``h = 0``; a terminal non-goal
    state is worth 0; otherwise ``E_{s'}[max_a' C(s',a',g,h-1)]``.
    """
    _check_h(h_max)
    vals = _parallel(lambda sub: _c_recursion(sub, h_max, lambda C, _h: C.max(axis=1)), mdp, threads)
    return ExactTable("C", vals, np.arange(h_max + 1), mdp.goals.copy(), mdp.deterministic)


def compute_c_pi(mdp: MdpSpec, pi: PolicySpec, h_max: int) -> ExactTable:
    """Fixed-policy cumulative accessibility: the max over ``a'`` becomes an
    expectation under ``pi(. | s', g, h-1)``."""
    _check_h(h_max)
    need = ~mdp.goal_mask & ~mdp.terminal[:, None]

    def expect(C, h):
        if h == 0:
            return C[:, 0, :]  # every action has value G(s', g) at h = 0
        probs = pi.slab(h, need)  # (n, ng, m)
        return np.einsum("sag,sga->sg", C, probs)

    vals = _c_recursion(mdp, h_max, expect)
    return ExactTable("Cpi", vals, np.arange(h_max + 1), mdp.goals.copy(), mdp.deterministic)


def compute_a_star(mdp: MdpSpec, h_max: int, threads: int = 1) -> ExactTable:
    """Probability of satisfying ``g`` after exactly ``h`` steps.

    Goal states are not absorbing; a terminal state ends the episode, so from
    it no later arrival is possible.
    """
    _check_h(h_max)

    def run(sub: MdpSpec) -> np.ndarray:
        n, m, ng = sub.n_states, sub.n_actions, sub.n_goals
        out = np.empty((n, m, ng, h_max + 1))
        out[..., 0] = sub.goal_mask[:, None, :]
        for h in range(1, h_max + 1):
            A = sub.backup(out[..., h - 1].max(axis=1))
            A[sub.terminal] = 0.0
            out[..., h] = A
        return out

    vals = _parallel(run, mdp, threads)
    return ExactTable("A", vals, np.arange(h_max + 1), mdp.goals.copy(), mdp.deterministic)


DEFAULT_GAMMAS = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))


def compute_d_star(mdp: MdpSpec, gammas=DEFAULT_GAMMAS, max_iter: int | None = None,
                   tol: float = 1e-10) -> ExactTable:
    """Discounted accessibility by value iteration from zero.

    ``D(s,a,g) = E_{s'}[G(s',g) + gamma (1 - G(s',g)) max_a' D(s',a',g)]`` with
    terminal non-goal successors contributing nothing. Iteration stops at
    residual ``tol`` or after ``max_iter`` sweeps (default ten episode
    lengths); unconverged grid points are flagged in ``converged`` and warned.
    """
    gammas = np.asarray(gammas, dtype=float)
    if ((gammas < 0) | (gammas > 1)).any():
        raise ValueError("gamma must lie in [0, 1]")
    max_iter = 10 * mdp.max_episode_length if max_iter is None else max_iter
    n, m, ng = mdp.n_states, mdp.n_actions, mdp.n_goals
    G = mdp.goal_mask.astype(float)
    live = (~mdp.terminal).astype(float)[:, None]
    out = np.empty((n, m, ng, len(gammas)))
    converged = np.zeros(len(gammas), dtype=bool)
    iters = np.zeros(len(gammas), dtype=np.int64)
    for k, gamma in enumerate(gammas):
        D = np.zeros((n, m, ng))
        for it in range(1, max_iter + 1):
            W = G + gamma * (1.0 - G) * live * D.max(axis=1)
            new = mdp.backup(W)
            new[mdp.terminal] = 0.0
            resid = np.abs(new - D).max()
            D = new
            if resid <= tol:
                converged[k] = True
                break
        iters[k] = it
        out[..., k] = D
    if not converged.all():
        warnings.warn(f"D* value iteration hit the cap of {max_iter} sweeps at gamma={gammas[~converged]}",
                      RuntimeWarning, stacklevel=2)
    return ExactTable("D", out, gammas, mdp.goals.copy(), mdp.deterministic, converged,
                      {"iterations": iters.tolist()})


def compute_q_star(mdp: MdpSpec, gamma: float, max_iter: int = 100_000, tol: float = 1e-10) -> ExactTable:
    """Optimal Q-values for the sparse reward ``G`` with goal states terminal.

    A state that satisfies the goal is worth 1 (the reward is collected there
    and the episode ends); elsewhere ``Q = gamma * E_{s'}[max_a' Q(s',a')]``.
    A goal ``k`` optimal steps away is therefore worth ``gamma ** k``.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("Q* needs gamma in [0, 1)")
    n, m, ng = mdp.n_states, mdp.n_actions, mdp.n_goals
    dead = mdp.terminal[:, None] & ~mdp.goal_mask
    Q = np.zeros((n, m, ng))
    Q[mdp.goal_mask[:, None, :].repeat(m, axis=1)] = 1.0
    converged = False
    for _ in range(max_iter):
        V = Q.max(axis=1)
        new = gamma * mdp.backup(V)
        new = np.where(mdp.goal_mask[:, None, :], 1.0, new)
        new = np.where(dead[:, None, :], 0.0, new)
        resid = np.abs(new - Q).max()
        Q = new
        if resid <= tol:
            converged = True
            break
    if not converged:
        warnings.warn("Q* value iteration did not converge", RuntimeWarning, stacklevel=2)
    return ExactTable("Q", Q, None, mdp.goals.copy(), mdp.deterministic, np.array([converged]),
                      {"gamma": gamma})


def policy_success_prob(mdp: MdpSpec, pi: PolicySpec, s0: int, g, h: int) -> float:
    """Probability that ``pi`` reaches goal ``g`` from ``s0`` within ``h`` steps.

    Forward propagation of the state distribution; the remaining horizon
    passed to the policy drops by one each step.
    """
    j = mdp.column(g)
    if mdp.goal_mask[s0, j]:
        return 1.0
    n, m = mdp.n_states, mdp.n_actions
    mass = np.zeros(n)
    mass[s0] = 1.0
    success = 0.0
    PT = mdp.P.T.tocsr()
    for t in range(h):
        live = np.flatnonzero(mass)
        if not len(live):
            break
        w = np.zeros(n * m)
        for s in live:
            w[s * m:(s + 1) * m] = mass[s] * pi.probs(int(s), j, h - t)
        mass = PT @ w
        hit = mdp.goal_mask[:, j]
        success += mass[hit].sum()
        mass[hit] = 0.0
        mass[mdp.terminal] = 0.0
    return float(success)


def min_horizon(table: ExactTable, s: int, g) -> int | None:
    """Smallest ``h`` with ``max_a C(s, a, g, h) = 1``; deterministic MDPs only."""
    if table.variant not in ("C", "Cpi"):
        raise ValueError("min_horizon needs a C table")
    if not table.deterministic:
        raise AssertionError("min_horizon is only defined for deterministic environments")
    j = int(np.searchsorted(table.goals, g))
    best = table.values[s, :, j, :].max(axis=0)
    hits = np.flatnonzero(best == 1.0)
    return int(hits[0]) if len(hits) else None


def monotonicity_violation(table: ExactTable) -> float:
    """Largest decrease of the table along the horizon axis (0 if monotone)."""
    if table.values.ndim != 4 or table.values.shape[-1] < 2:
        return 0.0
    return float(max(0.0, -np.diff(table.values, axis=-1).min()))


def reachability_from(mdp: MdpSpec, s0: int, horizons, chunk: int = 64) -> np.ndarray:
    """``max_a C*(s0, a, g, h)`` for every goal column and each ``h`` in ``horizons``.

    Processes goals in chunks so large discretised state spaces fit in memory.
    """
    horizons = sorted(int(h) for h in horizons)
    h_max = horizons[-1]
    out = np.empty((len(horizons), mdp.n_goals))
    for start in range(0, mdp.n_goals, chunk):
        cols = np.arange(start, min(start + chunk, mdp.n_goals))
        sub = _sub(mdp, cols)
        G = sub.goal_mask.astype(float)
        dead = sub.terminal[:, None] & ~sub.goal_mask
        V = G.copy()
        for h in range(h_max + 1):
            if h > 0:
                C = sub.backup(V)
                C = np.where(sub.goal_mask[:, None, :], 1.0, C)
                C = np.where(dead[:, None, :], 0.0, C)
                V = C.max(axis=1)
            if h in horizons:
                out[horizons.index(h), cols] = V[s0]
    return out
