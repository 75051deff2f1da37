"""Pooled (transactive) valuation and resource extraction on a lattice.

The remaining horizon is discretized into steps over which every microgrid's
generation moves up or down by a calibrated factor (u*d = 1).  Branch
probabilities are moment-matched to the driftless transformed-measure law of
the log-generation increments: mean -sigma^2*dt/2, variance sigma^2*dt, and
cross moments rho_ij*sigma_i*sigma_j*dt.  Forward propagation builds the
tree of joint states, backpropagation folds the netted terminal shortfall
back to the root, and the operator's ReGU/battery mix is read off a
least-squares replication of the first-level portfolio values.

Two engines share the interface: an explicit tree of nodes (the reference),
and an index-based recombining lattice exploiting u*d = 1 plus
state-independent probabilities, which makes hundreds of steps cheap.
"""
import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateVolatility,
    InfeasibleCalibration,
    LengthMismatch,
    MalformedTree,
    RankDeficientWarning,
    TimeOutOfRange,
    TreeTooLarge,
)
from .gbm import simulate_paths
from .grid import GridEnsemble

DEFAULT_NODE_BUDGET = 10_000_000


# ---------------------------------------------------------------------------
# Step-model calibration
# ---------------------------------------------------------------------------

def branch_up_mask(n_assets: int) -> np.ndarray:
    """Boolean (2^n, n) matrix; row k marks which assets move up on branch k.

    Branch 0 moves every asset up, the last branch every asset down; asset 0
    occupies the most significant bit.  Matches the row order of the
    movement-factor matrix and the child order of forward propagation.
    """
    rows = list(itertools.product([True, False], repeat=n_assets))
    return np.array(rows, dtype=bool)


@dataclass(frozen=True)
class LatticeStepModel:
    """Calibrated per-step movement factors and branch probabilities."""

    n_assets: int
    dt: float
    log_steps: np.ndarray      # h_i = ln u_i
    branch_probs: np.ndarray   # length 2^n, ordered like branch_up_mask
    up_mask: np.ndarray

    @property
    def up(self) -> np.ndarray:
        return np.exp(self.log_steps)

    @property
    def down(self) -> np.ndarray:
        return np.exp(-self.log_steps)

    @property
    def branch_matrix(self) -> np.ndarray:
        """(2^n, n) movement factors; row k pairs with branch_probs[k]."""
        return np.where(self.up_mask, self.up, self.down)

    @property
    def n_branches(self) -> int:
        return 1 << self.n_assets


def _closed_form_h(sigmas: np.ndarray, dt: float) -> np.ndarray:
    # Mean and raw second moment jointly imply h^2 = s2 + (s2/2)^2, s2=sigma^2*dt
    s2 = sigmas**2 * dt
    return np.sqrt(s2 + (s2 / 2.0) ** 2)


def _walsh_probs(sigmas, rho, dt, h):
    """Product-form probabilities with pairwise correlation corrections."""
    n = len(sigmas)
    mask = branch_up_mask(n)
    signs = np.where(mask, 1.0, -1.0)
    m = -(sigmas**2) * dt / (2.0 * h)
    probs = np.ones(1 << n)
    probs += signs @ m
    for i in range(n):
        for j in range(i + 1, n):
            c = rho[i, j] * sigmas[i] * sigmas[j] * dt / (h[i] * h[j])
            probs += signs[:, i] * signs[:, j] * c
    return probs / (1 << n)


def _newton_refine_pair(sigmas, rho12, dt, h0, probs0):
    """Damped Newton on the printed moment equations for the two-asset case.

    Unknowns (h1, h2, P1..P4); residuals are the two means, the two raw
    second moments, the cross moment, and normalization.  Initialized from
    the independent-asset closed form (rho = 0 product probabilities).
    """
    signs = np.where(branch_up_mask(2), 1.0, -1.0)
    s2 = sigmas**2 * dt
    target_cross = rho12 * sigmas[0] * sigmas[1] * dt

    def residuals(x):
        h1, h2 = x[0], x[1]
        p = x[2:]
        s1 = signs[:, 0] @ p
        s2_ = signs[:, 1] @ p
        total = p.sum()
        cross = (signs[:, 0] * signs[:, 1]) @ p
        return np.array(
            [
                h1 * s1 + s2[0] / 2.0,
                h2 * s2_ + s2[1] / 2.0,
                h1**2 * total - h1**2 * s1**2 - s2[0],
                h2**2 * total - h2**2 * s2_**2 - s2[1],
                h1 * h2 * cross - target_cross,
                total - 1.0,
            ]
        )

    def jacobian(x):
        h1, h2 = x[0], x[1]
        p = x[2:]
        s1 = signs[:, 0] @ p
        s2_ = signs[:, 1] @ p
        total = p.sum()
        cross = (signs[:, 0] * signs[:, 1]) @ p
        jac = np.zeros((6, 6))
        jac[0, 0] = s1
        jac[0, 2:] = h1 * signs[:, 0]
        jac[1, 1] = s2_
        jac[1, 2:] = h2 * signs[:, 1]
        jac[2, 0] = 2 * h1 * (total - s1**2)
        jac[2, 2:] = h1**2 * (1.0 - 2.0 * s1 * signs[:, 0])
        jac[3, 1] = 2 * h2 * (total - s2_**2)
        jac[3, 2:] = h2**2 * (1.0 - 2.0 * s2_ * signs[:, 1])
        jac[4, 0] = h2 * cross
        jac[4, 1] = h1 * cross
        jac[4, 2:] = h1 * h2 * signs[:, 0] * signs[:, 1]
        jac[5, 2:] = 1.0
        return jac

    x = np.concatenate([h0, probs0])
    for _ in range(100):
        f = residuals(x)
        if np.max(np.abs(f)) < 1e-12:
            break
        step = np.linalg.solve(jacobian(x), -f)
        scale = 1.0
        norm0 = np.linalg.norm(f)
        while scale > 1e-6:
            trial = x + scale * step
            if np.linalg.norm(residuals(trial)) < norm0:
                break
            scale /= 2.0
        x = x + scale * step
    return x[:2], x[2:]


def calibrate_step_model(grid: GridEnsemble, dt: float) -> LatticeStepModel:
    """Solve movement factors and branch probabilities for one time step.

    One asset has a closed form.  Two assets are solved by damped Newton on
    the printed moment equations, seeded from the rho=0 product form.  For
    three or more assets the pairwise moment system is underdetermined; the
    product form with pairwise corrections (higher-order interactions zero)
    is the minimal completion and satisfies every stated equation.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    sigmas = grid.sigmas
    if np.any(sigmas == 0):
        raise DegenerateVolatility("lattice calibration requires sigma > 0")
    h = _closed_form_h(sigmas, dt)
    rho = grid.corr.rho
    up_prob = (1.0 - sigmas**2 * dt / (2.0 * h)) / 2.0
    mask = branch_up_mask(grid.n_microgrids)
    product = np.prod(np.where(mask, up_prob, 1.0 - up_prob), axis=1)
    if grid.n_microgrids == 2:
        h, probs = _newton_refine_pair(sigmas, rho[0, 1], dt, h, product)
    elif grid.n_microgrids == 1:
        probs = product
    else:
        probs = _walsh_probs(sigmas, rho, dt, h)
    bad = (probs < -1e-15) | (probs > 1 + 1e-15)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise InfeasibleCalibration(branch=k, probability=float(probs[k]), dt=dt)
    return LatticeStepModel(
        n_assets=grid.n_microgrids,
        dt=dt,
        log_steps=h,
        branch_probs=np.clip(probs, 0.0, 1.0),
        up_mask=mask,
    )


def moment_residuals(model: LatticeStepModel, grid: GridEnsemble) -> np.ndarray:
    """Plug the model back into the moment equations; all entries should be ~0.

    Order: per-asset means, per-asset raw second moments, upper-triangle
    cross moments, then normalization.
    """
    signs = np.where(model.up_mask, 1.0, -1.0)
    p = model.branch_probs
    h = model.log_steps
    sigmas = grid.sigmas
    dt = model.dt
    out = []
    for i in range(model.n_assets):
        s_i = signs[:, i] @ p
        out.append(h[i] * s_i + sigmas[i] ** 2 * dt / 2.0)
    for i in range(model.n_assets):
        s_i = signs[:, i] @ p
        out.append(h[i] ** 2 * p.sum() - h[i] ** 2 * s_i**2 - sigmas[i] ** 2 * dt)
    for i in range(model.n_assets):
        for j in range(i + 1, model.n_assets):
            cross = (signs[:, i] * signs[:, j]) @ p
            out.append(h[i] * h[j] * cross - grid.corr.rho[i, j] * sigmas[i] * sigmas[j] * dt)
    out.append(p.sum() - 1.0)
    return np.array(out)


# ---------------------------------------------------------------------------
# Explicit tree (reference engine)
# ---------------------------------------------------------------------------

class TreeNode:
    """One joint generation state in the explicit tree."""

    __slots__ = ("pg", "value", "path_prob", "hop_prob", "node_id", "parent", "children")

    def __init__(self, pg, path_prob, hop_prob, node_id, parent=None):
        self.pg = pg
        self.value = 0.0
        self.path_prob = path_prob
        self.hop_prob = hop_prob
        self.node_id = node_id
        self.parent = parent
        self.children = []

    def __repr__(self):
        return f"TreeNode(id={self.node_id}, pg={self.pg}, p={self.path_prob:.3g})"


def tes_terminal_payoff(p_g_tf, d_c) -> float:
    """Netted shortfall max(sum(D - P), 0): surpluses offset deficits."""
    p = np.asarray(p_g_tf, dtype=float)
    d = np.asarray(d_c, dtype=float)
    if p.shape != d.shape:
        raise LengthMismatch(f"generation {p.shape} vs demand {d.shape}")
    return float(max(np.sum(d - p), 0.0))


def forward_propagate(
    root_pg,
    model: LatticeStepModel,
    n_steps: int,
    max_nodes: int = DEFAULT_NODE_BUDGET,
):
    """Build the complete 2^n-ary tree of depth n_steps; returns the leaves.

    Child k of a parent multiplies the parent state by row k of the movement
    matrix, carries hop probability P_k, and gets id 2^n * parent_id + k + 1.
    Interior nodes stay reachable through the leaves' parent links.
    """
    root_pg = np.asarray(root_pg, dtype=float)
    if np.any(root_pg <= 0):
        raise ValueError("root generation must be strictly positive")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    branches = model.n_branches
    if branches**max(n_steps, 0) > max_nodes:
        raise TreeTooLarge(
            f"{branches}^{n_steps} leaves exceed the node budget {max_nodes}"
        )
    root = TreeNode(pg=root_pg, path_prob=1.0, hop_prob=1.0, node_id=0)
    level = [root]
    factors = model.branch_matrix
    for _ in range(n_steps):
        nxt = []
        for parent in level:
            base_id = branches * parent.node_id
            for k in range(branches):
                child = TreeNode(
                    pg=parent.pg * factors[k],
                    path_prob=parent.path_prob * model.branch_probs[k],
                    hop_prob=float(model.branch_probs[k]),
                    node_id=base_id + k + 1,
                    parent=parent,
                )
                parent.children.append(child)
                nxt.append(child)
        level = nxt
    return level


def tree_levels(leaves):
    """Group a complete tree into levels, leaves first, root last."""
    if not leaves:
        raise MalformedTree("empty leaf list")
    levels = [list(leaves)]
    while levels[-1][0].parent is not None:
        parents = []
        seen = set()
        for node in levels[-1]:
            if node.parent is None:
                raise MalformedTree("leaves have inconsistent depths")
            pid = id(node.parent)
            if pid not in seen:
                seen.add(pid)
                parents.append(node.parent)
        levels.append(parents)
    return levels


def backpropagate(leaves, d_c):
    """Fold terminal payoffs up the tree; every parent is the hop-probability
    average of its children.

    Returns the root value and the root's immediate children (the level used
    for resource extraction); for a depth-0 tree that level is the root
    itself, signalling the single-node branch of the allocation step.
    """
    levels = tree_levels(leaves)
    branches = None
    for node in leaves:
        if node.children:
            raise MalformedTree("leaf has children")
        node.value = tes_terminal_payoff(node.pg, d_c)
    for level in levels[1:]:
        for parent in level:
            if branches is None:
                branches = len(parent.children)
            if len(parent.children) != branches:
                raise MalformedTree("internal node with wrong child count")
            parent.value = float(
                sum(c.hop_prob * c.value for c in parent.children)
            )
    root = levels[-1][0]
    if len(levels) >= 2:
        if len(levels[-1]) != 1 or len(leaves) != branches ** (len(levels) - 1):
            raise MalformedTree("leaf count does not match a complete tree")
        first_level = levels[-2]
    else:
        first_level = [root]
    return root.value, first_level


@dataclass(frozen=True)
class Allocation:
    """ReGU weights, battery units, and replication residual (2-norm, kW)."""

    a: np.ndarray
    b: float
    residual: float


def compute_resources(root_value, first_level_nodes, prev_a, p_b) -> Allocation:
    """Minimum-norm least-squares replication of the first-level values.

    Row j of the design matrix is [P_G of child j, p_b]; the solve uses an
    orthogonal (SVD) decomposition, never normal equations.  A single-node
    level keeps the previous ReGU weights and tops up with battery.
    """
    if p_b <= 0:
        raise ValueError(f"p_b must be > 0, got {p_b}")
    nodes = list(first_level_nodes)
    if len(nodes) == 1:
        node = nodes[0]
        if prev_a is None:
            raise ValueError("single-node extraction needs the previous ReGU weights")
        a = np.asarray(prev_a, dtype=float).copy()
        b = (root_value - float(a @ node.pg)) / p_b
        return Allocation(a=a, b=float(b), residual=0.0)
    n_assets = len(nodes[0].pg)
    design = np.empty((len(nodes), n_assets + 1))
    for j, node in enumerate(nodes):
        design[j, :n_assets] = node.pg
        design[j, n_assets] = p_b
    values = np.array([node.value for node in nodes])
    solution, _, rank, _ = np.linalg.lstsq(design, values, rcond=None)
    if rank < n_assets + 1:
        warnings.warn(
            f"replication design matrix rank {rank} < {n_assets + 1}; "
            "returning the minimum-norm solution",
            RankDeficientWarning,
            stacklevel=2,
        )
    residual = float(np.linalg.norm(design @ solution - values))
    return Allocation(a=solution[:n_assets], b=float(solution[n_assets]), residual=residual)


def replicate_internal(leaves, p_b):
    """Replication solve at every internal node of a backpropagated tree.

    Yields (node, Allocation); with one asset the 2x2 systems are square and
    the residuals vanish to rounding.
    """
    for level in tree_levels(leaves)[1:]:
        for node in level:
            yield node, compute_resources(node.value, node.children, None, p_b)


# ---------------------------------------------------------------------------
# Recombining engine
# ---------------------------------------------------------------------------

def _axis_states(root_pg, model, level):
    """Per-asset state ladders at a level, indexed by up-count."""
    j = np.arange(level + 1)
    return [
        root_pg[i] * np.exp(model.log_steps[i] * (2 * j - level))
        for i in range(model.n_assets)
    ]


def _terminal_grid(root_pg, model, n_steps, d_c):
    n = model.n_assets
    axes = _axis_states(root_pg, model, n_steps)
    total = np.zeros((n_steps + 1,) * n)
    for i, axis in enumerate(axes):
        shape = [1] * n
        shape[i] = n_steps + 1
        total = total + axis.reshape(shape)
    return np.maximum(float(np.sum(d_c)) - total, 0.0)


def _collapse(values, model):
    out = None
    for k in range(model.n_branches):
        sl = tuple(
            slice(1, None) if up else slice(0, -1) for up in model.up_mask[k]
        )
        term = model.branch_probs[k] * values[sl]
        out = term if out is None else out + term
    return out


@dataclass(frozen=True)
class LatticeState:
    """Lightweight (state, value) pair matching the tree-node interface."""

    pg: np.ndarray
    value: float

    # children of the recombining first level; unused, kept for duck typing
    children = ()


def recombining_value(root_pg, model: LatticeStepModel, n_steps: int, d_c):
    """Root value and first-level states via up-count indexing.

    Equivalent to forward_propagate + backpropagate because probabilities
    are state independent and u*d = 1 makes states depend only on per-asset
    up-counts.  Cost is polynomial in n_steps instead of exponential.
    """
    root_pg = np.asarray(root_pg, dtype=float)
    if n_steps == 0:
        value = tes_terminal_payoff(root_pg, d_c)
        return value, [LatticeState(pg=root_pg, value=value)]
    values = _terminal_grid(root_pg, model, n_steps, d_c)
    first = None
    for level in range(n_steps, 0, -1):
        if level == 1:
            first = values
        values = _collapse(values, model)
    root_value = float(values.reshape(-1)[0])
    factors = model.branch_matrix
    nodes = []
    for k in range(model.n_branches):
        idx = tuple(int(up) for up in model.up_mask[k])
        nodes.append(
            LatticeState(pg=root_pg * factors[k], value=float(first[idx]))
        )
    return root_value, nodes


def dynamic_allocation(
    pg_now,
    d_c,
    model: LatticeStepModel,
    remaining_steps: int,
    prev_a,
    p_b,
    engine: str = "recombining",
    max_nodes: int = DEFAULT_NODE_BUDGET,
):
    """End-to-end allocation step: propagate, value, and extract resources.

    Returns (portfolio value at the evaluation time, Allocation).
    """
    pg_now = np.asarray(pg_now, dtype=float)
    if prev_a is None:
        prev_a = np.zeros(len(pg_now))
    if engine == "tree":
        leaves = forward_propagate(pg_now, model, remaining_steps, max_nodes=max_nodes)
        value, first_level = backpropagate(leaves, d_c)
    elif engine == "recombining":
        value, first_level = recombining_value(pg_now, model, remaining_steps, d_c)
        if remaining_steps == 0:
            first_level = first_level[:1]
    else:
        raise ValueError(f"unknown engine {engine!r}")
    allocation = compute_resources(value, first_level, prev_a, p_b)
    return value, allocation


# ---------------------------------------------------------------------------
# Monte Carlo oracle
# ---------------------------------------------------------------------------

def tes_value_mc(grid: GridEnsemble, p_g_now, t, t_f, n_paths: int, seed: int):
    """Transformed-measure Monte Carlo estimate of the pooled portfolio value.

    One exact lognormal step to the horizon suffices because the terminal
    law is sampled exactly.  Returns (estimate, standard error).
    """
    if t >= t_f:
        raise TimeOutOfRange(f"need t < t_f, got t={t}, t_f={t_f}")
    ensemble = simulate_paths(
        grid.params,
        grid.corr,
        np.asarray(p_g_now, dtype=float),
        horizon=t_f - t,
        n_steps=1,
        n_paths=n_paths,
        seed=seed,
        measure="transformed",
    )
    terminal = ensemble.values[:, -1, :]
    payoff = np.maximum(np.sum(grid.demands - terminal, axis=1), 0.0)
    estimate = float(payoff.mean())
    stderr = float(payoff.std(ddof=1) / np.sqrt(n_paths))
    return estimate, stderr
