"""N-worker data-parallel training loop with compressed all-reduce.

One step has three phases. In the compute phase every worker evaluates its
stochastic gradient on its own replica of the parameters. In the reduction
phase contributions are averaged over a fixed summation tree ordered by
node id. In the update phase every worker applies the same optimizer update
to its replica. Replicas are compared bitwise every ``replica_check_every``
steps.

Gradients whose matrix has more rows than columns are transposed before
compression, so projectors always act on the shorter side, and transposed
back before the optimizer sees them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import feedback, rng as rngmod
from .comm import FULL_GRAD, LOWRANK, SPARSE, CommLedger, all_reduce_mean
from .compressors import (
    COMPRESSOR_TAGS,
    CompressorKind,
    CompressorState,
    approx_top_r,
    lazy_svd_update,
    random_lowrank_projector,
    sparsify,
)
from .feedback import ErrorBuffer
from .linalg import Projector, frobenius_norm_sq, project, reconstruct, svd_full
from .optimizers import AdamState, OptimizerState, adam_direction, learning_rate, make_optimizer
from .problems import Problem, ProblemSpec, make_problem

LOWRANK_TAGS = ("greedylore", "lazy_svd", "galore", "random_lowrank")
PERIODIC_TAGS = ("greedylore", "lazy_svd", "galore")

TRACE_HEADER = "step,loss,grad_norm_sq,comm_scalars,contraction"


class ConfigError(ValueError):
    pass


class NumericalBlowup(ArithmeticError):
    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite loss {value!r} at step {step}")
        self.step = step
        self.value = value


class ReplicaDivergence(AssertionError):
    pass


@dataclass
class RunConfig:
    n_nodes: int = 1
    steps: int = 100
    period: int = 10
    rank: int = 1
    compressor: str = "greedylore"
    k: Optional[int] = None
    # lazy_svd only: add error-feedback buffers to the basic framework
    error_feedback: bool = False
    optimizer: str = "msgd"
    lr: float = 0.1
    beta: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.99
    epsilon: float = 1e-8
    adam_mode: str = "practical"
    schedule: str = "constant"
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    base_seed: int = 0
    init_scale: float = 0.0
    metrics_every: int = 1
    replica_check_every: int = 50
    label: str = ""

    def validate(self) -> None:
        if self.n_nodes < 1:
            raise ConfigError("n_nodes must be >= 1")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.period < 1:
            raise ConfigError("period must be >= 1")
        if self.rank < 1:
            raise ConfigError("rank must be >= 1")
        if self.metrics_every < 1 or self.replica_check_every < 1:
            raise ConfigError("metrics_every and replica_check_every must be >= 1")
        if self.compressor not in COMPRESSOR_TAGS:
            raise ConfigError(f"unknown compressor {self.compressor!r}")
        m, n = self.problem.m, self.problem.n
        if self.compressor in LOWRANK_TAGS and self.rank > min(m, n):
            raise ConfigError(f"rank {self.rank} exceeds the compressed dimension {min(m, n)}")
        if self.compressor in ("top_k", "rand_k"):
            if self.k is None or not 1 <= self.k <= m * n:
                raise ConfigError(f"k must lie in [1, {m * n}]")
        if self.optimizer not in ("msgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.compressor == "galore" and self.optimizer != "adam":
            raise ConfigError("galore keeps Adam states in the subspace; set optimizer = adam")
        if self.schedule not in ("constant", "linear"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        try:
            CompressorKind(self.compressor, rank=self.rank, k=self.k)
            self.make_optimizer()
            replace(self.problem, n_nodes=self.n_nodes)
        except (ValueError, NotImplementedError) as exc:
            raise ConfigError(str(exc)) from exc

    def make_optimizer(self) -> OptimizerState:
        return make_optimizer(
            self.optimizer,
            gamma=self.lr,
            beta=self.beta,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            mode=self.adam_mode,
        )

    def problem_spec(self) -> ProblemSpec:
        return replace(self.problem, n_nodes=self.n_nodes)

    def expected_scalars_per_step(self) -> Optional[float]:
        """Closed-form per-node average for the executed schedule over whole periods."""
        m, n = self.problem.m, self.problem.n
        lo, hi = min(m, n), max(m, n)
        r, tau = self.rank, self.period
        if self.compressor == "none":
            return float(m * n)
        if self.compressor in ("lazy_svd", "galore"):
            return r * hi + m * n / tau
        if self.compressor == "greedylore":
            if r >= lo:
                return r * hi + m * n / tau
            return r * hi + lo * (tau - 1) / tau + m * n / tau
        if self.compressor == "random_lowrank":
            return float(r * hi)
        return None


@dataclass
class WorkerState:
    node_id: int
    x: np.ndarray
    optimizer: OptimizerState
    error: ErrorBuffer
    base_seed: int
    subspace_optimizer: Optional[AdamState] = None

    def noise_rng(self, t: int) -> np.random.Generator:
        return rngmod.stream(self.base_seed, "noise", self.node_id, t)


@dataclass(frozen=True)
class IterationTrace:
    step: int
    loss: float
    grad_norm_sq: float
    comm_scalars_cumulative: int
    contraction_observed: Optional[float] = None

    def csv_row(self) -> str:
        c = "" if self.contraction_observed is None else repr(float(self.contraction_observed))
        return f"{self.step},{self.loss!r},{self.grad_norm_sq!r},{self.comm_scalars_cumulative},{c}"


class Simulation:
    """All state for one run: workers, shared compressor state and the ledger."""

    def __init__(
        self,
        cfg: RunConfig,
        problem: Optional[Problem] = None,
        x0: Optional[np.ndarray] = None,
        fixed_projector: Optional[Projector] = None,
    ):
        cfg.validate()
        self.cfg = cfg
        self.problem = problem if problem is not None else make_problem(cfg.problem_spec())
        if self.problem.n_nodes != cfg.n_nodes:
            raise ConfigError("problem node count differs from n_nodes")
        m, n = self.problem.shape
        self.transposed = m > n
        self.work_shape = (n, m) if self.transposed else (m, n)
        if x0 is None:
            x0 = self.problem.initial_point()
            if cfg.init_scale > 0:
                x0 = x0 + cfg.init_scale * rngmod.stream(cfg.base_seed, "init", 0).standard_normal(x0.shape)
        x0 = np.array(x0, dtype=np.float64)
        self.workers = [
            WorkerState(
                node_id=i,
                x=x0.copy(),
                optimizer=cfg.make_optimizer(),
                error=ErrorBuffer.zeros(self.work_shape),
                base_seed=cfg.base_seed,
            )
            for i in range(1, cfg.n_nodes + 1)
        ]
        self.ledger = CommLedger()
        self.comp: Optional[CompressorState] = None
        if cfg.compressor in PERIODIC_TAGS:
            self.comp = CompressorState(m=self.work_shape[0], rank=cfg.rank, period=cfg.period)
        self.fixed_projector = fixed_projector
        if fixed_projector is not None and cfg.compressor != "lazy_svd":
            raise ConfigError("a fixed projector is only meaningful for the lazy_svd framework")
        if fixed_projector is not None and fixed_projector.m != self.work_shape[0]:
            raise ConfigError("fixed projector rows must match the compressed dimension")
        self.step_fn: Callable[["Simulation", int], Optional[float]] = STEP_FUNCTIONS[cfg.compressor]

    # -- phases ---------------------------------------------------------

    @property
    def x(self) -> np.ndarray:
        return self.workers[0].x

    def to_work(self, g: np.ndarray) -> np.ndarray:
        return g.T if self.transposed else g

    def from_work(self, g: np.ndarray) -> np.ndarray:
        return g.T if self.transposed else g

    def raw_gradients(self, t: int) -> dict[int, np.ndarray]:
        return {
            w.node_id: self.to_work(self.problem.stochastic_grad(w.node_id, w.x, w.noise_rng(t)))
            for w in self.workers
        }

    def apply_update(self, g_hat_work: np.ndarray, t: int) -> None:
        g = self.from_work(g_hat_work)
        lr = learning_rate(self.cfg.lr, self.cfg.schedule, t, self.cfg.steps)
        for w in self.workers:
            w.x = w.optimizer.step(w.x, g, lr)

    def check_replicas(self) -> None:
        ref = self.workers[0]
        for w in self.workers[1:]:
            if not np.array_equal(w.x, ref.x):
                raise ReplicaDivergence(f"worker {w.node_id} parameters differ from worker {ref.node_id}")
            for name in ("m", "v"):
                a, b = getattr(w.optimizer, name, None), getattr(ref.optimizer, name, None)
                if (a is None) != (b is None) or (a is not None and not np.array_equal(a, b)):
                    raise ReplicaDivergence(f"worker {w.node_id} optimizer state {name!r} differs")

    def step(self, t: int) -> Optional[float]:
        """Run step ``t``; returns the observed contraction ratio when defined."""
        return self.step_fn(self, t)


def _observed_contraction(g_true: np.ndarray, g_hat: np.ndarray) -> Optional[float]:
    denom = frobenius_norm_sq(g_true)
    if denom == 0.0:
        return None
    return frobenius_norm_sq(g_hat - g_true) / denom


def dense_step(sim: Simulation, t: int) -> Optional[float]:
    """Uncompressed data-parallel step: all-reduce the full gradient."""
    grads = sim.raw_gradients(t)
    g = all_reduce_mean(grads, sim.ledger, FULL_GRAD, t)
    sim.apply_update(g, t)
    return None


def greedylore_step(sim: Simulation, t: int) -> Optional[float]:
    """Error feedback plus periodic SVD refresh with approximate global top-r."""
    cfg, comp = sim.cfg, sim.comp
    tau, r = cfg.period, cfg.rank
    period_start = t % tau == 0
    raw = sim.raw_gradients(t)
    grads = {w.node_id: feedback.inject(raw[w.node_id], w.error) for w in sim.workers}

    if r >= sim.work_shape[0]:
        # full rank: the compressor is the identity and buffers stay zero
        if period_start:
            g_hat = all_reduce_mean(grads, sim.ledger, FULL_GRAD, t)
        r_mean = all_reduce_mean(grads, sim.ledger, LOWRANK, t)
        if not period_start:
            g_hat = r_mean
        sim.apply_update(g_hat, t)
        return 0.0

    if period_start:
        g_global = all_reduce_mean(grads, sim.ledger, FULL_GRAD, t)
        comp.basis_u = svd_full(g_global).u
        p = Projector.from_columns(comp.basis_u, range(r))
    else:
        shared = rngmod.stream(cfg.base_seed, "shared", t)
        p = approx_top_r(grads, comp.basis_u, r, shared, sim.ledger, t)
    comp.projector = p
    comp.step_in_period = t % tau

    coords = {}
    for w in sim.workers:
        g = grads[w.node_id]
        coords[w.node_id] = project(p, g)
        feedback.update(w.error, g, p, coords[w.node_id], t, tau)
    r_mean = all_reduce_mean(coords, sim.ledger, LOWRANK, t)

    if period_start:
        g_hat, contraction = g_global, 0.0
    else:
        g_hat = reconstruct(p, r_mean)
        contraction = _observed_contraction(all_reduce_mean(grads), g_hat)
    sim.apply_update(g_hat, t)
    return contraction


def basic_framework_step(sim: Simulation, t: int) -> Optional[float]:
    """Lazy SVD: projector fixed within each period, no error feedback by default.

    With ``cfg.error_feedback`` the buffers of the GreedyLore step are added
    (ablation). With a fixed projector every step is compressed and the SVD
    never runs.
    """
    cfg, comp = sim.cfg, sim.comp
    tau = cfg.period
    use_ef = cfg.error_feedback
    raw = sim.raw_gradients(t)
    grads = {w.node_id: feedback.inject(raw[w.node_id], w.error) if use_ef else raw[w.node_id] for w in sim.workers}

    fixed = sim.fixed_projector
    period_start = fixed is None and t % tau == 0
    if fixed is not None:
        p = fixed
    elif period_start:
        g_global = all_reduce_mean(grads, sim.ledger, FULL_GRAD, t)
        p = lazy_svd_update(comp, g_global, t)
    else:
        p = lazy_svd_update(comp, None, t)

    coords = {}
    for w in sim.workers:
        coords[w.node_id] = project(p, grads[w.node_id])
        if use_ef and fixed is None:
            feedback.update(w.error, grads[w.node_id], p, coords[w.node_id], t, tau)
        elif use_ef:
            # a fixed projector has no period boundary to reset at
            w.error.e = grads[w.node_id] - reconstruct(p, coords[w.node_id])
    r_mean = all_reduce_mean(coords, sim.ledger, LOWRANK, t)

    if period_start:
        g_hat, contraction = g_global, 0.0
    else:
        g_hat = reconstruct(p, r_mean)
        contraction = _observed_contraction(all_reduce_mean(grads), g_hat)
    sim.apply_update(g_hat, t)
    return contraction


def galore_step(sim: Simulation, t: int) -> Optional[float]:
    """Distributed GaLore: Adam moments live in the r x n subspace and reset each period."""
    cfg, comp = sim.cfg, sim.comp
    grads = sim.raw_gradients(t)
    period_start = t % cfg.period == 0
    if period_start:
        g_global = all_reduce_mean(grads, sim.ledger, FULL_GRAD, t)
        p = lazy_svd_update(comp, g_global, t)
        for w in sim.workers:
            w.subspace_optimizer = AdamState(
                gamma=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon, mode="practical"
            )
    else:
        p = lazy_svd_update(comp, None, t)
    coords = {w.node_id: project(p, grads[w.node_id]) for w in sim.workers}
    r_mean = all_reduce_mean(coords, sim.ledger, LOWRANK, t)
    lr = learning_rate(cfg.lr, cfg.schedule, t, cfg.steps)
    for w in sim.workers:
        direction = adam_direction(r_mean, w.subspace_optimizer)
        w.x = w.x - lr * sim.from_work(reconstruct(p, direction))
    return _observed_contraction(all_reduce_mean(grads), reconstruct(p, r_mean))


def random_lowrank_step(sim: Simulation, t: int) -> Optional[float]:
    """Fresh shared random subspace every step, with error feedback."""
    cfg = sim.cfg
    raw = sim.raw_gradients(t)
    grads = {w.node_id: feedback.inject(raw[w.node_id], w.error) for w in sim.workers}
    p = random_lowrank_projector(sim.work_shape[0], cfg.rank, rngmod.stream(cfg.base_seed, "projector", t))
    coords = {}
    for w in sim.workers:
        g = grads[w.node_id]
        coords[w.node_id] = project(p, g)
        w.error.e = g - reconstruct(p, coords[w.node_id])
    g_hat = reconstruct(p, all_reduce_mean(coords, sim.ledger, LOWRANK, t))
    contraction = _observed_contraction(all_reduce_mean(grads), g_hat)
    sim.apply_update(g_hat, t)
    return contraction


def sparse_step(sim: Simulation, t: int) -> Optional[float]:
    """top_k with error feedback (values + indices sent); rand_k unbiased, shared indices."""
    cfg = sim.cfg
    raw = sim.raw_gradients(t)
    kept = {}
    if cfg.compressor == "top_k":
        grads = {w.node_id: feedback.inject(raw[w.node_id], w.error) for w in sim.workers}
        for w in sim.workers:
            kept[w.node_id] = sparsify("top_k", grads[w.node_id], cfg.k)
            w.error.e = grads[w.node_id] - kept[w.node_id]
        count = 2 * cfg.k
    else:
        grads = raw
        for w in sim.workers:
            shared = rngmod.stream(cfg.base_seed, "sparsify", t)
            kept[w.node_id] = sparsify("rand_k", grads[w.node_id], cfg.k, shared)
        count = cfg.k
    g_hat = all_reduce_mean(kept)
    sim.ledger.record(t, SPARSE, count)
    contraction = _observed_contraction(all_reduce_mean(grads), g_hat)
    sim.apply_update(g_hat, t)
    return contraction


STEP_FUNCTIONS = {
    "none": dense_step,
    "greedylore": greedylore_step,
    "lazy_svd": basic_framework_step,
    "galore": galore_step,
    "random_lowrank": random_lowrank_step,
    "top_k": sparse_step,
    "rand_k": sparse_step,
}


@dataclass
class RunResult:
    cfg: RunConfig
    traces: list[IterationTrace]
    ledger: CommLedger
    final_x: np.ndarray
    final_loss: float
    warnings: list[str] = field(default_factory=list)

    def trace_csv(self) -> str:
        return trace_csv_text(self.traces)

    def tail_mean_grad_norm_sq(self, fraction: float = 0.1) -> float:
        k = max(1, int(math.ceil(len(self.traces) * fraction)))
        return float(np.mean([tr.grad_norm_sq for tr in self.traces[-k:]]))

    def average_scalars_per_step(self) -> float:
        return self.ledger.average_per_step(self.cfg.steps)


def trace_csv_text(traces: list[IterationTrace]) -> str:
    return TRACE_HEADER + "\n" + "".join(tr.csv_row() + "\n" for tr in traces)


def run(
    cfg: RunConfig,
    problem: Optional[Problem] = None,
    x0: Optional[np.ndarray] = None,
    fixed_projector: Optional[Projector] = None,
    worker_order: Optional[list[int]] = None,
) -> RunResult:
    """Execute ``cfg.steps`` steps; traces are taken at X_t before step t.

    ``worker_order`` permutes the order in which workers are visited inside
    each phase; results must not depend on it.
    """
    sim = Simulation(cfg, problem, x0, fixed_projector)
    if worker_order is not None:
        by_id = {w.node_id: w for w in sim.workers}
        sim.workers = [by_id[i] for i in worker_order]
    warnings = []
    if cfg.compressor in PERIODIC_TAGS and cfg.steps % cfg.period != 0:
        warnings.append(
            f"steps={cfg.steps} is not a multiple of period={cfg.period}; "
            "average communication will not match the per-period formula exactly"
        )
    traces = []
    for t in range(cfg.steps):
        record = t % cfg.metrics_every == 0
        if record:
            loss = sim.problem.loss(sim.x)
            if not math.isfinite(loss):
                raise NumericalBlowup(t, loss)
            gn = frobenius_norm_sq(sim.problem.full_grad(sim.x))
        contraction = sim.step(t)
        if record:
            traces.append(IterationTrace(t, loss, gn, sim.ledger.scalars_allreduce, contraction))
        if (t + 1) % cfg.replica_check_every == 0:
            sim.check_replicas()
    sim.check_replicas()
    final_loss = sim.problem.loss(sim.x)
    if not math.isfinite(final_loss):
        raise NumericalBlowup(cfg.steps, final_loss)
    return RunResult(cfg, traces, sim.ledger, sim.x.copy(), final_loss, warnings)


def run_fixed_projector_descent(problem: Problem, projector: Projector, gamma: float, steps: int, x0=None):
    """Plain gradient descent with ``G -> P P^T G`` at every step and no refresh.

    Returns the list of iterates ``[X_0, ..., X_steps]``.
    """
    cfg = RunConfig(
        n_nodes=problem.n_nodes,
        steps=steps,
        period=steps + 1,
        rank=projector.rank,
        compressor="lazy_svd",
        optimizer="msgd",
        lr=gamma,
        beta=0.0,
        problem=problem.spec,
    )
    sim = Simulation(cfg, problem, x0, fixed_projector=projector)
    xs = [sim.x.copy()]
    for t in range(steps):
        sim.step(t)
        xs.append(sim.x.copy())
    return xs
