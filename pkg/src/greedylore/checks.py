"""Named property checks run by ``greedylore check``.

Each check returns a :class:`CheckResult` carrying the observed value and the
bound it was compared against. The registry covers the invariants of every
module plus the acceptance criteria (``ac1`` ... ``ac10``).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import constants as C
from . import feedback
from .cluster import RunConfig, Simulation, run, run_fixed_projector_descent
from .compressors import (
    approx_top_r,
    compress,
    contraction_ratio,
    exact_top_r_select,
    local_lambdas,
    row_energies,
    top_indices,
)
from .feedback import ErrorBuffer
from .linalg import Projector, frobenius_norm_sq, is_orthonormal, project, reconstruct, svd_full
from .optimizers import AdamState, MsgdState, adam_step, msgd_step
from .problems import ProblemSpec, make_problem


@dataclass
class CheckResult:
    name: str
    passed: bool
    observed: str
    bound: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: observed {self.observed}; bound {self.bound} ({self.seconds:.2f}s)"


REGISTRY: dict[str, Callable[[], CheckResult]] = {}


def register(name: str):
    def deco(fn):
        def wrapped() -> CheckResult:
            t0 = time.perf_counter()
            res = fn()
            res.name = name
            res.seconds = time.perf_counter() - t0
            return res

        wrapped.__name__ = fn.__name__
        wrapped.__doc__ = fn.__doc__
        REGISTRY[name] = wrapped
        return wrapped

    return deco


def _result(passed, observed, bound) -> CheckResult:
    return CheckResult("", bool(passed), observed, bound)


def random_orthogonal(rng: np.random.Generator, m: int) -> np.ndarray:
    return svd_full(rng.standard_normal((m, m))).u


# ---------------------------------------------------------------- matrix core


@register("svd_contract")
def check_svd_contract():
    rng = np.random.default_rng(5)
    worst_orth, worst_recon, sorted_ok = 0.0, 0.0, True
    for shape in [(8, 12), (12, 8), (5, 5), (1, 7), (16, 16)]:
        g = rng.standard_normal(shape)
        res = svd_full(g)
        m, n = shape
        worst_orth = max(worst_orth, np.linalg.norm(res.u.T @ res.u - np.eye(m)), np.linalg.norm(res.v.T @ res.v - np.eye(n)))
        worst_recon = max(worst_recon, np.linalg.norm(res.reconstruct() - g) / np.linalg.norm(g))
        sorted_ok &= bool(np.all(np.diff(res.sigma) <= 0) and np.all(res.sigma >= 0))
    ok = worst_orth <= C.ORTHO_TOL and worst_recon <= C.RECON_TOL and sorted_ok
    return _result(ok, f"orth {worst_orth:.2e}, recon {worst_recon:.2e}, sorted {sorted_ok}", f"{C.ORTHO_TOL}, {C.RECON_TOL}")


@register("pythagoras")
def check_pythagoras():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        m = int(rng.integers(2, 20))
        n = int(rng.integers(1, 20))
        r = int(rng.integers(1, m + 1))
        p = Projector(random_orthogonal(rng, m)[:, :r])
        g = rng.standard_normal((m, n))
        lhs = frobenius_norm_sq(g)
        rhs = frobenius_norm_sq(project(p, g)) + frobenius_norm_sq(g - compress(p, g))
        worst = max(worst, abs(lhs - rhs) / lhs)
    return _result(worst <= C.PYTHAGORAS_TOL, f"max rel err {worst:.2e}", f"<= {C.PYTHAGORAS_TOL}")


@register("svd_determinism")
def check_svd_determinism():
    g = np.random.default_rng(8).standard_normal((24, 40))
    a, b = svd_full(g), svd_full(g.copy())
    same = all(x.tobytes() == y.tobytes() for x, y in [(a.u, b.u), (a.sigma, b.sigma), (a.v, b.v)])
    return _result(same, f"bytes identical {same}", "identical")


@register("projection_idempotence")
def check_projection_idempotence():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        m, n = int(rng.integers(2, 16)), int(rng.integers(1, 16))
        r = int(rng.integers(1, m + 1))
        p = Projector(random_orthogonal(rng, m)[:, :r])
        g = rng.standard_normal((m, n))
        once = reconstruct(p, project(p, g))
        twice = reconstruct(p, project(p, once))
        worst = max(worst, float(np.max(np.abs(twice - once))))
    return _result(worst <= C.IDEMPOTENCE_TOL, f"max abs diff {worst:.2e}", f"<= {C.IDEMPOTENCE_TOL}")


# ---------------------------------------------------------------- compressors


def exact_topr_trials(seed: int = C.TOPR_SEED, trials: int = C.TOPR_TRIALS):
    """Yield (ratio, bound) for exact top-r selection on random (U, G, r)."""
    rng = np.random.default_rng(seed)
    for i in range(trials):
        m = C.TOPR_ROWS[i % len(C.TOPR_ROWS)]
        r = [1, m // 4, m // 2][(i // len(C.TOPR_ROWS)) % 3]
        n = int(rng.integers(1, C.TOPR_MAX_COLS + 1))
        u = svd_full(rng.standard_normal((m, n))).u
        g = rng.standard_normal((m, n))
        p = exact_top_r_select(u, g, r)
        yield frobenius_norm_sq(g - compress(p, g)), (1 - r / m) * frobenius_norm_sq(g)


@register("exact_topr_contraction")
def check_exact_topr():
    worst, violations = 0.0, 0
    for err, bound in exact_topr_trials():
        worst = max(worst, err / (bound + 1e-300) if bound > 0 else 0.0)
        violations += err > bound + C.CONTRACTION_SLACK
    return _result(violations == 0, f"{violations} violations, max err/bound {worst:.6f}", f"err <= (1 - r/m)||G||^2 + {C.CONTRACTION_SLACK}")


@register("approx_topr_contraction")
def check_approx_topr():
    rng = np.random.default_rng(C.APPROX_TOPR_SEED)
    m, n = C.APPROX_TOPR_SHAPE
    u = random_orthogonal(rng, m)
    # spread row energies so the selection matters
    g = np.diag(np.linspace(3.0, 0.3, m)) @ u.T @ rng.standard_normal((m, n))
    worst = -math.inf
    details = []
    for r in C.APPROX_TOPR_RANKS:
        errs = np.empty(C.APPROX_TOPR_DRAWS)
        for d in range(C.APPROX_TOPR_DRAWS):
            p = approx_top_r([g], u, r, rng)
            errs[d] = frobenius_norm_sq(g - compress(p, g))
        bound = (1 - r / m) * frobenius_norm_sq(g)
        se = errs.std(ddof=1) / math.sqrt(len(errs))
        slack = errs.mean() - (bound + C.STDERR_MULTIPLIER * se)
        worst = max(worst, slack)
        details.append(f"r={r}: mean {errs.mean():.3f} vs {bound:.3f}")
    return _result(worst <= 0, "; ".join(details), "mean <= (1 - r/m)||G||^2 + 3 SE")


def sketch_statistics(seed: int = C.SKETCH_SEED, n_mats: int = C.SKETCH_MATRICES, draws: int = C.SKETCH_DRAWS):
    """Return a list of (sample mean, standard error, target) per (matrix, row).

    Each node evaluates its own scalars against the same sketch draws; the
    node average is then squared.
    """
    rng = np.random.default_rng(seed)
    m, n = C.SKETCH_SHAPE
    out = []
    for _ in range(n_mats):
        u = random_orthogonal(rng, m)
        locals_ = [rng.standard_normal((m, n)) for _ in range(C.SKETCH_NODES)]
        g = sum(locals_) / len(locals_)
        target = row_energies(u, g)
        sums = np.zeros(m)
        sq_sums = np.zeros(m)
        chunk = 20_000
        done = 0
        while done < draws:
            b = min(chunk, draws - done)
            sketch = rng.standard_normal((b, m, n))
            lam = sum(local_lambdas(gi, u, sketch) for gi in locals_) / len(locals_)
            est = lam * lam
            sums += est.sum(axis=0)
            sq_sums += (est * est).sum(axis=0)
            done += b
        mean = sums / draws
        var = (sq_sums - draws * mean * mean) / (draws - 1)
        se = np.sqrt(var / draws)
        out.extend(zip(mean, se, target))
    return out


@register("sketch_unbiased")
def check_sketch_unbiased():
    stats = sketch_statistics()
    z = [abs(mu - tgt) / se for mu, se, tgt in stats]
    bad = sum(v > C.STDERR_MULTIPLIER for v in z)
    return _result(bad == 0, f"{bad}/{len(z)} rows outside, max |z| {max(z):.2f}", f"|z| <= {C.STDERR_MULTIPLIER}")


def topk_membership_frequencies(sigmas, k: int, trials: int, rng: np.random.Generator):
    """Empirical P[|xi_i| in Top_k] per index, with standard errors."""
    sigmas = np.asarray(sigmas, dtype=np.float64)
    xi = np.abs(rng.standard_normal((trials, len(sigmas))) * sigmas)
    # rank by magnitude, smaller index on ties
    order = np.lexsort((np.broadcast_to(np.arange(len(sigmas)), xi.shape), -xi), axis=1)
    hits = np.zeros((trials, len(sigmas)), dtype=bool)
    np.put_along_axis(hits, order[:, :k], True, axis=1)
    freq = hits.mean(axis=0)
    se = np.sqrt(freq * (1 - freq) / trials)
    return freq, se


@register("topk_membership_ordering")
def check_membership():
    rng = np.random.default_rng(C.MEMBERSHIP_SEED)
    fails = []
    for m in C.MEMBERSHIP_EXTRA_DIMS:
        sig = np.linspace(2.0, 0.5, m)
        for k in (1, m - 1):
            freq, se = topk_membership_frequencies(sig, k, C.MEMBERSHIP_TRIALS, rng)
            ok = freq[0] >= freq[1] - C.STDERR_MULTIPLIER * math.hypot(se[0], se[1])
            if not ok:
                fails.append(f"m={m},k={k}")
    return _result(not fails, f"failures {fails or 'none'}", "P1 >= P2 - 3 SE")


@register("lazy_noncontractive_witness")
def check_lazy_witness():
    p = Projector.from_columns(svd_full(np.diag([2.0, 1.0])).u, [0])
    g = np.diag([0.0, 1.0])
    ratio = contraction_ratio(g, compress(p, g))
    return _result(ratio == 1.0, f"ratio {ratio!r}", "== 1 exactly")


# ---------------------------------------------------------------- feedback


@register("ef_decomposition")
def check_ef_decomposition():
    rng = np.random.default_rng(12)
    worst = 0.0
    for t in range(1, 200):
        m, n = 6, 9
        p = Projector(random_orthogonal(rng, m)[:, : 1 + t % m])
        g = rng.standard_normal((m, n))
        buf = ErrorBuffer.zeros((m, n))
        coords = project(p, g)
        feedback.update(buf, g, p, coords, t, 10_000)
        worst = max(worst, float(np.max(np.abs(reconstruct(p, coords) + buf.e - g))))
    return _result(worst <= C.EF_DECOMPOSITION_TOL, f"max abs {worst:.2e}", f"<= {C.EF_DECOMPOSITION_TOL}")


def fixed_projector_ef_deviation(seed: int = C.NULLIFY_SEED, shape=C.NULLIFY_SHAPE, rank: int = C.NULLIFY_RANK, period: int = C.NULLIFY_PERIOD):
    """Max Frobenius gap between compressed streams with and without EF.

    Uses a projector fixed for the whole period and feeds the same random
    gradient sequence to both streams.
    """
    rng = np.random.default_rng(seed)
    m, n = shape
    p = Projector.from_columns(svd_full(rng.standard_normal((m, n))).u, range(rank))
    buf = ErrorBuffer.zeros((m, n))
    worst, worst_orth = 0.0, 0.0
    for t in range(1, period):
        g = rng.standard_normal((m, n))
        with_ef = feedback.inject(g, buf)
        coords = project(p, with_ef)
        worst = max(worst, float(np.linalg.norm(reconstruct(p, coords) - compress(p, g))))
        feedback.update(buf, with_ef, p, coords, t, period)
        worst_orth = max(worst_orth, float(np.max(np.abs(p.basis.T @ buf.e))))
    return worst, worst_orth


@register("ef_nullification")
def check_ef_nullification():
    dev, _ = fixed_projector_ef_deviation()
    return _result(dev < C.NULLIFICATION_TOL, f"max deviation {dev:.2e}", f"< {C.NULLIFICATION_TOL}")


@register("ef_orthogonal_complement")
def check_ef_orth():
    _, orth = fixed_projector_ef_deviation()
    return _result(orth <= C.ORTHO_COMPLEMENT_TOL, f"max |P^T e| {orth:.2e}", f"<= {C.ORTHO_COMPLEMENT_TOL}")


# ---------------------------------------------------------------- optimizers


@register("amsgrad_monotone")
def check_amsgrad():
    rng = np.random.default_rng(13)
    s = AdamState(gamma=0.01, mode="amsgrad")
    x = np.zeros((4, 5))
    for t in range(300):
        x = adam_step(x, rng.standard_normal((4, 5)) * (3.0 if t % 50 == 0 else 0.5), s)
    diffs = np.diff(s.normalizers)
    return _result(bool(np.all(diffs <= 0)), f"max increase {diffs.max():.2e}", "<= 0")


@register("msgd_scale")
def check_msgd_scale():
    rng = np.random.default_rng(14)
    grads = [rng.standard_normal((3, 4)) for _ in range(50)]
    c = 4.0
    x0 = rng.standard_normal((3, 4))
    s1, s2 = MsgdState(gamma=0.1, beta=0.9), MsgdState(gamma=0.1, beta=0.9)
    x1, x2 = x0.copy(), x0.copy()
    worst = 0.0
    for g in grads:
        x1 = msgd_step(x1, g, s1)
        x2 = msgd_step(x2, c * g, s2)
        worst = max(worst, float(np.max(np.abs(s2.m - c * s1.m))), float(np.max(np.abs((x2 - x0) - c * (x1 - x0)))))
    return _result(worst <= C.MSGD_SCALE_TOL, f"max abs {worst:.2e}", f"<= {C.MSGD_SCALE_TOL}")


@register("optimizer_determinism")
def check_opt_det():
    rng = np.random.default_rng(15)
    grads = [rng.standard_normal((3, 4)) for _ in range(30)]

    def traj(make):
        s, x = make(), np.ones((3, 4))
        for g in grads:
            x = s.step(x, g)
        return x.tobytes()

    ok = all(
        traj(f) == traj(f)
        for f in (lambda: MsgdState(0.1), lambda: AdamState(0.01), lambda: AdamState(0.01, mode="amsgrad"))
    )
    return _result(ok, f"bit-identical {ok}", "identical")


# ---------------------------------------------------------------- problems


@register("lipschitz_gradient")
def check_lipschitz():
    rng = np.random.default_rng(16)
    worst = 0.0
    for kind, shape in [("quadratic", (5, 7)), ("counterexample", (2, 2)), ("logistic", (3, 6))]:
        spec = ProblemSpec(kind, *shape, L=1.5 if kind != "logistic" else 1.0, heterogeneity=1.0, n_nodes=2, seed=3)
        prob = make_problem(spec)
        lip = getattr(prob, "smoothness", spec.L)
        for _ in range(50):
            x, y = rng.standard_normal(shape), rng.standard_normal(shape)
            ratio = np.linalg.norm(prob.full_grad(x) - prob.full_grad(y)) / (lip * np.linalg.norm(x - y))
            worst = max(worst, ratio)
    return _result(worst <= 1 + 1e-12, f"max ||dgrad||/(L||dx||) {worst:.4f}", "<= 1")


@register("logistic_bounded_grad")
def check_logistic_bounded():
    rng = np.random.default_rng(17)
    spec = ProblemSpec("logistic", 4, 10, n_nodes=3, seed=2)
    prob = make_problem(spec)
    # each sample contributes at most sqrt(2) * ||a|| <= sqrt(2) * feature_scale
    bound = math.sqrt(2) * spec.feature_scale
    worst = max(np.linalg.norm(prob.grad(i, 10 * rng.standard_normal((4, 10)))) for i in (1, 2, 3) for _ in range(30))
    return _result(worst <= bound, f"max ||grad|| {worst:.4f}", f"<= {bound:.4f}")


# ---------------------------------------------------------------- cluster


def ledger_runs():
    """Average per-node scalars per step for GreedyLore and lazy-SVD GaLore."""
    m, n = C.LEDGER_SHAPE
    spec = ProblemSpec("quadratic", m, n, sigma=1.0, heterogeneity=1.0)
    out = {}
    for comp, opt in (("greedylore", "msgd"), ("galore", "adam")):
        cfg = RunConfig(
            n_nodes=2, steps=C.LEDGER_STEPS, period=C.LEDGER_PERIOD, rank=C.LEDGER_RANK,
            compressor=comp, optimizer=opt, lr=0.01, problem=spec, base_seed=1, metrics_every=C.LEDGER_STEPS,
        )
        res = run(cfg)
        out[comp] = (res.average_scalars_per_step(), cfg.expected_scalars_per_step())
    return out


@register("ledger_formula_exact")
def check_ledger_formula():
    out = ledger_runs()
    gl, ga = out["greedylore"][0], out["galore"][0]
    ok = gl == C.LEDGER_FORMULA_GREEDYLORE and ga == C.LEDGER_FORMULA_GALORE
    return _result(ok, f"greedylore {gl!r}, galore {ga!r}", f"greedylore {C.LEDGER_FORMULA_GREEDYLORE}, galore {C.LEDGER_FORMULA_GALORE}")


@register("ledger_schedule_exact")
def check_ledger_schedule():
    out = ledger_runs()
    ok = all(obs == exp for obs, exp in out.values())
    return _result(ok, ", ".join(f"{k} {v[0]!r}" for k, v in out.items()), ", ".join(f"{k} {v[1]!r}" for k, v in out.items()))


def _small_cfg(**kw):
    spec = ProblemSpec("quadratic", 6, 10, sigma=0.5, heterogeneity=1.0)
    base = dict(n_nodes=4, steps=60, period=7, rank=2, compressor="greedylore", lr=0.05, problem=spec,
                base_seed=3, replica_check_every=1)
    base.update(kw)
    return RunConfig(**base)


@register("replica_consistency")
def check_replicas():
    ok = True
    for comp, opt in (("greedylore", "msgd"), ("greedylore", "adam"), ("lazy_svd", "msgd"), ("galore", "adam"), ("none", "msgd")):
        try:
            run(_small_cfg(compressor=comp, optimizer=opt))
        except AssertionError:
            ok = False
    return _result(ok, f"replicas identical {ok}", "bitwise equal every step")


@register("order_independence")
def check_order():
    a = run(_small_cfg())
    b = run(_small_cfg(), worker_order=[3, 1, 4, 2])
    ok = a.trace_csv() == b.trace_csv() and a.final_x.tobytes() == b.final_x.tobytes()
    return _result(ok, f"identical {ok}", "identical")


def stalled_coordinate_result(tau: int = C.STALL_PERIOD, L: float = C.STALL_L, gamma: float = C.STALL_GAMMA):
    prob = make_problem(ProblemSpec("counterexample", 2, 2, L=L))
    p = Projector.from_columns(np.eye(2), [0])
    xs = run_fixed_projector_descent(prob, p, gamma, tau)
    x_final = xs[-1]
    g = prob.full_grad(x_final)
    return x_final, contraction_ratio(g, compress(p, g))


@register("stalled_coordinate")
def check_stalled_coordinate():
    tau = C.STALL_PERIOD
    x, ratio = stalled_coordinate_result(tau)
    exact = x[0, 0] == 2.0 ** -tau and x[1, 1] == 1.0 and x[0, 1] == 0 and x[1, 0] == 0
    expected = 0.25 / (2.0 ** (-2 * tau) + 0.25)
    ok = exact and ratio > C.STALL_MIN_RATIO and math.isclose(ratio, expected, rel_tol=1e-15)
    return _result(ok, f"x=({float(x[0, 0])!r}, {float(x[1, 1])!r}), ratio {ratio!r}", f"(2^-{tau}, 1), ratio {expected!r} > {C.STALL_MIN_RATIO}")


# ---------------------------------------------------------------- harness


@register("csv_determinism")
def check_csv():
    ok = run(_small_cfg()).trace_csv() == run(_small_cfg()).trace_csv()
    return _result(ok, f"identical {ok}", "byte-identical")


# ---------------------------------------------------------------- acceptance


@register("ac1")
def ac1():
    res = check_exact_topr()
    return _result(res.passed, res.observed, res.bound)


@register("ac2")
def ac2():
    dev, _ = fixed_projector_ef_deviation()
    return _result(dev < C.NULLIFICATION_TOL, f"max deviation {dev:.2e}", f"< {C.NULLIFICATION_TOL}")


@register("ac3")
def ac3():
    res = check_stalled_coordinate()
    return _result(res.passed, res.observed, res.bound)


@register("ac4")
def ac4():
    res = check_sketch_unbiased()
    return _result(res.passed, res.observed, res.bound)


def convergence_cfg(compressor: str, optimizer: str = "msgd", **kw) -> RunConfig:
    m, n = C.CONV_SHAPE
    spec = ProblemSpec("quadratic", m, n, L=C.CONV_L, sigma=kw.pop("sigma", C.CONV_SIGMA), heterogeneity=C.CONV_HETEROGENEITY)
    base = dict(
        n_nodes=C.CONV_NODES, steps=C.CONV_STEPS, period=C.CONV_PERIOD, rank=C.CONV_RANK,
        compressor=compressor, optimizer=optimizer, beta=C.CONV_MSGD_BETA,
        lr=C.CONV_MSGD_LR if optimizer == "msgd" else C.CONV_ADAM_LR,
        beta1=C.CONV_ADAM_BETA1, beta2=C.CONV_ADAM_BETA2, epsilon=C.CONV_ADAM_EPS,
        problem=spec, base_seed=C.CONV_SEED, replica_check_every=C.REPLICA_CHECK_EVERY,
    )
    base.update(kw)
    return RunConfig(**base)


def ac5_measurements():
    """Tail-gradient ratio against dense MSGD and the GreedyLore ledger average."""
    ref = run(convergence_cfg("none"))
    cfg = convergence_cfg("greedylore")
    gl = run(cfg)
    ratio = gl.tail_mean_grad_norm_sq(C.TAIL_FRACTION) / ref.tail_mean_grad_norm_sq(C.TAIL_FRACTION)
    m, n = C.CONV_SHAPE
    table = n * cfg.rank + m + m * n / cfg.period
    return ratio, gl.average_scalars_per_step(), table, cfg.expected_scalars_per_step()


@register("ac5")
def ac5():
    ratio, avg, table, _ = ac5_measurements()
    conv_ok = 1 / C.CONV_MAX_RATIO <= ratio <= C.CONV_MAX_RATIO
    ledger_ok = avg == table
    return _result(
        conv_ok and ledger_ok,
        f"tail grad ratio {ratio:.3f} ({'ok' if conv_ok else 'out'}), {avg!r} scalars/step ({'ok' if ledger_ok else 'mismatch'})",
        f"within {C.CONV_MAX_RATIO}x and nr + m + mn/tau = {table!r}",
    )


def speedup_values():
    vals = {}
    for nodes in C.SPEEDUP_NODES:
        cfg = convergence_cfg("greedylore", sigma=C.SPEEDUP_SIGMA, n_nodes=nodes,
                              lr=C.SPEEDUP_BASE_LR * math.sqrt(nodes), base_seed=C.SPEEDUP_SEED)
        vals[nodes] = run(cfg).tail_mean_grad_norm_sq(C.TAIL_FRACTION)
    return vals


@register("ac6")
def ac6():
    vals = speedup_values()
    seq = [vals[k] for k in C.SPEEDUP_NODES]
    mono = all(a > b for a, b in zip(seq, seq[1:]))
    ratio = seq[-1] / seq[0]
    ok = mono and ratio <= C.SPEEDUP_MAX_RATIO
    return _result(ok, ", ".join(f"N={k}: {v:.4f}" for k, v in vals.items()) + f"; ratio {ratio:.3f}",
                    f"decreasing, N=16/N=1 <= {C.SPEEDUP_MAX_RATIO}")


def adam_runs():
    out = {}
    for mode in ("practical", "amsgrad"):
        ref = run(convergence_cfg("none", "adam", adam_mode=mode))
        gl_cfg = convergence_cfg("greedylore", "adam", adam_mode=mode)
        gl = run(gl_cfg)
        out[mode] = (ref.final_loss, gl.final_loss)
    return out


@register("ac7")
def ac7():
    out = adam_runs()
    ok = all(gl <= C.CONV_MAX_RATIO * ref and ref <= C.CONV_MAX_RATIO * gl for ref, gl in out.values())
    mono = amsgrad_normalizer_monotone_in_run()
    return _result(ok and mono, "; ".join(f"{k}: {v[1]:.4f} vs {v[0]:.4f}" for k, v in out.items()) + f"; normalizer nonincreasing {mono}",
                   f"final loss within {C.CONV_MAX_RATIO}x of uncompressed Adam")


def amsgrad_normalizer_monotone_in_run() -> bool:
    cfg = convergence_cfg("greedylore", "adam", adam_mode="amsgrad", steps=500)
    sim = Simulation(cfg)
    for t in range(cfg.steps):
        sim.step(t)
    norms = sim.workers[0].optimizer.normalizers
    return len(norms) == cfg.steps and bool(np.all(np.diff(norms) <= 0))


@register("ac8")
def ac8():
    rng = np.random.default_rng(C.MEMBERSHIP_SEED)
    worst = -math.inf
    for k in C.MEMBERSHIP_KS:
        freq, se = topk_membership_frequencies(C.MEMBERSHIP_SIGMAS, k, C.MEMBERSHIP_TRIALS, rng)
        for i in range(len(freq) - 1):
            worst = max(worst, freq[i + 1] - freq[i] - C.STDERR_MULTIPLIER * math.hypot(se[i], se[i + 1]))
    return _result(worst <= 0, f"max excess {worst:.4f}", "P_{i+1} <= P_i + 3 SE")


@register("ac9")
def ac9():
    res = check_ledger_formula()
    return _result(res.passed, res.observed, res.bound)


@register("ac10")
def ac10():
    a = run(convergence_cfg("greedylore", replica_check_every=1))
    b = run(convergence_cfg("greedylore", replica_check_every=1))
    ok = a.trace_csv() == b.trace_csv()
    return _result(ok, f"identical CSVs {ok}, replicas asserted every step", "byte-identical")


def run_checks(names=None) -> list[CheckResult]:
    names = list(REGISTRY) if names is None else names
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise KeyError(f"unknown check(s): {', '.join(unknown)}")
    return [REGISTRY[n]() for n in names]
