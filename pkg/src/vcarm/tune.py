"""Bayesian hyperparameter optimization with a Gaussian-process surrogate.

Candidates are normalized to the unit cube; the surrogate is a
squared-exponential GP with fixed lengthscale 0.2 and observation noise
1e-6 on standardized scores, and each round maximizes Expected Improvement
over a fresh batch of 1024 random candidates. Initialization is a Latin
hypercube. Integer dimensions are rounded when the unit point is mapped to
raw values, and the rounded point is what the surrogate conditions on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from ._seeding import derive_seed
from .cohort import split_folds
from .impute import ImputedTable
from .learners import HYPERPARAM_TABLE, LearnerSpec, fit, predict_proba
from .metrics import auc

GP_LENGTHSCALE = 0.2
GP_NOISE = 1e-6
N_EI_CANDIDATES = 1024
DEFAULT_INIT_POINTS = 10
DEFAULT_ITERS = 25
DEFAULT_INNER_FOLDS = 3


class TuneError(ValueError):
    pass


@dataclass(frozen=True)
class HyperDim:
    name: str
    lower: float
    upper: float
    transform: str = "id"   # applied at fit time, not here
    integer: bool = False
    default: float = None

    def __post_init__(self):
        if not self.lower < self.upper:
            raise TuneError(f"dimension {self.name!r}: zero-volume bounds")
        if self.default is None:
            object.__setattr__(self, "default", 0.5 * (self.lower + self.upper))
        if not (self.lower <= self.default <= self.upper):
            raise TuneError(f"dimension {self.name!r}: default outside bounds")


@dataclass(frozen=True)
class HyperSpace:
    dims: Tuple[HyperDim, ...]

    def __post_init__(self):
        if not self.dims:
            raise TuneError("empty hyperparameter space")
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise TuneError("duplicate hyperparameter names")

    def to_raw(self, unit: np.ndarray) -> Dict[str, float]:
        out = {}
        for j, dim in enumerate(self.dims):
            v = dim.lower + float(unit[j]) * (dim.upper - dim.lower)
            out[dim.name] = float(round(v)) if dim.integer else v
        return out

    def to_unit(self, raw: Dict[str, float]) -> np.ndarray:
        return np.array(
            [(raw[d.name] - d.lower) / (d.upper - d.lower) for d in self.dims]
        )

    def defaults(self) -> Dict[str, float]:
        return {d.name: d.default for d in self.dims}


def default_space(algorithm: str) -> HyperSpace:
    """The tuning ranges for one learner algorithm."""
    if algorithm not in HYPERPARAM_TABLE:
        raise TuneError(f"unknown algorithm {algorithm!r}")
    dims = tuple(
        HyperDim(name=name, lower=lo, upper=hi, transform=tr,
                 integer=is_int, default=default)
        for name, (default, lo, hi, tr, is_int) in HYPERPARAM_TABLE[algorithm].items()
    )
    return HyperSpace(dims=dims)


@dataclass(frozen=True)
class TuneResult:
    best_params: Dict[str, float]
    best_value: float
    log: Tuple[Tuple[Dict[str, float], float], ...] = field(default=())


def expected_improvement(mu: np.ndarray, sigma: np.ndarray,
                         best: float) -> np.ndarray:
    """EI for maximization; zero wherever the posterior is (near) certain."""
    sigma = np.asarray(sigma, dtype=float)
    improve = mu - best
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 1e-12, improve / sigma, 0.0)
    ei = np.where(
        sigma > 1e-12,
        improve * norm.cdf(z) + sigma * norm.pdf(z),
        np.maximum(improve, 0.0),
    )
    return np.maximum(ei, 0.0)


def _latin_hypercube(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    u = (np.arange(n)[:, None] + rng.random((n, d))) / n
    for j in range(d):
        u[:, j] = u[rng.permutation(n), j]
    return u


def bayes_opt(
    space: HyperSpace,
    objective: Callable[[Dict[str, float]], float],
    init_points: int = DEFAULT_INIT_POINTS,
    iters: int = DEFAULT_ITERS,
    seed: int = 0,
) -> TuneResult:
    """Maximize the objective; exactly init_points + iters evaluations."""
    if iters < 1:
        raise TuneError("iters must be >= 1")
    if init_points < 1:
        raise TuneError("init_points must be >= 1")
    d = len(space.dims)
    rng = np.random.default_rng(derive_seed(seed, "bayes-opt"))

    def evaluate(unit_point):
        raw = space.to_raw(unit_point)
        score = float(objective(raw))
        if not np.isfinite(score):
            raise TuneError(f"objective returned non-finite score at {raw}")
        return raw, score, space.to_unit(raw)

    log: List[Tuple[Dict[str, float], float]] = []
    U = np.empty((0, d))
    y: List[float] = []
    for unit in _latin_hypercube(init_points, d, rng):
        raw, score, u_eff = evaluate(unit)
        log.append((raw, score))
        U = np.vstack([U, u_eff])
        y.append(score)

    for _ in range(iters):
        ys = np.array(y)
        sd = ys.std()
        ys_std = (ys - ys.mean()) / (sd if sd > 1e-12 else 1.0)
        sq = np.sum((U[:, None, :] - U[None, :, :]) ** 2, axis=-1)
        K = np.exp(-sq / (2 * GP_LENGTHSCALE**2)) + GP_NOISE * np.eye(len(ys))
        chol = cho_factor(K, lower=True)
        alpha = cho_solve(chol, ys_std)

        cand = rng.random((N_EI_CANDIDATES, d))
        sq_c = np.sum((cand[:, None, :] - U[None, :, :]) ** 2, axis=-1)
        Ks = np.exp(-sq_c / (2 * GP_LENGTHSCALE**2))
        mu = Ks @ alpha
        v = cho_solve(chol, Ks.T)
        var = np.clip(1.0 + GP_NOISE - np.sum(Ks.T * v, axis=0), 0.0, None)
        ei = expected_improvement(mu, np.sqrt(var), ys_std.max())
        pick = int(np.argmax(ei))

        raw, score, u_eff = evaluate(cand[pick])
        log.append((raw, score))
        U = np.vstack([U, u_eff])
        y.append(score)

    best_idx = int(np.argmax([s for _, s in log]))
    return TuneResult(
        best_params=dict(log[best_idx][0]),
        best_value=log[best_idx][1],
        log=tuple((dict(p), s) for p, s in log),
    )


def inner_cv_objective(
    spec_template: LearnerSpec,
    train: ImputedTable,
    target: str,
    k_inner: int = DEFAULT_INNER_FOLDS,
    seed: int = 0,
) -> Callable[[Dict[str, float]], float]:
    """Mean held-out AUC over stratified inner folds of the training table.

    The returned callable sees only `train`; outer test folds are out of
    reach by construction. Scores are memoized per candidate so repeated
    proposals cost nothing.
    """
    if k_inner < 2:
        raise TuneError("k_inner must be >= 2")
    schema = train.schema
    y = train.values[:, schema.index_of(target)].astype(int)
    minority = min(np.sum(y == 0), np.sum(y == 1))
    if minority < k_inner:
        raise TuneError(
            f"cannot stratify {k_inner} inner folds: minority class has {minority} rows"
        )
    plan = split_folds(train.cohort, k_inner, seed=derive_seed(seed, "inner-folds"),
                       stratify_on=target)
    cache: Dict[tuple, float] = {}

    def objective(candidate: Dict[str, float]) -> float:
        key = tuple(sorted(candidate.items()))
        if key in cache:
            return cache[key]
        merged = dict(spec_template.hyperparams)
        merged.update(candidate)
        spec = LearnerSpec(algorithm=spec_template.algorithm, hyperparams=merged)
        scores = []
        for f in range(k_inner):
            sub_train = ImputedTable(cohort=train.cohort.select_rows(plan.train_rows(f)))
            sub_test = ImputedTable(cohort=train.cohort.select_rows(plan.test_rows(f)))
            model = fit(spec, sub_train, target,
                        seed=derive_seed(seed, "inner-fit", f, key))
            probs = predict_proba(model, sub_test)
            labels = sub_test.values[:, schema.index_of(target)].astype(int)
            scores.append(auc(probs, labels))
        result = float(np.mean(scores))
        cache[key] = result
        return result

    return objective
