"""Regret accounting, information gain and the gamma-bar sandwich checks."""

from dataclasses import asdict, dataclass, field
from itertools import combinations, combinations_with_replacement, product
import csv
import io
import math

import numpy as np

from ._validation import as_contexts
from .exceptions import InputError, InstanceTooLargeError
from .gp import cholesky_jitter

TRACE_COLUMNS = (
    "round", "m_t", "selected_ids", "reward_realized", "reward_expected",
    "opt_expected", "benchmark_expected", "cum_regret", "beta", "wall_ms",
)
ABSENT = "NA"

MAX_PRODUCT = 1_000_000
MAX_KT = 12
MAX_MULTISETS = 1_000_000
BOUND_SLACK = 1e-9


@dataclass
class RunTrace:
    """Per-round records of one run plus a small header."""

    rows: list
    alpha: float = 1.0
    seed: int | None = None
    config_hash: str = ""
    algorithm: str = ""

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self, timing=False):
        """Headered CSV text. Without ``timing`` the wall_ms column is ``NA``
        so that reruns are byte-identical."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([
                r.round, r.m_t, ";".join(str(i) for i in r.selected_ids),
                repr(float(r.reward_realized)), repr(float(r.reward_expected)),
                repr(float(r.opt_expected)), repr(float(r.benchmark_expected)),
                repr(float(r.cum_regret)), repr(float(r.beta)),
                repr(round(float(r.wall_ms), 3)) if timing else ABSENT,
            ])
        return buf.getvalue()


def read_trace_csv(path):
    """Load a trace file into a dict of column arrays (``selected_ids`` as tuples)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise InputError(f"{path}: unexpected columns {reader.fieldnames}")
        rows = list(reader)
    out = {}
    for col in TRACE_COLUMNS:
        vals = [r[col] for r in rows]
        if col == "selected_ids":
            out[col] = [tuple(int(v) for v in s.split(";") if v) for s in vals]
        elif col in ("round", "m_t"):
            out[col] = np.array(vals, dtype=np.int64)
        else:
            out[col] = np.array([np.nan if v == ABSENT else float(v) for v in vals])
    return out


def alpha_regret(trace, alpha):
    """Cumulative ``alpha * opt(f_t) - u(f(x_{t,S_t}))``.

    ``trace`` is a :class:`RunTrace` or a pair ``(opt, achieved)`` of arrays.
    """
    if isinstance(trace, RunTrace):
        opt, achieved = trace.column("opt_expected"), trace.column("reward_expected")
    else:
        opt, achieved = (np.asarray(a, dtype=float) for a in trace)
    if opt.shape != achieved.shape:
        raise InputError("opt and achieved lengths differ")
    return np.cumsum(alpha * opt - achieved)


def info_gain(contexts, kernel, noise_variance):
    """``0.5 * log det(I + K / noise)`` from the Cholesky log-diagonal."""
    X = as_contexts(contexts, allow_empty=False)
    A = np.eye(X.shape[0]) + kernel(X) / noise_variance
    L = cholesky_jitter(0.5 * (A + A.T))
    return float(np.sum(np.log(np.diag(L))))


def _batched_gain(G, index_sets, noise_variance, chunk=20_000):
    """Max information gain over rows of ``index_sets`` (each a tuple of
    ground-set indices), using the precomputed ground Gram matrix ``G``."""
    idx = np.asarray(index_sets, dtype=np.int64)
    n = idx.shape[1]
    eye = np.eye(n)
    best, best_at = -np.inf, None
    for lo in range(0, idx.shape[0], chunk):
        part = idx[lo:lo + chunk]
        A = eye + G[part[:, :, None], part[:, None, :]] / noise_variance
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            L = np.stack([cholesky_jitter(a) for a in A])
        gains = np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
        j = int(np.argmax(gains))
        if gains[j] > best:
            best, best_at = float(gains[j]), part[j]
    return best, best_at


@dataclass
class InfoGainReport:
    gamma_bar_T: float
    gamma_T: float
    gamma_KT: float | None
    K: int
    T: int
    noise_variance: float
    non_volatile: bool
    upper_bound_holds: bool
    lower_bound_holds: bool | None
    ground_set: list = field(default_factory=list)
    argmax_sequence: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def non_volatile_sets(X, K, T):
    """Every round offers all K-subsets of the same contexts ``X``."""
    X = as_contexts(X, allow_empty=False)
    if K > X.shape[0]:
        raise InputError(f"K={K} exceeds {X.shape[0]} contexts")
    Z = [X[list(c)] for c in combinations(range(X.shape[0]), K)]
    return [Z for _ in range(T)]


def volatile_sets(rounds, K):
    """All K-subsets of each round's own contexts."""
    out = []
    for X in rounds:
        X = as_contexts(X, allow_empty=False)
        if K > X.shape[0]:
            raise InputError(f"K={K} exceeds {X.shape[0]} contexts in a round")
        out.append([X[list(c)] for c in combinations(range(X.shape[0]), K)])
    return out


def _canonical(Z):
    return sorted(np.asarray(z, dtype=float).tobytes() for z in Z)


def gamma_diagnostics(available_sets, kernel, noise_variance, K, T, non_volatile=None):
    """Exhaustive gamma-bar_T, gamma_T and gamma_KT on a desk-scale instance.

    ``available_sets[t]`` lists the feasible context tuples of round t, each
    an array of shape (|S|, D). gamma_T and gamma_KT maximize over multisets
    of the ground set (all contexts that appear). The report records whether
    ``gamma_bar_T <= K * gamma_T`` and, for non-volatile instances,
    ``gamma_KT / K <= gamma_bar_T``.
    """
    if len(available_sets) != T:
        raise InputError(f"got {len(available_sets)} rounds, expected T={T}")
    if T < 1 or K < 1:
        raise InputError("K and T must be positive")
    tuples = [[as_contexts(z, allow_empty=False) for z in Z] for Z in available_sets]
    if any(len(Z) == 0 for Z in tuples):
        raise InputError("every round needs at least one feasible tuple")
    if any(z.shape[0] > K for Z in tuples for z in Z):
        raise InputError(f"a feasible tuple exceeds K={K}")
    n_product = math.prod(len(Z) for Z in tuples)
    if n_product > MAX_PRODUCT:
        raise InstanceTooLargeError(
            f"{n_product} super-arm sequences exceed the desk-scale limit {MAX_PRODUCT}"
        )
    all_rows = np.vstack([z for Z in tuples for z in Z])
    ground, inverse = np.unique(all_rows, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    G = kernel(ground)
    G = 0.5 * (G + G.T)

    # ground-set indices for every tuple, round by round
    pos, index_tuples = 0, []
    for Z in tuples:
        rnd = []
        for z in Z:
            rnd.append(tuple(int(i) for i in inverse[pos:pos + z.shape[0]]))
            pos += z.shape[0]
        index_tuples.append(rnd)

    if non_volatile is None:
        first = _canonical(tuples[0])
        non_volatile = all(_canonical(Z) == first for Z in tuples[1:])

    gamma_bar, seq = _gamma_bar(G, index_tuples, noise_variance)
    gamma_T = _gamma_classical(G, T, noise_variance)
    gamma_KT = None
    if K * T <= MAX_KT and math.comb(ground.shape[0] + K * T - 1, K * T) <= MAX_MULTISETS:
        gamma_KT = _gamma_classical(G, K * T, noise_variance)
    elif non_volatile:
        raise InstanceTooLargeError(f"KT={K * T} too large for exhaustive gamma_KT")

    upper = gamma_bar <= K * gamma_T + BOUND_SLACK
    lower = None
    if non_volatile and gamma_KT is not None:
        lower = gamma_KT / K <= gamma_bar + BOUND_SLACK
    return InfoGainReport(
        gamma_bar_T=gamma_bar, gamma_T=gamma_T, gamma_KT=gamma_KT, K=K, T=T,
        noise_variance=float(noise_variance), non_volatile=bool(non_volatile),
        upper_bound_holds=bool(upper), lower_bound_holds=lower,
        ground_set=ground.tolist(), argmax_sequence=[list(map(int, s)) for s in seq],
    )


def _gamma_bar(G, index_tuples, noise_variance):
    # sequences grouped by total length so each batch is a dense array
    by_len = {}
    for choice in product(*[range(len(r)) for r in index_tuples]):
        picked = [index_tuples[t][c] for t, c in enumerate(choice)]
        flat = tuple(i for z in picked for i in z)
        by_len.setdefault(len(flat), []).append((flat, picked))
    best, best_seq = -np.inf, None
    for items in by_len.values():
        val, at = _batched_gain(G, [f for f, _ in items], noise_variance)
        if val > best:
            best = val
            best_seq = next(p for f, p in items if np.array_equal(f, at))
    return best, best_seq


def _gamma_classical(G, n, noise_variance):
    count = math.comb(G.shape[0] + n - 1, n)
    if count > MAX_MULTISETS:
        raise InstanceTooLargeError(f"{count} multisets exceed {MAX_MULTISETS}")
    sets = list(combinations_with_replacement(range(G.shape[0]), n))
    return _batched_gain(G, sets, noise_variance)[0]
