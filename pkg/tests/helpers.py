"""Small builders shared by the test modules."""
from affinity_sim.model import LocalityStructure, SystemState, Task

THREE_SERVER = ((1.0, 1.0, 1.0), (0.5, 0.5, 1.0), (0.25, 0.5, 1.0))
THREE_P = (0.4, 0.2, 0.4)


def subqueue_state(L: LocalityStructure, lengths) -> SystemState:
    """State with ``lengths[m][n]`` dummy tasks in each sub-queue."""
    s = SystemState.empty(L)
    k = 0
    for m, row in enumerate(lengths):
        for n, c in enumerate(row):
            for _ in range(c):
                s.sub_queues[m][n].append(Task(k, 0, 1))
                k += 1
    return s


def central_state(L: LocalityStructure, lengths) -> SystemState:
    s = SystemState.empty(L)
    k = 0
    for i, c in enumerate(lengths):
        for _ in range(c):
            s.central_queues[i].append(Task(k, i, 1))
            k += 1
    return s


# brute-force decision oracles with the documented tie rules

def oracle_route(lengths, alphas, levels_i):
    """argmin_m W_m / mu_im, then largest mu_im, then smallest m (exact arithmetic)."""
    from fractions import Fraction
    keys = []
    for m, (qs, al) in enumerate(zip(lengths, alphas)):
        W = sum((Fraction(q) / Fraction(a) for q, a in zip(qs, al)), Fraction(0))
        mu = Fraction(al[levels_i[m]])
        keys.append((W / mu, -mu, m))
    return min(keys)[2]


def oracle_priority(lengths_m):
    nonempty = [n for n, q in enumerate(lengths_m) if q]
    return nonempty[0] if nonempty else None


def oracle_max_weight(Q, mu_col):
    cands = [(mu * q, -i) for i, (q, mu) in enumerate(zip(Q, mu_col)) if q > 0]
    return -max(cands)[1] if cands else None


def oracle_cmu(Q, mu_col, e):
    cands = [(mu * e * q ** (e - 1), -i) for i, (q, mu) in enumerate(zip(Q, mu_col)) if q > 0]
    return -max(cands)[1] if cands else None


def random_instance(rng, max_dim=5, dyadic=True):
    """(B, L, sub-queue lengths, central lengths, per-(m, n) estimates)."""
    import numpy as np

    from affinity_sim.model import RateMatrix, build_locality_structure

    N = int(rng.integers(1, max_dim + 1))
    M = int(rng.integers(1, max_dim + 1))
    if dyadic:
        pool = np.array([1.0, 0.5, 0.25, 0.125, 0.0625])
        B = RateMatrix(rng.choice(pool, size=(N, M)))
    else:
        B = RateMatrix(rng.uniform(0.05, 1.0, size=(N, M)))
    L = build_locality_structure(B)
    sub = [[int(rng.integers(0, 5)) * int(rng.random() < 0.7) for _ in range(L.n_levels(m))]
           for m in range(M)]
    central = [int(rng.integers(0, 6)) * int(rng.random() < 0.7) for _ in range(N)]
    if dyadic:
        est = [[float(rng.choice(pool)) for _ in range(L.n_levels(m))] for m in range(M)]
    else:
        est = [[float(rng.uniform(0.05, 1.0)) for _ in range(L.n_levels(m))] for m in range(M)]
    return B, L, sub, central, est
