"""Independent reference implementations used only by the tests.

Everything here works on explicit type vectors with plain Python loops and
shares no code with the package: no multiset tables, no kernels, no linear
systems.
"""

import itertools
import math


def power(mu, d0, d, t_i, i):
    if d[i] == 0:
        return 0.0
    return d[i] ** t_i * (mu - sum(d) - d0)


def manager(mu, d, t):
    res = mu - sum(d)
    if res <= 0 or min(d) <= 0:
        return 0.0
    return res * math.prod(x ** (ti / len(d)) for x, ti in zip(d, t))


def d_star(mu, t):
    return [ti * mu / (len(t) + sum(t)) for ti in t]


def d_ne(mu, t):
    return [ti * mu / (1 + sum(t)) for ti in t]


def vectors(types, probs, n):
    for vec in itertools.product(range(len(types)), repeat=n):
        yield [types[k] for k in vec], math.prod(probs[k] for k in vec)


def expected_manager(mu, types, probs, n, rule):
    """``rule(t)`` maps a type vector to a rate vector."""
    return sum(w * manager(mu, rule(t), t) for t, w in vectors(types, probs, n))


def best_response_iteration(mu, t, iters=20000, tol=1e-15):
    """Gauss-Seidel best-response dynamics from zero."""
    d = [0.0] * len(t)
    for _ in range(iters):
        delta = 0.0
        for i, ti in enumerate(t):
            rest = sum(d) - d[i]
            new = max(0.0, ti * (mu - rest) / (1 + ti))
            delta = max(delta, abs(new - d[i]))
            d[i] = new
        if delta < tol:
            break
    return d


def bayesian_best_response(mu, types, probs, n):
    """Symmetric Bayesian equilibrium by bisection on the mean opponent rate.

    Each type best-responds to the expected load of the other ``n - 1``
    users; the equilibrium mean ``x`` solves ``x = sum_l P_l BR_l(x)``.
    """
    def response(x):
        return [max(0.0, tau * (mu - (n - 1) * x) / (1 + tau)) for tau in types]

    lo, hi = 0.0, mu
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sum(p * r for p, r in zip(probs, response(mid))) > mid:
            lo = mid
        else:
            hi = mid
    return response(0.5 * (lo + hi))


def misreport_value(mu, types, probs, n, rule, s, l):
    """User 0 of true type ``types[s]`` reports ``types[l]`` and obeys ``rule``."""
    total = 0.0
    for others, w in vectors(types, probs, n - 1):
        reported = [types[l]] + others
        d = rule(reported)
        total += w * power(mu, 0.0, d, types[s], 0)
    return total


def affine(c, target, d0_max, d):
    return min(max(sum(ci * (x - y) for ci, x, y in zip(c, d, target)), 0.0), d0_max)


def scan_deviation(mu, c, target, d0_max, t, i, points):
    """Best unilateral deviation of user i on an even grid over [0, mu]."""
    base = power(mu, affine(c, target, d0_max, target), target, t[i], i)
    best = -math.inf
    for k in range(points + 1):
        d = list(target)
        d[i] = mu * k / points
        best = max(best, power(mu, affine(c, target, d0_max, d), d, t[i], i))
    return best - base


def prop5_term(n, lo, hi, others_sum):
    a = n + others_sum
    return ((a + hi) / (a + lo)) ** (lo + 1) * (lo / hi) ** lo


def golden_section(f, a, b, tol=1e-13):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    while b - a > tol:
        if f(c) < f(d):
            b, d = d, c
            c = b - g * (b - a)
        else:
            a, c = c, d
            d = a + g * (b - a)
    return (a + b) / 2
