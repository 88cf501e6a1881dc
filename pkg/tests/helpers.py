from flowmech import Scenario, TypeSpace

MU = 5.0
TYPES = (0.1, 1.0)


def scenario(n, types=TYPES, probs=None, mu=MU):
    ts = TypeSpace.uniform(types) if probs is None else TypeSpace(tuple(types), tuple(probs))
    return Scenario(n, ts, mu)


def rule_fn(rule, sc):
    """Wrap an ActionRule as a function of a type-value vector."""
    def fn(t):
        return list(rule([sc.type_space.index(x) for x in t]))
    return fn
