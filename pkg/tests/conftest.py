import random

from relmatch.relnet import Assignment, TypeRegistry, build_network


def make_registry(n_types, prefix="t"):
    return TypeRegistry([f"{prefix}{i}" for i in range(n_types)])


def random_network(rng: random.Random, n_entities, n_types, density, registry=None):
    registry = registry or make_registry(n_types)
    relations = [
        (i, j, t)
        for i in range(n_entities)
        for j in range(n_entities)
        for t in range(n_types)
        if rng.random() < density
    ]
    labels = [f"e{i}" for i in range(n_entities)]
    return build_network(labels, relations, registry)


def random_maximal_assignment(rng: random.Random, n_source, n_target):
    k = min(n_source, n_target)
    sources = rng.sample(range(n_source), k)
    targets = rng.sample(range(n_target), k)
    return Assignment(zip(sources, targets))
