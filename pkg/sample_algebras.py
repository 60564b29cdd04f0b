import json
import logging
from pathlib import Path

import numpy as np

from algebra_loader import algebra_to_dict
from m3_geometry import M3Params, build_algebra, unimodular_algebra
from reductive_core import ReductiveAlgebra

logger = logging.getLogger(__name__)


def round_sphere_algebra():
    """so(4) = R³ + so(3): the unit round S³ as a symmetric space"""
    epsilon = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        epsilon[i, j, k], epsilon[j, i, k] = 1.0, -1.0
    return ReductiveAlgebra(3, 3, np.zeros((3, 3, 3)), epsilon, epsilon.copy(), epsilon.copy(), np.eye(3))


def random_directions(dim, count, seed=42):
    rng = np.random.default_rng(seed)
    vectors = rng.standard_normal((count, dim))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def create_sample_algebras(directory="sample_algebras"):
    """Write example algebra documents for the ``check`` command"""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    berger = build_algebra(M3Params(4.0, 1.0))
    samples = {
        "m3_berger.json": berger,
        "m3_heisenberg.json": build_algebra(M3Params(0.0, 1.0)),
        "m3_sl2.json": build_algebra(M3Params(-1.0, 1.0)),
        "m3_berger_group.json": unimodular_algebra(M3Params(4.0, 1.0)),
        "m3_berger_stretched.json": berger.with_metric(np.diag([1.0, 1.0, 2.0])),
        "abelian_r3.json": ReductiveAlgebra.abelian(3),
        "round_s3.json": round_sphere_algebra(),
    }
    directions = np.vstack([np.eye(3), random_directions(3, 5)])
    written = {}
    for name, algebra in samples.items():
        path = target / name
        path.write_text(json.dumps(algebra_to_dict(algebra, directions), indent=2))
        written[name] = path
        logger.info("sample algebra written: %s", path)
    return written


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    for name, path in create_sample_algebras().items():
        print(f"{name}: {path}")
