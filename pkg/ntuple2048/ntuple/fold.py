import numpy as np

from ntuple2048.core.log import SpdLog
from ntuple2048.ntuple.network import NTupleNetwork
from ntuple2048.ntuple.shape import find_container


def _log():
    return SpdLog.get_logger("Fold", level="INFO", flush=True)


def _digit_map(parent_n: int, positions) -> np.ndarray:
    """Redundant-table index read by every parent-table index."""
    idx = np.arange(16**parent_n, dtype=np.int64)
    out = np.zeros_like(idx)
    for j, q in enumerate(positions):
        out |= ((idx >> (4 * q)) & 0xF) << (4 * j)
    return out


def fold_redundant(network: NTupleNetwork) -> NTupleNetwork:
    """
    Add every redundant table into the retained table that contains it.

    Summing over all eight views, a redundant tuple read through view ``g``
    equals the containing tuple read through view ``g * k^-1`` restricted to
    the image cells, so each parent entry absorbs the redundant entry its
    digits select. A network without redundant tuples is returned as is.
    """
    if not network.has_redundant:
        return network

    retained = [i for i, s in enumerate(network.shapes) if not s.redundant]
    retained_shapes = [network.shapes[i] for i in retained]
    # raises ConfigurationError before anything is allocated
    plan = [
        (r, find_container(shape, retained_shapes))
        for r, shape in enumerate(network.shapes)
        if shape.redundant
    ]

    folded = NTupleNetwork(
        retained_shapes,
        stage_bits=network.stage_bits,
        dtype=network.dtype,
        name=network.name,
    )
    for new_i, old_i in enumerate(retained):
        folded.table(new_i)[:] = network.table(old_i)

    for r, (pos, _, positions) in plan:
        parent = folded.table(pos)
        source = network.table(r)
        digits = _digit_map(retained_shapes[pos].n, positions)
        for stage in range(network.stages):
            parent[stage] += source[stage][digits]
        _log().debug(
            f"folded tuple {r} ({network.shapes[r].name}) into tuple {retained[pos]}"
        )

    _log().info(
        f"folded {len(plan)} redundant tuples: {network.m} -> {folded.m} tuples"
    )
    return folded
