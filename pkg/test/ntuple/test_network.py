import itertools

import numpy as np
import pytest

from ntuple2048.error import ConfigurationError
from ntuple2048.ntuple import (
    NTupleNetwork,
    TupleShape,
    parameter_count,
    stage_of,
    symmetric_views,
    tuple_index,
)
from ntuple2048.ntuple.symmetry import SYMMETRIES, apply_view, inverse
from ntuple2048.schema import Board


def test_parameter_counts_match_published_sizes():
    assert parameter_count("42-33") == 67_108_864
    assert parameter_count("421-43") == 1_342_177_280
    assert parameter_count("42-33", 4) == 1_073_741_824
    assert parameter_count("42-33-5") == 5 * 16**6


def test_unknown_architecture():
    with pytest.raises(ConfigurationError):
        parameter_count("7-7")


def test_tuple_index_examples(row_tuple):
    assert tuple_index(Board(), row_tuple(0)) == 0
    board = Board.from_cells([0, 1, 0, 3] + [0] * 12)
    assert tuple_index(board, row_tuple(0)) == 12_304


@pytest.mark.parametrize(
    "shape",
    [
        TupleShape("3", (0, 1, 2)),
        TupleShape("4", (4, 5, 6, 7)),
        TupleShape("22", (0, 1, 4, 5)),
    ],
)
def test_tuple_index_is_bijective(shape):
    seen = set()
    for values in itertools.product(range(16), repeat=shape.n):
        cells = [0] * 16
        for loc, v in zip(shape.locations, values):
            cells[loc] = v
        seen.add(tuple_index(Board.from_cells(cells), shape))
    assert seen == set(range(16**shape.n))


def test_shape_geometry_is_validated():
    with pytest.raises(ConfigurationError):
        TupleShape("4", (0, 1, 2, 4))
    with pytest.raises(ConfigurationError):
        TupleShape("22", (0, 1, 1, 5))
    assert TupleShape.from_cells((3, 7, 11, 15)).name == "4"
    assert TupleShape.from_cells((0, 1, 4, 5)).name == "22"


def test_symmetric_views(positions):
    assert symmetric_views(Board()) == [Board()] * 8
    board = positions[0]
    views = symmetric_views(board)
    assert views[0] == board
    closure = {v.packed for view in views for v in symmetric_views(view)}
    assert closure == {v.packed for v in views}
    for k in range(8):
        assert apply_view(apply_view(board, k), inverse(k)) == board
    assert len({tuple(p) for p in SYMMETRIES}) == 8


def test_stage_of():
    only_4096 = Board().with_cell(3, 12)
    assert stage_of(only_4096, 4) == 1
    both = only_4096.with_cell(7, 13)
    assert stage_of(both, 4) == 3
    assert stage_of(Board().with_cell(0, 14), 4) == 4
    assert stage_of(both, 0) == 0
    assert stage_of(both, 1) == 0
    with pytest.raises(ConfigurationError):
        stage_of(both, 5)


def test_zero_network_evaluates_to_zero(small_network, positions):
    network = small_network()
    assert all(network.evaluate(b) == 0.0 for b in positions)


def test_single_weight_hand_trace(row_tuple):
    network = NTupleNetwork([row_tuple(0)], dtype="float64")
    # distinct exponents everywhere: each of the 8 views reads its own slot
    board = Board.from_cells(list(range(16)))
    refs = network.weight_refs(board)
    assert len({x for _, _, x in refs}) == 8
    network.table(0)[0, tuple_index(board, row_tuple(0))] = 2.5
    assert network.evaluate(board) == 2.5


def test_weight_refs(small_network, positions, rng):
    network = small_network().randomize(rng)
    for board in positions[:10]:
        refs = network.weight_refs(board)
        assert len(refs) == 8 * network.m
        total = sum(network.table(i)[s, x] for i, s, x in refs)
        assert total == pytest.approx(network.evaluate(board), rel=1e-12)

    empty_refs = NTupleNetwork([TupleShape("4", (0, 1, 2, 3))]).weight_refs(Board())
    assert empty_refs == [(0, 0, 0)] * 8


def assert_symmetry_invariant(network, boards):
    for board in boards:
        value = network.evaluate(board)
        for view in symmetric_views(board):
            assert network.evaluate(view) == value


@pytest.mark.parametrize("stage_bits", [0, 2])
def test_evaluate_is_symmetry_invariant(small_network, random_positions, rng, stage_bits):
    network = small_network(dtype="float32", stage_bits=stage_bits).randomize(rng)
    assert_symmetry_invariant(network, random_positions(rng, 200, moves=200))


@pytest.mark.slow
def test_evaluate_is_symmetry_invariant_on_many_positions(random_positions, rng):
    network = NTupleNetwork.from_architecture("4-22-3", stage_bits=2, dtype="float32").randomize(rng)
    assert_symmetry_invariant(network, random_positions(rng, 10_000, moves=400))


def test_promote_weight(row_tuple):
    network = NTupleNetwork([row_tuple(0)], stage_bits=1, dtype="float64")
    tables = network.table(0)
    tables[0, 5] = 3.5
    network.promote_weight(0, 1, 5)
    assert tables[1, 5] == 3.5

    tables[0, 6] = 3.5
    tables[1, 6] = 0.7
    network.promote_weight(0, 1, 6)
    assert tables[1, 6] == 0.7

    tables[0, 7] = 1.0
    network.promote_weight(0, 0, 7)
    assert tables[0, 7] == 1.0


def test_promote_on_board(row_tuple):
    network = NTupleNetwork([row_tuple(0)], stage_bits=1, dtype="float64")
    board = Board.from_cells([1, 2, 3, 15] + [0] * 12)
    assert network.stage_of(board) == 1
    network.table(0)[0, :] = 1.25
    network.promote(board)
    for i, stage, x in network.weight_refs(board):
        assert stage == 1
        assert network.table(i)[1, x] == 1.25
    assert network.evaluate(board) == 8 * 1.25


def test_weight_array_shape_is_checked(row_tuple):
    with pytest.raises(ConfigurationError):
        NTupleNetwork([row_tuple(0)], weights=np.zeros(10))


def test_from_architecture_small():
    network = NTupleNetwork.from_architecture("4-22", stage_bits=1)
    assert network.m == 5
    assert network.stages == 2
    assert network.view_count == 40
    assert network.parameter_count == 2 * 5 * 16**4
    assert not network.has_redundant
    assert NTupleNetwork.from_architecture("4-22-3").has_redundant
