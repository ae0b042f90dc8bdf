import numpy as np
import pytest

from ntuple2048.error import ConfigurationError
from ntuple2048.ntuple import NTupleNetwork, TupleShape, fold_redundant
from ntuple2048.search.player import choose_move
from ntuple2048.config import SearchLimit


def positive_weights(network: NTupleNetwork, rng: np.random.Generator) -> NTupleNetwork:
    network.weights[:] = rng.random(network.weights.shape)
    return network


def test_network_without_redundant_tuples_is_unchanged(small_network):
    network = small_network()
    assert fold_redundant(network) is network


def test_fold_preserves_evaluation(rng, random_positions):
    network = NTupleNetwork.from_architecture("4-22-3", stage_bits=1, dtype="float64")
    positive_weights(network, rng)
    folded = fold_redundant(network)

    assert folded.m == network.m - 2
    assert not folded.has_redundant
    assert folded.parameter_count < network.parameter_count
    for board in random_positions(rng, 2_000, moves=150):
        assert folded.evaluate(board) == pytest.approx(network.evaluate(board), rel=1e-9)


def test_folded_player_chooses_same_moves(rng, random_positions):
    network = positive_weights(NTupleNetwork.from_architecture("4-22-3"), rng)
    folded = fold_redundant(network)
    limit = SearchLimit.plies(1)
    for board in random_positions(rng, 300):
        assert choose_move(board, folded, limit) == choose_move(board, network, limit)


def test_fold_squares_into_six_tuple(rng, random_positions):
    retained = TupleShape("33", (0, 1, 2, 4, 5, 6))
    # a mirrored square still sits inside the rectangle after a symmetry
    redundant = TupleShape("22", (2, 3, 6, 7), redundant=True)
    network = positive_weights(
        NTupleNetwork([retained, redundant], dtype="float32"), rng
    )
    folded = fold_redundant(network)
    for board in random_positions(rng, 500, moves=100):
        assert folded.evaluate(board) == pytest.approx(network.evaluate(board), rel=1e-6)


def test_uncontained_redundant_tuple_is_rejected(row_tuple):
    network = NTupleNetwork(
        [row_tuple(0), TupleShape("22", (0, 1, 4, 5), redundant=True)]
    )
    with pytest.raises(ConfigurationError):
        fold_redundant(network)


@pytest.mark.slow
def test_fold_full_redundant_architecture(rng, random_positions):
    network = positive_weights(NTupleNetwork.from_architecture("42-33-4-22-3"), rng)
    folded = fold_redundant(network)
    assert folded.m == 5
    for board in random_positions(rng, 10_000, moves=300):
        assert folded.evaluate(board) == pytest.approx(network.evaluate(board), rel=1e-6)
