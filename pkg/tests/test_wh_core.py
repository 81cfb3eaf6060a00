# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import itertools

import pytest

from wh_cert_lib.classes.wh_constraint import LabelWord, LossWord, WhConstraint
from wh_cert_lib.exceptions import ConstraintError, HorizonError, LossWordError
from wh_cert_lib.utils.wh_utils import (
    decompose,
    dominates_bounded,
    enumerate_words,
    expand,
    find_dominance_witness,
    satisfies,
    split_blocks,
)


def word(text: str) -> LossWord:
    return LossWord.from_string(text)


def brute_force_satisfies(bits, c: WhConstraint) -> bool:
    width = min(c.s, len(bits))
    return all(width - sum(bits[i : i + width]) <= c.max_losses for i in range(len(bits) - width + 1))


@pytest.mark.parametrize(
    "text, r, s, expected",
    [
        ("100110", 2, 4, True),
        ("11111", 2, 4, True),
        ("11111", 5, 5, True),
        ("10001", 2, 4, False),
        ("1", 1, 1, True),
        ("10", 1, 1, False),
    ],
)
def test_satisfies_counts_losses_per_window(text, r, s, expected):
    assert satisfies(word(text), WhConstraint(r, s)) is expected


def test_satisfies_agrees_with_window_enumeration():
    c = WhConstraint(3, 5)
    for n in range(1, 10):
        for bits in itertools.product((0, 1), repeat=n):
            assert satisfies(LossWord(bits), c) == brute_force_satisfies(bits, c), bits


def test_constraint_rejects_r_above_s():
    with pytest.raises(ConstraintError):
        WhConstraint(5, 4)
    with pytest.raises(ConstraintError):
        WhConstraint(0, 4)


def test_alphabet_runs_up_to_the_loss_budget():
    assert list(WhConstraint(3, 7).alphabet) == [0, 1, 2, 3, 4]
    assert str(WhConstraint(2, 4)) == "K(2,4)"


@pytest.mark.parametrize(
    "text, r, s, labels",
    [("100110", 2, 4, (2, 0, 1)), ("111", 2, 4, (0, 0, 0)), ("10100", 3, 7, (1, 2))],
)
def test_decompose_splits_into_blocks(text, r, s, labels):
    result = decompose(word(text), WhConstraint(r, s))
    assert result.labels == labels
    assert expand(result) == word(text)
    assert max(result.labels) <= WhConstraint(r, s).max_losses


def test_decompose_rejects_a_leading_loss():
    with pytest.raises(LossWordError):
        decompose(word("0110"), WhConstraint(2, 4))


def test_decompose_rejects_a_violating_word():
    with pytest.raises(LossWordError):
        decompose(word("10001"), WhConstraint(2, 4))


def test_split_blocks_does_not_check_the_constraint():
    assert split_blocks(word("10001")).labels == (3, 0)


def test_loss_word_parsing():
    assert str(word("1 0 0 1")) == "1001"
    assert word("10010")[1:3] == LossWord((0, 0))
    with pytest.raises(LossWordError):
        LossWord.from_string("10a")
    with pytest.raises(LossWordError):
        LossWord((1, 2))


def test_label_word_json():
    labels = LabelWord.of([2, 0, 1])
    assert labels.to_json() == "[2, 0, 1]"
    assert LabelWord.from_json("[2, 0, 1]") == labels
    with pytest.raises(LossWordError):
        LabelWord((1, -1))


def test_enumerate_words_yields_exactly_the_admissible_words():
    c = WhConstraint(2, 4)
    words = list(enumerate_words(c, 6))
    expected = [LossWord((1,) + bits) for bits in itertools.product((0, 1), repeat=5)]
    expected = [w for w in expected if satisfies(w, c)]
    assert words == expected
    assert list(enumerate_words(c, 0)) == []


@pytest.mark.parametrize(
    "c1, c2, expected",
    [
        (WhConstraint(3, 4), WhConstraint(2, 4), True),
        (WhConstraint(2, 4), WhConstraint(2, 4), True),
        (WhConstraint(1, 4), WhConstraint(2, 4), False),
    ],
)
def test_dominates_bounded(c1, c2, expected):
    assert dominates_bounded(c1, c2, 12) is expected


def test_dominance_witness_satisfies_only_the_weaker_constraint():
    witness = find_dominance_witness(WhConstraint(1, 4), WhConstraint(2, 4), 12)
    assert witness is not None and len(witness) == 12
    assert satisfies(witness, WhConstraint(1, 4))
    assert not satisfies(witness, WhConstraint(2, 4))


def test_dominance_horizon_guards():
    with pytest.raises(HorizonError):
        dominates_bounded(WhConstraint(2, 4), WhConstraint(2, 5), 4)
    with pytest.raises(HorizonError):
        dominates_bounded(WhConstraint(2, 4), WhConstraint(2, 4), 40)
