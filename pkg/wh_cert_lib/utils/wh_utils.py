# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""Window semantics of weakly-hard constraints on finite loss words."""

import logging
from typing import Iterator, List, Optional, Sequence, Tuple

from ..classes.wh_constraint import LabelWord, LossWord, WhConstraint
from ..exceptions import HorizonError, LossWordError

logger = logging.getLogger(__name__)

MAX_DOMINANCE_HORIZON = 24


def satisfies(word: LossWord, c: WhConstraint) -> bool:
    """
    Checks the finite-word semantics of K(r, s): no window of length <= s holds more than s - r losses.
    Windows shorter than s are part of some full window of every infinite continuation, so a word passes
    iff it is the prefix of an admissible infinite sequence.
    Args:
        word: loss word to check
        c: weakly-hard constraint

    Returns:
        bool: True iff the word is admissible
    """
    bits = word.bits
    width = min(c.s, len(bits))
    if width == 0:
        return True

    losses = width - sum(bits[:width])
    if losses > c.max_losses:
        return False
    for end in range(width, len(bits)):
        losses += (1 - bits[end]) - (1 - bits[end - width])
        if losses > c.max_losses:
            return False
    return True


def extends(tail: Sequence[int], bit: int, c: WhConstraint) -> bool:
    """Checks whether appending `bit` to an admissible word ending in `tail` keeps it admissible."""
    window = (tuple(tail) + (bit,))[-c.s :]
    return len(window) - sum(window) <= c.max_losses


def split_blocks(word: LossWord) -> LabelWord:
    """
    Splits a word starting with a success into blocks 1 0^l without checking any constraint.
    Args:
        word: loss word starting with 1

    Returns:
        LabelWord: number of losses following each success
    """
    if not word.starts_with_success:
        raise LossWordError(f"loss word {word} must start with a success")

    labels: List[int] = []
    for bit in word.bits:
        if bit == 1:
            labels.append(0)
        else:
            labels[-1] += 1
    return LabelWord(tuple(labels))


def decompose(word: LossWord, c: WhConstraint) -> LabelWord:
    """
    Decomposes an admissible loss word into WH graph labels.
    Args:
        word: loss word starting with 1 and satisfying c
        c: weakly-hard constraint

    Returns:
        LabelWord: labels l_i <= s - r, one per success
    """
    if not word.starts_with_success:
        raise LossWordError(f"loss word {word} must start with a success")
    if not satisfies(word, c):
        raise LossWordError(f"loss word {word} violates {c}")
    return split_blocks(word)


def expand(labels: LabelWord) -> LossWord:
    return labels.expand()


def enumerate_words(c: WhConstraint, length: int) -> Iterator[LossWord]:
    """
    Yields all admissible words of exactly `length` bits starting with 1, in lexicographic order.
    Args:
        c: weakly-hard constraint
        length: number of bits

    Returns:
        Iterator[LossWord]: admissible words
    """
    if length <= 0:
        return

    def _walk(prefix: Tuple[int, ...]) -> Iterator[LossWord]:
        if len(prefix) == length:
            yield LossWord(prefix)
            return
        for bit in (0, 1):
            if extends(prefix[-(c.s - 1) :] if c.s > 1 else (), bit, c):
                yield from _walk(prefix + (bit,))

    yield from _walk((1,))


def find_dominance_witness(
    c1: WhConstraint, c2: WhConstraint, horizon: int, max_horizon: int = MAX_DOMINANCE_HORIZON
) -> Optional[LossWord]:
    """
    Searches a word of `horizon` bits that satisfies c1 but violates c2.
    Appending successes never creates a violation, so words of exactly `horizon` bits cover all shorter ones.
    Args:
        c1: constraint whose words are enumerated
        c2: constraint that must hold on all of them
        horizon: word length, at least max(c1.s, c2.s)
        max_horizon: guard against exponential enumeration

    Returns:
        Optional[LossWord]: first witness in lexicographic order, None if c1 implies c2 up to the horizon
    """
    if horizon < max(c1.s, c2.s):
        raise HorizonError(f"horizon {horizon} is shorter than the windows of {c1} and {c2}")
    if horizon > max_horizon:
        raise HorizonError(f"horizon {horizon} exceeds the enumeration guard {max_horizon}")

    def _walk(prefix: Tuple[int, ...], c2_ok: bool) -> Optional[LossWord]:
        if not c2_ok:
            # fill with successes, which keeps c1 satisfied
            return LossWord(prefix + (1,) * (horizon - len(prefix)))
        if len(prefix) == horizon:
            return None
        for bit in (0, 1):
            if not extends(prefix[-(c1.s - 1) :] if c1.s > 1 else (), bit, c1):
                continue
            still_ok = extends(prefix[-(c2.s - 1) :] if c2.s > 1 else (), bit, c2)
            witness = _walk(prefix + (bit,), still_ok)
            if witness is not None:
                return witness
        return None

    witness = _walk((1,), True)
    logger.debug("dominance %s => %s up to %d: witness %s", c1, c2, horizon, witness)
    return witness


def dominates_bounded(
    c1: WhConstraint, c2: WhConstraint, horizon: int, max_horizon: int = MAX_DOMINANCE_HORIZON
) -> bool:
    """
    Bounded semi-decision of "every word satisfying c1 satisfies c2", exhaustive up to `horizon` bits.
    Not a proof for longer words.
    """
    return find_dominance_witness(c1, c2, horizon, max_horizon) is None
