# =============================================================================
# Stakhanov Utils
# =============================================================================
#
# Miscellaneous utility functions.
#
from typing import Callable, Iterable, List, TypeVar, Union

import json
import hashlib
import numpy as np
from quenouille import imap

T = TypeVar("T")
R = TypeVar("R")


def stable_int(value: Union[str, int]) -> int:
    """
    Returns a 64 bits integer derived from the given value that, unlike
    python's `hash`, does not change from one process to another.
    """
    if isinstance(value, int):
        return value

    digest = hashlib.sha256(value.encode("utf-8")).digest()

    return int.from_bytes(digest[:8], "big")


def rng_stream(seed: int, *keys: Union[str, int]) -> np.random.Generator:
    """
    Returns an independent random generator keyed by the global seed and
    any number of additional keys (author ids, period indices...), so that
    draws never depend on scheduling.
    """
    entropy = [seed] + [stable_int(k) for k in keys]

    return np.random.default_rng(np.random.SeedSequence(entropy))


def parallel_map(
    fn: Callable[[T], R], items: Iterable[T], threads: int = 1
) -> List[R]:
    # NOTE: quenouille.imap yields in input order, which keeps results
    # independent of the number of threads.
    if threads < 2:
        return [fn(item) for item in items]

    return list(imap(items, fn, threads))


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def sha256_hexdigest(string: str, length: int = 16) -> str:
    return hashlib.sha256(string.encode("utf-8")).hexdigest()[:length]


def format_threshold(threshold: float) -> str:
    return "top%s" % ("%g" % threshold)
