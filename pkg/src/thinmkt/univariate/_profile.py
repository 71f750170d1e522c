import numpy as np

from ..core import BLOCKS_PER_DAY


def block_phase(start_block: int, n: int) -> np.ndarray:
    """0-based block-of-day index for ``n`` consecutive entries."""
    return (start_block - 1 + np.arange(n)) % BLOCKS_PER_DAY


def block_profile(values: np.ndarray, start_block: int) -> np.ndarray:
    """Zero-mean average intraday shape, indexed by block-of-day."""
    phase = block_phase(start_block, values.size)
    sums = np.bincount(phase, weights=values, minlength=BLOCKS_PER_DAY)
    counts = np.bincount(phase, minlength=BLOCKS_PER_DAY)
    prof = np.divide(sums, counts, out=np.zeros(BLOCKS_PER_DAY), where=counts > 0)
    prof[counts > 0] -= prof[counts > 0].mean()
    return prof
