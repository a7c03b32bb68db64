from __future__ import annotations

def locate_bucket(cumulative: list[int], index: int) -> int:
    """
    Find which bucket a flat index falls into, given running totals of bucket sizes.
    `cumulative[k]` is the total size of buckets 0..k, so bucket k holds the flat
    indices cumulative[k-1] .. cumulative[k]-1.

    Used to turn a uniformly drawn transition number into (episode, step).

    :return: The smallest k with cumulative[k] > index.
    :raises IndexError: if index lies outside [0, cumulative[-1]).

    :complexity:
    Best Case Complexity: O(1), when the middle bucket holds the index.
    Worst Case Complexity: O(log(N)), where N is the length of cumulative.
    """
    if not cumulative or not 0 <= index < cumulative[-1]:
        raise IndexError(f"flat index {index} out of range")
    return _locate_bucket_aux(cumulative, index, 0, len(cumulative) - 1)

def _locate_bucket_aux(cumulative: list[int], index: int, lo: int, hi: int) -> int:
    """
    Auxilliary method used by locate_bucket.
    lo: smallest bucket the index could be in.
    hi: largest bucket the index could be in.
    """
    if lo == hi:
        return lo
    mid = (hi + lo) // 2
    if cumulative[mid] > index:
        # Index is in mid or before it
        return _locate_bucket_aux(cumulative, index, lo, mid)
    # Index is after mid
    return _locate_bucket_aux(cumulative, index, mid + 1, hi)
