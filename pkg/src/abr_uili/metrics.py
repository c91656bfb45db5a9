"""Post-run analysis over ACR/queue traces and burst records."""

from __future__ import annotations

import bisect
from statistics import fmean
from typing import Iterable, Optional


def acr_series(acr_trace: Iterable[tuple], vc: str) -> list[tuple[int, float]]:
    return [(row[0], row[2]) for row in acr_trace if row[1] == vc]


def acr_at(series: list[tuple[int, float]], t: int) -> float:
    """ACR in force at time ``t`` (last record at or before ``t``)."""
    times = [s[0] for s in series]
    i = bisect.bisect_right(times, t) - 1
    if i < 0:
        raise ValueError(f"no ACR record at or before t={t}")
    return series[i][1]


def time_weighted_mean(series: list[tuple[int, float]], t_end: int) -> float:
    if not series:
        return 0.0
    total = 0.0
    t0 = series[0][0]
    if t_end <= t0:
        return series[-1][1]
    for (t, acr), nxt in zip(series, series[1:] + [(t_end, None)]):
        t_next = min(nxt[0], t_end)
        if t_next > t:
            total += acr * (t_next - t)
    return total / (t_end - t0)


def min_acr_over(series: list[tuple[int, float]], t0: int, t1: int) -> float:
    """Smallest ACR in force anywhere in [t0, t1]."""
    lo = acr_at(series, t0)
    for t, acr in series:
        if t0 < t <= t1:
            lo = min(lo, acr)
    return lo


def frm_rows(acr_trace: Iterable[tuple], vc: str) -> list[tuple]:
    return [row for row in acr_trace if row[1] == vc and row[5].startswith("frm")]


def uili_triggers(acr_trace: Iterable[tuple], vc: str, t0: int = 0,
                  t1: Optional[int] = None) -> int:
    return sum(1 for row in acr_trace
               if row[1] == vc and row[5] == "frm_uili" and row[0] >= t0
               and (t1 is None or row[0] <= t1))


def increases(acr_trace: list[tuple], vc: str, t0: int, t1: int) -> int:
    """Number of ACR increases for ``vc`` with timestamps in (t0, t1]."""
    count = 0
    prev = None
    for row in acr_trace:
        if row[1] != vc:
            continue
        if prev is not None and t0 < row[0] <= t1 and row[2] > prev:
            count += 1
        prev = row[2]
    return count


def max_queue(queue_trace: Iterable[tuple], port: str, t0: int = 0,
              t1: Optional[int] = None) -> int:
    vals = [row[3] for row in queue_trace
            if row[2] == port and row[0] >= t0 and (t1 is None or row[0] <= t1)]
    return max(vals, default=0)


def time_to_goal(series: list[tuple[int, float]], goal: float, tol: float,
                 t_from: int = 0) -> Optional[int]:
    """Time from ACR first exceeding ``goal`` to first settling at or under ``goal + tol``.

    Returns None when ACR never exceeds the goal or never comes back.
    """
    above_at = None
    for t, acr in series:
        if t < t_from:
            continue
        if above_at is None:
            if acr > goal + tol:
                above_at = t
        elif acr <= goal + tol:
            return t - above_at
    return None


def burst_stats(records: list) -> dict:
    if not records:
        return {"count": 0, "mean_throughput_bps": 0.0, "mean_response_ns": 0.0}
    return {
        "count": len(records),
        "mean_throughput_bps": fmean(r.effective_throughput for r in records),
        "mean_response_ns": fmean(r.response_time for r in records),
    }
