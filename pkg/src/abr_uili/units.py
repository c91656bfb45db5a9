"""Unit conversions shared by every module.

Rates are carried internally in cells/s, times in integer nanoseconds.
"""

CELL_BITS = 424  # 53-byte ATM cell
NS_PER_S = 1_000_000_000
NS_PER_MS = 1_000_000
NS_PER_US = 1_000

# signal propagation in fibre, ns per km
PROP_NS_PER_KM = 5_000


def mbps_to_cps(mbps: float) -> float:
    return mbps * 1e6 / CELL_BITS


def cps_to_mbps(cps: float) -> float:
    return cps * CELL_BITS / 1e6


def ms(value: float) -> int:
    """Milliseconds to integer nanoseconds."""
    return int(round(value * NS_PER_MS))


def us(value: float) -> int:
    return int(round(value * NS_PER_US))


def ns_to_s(ns: int) -> float:
    return ns / NS_PER_S


def cell_gap_ns(rate_cps: float) -> int:
    """Inter-cell spacing at ``rate_cps``, rounded to the nearest nanosecond."""
    if rate_cps <= 0:
        raise ValueError(f"rate must be positive, got {rate_cps}")
    return max(1, int(round(NS_PER_S / rate_cps)))
