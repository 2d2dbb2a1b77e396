"""Round-robin resource-block scheduling, per TTI and in closed form.

Each TTI a base station serves the first ``ues_per_tti`` UEs in its queue,
splits its RB budget evenly between them (remainder RBs one each to the
earliest served) and moves them to the queue tail in order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class BaseStationState:
    id: int
    position: tuple[float, float]
    rb_budget: int
    rr_queue: list[int] = field(default_factory=list)

    @property
    def attached(self) -> set[int]:
        return set(self.rr_queue)

    @property
    def load(self) -> int:
        return len(self.rr_queue)

    def attach(self, ue: int):
        if ue in self.rr_queue:
            raise ValueError(f"UE {ue} already attached to BS {self.id}")
        self.rr_queue.append(ue)

    def detach(self, ue: int):
        self.rr_queue.remove(ue)


def allocate_round_robin(bs: BaseStationState, per_ue_cap: int = 10) -> dict[int, int]:
    """Grant one TTI of RBs and rotate ``bs.rr_queue``; returns ``{ue: rbs}``."""
    n_served = min(per_ue_cap, len(bs.rr_queue))
    if n_served == 0:
        return {}
    base, rem = divmod(bs.rb_budget, n_served)
    served = bs.rr_queue[:n_served]
    bs.rr_queue[:] = bs.rr_queue[n_served:] + served
    return {ue: base + (1 if k < rem else 0) for k, ue in enumerate(served)}


@dataclass
class Allocation:
    """Cumulative outcome of ``n_tti`` TTIs for one base station."""

    rbs: dict[int, int]
    services: dict[int, int]
    queue: list[int]


def simulate_round_robin(queue, rb_budget, n_tti, ues_per_tti=10) -> Allocation:
    """Literal TTI-by-TTI loop; the reference for :func:`round_robin_totals`."""
    bs = BaseStationState(-1, (0.0, 0.0), rb_budget, list(queue))
    rbs = dict.fromkeys(queue, 0)
    services = dict.fromkeys(queue, 0)
    for _ in range(n_tti):
        for ue, n in allocate_round_robin(bs, ues_per_tti).items():
            rbs[ue] += n
            services[ue] += 1
    return Allocation(rbs, services, bs.rr_queue)


def round_robin_totals(queue, rb_budget, n_tti, ues_per_tti=10) -> Allocation:
    """Same result as :func:`simulate_round_robin` without iterating TTIs.

    With a fixed queue the service stream is periodic: slot ``p`` of the
    stream goes to queue position ``p mod n`` and carries a remainder RB
    when ``p mod k < rem`` (``k`` UEs served per TTI).
    """
    queue = list(queue)
    n = len(queue)
    if n == 0 or n_tti <= 0:
        return Allocation(dict.fromkeys(queue, 0), dict.fromkeys(queue, 0), queue)
    k = min(ues_per_tti, n)
    base, rem = divmod(rb_budget, k)
    if n == k:
        services = np.full(n, n_tti, dtype=np.int64)
        extra = np.where(np.arange(n) < rem, n_tti, 0)
        final = queue
    else:
        slots = k * n_tti
        period = math.lcm(n, k)
        full, tail = divmod(slots, period)
        p = np.arange(period)
        per_period = np.bincount(p % n, minlength=n)
        extra_period = np.bincount(p % n, weights=(p % k) < rem, minlength=n)
        pt = np.arange(tail)
        services = full * per_period + np.bincount(pt % n, minlength=n)
        extra = full * extra_period + np.bincount(pt % n, weights=(pt % k) < rem, minlength=n)
        shift = slots % n
        final = queue[shift:] + queue[:shift]
    rbs = base * services + extra.astype(np.int64)
    return Allocation(
        {ue: int(v) for ue, v in zip(queue, rbs)},
        {ue: int(v) for ue, v in zip(queue, services)},
        list(final),
    )
