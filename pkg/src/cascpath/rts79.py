"""Bundled IEEE RTS-79 reliability test system and its wind variant.

24 buses, 38 branches, 32 generating units, 2850 MW peak load, 3405 MW of
capacity.  Reactances are per-unit on 100 MVA; line limits are the long-term
continuous ratings.  Unit failure probabilities are per simulation step
(about ten minutes), derived from the published unit MTTF statistics; line
base failure probabilities default to 2e-6 per step (about 0.1 permanent
outages per line-year) and can be overridden per line in case files.
"""

from __future__ import annotations

import numpy as np

from .casedata import Bus, CaseData, Generator, Line
from .scenarios import WindModelConfig

# bus id -> peak load MW (sums to 2850)
_BUS_LOAD = {
    1: 108.0, 2: 97.0, 3: 180.0, 4: 74.0, 5: 71.0, 6: 136.0, 7: 125.0,
    8: 171.0, 9: 175.0, 10: 195.0, 13: 265.0, 14: 194.0, 15: 317.0,
    16: 100.0, 18: 333.0, 19: 181.0, 20: 128.0,
}

_REFERENCE_BUS = 13

# (from, to, reactance pu, continuous rating MW)
_BRANCHES = [
    (1, 2, 0.0139, 175.0),
    (1, 3, 0.2112, 175.0),
    (1, 5, 0.0845, 175.0),
    (2, 4, 0.1267, 175.0),
    (2, 6, 0.1920, 175.0),
    (3, 9, 0.1190, 175.0),
    (3, 24, 0.0839, 400.0),
    (4, 9, 0.1037, 175.0),
    (5, 10, 0.0883, 175.0),
    (6, 10, 0.0605, 175.0),
    (7, 8, 0.0614, 175.0),
    (8, 9, 0.1651, 175.0),
    (8, 10, 0.1651, 175.0),
    (9, 11, 0.0839, 400.0),
    (9, 12, 0.0839, 400.0),
    (10, 11, 0.0839, 400.0),
    (10, 12, 0.0839, 400.0),
    (11, 13, 0.0476, 500.0),
    (11, 14, 0.0418, 500.0),
    (12, 13, 0.0476, 500.0),
    (12, 23, 0.0966, 500.0),
    (13, 23, 0.0865, 500.0),
    (14, 16, 0.0389, 500.0),
    (15, 16, 0.0173, 500.0),
    (15, 21, 0.0490, 500.0),
    (15, 21, 0.0490, 500.0),
    (15, 24, 0.0519, 500.0),
    (16, 17, 0.0259, 500.0),
    (16, 19, 0.0231, 500.0),
    (17, 18, 0.0144, 500.0),
    (17, 22, 0.1053, 500.0),
    (18, 21, 0.0259, 500.0),
    (18, 21, 0.0259, 500.0),
    (19, 20, 0.0396, 500.0),
    (19, 20, 0.0396, 500.0),
    (20, 23, 0.0216, 500.0),
    (20, 23, 0.0216, 500.0),
    (21, 22, 0.0678, 500.0),
]

LINE_FAIL_PROB = 2e-6       # per step: ~0.1 permanent outages per line-year
RELAY_THRESHOLD = 1.2

# unit type -> (capacity MW, marginal cost $/MWh, failure prob per step from MTTF)
_UNIT_TYPES = {
    "U12": (12.0, 25.5, 1.0 / (2940.0 * 6)),
    "U20": (20.0, 36.0, 1.0 / (450.0 * 6)),
    "U50": (50.0, 0.5, 1.0 / (1980.0 * 6)),
    "U76": (76.0, 13.0, 1.0 / (1960.0 * 6)),
    "U100": (100.0, 21.0, 1.0 / (1200.0 * 6)),
    "U155": (155.0, 11.5, 1.0 / (960.0 * 6)),
    "U197": (197.0, 19.5, 1.0 / (950.0 * 6)),
    "U350": (350.0, 10.8, 1.0 / (1150.0 * 6)),
    "U400": (400.0, 6.0, 1.0 / (1100.0 * 6)),
}

# (bus, unit type), in canonical unit-id order 1..32
_UNITS = (
    [(1, "U20"), (1, "U20"), (1, "U76"), (1, "U76")]
    + [(2, "U20"), (2, "U20"), (2, "U76"), (2, "U76")]
    + [(7, "U100")] * 3
    + [(13, "U197")] * 3
    + [(15, "U12")] * 5
    + [(15, "U155")]
    + [(16, "U155")]
    + [(18, "U400")]
    + [(21, "U400")]
    + [(22, "U50")] * 6
    + [(23, "U155"), (23, "U155"), (23, "U350")]
)

WIND_FARM_BUSES = (1, 2, 18, 21, 23)
WIND_FARM_CAPACITY = 340.0
# two 76 MW units at bus 1, two at bus 2, one 155 MW unit at bus 23
# (459 MW of thermal capacity handed over to the wind build-out)
WIND_VARIANT_REMOVED_UNITS = (3, 4, 7, 8, 30)


def rts79_case(line_fail_prob: float = LINE_FAIL_PROB,
               relay_threshold: float = RELAY_THRESHOLD) -> CaseData:
    """The base 32-unit RTS-79 case."""
    buses = tuple(
        Bus(id=i, is_reference=(i == _REFERENCE_BUS), base_load=_BUS_LOAD.get(i, 0.0))
        for i in range(1, 25)
    )
    lines = tuple(
        Line(
            id=i + 1,
            from_bus=f,
            to_bus=t,
            reactance=x,
            flow_limit_base=limit,
            relay_threshold=relay_threshold,
            base_fail_prob=line_fail_prob,
        )
        for i, (f, t, x, limit) in enumerate(_BRANCHES)
    )
    gens = []
    for i, (bus, utype) in enumerate(_UNITS):
        pmax, cost, pfail = _UNIT_TYPES[utype]
        gens.append(Generator(id=i + 1, bus=bus, p_max=pmax, cost=cost, fail_prob=pfail))
    return CaseData(name="rts79", buses=buses, lines=lines, generators=tuple(gens))


def rts79_wind_case(
    removed_unit_ids=WIND_VARIANT_REMOVED_UNITS,
    wind_buses=WIND_FARM_BUSES,
    wind_capacity: float = WIND_FARM_CAPACITY,
    **case_kwargs,
) -> CaseData:
    """RTS-79 with wind farms added and the displaced thermal units removed.

    `removed_unit_ids` selects units from the canonical ordering of
    `rts79_case` so either reading of the published unit labels can be
    reproduced explicitly.
    """
    base = rts79_case(**case_kwargs)
    removed = set(removed_unit_ids)
    gens = [g for g in base.generators if g.id not in removed]
    gens = [
        Generator(id=i + 1, bus=g.bus, p_max=g.p_max, cost=g.cost,
                  fail_prob=g.fail_prob, kind=g.kind)
        for i, g in enumerate(gens)
    ]
    next_id = len(gens) + 1
    for j, bus in enumerate(wind_buses):
        gens.append(
            Generator(id=next_id + j, bus=bus, p_max=wind_capacity, cost=0.0,
                      fail_prob=0.0, kind="wind")
        )
    return CaseData(
        name="rts79_wind",
        buses=base.buses,
        lines=base.lines,
        generators=tuple(gens),
    )


# ---------------------------------------------------------------------------
# hourly load shape (weekly x daily x hourly percentage tables)
# ---------------------------------------------------------------------------

_WEEKLY_PEAK = [
    86.2, 90.0, 87.8, 83.4, 88.0, 84.1, 83.2, 80.6, 74.0, 73.7,
    71.5, 72.7, 70.4, 75.0, 72.1, 80.0, 75.4, 83.7, 87.0, 88.0,
    85.6, 81.1, 90.0, 88.7, 89.6, 86.1, 75.5, 81.6, 80.1, 88.0,
    72.2, 77.6, 80.0, 72.9, 72.6, 70.5, 78.0, 69.5, 72.4, 72.4,
    74.3, 74.4, 80.0, 88.1, 88.5, 90.9, 94.0, 89.0, 94.2, 97.0,
    100.0, 95.2,
]

_DAILY_PEAK = [93.0, 100.0, 98.0, 96.0, 94.0, 77.0, 75.0]  # Mon..Sun

_HOURLY = {
    ("winter", "weekday"): [
        67, 63, 60, 59, 59, 60, 74, 86, 95, 96, 96, 95,
        95, 95, 93, 94, 99, 100, 100, 96, 91, 83, 73, 63,
    ],
    ("winter", "weekend"): [
        78, 72, 68, 66, 64, 65, 66, 70, 80, 88, 90, 91,
        90, 88, 87, 87, 91, 100, 99, 97, 94, 92, 87, 81,
    ],
    ("summer", "weekday"): [
        64, 60, 58, 56, 56, 58, 64, 76, 87, 95, 99, 100,
        99, 100, 100, 97, 96, 96, 93, 92, 92, 93, 87, 72,
    ],
    ("summer", "weekend"): [
        74, 70, 66, 65, 64, 62, 62, 66, 81, 86, 91, 93,
        93, 92, 91, 91, 92, 94, 95, 95, 100, 93, 88, 80,
    ],
    ("shoulder", "weekday"): [
        63, 62, 60, 58, 59, 65, 72, 85, 95, 99, 100, 99,
        93, 92, 90, 88, 90, 92, 96, 98, 96, 90, 80, 70,
    ],
    ("shoulder", "weekend"): [
        75, 73, 69, 66, 65, 65, 68, 74, 83, 89, 92, 94,
        91, 90, 90, 86, 85, 88, 92, 100, 97, 95, 90, 85,
    ],
}


def _season(week: int) -> str:
    if week <= 8 or week >= 44:
        return "winter"
    if 18 <= week <= 30:
        return "summer"
    return "shoulder"


def rts79_hourly_profile(hours: int = 8760) -> np.ndarray:
    """System-load multipliers of the annual peak, hour 0 = Monday 00:00 of week 1."""
    out = np.empty(hours)
    for h in range(hours):
        week = (h // 168) % 52 + 1
        day = (h // 24) % 7
        hod = h % 24
        daytype = "weekday" if day < 5 else "weekend"
        hourly = _HOURLY[(_season(week), daytype)]
        out[h] = (
            _WEEKLY_PEAK[week - 1] / 100.0
            * _DAILY_PEAK[day] / 100.0
            * hourly[hod] / 100.0
        )
    return out


# slight nocturnal bias, mean close to 1
_DIURNAL_WIND = [
    1.06, 1.07, 1.08, 1.08, 1.07, 1.05, 1.02, 0.99, 0.96, 0.94, 0.93, 0.92,
    0.92, 0.93, 0.94, 0.95, 0.97, 0.99, 1.01, 1.02, 1.03, 1.04, 1.05, 1.06,
]


def rts79_wind_config(
    within_region: float = 0.6,
    across_region: float = 0.2,
    regions=((0, 1, 2), (3, 4)),
    weibull_shape: float = 2.0,
    weibull_scale: float = 8.0,
    ar_coefficient: float = 0.9,
) -> WindModelConfig:
    """Default wind model for the 5-farm variant: farms grouped in two regions."""
    n = sum(len(r) for r in regions)
    corr = np.full((n, n), across_region)
    for region in regions:
        for a in region:
            for b in region:
                corr[a, b] = within_region
    np.fill_diagonal(corr, 1.0)
    return WindModelConfig(
        correlation=corr,
        weibull_shape=np.full(n, weibull_shape),
        weibull_scale=np.full(n, weibull_scale),
        ar_coefficient=ar_coefficient,
        diurnal_profile=np.array(_DIURNAL_WIND),
    )
