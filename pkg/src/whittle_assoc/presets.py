"""Parameter sets of the published figures and tables, plus their reported values."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidArgumentError
from .model import SystemConfig, make_config

POLICY_COLUMNS = ("Load", "SNR", "Throughput", "Random", "Mixed", "Whittle")


@dataclass(frozen=True)
class Preset:
    """A published experiment configuration.

    ``sweep`` names the parameter varied along the x-axis (``None`` for a
    single configuration) and ``values`` its settings; ``config(v)`` builds
    the system for one setting, ``config()`` for the first.
    """

    name: str
    kind: str  # "cost" for figures, or the table's metric
    sweep: str | None
    values: tuple
    builder: object

    def config(self, value=None, **overrides) -> SystemConfig:
        if value is None:
            value = self.values[0] if self.values else None
        elif self.values and value not in self.values:
            raise InvalidArgumentError(
                f"{self.name}: {self.sweep}={value} not in {self.values}")
        cfg = self.builder(value)
        return cfg.replace(**overrides) if overrides else cfg

    def configs(self, **overrides):
        vals = self.values or (None,)
        return [(v, self.config(v, **overrides)) for v in vals]


def table_k_rates_costs(K: int):
    """Rates and costs for the K-sweep tables (2 <= K <= 10)."""
    if not 2 <= K <= 10:
        raise InvalidArgumentError(f"K must lie in 2..10, got {K}")
    rates = [0.77, 0.765] + [0.775 - 0.05 * i for i in range(3, K + 1)]
    costs = [70.0, 69.75] + [70.25 - 0.25 * i for i in range(3, K + 1)]
    return rates, costs


def fig5b_rates_costs(K: int):
    if not 5 <= K <= 15:
        raise InvalidArgumentError(f"K must lie in 5..15, got {K}")
    rates = [0.78, 0.75, 0.72, 0.69, 0.66] + [0.81 - 0.03 * i for i in range(6, K + 1)]
    costs = [90.0, 86.0, 82.0, 78.0, 74.0] + [94.0 - 4.0 * i for i in range(6, K + 1)]
    return rates, costs


FIG2_RATES = [0.78, 0.65, 0.56, 0.50, 0.45]
FIG3_RATES = [0.78, 0.70, 0.65, 0.60, 0.56, 0.50, 0.48, 0.45]
FIG4A_RATES = [0.78, 0.75, 0.70, 0.65, 0.58, 0.52, 0.48, 0.46, 0.44, 0.42]
FIG5A_RATES = [0.78, 0.70, 0.65, 0.60, 0.52, 0.46]
TABLE2_RATES = [0.77, 0.76, 0.75, 0.74, 0.73]
TABLE2_COSTS = [70.0, 69.5, 69.0, 68.5, 68.0]


def _table_k(K):
    r, c = table_k_rates_costs(K)
    return make_config(r, c, L=35, M=100, p0=0.3)


PRESETS = {
    "fig2a": Preset("fig2a", "cost", None, (), lambda _: make_config(
        FIG2_RATES, [95, 75, 58, 40, 32], L=20, M=100, p0=0.6)),
    "fig2b": Preset("fig2b", "cost", None, (), lambda _: make_config(
        FIG2_RATES, [32, 40, 58, 75, 95], L=20, M=100, p0=0.6)),
    "fig3a": Preset("fig3a", "cost", None, (), lambda _: make_config(
        FIG3_RATES, [95, 80, 72, 65, 58, 47, 40, 32], L=20, M=100, p0=0.4)),
    "fig3b": Preset("fig3b", "cost", None, (), lambda _: make_config(
        FIG3_RATES, [85, 75, 68, 63, 57, 49, 45, 36], L=10, M=150, p0=0.7)),
    "fig4a": Preset("fig4a", "cost", None, (), lambda _: make_config(
        FIG4A_RATES, [95, 85, 75, 65, 58, 47, 40, 32, 28, 25], L=15, M=100, p0=0.4)),
    "fig4b": Preset("fig4b", "cost", "L", (20, 40, 60, 80, 100, 120), lambda L: make_config(
        FIG2_RATES, [95, 75, 58, 40, 32], L=L, M=100, p0=0.6)),
    "fig5a": Preset("fig5a", "cost", "M", (100, 125, 150, 175, 200), lambda M: make_config(
        FIG5A_RATES, [92, 81, 70, 63, 52, 40], L=30, M=M, p0=0.8, buffer=250)),
    "fig5b": Preset("fig5b", "cost", "K", tuple(range(5, 16)), lambda K: make_config(
        *fig5b_rates_costs(K), L=30, M=100, p0=0.8)),
    "table1": Preset("table1", "avg_delay", "K", tuple(range(2, 11)), _table_k),
    "table2": Preset("table2", "avg_delay", "L", tuple(range(15, 60, 5)), lambda L: make_config(
        TABLE2_RATES, TABLE2_COSTS, L=L, M=100, p0=0.6)),
    "table3": Preset("table3", "avg_throughput", "K", tuple(range(2, 11)), _table_k),
    "table4": Preset("table4", "jfi", "K", tuple(range(2, 11)), _table_k),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


# Reported values, columns in POLICY_COLUMNS order, keyed by the sweep value.
TABLE1_DELAY = {
    2: (42.60, 142.26, 42.62, 69.46, 42.62, 42.60),
    3: (33.94, 142.37, 33.90, 52.26, 33.89, 33.83),
    4: (33.80, 144.17, 33.65, 47.17, 33.65, 33.61),
    5: (33.88, 142.41, 33.69, 43.71, 33.69, 33.61),
    6: (34.01, 142.79, 33.68, 41.42, 33.68, 33.61),
    7: (34.14, 142.23, 33.71, 40.65, 33.71, 33.63),
    8: (34.23, 143.20, 33.68, 39.70, 33.68, 33.60),
    9: (34.27, 143.85, 33.66, 39.28, 33.66, 33.59),
    10: (34.44, 142.67, 33.64, 39.16, 33.64, 33.56),
}
TABLE2_DELAY = {
    15: (34.81, 166.20, 34.04, 52.52, 34.04, 33.96),
    20: (34.38, 138.96, 33.87, 47.46, 33.87, 33.79),
    25: (34.31, 110.91, 33.77, 43.2, 33.77, 33.72),
    30: (34.35, 91.33, 33.76, 41.04, 33.76, 33.69),
    35: (34.32, 76.63, 33.72, 39.27, 33.72, 33.59),
    40: (34.30, 66.94, 33.65, 38.25, 33.65, 33.59),
    45: (34.27, 59.02, 33.66, 37.59, 33.66, 33.56),
    50: (34.33, 53.52, 33.67, 37.24, 33.67, 33.54),
    55: (34.32, 49.13, 33.65, 36.54, 33.65, 33.57),
}
TABLE3_THROUGHPUT = {
    2: (44.92, 13.96, 44.92, 34.53, 44.94, 45.09),
    3: (51.52, 13.96, 51.62, 41.53, 51.61, 51.69),
    4: (51.70, 13.75, 51.89, 44.21, 51.89, 51.98),
    5: (51.55, 13.83, 51.83, 45.76, 51.83, 51.97),
    6: (51.35, 13.81, 51.85, 46.89, 51.85, 51.97),
    7: (51.23, 14.08, 51.32, 47.28, 51.83, 51.95),
    8: (51.08, 13.82, 51.87, 47.66, 51.87, 52.00),
    9: (50.93, 13.68, 51.85, 47.96, 51.85, 51.93),
    10: (50.74, 13.90, 51.94, 47.91, 51.94, 52.08),
}
TABLE4_JFI = {
    2: (0.1217, 0.0737, 0.1217, 0.1025, 0.1217, 0.1219),
    3: (0.1969, 0.1105, 0.1968, 0.1721, 0.1968, 0.1969),
    4: (0.2633, 0.1469, 0.2634, 0.2386, 0.2634, 0.2634),
    5: (0.3289, 0.1853, 0.3289, 0.3054, 0.3289, 0.3292),
    6: (0.3948, 0.2222, 0.3949, 0.3726, 0.3949, 0.3950),
    7: (0.4606, 0.2559, 0.4607, 0.4375, 0.4607, 0.4608),
    8: (0.5262, 0.2936, 0.5266, 0.5042, 0.5266, 0.5267),
    9: (0.5917, 0.3317, 0.5925, 0.5697, 0.5925, 0.5925),
    10: (0.6576, 0.3678, 0.6583, 0.6341, 0.6583, 0.6584),
}

REPORTED = {
    "table1": TABLE1_DELAY,
    "table2": TABLE2_DELAY,
    "table3": TABLE3_THROUGHPUT,
    "table4": TABLE4_JFI,
}


def reported(name: str, value, policy_label: str) -> float:
    row = REPORTED[name][value]
    return row[POLICY_COLUMNS.index(policy_label)]
