"""Named presets for interferers and whole simulation scenarios.

Presets are raw dictionaries so config files can reference them by name and
override individual fields, e.g. ``{preset = "beacon", extra_loss_prob = 0.2}``.
"""

import copy

DAY_US = 86_400_000_000

# Typical trial periods T_c (µs)
PERIOD_10_MS = 10_000
PERIOD_100_MS = 100_000

INTERFERER_PRESETS: dict[str, dict] = {
    # AP beacons every 102.4 ms; DTIM-buffered multicast also queues behind them
    "beacon": {
        "kind": "periodic",
        "period_us": 102_400,
        "duration_us": 0,
        "hit_prob": 1.0,
        "extra_delay_us": 2_000,
        "extra_loss_prob": 0.05,
        "scope": {"kind": "A"},
    },
    # Three STAs injecting 700-packet unicast bursts every ~1 s on the 5 GHz channel
    "lab5ghz": {
        "kind": "bursty_poisson",
        "mean_gap_us": 1_000_000,
        "burst_packets": 700,
        "burst_spacing_us": 500,
        "payload_effect": {"hit_prob": 1.0, "extra_delay_us": 400, "extra_loss_prob": 0.01},
        "scope": {"kind": "B"},
    },
    # Periodic channel scan by the host's network manager: the adapter goes deaf
    "netmgr_scan": {
        "kind": "periodic",
        "period_us": 120_000_000,
        "duration_us": 100_000,
        "hit_prob": 1.0,
        "extra_delay_us": 0,
        "extra_loss_prob": 1.0,
        "scope": {"kind": "both", "coupling": 1.0},
    },
    # Adjacent-channel interference: nearby antennas make both adapters defer together
    "aci": {
        "kind": "bursty_poisson",
        "mean_gap_us": 50_000,
        "burst_packets": 10,
        "burst_spacing_us": 500,
        "payload_effect": {"hit_prob": 1.0, "extra_delay_us": 1_500, "extra_loss_prob": 0.5},
        "scope": {"kind": "both", "coupling": 1.0},
    },
}

_NOISELESS_CHANNEL = {
    "service": {
        "kind": "multicast",
        "error_prob": 0.0,
        "base_latency_us": 900,
        "contention_tail": {"kind": "constant", "value_us": 0},
    }
}

_MULTICAST_CHANNEL = {
    "service": {
        "kind": "multicast",
        "error_prob": 0.01,
        "base_latency_us": 700,
        "contention_tail": {"kind": "exponential", "mean_us": 500},
    }
}

_UNICAST_CHANNEL = {
    "service": {
        "kind": "unicast",
        "per_attempt_error_prob": 0.1,
        "max_retries": 7,
        "base_latency_us": 500,
        "retry_latency_us": 300,
        "contention_tail": {"kind": "exponential", "mean_us": 250},
    }
}

SCENARIO_PRESETS: dict[str, dict] = {
    "noiseless": {"channel_a": _NOISELESS_CHANNEL, "channel_b": _NOISELESS_CHANNEL},
    "independent_multicast": {"channel_a": _MULTICAST_CHANNEL, "channel_b": _MULTICAST_CHANNEL},
    "coupled_multicast": {
        "channel_a": _MULTICAST_CHANNEL,
        "channel_b": _MULTICAST_CHANNEL,
        "interferers": [{"preset": "aci"}],
    },
    "unicast": {"channel_a": _UNICAST_CHANNEL, "channel_b": _UNICAST_CHANNEL},
}


def trial_size(period_us: int, duration_us: int = DAY_US) -> int:
    """Packets generated over ``duration_us`` at one packet per period (864000 for 100 ms/day)."""
    if period_us <= 0:
        raise ValueError("Período deve ser positivo")
    return duration_us // period_us


def deep_merge(base: dict, overrides: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def resolve_interferer(entry: dict) -> dict:
    """Expand ``{"preset": name, ...overrides}`` into a full interferer mapping."""
    if "preset" not in entry:
        return entry
    overrides = {k: v for k, v in entry.items() if k != "preset"}
    name = entry["preset"]
    if name not in INTERFERER_PRESETS:
        raise ValueError(
            f"Preset de interferente desconhecido: {name!r} "
            f"(disponíveis: {', '.join(sorted(INTERFERER_PRESETS))})"
        )
    return deep_merge(INTERFERER_PRESETS[name], overrides)


def resolve_scenario(data: dict) -> dict:
    """Expand a top-level ``preset`` key into the scenario it names, keeping overrides."""
    if "preset" not in data:
        return data
    overrides = {k: v for k, v in data.items() if k != "preset"}
    name = data["preset"]
    if name not in SCENARIO_PRESETS:
        raise ValueError(
            f"Cenário desconhecido: {name!r} (disponíveis: {', '.join(sorted(SCENARIO_PRESETS))})"
        )
    return deep_merge(SCENARIO_PRESETS[name], overrides)
