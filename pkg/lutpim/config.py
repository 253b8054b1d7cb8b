# -*- coding: utf-8 -*-

"""
Device and latency configuration.

Configuration files are JSON with up to three sections, ``latency``,
``device`` and ``run``, and are checked against ``schema.json`` before use.
Note that this module requires the ``jsonschema`` package.

License: See the LICENSE file.

"""

import dataclasses
import json
import os

from dataclasses import dataclass, field
from typing import Optional

import jsonschema

from .errors import ConfigError

SCHEMA_FILE = os.path.join(os.path.dirname(__file__), "schema.json")

# profiled on the reference device: 0.5 B/cycle at 350 MHz with a three
# stage pipeline, and 12 instructions per reorder+canonical lookup
DEFAULT_L_D_SECONDS = 1.36e-9
DEFAULT_L_LOCAL_SECONDS = 3.27e-8

# strategies whose lookups touch a single table
SINGLE_LOOKUP_STRATEGIES = ("packed_buffer", "canonical_runtime")


@dataclass(frozen=True)
class LatencyConstants:
    l_d_seconds: float = DEFAULT_L_D_SECONDS
    l_local_seconds: float = DEFAULT_L_LOCAL_SECONDS

    def __post_init__(self):
        if not (self.l_d_seconds > 0 and self.l_local_seconds > 0):
            raise ConfigError(
                "latency constants must be positive, got L_D=%r L_local=%r"
                % (self.l_d_seconds, self.l_local_seconds)
            )

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class DeviceConfig:
    """A fleet of identical banks, each a DRAM array plus a local buffer.

    Unset per-operation constants are derived from ``consts``: a PackedDram
    lookup costs ``10 * L_local``, a naive MAC ``4 * L_local / 12`` (four of
    the twelve instructions of a lookup pair) and an on-the-fly weight
    reorder ``L_local``.
    """

    bank_bytes: int = 64 * 2 ** 20
    buffer_bytes: int = 64 * 2 ** 10
    lut_budget_fraction: float = 0.5
    num_banks: int = 2048
    consts: LatencyConstants = field(default_factory=LatencyConstants)
    dram_lookup_seconds: Optional[float] = None
    mac_seconds: Optional[float] = None
    packed_lookup_fraction: float = 0.5
    reorder_compute_seconds: Optional[float] = None

    def __post_init__(self):
        for name, value in self._derived(self.consts).items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)

        if self.bank_bytes < 0 or self.buffer_bytes < 0:
            raise ConfigError("memory sizes cannot be negative")
        if not 0 < self.lut_budget_fraction <= 1:
            raise ConfigError(
                "lut_budget_fraction must be in (0, 1], got %r"
                % self.lut_budget_fraction
            )
        if self.num_banks < 1:
            raise ConfigError("num_banks must be at least 1")
        for name in (
            "dram_lookup_seconds",
            "mac_seconds",
            "packed_lookup_fraction",
            "reorder_compute_seconds",
        ):
            if not getattr(self, name) > 0:
                raise ConfigError("%s must be positive" % name)

    @property
    def bank_lut_budget(self):
        return int(self.bank_bytes * self.lut_budget_fraction)

    @property
    def buffer_lut_budget(self):
        return int(self.buffer_bytes * self.lut_budget_fraction)

    @property
    def bank_data_budget(self):
        return self.bank_bytes - self.bank_lut_budget

    @property
    def buffer_data_budget(self):
        return self.buffer_bytes - self.buffer_lut_budget

    def _derived(self, consts):
        l_local = consts.l_local_seconds
        return {
            "dram_lookup_seconds": 10 * l_local,
            "mac_seconds": l_local / 12 * 4,
            "reorder_compute_seconds": l_local,
        }

    def replace(self, **changes):
        """Copy with ``changes`` applied.

        When ``consts`` changes, constants that were derived from the old
        latencies are derived again; explicitly set ones are kept.
        """
        consts = changes.get("consts")
        if consts is not None and consts != self.consts:
            for name, value in self._derived(self.consts).items():
                if name not in changes and getattr(self, name) == value:
                    changes[name] = None
        return dataclasses.replace(self, **changes)

    def time_breakdown(self, report):
        """Seconds spent per counter class of an ExecReport."""
        l_local = self.consts.l_local_seconds
        if report.strategy in SINGLE_LOOKUP_STRATEGIES:
            l_local = l_local * self.packed_lookup_fraction
        parts = {
            "slice_time_s": report.dram_entry_loads * self.consts.l_d_seconds,
            "lookup_time_s": report.local_lookups * l_local,
            "reorder_time_s": report.reorder_ops * self.reorder_compute_seconds,
            "dram_lookup_time_s": report.dram_lut_lookups
            * self.dram_lookup_seconds,
            "mac_time_s": report.mac_ops * self.mac_seconds,
        }
        total = parts["slice_time_s"] + parts["lookup_time_s"]
        total = total + parts["reorder_time_s"] + parts["dram_lookup_time_s"]
        parts["modeled_time_s"] = total + parts["mac_time_s"]
        return parts

    def modeled_time(self, report):
        return self.time_breakdown(report)["modeled_time_s"]

    def to_dict(self):
        out = dataclasses.asdict(self)
        out.pop("consts")
        return out


def load_schema(schema_file=SCHEMA_FILE):
    if not os.path.exists(schema_file):
        raise FileNotFoundError(schema_file)
    with open(schema_file, "rb") as fp:
        schema = json.load(fp)
    return schema


def validate_config(data, schema_file=SCHEMA_FILE):
    """Return None when valid, an error message otherwise."""
    schema = load_schema(schema_file)
    try:
        jsonschema.validate(instance=data, schema=schema)
    except jsonschema.ValidationError as err:
        return "JSONSchema validation error: %s" % err.message
    return None


def load_config(filename):
    if not os.path.exists(filename):
        raise ConfigError("file not found: %s" % filename)
    with open(filename, "rb") as fp:
        try:
            data = json.load(fp)
        except json.JSONDecodeError as err:
            raise ConfigError("JSON decoding error: %s" % err.msg)
    message = validate_config(data)
    if message is not None:
        raise ConfigError(message)
    return data


def device_from_config(data=None):
    data = data or {}
    consts = LatencyConstants(**data.get("latency", {}))
    return DeviceConfig(consts=consts, **data.get("device", {}))
