#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Validate a run configuration file against the configuration schema.

Note that this script requires the ``jsonschema`` package.

License: See the LICENSE file.

"""

import argparse
import json
import os
import sys

from lutpim.config import SCHEMA_FILE, device_from_config, validate_config
from lutpim.errors import ConfigError


def parse_args():
    parser = argparse.ArgumentParser()
    parser.add_argument(
        "-s", "--schema-file", help="Schema file to use", default=SCHEMA_FILE
    )
    parser.add_argument("configfile", help="JSON configuration file")
    parser.add_argument(
        "-v", "--verbose", help="Enable verbose mode", action="store_true"
    )
    return parser.parse_args()


def check_config(filename, schema_file=SCHEMA_FILE):
    """Validate a configuration file against the schema and other requirements
    """
    if not os.path.exists(filename):
        return "File not found."

    with open(filename, "rb") as fp:
        try:
            data = json.load(fp)
        except json.JSONDecodeError as err:
            return "JSON decoding error: %s" % err.msg

    try:
        result = validate_config(data, schema_file=schema_file)
    except FileNotFoundError:
        return "Schema file not found."
    if result is not None:
        return result

    run = data.get("run", {})
    if run.get("tables") == "file":
        for name in ("weight_table", "act_table"):
            if name not in run:
                return "Table mode 'file' requires '%s'" % name
    for name, bits in (("weight_table", "b_w"), ("act_table", "b_a")):
        table = run.get(name)
        if table is None:
            continue
        if len(table["values"]) != 1 << table["bitwidth"]:
            return "%s needs %d values" % (name, 1 << table["bitwidth"])
        if bits in run and run[bits] != table["bitwidth"]:
            return "%s is %d-bit but %s is %d" % (name, table["bitwidth"], bits, run[bits])

    # the dataclasses check what the schema cannot express
    try:
        device_from_config(data)
    except ConfigError as err:
        return str(err)
    return None


def main():
    args = parse_args()

    log = lambda *a, **kw: print(*a, **kw) if args.verbose else None

    result = check_config(args.configfile, schema_file=args.schema_file)
    if result is not None:
        print("Error: %s" % result, file=sys.stderr)
        raise SystemExit(1)
    log("Validation passed.")


if __name__ == "__main__":
    main()
