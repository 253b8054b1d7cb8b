#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Validate lookup table files by header, CRC and optionally md5 checksum.

License: See the LICENSE file.

"""

import argparse
import json
import os
import sys

from lutpim.errors import LutPimError
from lutpim.lut_io import deserialize_lut, md5sum


def parse_args():
    parser = argparse.ArgumentParser()
    parser.add_argument("-c", "--checksum-file", help="Checksum file (json)")
    parser.add_argument(
        "-d", "--lut-dir", help="Directory with .lut files", required=True
    )
    parser.add_argument(
        "-v", "--verbose", help="Enable verbose mode", action="store_true"
    )
    return parser.parse_args()


def load_checksums(checksum_file):
    with open(checksum_file, "r") as fp:
        checksums = json.load(fp)
    if checksums.get("kind") != "md5":
        raise ValueError("Unsupported checksum kind: %r" % checksums.get("kind"))
    return checksums["checksums"]


def find_lutfiles(lut_dir):
    lut_files = {}
    for root, _, files in os.walk(lut_dir):
        for fname in sorted(files):
            if not fname.endswith(".lut"):
                continue
            if fname in lut_files:
                raise KeyError("Duplicate LUT file '%s'?" % os.path.join(root, fname))
            lut_files[fname] = os.path.join(root, fname)
    return lut_files


def check_luts(lut_dir, checksums=None, log=None):
    """Return a list of ``(file, error)`` pairs, empty when all is well."""
    log = log or (lambda *a, **kw: None)
    errors = []
    lut_files = find_lutfiles(lut_dir)
    for fname, path in lut_files.items():
        log("Checking %s" % fname)
        try:
            deserialize_lut(path)
        except LutPimError as err:
            errors.append((fname, str(err)))
    for fname, expected in (checksums or {}).items():
        if fname not in lut_files:
            errors.append((fname, "Missing LUT file"))
            continue
        md5 = md5sum(lut_files[fname])
        expected = expected if isinstance(expected, list) else [expected]
        if md5 not in expected:
            errors.append((fname, "Checksums don't match"))
    return errors


def main():
    args = parse_args()

    log = lambda *a, **kw: print(*a, **kw) if args.verbose else None

    checksums = load_checksums(args.checksum_file) if args.checksum_file else None
    errors = check_luts(args.lut_dir, checksums, log)
    for fname, message in errors:
        print("LUT file: %s. Error: %s" % (fname, message), file=sys.stderr)
    if errors:
        raise SystemExit(1)
    log("All ok.")


if __name__ == "__main__":
    main()
