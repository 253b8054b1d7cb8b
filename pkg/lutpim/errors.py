# -*- coding: utf-8 -*-

"""
Exceptions raised by the lutpim package.

Every exception carries a readable message and keeps the values that caused
it as attributes, so callers (and the command line front end) can react to
them without parsing strings.

License: See the LICENSE file.

"""


class LutPimError(Exception):
    """Base class for all lutpim errors."""


class ConfigError(LutPimError):
    def __init__(self, message):
        super().__init__("Invalid configuration: %s" % message)


class CodeOutOfRange(LutPimError):
    def __init__(self, code, bitwidth):
        self.code = code
        self.bitwidth = bitwidth
        super().__init__(
            "Code %r does not fit in %d bits (valid range: 0..%d)"
            % (code, bitwidth, (1 << bitwidth) - 1)
        )


class PackTooWide(LutPimError):
    def __init__(self, p, bitwidth, limit=64):
        self.p = p
        self.bitwidth = bitwidth
        super().__init__(
            "Packing %d codes of %d bits needs %d bits, limit is %d"
            % (p, bitwidth, p * bitwidth, limit)
        )


class NotAPermutation(LutPimError):
    def __init__(self, perm):
        self.perm = tuple(perm)
        super().__init__("Not a permutation of 0..n-1: %r" % (self.perm,))


class NotSorted(LutPimError):
    def __init__(self, codes):
        self.codes = tuple(codes)
        super().__init__("Codes are not in non-decreasing order: %r" % (self.codes,))


class RankOutOfRange(LutPimError):
    def __init__(self, rank, count):
        self.rank = rank
        self.count = count
        super().__init__("Rank %r outside of [0, %d)" % (rank, count))


class InvalidScale(LutPimError):
    def __init__(self, scale):
        self.scale = scale
        super().__init__("Quantization scale must be positive, got %r" % scale)


class EntryOverflow(LutPimError):
    def __init__(self, bound, b_o):
        self.bound = bound
        self.b_o = b_o
        super().__init__(
            "LUT entries may reach magnitude %d which does not fit in a "
            "signed %d-byte entry" % (bound, b_o)
        )


class PTooLarge(LutPimError):
    def __init__(self, p, limit):
        self.p = p
        self.limit = limit
        super().__init__(
            "Packing degree %d exceeds the supported maximum of %d" % (p, limit)
        )


class LutIoError(LutPimError):
    def __init__(self, path, reason):
        self.path = path
        super().__init__("I/O error on LUT file '%s': %s" % (path, reason))


class BadMagic(LutPimError):
    def __init__(self, path, magic):
        self.path = path
        self.magic = magic
        super().__init__("File '%s' is not a LUT file (magic %r)" % (path, magic))


class VersionMismatch(LutPimError):
    def __init__(self, path, found, expected):
        self.path = path
        self.found = found
        self.expected = expected
        super().__init__(
            "LUT file '%s' has format version %d, expected %d"
            % (path, found, expected)
        )


class ChecksumMismatch(LutPimError):
    def __init__(self, path, reason="CRC32 of the entries does not match"):
        self.path = path
        super().__init__(
            "Validating the LUT file '%s' failed: %s" % (path, reason)
        )


class DimensionMismatch(LutPimError):
    def __init__(self, message):
        super().__init__("Dimension mismatch: %s" % message)


class CapacityExceeded(LutPimError):
    """Resident data does not fit a memory tier.

    ``deficit`` is exactly the number of bytes the budget would have to grow
    by for the placement to be accepted.
    """

    def __init__(self, tier, required, budget, what="LUT"):
        self.tier = tier
        self.required = int(required)
        self.budget = int(budget)
        self.deficit = self.required - self.budget
        self.what = what
        super().__init__(
            "%s needs %d bytes in the %s tier but only %d bytes are "
            "available (short by %d bytes)"
            % (what, self.required, tier, self.budget, self.deficit)
        )


class InfeasibleP(LutPimError):
    def __init__(self, message, tier=None, budget=None):
        self.tier = tier
        self.budget = budget
        super().__init__("No feasible packing degree: %s" % message)


class NoZeroCode(LutPimError):
    def __init__(self, k, p):
        self.k = k
        self.p = p
        super().__init__(
            "K=%d is not a multiple of p=%d, so activations need padding, "
            "but the activation code table has no exact-zero code" % (k, p)
        )


class AccumulatorOverflow(LutPimError):
    def __init__(self, value):
        self.value = int(value)
        super().__init__(
            "Output value %d does not fit the signed 32-bit accumulator"
            % self.value
        )


class DegenerateTile(LutPimError):
    def __init__(self, bank_grid, shape):
        self.bank_grid = bank_grid
        self.shape = shape
        super().__init__(
            "Bank grid %r leaves at least one bank with an empty tile for a "
            "problem of shape %r" % (bank_grid, shape)
        )
