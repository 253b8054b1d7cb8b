# -*- coding: utf-8 -*-

"""
LUT-based low-bit quantized matrix multiplication for DRAM-PIM.

License: See the LICENSE file.

"""

__version__ = "1.0.0"
