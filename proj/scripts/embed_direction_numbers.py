#!/usr/bin/env python3
"""Regenerate include/qmcrank/detail/joe_kuo_data.hpp from data/joe-kuo-d1111.txt.

The header embeds the direction-number table verbatim as a string literal so
the library needs no runtime file I/O. Run from the repository root after
changing the data file.
"""
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "data" / "joe-kuo-d1111.txt"
OUT = ROOT / "include" / "qmcrank" / "detail" / "joe_kuo_data.hpp"

text = DATA.read_text()
header = f"""#pragma once

// Joe-Kuo Sobol direction numbers, dimensions 2..1111, embedded verbatim
// from data/joe-kuo-d1111.txt. Generated by scripts/embed_direction_numbers.py;
// do not edit by hand.

namespace qmcrank::detail {{

inline constexpr const char* joe_kuo_table_text =
R"JKDATA({text})JKDATA";

}}  // namespace qmcrank::detail
"""
OUT.write_text(header)
print(f"wrote {OUT} ({OUT.stat().st_size} bytes)")
