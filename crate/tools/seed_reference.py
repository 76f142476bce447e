#!/usr/bin/env python3
"""Independent reimplementation of the seed mixing used by phnlab.

seed = splitmix64(splitmix64(master) ^ (role_tag << 56) ^ index)
role tags: chain 1, replication 2, direction 3, calibration 4.

Prints the reference values frozen in crates/cli/tests/seeds.rs.
"""

MASK = (1 << 64) - 1


def splitmix64(x):
    z = (x + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def derive(master, role, index):
    return splitmix64(splitmix64(master) ^ (role << 56) ^ index)


if __name__ == "__main__":
    for master, role, index in [(0, 1, 0), (42, 1, 0), (42, 2, 0), (42, 3, 7), (42, 4, 1), (123456789, 2, 99)]:
        print(master, role, index, hex(derive(master, role, index)))
