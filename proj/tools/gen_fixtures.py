#!/usr/bin/env python3
"""Writes fixtures/generator.txt from a standalone SplitMix64 + Floyd sampler.

Each line: seed shape density nnz checksum (checksum as 16 hex digits).
"""
import sys

MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def below(self, n):
        m = self.next() * n
        low = m & MASK
        if low < n:
            threshold = ((1 << 64) - n) % n
            while low < threshold:
                m = self.next() * n
                low = m & MASK
        return m >> 64


def generate(seed, shape, density, lo=1, hi=9):
    total = 1
    for s in shape:
        total *= s
    k = int(density * total + 0.5)
    rng = SplitMix64(seed)
    taken, chosen = set(), []
    for j in range(total - k, total):
        t = rng.below(j + 1)
        if t in taken:
            t = j
        taken.add(t)
        chosen.append(t)
    chosen.sort()
    points = []
    for linear in chosen:
        idx = []
        for s in reversed(shape):
            idx.append(linear % s)
            linear //= s
        points.append((tuple(reversed(idx)), lo + rng.below(hi - lo + 1)))
    return points


def checksum(points):
    h = 0xCBF29CE484222325
    def mix(v):
        nonlocal h
        v &= MASK
        for i in range(8):
            h ^= (v >> (8 * i)) & 0xFF
            h = (h * 0x100000001B3) & MASK
    for coords, value in points:
        for c in coords:
            mix(c)
        mix(value)
    return h


CASES = [
    (1, (8, 8), 0.25),
    (7, (16, 16), 0.05),
    (7, (16, 16), 0.30),
    (42, (16, 16), 1.0),
    (3, (4, 5, 6), 0.5),
    (99, (32,), 0.1),
    (2024, (256, 256), 0.02),
    (5, (3, 3), 0.01),
]


def main():
    out = sys.stdout if len(sys.argv) < 2 else open(sys.argv[1], "w")
    out.write("# seed shape density nnz checksum\n")
    for seed, shape, density in CASES:
        pts = generate(seed, shape, density)
        out.write("%d %s %s %d %016x\n" % (seed, "x".join(map(str, shape)), repr(density), len(pts), checksum(pts)))


if __name__ == "__main__":
    main()
