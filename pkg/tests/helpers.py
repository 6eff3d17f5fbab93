"""Shared test utilities."""

import numpy as np


class ScriptedRng:
    """Stand-in generator that replays a fixed sequence of draws.

    uniform() consumes values from the script and maps them from [0, 1)
    onto [low, high); random() and integers() consume one value each.
    Values must already lie in [0, 1).
    """

    def __init__(self, script):
        self.script = list(script)
        self.cursor = 0

    def _next(self):
        if self.cursor >= len(self.script):
            raise AssertionError("scripted rng exhausted")
        v = self.script[self.cursor]
        self.cursor += 1
        return v

    def random(self, size=None):
        if size is None:
            return self._next()
        return np.array([self._next() for _ in range(size)])

    def uniform(self, low=0.0, high=1.0, size=None):
        if size is None:
            return low + (high - low) * self._next()
        return np.array([low + (high - low) * self._next() for _ in range(size)])

    def integers(self, low, high=None, size=None):
        if high is None:
            low, high = 0, low
        span = high - low
        if size is None:
            return low + int(self._next() * span)
        return np.array([low + int(self._next() * span) for _ in range(size)])

    def permutation(self, n):
        return np.arange(n)
