import time

import pytest

VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


class Criterion:
    """Collects named checks for one acceptance criterion and prints a single verdict line."""

    def __init__(self, config, capsys, number, title, limit_s):
        self.config, self.capsys = config, capsys
        self.number, self.title, self.limit_s = number, title, limit_s
        self.checks = []
        self.start = time.perf_counter()

    def check(self, description, ok):
        self.checks.append((description, bool(ok)))
        return bool(ok)

    def finish(self):
        elapsed = time.perf_counter() - self.start
        if self.limit_s is not None:
            self.check(f"runtime {elapsed:.1f} s < {self.limit_s:g} s", elapsed < self.limit_s)
        ok = all(c for _, c in self.checks)
        detail = "; ".join(f"{'ok' if c else 'FAILED'}: {d}" for d, c in self.checks)
        line = f"criterion {self.number:>2} {'PASS' if ok else 'FAIL'}  {self.title} | {detail}"
        self.config.stash[VERDICTS].append(line)
        with self.capsys.disabled():
            print("\n" + line)
        failed = [d for d, c in self.checks if not c]
        assert not failed, "failed checks: " + "; ".join(failed)


@pytest.fixture
def criterion(request, capsys):
    def make(number, title, limit_s=None):
        return Criterion(request.config, capsys, number, title, limit_s)

    return make


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
