import numpy as np
from hypothesis import HealthCheck, settings

settings.register_profile(
    "riselab",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("riselab")


def rearrange_oracle(values, weights, s):
    """``xi*(s) = max{v : mu(xi >= v) >= s}``, straight from the distribution function."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    out = []
    for point in np.atleast_1d(s):
        mass = np.array([weights[values >= v].sum() for v in values])
        out.append(values[mass >= point * (1 - 1e-12)].max())
    return np.array(out)


# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
