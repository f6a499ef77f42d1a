import numpy as np
import pytest


def ball_points(rng, n, dim=2, c=1.0, max_frac=0.9):
    """Random points with Euclidean norm <= max_frac of the ball radius."""
    d = rng.standard_normal((n, dim))
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    r = max_frac / np.sqrt(c) * rng.uniform(0.0, 1.0, size=n) ** (1.0 / dim)
    return d * r[:, None]


def tangent_with_riemannian_norm(rng, x, c, max_norm=5.0):
    """Random tangents at x with metric length uniform in (0, max_norm]."""
    lam = 2.0 / (1.0 - c * np.sum(x * x, axis=-1))
    v = rng.standard_normal(x.shape)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    target = rng.uniform(1e-3, max_norm, size=x.shape[:-1])
    return v * (target / lam)[..., None]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


# One line per acceptance criterion, echoed into the terminal summary so the
# verdicts are readable without digging through captured stdout.
_acceptance_lines = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
