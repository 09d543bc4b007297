"""Shared builders for random quantum instances and a small test cavity."""
from __future__ import annotations

import copy
import time

import numpy as np
import pytest
import yaml

from cavitycontrol.cavity import CavityConfig
from cavitycontrol.config import load_config
from cavitycontrol.data import DEMO_CONFIG
from cavitycontrol.pipeline import run_scenario
from cavitycontrol.quantum import ControlField, QuantumComponent


def random_hermitian(rng, dim, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def random_component(rng, dim, label="c", weight=1.0, mixed=False):
    energies = np.sort(rng.uniform(0.0, 3.0, dim))
    if mixed:
        p = rng.dirichlet(np.ones(dim))
        init = np.diag(p).astype(complex)
    else:
        init = np.zeros(dim, complex)
        init[0] = 1.0
    n_exc = int(rng.integers(1, dim)) if dim > 1 else 1
    excited = tuple(range(dim - n_exc, dim))
    return QuantumComponent(label, energies, random_hermitian(rng, dim, 0.5), init, excited, weight)


def random_field(rng, n_steps, dt=0.05, scale=1.0):
    return ControlField(dt, scale * rng.normal(size=n_steps))


def two_level(omega, mu=0.5, label="q", weight=1.0):
    return QuantumComponent(label, [0.0, omega], [[0.0, mu], [mu, 0.0]], [1.0, 0.0], (1,), weight)


def make_cavity(**kw):
    base = dict(mode_index=17, refraction_index=1.0, cell_width=0.2, rest_gap=0.05,
                retro_reflectivity_power=0.9, window_reflectivity_power=0.5,
                strip_reflectivity_field=0.3, window_transmission_field=0.8, gain_length=0.5,
                gain_peak=2e8, gain_center=1.0193e10, gain_fwhm=1e9, pulse_period=2e-8,
                jitter_mean=1e-8, jitter_std=0.0, field_amplitude=1e3, flow_offset=0.05,
                flow_width=0.1)
    base.update(kw)
    return CavityConfig(**base)




@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


@pytest.fixture
def cavity():
    return make_cavity()


def demo_raw():
    with open(DEMO_CONFIG) as fh:
        return yaml.safe_load(fh)


def small_raw():
    """The demo scenario shortened to a single pulse and one ascent step."""
    raw = copy.deepcopy(demo_raw())
    raw["grids"]["horizon_s"] = 1.2e-8
    raw["kinetics"]["horizon_s"] = 1.2e-8
    raw["ascent"]["max_iterations"] = 1
    raw["drive"]["samples_m"] = raw["drive"]["samples_m"][:3]
    return raw


@pytest.fixture(scope="session")
def demo_runs(tmp_path_factory):
    """Two independent ``full`` runs of the bundled demo: (manifests, seconds per run)."""
    config = load_config(DEMO_CONFIG)
    manifests, seconds = [], []
    for k in range(2):
        start = time.perf_counter()
        manifests.append(run_scenario(config, "full", tmp_path_factory.mktemp(f"demo{k}")))
        seconds.append(time.perf_counter() - start)
    return manifests, seconds


# ---------------------------------------------------------------- acceptance report

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        _CRITERIA.append((mark.args[0], mark.args[1], rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_CRITERIA):
        line = f"{'PASS' if ok else 'FAIL'} {number:>2}. {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)
