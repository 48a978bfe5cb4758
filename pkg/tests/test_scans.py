import io
import math

import numpy as np
import pytest

from steerjm.assemblage import validate
from steerjm.qubit import bloch_observables, se_observables_closed_form, yu_oh_criterion
from steerjm.robustness import mix_with_noise
from steerjm.scans import (
    FIG1_COLUMNS,
    Grid,
    ScanSpec,
    ScanSpecError,
    fig1_assemblage,
    fig1_row,
    fig2_row,
    run_scan,
    sharp_pair,
    write_csv,
)
from steerjm.sdp import lhs_feasible


def spec1(lam=(0, 1, 5), r=(0, 0.45, 4), theta=(0, math.pi, 5)):
    return ScanSpec("fig1", {"lambda": Grid(*lam), "r": Grid(*r), "theta": Grid(*theta)}, {"t2": 0.45})


def test_fig1_assemblage_is_valid():
    for lam, r, th in [(0.3, 0.2, 0.5), (1.0, 0.45, math.pi / 2), (0.0, 0.0, 0.0)]:
        a = fig1_assemblage(lam, r, th)
        assert validate(a) == []
        assert np.allclose(a.reduced_state, np.eye(2) / 2)


def test_fig1_observables_are_twice_the_states():
    a = fig1_assemblage(0.7, 0.3, 1.0)
    o1, o2 = se_observables_closed_form(a)
    assert o1.alpha == pytest.approx(0.0) and np.allclose(o1.r, [0, 0, 0.7])
    assert o2.alpha == pytest.approx(2 * 0.45 - 1) and np.allclose(o2.r, 0.6 * np.array([math.sin(1), 0, math.cos(1)]))


def test_fig1_containment_small_grid():
    rows = run_scan(spec1((0, 1, 11), (0, 0.45, 10), (0, math.pi, 11)))
    assert len(rows) == 11 * 10 * 11
    for row in rows:
        d = dict(zip(FIG1_COLUMNS, row))
        assert d["valid"]
        assert not d["steerable_inner"] or d["steerable_outer"]
    assert any(r[5] for r in rows) and any(r[6] and not r[5] for r in rows)


def test_fig1_trivial_slices():
    for r in np.linspace(0, 0.45, 7):
        for th in np.linspace(0, math.pi, 7):
            assert not fig1_row(0.0, r, th)[6]
    # theta = 0: both Bloch vectors along z, so the observables commute
    for lam in np.linspace(0, 1, 7):
        row = fig1_row(lam, 0.45, 0.0)
        assert not row[5] and not row[6]


def test_fig1_outer_matches_sdp():
    # the exact two-observable test agrees with the LHS program away from the boundary
    for lam, r, th in [(0.9, 0.4, math.pi / 2), (0.6, 0.3, math.pi / 2), (1.0, 0.45, 1.0), (0.3, 0.1, 2.0)]:
        row = fig1_row(lam, r, th)
        if abs(row[4]) > 1e-6:
            assert row[6] is (not lhs_feasible(fig1_assemblage(lam, r, th)).feasible)


def test_fig1_invalid_points_flagged():
    row = fig1_row(0.5, 0.46, 1.0)
    assert row[-1] is False and math.isnan(row[3])
    spec = ScanSpec("fig1", {"lambda": Grid(0, 1, 2), "r": Grid(0.4, 0.5, 2), "theta": Grid(0, 1, 2)}, {"t2": 0.45})
    rows = run_scan(spec)
    assert len(rows) == 8 and sum(not r[-1] for r in rows) == 4


def test_spec_validation():
    with pytest.raises(ScanSpecError):
        spec1(lam=(0, 1, 1)).validate()
    with pytest.raises(ScanSpecError):
        spec1(lam=(1, 0, 3)).validate()
    with pytest.raises(ScanSpecError):
        ScanSpec("fig3").validate()
    with pytest.raises(ScanSpecError):
        ScanSpec("fig2", {"theta": Grid(0.0, 1.0, 3)}).validate()
    with pytest.raises(ScanSpecError):
        ScanSpec("fig1", spec1().grid, {"t2": 0.6}).validate()
    d = ScanSpec.default("fig1")
    assert d.validate() is d and d.grid["lambda"].steps == 50


def test_csv_is_byte_deterministic():
    spec = spec1()
    outs = []
    for workers in (1, 2):
        fh = io.StringIO()
        write_csv(fh, spec, run_scan(spec, workers=workers), version="t")
        outs.append(fh.getvalue())
    assert outs[0] == outs[1]
    body = [l for l in outs[0].splitlines() if not l.startswith("#")]
    # floats use the shortest round-trip form
    first = body[1].split(",")
    assert float(first[1]) == 0.0 and first[5] in ("0", "1")


def test_fig2_endpoint_and_pi_over_3():
    th, lam_g, *lam_w, status = fig2_row(math.pi / 2)
    assert status == "ok"
    assert lam_g == pytest.approx((2 - math.sqrt(2)) / 4, abs=1e-5)
    assert lam_w[0] == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-5)
    _, lam_g, *lam_w, _ = fig2_row(math.pi / 3)
    assert lam_g <= lam_w[0] / 2 + 1e-7
    assert all(a <= b + 1e-7 for a, b in zip(lam_w, lam_w[1:]))


def exact_white(theta, bias):
    """Oracle: bisection on the closed-form two-observable qubit criterion."""
    m = sharp_pair(theta)
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if yu_oh_criterion(*bloch_observables(mix_with_noise(m, mid, bias))).jm:
            hi = mid
        else:
            lo = mid
    return hi


def test_fig2_small_angle_limit():
    th = 1e-2
    _, lam_g, *lam_w, _ = fig2_row(th)
    assert lam_g < 1e-2 and max(lam_w[:3]) < 1e-2
    # full bias leaves rank-1 "-" effects: joint measurability needs
    # (1 - lambda)(1 + cos(theta/2)) <= 1, so this curve tends to 1/2, not 0
    assert exact_white(th, 1.0) == pytest.approx(math.cos(th / 2) / (1 + math.cos(th / 2)), abs=1e-12)
    # the robustness slope is ~theta^2 here, so the bisection is only good to ~tol / theta^2
    assert lam_w[3] == pytest.approx(0.5, abs=5e-8 / th ** 2)


@pytest.mark.parametrize("theta", [0.3, 0.9, math.pi / 2])
def test_fig2_matches_exact_qubit_criterion(theta):
    _, lam_g, *lam_w, _ = fig2_row(theta)
    for b, val in zip((0.0, 0.5, 0.8, 1.0), lam_w):
        assert val == pytest.approx(exact_white(theta, b), abs=2e-7 if b < 1 else 1e-6)


def test_sharp_pair():
    m = sharp_pair(math.pi / 2)
    assert validate(m) == []
    assert np.allclose(m[1, 0], [[0.5, 0.5], [0.5, 0.5]])
