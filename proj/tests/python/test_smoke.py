# SPDX-License-Identifier: Apache-2.0
"""Smoke tests for the python bindings: build instances from numpy arrays,
solve them, and sanity-check the reported numbers against known values."""

import math

import numpy as np
import pytest

import sharecap


def test_waterfilling_fixture():
    sol = sharecap.waterfilling(np.diag([4.0, 1.0]).astype(complex), 1.0)
    assert sol["method"] == "waterfilling"
    assert math.isclose(sol["capacity_nats"], math.log(4.5) + math.log(1.125), abs_tol=1e-10)
    assert np.allclose(sol["R"], np.diag([0.875, 0.125]), atol=1e-10)
    assert math.isclose(sol["capacity_bits"], sol["capacity_nats"] / math.log(2), rel_tol=1e-12)


def test_instance_accessors():
    w1 = np.eye(2, dtype=complex)
    w2 = np.diag([1.0, 2.0]).astype(complex)
    inst = sharecap.Instance(w1, total_power=4.0, users=[(w2, 3.0)])
    assert inst.m == 2
    assert inst.num_users == 1
    assert inst.total_power == 4.0
    assert np.allclose(inst.user_gram(0), w2)
    assert inst.user_cap(0) == 3.0


def test_interference_limited_solution():
    inst = sharecap.Instance(
        np.eye(2, dtype=complex), 4.0, [(np.diag([1.0, 2.0]).astype(complex), 3.0)]
    )
    sol = sharecap.solve(inst)
    assert sol["method"] == "prop4"
    assert math.isclose(sol["capacity_nats"], math.log(4.5), abs_tol=1e-10)
    assert np.allclose(sol["R"], np.diag([2.0, 0.5]), atol=1e-9)
    assert sol["mu1"] == 0.0
    assert not sol["tpc_active"]
    assert sol["ipc_active"] == [True]

    general = sharecap.solve_general(inst)
    assert general["method"] == "general"
    assert math.isclose(general["capacity_nats"], sol["capacity_nats"], abs_tol=1e-6)


def test_complex_channel_round_trip():
    rng = np.random.default_rng(7)
    h1 = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))) / np.sqrt(2)
    h2 = (rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))) / np.sqrt(2)
    inst = sharecap.Instance(h1.conj().T @ h1, 2.0, [(h2.conj().T @ h2, 1.0)])
    sol = sharecap.solve(inst)

    r = np.asarray(sol["R"])
    assert np.allclose(r, r.conj().T)
    assert np.trace(r).real <= 2.0 + 1e-9
    assert np.trace(h2.conj().T @ h2 @ r).real <= 1.0 + 1e-9

    mi = sharecap.mutual_information(inst, r)
    assert math.isclose(mi, sol["capacity_nats"], rel_tol=1e-10, abs_tol=1e-10)

    kkt = sharecap.kkt_residuals(inst, r, sol["mu1"], sol["mu2"])
    assert kkt["stationarity"] <= 1e-6


def test_classify():
    inst = sharecap.Instance(
        np.eye(2, dtype=complex), 1.0, [(np.diag([1.0, 0.0]).astype(complex), 1.0)]
    )
    rep = sharecap.classify(inst)
    assert rep["unbounded_growth"]
    assert rep["favorable_rank"]
    assert rep["capacity_upper_bound_nats"] is None
    v = np.asarray(rep["certifying_vector"])
    assert abs(np.linalg.norm(v) - 1.0) < 1e-9
    assert abs(v[1]) == pytest.approx(1.0, abs=1e-9)


def test_oracle_agrees():
    inst = sharecap.Instance(
        np.eye(2, dtype=complex), 4.0, [(np.diag([1.0, 2.0]).astype(complex), 3.0)]
    )
    ora = sharecap.oracle(inst, kind="pg")
    assert ora["method"] == "oracle"
    assert math.isclose(ora["capacity_nats"], math.log(4.5), abs_tol=1e-4)


def test_invalid_instance_raises():
    with pytest.raises(ValueError):
        sharecap.Instance(np.diag([-1.0, 1.0]).astype(complex), 1.0)
    with pytest.raises(ValueError):
        sharecap.Instance(np.eye(2, dtype=complex), 0.0)
