"""Tests for energy norms, reference files, relative errors and field export."""

import csv

import numpy as np
import pytest

from deephvi.exceptions import ContractViolation, DomainMismatchError, ReferenceFormatError
from deephvi.modules.evaluation import (
    EXPORT_COLUMNS,
    REFERENCE_COLUMNS,
    ReferenceSolution,
    accuracy_improvement,
    energy_norm,
    estimate_energy,
    export_field,
    midpoint_nodes,
    midpoint_reference,
    network_reference,
    relative_error,
    write_export,
)
from deephvi.modules.network import evaluate_field
from deephvi.modules.problems import COMPLIANCE_LAW


def _zero_outputs(theta):
    values = theta.values.copy()
    for e in theta.layout.entries:
        if e.role == "a":
            values[e.start:e.stop] = 0.0
    return theta.with_values(values)


def _write_reference(path, rows, header=REFERENCE_COLUMNS, comments=()):
    with open(path, "w", newline="") as f:
        for line in comments:
            f.write(line + "\n")
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    return path


class TestEnergyNorm:
    def test_uniaxial_stretch(self):
        lam, two_mu = COMPLIANCE_LAW.coefficients()
        grads = np.zeros((4, 2, 2))
        grads[:, 0, 0] = 1.0
        weights = np.full(4, 0.25)
        assert energy_norm(COMPLIANCE_LAW, grads, weights) == pytest.approx(
            np.sqrt((lam + two_mu) / 2.0)
        )

    def test_rigid_motion_has_zero_norm(self):
        grads = np.zeros((3, 2, 2))
        grads[:, 0, 1] = 1.0
        grads[:, 1, 0] = -1.0
        assert energy_norm(COMPLIANCE_LAW, grads, np.ones(3)) == pytest.approx(0.0, abs=1e-12)

    def test_needs_nodes(self):
        with pytest.raises(ContractViolation):
            energy_norm(COMPLIANCE_LAW, np.zeros((0, 2, 2)), np.zeros(0))


class TestReferenceSolution:
    def test_midpoint_nodes_cover_domain(self, bilateral):
        points, weights = midpoint_nodes(bilateral, 4)
        assert points.shape == (16, 2)
        assert weights.sum() == pytest.approx(16.0)
        assert points.min() == pytest.approx(0.5)
        assert points.max() == pytest.approx(3.5)

    def test_manufactured_reference(self, manufactured):
        ref = midpoint_reference(manufactured, n=8)
        assert len(ref) == 64
        ref.check_domain(manufactured)
        assert ref.metadata["method"] == "exact-midpoint"

    def test_no_closed_form(self, bilateral):
        with pytest.raises(ContractViolation):
            midpoint_reference(bilateral)

    def test_csv_round_trip_keeps_metadata(self, manufactured, tmp_path):
        ref = midpoint_reference(manufactured, n=3)
        loaded = ReferenceSolution.load_csv(ref.save_csv(tmp_path / "ref.csv"))
        np.testing.assert_array_equal(loaded.points, ref.points)
        np.testing.assert_array_equal(loaded.gradients, ref.gradients)
        assert loaded.metadata == {"method": "exact-midpoint", "n": "3"}

    def test_bad_header(self, tmp_path):
        path = _write_reference(
            tmp_path / "ref.csv", [[0.5, 0.5, 1, 0, 0, 0, 0, 0, 0]], header=("x", "y", "w")
        )
        with pytest.raises(ReferenceFormatError):
            ReferenceSolution.load_csv(path)

    def test_wrong_column_count(self, tmp_path):
        path = _write_reference(tmp_path / "ref.csv", [[0.5, 0.5, 1.0]])
        with pytest.raises(ReferenceFormatError):
            ReferenceSolution.load_csv(path)

    def test_non_numeric_entry(self, tmp_path):
        path = _write_reference(tmp_path / "ref.csv", [[0.5, 0.5, 1, "a", 0, 0, 0, 0, 0]])
        with pytest.raises(ReferenceFormatError):
            ReferenceSolution.load_csv(path)

    def test_comment_metadata(self, tmp_path):
        path = _write_reference(
            tmp_path / "ref.csv",
            [[0.5, 0.5, 1, 0, 0, 1, 0, 0, 0]],
            comments=("# solver=fem mesh=200x200",),
        )
        assert ReferenceSolution.load_csv(path).metadata == {"solver": "fem", "mesh": "200x200"}

    def test_weights_must_match_area(self, compliance):
        ref = ReferenceSolution(
            np.array([[0.5, 0.5]]), np.array([0.9]), np.zeros((1, 2)), np.ones((1, 2, 2))
        )
        with pytest.raises(DomainMismatchError):
            ref.check_domain(compliance)

    def test_nodes_must_lie_in_domain(self, compliance):
        ref = ReferenceSolution(
            np.array([[0.5, 1.5]]), np.array([1.0]), np.zeros((1, 2)), np.ones((1, 2, 2))
        )
        with pytest.raises(DomainMismatchError):
            ref.check_domain(compliance)

    def test_shape_and_weight_validation(self):
        with pytest.raises(ReferenceFormatError):
            ReferenceSolution(np.zeros((2, 2)), np.ones(3), np.zeros((2, 2)), np.zeros((2, 2, 2)))
        with pytest.raises(ReferenceFormatError):
            ReferenceSolution(np.zeros((1, 2)), np.array([-1.0]), np.zeros((1, 2)), np.zeros((1, 2, 2)))


class TestRelativeError:
    def test_self_reference_has_zero_error(self, compliance, tiny_theta):
        ref = network_reference(tiny_theta, compliance, n=6)
        report = relative_error(tiny_theta, compliance, ref)
        assert report.relative_error == pytest.approx(0.0, abs=1e-12)
        assert report.energy_norm_ref > 0.0

    def test_zero_field_has_unit_error(self, manufactured, tiny_theta):
        ref = midpoint_reference(manufactured, n=10)
        report = relative_error(_zero_outputs(tiny_theta), manufactured, ref)
        assert report.relative_error == pytest.approx(1.0)
        assert report.energy_norm_diff == pytest.approx(report.energy_norm_ref)

    def test_zero_reference_is_rejected(self, compliance, tiny_theta):
        points, weights = midpoint_nodes(compliance, 2)
        ref = ReferenceSolution(points, weights, np.zeros((4, 2)), np.zeros((4, 2, 2)))
        with pytest.raises(ContractViolation):
            relative_error(tiny_theta, compliance, ref)

    def test_improvement(self):
        assert accuracy_improvement(0.0481, 0.0282) == pytest.approx((0.0481 - 0.0282) / 0.0481)
        with pytest.raises(ContractViolation):
            accuracy_improvement(0.0, 0.1)


class TestExport:
    def test_rows_and_contact_traces(self, bilateral, tiny_theta):
        rows = export_field(tiny_theta, bilateral, resolution=5)
        domain = [r for r in rows if r.section == "domain"]
        contact = [r for r in rows if r.section == "contact"]
        assert len(domain) == 25
        assert len(contact) == 5
        assert all(r.u_nu is None for r in domain)
        for r in contact:
            assert r.y == 0.0
            assert r.u_nu == pytest.approx(-r.u2)
            assert r.u_tau == pytest.approx(r.u1)

    def test_values_match_field(self, compliance, tiny_theta):
        rows = export_field(tiny_theta, compliance, resolution=3)
        values, _ = evaluate_field(tiny_theta, compliance.mask, np.array([[r.x, r.y] for r in rows[:9]]))
        np.testing.assert_allclose([[r.u1, r.u2] for r in rows[:9]], values)

    def test_write_export(self, manufactured, tiny_theta, tmp_path):
        path = write_export(tmp_path / "field.csv", export_field(tiny_theta, manufactured, 2))
        with open(path, newline="") as f:
            lines = list(csv.reader(f))
        assert tuple(lines[0]) == EXPORT_COLUMNS
        assert len(lines) == 1 + 4
        assert lines[1][5] == "" and lines[1][6] == ""

    def test_resolution_must_be_at_least_two(self, compliance, tiny_theta):
        with pytest.raises(ContractViolation):
            export_field(tiny_theta, compliance, 1)


def test_estimate_energy_is_seeded(compliance, tiny_theta):
    a = estimate_energy(tiny_theta, compliance, n=64, seed=3, chunks=2)
    b = estimate_energy(tiny_theta, compliance, n=64, seed=3, chunks=4)
    assert a.total == pytest.approx(b.total, rel=1e-10)
    assert a.is_finite()
