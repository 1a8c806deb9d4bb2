"""
Spherical wedges and the anti-concentration-on-wedges (ACW) audit.

A wedge W(u, v) is the set of directions w whose inner products with u and v
have opposite signs (sign(0) = +1). A measure is ACW(theta, alpha) when
lambda_min(E aa^T - 4 E aa^T 1_W(a)) >= alpha / n for every wedge of angle
below theta. For a finite measurement set the audit can only sample wedges,
so every report is an estimate, never a certificate.
"""
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from config import AUDIT_CONFIG
from core_math import SymMatrix, UnitVector, angle_between, sample_uniform_sphere, signum, sym_eig
from errors import InvalidDimensionError, InvalidParameterError
from logger import get_logger

logger = get_logger(__name__)

WEDGE_COLUMNS = ['theta', 'mu_A', 'margin', 'refined']
BATCH_SIZE = 50


@dataclass(frozen=True, eq=False)
class Wedge:
    u: UnitVector
    v: UnitVector
    theta: float = field(init=False)

    def __post_init__(self):
        u = self.u if isinstance(self.u, UnitVector) else UnitVector.normalized(self.u)
        v = self.v if isinstance(self.v, UnitVector) else UnitVector.normalized(self.v)
        if u.n != v.n:
            raise InvalidDimensionError(f"wedge normals have lengths {u.n} and {v.n}")
        theta = angle_between(u.coords, v.coords)
        if not 0.0 < theta < math.pi:
            raise InvalidParameterError(f"wedge normals must not be parallel, angle is {theta}")
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'v', v)
        object.__setattr__(self, 'theta', theta)

    @property
    def n(self):
        return self.u.n

    def members(self, rows):
        """Boolean membership mask for the rows of a matrix"""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        return signum(rows @ self.u.coords) != signum(rows @ self.v.coords)


def wedge_membership(w, wedge):
    w = np.asarray(w, dtype=float)
    return signum(float(w @ wedge.u.coords)) != signum(float(w @ wedge.v.coords))


def canonical_wedge(theta, n):
    """Wedge with normals (cos t/2, +-sin t/2, 0, ...); e1 bisects them"""
    if n < 2:
        raise InvalidDimensionError(f"wedges need n >= 2, got {n}")
    u, v = np.zeros(n), np.zeros(n)
    u[0] = v[0] = math.cos(theta / 2)
    u[1], v[1] = math.sin(theta / 2), -math.sin(theta / 2)
    return Wedge(UnitVector(u), UnitVector(v))


def sample_wedge(n, theta_max, rng):
    """Uniform u, then v at a uniform angle in (0, theta_max] inside a random 2-plane through u"""
    if n < 2:
        raise InvalidDimensionError(f"wedges need n >= 2, got {n}")
    if not 0 < theta_max < math.pi:
        raise InvalidParameterError(f"wedge angle must lie in (0, pi), got {theta_max}")
    u = sample_uniform_sphere(n, rng).coords
    g = rng.standard_normal(n)
    g -= (g @ u) * u
    while np.linalg.norm(g) < 1e-12:
        g = rng.standard_normal(n)
        g -= (g @ u) * u
    g /= np.linalg.norm(g)
    phi = theta_max * (1.0 - rng.uniform())
    return Wedge(UnitVector(u), UnitVector.normalized(math.cos(phi) * u + math.sin(phi) * g))


def uniform_wedge_moments(theta, n):
    """E aa^T 1_W(a) for the uniform sphere measure, in the canonical frame"""
    if n < 2:
        raise InvalidDimensionError(f"wedge moments need n >= 2, got {n}")
    if not 0 < theta < math.pi:
        raise InvalidParameterError(f"wedge angle must lie in (0, pi), got {theta}")
    scale = n * math.pi
    diagonal = np.full(n, theta / scale)
    diagonal[0] = (theta - math.sin(theta)) / scale
    diagonal[1] = (theta + math.sin(theta)) / scale
    return SymMatrix.diagonal(diagonal)


def lambda_max_uniform(theta, n):
    return (theta + math.sin(theta)) / (n * math.pi)


def decrement_bound_uniform(theta, n):
    """1 - (1 - 4 (theta + sin theta) / pi) / n"""
    if not 0 < theta < math.pi / 2:
        raise InvalidParameterError(f"decrement bound needs theta in (0, pi/2), got {theta}")
    return 1.0 - (1.0 - 4.0 * (theta + math.sin(theta)) / math.pi) / n


def decrement_bound_acw(alpha, n):
    return 1.0 - alpha / n


def empirical_wedge_measure(ms, wedge):
    """mu_A(W): fraction of rows inside the wedge"""
    return float(np.mean(wedge.members(ms.matrix)))


def empirical_wedge_matrix(ms, wedge):
    rows = ms.matrix[wedge.members(ms.matrix)]
    return SymMatrix(rows.T @ rows / ms.m)


def _second_moment(ms):
    return ms.matrix.T @ ms.matrix / ms.m


def _lambda_min_gap(ms, mask, second_moment):
    rows = ms.matrix[mask]
    eigenvalues, _ = sym_eig(second_moment - 4.0 * (rows.T @ rows) / ms.m)
    return float(eigenvalues[0])


def _margin(ms, wedge, second_moment):
    return ms.n * _lambda_min_gap(ms, wedge.members(ms.matrix), second_moment)


def acw_margin(ms, wedge):
    """n * lambda_min((1/m) A^T A - 4 (1/m) sum a_i a_i^T 1_W(a_i))"""
    return _margin(ms, wedge, _second_moment(ms))


def decrement_bound_empirical(ms, x, z):
    """1 - lambda_min(E aa^T - 4 E aa^T 1_W) for the wedge with normals x and z.

    Also defined when z is parallel to x: the wedge is empty for z = cx and
    holds every row off the hyperplane x-perp for z = -cx.
    """
    x = UnitVector.normalized(x).coords
    z = UnitVector.normalized(z).coords
    mask = signum(ms.matrix @ x) != signum(ms.matrix @ z)
    return 1.0 - _lambda_min_gap(ms, mask, _second_moment(ms))


@dataclass
class WedgeRecord:
    theta: float
    mu_A: float
    margin: float
    refined: bool = False


@dataclass
class AcwReport:
    """Empirical ACW estimate over the wedges tested"""
    theta: float
    alpha_target: float
    wedges_tested: int
    min_margin: float
    max_wedge_measure: float
    records: List[WedgeRecord] = field(default_factory=list)

    @property
    def measure_bound(self):
        return 2.0 * self.theta / math.pi

    @property
    def passed(self):
        return self.min_margin >= self.alpha_target and self.max_wedge_measure <= self.measure_bound

    @classmethod
    def from_records(cls, theta, alpha_target, records):
        if records:
            min_margin = min(r.margin for r in records)
            max_measure = max(r.mu_A for r in records)
        else:
            min_margin, max_measure = math.inf, 0.0
        return cls(theta, alpha_target, len(records), min_margin, max_measure, list(records))

    def to_frame(self):
        return pd.DataFrame([vars(r) for r in self.records], columns=WEDGE_COLUMNS)

    def to_dict(self):
        return {
            'kind': 'estimate',
            'theta': self.theta,
            'alpha_target': self.alpha_target,
            'wedges_tested': self.wedges_tested,
            'min_margin': self.min_margin,
            'max_wedge_measure': self.max_wedge_measure,
            'measure_bound': self.measure_bound,
            'pass': self.passed,
        }


def _evaluate_batch(ms, theta_max, rng, indices):
    second_moment = _second_moment(ms)
    evaluated = []
    for index in indices:
        wedge = sample_wedge(ms.n, theta_max, rng.child(index))
        evaluated.append((wedge, WedgeRecord(wedge.theta, empirical_wedge_measure(ms, wedge),
                                             _margin(ms, wedge, second_moment))))
    return evaluated


def _sample_and_evaluate(ms, theta_max, num_wedges, rng, n_jobs):
    batches = [range(start, min(start + BATCH_SIZE, num_wedges))
               for start in range(0, num_wedges, BATCH_SIZE)]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_evaluate_batch)(ms, theta_max, rng, batch) for batch in batches
    )
    return [item for batch in results for item in batch]


def _rotate_toward(vector, axis, step):
    """Turn `vector` by angle `step` toward coordinate axis `axis`"""
    tangent = -vector[axis] * vector
    tangent[axis] += 1.0
    norm = np.linalg.norm(tangent)
    if norm < 1e-12:
        return None
    return math.cos(step) * vector + math.sin(step) * tangent / norm


def refine_wedge(ms, wedge, theta, objective, steps=None, step_size=None):
    """Coordinate-wise angular perturbation descent on objective(wedge).

    Each step cycles to the next coordinate and tries turning u or v by
    +-step_size toward it, keeping the wedge angle <= theta; the step is
    halved whenever no candidate lowers the objective.
    """
    steps = AUDIT_CONFIG['refine_steps'] if steps is None else steps
    step_size = theta * AUDIT_CONFIG['refine_step_fraction'] if step_size is None else step_size
    best, best_value = wedge, objective(wedge)
    for step in range(steps):
        axis = step % ms.n
        improved = False
        for which in ('u', 'v'):
            for sign in (1.0, -1.0):
                base = getattr(best, which).coords
                turned = _rotate_toward(base, axis, sign * step_size)
                if turned is None:
                    continue
                u, v = (turned, best.v.coords) if which == 'u' else (best.u.coords, turned)
                try:
                    candidate = Wedge(UnitVector.normalized(u), UnitVector.normalized(v))
                except InvalidParameterError:
                    continue
                if candidate.theta > theta:
                    continue
                value = objective(candidate)
                if value < best_value:
                    best, best_value, improved = candidate, value, True
        if not improved:
            step_size /= 2.0
    return best


def audit(ms, theta, alpha_target=None, num_wedges=None, rng=None, refine=False, n_jobs=1):
    """Estimate the ACW(theta, alpha) margin and the worst wedge measure of an instance"""
    alpha_target = AUDIT_CONFIG['alpha_target'] if alpha_target is None else alpha_target
    num_wedges = AUDIT_CONFIG['num_wedges'] if num_wedges is None else num_wedges
    if num_wedges < 1:
        raise InvalidParameterError(f"need at least one wedge, got {num_wedges}")
    if rng is None:
        raise InvalidParameterError("audit needs an Rng for wedge sampling")

    evaluated = _sample_and_evaluate(ms, theta, num_wedges, rng, n_jobs)
    records = [record for _, record in evaluated]

    if refine:
        second_moment = _second_moment(ms)
        worst_margin = min(evaluated, key=lambda item: item[1].margin)[0]
        worst_measure = max(evaluated, key=lambda item: item[1].mu_A)[0]
        candidates = (
            refine_wedge(ms, worst_margin, theta, lambda w: _margin(ms, w, second_moment)),
            refine_wedge(ms, worst_measure, theta, lambda w: -empirical_wedge_measure(ms, w)),
        )
        for wedge in candidates:
            records.append(WedgeRecord(wedge.theta, empirical_wedge_measure(ms, wedge),
                                       _margin(ms, wedge, second_moment), refined=True))

    report = AcwReport.from_records(theta, alpha_target, records)
    logger.info("ACW audit finished", theta=theta, wedges=report.wedges_tested,
                min_margin=report.min_margin, max_wedge_measure=report.max_wedge_measure,
                passed=report.passed)
    return report


def audit_grid(ms, thetas, alpha_target=None, num_wedges=None, rng=None, n_jobs=1):
    """Audits over a theta grid sharing one nested wedge family.

    Wedges are drawn once at the largest theta; the family for each theta is
    the sub-family of angle <= theta, so min_margin is non-increasing and
    max_wedge_measure non-decreasing along the grid.
    """
    alpha_target = AUDIT_CONFIG['alpha_target'] if alpha_target is None else alpha_target
    num_wedges = AUDIT_CONFIG['num_wedges'] if num_wedges is None else num_wedges
    thetas = sorted(thetas)
    if not thetas:
        raise InvalidParameterError("theta grid is empty")
    evaluated = _sample_and_evaluate(ms, thetas[-1], num_wedges, rng, n_jobs)
    return [AcwReport.from_records(theta, alpha_target,
                                   [record for _, record in evaluated if record.theta <= theta])
            for theta in thetas]
