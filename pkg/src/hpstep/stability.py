"""Spectral analysis of the one-step time-stepping map.

For a homogeneous linear problem (zero boundary data, zero source) the map
``M: u^n -> u^{n+1}`` is assembled densely, one canonical basis field per
column, and its spectrum is examined: modulus bound, spectral radius and the
count of (near-)zero eigenvalues.  Interface DOFs of the backward Euler map
contribute one exact zero eigenvalue per interface: the body load of the
implicit solve never reads interface values, so the map annihilates fields
supported there.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedConfigurationError
from .linalg import eig_general
from .timestep import TimeStepper

#: dense assembly guard: refuse maps beyond this many free DOFs
MAX_FREE_DOFS = 4000

#: basis fields are stepped in blocks so each block shares one sweep
_BLOCK = 64


@dataclass
class StepMapSpectrum:
    """Eigenvalues and summary statistics of one assembled step map."""

    eigenvalues: np.ndarray
    spectral_radius: float
    zero_count: int
    zero_tol: float
    dt: float
    scheme: str
    problem: str
    n_free: int = 0
    formulation: str = "stage"
    extras: dict = field(default_factory=dict)


def _require_homogeneous(problem, tree):
    pts = tree.points[:: max(1, tree.N // 64)]
    bpts = tree.points[tree.boundary_ids]
    if problem.g is not None:
        raise UnsupportedConfigurationError(
            "step-map assembly requires a linear problem (g must be None)")
    if problem.q is not None and np.max(np.abs(problem.q(0.37, pts))) > 0:
        raise UnsupportedConfigurationError(
            "step-map assembly requires a zero source")
    if problem.f is not None and np.max(np.abs(problem.f(0.37, bpts))) > 0:
        raise UnsupportedConfigurationError(
            "step-map assembly requires homogeneous boundary data")


def assemble_step_map(tree, problem, tableau, dt, formulation="stage",
                      disc=None):
    """Dense one-step map on the non-boundary DOFs.

    Column ``j`` is one step applied to the j-th canonical basis field
    (boundary DOFs are pinned to zero and excluded from the map).
    """
    _require_homogeneous(problem, tree)
    free = tree.free_ids
    n = free.size
    if n > MAX_FREE_DOFS:
        raise UnsupportedConfigurationError(
            f"step map has {n} free DOFs, exceeding the dense-assembly "
            f"limit of {MAX_FREE_DOFS}")
    stepper = TimeStepper(tree, problem, tableau, dt,
                          formulation=formulation, disc=disc)
    M = np.empty((n, n))
    for start in range(0, n, _BLOCK):
        cols = np.arange(start, min(start + _BLOCK, n))
        basis = np.zeros((cols.size, tree.N))
        basis[np.arange(cols.size), free[cols]] = 1.0
        if stepper.pair.s == 1:
            out = stepper._step_backward_euler(0.0, basis)
        elif formulation == "stage":
            out = stepper._step_stage(0.0, basis)
        else:
            out = stepper._step_slope(0.0, basis)
        M[:, cols] = out[:, free].T
    return M


def analyze(M, dt=0.0, scheme="", problem="", formulation="stage"):
    """Spectrum, spectral radius and zero-eigenvalue count of a step map."""
    values, _ = eig_general(M)
    rho = float(np.abs(values).max()) if values.size else 0.0
    zero_tol = 1e-8 * max(1.0, rho)
    order = np.lexsort((np.angle(values), -np.abs(values)))
    values = values[order]
    return StepMapSpectrum(
        eigenvalues=values,
        spectral_radius=rho,
        zero_count=int(np.sum(np.abs(values) < zero_tol)),
        zero_tol=zero_tol,
        dt=dt,
        scheme=scheme,
        problem=problem,
        n_free=M.shape[0],
        formulation=formulation,
    )


def spectrum_csv_lines(spec):
    """CSV rows (re, im, modulus) with a metadata header line."""
    lines = [
        f"# scheme={spec.scheme} formulation={spec.formulation} "
        f"dt={spec.dt:.17g} n_free={spec.n_free} "
        f"spectral_radius={spec.spectral_radius:.17g} "
        f"zero_count={spec.zero_count} problem={spec.problem}",
        "re,im,modulus",
    ]
    for lam in spec.eigenvalues:
        lines.append(f"{lam.real:.17g},{lam.imag:.17g},{abs(lam):.17g}")
    return lines


def write_spectrum_csv(spec, path):
    with open(path, "w") as fh:
        fh.write("\n".join(spectrum_csv_lines(spec)) + "\n")
