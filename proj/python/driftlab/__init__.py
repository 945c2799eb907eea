"""Numerical laboratory for diffusions with singular drift.

The heavy lifting happens in the C++ extension `_core`; this package
re-exports its operations.
"""

from ._core import (  # noqa: F401
    DriftlabError,
    Field,
    MollifiedField,
    __version__,
    build_approximation,
    duality_gap,
    estimate_form_bound,
    eval_drift,
    heat_oracle_rel_error,
    l2loc_distance,
    make_field,
    sharp_sobolev_constant,
    simulate,
    solve_forward,
    strichartz_delta,
    unit_ball_volume,
    verify,
)
