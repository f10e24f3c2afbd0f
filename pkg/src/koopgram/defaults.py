"""Versioned defaults for the demo reproductions and their pass/fail thresholds.

Every numeric tolerance used by ``koopgram demo`` lives here; the CLI can
override any entry of ``THRESHOLDS`` with ``--threshold name=value``.
"""

THRESHOLDS_VERSION = "2026.10-1"

DEMO = {
    "x0": (0.3, 0.3),
    "train_lo": -0.5,
    "train_hi": 0.5,
    "train_grid": (5, 4),
    "train_length": 30,
    "zeta": 0.0,
    "example1_test_horizon": 25,
    # h(f(x)) and h(f(f(x))) are dictionary entries, so the outputs at t = 1, 2
    # carry no weight on the state coordinates; t = 3 is the first step that does.
    "example1_obs_horizon": 3,
    "example2_systems": 20,
    "example2_state_dim": 3,
    "example2_output_dim": 1,
    "example2_finite_horizon": 50,
    "example3_horizon": 50,
    "example3_ctrl_horizon": 0,
    "example4_gramian_horizon": 20,
    "example4_orders": (2, 6, 12),
}

# name -> (threshold, comparison, provenance)
THRESHOLDS = {
    "example1.one_step_eps": (1e-3, "<=", "reference-pattern"),
    "example1.proj_obs_sign_pattern": (None, "==", "reference-pattern"),
    "example1.proj_obs_diag_order": (None, "==", "reference-pattern"),
    "example2.linear_equivalence_maxdiff": (1e-10, "<=", "oracle"),
    "example3.with_control_eps": (1e-4, "<=", "reference-pattern"),
    "example3.open_loop_eps": (0.5, ">=", "reference-pattern"),
    "example3.ctrl_gram_ratio": (1e-6, "<=", "reference-pattern"),
    "example3.phi_c_x2_row_max": (1e-6, "<=", "reference-pattern"),
    "example4.hsv_gap_9_10": (10.0, ">=", "reference-pattern"),
    "example4.reduced_error_monotone": (None, "==", "reference-pattern"),
    "example4.full_order_error": (1e-8, "<=", "oracle"),
    "example4.reduced_order2_error": (None, "<=bound", "reference-pattern"),
}

# Reference values for the normalized projected gramian; reported as info, not gated.
REFERENCE_PROJ_OBS = ((0.69, -0.31), (-0.31, 0.14))
REFERENCE_PROJ_OBS_TOL = 0.25
