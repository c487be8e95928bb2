"""Named run configurations (flat settings applied on top of the defaults)."""

RUN_PRESETS = {
    # uniform magnetization, no forcing: the trajectory must stay constant
    "minimal": {
        "mesh.n": "2", "scheme.k": "0.05", "scheme.T": "0.5",
        "initial.m0": "uniform", "initial.direction": "0 0 1",
    },
    # constant applied field, anisotropy in place of the stray field
    "llg-relax": {
        "mesh.n": "4", "scheme.k": "0.0125", "scheme.T": "1.0", "scheme.strategy": "AB",
        "pi.kind": "anisotropy", "pi.c_K": "1.0", "pi.axis": "1 0 0",
        "applied.kind": "constant", "applied.value": "-2 -0.5 0",
        "initial.m0": "uniform", "initial.direction": "1 0 0",
    },
    # eddy-current coupled run with the C^1 ramp on a centered magnet
    "ellg-ramp": {
        "mesh.n": "4", "mesh.inner_lo": "0.375 0.375 0.375", "mesh.inner_hi": "0.625 0.625 0.625",
        "mesh.inner_cells": "2",
        "scheme.k": "0.00390625", "scheme.T": "1.75", "scheme.strategy": "AB",
        "applied.kind": "ramp", "applied.direction": "1 0 0", "applied.time_scale": "1.0",
        "initial.m0": "uniform", "initial.direction": "-1 -1 -1", "initial.h0": "minus_m",
        "ellg.enabled": "true", "ellg.mu0": "1", "ellg.sigma.inner": "100", "ellg.sigma.outer": "1",
        "ellg.coupling": "DC2", "ellg.relax_T": "1.0", "ellg.relax_k": "0.00390625",
        "output.every": "8", "output.vtk_every": "112",
    },
}
