"""Inspect the compiled feasibility problem for one fixed encoder.

Builds the nonnegativity certificate for the doubled bit-flip channel,
prints the block layout, pins the encoder variables to a known family
member, and asks the SDP for the smallest worst-case error the certificate
can sign off. The answer reproduces 1 - 0.82 = 0.18 for family a.

Also round-trips the frozen problem through the SDPA sparse text format.

Runs in a few seconds.
"""

import os
import tempfile

import numpy as np

from purityopt import (
    DecisionLayout,
    assemble_problem,
    fix_variables,
    kraus_to_superop,
    make_sos_context,
    read_sdpa,
    solve_sdp,
    write_sdpa,
)
from purityopt.zoo import builtin_channel, builtin_encoder

channel = builtin_channel("bitflip2", p=0.1)
ctx = make_sos_context(kraus_to_superop(channel), 2, "real_qubit")
layout = DecisionLayout(n=4, r=2, num_tau=len(ctx.S_basis))

objective = np.zeros(layout.num_vars)
objective[layout.eps_index] = 1.0
problem = assemble_problem(ctx, layout, objective)

lmi = problem.psd_constraints[0]
print(f"decision variables: {layout.num_vars} "
      f"({2 * layout.num_e} encoder reals, 1 eps, {layout.num_tau} tau)")
print(f"certificate block:  {lmi.dim}x{lmi.dim}")
print(f"channel-set block:  {problem.psd_constraints[1].dim}x"
      f"{problem.psd_constraints[1].dim}")
print(f"equality rows:      {problem.eq_matrix.shape[0]}")

enc = builtin_encoder("a").kraus
big = np.kron(enc, enc.conj())
fixed = {}
for a in range(16):
    for b in range(4):
        fixed[layout.re_index(a, b)] = big[a, b].real
        fixed[layout.im_index(a, b)] = big[a, b].imag
reduced, keep = fix_variables(problem, fixed)
sol = solve_sdp(reduced, tol=1e-8)
eps = float(sol.x[list(keep).index(layout.eps_index)])
print(f"\nminimum certified eps for encoder a: {eps:.6f} (oracle says 0.18)")

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "frozen.dat-s")
    write_sdpa(reduced, path)
    size = os.path.getsize(path)
    back = read_sdpa(path)
    assert back.num_vars == reduced.num_vars
    assert np.array_equal(back.objective, reduced.objective)
    print(f"SDPA export: {size} bytes, {back.num_vars} variables, "
          f"blocks {back.block_dims}")
