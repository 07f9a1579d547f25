"""Three-dimensional codespace inside three bit-flip qubits.

With r > 2 the input-state scan is inexact (the nonnegativity certificate
covers a relaxation), so a certified run reports a lower bound on the
worst-case purity rather than a local optimum. The oracle then probes the
actual encoder; its minimum must sit at or above the claim.

Takes about half a minute.
"""

from purityopt import (
    HeuristicConfig,
    OracleConfig,
    run,
    worst_case_purity,
)
from purityopt.zoo import make_bit_flip, tensor_power

channel = tensor_power(make_bit_flip(0.1), 3)
config = HeuristicConfig(gamma=10.0, max_iters=60, obj_tol=1e-6, seed=0)
result = run(channel, 3, "general_r", config)

print(f"classification: {result.classification}")
print(f"lower bound:    {result.lower_bound}")
claim = 1.0 - result.epsilon
print(f"claimed purity: {claim:.6f} (lower bound)")

oracle = worst_case_purity(channel, result.encoder,
                           OracleConfig(input_model="general_r"))
print(f"oracle minimum: {oracle.min_purity:.6f}")
print(f"slack:          {oracle.min_purity - claim:+.2e} (must be >= -2e-3)")
print(f"worst input:    {[round(a, 4) for a in oracle.argmin_params]}")
