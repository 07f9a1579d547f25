"""Tour of the worst-case purity oracle on the built-in encoder families.

Shows the grid-plus-refinement minimum for each family under the doubled
bit-flip and amplitude-damping channels, and cross-validates the numeric
path against the closed-form purity expressions where one applies.

Runs in a few seconds.
"""

from purityopt import OracleConfig, worst_case_purity
from purityopt.oracle import cross_validate
from purityopt.zoo import builtin_channel, builtin_encoder

bf2 = builtin_channel("bitflip2", p=0.1)
ad2 = builtin_channel("ad2", p=0.1)

print("double bit flip, p=0.1")
for name in ("a", "b", "c", "repetition"):
    enc = builtin_encoder(name)
    res = worst_case_purity(bf2, enc, OracleConfig(input_model="real_qubit"))
    print(f"  encoder {name:<10} min purity {res.min_purity:.6f} "
          f"at angle {res.argmin_params[0]:.4f}")

print("\ndouble amplitude damping, p=0.1")
for name, kwargs in (("d", {"alpha": 0.3, "beta": 0.0}),
                     ("e", {"alpha": 0.5}),
                     ("f", {"alpha": 0.2, "beta": 0.4})):
    enc = builtin_encoder(name, **kwargs)
    res = worst_case_purity(ad2, enc, OracleConfig(input_model="real_qubit"))
    args = ", ".join(f"{k}={v}" for k, v in kwargs.items())
    print(f"  encoder {name}({args:<18}) min purity {res.min_purity:.6f}")

print("\ncross-validation against closed forms (100 random inputs each)")
for channel, name, p in ((bf2, "a", 0.1), (bf2, "c", 0.1), (ad2, "d", 0.1)):
    rep = cross_validate(channel, builtin_encoder(name), p=p)
    print(f"  family {rep.analytic_family}: max deviation "
          f"{rep.max_deviation:.2e}, minimum {rep.min_purity_grid:.6f} "
          f"(analytic {rep.min_purity_analytic:.6f})")
