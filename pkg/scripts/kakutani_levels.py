"""||A_m - A|| and D_m for every level of the Kakutani family at several truncations."""
import math

from stabilab.kakutani import (KakutaniParams, build_stabilized, build_unstable, estimate_Dm,
                               perturbation_norms)

print("N,m,norm_B,log_D,t_peak")
for N in (16, 64, 256):
    p = KakutaniParams(N=N)
    A = build_unstable(p)
    norms = perturbation_norms(p, A)
    for m in range(1, p.m_max + 1):
        d = estimate_Dm(build_stabilized(p, m), p.omega)
        print(f"{N},{m},{norms[m]!r},{d.log_value!r},{d.t_peak!r}")
print(f"# growth rate log(R + M/K) = {math.log(0.9 + 0.5)!r}")
