"""
Memory sharing for awkward parameters
=====================================

When t_T / t_R is not an integer, or t_T, t_R themselves are fractional,
memories and files are split into partitions that each run with integral
parameters.  The weighted DoF stays t_T + t_R.
"""

# %%
from hcbcache import NetworkConfig
from hcbcache.analytics import cap_excess_memory, plan_memory_sharing


def show(cfg):
    plan = plan_memory_sharing(cfg)
    print(f"t_T={cfg.t_T} t_R={cfg.t_R}: {plan.case}, DoF {plan.dof}")
    for q in plan.partitions:
        print(f"   weight {q.weight}: t_T'={q.t_T} t_R'={q.t_R} ({q.scheme})")


# %%
show(NetworkConfig(K_T=20, K_R=8, M_T=1, M_R=1, N=4))   # delta = 5/2
show(NetworkConfig(K_T=4, K_R=12, M_T=2, M_R=3, N=4))   # delta = 2/9
show(NetworkConfig(K_T=3, K_R=4, M_T=2, M_R=1, N=4))    # t_T = 3/2

# %%
# Too much memory: t_T + t_R > K_R.  Memories are shrunk until the sum hits K_R.
cap = cap_excess_memory(NetworkConfig(K_T=4, K_R=4, M_T=4, M_R=2, N=4))
print("capped memories:", cap.config.M_T, cap.config.M_R, "DoF", cap.params.step_size)
