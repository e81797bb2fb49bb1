"""
How much smaller is the subpacketization?
=========================================

Compare packets per file against the all-subsets baseline on the symmetric
family D_T = D_R = d, t_R = t, t_T = delta * t.  The sweep CSV has one row
per point; plot log G against t to see the curves.
"""

# %%
import io
import math

from hcbcache.analytics import G_of, grid_sweep, lambda_sequence, write_sweep_csv

for delta in (1, 2):
    print(f"delta = {delta}")
    for d in (3, 4, 5):
        logs = [math.log10(G_of(d, t, delta)) for t in range(1, 9)]
        print(f"  d={d}: " + " ".join(f"{x:7.2f}" for x in logs))

# %%
# The baseline-over-hypercube ratio of packets per subfile factors into a
# decreasing sequence of terms that never drop below one.
print([str(x) for x in lambda_sequence(4, 5, 1)])

# %%
buf = io.StringIO()
write_sweep_csv(grid_sweep([3, 4], [1, 2, 3], [1, 2]), buf)
print(buf.getvalue())
