"""
Hypercube cache placement on a 4x4 network
===========================================

Four transmitters and four receivers, four files, every node stores half of
the library.  Each file is cut into 16 subfiles, one per (transmitter pair,
receiver pair) with one node taken from each hypercube dimension.
"""

# %%
from hcbcache import NetworkConfig, cache_manifest, split_files, validate_config
from hcbcache.placement import manifest_text, verify_memory_budget

p = validate_config(NetworkConfig(K_T=4, K_R=4, M_T=2, M_R=2, N=4))
print("t_T, t_R =", p.t_T, p.t_R, " D_T, D_R =", p.D_T, p.D_R)
print("subfiles per file:", p.subfiles_per_file)

# %%
# File A and the subfiles it is split into.
print(" ".join(s.label() for s in split_files(p) if s.file == 0))

# %%
# Transmitter 0 sits in the first transmitter dimension {0, 1}; it keeps every
# subfile whose transmitter pair starts with 0, i.e. half of each file.
tx0 = cache_manifest(p, "tx", 0)
print(len(tx0.subfiles), "subfiles cached, budget met:", verify_memory_budget(p, tx0))
print(manifest_text(tx0).splitlines()[:6])

# %%
# Receivers work the same way on their own hypercube.
for k in range(p.K_R):
    m = cache_manifest(p, "rx", k)
    print(f"Rx{k}:", " ".join(s.label() for s in m.subfiles if s.file == 0))
