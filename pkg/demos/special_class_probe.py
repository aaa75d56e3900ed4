"""Why B2 falls outside the special class: its terminal cost reads x(T - h),
which a narrow bump can move without moving |x(T)| + L2 norm much.

Run: python demos/special_class_probe.py
"""
from pathlip.hamiltonian import make_benchmark
from pathlip.paths import Horizon
from pathlip.verify import probe_special_class

hz = Horizon(1, 1.0, 0.5, 0.01)
for name in ("B1", "B2", "B3"):
    probe = probe_special_class(make_benchmark(name, hz).sigma, hz)
    ratios = ", ".join(f"{w:g}:{r:.3g}" for w, r in zip(probe["widths"], probe["ratios"]))
    print(f"{name}: diverging={probe['diverging']}  width:ratio {ratios}")
