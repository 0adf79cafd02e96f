"""Regenerates the small fixture files in this directory.

Run from anywhere: python3 make_data.py
"""
import math
import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))

# CODATA / SI exact values
CAL = 4.184
N_A = 6.02214076e23


def write(name, text):
    with open(os.path.join(HERE, name), "w") as f:
        f.write(text)


def chain_h():
    write("chainH.cif", """data_chainH
_cell_length_a 1.45
_cell_length_b 10
_cell_length_c 10
_cell_angle_alpha 90
_cell_angle_beta 90
_cell_angle_gamma 90
loop_
_atom_site_label
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
C1 C 0 0 0
H1 H 0 0.109 0
""")


def benzene():
    L = 20.0
    rows = []
    for k in range(6):
        a = math.pi / 3 * k
        rows.append(("C%d" % (k + 1), "C", 1.39 * math.cos(a), 1.39 * math.sin(a)))
    for k in range(6):
        a = math.pi / 3 * k
        rows.append(("H%d" % (k + 1), "H", 2.48 * math.cos(a), 2.48 * math.sin(a)))
    lines = ["data_benzene", "_cell_length_a %r" % L, "_cell_length_b %r" % L,
             "_cell_length_c %r" % L, "_cell_angle_alpha 90", "_cell_angle_beta 90",
             "_cell_angle_gamma 90", "loop_", "_atom_site_label", "_atom_site_type_symbol",
             "_atom_site_fract_x", "_atom_site_fract_y", "_atom_site_fract_z"]
    for lab, el, x, y in rows:
        lines.append("%s %s %r %r 0.5" % (lab, el, 0.5 + x / L, 0.5 + y / L))
    write("benzene.cif", "\n".join(lines) + "\n")


def honeycomb():
    d = 1.42
    a, b, c = 3 * d, math.sqrt(3) * d, 10.0
    cart = [(0, 0), (d, 0), (1.5 * d, math.sqrt(3) / 2 * d), (2.5 * d, math.sqrt(3) / 2 * d)]
    lines = ["data_honeycomb", "_cell_length_a %r" % a, "_cell_length_b %r" % b,
             "_cell_length_c %r" % c, "_cell_angle_alpha 90", "_cell_angle_beta 90",
             "_cell_angle_gamma 90", "loop_", "_atom_site_label", "_atom_site_type_symbol",
             "_atom_site_fract_x", "_atom_site_fract_y", "_atom_site_fract_z"]
    for i, (x, y) in enumerate(cart):
        lines.append("C%d C %r %r 0" % (i + 1, x / a, y / b))
    write("honeycomb.cif", "\n".join(lines) + "\n")


def profile(name, kappa, slope_k_per_A, cross_section_A2=68.0, n_bins=100, length_A=70.0):
    """Invert Fourier's law: dE/dt = kappa * S * |dT/dL|."""
    w = length_A / n_bins
    q_watts = kappa * (cross_section_A2 * 1e-20) * (slope_k_per_A * 1e10)
    kcal_mol_fs_in_watts = 1000 * CAL / N_A * 1e15
    rate = q_watts / kcal_mol_fs_in_watts
    sources, sinks = [49, 50], [0, 99]
    rows = ["bin_index,temperature_K"]
    for i in range(n_bins):
        x = (i + 0.5) * w
        if i in sources or i in sinks:
            t = 300.0 + slope_k_per_A * (49.5 * w) if i in sources else 300.0
        elif i < 49:
            t = 300.0 + slope_k_per_A * x
        else:
            t = 300.0 + slope_k_per_A * (length_A - x)
        rows.append("%d,%r" % (i, t))
    write(name + ".csv", "\n".join(rows) + "\n")
    meta = {"n_bins": n_bins, "source_bins": sources, "sink_bins": sinks,
            "heat_rate_kcal_mol_fs": rate, "bin_width_A": w, "cross_section_A2": cross_section_A2}
    write(name + ".json", json.dumps(meta, indent=2) + "\n")


def sine_dump():
    n, f0, dt = 1024, 0.01, 5
    out = []
    for k in range(n):
        t = k * dt
        v = math.cos(2 * math.pi * f0 * t)
        out.append("ITEM: TIMESTEP\n%d\nITEM: NUMBER OF ATOMS\n1\n" % (k * 5))
        out.append("ITEM: BOX BOUNDS pp pp pp\n0 10\n0 10\n0 10\n")
        out.append("ITEM: ATOMS id type vx vy vz\n1 1 %r %r 0\n" % (v, -0.5 * math.sin(2 * math.pi * f0 * t)))
    write("sine_1024.dump", "".join(out))


def manifest():
    write("corrupt.cif", "data_corrupt\n_cell_length_a 10\n_cell_length_b -3\nloop_\n")
    write("manifest3.csv",
          "name,structure,profile_x,profile_y\n"
          "chainH,chainH.cif,synthetic_k1.csv,synthetic_k2.csv\n"
          "honeycomb,honeycomb.cif,synthetic_k1.csv,synthetic_k1.csv\n"
          "broken,corrupt.cif,synthetic_k1.csv,synthetic_k1.csv\n")
    write("manifest_empty.csv", "name,structure,profile_x,profile_y\n")


if __name__ == "__main__":
    chain_h()
    benzene()
    honeycomb()
    profile("synthetic_k1", 1.0, 0.5)
    profile("synthetic_k2", 2.0, 0.5)
    sine_dump()
    manifest()
