#!/usr/bin/env python3
"""Independent evaluation of the closed-form model quantities.

Evaluated with mpmath at 50 digits, straight from the printed formulas, and
written to physics_pins.json. The C++ suite compares against that file; it
is regenerated only by hand.
"""
import json
import pathlib

from mpmath import mp, mpf, sqrt, exp, asin, pi, ceil, log10

mp.dps = 50

# rotor / airframe
W, g, nr = mpf(2), mpf("9.8"), 4
rho, A = mpf("1.225"), mpf("0.0314")
sig, cT, cs = mpf("0.012"), mpf("0.302"), mpf("0.0955")
d0, cf, SFP = mpf("0.834"), mpf("0.131"), mpf("0.0151")
tau, vmax = mpf("0.5"), mpf(20)

# channel
c, fc, Pc = mpf("3e8"), mpf("2e9"), mpf("5e-3")
sigma2 = mpf(10) ** (mpf(-110) / 10) / 1000
xi = mpf(10) ** (mpf(5) / 10)
eta_los, eta_nlos = mpf(10) ** mpf("0.16"), mpf(10) ** mpf("2.3")
b0, b1 = mpf("11.95"), mpf("0.14")
z = mpf(100)
varsigma = 2


def thrust(v, vn):
    a = (vn - v) / tau
    return sqrt((W * a + rho * v * v * SFP / 2) ** 2 + (W * g) ** 2) / nr


def energy(v, vn):
    T = thrust(v, vn)
    profile = sig / 8 * (T / (cT * rho * A) + 3 * v * v) * sqrt(T * rho * cs**2 * A / cT)
    parasite = d0 * rho * cs * A * v**3 / 2
    induced = (1 + cf) * T * sqrt(sqrt(T * T / (4 * rho * rho * A * A) + v**4 / 4) - v * v / 2)
    return tau * nr * (profile + parasite + induced)


def p_los(d):
    theta = 180 / pi * asin(z / d)
    return 1 / (1 + b0 * exp(-b1 * (theta - b0)))


def fspl(d):
    return (4 * pi * fc * d / c) ** varsigma


link = c / (4 * pi * fc) * sqrt(Pc / (xi * sigma2 * eta_nlos))
coverage = sqrt(link**2 - z**2)

cruise = energy(vmax, vmax)


def t_req_case1(dist, v):
    return 1 + int(ceil((dist - (vmax + v) * tau / 2) / (vmax * tau)))


def t_req_case2(dist, v):
    return 2 + int(ceil((dist + v * tau / 2 - vmax * tau / 2) / (vmax * tau)))


pins = {
    "thrust": {f"{v},{vn}": float(thrust(mpf(v), mpf(vn))) for v, vn in [(0, 0), (20, 20), (0, 20), (20, 0), (10, 15)]},
    "energy": {f"{v},{vn}": float(energy(mpf(v), mpf(vn))) for v, vn in [(0, 0), (20, 20), (0, 20), (20, 0), (10, 15)]},
    "e_bar": float(max(energy(mpf(a), mpf(b)) for a in (0, 20) for b in (0, 20))),
    "link_range": float(link),
    "coverage_radius": float(coverage),
    "los_probability": {str(d): float(p_los(mpf(d))) for d in (100, 150, 300, 1000)},
    "free_space_loss": {str(d): float(fspl(mpf(d))) for d in (100, 250)},
    "battery_example": float(mpf("3e-3") + mpf("0.42e-3") - Pc * tau),
    "t_req": {
        "at_stop_v0": t_req_case1(mpf(0), mpf(0)),
        "d105_v0": t_req_case1(mpf(105), mpf(0)),
        "d100_v20_opposite": t_req_case2(mpf(100), mpf(20)),
    },
    "e_req": {
        "at_stop_v0": float(energy(mpf(0), vmax)),
        "d105_v0": float(energy(mpf(0), vmax) + 10 * cruise),
        "d100_v20_opposite": float(energy(vmax, mpf(0)) + energy(mpf(0), vmax) + 10 * cruise),
        "d200_v20_aligned": float(t_req_case1(mpf(200), vmax) * cruise),
    },
}

out = pathlib.Path(__file__).with_name("physics_pins.json")
out.write_text(json.dumps(pins, indent=2, sort_keys=True) + "\n")
print(out.read_text())
