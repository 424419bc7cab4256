# Extended-precision reference values for the scale constants and trend curves.
# Output is pasted into tests/acceptance.rs.
from mpmath import mp, mpf, sqrt, log, e, exp

mp.dps = 50

def consts(h):
    a = sqrt(1 - log(h)) / log(e - log(h))
    b = sqrt(-2 * log(h))
    return a, b

for T in (100, 139, 250, 500):
    for d in (7, 14, 21, 28):
        a, b = consts(mpf(d) / T)
        print(f"({T}, {d}, {mp.nstr(a, 20)}, {mp.nstr(b, 20)}),")

def bump(u, height=5000, rate=10):
    return height * exp(-((rate * u - 3) ** 2) / 2) + 1000

for u in ("0", "0.3", "0.5", "1"):
    u = mpf(u)
    print(mp.nstr(u, 3), mp.nstr(bump(u), 20), mp.nstr(bump(u, 6000), 20), mp.nstr(bump(u, rate=9), 20))
