"""Independent reference computations the package is checked against.

Nothing here imports the package; every value comes from exact rational
arithmetic, brute-force enumeration or plain loops.
"""
from fractions import Fraction
from itertools import product


def recursion_exact(cl, cs, acc0, rounds):
    """Iterate Acc_t = Acc_{t-1} CL + (1 - Acc_{t-1}) CS in exact rationals."""
    cl, cs, acc = Fraction(cl), Fraction(cs), Fraction(acc0)
    out = [acc]
    for _ in range(rounds):
        acc = acc * cl + (1 - acc) * cs
        out.append(acc)
    return out


def chain_marginal_bruteforce(p0, p_con, p_cri, t):
    """P(correct at round t) by summing the probability of every 0/1 path."""
    p0, p_con, p_cri = Fraction(p0), Fraction(p_con), Fraction(p_cri)
    total = Fraction(0)
    for path in product((0, 1), repeat=t + 1):
        prob = p0 if path[0] else 1 - p0
        for prev, cur in zip(path, path[1:]):
            stay = p_con if prev else p_cri
            prob *= stay if cur else 1 - stay
        if path[-1]:
            total += prob
    return total


def rounds_to_converge_loop(alpha, gap, eps):
    """First t with |alpha|**t * gap < eps, by counting up."""
    t = 0
    while not abs(alpha) ** t * gap < eps:
        t += 1
    return t


def binomial_se(p, n):
    return (p * (1 - p) / n) ** 0.5
