#!/usr/bin/env python3
"""Evaluate the closed-form bounds in 50-digit decimal arithmetic.

An independent reference for the Rust evaluators: every quantity is computed
from its formula with `decimal` (exp, ln and sqrt at 50 significant digits),
sharing no code with the crate. Prints one JSON object.

    python3 scripts/bounds_oracle.py [n k p r beta]
"""

import json
import sys
from decimal import Decimal, getcontext

getcontext().prec = 50


def beta0(n, k, p, r):
    sqrt_l = (2 * (n / k).ln()).sqrt()
    return ((Decimal(2).sqrt() - r * r) * sqrt_l + Decimal(6).sqrt()) / (r * r) / ((k * p).sqrt() + sqrt_l)


def support_bound(beta, b0, k):
    return k / (1 - (-(beta / b0) ** 2).exp())


def recall_defect_bound(k, p, r):
    return (-(k * p * r)).exp()


def gamma_recall_min(n, k, p, r):
    inner = 2 / (k * p * r) * (n / k).ln() + 2
    return 1 + (Decimal(2).sqrt() + inner.sqrt()) / r.sqrt()


def halfspace_margin_requirement(n, k, p):
    return (2 * k / p).sqrt() * ((2 * (n / k).ln() + 2).sqrt() + 1)


def main():
    args = [Decimal(a) for a in sys.argv[1:]] or [Decimal(x) for x in ("1000", "100", "0.1", "0.9", "1.0")]
    n, k, p, r, beta = args
    b0 = beta0(n, k, p, r)
    out = {
        "beta0": b0,
        "support_bound": support_bound(beta, b0, k),
        "recall_defect_bound": recall_defect_bound(k, p, r),
        "gamma_recall_min": gamma_recall_min(n, k, p, r),
        "halfspace_margin_requirement": halfspace_margin_requirement(n, k, p),
    }
    print(json.dumps({key: str(v) for key, v in out.items()}))


if __name__ == "__main__":
    main()
