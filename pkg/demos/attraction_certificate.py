"""Certify nonuniform normal attraction of a known invariant curve.

Takes the analytic Davis-Skodje slow curve y = x/(1+x) with its vertical
fast fibers and checks the finite-time attraction inequality: transverse
perturbations must contract at least like exp(-nu*t) up to a constant that
varies along the curve no faster than exp(nu_C * |flow time|). A rate nu
inside the true normal gap passes; a rate beyond it is refuted.

Run:  python3 demos/attraction_certificate.py
"""

import json

import numpy as np

from slowmanifold.diagnostics import (CandidateCurve, certify_normal_attraction,
                                      tangential_rate_diagnostics)
from slowmanifold.models import davis_skodje


def build_curve():
    xs = np.linspace(-0.3, 1.5, 9)
    return CandidateCurve.from_graph(
        xs, lambda x: x / (1.0 + x),
        lambda x: 1.0 / (1.0 + x) ** 2,
        transverse_rule=lambda p: np.array([[0.0], [1.0]]))


def main():
    model = davis_skodje(gamma=2.0)   # transverse rate gamma=2, tangent rate 1
    curve = build_curve()

    for nu in (0.9, 1.5):
        cert = certify_normal_attraction(model, curve, nu=nu, nu_C=0.1, horizon=5.0)
        verdict = "PASS" if cert.passed else "REFUTED"
        print(f"nu={nu}: {verdict}  worst_slack={cert.worst_slack:+.3e}  "
              f"max c(p)={max(cert.c_values):.4f}")

    cert = certify_normal_attraction(model, curve, nu=0.9, nu_C=0.1, horizon=5.0)
    print("\ncertificate (nu=0.9) as JSON:")
    print(json.dumps(cert.to_dict(), indent=2)[:400] + " ...")

    # necessary-condition diagnostics at a point on the curve: the estimated
    # tangential backward rate should sit near the slow rate 1, well below
    # the transverse rate 2
    p = np.array([0.2, 0.2 / 1.2])
    rep = tangential_rate_diagnostics(model, curve, p, 5.0)
    print(f"\ntangential backward rate estimate at x=0.2: "
          f"{rep['nu_est']:.4f} (slow rate 1, transverse rate 2)")


if __name__ == "__main__":
    main()
