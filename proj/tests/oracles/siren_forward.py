"""Independent evaluation of a small sinusoidal network with fixed weights.

Produces the frozen values used by test_siren.cpp ("frozen forward values").
Run: python3 siren_forward.py
"""
import numpy as np

OMEGA0 = 30.0
DIMS = [4, 8, 8, 1]  # 3 affine layers


def weights():
    layers = []
    for k in range(len(DIMS) - 1):
        rows, cols = DIMS[k + 1], DIMS[k]
        W = np.array([[0.5 * np.sin(1.3 * k + 0.7 * r + 0.11 * c + 0.3) / (c + 1.0 if k else 1.0)
                       for c in range(cols)] for r in range(rows)])
        b = np.array([0.2 * np.cos(0.9 * k + 0.5 * r) for r in range(rows)])
        layers.append((W, b))
    return layers


def forward(p):
    h = np.asarray(p, dtype=float)
    layers = weights()
    for W, b in layers[:-1]:
        h = np.sin(OMEGA0 * (W @ h + b))
    W, b = layers[-1]
    return W @ h + b


if __name__ == "__main__":
    for i in range(5):
        p = [0.1 * i - 0.3, 0.05 * i, -0.2 + 0.07 * i, 0.3 - 0.04 * i]
        print(f"{forward(p)[0]:.17g}")
