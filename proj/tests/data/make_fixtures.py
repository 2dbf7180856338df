"""Writes fixtures.json and the expected `fewshot losses` output for it.

The expected values are computed here with numpy, independently of the C++
kernels. Rerun only when the fixture set itself changes:

    python3 tests/data/make_fixtures.py tests/data
"""

import json
import math
import pathlib
import sys

import numpy as np

LOG_CLAMP = 1e-12
PAIR_CLAMP = 1e-7


def distribution(rng, k, sparse=False):
    p = rng.random(k)
    if sparse:
        p[rng.random(k) < 0.3] = 0.0
        if p.sum() == 0.0:
            p[0] = 1.0
    return p / p.sum()


def cross_entropy(x, y):
    return float(-np.sum(np.asarray(x) * np.log(np.maximum(np.asarray(y), LOG_CLAMP))))


def cosine_rows(b):
    norms = np.linalg.norm(b, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    u = b / safe[:, None]
    u[norms == 0] = 0.0
    return np.clip(u @ u.T, -1.0, 1.0)


def bce(batch, rho):
    b = np.asarray(batch, dtype=float)
    sim = cosine_rows(b)
    np.fill_diagonal(sim, -np.inf)
    pair = np.argmax(sim, axis=1)  # first maximum: lowest index wins ties
    best = sim[np.arange(len(b)), pair]
    keep = math.ceil(rho * len(b))
    order = sorted(range(len(b)), key=lambda i: -best[i])  # stable
    chosen = order[:keep]
    return float(np.mean([-math.log(min(1.0, max(PAIR_CLAMP, best[i]))) for i in chosen]))


def fixture(rng, name, m, k, with_pairs):
    f = {
        "name": name,
        "teacher_cls": distribution(rng, k).tolist(),
        "student_cls": distribution(rng, k, sparse=True).tolist(),
        "mask": [bool(v) for v in rng.random(m) < 0.5],
        "teacher_patch": [distribution(rng, k).tolist() for _ in range(m)],
        "student_patch": [distribution(rng, k, sparse=True).tolist() for _ in range(m)],
        "y_masked": rng.normal(size=2 * m).tolist(),
        "y_target": rng.normal(size=2 * m).tolist(),
    }
    if with_pairs:
        f["pair_batch"] = rng.normal(size=(12, 5)).tolist()
        f["rho"] = 0.5
        f["ema"] = {"teacher": rng.normal(size=3).tolist(), "student": rng.normal(size=3).tolist(), "momentum": 0.996}
    return f


def expected_lines(f):
    name = f["name"]
    patch = sum(cross_entropy(t, s) for t, s, on in zip(f["teacher_patch"], f["student_patch"], f["mask"]) if on)
    mse = float(np.sum((np.asarray(f["y_masked"]) - np.asarray(f["y_target"])) ** 2))
    out = [
        (name, "L_cls", cross_entropy(f["teacher_cls"], f["student_cls"])),
        (name, "L_patch", patch),
        (name, "L_MSE", mse),
    ]
    if "pair_batch" in f:
        out.append((name, "L_BCE", bce(f["pair_batch"], f.get("rho", 1.0))))
    if "ema" in f:
        e = f["ema"]
        m = e["momentum"]
        for i, (t, s) in enumerate(zip(e["teacher"], e["student"])):
            out.append((name, f"ema[{i}]", m * t + (1 - m) * s))
    return [f"{n} {label} {value + 0.0:.12g}" for n, label, value in out]  # no "-0"


def main(out_dir):
    rng = np.random.default_rng(20240611)
    identity = {
        "name": "identity",
        "teacher_cls": [0.0, 0.0, 1.0],
        "student_cls": [0.0, 0.0, 1.0],
        "mask": [True, False, True],
        "teacher_patch": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
        "student_patch": [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
        "y_masked": [0.5, -1.25, 3.0],
        "y_target": [0.5, -1.25, 3.0],
    }
    # Student puts zero mass where the teacher has all of it: -log(1e-12).
    clamped = dict(identity, name="clamped", teacher_cls=[1.0, 0.0, 0.0], student_cls=[0.0, 1.0, 0.0])
    fixtures = [identity, clamped]
    fixtures += [fixture(rng, f"random{i}", 4 + i, 6 + 2 * i, with_pairs=(i % 2 == 0)) for i in range(4)]

    out = pathlib.Path(out_dir)
    (out / "fixtures.json").write_text(json.dumps({"fixtures": fixtures}, indent=1) + "\n")
    lines = [line for f in fixtures for line in expected_lines(f)]
    (out / "fixtures.expected").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else ".")
