"""Import the extension module and exercise each binding once.

Run after `cargo build -p thermirror-py` (or `maturin develop` in crates/py).
Without an installed wheel the freshly built shared library is copied next to
a temporary import path.
"""

import glob
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load():
    try:
        import thermirror_py

        return thermirror_py
    except ImportError:
        pass
    built = []
    for profile in ("release", "debug"):
        built += glob.glob(os.path.join(ROOT, "target", profile, "libthermirror_py.so"))
        built += glob.glob(os.path.join(ROOT, "target", profile, "libthermirror_py.dylib"))
    if not built:
        sys.exit("build the extension first: cargo build -p thermirror-py")
    tmp = tempfile.mkdtemp()
    shutil.copy(built[0], os.path.join(tmp, "thermirror_py.so"))
    sys.path.insert(0, tmp)
    import thermirror_py

    return thermirror_py


def main():
    tm = load()

    r = tm.reflect([0.6, 0.0, 0.8], [0.0, 0.0, -2.0])
    assert all(abs(a - b) < 1e-12 for a, b in zip(r, [0.6, 0.0, -0.8])), r
    try:
        tm.reflect([0.0, 0.0, 1.0], [0.0, 0.0, 0.0])
        raise AssertionError("zero normal accepted")
    except ValueError:
        pass

    truth = [[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]]
    assert abs(tm.keypoint_metric(truth, truth)) < 1e-15
    moved = [[0.5, 0.0, 0.0], [3.0, 4.0, 0.0]]
    assert abs(tm.keypoint_metric(moved, truth) - 0.05) < 1e-12

    with tempfile.TemporaryDirectory() as d:
        scene = tm.make_synthetic("bowl", os.path.join(d, "bowl"), seed=1)
        w, h, values = tm.render(scene)
        assert (w, h) == (64, 64) and len(values) == w * h
        assert all(0.0 <= v <= 1.0 for v in values)

        text = open(scene).read()
        text = text.replace("max_iters = 300", "max_iters = 20").replace("restarts = 5", "restarts = 1")
        open(scene, "w").write(text)
        (obj,) = tm.fit_object(scene, seed=1)
        assert obj["family"] == "bowl"
        assert math.isfinite(obj["final_loss"]) and obj["scale"] > 0

        scene = tm.make_synthetic("human", os.path.join(d, "human"))
        text = open(scene).read()
        text = text.replace("max_iters = 400", "max_iters = 3").replace("restarts = 8", "restarts = 1")
        open(scene, "w").write(text)
        fit = tm.fit_human(scene)
        assert len(fit["joints"]) == 17
        assert 0.0 <= fit["iou"] <= 1.0 and fit["metric"] >= 0.0

        try:
            tm.make_synthetic("torus", os.path.join(d, "t"))
            raise AssertionError("unknown kind accepted")
        except ValueError:
            pass

    print("python smoke test ok")


if __name__ == "__main__":
    main()
