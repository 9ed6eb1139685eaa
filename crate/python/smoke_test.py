"""Smoke test for the Python bindings.

Build and place the extension next to this script first:

    cargo build --release -p spatial-lucid-py --features extension-module
    cp target/release/libspatial_lucid_py.so python/spatial_lucid_py.so
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import spatial_lucid_py as sl


def main():
    assert sl.effective_learning_rate(1e-3, 2.0) == 5e-4

    ds = sl.Dataset.fig1(samples_per_cell=10, seed=0)
    assert len(ds) == 40
    assert ds.category_names == ["A", "B", "C", "D"]
    train, val, test = ds.split(0)
    assert (len(train), len(val), len(test)) == sl.split_counts(ds, 0)

    with tempfile.TemporaryDirectory() as tmp:
        ds.save(os.path.join(tmp, "data"))
        again = sl.Dataset.load(os.path.join(tmp, "data"))
        assert [s.points for s in again.samples] == [s.points for s in ds.samples]

        ens = sl.Ensemble.train(ds, "place-type", lr=5e-3, epochs=5, cutoff=2.0, layers=2, hidden=8)
        assert ens.members == ["pt0", "pt1"]
        cls, probs = ens.predict(test[0])
        assert abs(sum(probs) - 1.0) < 1e-12 and cls in (0, 1)

        report = ens.evaluate(test)
        assert all(0.0 <= report[k] <= 1.0 for k in ("accuracy", "precision", "recall", "f1"))

        ens.save(os.path.join(tmp, "model"))
        loaded = sl.Ensemble.load(os.path.join(tmp, "model"))
        assert loaded.predict(test[0]) == (cls, probs)

    rows = ens.explain(ds, train, test, place_type=0, repeats=2)
    assert rows and rows[0][2] >= rows[-1][2]

    point = sl.PointSet("p", 0, 1, [(0, 0.0, 0.0), (1, 1.0, 0.5), (2, 3.0, 2.0)])
    ens.predict(point)

    try:
        sl.Ensemble.train(ds, "bogus")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown strategy accepted")

    print("smoke test OK:", report)


if __name__ == "__main__":
    main()
