"""Regenerate the bundled fixture files: ``python fixtures/generate.py``."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from localroi import io as jio
from localroi.discrimination import DiscriminationTask, random_task
from localroi.measurements import MeasurementSet, projective_povm
from localroi.oracle import random_compatible_set

HERE = Path(__file__).parent
SX = np.array([[0, 1], [1, 0]])
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0])


def main() -> None:
    sets = {
        "set_xz": MeasurementSet.of([projective_povm(SX), projective_povm(SZ)]),
        "set_z": MeasurementSet.of([projective_povm(SZ)]),
        "set_xyz": MeasurementSet.of([projective_povm(SX), projective_povm(SY), projective_povm(SZ)]),
        "set_compatible": random_compatible_set(2, 2, 2, 3, seed=7),
    }
    for name, s in sets.items():
        jio.save(HERE / f"{name}.json", jio.set_to_json(s, name), "measurement_set.v1")

    e00 = np.diag([1.0, 0, 0, 0])
    e11 = np.diag([0, 0, 0, 1.0])
    product = DiscriminationTask.build((2, 2), [1.0], [([0.5, 0.5], [e00, e11])])
    jio.save(HERE / "task_product.json", jio.task_to_json(product, "orthogonal product states"), "task.v1")
    jio.save(HERE / "task_random.json", jio.task_to_json(random_task((2, 2), 3, 3, seed=11), "random two-qubit task"), "task.v1")

    # deliberately broken inputs for the exit-code contract
    (HERE / "bad_missing_dim.json").write_text('{"povms": [[{"re": [[1.0]], "im": [[0.0]]}]]}\n')
    (HERE / "bad_nan.json").write_text('{"dim": 1, "povms": [[{"re": [[NaN]], "im": [[0.0]]}]]}\n')
    (HERE / "bad_not_psd.json").write_text(
        '{"dim": 2, "povms": [[{"re": [[2.0, 0.0], [0.0, 1.0]], "im": [[0.0, 0.0], [0.0, 0.0]]},'
        ' {"re": [[-1.0, 0.0], [0.0, 0.0]], "im": [[0.0, 0.0], [0.0, 0.0]]}]]}\n'
    )
    (HERE / "bad_syntax.json").write_text('{"party_dims": [2, 2], "ensembles": [\n')


if __name__ == "__main__":
    main()
