"""End-to-end: corpus, CNN and Siamese training, combined classifier.

A miniature of the full pipeline (roughly five minutes on a couple of
cores): build a small 3-qubit corpus, train both model flavors just past
their warmup plateau, and compare plain, Siamese, and negativity-combined
accuracy, including on bound-entangled states neither model saw during
training.

For publication-shaped numbers raise SCALE to 0.1 and EPOCHS to 10 (tens of
minutes) or use the `qent` CLI to stage the runs on disk.
"""

import numpy as np

from qent import (
    ArchConfig,
    TrainConfig,
    build_cnn,
    build_pptes_testset,
    build_test_sets,
    build_training_set,
    build_validation_set,
    predict,
    train_model,
)
from qent.harness import evaluate_accuracy, pptes_eval_mask
from qent.stategen import ghz_state

SCALE = 0.02
EPOCHS = 6
SEED = 11

print(f"building corpus at scale {SCALE} ...")
train = build_training_set(3, "negativity", SCALE, seed=SEED)
valid = build_validation_set(3, SCALE, seed=SEED)
pure, mixed = build_test_sets(3, SCALE, seed=SEED)
print(f"train {len(train)}, valid {len(valid)}, test {len(pure)}+{len(mixed)}")

results = {}
for kind in ("cnn", "siamese"):
    model = build_cnn(ArchConfig(n_qubits=3), seed=SEED)
    cfg = TrainConfig(epochs=EPOCHS, seed=SEED)
    res = train_model(model, train, valid, cfg, kind=kind)
    print(f"\n{kind}: {len(res.step_losses)} steps, "
          f"val accuracy by epoch {[round(a, 3) for a in res.val_accuracies]}")
    rows = [
        evaluate_accuracy(model, pure, "pure"),
        evaluate_accuracy(model, mixed, "mixed"),
        evaluate_accuracy(model, mixed, "mixed+negativity", combined=True),
    ]
    for fam in ("horodecki", "acin", "upb"):
        ds = build_pptes_testset(fam, 50, seed=SEED)
        rows.append(evaluate_accuracy(model, ds, f"pptes_{fam}", mask=pptes_eval_mask(ds)))
    for r in rows:
        print(f"  {r.dataset:18s} accuracy {r.accuracy:.3f}  convneg {r.conv_neg:.3f}")
    results[kind] = model

ghz = np.outer(ghz_state(3), ghz_state(3).conj())
print("\nGHZ probabilities, cnn:", np.round(predict(results["cnn"], ghz), 3),
      " siamese:", np.round(predict(results["siamese"], ghz), 3))
