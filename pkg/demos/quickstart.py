"""Quickstart: a synthetic zero-shot problem from data to predictions.

We draw 15 classes whose embeddings live on the unit sphere. Only the first 10
have training samples. The task is to recognise samples of the other 5 using
nothing but their embeddings.

Run:  python demos/quickstart.py [--seed 0]
"""
import argparse

import numpy as np

from bzscr import (
    SyntheticSpec,
    TrainConfig,
    cosine_divergence,
    evaluate,
    generate_synthetic,
    predict,
    train,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    train_ds, test_ds, E, split = generate_synthetic(SyntheticSpec(), args.seed)
    D = cosine_divergence(E)
    print(f"{train_ds.n_samples} training samples from seen classes {split.seen}")
    print(f"{test_ds.n_samples} test samples from unseen classes {split.unseen}")

    # The divergence between two classes is their cosine distance rescaled so
    # that the least similar pair sits at 1. It sets the margin each wrong
    # class must be beaten by, and SCR uses it to rank the unseen classes.
    t = split.unseen
    print("\ndivergence among the unseen classes:")
    print(np.array2string(D.matrix[np.ix_(np.array(t) - 1, np.array(t) - 1)], precision=2))

    config = TrainConfig(seed=args.seed)
    ens, trace = train(train_ds, E, split, D, config, test=test_ds)
    print(f"\ntraining ran {len(trace)} iterations and stopped on '{trace.stop_reason}'")
    print(f"kept the first {len(ens)} weak models (lowest validation error "
          f"{trace.records[trace.best_iter - 1].val_er:.3f})")

    report = evaluate(ens, test_ds, E, D, split.unseen)
    print(f"\nunseen-class error rate  {report.error_rate:.3f}")
    print(f"mean divergence of predictions {report.mean_delta:.3f}")
    print("chance level for 5 classes is 0.800")
    for c, acc in report.per_class.items():
        print(f"  class {c}: accuracy {acc:.2f}")

    x, y = test_ds.features[0], test_ds.labels[0]
    print(f"\nfirst test sample: true class {y}, predicted {predict(ens, x, E, split.unseen)}")


if __name__ == "__main__":
    main()
