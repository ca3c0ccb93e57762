"""Smoke test for the hatedetect Python bindings.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

import math
import tempfile
from pathlib import Path

import hatedetect

FIXTURES = Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"


def main():
    parts = hatedetect.decompose(
        "RT @user #MondayMotivation so good 🔥 https://t.co/x 42",
        "en",
        lexicon={"monday": 40, "motivation": 30},
    )
    assert parts["segmented_hashtags"] == [["monday", "motivation"]], parts
    assert parts["reserved"] == ["RT"] and parts["mentions"] == ["@user"], parts
    assert parts["emojis"] == ["🔥"], parts

    assert hatedetect.segment("#goodmorning", {"good": 5, "morning": 3}) == ["good", "morning"]
    assert len(hatedetect.perspective_layout("en")) == 18
    assert len(hatedetect.perspective_layout("de")) == 12
    try:
        hatedetect.perspective_layout("hi")
    except ValueError:
        pass
    else:
        raise AssertionError("hi has no toxicity-score layout")

    assert hatedetect.macro_f1(["NOT", "HOF"], ["NOT", "HOF"], "task1") == 1.0
    assert math.isclose(hatedetect.macro_f1(["NOT", "NOT", "HOF"], ["NOT", "HOF", "HOF"], "task1"), 2 / 3)

    corpus = hatedetect.Corpus.load(FIXTURES / "synthetic_600.tsv", "en")
    assert len(corpus) == 600
    assert corpus.label_counts("task1") == {"NOT": 240, "HOF": 360}

    (model,) = hatedetect.train(
        "task1",
        {"en": corpus},
        buckets=128,
        channels="text,hashtag,emoji",
        emoji_path=str(FIXTURES / "emoji_vectors.txt"),
        lr=1e-3,
        epochs=15,
        seed=7,
    )
    assert model.languages == ["en"] and model.classes == ["NOT", "HOF"]
    assert model.history and model.best_val_f1 > 0.8, model
    f1 = model.evaluate(corpus)

    with tempfile.TemporaryDirectory() as tmp:
        model.save(Path(tmp) / "ckpt")
        loaded = hatedetect.Model.load(Path(tmp) / "ckpt")
    predictions = loaded.predict(corpus)
    assert len(predictions) == 600
    tweet_id, label, probs = predictions[0]
    assert tweet_id == corpus.ids()[0] and label in ("NOT", "HOF")
    assert math.isclose(sum(probs), 1.0, rel_tol=1e-9)
    # Checkpoints store f32 weights, so scores agree closely but not exactly.
    assert abs(loaded.evaluate(corpus) - f1) < 0.01

    print(f"ok: {model!r}, training-set macro-F1 {f1:.4f}")


if __name__ == "__main__":
    main()
