import numpy as np
import pytest


def _leaf_pair_tree(label: int, tokens: list[str]) -> str:
    leaves = " ".join(f"({label} {t})" for t in tokens)
    return f"({label} {leaves})"


def write_toy_corpus(root, n_classes=5, words_per_class=4, n_train=60, n_eval=20,
                     length=4, seed=0):
    """Tree files for a separable toy task: each sentence's words all come
    from its class's private pool."""
    rng = np.random.default_rng(seed)
    words = [f"w{c}x{i}" for c in range(n_classes) for i in range(words_per_class)]

    def make_lines(n):
        lines = []
        for _ in range(n):
            c = int(rng.integers(0, n_classes))
            toks = [
                words[c * words_per_class + int(rng.integers(0, words_per_class))]
                for _ in range(length)
            ]
            lines.append(_leaf_pair_tree(c, toks))
        return lines

    (root / "train.txt").write_text("\n".join(make_lines(n_train)) + "\n")
    (root / "valid.txt").write_text("\n".join(make_lines(n_eval)) + "\n")
    (root / "test.txt").write_text("\n".join(make_lines(n_eval)) + "\n")
    return words


def write_vectors(path, words, dim, seed=1, informative=True):
    """word2vec text file; when informative, vectors encode the class id."""
    rng = np.random.default_rng(seed)
    lines = [f"{len(words)} {dim}"]
    for w in words:
        vec = rng.normal(scale=0.1, size=dim)
        if informative:
            c = int(w[1:].split("x")[0])
            vec[c % dim] += 0.5
        lines.append(w + " " + " ".join(f"{v:.6f}" for v in vec))
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def toy_corpus(tmp_path):
    words = write_toy_corpus(tmp_path)
    write_vectors(tmp_path / "large_vecs.txt", words, dim=12)
    write_vectors(tmp_path / "small_vecs.txt", words, dim=4)
    return tmp_path
