import csv

import numpy as np
import pytest
import torch

from embedding_service.cli import main
from embedding_service.encoder import CharNgramEncoder, load_encoder
from embedding_service.finetune import finetune, load_pairs, pairwise_loss

# cross-implementation oracle from the primary package
from pgdnwatch.embedding import PairBatch, cosent_loss


def toy_pairs(path, n_pos=10, n_neg=10):
    """Separable toy set: near-duplicate positive pairs, unrelated
    negative pairs."""
    rows = [("text_a", "text_b", "label")]
    for i in range(n_pos):
        rows.append((f"casino palace {i}", f"casino palace number {i}", "pos"))
    unrelated = ["quarterly report", "garden tips", "weather update",
                 "recipe blog", "music charts", "travel diary",
                 "science news", "book club", "car reviews", "tax guide"]
    for i in range(n_neg):
        rows.append((f"casino palace {i}", unrelated[i % len(unrelated)], "neg"))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(rows)
    return path


class TestLoadPairs:
    def test_round_trip(self, tmp_path):
        pairs = load_pairs(toy_pairs(tmp_path / "pairs.csv"))
        assert len(pairs.positive) == 10
        assert len(pairs.negative) == 10

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,pos\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_pairs(path)

    def test_bad_label_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("text_a,text_b,label\na,b,maybe\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_pairs(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("text_a,text_b,label\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_pairs(path)


class TestFinetune:
    def test_loss_non_increasing_on_separable_toy_set(self, tmp_path):
        pairs_file = toy_pairs(tmp_path / "pairs.csv")
        _, losses = finetune(pairs_file, scale=20.0, epochs=8,
                             out_dir=tmp_path / "model", seed=1)
        assert len(losses) == 8
        for earlier, later in zip(losses, losses[1:]):
            assert later <= earlier + 1e-6
        assert losses[-1] < losses[0]

    def test_initial_loss_matches_gateway_cosent_loss(self, tmp_path):
        pairs_file = toy_pairs(tmp_path / "pairs.csv")
        seed = 5
        _, losses = finetune(pairs_file, scale=20.0, epochs=1,
                             out_dir=tmp_path / "model", seed=seed)

        # embed the same pairs with an identical pristine encoder and score
        # them with the primary gateway's loss
        pairs = load_pairs(pairs_file)
        encoder = CharNgramEncoder(seed=seed)
        vectors = encoder.encode(list(pairs.texts)).numpy().astype(np.float64)
        batch = PairBatch(
            tuple((vectors[i], vectors[j]) for i, j in pairs.positive),
            tuple((vectors[i], vectors[j]) for i, j in pairs.negative),
            scale=20.0,
        )
        assert abs(losses[0] - cosent_loss(batch)) <= 1e-4

    def test_torch_loss_agrees_with_gateway_on_random_pairs(self, tmp_path):
        pairs_file = toy_pairs(tmp_path / "pairs.csv", n_pos=4, n_neg=6)
        pairs = load_pairs(pairs_file)
        encoder = CharNgramEncoder(seed=9)
        with torch.no_grad():
            torch_loss = pairwise_loss(encoder(list(pairs.texts)), pairs, 12.5)
        vectors = encoder.encode(list(pairs.texts)).numpy().astype(np.float64)
        batch = PairBatch(
            tuple((vectors[i], vectors[j]) for i, j in pairs.positive),
            tuple((vectors[i], vectors[j]) for i, j in pairs.negative),
            scale=12.5,
        )
        assert abs(float(torch_loss) - cosent_loss(batch)) <= 1e-4

    def test_separation_actually_improves(self, tmp_path):
        pairs_file = toy_pairs(tmp_path / "pairs.csv")
        saved, _ = finetune(pairs_file, scale=20.0, epochs=25,
                            out_dir=tmp_path / "model", seed=2)
        tuned = load_encoder(str(saved))
        pairs = load_pairs(pairs_file)
        before = CharNgramEncoder(seed=2).encode(list(pairs.texts))
        after = tuned.encode(list(pairs.texts))

        def margin(embeddings):
            cos = torch.nn.functional.cosine_similarity
            pos = np.mean([float(cos(embeddings[i][None], embeddings[j][None]))
                           for i, j in pairs.positive])
            neg = np.mean([float(cos(embeddings[i][None], embeddings[j][None]))
                           for i, j in pairs.negative])
            return pos - neg

        assert margin(after) > margin(before)

    def test_zero_pairs_error(self, tmp_path):
        path = tmp_path / "none.csv"
        path.write_text("text_a,text_b,label\n", encoding="utf-8")
        with pytest.raises(ValueError):
            finetune(path, epochs=1, out_dir=tmp_path / "m")

    def test_bad_scale_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            finetune(toy_pairs(tmp_path / "p.csv"), scale=0.0, epochs=1,
                     out_dir=tmp_path / "m")


class TestCli:
    def test_finetune_command(self, tmp_path, capsys):
        pairs_file = toy_pairs(tmp_path / "pairs.csv")
        code = main(["finetune", str(pairs_file), "--epochs", "3",
                     "--out", str(tmp_path / "model"), "--seed", "4"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.count("epoch ") == 3
        assert (tmp_path / "model" / "weights.pt").exists()
        assert (tmp_path / "model" / "config.json").exists()

    def test_finetune_error_path(self, tmp_path, capsys):
        missing = tmp_path / "missing.csv"
        code = main(["finetune", str(missing)])
        assert code == 1
        assert "error:" in capsys.readouterr().err
