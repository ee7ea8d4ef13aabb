#!/usr/bin/env python3
"""Write a pretrained-text weights directory from a local Hugging Face model.

The directory holds manifest.json, vocab.txt and token_embedding.f32 (the
model's input embedding table, little-endian float32). The C++ backend pools
these static token vectors; the transformer layers are not exported.

usage: export_wordpiece_weights.py --model DIR --out DIR [--max-length 256] [--k-limit 64]
"""

import argparse
import json
import pathlib

import numpy as np


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", required=True, help="local model directory or hub id already cached")
    ap.add_argument("--out", required=True)
    ap.add_argument("--max-length", type=int, default=256)
    ap.add_argument("--k-limit", type=int, default=64)
    args = ap.parse_args()

    from transformers import AutoModel, AutoTokenizer

    tok = AutoTokenizer.from_pretrained(args.model)
    model = AutoModel.from_pretrained(args.model)
    vocab = tok.get_vocab()
    if not any(t.startswith("##") for t in vocab):
        raise SystemExit("only WordPiece vocabularies are supported")
    by_id = sorted(vocab.items(), key=lambda kv: kv[1])
    if [i for _, i in by_id] != list(range(len(by_id))):
        raise SystemExit("vocabulary ids are not contiguous")

    table = model.get_input_embeddings().weight.detach().cpu().numpy().astype("<f4")
    if table.shape[0] < len(by_id):
        raise SystemExit("embedding table is smaller than the vocabulary")
    table = table[: len(by_id)]

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "vocab.txt").write_text("".join(t + "\n" for t, _ in by_id), encoding="utf-8")
    table.tofile(out / "token_embedding.f32")
    manifest = {
        "backend": "pretrained-text",
        "D": int(table.shape[1]),
        "LS_max": args.max_length,
        "k_limit": min(args.k_limit, args.max_length),
        "vocab_size": len(by_id),
        "pad_id": int(tok.pad_token_id if tok.pad_token_id is not None else 0),
        "tokenizer": {
            "type": "wordpiece",
            "vocab_file": "vocab.txt",
            "unk_token": tok.unk_token,
            "lowercase": bool(getattr(tok, "do_lower_case", True)),
        },
        "tensors": {
            "token_embedding": {"file": "token_embedding.f32", "shape": list(table.shape), "dtype": "float32"}
        },
        "source": str(args.model),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(json.dumps({"out": str(out), "vocab_size": len(by_id), "D": int(table.shape[1])}))


if __name__ == "__main__":
    main()
