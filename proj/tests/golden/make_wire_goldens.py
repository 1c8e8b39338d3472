#!/usr/bin/env python3
"""Writes golden logit-service frames: 4-byte big-endian length plus canonical JSON.

Usage: make_wire_goldens.py OUTDIR
"""
import json
import os
import struct
import sys


def bits(x):
    return "%016x" % struct.unpack(">Q", struct.pack(">d", x))[0]


def frame(obj):
    body = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return struct.pack(">I", len(body)) + body


FRAMES = {
    "logits_request.bin": {"version": 1, "kind": "logits", "session": "s1", "instruction": "Write a note",
                           "prefix_ids": [5, 7], "top_k": 2},
    "logits_response.bin": {"version": 1, "kind": "logits", "vocab_hash": "%016x" % 0x1c0fd15941d3c9f4,
                            "entries": [[7, bits(0.5)], [5, bits(0.25)]]},
}


def main():
    os.makedirs(sys.argv[1], exist_ok=True)
    for name, obj in FRAMES.items():
        with open(os.path.join(sys.argv[1], name), "wb") as f:
            f.write(frame(obj))


if __name__ == "__main__":
    main()
