#!/usr/bin/env python3
"""Writes the byte-level protocol fixtures in tests/golden.

Built with json + struct only, so the fixtures do not depend on the C++
encoder they are used to check.
"""
import json
import pathlib
import struct
import sys

out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "tests/golden")
out.mkdir(parents=True, exist_ok=True)


def header(**fields):
    base = {"dtype": "f32", "layout": "CHW", "score_kind": "probability",
            "scores_all": False, "version": 1}
    base.update(fields)
    return json.dumps(base, sort_keys=True, separators=(",", ":")).encode() + b"\n"


def tensor(values):
    return b"".join(struct.pack("<f", v) for v in values)


def write(name, data):
    (out / name).write_bytes(data)


# batch 2, 2 channels, 2x3. Value of image b, channel c, row r, col col is
# b + c/4 + r/16 + col/64, exactly representable in float32.
values = [b + c / 4 + r / 16 + col / 64
          for b in range(2) for c in range(2) for r in range(2) for col in range(3)]
ok = header(batch=2, channels=2, height=2, width=3, target_class=1) + tensor(values)
write("request_ok.bin", ok)
expected = {"batch": 2, "channels": 2, "height": 2, "width": 3, "target_class": 1,
            "score_kind": "probability", "scores_all": False,
            "values": values}
write("request_ok.json", json.dumps(expected, indent=1).encode())
write("request_ok.frame", struct.pack(">I", len(ok)) + ok)

one = header(batch=1, channels=1, height=2, width=2, target_class=0, score_kind="logit",
             scores_all=True) + tensor([0.0, -1.5, 2.25, 1e-3])
write("request_all.bin", one)

write("request_no_newline.bin", b'{"batch":1}')
write("request_bad_json.bin", b"{batch:1\n" + tensor([0.0]))
write("request_bad_dtype.bin", header(batch=1, channels=1, height=1, width=1, target_class=0,
                                      dtype="f64") + tensor([0.0]))
write("request_short_tensor.bin", header(batch=1, channels=1, height=2, width=2, target_class=0)
      + tensor([0.0, 1.0, 2.0]))

write("response_ok.json", b'{"scores":[0.25,0.75]}')
write("response_all.json", b'{"scores":[[0.1,0.9],[0.6,0.4]]}')
write("response_error.json", b'{"error":{"code":"inference_failure","message":"boom"}}')
write("response_null.json", b'{"scores":[0.5,null]}')
