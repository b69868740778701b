import hashlib
import math

import pytest

import bfsim

ALPHABET = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"


def b58check(payload, cklen=4):
    data = payload + hashlib.sha256(hashlib.sha256(payload).digest()).digest()[:cklen]
    n = int.from_bytes(data, "big")
    out = ""
    while n:
        n, r = divmod(n, 58)
        out = ALPHABET[r] + out
    return "1" * (len(data) - len(data.lstrip(b"\0"))) + out


def test_version_and_params():
    assert bfsim.__version__ == "0.1.0"
    p = bfsim.ModelParams(secret_bits=32, address_bits=16)
    assert p.digest_bits == 32
    with pytest.raises(ValueError):
        bfsim.ModelParams(secret_bits=256, address_bits=200)


def test_lamport_pubkey_matches_hashlib():
    p = bfsim.ModelParams(secret_bits=32, address_bits=16, digest_bits=4)
    sk = bfsim.key_from_int(0x01020304, p)
    assert sk == "01020304"
    expected = b"".join(
        hashlib.sha256(hashlib.sha256(bytes.fromhex(sk) + i.to_bytes(2, "big") + bytes([b])).digest()[:16]).digest()[:16]
        for i in range(4)
        for b in (0, 1)
    )
    assert bfsim.derive_pubkey(sk, p) == expected


def test_address_text_matches_base58check():
    p = bfsim.ModelParams(secret_bits=32, address_bits=13)
    h, text = bfsim.derive_address(bfsim.key_from_int(0x01020304, p), p)
    assert len(h) == 2 and h[1] & 0b111 == 0
    assert text == b58check(b"\0" + h)
    assert bfsim.decode_address(text, p) == (0, h)
    assert bfsim.base58check(bytes(21)) == "1111111111111111111114oLvT2"
    with pytest.raises(ValueError):
        bfsim.decode_address(text[:-1] + ("a" if text[-1] != "a" else "b"), p)


def test_sign_verify():
    p = bfsim.ModelParams(digest_bits=16)
    sk = bfsim.keygen(7, p)
    pk = bfsim.derive_pubkey(sk, p)
    sig = bfsim.sign(sk, b"hello", p)
    assert bfsim.verify(pk, b"hello", sig, p)
    assert not bfsim.verify(pk, b"hellp", sig, p)


def test_script_engine():
    p = bfsim.ModelParams(secret_bits=20, address_bits=8, digest_bits=8)
    r = bfsim.execute_script("<01> <01>", "OP_EQUAL", b"", p)
    assert r["accepted"] and r["error"] is None
    r = bfsim.execute_script("<01>", "OP_NOTIF <01> OP_ELSE OP_RETURN OP_ENDIF", b"", p)
    assert not r["accepted"] and r["error"] == "ReturnHit"
    assert len(bfsim.reward_script().split()) == 13
    with pytest.raises(ValueError):
        bfsim.execute_script("", "OP_FROB", b"", p)


def test_bound_and_optimum():
    b = bfsim.epsilon_bound(bfsim.ModelParams(secret_bits=256, address_bits=160), 0.36)
    assert b["bound"] == pytest.approx(5.2191840 * 2.0**-96, rel=1e-6)
    assert b["bound"] < 7e-29
    k, f = bfsim.optimize_k(bfsim.ModelParams())
    assert k == pytest.approx(0.361103, abs=1e-5)
    assert f == pytest.approx(1 / (1 - k) ** 2 + 1 / k)


def test_exact_epsilon_below_bound():
    p = bfsim.ModelParams(secret_bits=12, address_bits=8, digest_bits=8)
    exact = bfsim.epsilon_exact(p)
    assert 0 < exact <= bfsim.epsilon_bound(p)["bound"]
    mc = bfsim.monte_carlo_evidence(p, 500, seed=3)
    assert mc["evidence_ok"] + mc["same_key"] == 500


def test_preimage_counts():
    counts = bfsim.preimage_counts(bfsim.ModelParams(secret_bits=32, address_bits=8, digest_bits=8), 4096, 5)
    assert len(counts) == 256 and sum(counts) == 4096
    assert sum(counts) / len(counts) == 16


def test_simulation_round_trip():
    cfg = "[params]\ndigest_bits=8\n[funding]\ncount=16\n"
    a = bfsim.simulate(cfg, seed=3)
    b = bfsim.simulate(cfg, seed=3)
    assert a == b
    assert a["seed"] == 3
    if a["attack_success"]:
        assert a["evidence_found"] is True
        assert a["stolen_spent"] is False
    assert all(a["invariants"].values())
    with pytest.raises(ValueError):
        bfsim.simulate("[params]\nnope=1\n")


def test_disabled_evidence_keeps_loot():
    r = bfsim.simulate("[params]\ndigest_bits=8\n[chain]\nevidence_consensus=false\n", seed=3)
    assert r["attack_success"] and r["stolen_spent"] is True
    assert math.isclose(r["attack"]["predicted_hits_per_trial"], r["attack"]["index_size"] / 2**16)
