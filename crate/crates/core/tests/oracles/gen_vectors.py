#!/usr/bin/env python3
"""Independent reference computations for frozen test vectors.

Plain-integer affine arithmetic, Tonelli-Shanks square roots and hashlib.
Shares no code with the Rust implementation. Run to regenerate the values
pinned in tests/vectors.rs.
"""
import hashlib

from cryptography.hazmat.decrepit.ciphers.algorithms import TripleDES
from cryptography.hazmat.primitives import cmac
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESCCM

CURVES = {
    "bp256": dict(
        p=0xA9FB57DBA1EEA9BC3E660A909D838D726E3BF623D52620282013481D1F6E5377,
        a=0x7D5A0975FC2C3057EEF67530417AFFE7FB8055C126DC5C6CE94A4B44F330B5D9,
        b=0x26DC5C6CE94A4B44F330B5D9BBD77CBF958416295CF7E1CE6BCCDC18FF8C07B6,
        gx=0x8BD2AEB9CB7E57CB2C4B482FFC81B7AFB9DE27E1E3BD23C23A4453BD9ACE3262,
        gy=0x547EF835C3DAC4FD97F8461A14611DC9C27745132DED8E545C1D54C72F046997,
        q=0xA9FB57DBA1EEA9BC3E660A909D838D718C397AA3B561A6F7901E0E82974856A7,
    ),
    "bp320": dict(
        p=0xD35E472036BC4FB7E13C785ED201E065F98FCFA6F6F40DEF4F92B9EC7893EC28FCD412B1F1B32E27,
        a=0x3EE30B568FBAB0F883CCEBD46D3F3BB8A2A73513F5EB79DA66190EB085FFA9F492F375A97D860EB4,
        b=0x520883949DFDBC42D3AD198640688A6FE13F41349554B49ACC31DCCD884539816F5EB4AC8FB1F1A6,
        gx=0x43BD7E9AFB53D8B85289BCC48EE5BFE6F20137D10A087EB6E7871E2A10A599C710AF8D0D39E20611,
        gy=0x14FDD05545EC1CC8AB4093247F77275E0743FFED117182EAA9C77877AAAC6AC7D35245D1692E8EE1,
        q=0xD35E472036BC4FB7E13C785ED201E065F98FCFA5B68F12A32D482EC7EE8658E98691555B44C59311,
    ),
}


def on_curve(c, P):
    x, y = P
    return (y * y - (x * x * x + c["a"] * x + c["b"])) % c["p"] == 0


def add(c, P, Q):
    p = c["p"]
    if P is None:
        return Q
    if Q is None:
        return P
    if P[0] == Q[0] and (P[1] + Q[1]) % p == 0:
        return None
    if P == Q:
        lam = (3 * P[0] * P[0] + c["a"]) * pow(2 * P[1], -1, p) % p
    else:
        lam = (Q[1] - P[1]) * pow(Q[0] - P[0], -1, p) % p
    x = (lam * lam - P[0] - Q[0]) % p
    return (x, (lam * (P[0] - x) - P[1]) % p)


def mul(c, k, P):
    R = None
    for bit in bin(k)[2:]:
        R = add(c, R, R)
        if bit == "1":
            R = add(c, R, P)
    return R


def legendre(a, p):
    return pow(a, (p - 1) // 2, p)


def tonelli_shanks(n, p):
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while legendre(z, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(n, q, p), pow(n, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c, t, r = i, b * b % p, t * b * b % p, r * b % p
    return r


def embed(c, pin: bytes):
    p = c["p"]
    x = int.from_bytes(pin, "big") % p
    steps = 0
    while True:
        rhs = (x ** 3 + c["a"] * x + c["b"]) % p
        if rhs == 0 or legendre(rhs, p) == 1:
            y = tonelli_shanks(rhs, p) if rhs else 0
            if y % 2 == 1:
                y = p - y
            return (x, y), steps
        x = (x + 1) % p
        steps += 1


def width(c):
    return (c["p"].bit_length() + 7) // 8


def hx(v, n):
    return v.to_bytes(n, "big").hex().upper()


def kdf(secret: bytes, counter: int, h):
    return h(secret + counter.to_bytes(4, "big")).digest()


def parity(key: bytes):
    out = bytearray()
    for b in key:
        b &= 0xFE
        out.append(b | (1 ^ (bin(b).count("1") & 1)))
    return bytes(out)


def main():
    c = CURVES["bp256"]
    G = (c["gx"], c["gy"])
    two_g = mul(c, 2, G)
    print("bp256 2G x", hx(two_g[0], 32))
    print("bp256 2G y", hx(two_g[1], 32))
    for name in ("bp256", "bp320"):
        c = CURVES[name]
        (x, y), steps = embed(c, b"12345")
        assert on_curve(c, (x, y))
        print(name, "EMB(12345) x", hx(x, width(c)), "steps", steps)
        print(name, "EMB(12345) y", hx(y, width(c)))
        assert mul(c, c["q"], (c["gx"], c["gy"])) is None
    for name, pin in (("bp256", b"2"), ("bp320", b"314159")):
        c = CURVES[name]
        (x, y), steps = embed(c, pin)
        print(name, "EMB(%s) x" % pin.decode(), hx(x, width(c)), "steps", steps)
        print(name, "EMB(%s) y" % pin.decode(), hx(y, width(c)))

    # ECDSA over bp256, SHA-256, fixed key and nonce.
    c = CURVES["bp256"]
    q = c["q"]
    d = int.from_bytes(hashlib.sha256(b"issuer key").digest(), "big") % q
    k = int.from_bytes(hashlib.sha256(b"nonce").digest(), "big") % q
    msg = b"document security object"
    e = int.from_bytes(hashlib.sha256(msg).digest(), "big")
    R = mul(c, k, G)
    r = R[0] % q
    s = pow(k, -1, q) * (e + r * d) % q
    print("ecdsa d", hx(d, 32))
    print("ecdsa k", hx(k, 32))
    print("ecdsa r", hx(r, 32))
    print("ecdsa s", hx(s, 32))

    # Session-key derivation for a fixed shared secret.
    secret = bytes(range(1, 41))
    print("kdf aes256 enc", kdf(secret, 1, hashlib.sha256).hex().upper())
    print("kdf aes256 mac", kdf(secret, 2, hashlib.sha256).hex().upper())
    print("kdf aes192 enc", kdf(secret, 1, hashlib.sha256)[:24].hex().upper())
    print("kdf aes128 enc", kdf(secret, 1, hashlib.sha1)[:16].hex().upper())
    print("kdf 3des enc", parity(kdf(secret, 1, hashlib.sha1)[:16]).hex().upper())
    print("kdf 3des mac", parity(kdf(secret, 2, hashlib.sha1)[:16]).hex().upper())

    # Protected-response sizes from the DO grammar.
    def tlv_len(n):
        return 1 + (1 if n < 0x80 else 2 if n < 0x100 else 3) + n

    def protected_len(n, block):
        padded = (n // block + 1) * block
        do87 = tlv_len(1 + padded) if n else 0
        return do87 + tlv_len(2) + tlv_len(8)

    for block, name in ((16, "aes"), (8, "3des")):
        print(name, "protected data len for 128 bytes", protected_len(128, block))
        best = max(n for n in range(1, 256) if protected_len(n, block) <= 255)
        print(name, "max plaintext in 255-byte response", best)

    c = CURVES["bp256"]
    print("bp256 EMB(1234) == EMB(1235)", embed(c, b"1234")[0] == embed(c, b"1235")[0])

    end_to_end()


def pad2(data: bytes, block: int) -> bytes:
    data += b"\x80"
    return data + b"\x00" * (-len(data) % block)


def tlv(tag: int, value: bytes) -> bytes:
    n = len(value)
    length = bytes([n]) if n < 0x80 else bytes([0x81, n]) if n < 0x100 else bytes([0x82, n >> 8, n & 0xFF])
    return bytes([tag]) + length + value


def cbc(key: bytes, iv: bytes, data: bytes) -> bytes:
    algo = algorithms.AES(key) if len(iv) == 16 else TripleDES(key + key[:8])
    enc = Cipher(algo, modes.CBC(iv)).encryptor()
    return enc.update(data) + enc.finalize()


def ecb_block(key: bytes, block: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def retail_mac(key: bytes, data: bytes) -> bytes:
    k1, k2 = key[:8], key[8:16]
    single = lambda k: TripleDES(k + k + k)
    enc = Cipher(single(k1), modes.CBC(b"\x00" * 8)).encryptor()
    h = (enc.update(data) + enc.finalize())[-8:]
    h = Cipher(single(k2), modes.ECB()).decryptor().update(h)
    return Cipher(single(k1), modes.ECB()).encryptor().update(h)


class Sm:
    """Secure messaging for one chip-authentication session."""

    def __init__(self, suite: str, secret: bytes):
        self.aes = suite != "3des"
        self.block = 16 if self.aes else 8
        if suite == "3des":
            self.enc, self.mac_key = (parity(kdf(secret, i, hashlib.sha1)[:16]) for i in (1, 2))
        elif suite == "aes128":
            self.enc, self.mac_key = (kdf(secret, i, hashlib.sha1)[:16] for i in (1, 2))
        else:
            n = 24 if suite == "aes192" else 32
            self.enc, self.mac_key = (kdf(secret, i, hashlib.sha256)[:n] for i in (1, 2))
        self.ssc = 0

    def ssc_bytes(self):
        return self.ssc.to_bytes(self.block, "big")

    def iv(self):
        return ecb_block(self.enc, self.ssc_bytes()) if self.aes else b"\x00" * 8

    def mac(self, body: bytes) -> bytes:
        data = pad2(self.ssc_bytes() + body, self.block)
        if self.aes:
            c = cmac.CMAC(algorithms.AES(self.mac_key))
            c.update(data)
            return c.finalize()[:8]
        return retail_mac(self.mac_key, data)

    def read_binary(self, sfi: int, n: int) -> bytes:
        self.ssc += 1
        header = bytes([0x0C, 0xB0, 0x80 | sfi, 0x00])
        do97 = tlv(0x97, bytes([n]))
        mac = self.mac(pad2(header, self.block) + do97)
        body = do97 + tlv(0x8E, mac)
        return header + bytes([len(body)]) + body + b"\x00"

    def response(self, plain: bytes) -> bytes:
        self.ssc += 1
        do87 = tlv(0x87, b"\x01" + cbc(self.enc, self.iv(), pad2(plain, self.block)))
        do99 = tlv(0x99, b"\x90\x00")
        mac = self.mac(do87 + do99)
        return do87 + do99 + tlv(0x8E, mac) + b"\x90\x00"


def end_to_end():
    """Chip-authenticated read of 128 bytes from SFI 14 for fixed keys."""
    f_cont = bytes((7 * i + 3) % 256 for i in range(160))
    for suite, name in (("3des", "bp256"), ("aes128", "bp256"), ("aes192", "bp320"), ("aes256", "bp320")):
        c = CURVES[name]
        G = (c["gx"], c["gy"])
        x = int.from_bytes(hashlib.sha256(b"chip key").digest(), "big") % c["q"]
        k = int.from_bytes(hashlib.sha256(b"ephemeral key").digest(), "big") % c["q"]
        K = mul(c, k, mul(c, x, G))
        sm = Sm(suite, K[0].to_bytes(width(c), "big"))
        rb = sm.read_binary(14, 128)
        m = sm.response(f_cont[:128])
        key = hashlib.sha256(m).digest()
        print(suite, name, "RB", rb.hex().upper())
        print(suite, name, "M", m.hex().upper())
        print(suite, name, "key", key.hex().upper())

    ct = AESCCM(bytes(range(32)), tag_length=16).encrypt(bytes(12), b"remote document", b"header")
    print("ccm", ct.hex().upper())


if __name__ == "__main__":
    main()
