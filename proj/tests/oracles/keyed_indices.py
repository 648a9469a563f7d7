"""Golden keyed level indices, via the `cryptography` ChaCha20 implementation."""
import struct

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms


def words(key16: bytes, frame: int, slot: int):
    # cryptography takes a 16-byte nonce: 32-bit counter then the 96-bit nonce
    nonce = struct.pack("<I", 0) + struct.pack("<QI", frame, slot)
    enc = Cipher(algorithms.ChaCha20(key16 + bytes(16), nonce), mode=None).encryptor()
    while True:
        block = enc.update(bytes(64))
        yield from struct.unpack("<16I", block)


def indices(key: int, frame: int, n: int, levels: int):
    key16 = struct.pack("<Q", key) + bytes(8)
    limit = 2**32 - (2**32 % levels)
    out = []
    for slot in range(n):
        for w in words(key16, frame, slot):
            if w < limit:
                out.append(w % levels)
                break
    return out


if __name__ == "__main__":
    print(indices(1, 0, 20, 8))
    print(indices(1, 0, 20, 3))
    print(indices(0xDEADBEEF, 7, 10, 5))
