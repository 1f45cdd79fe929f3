"""Shared instruction encoding and 64-bit integer token semantics.

Token values are signed 64-bit integers with two's-complement wraparound.
Both the compiled and the pure-Python kernels must implement these exact
semantics so their outputs are bit-identical.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
SIGN64 = 1 << 63

# opcodes for compiled op-graph programs (5 int64 fields per instruction:
# opcode, a, b, c, d; the destination register is the instruction index)
OP_ADD = 0
OP_SUB = 1
OP_MUL = 2
OP_DIV = 3      # truncating; x/0 = 0
OP_SQRT = 4     # floor(sqrt(|x|))
OP_CONST = 5    # a = const pool index
OP_PASS = 6
OP_TABLE = 7    # a = index register, b = pool offset, c = pool length
OP_LOADIN = 8   # a = input port, b = token index within the firing batch

# instance function kinds
FUNC_PROG = 0   # compiled op-graph program
FUNC_MIX = 1    # order-sensitive hash of the consumed tokens
FUNC_GEN = 2    # deterministic generator stream (stateful source)
FUNC_PASS = 3   # single-token passthrough (fork/join/hub elements)

# input handling: ALL = consume per-port rates; RR = one token from the
# port selected by the firing counter (merge elements)
IN_ALL = 0
IN_RR = 1

# output port modes
OUT_BC = 0      # broadcast: every channel of the port receives the tokens
OUT_RR = 1      # round-robin: the channel selected by the firing counter

_GOLD = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def to_signed(u: int) -> int:
    u &= MASK64
    return u - (1 << 64) if u & SIGN64 else u


def to_unsigned(x: int) -> int:
    return x & MASK64


def splitmix64(u: int) -> int:
    """One splitmix64 scrambling round over an unsigned 64-bit value."""
    z = (u + _GOLD) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def mix_init() -> int:
    return _FNV_OFFSET


def mix_feed(h: int, token: int) -> int:
    """Fold one signed token into the running hash (FNV-1a step)."""
    return ((h ^ to_unsigned(token)) * _FNV_PRIME) & MASK64


def mix_out(h: int, port: int, index: int) -> int:
    """Signed output token for (port, index) of a skeleton firing."""
    salt = (port * 0x10001 + index * 0x101 + 1) & MASK64
    return to_signed(splitmix64(h ^ (salt * _GOLD & MASK64)))


def gen_out(salt: int, firing: int, port: int, index: int) -> int:
    """Signed output token of a generator source at a given firing."""
    h = splitmix64((salt * 0x1000001 + firing) & MASK64)
    return mix_out(h, port, index)


def wrap_add(a: int, b: int) -> int:
    return to_signed(a + b)


def wrap_sub(a: int, b: int) -> int:
    return to_signed(a - b)


def wrap_mul(a: int, b: int) -> int:
    return to_signed(a * b)


def trunc_div(a: int, b: int) -> int:
    if b == 0:
        return 0
    q = abs(a) // abs(b)
    if (a < 0) != (b < 0):
        q = -q
    return to_signed(q)


def isqrt_abs(a: int) -> int:
    import math
    return math.isqrt(abs(a))
