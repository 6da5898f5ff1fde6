"""Bit-level frame protocol.

Reed-Solomon coding over GF(2^5), a 5-bit rotate-and-add checksum,
sequence numbering, frame assembly/parsing onto an M x N bit grid, and
stream-level duplicate / false-positive elimination.

Symbols are plain ints in [0, 31].  Field arithmetic uses the primitive
polynomial x^5 + x^2 + 1 with generator element alpha = 2; codewords are
systematic (data symbols first, parity appended) with generator roots at
the consecutive powers alpha^1 .. alpha^n_parity.

Bit sequences are lists/arrays of 0/1 ints, packed into symbols MSB-first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

FIELD_ORDER = 32
PRIM_POLY = 0b100101  # x^5 + x^2 + 1
GENERATOR = 2

SEQ_BITS = 5
CHECKSUM_BITS = 5
SEQ_MOD = 32
# Wrap window: a decoded sequence number may lead the last accepted one by
# at most this much before it is treated as a backwards (stale) frame.
SEQ_WINDOW = 16


def _build_tables() -> tuple[list[int], list[int]]:
    exp = [0] * 64
    log = [0] * FIELD_ORDER
    x = 1
    for i in range(FIELD_ORDER - 1):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & FIELD_ORDER:
            x ^= PRIM_POLY
    for i in range(FIELD_ORDER - 1, 64):
        exp[i] = exp[i - (FIELD_ORDER - 1)]
    return exp, log


GF_EXP, GF_LOG = _build_tables()


def _check_symbol(value: int, name: str = "symbol") -> None:
    if not 0 <= value < FIELD_ORDER:
        raise ValueError(f"{name} {value!r} outside GF(32) range [0, 31]")


def gf_mul(a: int, b: int) -> int:
    """Multiply two GF(2^5) symbols."""
    _check_symbol(a, "a")
    _check_symbol(b, "b")
    if a == 0 or b == 0:
        return 0
    return GF_EXP[GF_LOG[a] + GF_LOG[b]]


def gf_inv(a: int) -> int:
    _check_symbol(a)
    if a == 0:
        raise ZeroDivisionError("0 has no multiplicative inverse in GF(32)")
    return GF_EXP[FIELD_ORDER - 1 - GF_LOG[a]]


def gf_div(a: int, b: int) -> int:
    return gf_mul(a, gf_inv(b))


def gf_pow(a: int, n: int) -> int:
    _check_symbol(a)
    if a == 0:
        return 0 if n else 1
    return GF_EXP[(GF_LOG[a] * n) % (FIELD_ORDER - 1)]


def _mul(a: int, b: int) -> int:
    # unchecked fast path for inner loops
    if a == 0 or b == 0:
        return 0
    return GF_EXP[GF_LOG[a] + GF_LOG[b]]


# ---------------------------------------------------------------------------
# Reed-Solomon over GF(32)

def _generator_poly(n_parity: int) -> list[int]:
    """Monic generator with roots alpha^1 .. alpha^n_parity (highest degree first)."""
    g = [1]
    for i in range(1, n_parity + 1):
        root = GF_EXP[i]
        nxt = [0] * (len(g) + 1)
        for j, c in enumerate(g):
            nxt[j] ^= c  # times x
            nxt[j + 1] ^= _mul(c, root)
        g = nxt
    return g


_GEN_CACHE: dict[int, list[int]] = {}


def rs_encode(data: Sequence[int], n_parity: int) -> list[int]:
    """Systematically encode ``data`` symbols, returning data + parity.

    Raises ValueError when the codeword would exceed the GF(32) length
    bound of 31 symbols.
    """
    for s in data:
        _check_symbol(s, "data symbol")
    if n_parity < 0:
        raise ValueError("n_parity must be non-negative")
    if len(data) + n_parity > FIELD_ORDER - 1:
        raise ValueError(
            f"codeword length {len(data) + n_parity} exceeds the GF(32) "
            f"bound of {FIELD_ORDER - 1} symbols"
        )
    if n_parity == 0:
        return list(data)
    gen = _GEN_CACHE.setdefault(n_parity, _generator_poly(n_parity))
    buf = list(data) + [0] * n_parity
    for i in range(len(data)):
        coef = buf[i]
        if coef:
            for j in range(1, len(gen)):
                buf[i + j] ^= _mul(gen[j], coef)
    return list(data) + buf[len(data):]


def _syndromes(received: Sequence[int], n_parity: int) -> list[int]:
    out = []
    for m in range(1, n_parity + 1):
        alpha_m = GF_EXP[m % (FIELD_ORDER - 1)]
        acc = 0
        for c in received:
            acc = _mul(acc, alpha_m) ^ c
        out.append(acc)
    return out


def _berlekamp_massey(synd: list[int]) -> list[int]:
    """Error locator Lambda(x), lowest degree first."""
    lam = [1]
    prev = [1]
    l = 0
    m = 1
    b = 1
    for n_i in range(len(synd)):
        delta = synd[n_i]
        for i in range(1, l + 1):
            if i < len(lam):
                delta ^= _mul(lam[i], synd[n_i - i])
        if delta == 0:
            m += 1
            continue
        scale = _mul(delta, gf_inv(b))
        shifted = [0] * m + [_mul(scale, c) for c in prev]
        if 2 * l <= n_i:
            lam, prev, b, l = (
                [a ^ bb for a, bb in _zip_pad(lam, shifted)],
                list(lam),
                delta,
                n_i + 1 - l,
            )
            m = 1
        else:
            lam = [a ^ bb for a, bb in _zip_pad(lam, shifted)]
            m += 1
    # trim trailing zeros
    while len(lam) > 1 and lam[-1] == 0:
        lam.pop()
    return lam


def _zip_pad(a: list[int], b: list[int]):
    n = max(len(a), len(b))
    for i in range(n):
        yield (a[i] if i < len(a) else 0), (b[i] if i < len(b) else 0)


def _poly_eval_low(poly: list[int], x: int) -> int:
    acc = 0
    for c in reversed(poly):
        acc = _mul(acc, x) ^ c
    return acc


def rs_decode(
    received: Sequence[int], n_parity: int
) -> Optional[tuple[list[int], int]]:
    """Decode a received codeword; return (data symbols, corrections) or None.

    None means the decoder could not locate a consistent error pattern
    within floor(n_parity / 2) symbol errors.  A miscorrection (wrong but
    internally consistent result) is possible above that bound and must be
    caught by the checksum layer.
    """
    n = len(received)
    if n > FIELD_ORDER - 1:
        raise ValueError("received word longer than 31 symbols")
    for s in received:
        _check_symbol(s, "received symbol")
    if n_parity == 0:
        return list(received), 0
    synd = _syndromes(received, n_parity)
    if not any(synd):
        return list(received)[: n - n_parity], 0

    lam = _berlekamp_massey(synd)
    n_errors = len(lam) - 1
    if n_errors == 0 or 2 * n_errors > n_parity:
        return None

    # Chien search over coefficient degrees: received[i] has degree n-1-i.
    err_degrees = []
    for d in range(n):
        x_inv = GF_EXP[(FIELD_ORDER - 1 - d) % (FIELD_ORDER - 1)]
        if _poly_eval_low(lam, x_inv) == 0:
            err_degrees.append(d)
    if len(err_degrees) != n_errors:
        return None

    # Omega(x) = S(x) * Lambda(x) mod x^n_parity, with S lowest-first.
    omega = [0] * n_parity
    for i, s in enumerate(synd):
        if s == 0:
            continue
        for j, c in enumerate(lam):
            if i + j < n_parity:
                omega[i + j] ^= _mul(s, c)
    # Formal derivative of Lambda in characteristic 2: odd-degree terms only.
    lam_deriv = [lam[i] if i % 2 == 1 else 0 for i in range(1, len(lam))]

    corrected = list(received)
    for d in err_degrees:
        x_k = GF_EXP[d % (FIELD_ORDER - 1)]
        x_inv = gf_inv(x_k)
        denom = _poly_eval_low(lam_deriv, x_inv)
        if denom == 0:
            return None
        magnitude = gf_div(_poly_eval_low(omega, x_inv), denom)
        corrected[n - 1 - d] ^= magnitude

    if any(_syndromes(corrected, n_parity)):
        return None
    return corrected[: n - n_parity], n_errors


# ---------------------------------------------------------------------------
# Checksum and bit packing

def bsd5(bits: Sequence[int]) -> int:
    """Rotate-and-add checksum over 5-bit symbols in a 5-bit register.

    For each symbol s: register <- rotate_right(register, 1) + s (mod 32).
    The input bit count must be a multiple of 5.
    """
    if len(bits) % 5:
        raise ValueError("bsd5 input length must be a multiple of 5")
    reg = 0
    for sym in pack_symbols(bits):
        reg = (((reg >> 1) | ((reg & 1) << 4)) + sym) & 31
    return reg


def pack_symbols(bits: Sequence[int]) -> list[int]:
    """Pack a bit sequence into 5-bit symbols, MSB first."""
    if len(bits) % 5:
        raise ValueError("bit count must be a multiple of 5")
    out = []
    for i in range(0, len(bits), 5):
        sym = 0
        for b in bits[i : i + 5]:
            sym = (sym << 1) | (int(b) & 1)
        out.append(sym)
    return out


def unpack_symbols(symbols: Sequence[int]) -> list[int]:
    """Inverse of pack_symbols."""
    out = []
    for s in symbols:
        _check_symbol(s)
        out.extend((s >> k) & 1 for k in (4, 3, 2, 1, 0))
    return out


def int_to_bits(value: int, width: int) -> list[int]:
    return [(value >> k) & 1 for k in range(width - 1, -1, -1)]


def bits_to_int(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | (int(b) & 1)
    return v


# ---------------------------------------------------------------------------
# Frame layout and assembly

@dataclass(frozen=True)
class FrameLayout:
    """How one data frame occupies an M x N bit grid.

    data_bits + SEQ_BITS + CHECKSUM_BITS + parity_bits + pad_bits == rows*cols.
    parity_bits and data_bits are whole 5-bit symbols; for grids whose bit
    count is not a multiple of 5 the tail is padded with zero bits (pad_bits
    in [0, 4], always zero on the symbol-aligned layouts such as 10x10).
    Message+parity symbol streams longer than the 31-symbol GF(32) codeword
    bound are split into near-equal chunks, each RS-encoded independently.
    """

    rows: int
    cols: int
    parity_bits: int

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")
        if self.parity_bits % 5:
            raise ValueError("parity_bits must be a multiple of 5")
        if self.data_bits < 5:
            raise ValueError(
                f"layout {self.rows}x{self.cols} with {self.parity_bits} "
                "parity bits leaves no room for payload"
            )

    @property
    def total_bits(self) -> int:
        return self.rows * self.cols

    @property
    def data_bits(self) -> int:
        usable = self.total_bits - SEQ_BITS - CHECKSUM_BITS - self.parity_bits
        return usable - usable % 5

    @property
    def pad_bits(self) -> int:
        return (
            self.total_bits
            - self.data_bits
            - SEQ_BITS
            - CHECKSUM_BITS
            - self.parity_bits
        )

    @property
    def message_symbols(self) -> int:
        return (self.data_bits + SEQ_BITS + CHECKSUM_BITS) // 5

    @property
    def parity_symbols(self) -> int:
        return self.parity_bits // 5

    @classmethod
    def from_parity_rate(cls, rows: int, cols: int, rate: float) -> "FrameLayout":
        """Layout with parity_bits = rate * rows * cols rounded to whole symbols."""
        parity = int(round(rows * cols * rate / 5.0)) * 5
        return cls(rows, cols, parity)

    def chunks(self) -> list[tuple[int, int]]:
        """(message_symbols, parity_symbols) per RS codeword chunk."""
        total = self.message_symbols + self.parity_symbols
        n_chunks = -(-total // (FIELD_ORDER - 1))  # ceil
        msg = _split_even(self.message_symbols, n_chunks)
        par = _split_even(self.parity_symbols, n_chunks)
        return list(zip(msg, par))


def _split_even(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


@dataclass(frozen=True)
class DataFrame:
    """One protocol unit: payload bits, sequence number, checksum, parity."""

    seq: int
    payload: tuple[int, ...]
    checksum: int
    parity: tuple[int, ...]

    @classmethod
    def build(cls, payload: Sequence[int], seq: int, layout: FrameLayout) -> "DataFrame":
        if len(payload) != layout.data_bits:
            raise ValueError(
                f"payload length {len(payload)} != layout data_bits {layout.data_bits}"
            )
        if not 0 <= seq < SEQ_MOD:
            raise ValueError("seq must be in [0, 31]")
        payload = tuple(int(b) & 1 for b in payload)
        body = list(payload) + int_to_bits(seq, SEQ_BITS)
        checksum = bsd5(body)
        msg_syms = pack_symbols(body + int_to_bits(checksum, CHECKSUM_BITS))
        parity: list[int] = []
        pos = 0
        for n_msg, n_par in layout.chunks():
            chunk = msg_syms[pos : pos + n_msg]
            parity.extend(rs_encode(chunk, n_par)[n_msg:])
            pos += n_msg
        return cls(seq=seq, payload=payload, checksum=checksum, parity=tuple(parity))


def assemble_frame(payload: Sequence[int], seq: int, layout: FrameLayout) -> list[int]:
    """Serialize payload + seq + checksum + RS parity (+ zero pad) to M*N bits."""
    frame = DataFrame.build(payload, seq, layout)
    bits = (
        list(frame.payload)
        + int_to_bits(frame.seq, SEQ_BITS)
        + int_to_bits(frame.checksum, CHECKSUM_BITS)
        + unpack_symbols(frame.parity)
        + [0] * layout.pad_bits
    )
    assert len(bits) == layout.total_bits
    return bits


@dataclass(frozen=True)
class ParseResult:
    """Outcome of parse_frame; ``ok`` False carries a reason instead of data."""

    ok: bool
    payload: Optional[tuple[int, ...]] = None
    seq: Optional[int] = None
    corrected: int = 0
    reason: str = ""

    RS_FAILURE = "rs_failure"
    CHECKSUM_MISMATCH = "checksum_mismatch"


def parse_frame(bits: Sequence[int], layout: FrameLayout) -> ParseResult:
    """RS-decode a serialized frame and verify its checksum."""
    if len(bits) != layout.total_bits:
        raise ValueError(
            f"expected {layout.total_bits} bits, got {len(bits)}"
        )
    bits = [int(b) & 1 for b in bits]
    msg_bits = layout.data_bits + SEQ_BITS + CHECKSUM_BITS
    msg_syms = pack_symbols(bits[:msg_bits])
    parity_syms = pack_symbols(
        bits[msg_bits : msg_bits + layout.parity_bits]
    )
    pad = bits[msg_bits + layout.parity_bits :]
    if any(pad):
        return ParseResult(ok=False, reason=ParseResult.RS_FAILURE)

    decoded: list[int] = []
    corrected = 0
    mpos = 0
    ppos = 0
    for n_msg, n_par in layout.chunks():
        word = msg_syms[mpos : mpos + n_msg] + parity_syms[ppos : ppos + n_par]
        res = rs_decode(word, n_par)
        if res is None:
            return ParseResult(ok=False, reason=ParseResult.RS_FAILURE)
        decoded.extend(res[0])
        corrected += res[1]
        mpos += n_msg
        ppos += n_par

    all_bits = unpack_symbols(decoded)
    payload = all_bits[: layout.data_bits]
    seq = bits_to_int(all_bits[layout.data_bits : layout.data_bits + SEQ_BITS])
    checksum = bits_to_int(all_bits[layout.data_bits + SEQ_BITS : msg_bits])
    if bsd5(payload + int_to_bits(seq, SEQ_BITS)) != checksum:
        return ParseResult(ok=False, reason=ParseResult.CHECKSUM_MISMATCH)
    return ParseResult(ok=True, payload=tuple(payload), seq=seq, corrected=corrected)


# ---------------------------------------------------------------------------
# Duplicate / false-positive elimination

def separation(camera_rate: float, display_rate: float) -> int:
    """Minimum camera-frame separation between consecutively numbered frames."""
    sep = int(2 * camera_rate // display_rate)
    if sep < 1:
        raise ValueError("camera rate too low for the display rate")
    return sep


@dataclass
class DedupState:
    """Tracks the last accepted frame of one decoding stream."""

    sep: int
    last_seq: Optional[int] = None
    last_frame_index: Optional[int] = None

    def __post_init__(self) -> None:
        if self.sep < 1:
            raise ValueError("sep must be >= 1")


def dedup_accept(state: DedupState, seq: int, frame_index: int) -> bool:
    """Accept a decoded frame iff its seq/timing is consistent with the stream.

    Two frames whose sequence numbers differ by x must be at least x*sep
    camera frames apart.  Sequence numbers wrap mod 32; a lead of more than
    SEQ_WINDOW is treated as stale.  Accepting mutates ``state``.
    """
    if not 0 <= seq < SEQ_MOD:
        raise ValueError("seq must be in [0, 31]")
    if state.last_seq is None:
        state.last_seq = seq
        state.last_frame_index = frame_index
        return True
    x = (seq - state.last_seq) % SEQ_MOD
    if x < 1 or x > SEQ_WINDOW:
        return False
    if frame_index - state.last_frame_index < x * state.sep:
        return False
    state.last_seq = seq
    state.last_frame_index = frame_index
    return True
