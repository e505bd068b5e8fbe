"""
势函数模型
Potential Model

[0,1] 上紧支撑复值势函数的分段多项式表示，包括文本解析、范数、尾积分与差分
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as npoly
from scipy import integrate

from ..utils.exceptions import (
    EmptyPieceError,
    InvalidExponentError,
    MalformedLineError,
    OverlappingPiecesError,
    PotentialParseError,
    SupportError,
)

# 多项式最高次数
MAX_DEGREE = 4

# 自适应积分的绝对容差
QUAD_ABS_TOL = 1e-12

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class PotentialPiece:
    """单个分段：在 [x_lo, x_hi) 上 q(x) = Σ c_k (x - x_lo)^k"""

    x_lo: float
    x_hi: float
    coeffs: Tuple[complex, ...]

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_constant(self) -> bool:
        return all(c == 0 for c in self.coeffs[1:])

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    @property
    def value(self) -> complex:
        """常数分段的取值"""
        return self.coeffs[0]

    def local(self, s: np.ndarray) -> np.ndarray:
        """按局部变量 s = x - x_lo 求值"""
        return npoly.polyval(s, np.asarray(self.coeffs, dtype=complex))

    def restricted(self, a: float, b: float) -> "PotentialPiece":
        """
        截取子区间 [a, b] 并以 a 为新原点重新展开

        Args:
            a: 子区间左端点
            b: 子区间右端点

        Returns:
            新的分段
        """
        shift = a - self.x_lo
        if shift == 0.0:
            return PotentialPiece(a, b, self.coeffs)
        poly = Polynomial(np.asarray(self.coeffs, dtype=complex))
        moved = poly(Polynomial([shift, 1.0]))
        coeffs = np.zeros(len(self.coeffs), dtype=complex)
        coeffs[:len(moved.coef)] = moved.coef
        return PotentialPiece(a, b, tuple(complex(c) for c in coeffs))


def _trim(coeffs: Iterable[complex]) -> Tuple[complex, ...]:
    """去掉末尾的零系数（至少保留一项）"""
    out = [complex(c) for c in coeffs]
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return tuple(out)


def _abs_linear_integral(a: complex, b: complex, length: float) -> float:
    """∫_0^ℓ |a + b s| ds 的闭式结果"""
    if b == 0:
        return abs(a) * length
    s0 = -a / b
    u, v = s0.real, abs(s0.imag)

    def primitive(w: float) -> float:
        if v == 0.0:
            return 0.5 * w * abs(w)
        return 0.5 * (w * math.hypot(w, v) + v * v * math.asinh(w / v))

    return abs(b) * (primitive(length - u) - primitive(-u))


@dataclass(frozen=True)
class Potential:
    """
    紧支撑于 [0,1] 的分段多项式复势

    构造后不可变，可在并发求值中共享。
    """

    pieces: Tuple[PotentialPiece, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.pieces, key=lambda p: p.x_lo))
        for piece in ordered:
            _validate_piece(piece)
        for left, right in zip(ordered, ordered[1:]):
            if right.x_lo < left.x_hi:
                raise OverlappingPiecesError(
                    f"分段 [{left.x_lo}, {left.x_hi}] 与 [{right.x_lo}, {right.x_hi}] 重叠"
                )
        object.__setattr__(self, 'pieces', ordered)

        # 右端点不接续其他分段时，该端点按闭区间处理
        starts = {p.x_lo for p in ordered}
        closed = tuple(p.x_hi not in starts for p in ordered)
        object.__setattr__(self, '_closed_right', closed)

    # ------------------------------------------------------------------
    # 构造函数
    # ------------------------------------------------------------------

    @classmethod
    def zero(cls) -> "Potential":
        return cls(())

    @classmethod
    def constant(cls, c: complex) -> "Potential":
        """q ≡ c 于 [0,1]"""
        return cls.step(c, 1.0)

    @classmethod
    def step(cls, c: complex, a: float) -> "Potential":
        """q = c·χ_[0,a]"""
        return cls((PotentialPiece(0.0, float(a), (complex(c),)),))

    @classmethod
    def from_pieces(cls, specs: Iterable[Tuple[float, float, Sequence[complex]]]) -> "Potential":
        return cls(tuple(PotentialPiece(float(a), float(b), _trim(c)) for a, b, c in specs))

    @classmethod
    def from_samples(cls, xs: Sequence[float], values: Sequence[complex]) -> "Potential":
        """
        由采样值构造分段线性势

        Args:
            xs: 严格递增的采样点（位于 [0,1] 内）
            values: 对应的复数取值

        Returns:
            分段线性插值得到的势函数
        """
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=complex)
        if xs.ndim != 1 or xs.shape != values.shape or len(xs) < 2:
            raise ValueError("采样点与取值的长度必须一致且不少于2")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("采样点必须严格递增")
        pieces = []
        for k in range(len(xs) - 1):
            slope = (values[k + 1] - values[k]) / (xs[k + 1] - xs[k])
            pieces.append(PotentialPiece(float(xs[k]), float(xs[k + 1]), _trim((values[k], slope))))
        return cls(tuple(pieces))

    # ------------------------------------------------------------------
    # 求值
    # ------------------------------------------------------------------

    def evaluate(self, x: ArrayLike) -> Union[complex, np.ndarray]:
        """
        求势函数取值，支撑外精确为 0

        Args:
            x: 标量或数组

        Returns:
            与输入形状一致的复数值
        """
        xa = np.asarray(x, dtype=float)
        out = np.zeros(xa.shape, dtype=complex)
        for piece, closed in zip(self.pieces, self._closed_right):
            mask = (xa >= piece.x_lo) & ((xa < piece.x_hi) | ((xa == piece.x_hi) & closed))
            if np.any(mask):
                out[mask] = piece.local(xa[mask] - piece.x_lo)
        return complex(out) if out.ndim == 0 else out

    __call__ = evaluate

    def antiderivative(self, x: ArrayLike, order: int = 1) -> Union[complex, np.ndarray]:
        """
        从 0 起的一次或二次原函数

        F1(x) = ∫_0^x q,  F2(x) = ∫_0^x F1；x < 0 时均为 0

        Args:
            x: 标量或数组
            order: 1 或 2

        Returns:
            原函数值
        """
        if order not in (1, 2):
            raise ValueError(f"不支持的原函数阶数: {order}")
        xa = np.asarray(x, dtype=float)
        out = np.zeros(xa.shape, dtype=complex)
        for piece in self.pieces:
            p1 = npoly.polyint(np.asarray(piece.coeffs, dtype=complex))
            s = np.clip(xa - piece.x_lo, 0.0, piece.length)
            if order == 1:
                out += npoly.polyval(s, p1)
            else:
                p2 = npoly.polyint(p1)
                total = npoly.polyval(piece.length, p1)
                out += npoly.polyval(s, p2) + total * np.maximum(xa - piece.x_hi, 0.0)
        return complex(out) if out.ndim == 0 else out

    def total_integral(self) -> complex:
        return complex(self.antiderivative(1.0))

    def tail_integral(self, x: ArrayLike) -> Union[complex, np.ndarray]:
        """∫_x^1 q(t) dt，分段多项式上精确"""
        xa = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        out = self.total_integral() - np.asarray(self.antiderivative(xa), dtype=complex)
        return complex(out) if np.ndim(out) == 0 else out

    # ------------------------------------------------------------------
    # 范数
    # ------------------------------------------------------------------

    def l1_norm(self) -> float:
        """
        L1 范数 ∫_0^1 |q|

        常数与一次分段使用闭式公式，高次分段使用自适应积分。
        """
        total = 0.0
        for piece in self.pieces:
            if piece.is_zero:
                continue
            if piece.is_constant:
                total += abs(piece.value) * piece.length
            elif piece.degree == 1:
                total += _abs_linear_integral(piece.coeffs[0], piece.coeffs[1], piece.length)
            else:
                value, _ = integrate.quad(
                    lambda s, p=piece: abs(p.local(s)), 0.0, piece.length,
                    epsabs=QUAD_ABS_TOL, epsrel=QUAD_ABS_TOL, limit=200
                )
                total += value
        return total

    def lp_norm(self, p: float) -> float:
        """
        Lp 范数，p ∈ (1, 2]

        Args:
            p: 指数

        Returns:
            (∫_0^1 |q|^p)^{1/p}
        """
        if not (1.0 < p <= 2.0):
            raise InvalidExponentError(f"指数 p={p} 不在 (1, 2] 内")
        total = 0.0
        for piece in self.pieces:
            if piece.is_zero:
                continue
            if piece.is_constant:
                total += abs(piece.value) ** p * piece.length
            else:
                value, _ = integrate.quad(
                    lambda s, pc=piece: abs(pc.local(s)) ** p, 0.0, piece.length,
                    epsabs=QUAD_ABS_TOL, epsrel=1e-13, limit=200
                )
                total += value
        return total ** (1.0 / p)

    def sup_norm(self, samples_per_piece: int = 257) -> float:
        """分段采样得到的上确界估计（常数分段精确）"""
        best = 0.0
        for piece in self.pieces:
            if piece.is_constant:
                best = max(best, abs(piece.value))
            else:
                s = np.linspace(0.0, piece.length, samples_per_piece)
                best = max(best, float(np.max(np.abs(piece.local(s)))))
        return best

    # ------------------------------------------------------------------
    # 结构信息
    # ------------------------------------------------------------------

    @property
    def breakpoints(self) -> np.ndarray:
        pts = {0.0, 1.0}
        for piece in self.pieces:
            pts.update((piece.x_lo, piece.x_hi))
        return np.array(sorted(pts))

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for p in self.pieces for c in p.coeffs)

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for p in self.pieces)

    @property
    def is_piecewise_constant(self) -> bool:
        return all(p.is_constant for p in self.pieces)

    def piece_at(self, x: float) -> Optional[PotentialPiece]:
        for piece, closed in zip(self.pieces, self._closed_right):
            if piece.x_lo <= x < piece.x_hi or (closed and x == piece.x_hi):
                return piece
        return None

    def segments(self) -> List[Tuple[float, float, Optional[PotentialPiece]]]:
        """
        覆盖 [0,1] 的连续区间划分（空隙处分段为 None）

        Returns:
            (a, b, piece) 列表，按 a 递增
        """
        out = []
        cursor = 0.0
        for piece in self.pieces:
            if piece.x_lo > cursor:
                out.append((cursor, piece.x_lo, None))
            out.append((piece.x_lo, piece.x_hi, piece))
            cursor = piece.x_hi
        if cursor < 1.0:
            out.append((cursor, 1.0, None))
        return out

    # ------------------------------------------------------------------
    # 运算与序列化
    # ------------------------------------------------------------------

    def subtract(self, other: "Potential") -> "Potential":
        """逐点差 self − other，合并两者的断点"""
        return _combine(self, other, -1.0)

    def add(self, other: "Potential") -> "Potential":
        return _combine(self, other, 1.0)

    def scaled(self, factor: complex) -> "Potential":
        return Potential(tuple(
            PotentialPiece(p.x_lo, p.x_hi, _trim(factor * c for c in p.coeffs))
            for p in self.pieces if factor != 0
        ))

    def to_spec_text(self) -> str:
        """写出为分段描述文本，parse_potential 可精确读回"""
        lines = []
        for piece in self.pieces:
            if piece.is_constant:
                c = piece.value
                lines.append(f"piece {piece.x_lo!r} {piece.x_hi!r} const {c.real!r} {c.imag!r}")
            else:
                parts = " ".join(f"{c.real!r} {c.imag!r}" for c in piece.coeffs)
                lines.append(f"piece {piece.x_lo!r} {piece.x_hi!r} poly {parts}")
        return "\n".join(lines) + ("\n" if lines else "")

    def __repr__(self) -> str:
        return f"Potential(pieces={len(self.pieces)}, L1={self.l1_norm():.6g})"


def _validate_piece(piece: PotentialPiece, line_no: int = 0):
    if not (math.isfinite(piece.x_lo) and math.isfinite(piece.x_hi)):
        raise MalformedLineError("区间端点必须为有限实数", line_no)
    if piece.x_lo >= piece.x_hi:
        raise EmptyPieceError(f"区间端点 x_lo={piece.x_lo} 不小于 x_hi={piece.x_hi}", line_no)
    if piece.x_lo < 0.0 or piece.x_hi > 1.0:
        raise SupportError(f"分段 [{piece.x_lo}, {piece.x_hi}] 超出 [0,1]", line_no)
    if len(piece.coeffs) == 0 or piece.degree > MAX_DEGREE:
        raise MalformedLineError(f"多项式次数须在 0..{MAX_DEGREE} 之间", line_no)
    if not all(math.isfinite(c.real) and math.isfinite(c.imag) for c in piece.coeffs):
        raise MalformedLineError("系数必须为有限数", line_no)


def _combine(a: Potential, b: Potential, sign: float) -> Potential:
    """a + sign·b，在合并断点上逐段重新展开"""
    edges = sorted(set(a.breakpoints) | set(b.breakpoints))
    pieces = []
    for lo, hi in zip(edges, edges[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        coeffs = np.zeros(MAX_DEGREE + 1, dtype=complex)
        for pot, weight in ((a, 1.0), (b, sign)):
            piece = pot.piece_at(mid)
            if piece is not None:
                local = piece.restricted(lo, hi).coeffs
                coeffs[:len(local)] += weight * np.asarray(local, dtype=complex)
        trimmed = _trim(coeffs)
        if any(c != 0 for c in trimmed):
            pieces.append(PotentialPiece(float(lo), float(hi), trimmed))
    return Potential(tuple(pieces))


def subtract(q_tilde: Potential, q: Potential) -> Potential:
    """q̃ − q"""
    return q_tilde.subtract(q)


def l1_norm(q: Potential) -> float:
    return q.l1_norm()


def lp_norm(q: Potential, p: float) -> float:
    return q.lp_norm(p)


def tail_integral(q: Potential, x: ArrayLike):
    return q.tail_integral(x)


def _parse_float(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedLineError(f"无法解析的数值 '{token}'", line_no)
    if not math.isfinite(value):
        raise MalformedLineError(f"数值必须有限: '{token}'", line_no)
    return value


def parse_potential(text: str) -> Potential:
    """
    解析分段描述文本

    每行一个指令：
        piece <x_lo> <x_hi> const <re> <im>
        piece <x_lo> <x_hi> poly <c0_re> <c0_im> [<c1_re> <c1_im> ...]
    多项式以 (x - x_lo) 为变量，# 之后为注释。

    Args:
        text: 描述文本

    Returns:
        势函数对象
    """
    pieces: List[Tuple[PotentialPiece, int]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] != 'piece' or len(tokens) < 4:
            raise MalformedLineError(f"无法识别的指令: '{raw.strip()}'", line_no)
        x_lo = _parse_float(tokens[1], line_no)
        x_hi = _parse_float(tokens[2], line_no)
        kind, numbers = tokens[3], tokens[4:]
        if kind == 'const':
            if len(numbers) != 2:
                raise MalformedLineError("const 需要恰好两个数 <re> <im>", line_no)
        elif kind == 'poly':
            if len(numbers) < 2 or len(numbers) % 2:
                raise MalformedLineError("poly 需要成对的 <re> <im> 系数", line_no)
        else:
            raise MalformedLineError(f"未知类型 '{kind}'（应为 const 或 poly）", line_no)
        values = [_parse_float(t, line_no) for t in numbers]
        coeffs = tuple(complex(values[k], values[k + 1]) for k in range(0, len(values), 2))
        piece = PotentialPiece(x_lo, x_hi, coeffs)
        _validate_piece(piece, line_no)
        pieces.append((piece, line_no))

    ordered = sorted(pieces, key=lambda item: item[0].x_lo)
    for (left, _), (right, right_line) in zip(ordered, ordered[1:]):
        if right.x_lo < left.x_hi:
            raise OverlappingPiecesError(
                f"分段 [{right.x_lo}, {right.x_hi}] 与 [{left.x_lo}, {left.x_hi}] 重叠", right_line
            )
    return Potential(tuple(p for p, _ in ordered))


def load_potential(path: str) -> Potential:
    """读取 .pot 文件"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise PotentialParseError(f"无法读取势函数文件 {path}: {e}")
    return parse_potential(text)
