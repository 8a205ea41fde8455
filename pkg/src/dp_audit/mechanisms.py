"""Black-box samplers for the output distributions ``P = A(D)`` and ``P' = A(D')``.

Built-in pairs draw from closed-form families using the counter-based
generator, so ``sample(pair, which, count, seed)`` is reproducible bit for
bit. :class:`External` talks to a child process over a line protocol::

    -> SAMPLE <D|DPRIME> <count> <seed>
    <- <count> lines, one decimal float each
    <- OK

and sends ``QUIT`` on shutdown.
"""

from __future__ import annotations

import math
import queue
import subprocess
import threading
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.special import ndtr, ndtri

from ._validation import DomainError, check_positive_int
from .rng import MASK64, CounterRNG

__all__ = [
    "MechanismPair",
    "GaussianShift",
    "LaplaceShift",
    "UniformShift",
    "TruncatedGaussianPair",
    "IntervalMixture",
    "SeparatedFixture",
    "External",
    "MechanismError",
    "sample",
    "parse_mechanism",
]

D = "D"
DPRIME = "Dprime"


class MechanismError(OSError):
    """The external mechanism failed, timed out, or broke the protocol."""


def _side(which) -> int:
    key = str(which).strip().upper().replace("'", "PRIME")
    if key == "D":
        return 0
    if key == "DPRIME":
        return 1
    raise DomainError(f"which must be 'D' or 'Dprime', got {which!r}")


def _rng(seed: int, which) -> CounterRNG:
    return CounterRNG.from_seed(seed, 0x5A4D, _side(which))


class MechanismPair:
    """Base class for a pair of output distributions."""

    mlr_known: ClassVar[bool] = False

    def sample(self, which, count: int, seed: int) -> np.ndarray:
        count = check_positive_int(count, "count")
        return self._draw(_side(which), count, _rng(seed, which))

    def _draw(self, side: int, count: int, rng: CounterRNG) -> np.ndarray:
        raise NotImplementedError

    @property
    def spec(self) -> str:
        raise NotImplementedError


def _check_scale(value, name):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a finite value > 0, got {value}")


@dataclass(frozen=True)
class GaussianShift(MechanismPair):
    """``P = N(0, sigma^2)`` and ``P' = N(mu, sigma^2)``."""

    mu: float
    sigma: float = 1.0
    mlr_known: ClassVar[bool] = True

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu}")
        _check_scale(self.sigma, "sigma")

    def _draw(self, side, count, rng):
        loc = self.mu if side else 0.0
        return loc + self.sigma * ndtri(rng.uniform(count))

    @property
    def spec(self):
        return f"gaussian:mu={self.mu!r},sigma={self.sigma!r}"


@dataclass(frozen=True)
class LaplaceShift(MechanismPair):
    """``P = Laplace(0, b)`` and ``P' = Laplace(mu, b)``."""

    mu: float
    b: float = 1.0
    mlr_known: ClassVar[bool] = True

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu}")
        _check_scale(self.b, "b")

    def _draw(self, side, count, rng):
        loc = self.mu if side else 0.0
        v = rng.uniform(count) - 0.5
        return loc - self.b * np.sign(v) * np.log1p(-2.0 * np.abs(v))

    @property
    def spec(self):
        return f"laplace:mu={self.mu!r},b={self.b!r}"


@dataclass(frozen=True)
class UniformShift(MechanismPair):
    """``P = U(0, 1)`` and ``P' = U(0, 1 - zeta)``."""

    zeta: float
    mlr_known: ClassVar[bool] = True

    def __post_init__(self):
        if not 0.0 < self.zeta < 1.0:
            raise DomainError(f"zeta must be in (0, 1), got {self.zeta}")

    def _draw(self, side, count, rng):
        u = rng.uniform(count)
        return u * (1.0 - self.zeta) if side else u

    @property
    def spec(self):
        return f"unifshift:zeta={self.zeta!r}"


@dataclass(frozen=True)
class TruncatedGaussianPair(MechanismPair):
    """``N(-1, sigma^2)`` conditioned on ``x <= 0`` against ``N(1, sigma^2)`` on ``x >= 0``.

    The supports are disjoint, so the trade-off function is identically 0,
    although each side is within total variation ``Phi(-1/sigma)`` of the
    untruncated Gaussian.
    """

    sigma: float = 1.0

    def __post_init__(self):
        _check_scale(self.sigma, "sigma")

    @property
    def acceptance_probability(self) -> float:
        return float(ndtr(1.0 / self.sigma))

    def _draw(self, side, count, rng):
        return self.draw_with_proposals(side, count, rng)[0]

    def draw_with_proposals(self, side, count, rng):
        """Rejection sampling from the full Gaussian; also returns the proposal count."""
        sign = 1.0 if side else -1.0
        out = np.empty(count)
        filled = proposals = 0
        accept = self.acceptance_probability
        while filled < count:
            batch = max(16, int(math.ceil((count - filled) / accept * 1.2)))
            z = sign + self.sigma * ndtri(rng.uniform(batch))
            ok = z[z >= 0.0] if side else z[z <= 0.0]
            take = min(ok.size, count - filled)
            if take < ok.size:
                # Count proposals only up to the last accepted draw we keep.
                last = np.flatnonzero((z >= 0.0) if side else (z <= 0.0))[take - 1]
                proposals += int(last) + 1
            else:
                proposals += batch
            out[filled:filled + take] = ok[:take]
            filled += take
        return out, proposals

    @property
    def spec(self):
        return f"truncgauss:sigma={self.sigma!r}"


@dataclass(frozen=True)
class IntervalMixture(MechanismPair):
    """``P = U[0, 1)`` against the interval mixture built from ``m^2`` cells.

    With ``instance_seed=None`` every ``D'`` dataset uses a freshly drawn
    uniform-on-``m``-cells law, i.e. the mixture itself. With a fixed
    ``instance_seed`` a single such law is used for every dataset.
    """

    m: int
    instance_seed: int | None = None

    def __post_init__(self):
        check_positive_int(self.m, "m", minimum=2)

    def _draw(self, side, count, rng):
        from . import adversary

        if side == 0:
            return rng.uniform(count)
        if self.instance_seed is None:
            inst = adversary.build_interval_mixture(self.m, int(rng.bits(1)[0]))
        else:
            inst = adversary.build_interval_mixture(self.m, self.instance_seed)
        return adversary.sample_instance(inst, count, int(rng.bits(1)[0]))

    @property
    def spec(self):
        if self.instance_seed is None:
            return f"mixture:m={self.m}"
        return f"mixture:m={self.m},instance={self.instance_seed}"


@dataclass(frozen=True)
class SeparatedFixture(MechanismPair):
    """Deterministic fixture: ``D = {k / count}``, ``D' = {k / count + shift}``."""

    shift: float = 10.0

    def _draw(self, side, count, rng):
        base = np.arange(1, count + 1, dtype=np.float64) / count
        return base + self.shift if side else base

    @property
    def spec(self):
        return "synthetic-separated"


class External(MechanismPair):
    """Adapter for a mechanism running as a child process.

    The child is spawned on first use and serves requests one at a time;
    concurrent callers should each hold their own adapter.
    """

    def __init__(self, command: str, timeout: float = 30.0):
        self.command = command
        self.timeout = float(timeout)
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._lock = threading.Lock()

    def __repr__(self):
        return f"External(command={self.command!r}, timeout={self.timeout})"

    def __eq__(self, other):
        return isinstance(other, External) and other.command == self.command

    def __hash__(self):
        return hash(("External", self.command))

    @property
    def spec(self):
        return f"cmd:{self.command}"

    def _start(self):
        try:
            self._proc = subprocess.Popen(
                self.command,
                shell=True,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise MechanismError(f"could not start {self.command!r}: {exc}") from exc
        threading.Thread(target=self._pump, args=(self._proc.stdout,), daemon=True).start()

    def _pump(self, stream):
        for line in stream:
            self._lines.put(line)
        self._lines.put(None)

    def _readline(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._kill()
            raise MechanismError(
                f"{self.command!r} did not answer within {self.timeout:g} s"
            ) from None
        if line is None:
            err = ""
            if self._proc is not None and self._proc.stderr is not None:
                self._proc.wait(timeout=self.timeout)
                err = self._proc.stderr.read().strip()
            self._proc = None
            raise MechanismError(
                f"{self.command!r} closed its output unexpectedly"
                + (f"; stderr: {err}" if err else "")
            )
        return line.rstrip("\r\n")

    def sample(self, which, count: int, seed: int) -> np.ndarray:
        count = check_positive_int(count, "count")
        tag = "DPRIME" if _side(which) else "D"
        with self._lock:
            if self._proc is None:
                self._start()
            try:
                self._proc.stdin.write(f"SAMPLE {tag} {count} {int(seed) & MASK64}\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise MechanismError(f"{self.command!r} is not accepting requests: {exc}") from exc
            values = np.empty(count)
            for i in range(count):
                line = self._readline()
                try:
                    values[i] = float(line)
                except ValueError:
                    raise MechanismError(
                        f"{self.command!r}: response line {i + 1} is not a number: {line!r}"
                    ) from None
                if not math.isfinite(values[i]):
                    raise MechanismError(
                        f"{self.command!r}: response line {i + 1} is not finite: {line!r}"
                    )
            tail = self._readline()
            if tail != "OK":
                raise MechanismError(f"{self.command!r}: expected 'OK' after {count} values, got {tail!r}")
        return values

    def _kill(self):
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def close(self):
        """Send ``QUIT`` and reap the child."""
        with self._lock:
            if self._proc is None:
                return
            try:
                self._proc.stdin.write("QUIT\n")
                self._proc.stdin.close()
                self._proc.wait(timeout=self.timeout)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
                self._proc.wait()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def sample(pair: MechanismPair, which, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. draws from ``P`` (``which='D'``) or ``P'`` (``'Dprime'``)."""
    return pair.sample(which, count, seed)


def _kv(body, text, required, optional=()):
    out = {}
    for item in filter(None, body.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"malformed parameter {item!r} in {text!r}")
        out[key.strip()] = val.strip()
    missing = set(required) - set(out)
    extra = set(out) - set(required) - set(optional)
    if missing or extra:
        raise ValueError(f"{text!r}: expected parameters {', '.join(required + tuple(optional))}")
    return out


def parse_mechanism(text: str, timeout: float = 30.0) -> MechanismPair:
    """Parse a mechanism specification string.

    Grammar: ``gaussian:mu=..,sigma=..``, ``laplace:mu=..,b=..``,
    ``unifshift:zeta=..``, ``truncgauss:sigma=..``, ``mixture:m=..[,instance=..]``,
    ``synthetic-separated`` and ``cmd:<shell command>``.
    """
    text = text.strip()
    kind, _, body = text.partition(":")
    kind = kind.lower()
    try:
        if kind == "cmd" and body.strip():
            return External(body.strip(), timeout=timeout)
        if kind == "gaussian":
            kv = _kv(body, text, ("mu", "sigma"))
            return GaussianShift(float(kv["mu"]), float(kv["sigma"]))
        if kind == "laplace":
            kv = _kv(body, text, ("mu", "b"))
            return LaplaceShift(float(kv["mu"]), float(kv["b"]))
        if kind == "unifshift":
            return UniformShift(float(_kv(body, text, ("zeta",))["zeta"]))
        if kind == "truncgauss":
            return TruncatedGaussianPair(float(_kv(body, text, ("sigma",))["sigma"]))
        if kind == "mixture":
            kv = _kv(body, text, ("m",), ("instance",))
            inst = int(kv["instance"], 0) if "instance" in kv else None
            return IntervalMixture(int(kv["m"]), inst)
        if kind == "synthetic-separated" and not body:
            return SeparatedFixture()
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise ValueError(f"malformed mechanism specification {text!r}: {exc}") from None
    raise ValueError(f"unrecognised mechanism specification {text!r}")
