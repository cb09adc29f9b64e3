"""Consensus transports: in-process reference and multi-process sockets.

Both transports execute the identical sequence of float64 operations per
round (own term first, then neighbors in ascending node order), so runs
are bit-identical across transports.  The engine also owns the run
accounting: per-node message counters and the simulated clock.

Simulated time is kept as round counts and converted on read
(``rounds * delay``), so straggler deltas are exact products rather than
long float sums.

Socket wire format, little-endian: magic ``DPSA``, u32 round index,
u32 rows, u32 cols, then rows*cols float64 payload, row-major.
"""

from __future__ import annotations

import socket
import struct
import threading
from dataclasses import dataclass
from multiprocessing import Pipe, Process

import numpy as np

from . import consensus
from .errors import FrameCorruption, PeerTimeout, ShapeMismatch
from .netgraph import WeightMatrix

FRAME_MAGIC = b"DPSA"
_HEADER = struct.Struct("<III")  # round, rows, cols


@dataclass(frozen=True)
class StragglerSpec:
    """One uniformly random node per consensus round is slowed by
    ``delay_seconds``; the victim draw is reseeded per round."""

    enabled: bool = False
    delay_seconds: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.delay_seconds < 0:
            raise ValueError("delay must be >= 0")

    def victim(self, round_index: int, n: int) -> int:
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, round_index)))
        return int(rng.integers(n))


class _EngineBase:
    """Shared accounting: P2P send counters, round counter, simulated clock.

    The clock is stored as event counts and converted on read, so long runs
    accumulate no float summation error.  Local compute is charged 0 by
    default; ``compute_seconds`` prices one outer iteration's local work
    for sensitivity studies (estimators call ``charge_compute`` once per
    outer iteration).
    """

    def __init__(self, weights: WeightMatrix, straggler: StragglerSpec | None = None,
                 base_round_seconds: float = 0.0, compute_seconds: float = 0.0):
        self.weights = weights
        self.straggler = straggler or StragglerSpec()
        self.base_round_seconds = base_round_seconds
        self.compute_seconds = compute_seconds
        self._degrees = weights.topology.degrees()
        self.p2p = np.zeros(weights.n, dtype=np.int64)
        self.rounds_run = 0
        self.delayed_rounds = 0
        self.compute_charges = 0

    @property
    def simulated_seconds(self) -> float:
        # Under synchrony the round takes as long as its slowest participant,
        # and every node participates in every consensus round.
        return (self.rounds_run * self.base_round_seconds
                + self.delayed_rounds * self.straggler.delay_seconds
                + self.compute_charges * self.compute_seconds)

    def charge_compute(self) -> None:
        self.compute_charges += 1

    def _account_round(self) -> None:
        self.p2p += self._degrees
        if self.straggler.enabled:
            self.straggler.victim(self.rounds_run, self.weights.n)
            self.delayed_rounds += 1
        self.rounds_run += 1

    def run_rounds(self, mats: list[np.ndarray], rounds: int) -> list[np.ndarray]:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class InProcessEngine(_EngineBase):
    """Single-process bulk-synchronous transport (the reference order)."""

    def run_rounds(self, mats: list[np.ndarray], rounds: int) -> list[np.ndarray]:
        for _ in range(rounds):
            self._account_round()
            mats = consensus.apply_round(mats, self.weights)
        return mats


def _pack_frame(round_index: int, mat: np.ndarray) -> bytes:
    payload = np.ascontiguousarray(mat, dtype="<f8").tobytes()
    return FRAME_MAGIC + _HEADER.pack(round_index, mat.shape[0], mat.shape[1]) + payload


def _recv_exact(sock: socket.socket, size: int, peer: int) -> bytes:
    buf = bytearray()
    while len(buf) < size:
        try:
            chunk = sock.recv(size - len(buf))
        except socket.timeout:
            raise PeerTimeout(f"peer {peer} timed out") from None
        if not chunk:
            raise PeerTimeout(f"peer {peer} closed the connection")
        buf.extend(chunk)
    return bytes(buf)


def recv_frame(sock: socket.socket, peer: int, expect_round: int | None = None) -> tuple[int, np.ndarray]:
    head = _recv_exact(sock, 4 + _HEADER.size, peer)
    if head[:4] != FRAME_MAGIC:
        raise FrameCorruption(f"bad magic {head[:4]!r} from peer {peer}")
    round_index, rows, cols = _HEADER.unpack(head[4:])
    if expect_round is not None and round_index != expect_round:
        raise FrameCorruption(
            f"peer {peer} sent round {round_index}, expected {expect_round}"
        )
    payload = _recv_exact(sock, 8 * rows * cols, peer)
    mat = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)
    return round_index, mat


def _node_worker(index: int, w_row: np.ndarray, self_weight: float,
                 peers: tuple[int, ...], host: str, base_port: int,
                 conn, timeout: float) -> None:
    """One OS process per node: connect to peers, then serve consensus runs."""
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    links: dict[int, socket.socket] = {}
    try:
        listener.bind((host, base_port + index))
        listener.listen(len(peers) + 1)
        listener.settimeout(timeout)
        conn.send(("listening",))
        if conn.recv() != ("connect",):
            return
        # Lower-index side of every edge gets connected to; higher side dials.
        for j in peers:
            if j < index:
                s = socket.create_connection((host, base_port + j), timeout=timeout)
                s.settimeout(timeout)
                s.sendall(struct.pack("<I", index))
                links[j] = s
        expected = sum(1 for j in peers if j > index)
        for _ in range(expected):
            s, _addr = listener.accept()
            s.settimeout(timeout)
            (peer_id,) = struct.unpack("<I", _recv_exact(s, 4, -1))
            links[peer_id] = s
        conn.send(("ready",))
        while True:
            msg = conn.recv()
            if msg[0] == "stop":
                break
            _, mat, rounds, round_start = msg
            z = np.array(mat, dtype=np.float64)
            for k in range(rounds):
                round_index = round_start + k
                frame = _pack_frame(round_index, z)

                def send_all():
                    for j in sorted(links):
                        links[j].sendall(frame)

                sender = threading.Thread(target=send_all)
                sender.start()
                received = {j: recv_frame(links[j], j, round_index)[1]
                            for j in sorted(links)}
                sender.join()
                acc = self_weight * z
                for j in sorted(links):
                    acc += w_row[j] * received[j]
                z = acc
            conn.send(("done", z))
    except Exception as exc:  # surfaced to the parent, which re-raises
        try:
            conn.send(("error", type(exc).__name__, str(exc)))
        except (BrokenPipeError, OSError):
            pass
    finally:
        for s in links.values():
            s.close()
        listener.close()


class SocketEngine(_EngineBase):
    """One OS process per node exchanging framed matrices over localhost TCP.

    Rendezvous is static: node i listens on ``base_port + i``.  Blocking
    per-round sends/receives give the bulk-synchronous barrier implicitly.
    """

    def __init__(self, weights: WeightMatrix, base_port: int = 56701,
                 host: str = "127.0.0.1", straggler: StragglerSpec | None = None,
                 base_round_seconds: float = 0.0, timeout: float = 30.0):
        super().__init__(weights, straggler, base_round_seconds)
        self.base_port = base_port
        self.host = host
        self.timeout = timeout
        topo = weights.topology
        self._pipes = []
        self._procs = []
        for i in range(topo.n):
            parent_end, child_end = Pipe()
            proc = Process(
                target=_node_worker,
                args=(i, weights.w[i].copy(), float(weights.w[i, i]),
                      topo.peers(i), host, base_port, child_end, timeout),
                daemon=True,
            )
            proc.start()
            self._pipes.append(parent_end)
            self._procs.append(proc)
        self._await_all("listening")
        for pipe in self._pipes:
            pipe.send(("connect",))
        self._await_all("ready")

    def _await_all(self, expected: str) -> None:
        for i, pipe in enumerate(self._pipes):
            if not pipe.poll(self.timeout):
                self.close()
                raise PeerTimeout(f"peer {i} did not report '{expected}'")
            msg = pipe.recv()
            if msg[0] == "error":
                self.close()
                self._reraise(i, msg)
            if msg[0] != expected:
                self.close()
                raise RuntimeError(f"peer {i} sent {msg[0]!r}, expected {expected!r}")

    @staticmethod
    def _reraise(index: int, msg) -> None:
        _, name, text = msg
        exc_type = {"PeerTimeout": PeerTimeout,
                    "FrameCorruption": FrameCorruption}.get(name, RuntimeError)
        raise exc_type(f"node {index}: {text}")

    def run_rounds(self, mats: list[np.ndarray], rounds: int) -> list[np.ndarray]:
        if len(mats) != self.weights.n:
            raise ShapeMismatch(
                f"{len(mats)} matrices for a {self.weights.n}-node network"
            )
        start = self.rounds_run
        for i, (pipe, mat) in enumerate(zip(self._pipes, mats)):
            try:
                pipe.send(("run", np.asarray(mat, dtype=np.float64), rounds, start))
            except (BrokenPipeError, OSError):
                raise PeerTimeout(f"peer {i} is gone") from None
        for _ in range(rounds):
            self._account_round()
        out: list[np.ndarray] = []
        for i, pipe in enumerate(self._pipes):
            if not pipe.poll(self.timeout + self.straggler.delay_seconds * rounds):
                raise PeerTimeout(f"peer {i} did not finish the consensus run")
            try:
                msg = pipe.recv()
            except EOFError:
                raise PeerTimeout(f"peer {i} is gone") from None
            if msg[0] == "error":
                self._reraise(i, msg)
            out.append(msg[1])
        return out

    def close(self) -> None:
        for pipe, proc in zip(self._pipes, self._procs):
            try:
                if proc.is_alive():
                    pipe.send(("stop",))
            except (BrokenPipeError, OSError):
                pass
        for proc in self._procs:
            proc.join(timeout=2.0)
            if proc.is_alive():
                proc.terminate()
