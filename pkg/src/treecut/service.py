"""HTTP labeling service: runs any algorithm against a live human oracle.

Each session owns a worker thread that executes the algorithm; whenever the
algorithm needs a pair label that is not in the session's answer cache, the
worker parks and the pair surfaces as the pending question.  Request
handlers never block on the oracle: they only read the latest snapshot the
worker published, deliver answers, and wait for the worker to consume them.

Sessions persist as JSON after every human answer.  Restore replays the
cached answers against a fresh deterministic run, which lands the session
in exactly the state it had when the snapshot was written.
"""
from __future__ import annotations

import json
import os
import random
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Optional

from .baselines import run_bf
from .errors import TreecutError
from .hierarchy import Clustering, Hierarchy, count_cuts, cut_to_clustering
from .nr import ErmEngine, SamplerConfig, run_nr
from .oracles import NodeLabeler, PairOracle
from .priors import constant_prior, map_cut, uniform_prior
from .treeio import tree_from_dict, tree_to_dict
from .wdp import NwdpConfig, run_nwdp

ANSWER_WAIT_SECONDS = 30.0
FIRST_QUESTION_WAIT_SECONDS = 10.0


class SessionClosed(Exception):
    pass


class HumanBridgeOracle(PairOracle):
    """PairOracle backed by a human; persistence enforced by an answer cache."""

    def __init__(self, session: "Session"):
        super().__init__()
        self.session = session
        self.cache: dict[tuple[int, int], int] = {}
        self.human_queries = 0

    def _answer(self, a: int, b: int) -> int:
        key = (a, b)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        value = self.session.ask_human(a, b)
        self.cache[key] = value
        self.human_queries += 1
        return value


class Session:
    """One labeling session; all shared state is guarded by ``cond``."""

    def __init__(
        self,
        session_id: str,
        h: Hierarchy,
        algorithm: str,
        params: dict[str, Any],
        snapshot_path: Optional[str] = None,
        preload_answers: Optional[list[list[int]]] = None,
    ):
        self.id = session_id
        self.h = h
        self.algorithm = algorithm
        self.params = params
        self.snapshot_path = snapshot_path
        self.cond = threading.Condition()
        self.status = "running"
        self.pending: Optional[tuple[int, int, int]] = None  # (qid, leaf_a, leaf_b)
        self.answer_slot: Optional[int] = None
        self.answer_log: list[list[int]] = []
        self.next_question_id = 0
        self.published_seq = 0
        self.snapshot: dict[str, Any] = {"clusters": [], "k": 0}
        self.closed = False
        self.error: Optional[str] = None
        self.bridge = HumanBridgeOracle(self)
        if preload_answers:
            for a, b, v in preload_answers:
                self.bridge.cache[(min(a, b), max(a, b))] = v
                self.answer_log.append([a, b, v])
            self.bridge.human_queries = len(preload_answers)
            # Replayed answers consume no ids; resume numbering where the
            # interrupted run left off (one id per recorded answer).
            self.next_question_id = len(preload_answers)
        self._clustering_fn: Callable[[], Clustering] = lambda: Clustering(
            [[i] for i in range(h.n)]
        )
        self.worker = threading.Thread(target=self._run, daemon=True)

    def start(self) -> None:
        self.worker.start()

    # -- worker side -------------------------------------------------------

    def _run(self) -> None:
        try:
            runner = ALGORITHMS[self.algorithm]
            final = runner(self)
            with self.cond:
                self._publish_locked(final)
                self.status = "done"
                self.published_seq += 1
                self.cond.notify_all()
        except SessionClosed:
            pass
        except Exception as e:  # surfaced through the API, not the log
            with self.cond:
                self.status = "error"
                self.error = f"{type(e).__name__}: {e}"
                self.published_seq += 1
                self.cond.notify_all()

    def ask_human(self, a: int, b: int) -> int:
        """Worker thread: publish progress, park until the answer arrives."""
        with self.cond:
            if self.closed:
                raise SessionClosed()
            self._publish_locked(None)
            qid = self.next_question_id
            self.next_question_id += 1
            self.pending = (qid, a, b)
            self.answer_slot = None
            self.published_seq += 1
            self.cond.notify_all()
            while self.answer_slot is None:
                if self.closed:
                    raise SessionClosed()
                self.cond.wait()
            value = self.answer_slot
            self.answer_slot = None
            self.pending = None
            return value

    def _publish_locked(self, clustering: Optional[Clustering]) -> None:
        if clustering is None:
            clustering = self._clustering_fn()
        self.snapshot = {
            "clusters": clustering.to_lists(),
            "payload_clusters": [
                [self.h.payloads[i] for i in c] for c in clustering.to_lists()
            ],
            "k": clustering.k,
        }

    # -- handler side -------------------------------------------------------

    def question_view(self) -> dict[str, Any]:
        with self.cond:
            if self.status == "error":
                return {"error": self.error}
            if self.status == "done":
                return {"done": True, "clustering": self.snapshot}
            if self.pending is None:
                return {"waiting": True}
            qid, a, b = self.pending
            return {
                "question_id": qid,
                "leaf_a": a,
                "leaf_b": b,
                "payload_a": self.h.payloads[a],
                "payload_b": self.h.payloads[b],
            }

    def wait_for_question(self, timeout: float) -> None:
        deadline = time.monotonic() + timeout
        with self.cond:
            while (
                self.pending is None
                and self.status == "running"
                and not self.closed
            ):
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return
                self.cond.wait(remaining)

    def submit(self, question_id: int, similar: bool) -> dict[str, Any]:
        with self.cond:
            if self.pending is None or self.pending[0] != question_id:
                raise StaleQuestionError(question_id)
            _, a, b = self.pending
            self.pending = None  # duplicates and racing submits now get 409
            value = 1 if similar else -1
            self.answer_slot = value
            self.answer_log.append([a, b, value])
            seq = self.published_seq
            self.cond.notify_all()
            self._persist_locked()
            # Wait for the worker to consume the answer and publish, so the
            # reported progress reflects it (bounded wait; pure compute).
            deadline = time.monotonic() + ANSWER_WAIT_SECONDS
            while self.published_seq == seq and self.status == "running":
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                self.cond.wait(remaining)
            return {
                "accepted": True,
                "progress": self.progress_locked(),
            }

    def progress_locked(self) -> dict[str, Any]:
        return {
            "queries": self.bridge.human_queries,
            "answered": len(self.answer_log),
            "clusters": self.snapshot.get("k", 0),
            "status": self.status,
        }

    def stats_view(self) -> dict[str, Any]:
        with self.cond:
            return self.progress_locked()

    def clustering_view(self) -> dict[str, Any]:
        with self.cond:
            return dict(self.snapshot, status=self.status)

    def close(self) -> None:
        with self.cond:
            self.closed = True
            self.cond.notify_all()

    def _persist_locked(self) -> None:
        if self.snapshot_path is None:
            return
        payload = {
            "id": self.id,
            "tree": tree_to_dict(self.h),
            "algorithm": self.algorithm,
            "params": self.params,
            "answers": self.answer_log,
        }
        tmp = self.snapshot_path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(payload, fh)
        os.replace(tmp, self.snapshot_path)


class StaleQuestionError(Exception):
    pass


# ---------------------------------------------------------------------------
# Algorithm runners (worker-thread side)
# ---------------------------------------------------------------------------


def _make_prior(h: Hierarchy, params: dict[str, Any]):
    kind = params.get("prior", "uniform")
    if kind == "constant":
        return constant_prior(h, float(params.get("alpha_prior", 0.5)))
    return uniform_prior(h, count_cuts(h))


def _run_nwdp_session(session: Session) -> Clustering:
    h = session.h
    params = session.params
    rng = random.Random(int(params.get("seed", 0)))
    cfg = NwdpConfig(
        lam=float(params.get("lam", 0.0)),
        delta=float(params.get("delta", 0.05)),
        alpha=float(params.get("alpha", 0.0)),
        vote_multiplier=float(params.get("vote_multiplier", 0.0)),
        query_budget=params.get("budget"),
    )

    def on_state(state):
        session._clustering_fn = lambda: cut_to_clustering(
            h, map_cut(h, state.posterior())
        )

    res = run_nwdp(h, _make_prior(h, params), session.bridge, cfg, rng, on_state=on_state)
    return res.clustering


def _run_nr_session(session: Session) -> Clustering:
    h = session.h
    params = session.params
    rng = random.Random(int(params.get("seed", 0)))
    engine = ErmEngine(h)
    session._clustering_fn = engine.current_clustering
    cfg = SamplerConfig(
        delta=float(params.get("delta", 0.05)),
        c1=float(params.get("c1", 1.0)),
        c2=float(params.get("c2", 1.0)),
        n_cuts_bits=count_cuts(h)[h.root].bit_length(),
    )
    res = run_nr(
        h,
        session.bridge,
        cfg,
        rng,
        max_rounds=int(params.get("max_rounds", 200)),
        query_budget=params.get("budget"),
        engine=engine,
        collect_trace=False,
    )
    return res.clustering


def _run_bf_session(session: Session) -> Clustering:
    h = session.h
    params = session.params
    rng = random.Random(int(params.get("seed", 0)))
    labeler = NodeLabeler(
        session.bridge, h, rng, votes=int(params.get("votes", 1)),
        budget=params.get("budget"),
    )
    frontier_holder = {"nodes": [h.root]}
    session._clustering_fn = lambda: Clustering(
        [h.leaves_under(i) for i in frontier_holder["nodes"]]
    )

    def on_progress(boundary):
        frontier_holder["nodes"] = list(boundary)

    res = run_bf(h, labeler, budget=params.get("budget"), on_progress=on_progress)
    return res.clustering


ALGORITHMS: dict[str, Callable[[Session], Clustering]] = {
    "nwdp": _run_nwdp_session,
    "wdp": _run_nwdp_session,  # same runner; defaults make it noiseless
    "nr": _run_nr_session,
    "bf": _run_bf_session,
}


# ---------------------------------------------------------------------------
# HTTP server
# ---------------------------------------------------------------------------


class TreecutService:
    def __init__(self, snapshot_dir: Optional[str] = None, static_dir: Optional[str] = None):
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()
        self.snapshot_dir = snapshot_dir
        self.static_dir = static_dir
        self._counter = 0
        if snapshot_dir:
            os.makedirs(snapshot_dir, exist_ok=True)
            self._restore_all()

    def _restore_all(self) -> None:
        for name in sorted(os.listdir(self.snapshot_dir)):
            if not name.endswith(".json"):
                continue
            path = os.path.join(self.snapshot_dir, name)
            try:
                with open(path) as fh:
                    payload = json.load(fh)
                h = tree_from_dict(payload["tree"])
                session = Session(
                    payload["id"],
                    h,
                    payload["algorithm"],
                    payload["params"],
                    snapshot_path=path,
                    preload_answers=payload.get("answers"),
                )
                self.sessions[session.id] = session
                session.start()
            except Exception:
                continue

    def create_session(self, body: dict[str, Any]) -> dict[str, Any]:
        algorithm = body.get("algorithm")
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        tree_data = body.get("tree")
        if tree_data is None:
            raise ValueError("missing tree")
        h = tree_from_dict(tree_data)
        params = body.get("params", {})
        with self.lock:
            self._counter += 1
            session_id = f"s{self._counter:06d}"
        path = (
            os.path.join(self.snapshot_dir, f"{session_id}.json")
            if self.snapshot_dir
            else None
        )
        session = Session(session_id, h, algorithm, params, snapshot_path=path)
        with self.lock:
            self.sessions[session_id] = session
        session.start()
        session.wait_for_question(FIRST_QUESTION_WAIT_SECONDS)
        return {"id": session_id}

    def get(self, session_id: str) -> Session:
        with self.lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def delete(self, session_id: str) -> None:
        with self.lock:
            session = self.sessions.pop(session_id, None)
        if session is None:
            raise KeyError(session_id)
        session.close()
        if session.snapshot_path and os.path.exists(session.snapshot_path):
            os.remove(session.snapshot_path)


def make_handler(service: TreecutService):
    routes = [
        ("POST", re.compile(r"^/sessions$"), "create"),
        ("GET", re.compile(r"^/sessions/([^/]+)/question$"), "question"),
        ("POST", re.compile(r"^/sessions/([^/]+)/answer$"), "answer"),
        ("GET", re.compile(r"^/sessions/([^/]+)/clustering$"), "clustering"),
        ("GET", re.compile(r"^/sessions/([^/]+)/stats$"), "stats"),
        ("DELETE", re.compile(r"^/sessions/([^/]+)$"), "delete"),
    ]

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _json(self, code: int, payload: dict[str, Any]) -> None:
            data = json.dumps(payload).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(data)

        def _body(self) -> dict[str, Any]:
            length = int(self.headers.get("Content-Length", 0))
            if length == 0:
                return {}
            return json.loads(self.rfile.read(length))

        def _dispatch(self, method: str) -> None:
            for m, pattern, action in routes:
                if m != method:
                    continue
                match = pattern.match(self.path)
                if not match:
                    continue
                try:
                    self._handle(action, match)
                except KeyError:
                    self._json(404, {"error": "unknown session"})
                except StaleQuestionError as e:
                    self._json(409, {"error": f"stale or duplicate question id {e}"})
                except (ValueError, TreecutError, json.JSONDecodeError) as e:
                    self._json(400, {"error": str(e)})
                return
            if method == "GET" and self._try_static():
                return
            self._json(404, {"error": "no such endpoint"})

        def _try_static(self) -> bool:
            root = service.static_dir
            if not root:
                return False
            root_abs = os.path.abspath(root)
            rel = self.path.lstrip("/") or "index.html"
            path = os.path.abspath(os.path.join(root_abs, rel))
            if not path.startswith(root_abs + os.sep):
                return False
            if not os.path.isfile(path):
                return False
            ctype = "text/html"
            if path.endswith(".js"):
                ctype = "text/javascript"
            elif path.endswith(".css"):
                ctype = "text/css"
            with open(path, "rb") as fh:
                data = fh.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
            return True

        def _handle(self, action: str, match) -> None:
            if action == "create":
                self._json(200, service.create_session(self._body()))
            elif action == "question":
                session = service.get(match.group(1))
                self._json(200, session.question_view())
            elif action == "answer":
                session = service.get(match.group(1))
                body = self._body()
                result = session.submit(
                    int(body["question_id"]), bool(body["similar"])
                )
                self._json(200, result)
            elif action == "clustering":
                session = service.get(match.group(1))
                self._json(200, session.clustering_view())
            elif action == "stats":
                session = service.get(match.group(1))
                self._json(200, session.stats_view())
            elif action == "delete":
                service.delete(match.group(1))
                self._json(200, {"deleted": True})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_DELETE(self):
            self._dispatch("DELETE")

    return Handler


def make_server(
    port: int = 0,
    snapshot_dir: Optional[str] = None,
    static_dir: Optional[str] = None,
) -> tuple[ThreadingHTTPServer, TreecutService]:
    service = TreecutService(snapshot_dir=snapshot_dir, static_dir=static_dir)
    server = ThreadingHTTPServer(("127.0.0.1", port), make_handler(service))
    server.daemon_threads = True
    return server, service


def serve(port: int, snapshot_dir: Optional[str] = None, static_dir: Optional[str] = None) -> None:
    server, _ = make_server(port=port, snapshot_dir=snapshot_dir, static_dir=static_dir)
    print(f"listening on http://127.0.0.1:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
