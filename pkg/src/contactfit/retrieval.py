"""Object retrieval, contact-annotation lookup, and the external size/part oracle.

Stores are small (hundreds of records), so every query is an exhaustive scan
with deterministic tie-breaking by record id.
"""

from __future__ import annotations

import json
import os
import re
import urllib.request
from dataclasses import dataclass, field

import numpy as np

from .body import PART_NAMES
from .errors import (
    DimensionMismatchError,
    EmptyStoreError,
    MalformedAnswerError,
    MissingCannedEntryError,
)

ORACLE_MODE_ENV = "PICO_ORACLE_MODE"
ORACLE_ENDPOINT_ENV = "PICO_ORACLE_ENDPOINT"
ORACLE_FILE_ENV = "PICO_ORACLE_FILE"

SCALE_PROMPT = (
    "How big is the <OBJECT> in the <IMAGE> that the human is interacting with? "
    "Use the other objects and the scale of the human to estimate the size. "
    "Answer should be single number, in meters, that corresponds to the length "
    "of the longest side of the <OBJECT>."
)

PARTS_PROMPT = (
    "List the body parts of the human that are in contact with the <OBJECT> "
    "(touching or supporting the object) in this <IMAGE>. "
    "These are all the body parts to consider: " + ", ".join(PART_NAMES) + ". "
    "Answer should be only a comma-separated list of the body parts, nothing else."
)


@dataclass
class EmbeddingRecord:
    object_id: str
    vector: np.ndarray
    mesh_path: str
    category: str

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float32)
        if float(np.linalg.norm(self.vector)) == 0.0:
            raise ValueError(f"record {self.object_id} has a zero embedding")


@dataclass
class EmbeddingStore:
    records: list
    dimension: int

    def __post_init__(self):
        for r in self.records:
            if len(r.vector) != self.dimension:
                raise DimensionMismatchError(
                    f"record {r.object_id} has dimension {len(r.vector)}, "
                    f"store is {self.dimension}")


@dataclass
class ContactAnnotationRecord:
    record_id: str
    image_id: str
    body_contacts: frozenset
    object_id: str
    patches: list = field(default_factory=list)  # serialized per-patch payloads
    object_scale: float = 1.0

    def __post_init__(self):
        self.body_contacts = frozenset(int(v) for v in self.body_contacts)
        if not self.body_contacts:
            raise ValueError(f"annotation {self.record_id} has no body contacts")


@dataclass
class OracleResponse:
    scale: float = None
    parts: list = None
    provenance: str = "canned"

    def __post_init__(self):
        if self.scale is not None and self.scale <= 0:
            raise ValueError("oracle scale must be positive")
        if self.parts is not None:
            for p in self.parts:
                if p not in PART_NAMES:
                    raise ValueError(f"oracle part {p!r} not in the part vocabulary")


def nn_objects(store: EmbeddingStore, query, k: int = 3) -> list:
    """Top-k records by cosine similarity, ties broken by ascending object id."""
    if not store.records:
        raise EmptyStoreError("embedding store is empty")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (store.dimension,):
        raise DimensionMismatchError(
            f"query has dimension {q.shape}, store is {store.dimension}")
    if k < 1:
        raise ValueError("k must be at least 1")
    qn = float(np.linalg.norm(q))
    scored = []
    for r in store.records:
        v = r.vector.astype(np.float64)
        sim = 0.0 if qn == 0 else float(np.dot(v, q) / (np.linalg.norm(v) * qn))
        scored.append((-sim, r.object_id, r))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [r for _, _, r in scored[:k]]


def contact_iou(a: frozenset, b: frozenset) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def nn_contact_annotation(records: list, query_contacts) -> ContactAnnotationRecord:
    """The annotation whose body-contact set maximizes IoU with the query."""
    if not records:
        raise EmptyStoreError("no contact annotations to search")
    q = frozenset(int(v) for v in query_contacts)
    best = None
    for r in sorted(records, key=lambda r: r.record_id):
        score = contact_iou(q, r.body_contacts)
        if best is None or score > best[0]:
            best = (score, r)
    return best[1]


def refine_contacts(deco: set, oracle: OracleResponse, part_map: dict) -> set:
    """Apply oracle part hints to a predicted contact set.

    Foot-part vertices are removed when the oracle does not list that foot
    part; every oracle part with no predicted vertices contributes its full
    vertex set. Idempotent for a fixed oracle response.
    """
    from .body import FOOT_PARTS

    deco = {int(v) for v in deco}
    oracle_parts = set(oracle.parts or [])
    for p in oracle_parts:
        if p not in PART_NAMES:
            raise ValueError(f"unknown oracle part {p!r}")
    out = set(deco)
    for foot in FOOT_PARTS:
        if foot not in oracle_parts:
            out -= set(part_map.get(foot, ()))
    for part in sorted(oracle_parts):
        verts = set(part_map.get(part, ()))
        if not (deco & verts):
            out |= verts
    return out


@dataclass
class OracleClient:
    """Size/contact-part oracle: canned file lookups or a live HTTP endpoint."""

    mode: str = "canned"
    canned_path: str = None
    endpoint: str = None
    timeout: float = 10.0
    retries: int = 2

    @staticmethod
    def from_env() -> "OracleClient":
        mode = os.environ.get(ORACLE_MODE_ENV, "canned")
        return OracleClient(
            mode=mode,
            canned_path=os.environ.get(ORACLE_FILE_ENV),
            endpoint=os.environ.get(ORACLE_ENDPOINT_ENV),
        )

    def query(self, image_id: str, object_label: str) -> OracleResponse:
        if self.mode == "canned":
            return self._query_canned(image_id)
        if self.mode == "live":
            return self._query_live(image_id, object_label)
        raise ValueError(f"unknown oracle mode {self.mode!r}")

    def _query_canned(self, image_id: str) -> OracleResponse:
        if not self.canned_path or not os.path.exists(self.canned_path):
            raise MissingCannedEntryError("canned oracle file not configured")
        with open(self.canned_path, "r", encoding="utf-8") as f:
            table = json.load(f)
        if image_id not in table:
            raise MissingCannedEntryError(f"no canned oracle entry for {image_id!r}")
        entry = table[image_id]
        return OracleResponse(scale=entry.get("scale"),
                              parts=entry.get("parts"),
                              provenance="canned")

    def _query_live(self, image_id: str, object_label: str) -> OracleResponse:
        scale_answer = self._post({
            "image_id": image_id,
            "object_label": object_label,
            "prompt": SCALE_PROMPT.replace("<OBJECT>", object_label),
        })
        scale = parse_scale_answer(scale_answer)
        parts_answer = self._post({
            "image_id": image_id,
            "object_label": object_label,
            "prompt": PARTS_PROMPT.replace("<OBJECT>", object_label),
        })
        parts = parse_parts_answer(parts_answer)
        return OracleResponse(scale=scale, parts=parts, provenance="live")

    def _post(self, payload: dict) -> str:
        if not self.endpoint:
            raise ValueError("live oracle endpoint not configured")
        body = json.dumps(payload).encode("utf-8")
        last_error = None
        for _ in range(self.retries + 1):
            try:
                req = urllib.request.Request(
                    self.endpoint, data=body,
                    headers={"Content-Type": "application/json"})
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    reply = json.loads(resp.read().decode("utf-8"))
                return str(reply.get("answer", ""))
            except OSError as e:
                last_error = e
        raise last_error


_NUMBER_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?(?:[eE][-+]?[0-9]+)?)\s*$")


def parse_scale_answer(text: str) -> float:
    """A scale reply must be a single number (meters)."""
    m = _NUMBER_RE.match(text)
    if not m:
        raise MalformedAnswerError(f"scale reply is not a single number: {text!r}")
    value = float(m.group(1))
    if value <= 0:
        raise MalformedAnswerError(f"scale must be positive, got {value}")
    return value


def parse_parts_answer(text: str) -> list:
    """A parts reply must be a comma-separated list from the part vocabulary."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise MalformedAnswerError("empty body-part list")
    for p in parts:
        if p not in PART_NAMES:
            raise MalformedAnswerError(f"unknown body part in reply: {p!r}")
    return parts


def oracle_query(client: OracleClient, image_id: str, object_label: str) -> OracleResponse:
    return client.query(image_id, object_label)
