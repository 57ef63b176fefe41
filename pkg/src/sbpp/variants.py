"""Protocol variant ladder for the attack comparison.

Nine variants share one client/server interface so attack scripts can run
unchanged against each rung:

  V1  plaintext cell search, proof bound to (drop, pv, epoch) only
  V2  encrypted search (tokens), same context-only proof binding
  V3  V2 plus an app-layer nonce echo checked beside the proof
  V4a core protocol: session nonce inside the proof digest, stateful
      result-set check
  V4b full protocol: nonce and result-set Merkle root inside the digest
  V5  context-only proof plus a server-signed per-drop capability
  V6  server-signed per-drop permit, no proximity proof at all
  V7  context-only proof plus a server MAC over the result-id list
  V8  proof digest commits to the hash of an opaque signed token (which
      carries the nonce, and the root unless built "lite")

V4a/V4b delegate to the protocol module; the rest run on a generic engine
driven by per-variant traits.  Verification order mirrors the core pipeline
(session, echo, evidence, digest, membership, proof, consume) so rejects are
comparable across rungs.

Attack adapters model an adversary who can re-route anything it computed
itself (session ids, nonce echoes, membership paths) but cannot mint
server-signed evidence for a context the server never issued it for.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

from . import nizk
from .canon import FieldElement, cd_core, cd_full, digest, lp_decode, lp_encode
from .geoindex import (
    Drop,
    PlainIndex,
    build_index,
    client_tokens,
    geohash_encode,
    geohash_neighbors,
    precision_for_radius,
)
from .merkle import MerklePath, build_tree, verify_membership
from .protocol import (
    AuditOutcome,
    AuditRecord,
    CandidateMeta,
    ClientSession,
    R_CONSUMED,
    R_EXPIRED,
    R_MERKLE_INVALID,
    R_NONCE_DIGEST,
    R_NOT_IN_RESULT_SET,
    R_PROOF_INVALID,
    R_RECEIPT_SIG,
    R_SESSION_INVALID,
    SbppClient,
    SbppServer,
    UnlockRequest,
    VerifyOutcome,
    audit as sbpp_audit,
    emit_audit_record,
)
from .receipt import SigningKey
from .session import (
    MODE_CORE,
    MODE_FULL,
    ConsumedSessionError,
    ExpiredSessionError,
    SessionStore,
    UnknownSessionError,
)

VARIANT_KINDS = ("V1", "V2", "V3", "V4a", "V4b", "V5", "V6", "V7", "V8")

# Additional rejection reasons used by the comparison rungs.
R_NONCE_ECHO = "nonce-echo-mismatch"
R_EVIDENCE_INVALID = "evidence-invalid"
R_TOKEN_HASH = "token-hash-mismatch"
R_TOKEN_SIG = "token-sig-invalid"

DOMAIN_CAPABILITY = "V5-CAP"
DOMAIN_PERMIT = "V6-PERMIT"
DOMAIN_MAC = "V7-MAC"
DOMAIN_TOKEN_FULL = "V8-TOKEN-FULL"
DOMAIN_TOKEN_LITE = "V8-TOKEN-LITE"


class VariantError(ValueError):
    pass


def context_digest(drop_id: str, pv: str, epoch: str) -> FieldElement:
    """Session-agnostic challenge digest used by the pre-binding rungs."""
    return digest([drop_id, pv, epoch])


@dataclass(frozen=True)
class VariantEnv:
    """Deterministic material shared by every rung of one comparison run."""

    drops: list[Drop]
    search_key: bytes
    signing_key: SigningKey
    proving_key: bytes
    verifying_key: bytes
    mac_key: bytes
    precisions: tuple[int, ...] = (5,)
    ttl_s: int = 300
    pv: str = "1"
    epoch: str = "ep0"
    unlock_radius_m: float = 1000.0
    nonce_rng: random.Random | None = None


@dataclass(frozen=True)
class VariantTraits:
    kind: str
    plaintext_search: bool = False
    session_aware: bool = True
    nonce_echo: bool = False
    digest_kind: str | None = "context"  # context | token | None
    evidence: str | None = None  # capability | permit | mac | token
    has_proof: bool = True
    token_includes_root: bool = True


_GENERIC_TRAITS = {
    "V1": VariantTraits("V1", plaintext_search=True, session_aware=False),
    "V2": VariantTraits("V2", session_aware=False),
    "V3": VariantTraits("V3", nonce_echo=True),
    "V5": VariantTraits("V5", evidence="capability"),
    "V6": VariantTraits("V6", evidence="permit", digest_kind=None, has_proof=False),
    "V7": VariantTraits("V7", evidence="mac"),
    "V8": VariantTraits("V8", evidence="token", digest_kind="token"),
}


@dataclass
class VariantSession:
    """Client-side artifacts for one session under any rung."""

    S: str
    N: bytes
    t_exp: int
    pv: str = "1"
    epoch: str = "ep0"
    candidates: tuple[CandidateMeta, ...] = ()
    capabilities: dict[str, bytes] = field(default_factory=dict)
    permits: dict[str, bytes] = field(default_factory=dict)
    result_mac: bytes | None = None
    token: bytes | None = None
    inner: ClientSession | None = None  # set by the V4a/V4b wrapper

    def result_ids(self) -> list[str]:
        return [c.id for c in self.candidates]

    def candidate(self, drop_id: str) -> CandidateMeta:
        for c in self.candidates:
            if c.id == drop_id:
                return c
        raise VariantError(f"{drop_id!r} is not in this session's result list")


@dataclass(frozen=True)
class VariantRequest:
    S: str
    drop_id: str
    pub: nizk.PublicInputs | None
    proof: nizk.Proof | None
    pv: str
    epoch: str
    merkle_path: MerklePath | None = None
    nonce_echo: bytes | None = None
    capability: bytes | None = None
    permit: bytes | None = None
    result_ids: tuple[str, ...] | None = None
    result_mac: bytes | None = None


@dataclass(frozen=True)
class VariantAuditRecord:
    """Offline evidence bundle; which fields are set depends on the rung."""

    kind: str
    drop_id: str
    pv: str
    epoch: str
    pub: nizk.PublicInputs | None = None
    proof: nizk.Proof | None = None
    path: MerklePath | None = None
    capability: bytes | None = None
    permit: bytes | None = None
    claimed_S: str | None = None
    result_ids: tuple[str, ...] | None = None
    result_mac: bytes | None = None
    token: bytes | None = None
    sbpp: AuditRecord | None = None


# ---------------------------------------------------------------------------
# signed sidecar blobs (capabilities, permits, tokens)


def _sign_blob(key: SigningKey, fields: list[bytes | str]) -> bytes:
    body = lp_encode(fields)
    return body + lp_encode([key.signer().sign(body)])


def _verify_blob(public_bytes: bytes, blob: bytes, domain: str) -> list[bytes] | None:
    """Parsed fields (sans signature) if the blob is well-formed and signed."""
    try:
        fields = lp_decode(blob)
    except ValueError:
        return None
    if len(fields) < 2 or fields[0] != domain.encode("ascii"):
        return None
    body = lp_encode(fields[:-1])
    try:
        Ed25519PublicKey.from_public_bytes(public_bytes).verify(fields[-1], body)
    except (InvalidSignature, ValueError):
        return None
    return fields[:-1]


def _mac_tag(mac_key: bytes, S: str, pv: str, epoch: str, ids: tuple[str, ...]) -> bytes:
    msg = lp_encode([DOMAIN_MAC, S, pv, epoch, *ids])
    return hmac.new(mac_key, msg, hashlib.sha256).digest()


# ---------------------------------------------------------------------------
# generic engine for V1-V3 and V5-V8


class GenericVariant:
    def __init__(self, traits: VariantTraits, env: VariantEnv):
        self.traits = traits
        self.kind = traits.kind
        self.env = env
        self.has_proximity_proof = traits.has_proof
        self.drops = {d.id: d for d in env.drops}
        self.sessions = SessionStore(
            ttl_s=env.ttl_s, pv=env.pv, epoch=env.epoch, nonce_rng=env.nonce_rng
        )
        if traits.plaintext_search:
            self.plain_index = PlainIndex(env.drops, list(env.precisions))
        else:
            self.index = build_index(env.search_key, env.drops, list(env.precisions))
        self.token_by_session: dict[str, bytes] = {}

    def set_epoch(self, epoch: str) -> None:
        self.sessions.epoch = epoch

    # -- client/server flow

    def open_session(self, now: int) -> VariantSession:
        record = self.sessions.issue(now, mode=MODE_CORE)
        return VariantSession(
            S=record.S, N=record.N, t_exp=record.t_exp, pv=record.pv, epoch=record.epoch
        )

    def _match(self, lat: float, lon: float, radius_m: float) -> list[str]:
        if self.traits.plaintext_search:
            p = precision_for_radius(radius_m, lat)
            center = geohash_encode(lat, lon, p)
            return self.plain_index.match(p, [center] + geohash_neighbors(center))
        _, tags = client_tokens(self.env.search_key, lat, lon, radius_m)
        return self.index.match(tags)

    def search(
        self, vses: VariantSession, lat: float, lon: float, radius_m: float, now: int
    ) -> VariantSession:
        ids = self._match(lat, lon, radius_m)
        pv, epoch = vses.pv, vses.epoch
        if not ids:
            vses.candidates = ()
            return vses
        if self.traits.session_aware:
            self.sessions.bind_results(vses.S, ids, MODE_CORE, now)
        if self.traits.evidence == "capability":
            for i in ids:
                vses.capabilities[i] = _sign_blob(
                    self.env.signing_key, [DOMAIN_CAPABILITY, vses.S, i, pv, epoch]
                )
        elif self.traits.evidence == "permit":
            for i in ids:
                vses.permits[i] = _sign_blob(
                    self.env.signing_key, [DOMAIN_PERMIT, vses.S, i, pv, epoch]
                )
        elif self.traits.evidence == "mac":
            vses.result_mac = _mac_tag(self.env.mac_key, vses.S, pv, epoch, tuple(ids))
        elif self.traits.evidence == "token":
            if self.traits.token_includes_root:
                root = build_tree(ids).root
                token = _sign_blob(
                    self.env.signing_key, [DOMAIN_TOKEN_FULL, vses.S, vses.N, root, pv, epoch]
                )
            else:
                token = _sign_blob(
                    self.env.signing_key, [DOMAIN_TOKEN_LITE, vses.S, vses.N, pv, epoch]
                )
            self.token_by_session[vses.S] = token
            vses.token = token
        vses.candidates = tuple(
            CandidateMeta(
                id=i,
                lat=self.drops[i].lat,
                lon=self.drops[i].lon,
                radius_m=self.env.unlock_radius_m,
                pv=pv,
                epoch=epoch,
            )
            for i in ids
        )
        return vses

    def _client_digest(self, vses: VariantSession, drop_id: str, pv: str, epoch: str) -> FieldElement:
        if self.traits.digest_kind == "token":
            if vses.token is None:
                raise VariantError("no token issued for this session")
            return digest([vses.token])
        return context_digest(drop_id, pv, epoch)

    def build_unlock(
        self, vses: VariantSession, drop_id: str, witness: nizk.Witness
    ) -> VariantRequest:
        target = vses.candidate(drop_id)
        pub = proof = None
        if self.traits.has_proof:
            cd = self._client_digest(vses, drop_id, target.pv, target.epoch)
            pub = nizk.make_public_inputs(target.lat, target.lon, target.radius_m, cd)
            proof = nizk.prove(self.env.proving_key, witness, pub)
        path = None
        if self.traits.evidence == "token" and self.traits.token_includes_root:
            path = build_tree(vses.result_ids()).prove_membership(drop_id)
        return VariantRequest(
            S=vses.S,
            drop_id=drop_id,
            pub=pub,
            proof=proof,
            pv=target.pv,
            epoch=target.epoch,
            merkle_path=path,
            nonce_echo=vses.N if self.traits.nonce_echo else None,
            capability=vses.capabilities.get(drop_id),
            permit=vses.permits.get(drop_id),
            result_ids=tuple(vses.result_ids()) if self.traits.evidence == "mac" else None,
            result_mac=vses.result_mac,
        )

    def _statement_ok(self, request: VariantRequest) -> bool:
        drop = self.drops.get(request.drop_id)
        if drop is None or request.pub is None:
            return False
        try:
            expected = nizk.make_public_inputs(
                drop.lat, drop.lon, self.env.unlock_radius_m, request.pub[7]
            )
        except nizk.NizkError:
            return False
        return expected.elements[:7] == request.pub.elements[:7]

    def verify(self, request: VariantRequest, now: int) -> VerifyOutcome:
        record = None
        if self.traits.session_aware:
            try:
                record = self.sessions.validate(request.S, now)
            except UnknownSessionError:
                return VerifyOutcome(False, R_SESSION_INVALID)
            except ExpiredSessionError:
                return VerifyOutcome(False, R_EXPIRED)
            except ConsumedSessionError:
                return VerifyOutcome(False, R_CONSUMED)
        pv = record.pv if record is not None else request.pv
        epoch = record.epoch if record is not None else request.epoch
        if self.traits.nonce_echo:
            if record is None or request.nonce_echo != record.N:
                return VerifyOutcome(False, R_NONCE_ECHO)
        # server-issued sidecar evidence
        if self.traits.evidence == "capability":
            fields = _verify_blob(
                self.env.signing_key.public_bytes, request.capability or b"", DOMAIN_CAPABILITY
            )
            if fields is None or [f.decode() for f in fields[1:]] != [
                request.S,
                request.drop_id,
                pv,
                epoch,
            ]:
                return VerifyOutcome(False, R_EVIDENCE_INVALID)
        elif self.traits.evidence == "permit":
            fields = _verify_blob(
                self.env.signing_key.public_bytes, request.permit or b"", DOMAIN_PERMIT
            )
            if fields is None or [f.decode() for f in fields[1:]] != [
                request.S,
                request.drop_id,
                pv,
                epoch,
            ]:
                return VerifyOutcome(False, R_EVIDENCE_INVALID)
        elif self.traits.evidence == "mac":
            if request.result_ids is None or request.result_mac is None:
                return VerifyOutcome(False, R_EVIDENCE_INVALID)
            expected_mac = _mac_tag(self.env.mac_key, request.S, pv, epoch, request.result_ids)
            if not hmac.compare_digest(expected_mac, request.result_mac):
                return VerifyOutcome(False, R_EVIDENCE_INVALID)
            if request.drop_id not in request.result_ids:
                return VerifyOutcome(False, R_NOT_IN_RESULT_SET)
        # challenge digest
        token = None
        if self.traits.digest_kind == "token":
            token = self.token_by_session.get(request.S)
            if token is None:
                return VerifyOutcome(False, R_SESSION_INVALID)
            if request.pub is None or request.pub[7] != digest([token]):
                return VerifyOutcome(False, R_TOKEN_HASH)
        elif self.traits.digest_kind == "context":
            if request.pub is None or request.pub[7] != context_digest(
                request.drop_id, pv, epoch
            ):
                return VerifyOutcome(False, R_NONCE_DIGEST)
        # membership (only the token rung checks it, against the token's root)
        if self.traits.evidence == "token":
            if self.traits.token_includes_root:
                fields = lp_decode(token)
                root = fields[3]
                if request.merkle_path is None or not verify_membership(
                    root, request.drop_id, request.merkle_path
                ):
                    return VerifyOutcome(False, R_MERKLE_INVALID)
            else:
                assert record is not None
                if record.result_set is None or request.drop_id not in record.result_set:
                    return VerifyOutcome(False, R_NOT_IN_RESULT_SET)
        # proximity proof
        if self.traits.has_proof:
            if not self._statement_ok(request):
                return VerifyOutcome(False, R_PROOF_INVALID)
            assert request.pub is not None and request.proof is not None
            if not nizk.verify(self.env.verifying_key, request.pub, request.proof):
                return VerifyOutcome(False, R_PROOF_INVALID)
        if self.traits.session_aware:
            if not self.sessions.consume(request.S, now):
                return VerifyOutcome(False, R_CONSUMED)
        return VerifyOutcome(True)

    # -- offline audit

    def audit_record(self, vses: VariantSession, request: VariantRequest) -> VariantAuditRecord:
        return VariantAuditRecord(
            kind=self.kind,
            drop_id=request.drop_id,
            pv=request.pv,
            epoch=request.epoch,
            pub=request.pub,
            proof=request.proof,
            path=request.merkle_path,
            capability=request.capability,
            permit=request.permit,
            claimed_S=request.S,
            result_ids=request.result_ids,
            result_mac=request.result_mac,
            token=vses.token,
        )

    def audit(self, rec: VariantAuditRecord) -> AuditOutcome:
        public = self.env.signing_key.public_bytes
        if self.traits.evidence == "capability":
            fields = _verify_blob(public, rec.capability or b"", DOMAIN_CAPABILITY)
            if fields is None:
                return AuditOutcome(False, R_EVIDENCE_INVALID)
            if fields[2].decode() != rec.drop_id:
                return AuditOutcome(False, R_EVIDENCE_INVALID)
        elif self.traits.evidence == "permit":
            fields = _verify_blob(public, rec.permit or b"", DOMAIN_PERMIT)
            if fields is None or fields[2].decode() != rec.drop_id:
                return AuditOutcome(False, R_EVIDENCE_INVALID)
            return AuditOutcome(True)  # nothing else to attest: no proof exists
        elif self.traits.evidence == "mac":
            if rec.result_ids is None or rec.result_mac is None or rec.claimed_S is None:
                return AuditOutcome(False, R_EVIDENCE_INVALID)
            expected_mac = _mac_tag(self.env.mac_key, rec.claimed_S, rec.pv, rec.epoch, rec.result_ids)
            if not hmac.compare_digest(expected_mac, rec.result_mac):
                return AuditOutcome(False, R_EVIDENCE_INVALID)
            if rec.drop_id not in rec.result_ids:
                return AuditOutcome(False, R_NOT_IN_RESULT_SET)
        elif self.traits.evidence == "token":
            # Opaque-token audit: the only anchor is pub[7] == H(token), so any
            # token-level tampering collapses into the same symptom.
            if rec.pub is None or rec.token is None or rec.pub[7] != digest([rec.token]):
                return AuditOutcome(False, R_TOKEN_HASH)
            domain = DOMAIN_TOKEN_FULL if self.traits.token_includes_root else DOMAIN_TOKEN_LITE
            fields = _verify_blob(public, rec.token, domain)
            if fields is None:
                return AuditOutcome(False, R_TOKEN_SIG)
            if self.traits.token_includes_root:
                root = fields[3]
                if rec.path is None or not verify_membership(root, rec.drop_id, rec.path):
                    return AuditOutcome(False, R_MERKLE_INVALID)
        if self.traits.digest_kind == "context":
            if rec.pub is None or rec.pub[7] != context_digest(rec.drop_id, rec.pv, rec.epoch):
                return AuditOutcome(False, R_NONCE_DIGEST)
        if self.traits.has_proof:
            if rec.pub is None or rec.proof is None:
                return AuditOutcome(False, R_PROOF_INVALID)
            if not nizk.verify(self.env.verifying_key, rec.pub, rec.proof):
                return AuditOutcome(False, R_PROOF_INVALID)
        return AuditOutcome(True)

    # -- adversary adapters

    def rebind_request(self, request: VariantRequest, target: VariantSession) -> VariantRequest:
        """Re-route a request to another session, adapting only what the
        adversary can recompute (id, echo, membership path)."""
        path = request.merkle_path
        if self.traits.evidence == "token" and self.traits.token_includes_root:
            ids = target.result_ids()
            if request.drop_id in ids:
                path = build_tree(ids).prove_membership(request.drop_id)
        return VariantRequest(
            S=target.S,
            drop_id=request.drop_id,
            pub=request.pub,
            proof=request.proof,
            pv=request.pv,
            epoch=request.epoch,
            merkle_path=path,
            nonce_echo=target.N if self.traits.nonce_echo else None,
            capability=request.capability,
            permit=request.permit,
            result_ids=request.result_ids,
            result_mac=request.result_mac,
        )

    def retarget_request(
        self, request: VariantRequest, vses: VariantSession, new_drop_id: str
    ) -> VariantRequest:
        """Point a request at a different drop while keeping its proximity
        attestation (the proof, or for V6 the permit)."""
        path = request.merkle_path
        if self.traits.evidence == "token" and self.traits.token_includes_root:
            ids = vses.result_ids()
            if new_drop_id in ids:
                path = build_tree(ids).prove_membership(new_drop_id)
        return VariantRequest(
            S=request.S,
            drop_id=new_drop_id,
            pub=request.pub,
            proof=request.proof,
            pv=request.pv,
            epoch=request.epoch,
            merkle_path=path,
            nonce_echo=request.nonce_echo,
            capability=vses.capabilities.get(new_drop_id),
            permit=request.permit,
            result_ids=request.result_ids,
            result_mac=request.result_mac,
        )

    def build_nonmember_unlock(
        self, vses: VariantSession, drop: Drop, witness: nizk.Witness
    ) -> VariantRequest:
        """Attempt an unlock for a drop the search never returned.  The
        adversary follows the client procedure as far as it can."""
        pv, epoch = vses.pv, vses.epoch
        pub = proof = None
        if self.traits.has_proof:
            if self.traits.digest_kind == "token":
                cd = digest([vses.token]) if vses.token is not None else FieldElement(0)
            else:
                cd = context_digest(drop.id, pv, epoch)
            pub = nizk.make_public_inputs(drop.lat, drop.lon, self.env.unlock_radius_m, cd)
            proof = nizk.prove(self.env.proving_key, witness, pub)
        path = None
        ids = vses.result_ids()
        if self.traits.evidence == "token" and self.traits.token_includes_root and ids:
            path = build_tree(ids).prove_membership(ids[0])  # best effort: stolen path
        return VariantRequest(
            S=vses.S,
            drop_id=drop.id,
            pub=pub,
            proof=proof,
            pv=pv,
            epoch=epoch,
            merkle_path=path,
            nonce_echo=vses.N if self.traits.nonce_echo else None,
            capability=None,  # never issued for a non-member
            permit=None,
            result_ids=tuple(ids) if self.traits.evidence == "mac" else None,
            result_mac=vses.result_mac,
        )

    def splice_records(
        self, proof_rec: VariantAuditRecord, ctx_rec: VariantAuditRecord
    ) -> VariantAuditRecord:
        """Pair one record's proof with another record's session evidence."""
        return VariantAuditRecord(
            kind=self.kind,
            drop_id=ctx_rec.drop_id,
            pv=ctx_rec.pv,
            epoch=ctx_rec.epoch,
            pub=proof_rec.pub,
            proof=proof_rec.proof,
            path=proof_rec.path,
            capability=ctx_rec.capability,
            permit=ctx_rec.permit,
            claimed_S=ctx_rec.claimed_S,
            result_ids=ctx_rec.result_ids,
            result_mac=ctx_rec.result_mac,
            token=ctx_rec.token,
        )

    def fabricate_nonmember_record(
        self, vses: VariantSession, drop: Drop, witness: nizk.Witness
    ) -> VariantAuditRecord:
        request = self.build_nonmember_unlock(vses, drop, witness)
        return VariantAuditRecord(
            kind=self.kind,
            drop_id=drop.id,
            pv=request.pv,
            epoch=request.epoch,
            pub=request.pub,
            proof=request.proof,
            path=request.merkle_path,
            capability=vses.capabilities.get(next(iter(vses.capabilities), ""), None),
            permit=vses.permits.get(next(iter(vses.permits), ""), None),
            claimed_S=vses.S,
            result_ids=request.result_ids,
            result_mac=request.result_mac,
            token=vses.token,
        )


# ---------------------------------------------------------------------------
# V4a / V4b: the protocol itself behind the same interface


class SbppVariant:
    def __init__(self, kind: str, env: VariantEnv):
        if kind not in ("V4a", "V4b"):
            raise VariantError(f"not a protocol rung: {kind}")
        self.kind = kind
        self.env = env
        self.has_proximity_proof = True
        mode = MODE_CORE if kind == "V4a" else MODE_FULL
        self.server = SbppServer(
            drops=env.drops,
            search_key=env.search_key,
            signing_key=env.signing_key,
            nizk_vk=env.verifying_key,
            mode=mode,
            precisions=list(env.precisions),
            ttl_s=env.ttl_s,
            pv=env.pv,
            epoch=env.epoch,
            unlock_radius_m=env.unlock_radius_m,
            nonce_rng=env.nonce_rng,
        )
        self.client = SbppClient(env.search_key, env.proving_key)
        self.sessions = self.server.sessions

    def set_epoch(self, epoch: str) -> None:
        self.server.sessions.epoch = epoch

    def open_session(self, now: int) -> VariantSession:
        inner = self.client.open_session(self.server, now)
        return VariantSession(
            S=inner.S,
            N=inner.N,
            t_exp=inner.t_exp,
            pv=self.server.sessions.pv,
            epoch=self.server.sessions.epoch,
            inner=inner,
        )

    def search(
        self, vses: VariantSession, lat: float, lon: float, radius_m: float, now: int
    ) -> VariantSession:
        assert vses.inner is not None
        self.client.search(self.server, vses.inner, lat, lon, radius_m, now)
        vses.candidates = vses.inner.candidates
        return vses

    def build_unlock(
        self, vses: VariantSession, drop_id: str, witness: nizk.Witness
    ) -> UnlockRequest:
        assert vses.inner is not None
        return self.client.build_unlock(vses.inner, drop_id, witness)

    def verify(self, request: UnlockRequest, now: int) -> VerifyOutcome:
        return self.server.verify(request, now)

    def audit_record(self, vses: VariantSession, request: UnlockRequest) -> VariantAuditRecord:
        assert vses.inner is not None
        rec = emit_audit_record(vses.inner, request)
        return VariantAuditRecord(
            kind=self.kind,
            drop_id=rec.drop_id,
            pv=rec.receipt.pv,
            epoch=rec.receipt.epoch,
            pub=rec.pub,
            proof=rec.proof,
            path=rec.path,
            claimed_S=rec.receipt.S,
            sbpp=rec,
        )

    def audit(self, rec: VariantAuditRecord) -> AuditOutcome:
        if rec.sbpp is None:
            return AuditOutcome(False, R_RECEIPT_SIG)
        return sbpp_audit(self.server.public_key_bytes, self.env.verifying_key, rec.sbpp)

    # -- adversary adapters

    def rebind_request(self, request: UnlockRequest, target: VariantSession) -> UnlockRequest:
        path = request.merkle_path
        ids = target.result_ids()
        if self.kind == "V4b" and request.drop_id in ids:
            path = build_tree(ids).prove_membership(request.drop_id)
        return UnlockRequest(
            S=target.S,
            drop_id=request.drop_id,
            pub=request.pub,
            proof=request.proof,
            merkle_path=path,
        )

    def retarget_request(
        self, request: UnlockRequest, vses: VariantSession, new_drop_id: str
    ) -> UnlockRequest:
        path = request.merkle_path
        ids = vses.result_ids()
        if self.kind == "V4b" and new_drop_id in ids:
            path = build_tree(ids).prove_membership(new_drop_id)
        return UnlockRequest(
            S=request.S,
            drop_id=new_drop_id,
            pub=request.pub,
            proof=request.proof,
            merkle_path=path,
        )

    def build_nonmember_unlock(
        self, vses: VariantSession, drop: Drop, witness: nizk.Witness
    ) -> UnlockRequest:
        pv, epoch = vses.pv, vses.epoch
        ids = vses.result_ids()
        path = None
        if self.kind == "V4a":
            cd = cd_core(drop.id, pv, epoch, vses.N)
        else:
            root = build_tree(ids).root
            cd = cd_full(drop.id, pv, epoch, vses.N, root)
            if ids:
                path = build_tree(ids).prove_membership(ids[0])  # stolen path
        pub = nizk.make_public_inputs(drop.lat, drop.lon, self.env.unlock_radius_m, cd)
        proof = nizk.prove(self.env.proving_key, witness, pub)
        return UnlockRequest(S=vses.S, drop_id=drop.id, pub=pub, proof=proof, merkle_path=path)

    def splice_records(
        self, proof_rec: VariantAuditRecord, ctx_rec: VariantAuditRecord
    ) -> VariantAuditRecord:
        assert proof_rec.sbpp is not None and ctx_rec.sbpp is not None
        spliced = AuditRecord(
            receipt=ctx_rec.sbpp.receipt,
            drop_id=proof_rec.sbpp.drop_id,
            path=proof_rec.sbpp.path,
            pub=proof_rec.sbpp.pub,
            proof=proof_rec.sbpp.proof,
        )
        return VariantAuditRecord(
            kind=self.kind,
            drop_id=spliced.drop_id,
            pv=ctx_rec.pv,
            epoch=ctx_rec.epoch,
            pub=spliced.pub,
            proof=spliced.proof,
            path=spliced.path,
            claimed_S=ctx_rec.claimed_S,
            sbpp=spliced,
        )

    def fabricate_nonmember_record(
        self, vses: VariantSession, drop: Drop, witness: nizk.Witness
    ) -> VariantAuditRecord:
        assert vses.inner is not None and vses.inner.receipt is not None
        request = self.build_nonmember_unlock(vses, drop, witness)
        fabricated = AuditRecord(
            receipt=vses.inner.receipt,
            drop_id=request.drop_id,
            path=request.merkle_path if request.merkle_path is not None else MerklePath(()),
            pub=request.pub,
            proof=request.proof,
        )
        return VariantAuditRecord(
            kind=self.kind,
            drop_id=request.drop_id,
            pv=vses.pv,
            epoch=vses.epoch,
            pub=request.pub,
            proof=request.proof,
            path=fabricated.path,
            claimed_S=vses.S,
            sbpp=fabricated,
        )


def make_variant(kind: str, env: VariantEnv, token_includes_root: bool = True):
    """Instantiate one rung of the ladder over shared environment material."""
    if kind in ("V4a", "V4b"):
        return SbppVariant(kind, env)
    traits = _GENERIC_TRAITS.get(kind)
    if traits is None:
        raise VariantError(f"unknown variant kind {kind!r}")
    if kind == "V8" and not token_includes_root:
        traits = VariantTraits(
            "V8", evidence="token", digest_kind="token", token_includes_root=False
        )
    return GenericVariant(traits, env)
