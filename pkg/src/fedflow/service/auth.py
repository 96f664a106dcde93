"""Password hashing and HMAC-signed bearer tokens.

Tokens are compact two-part strings: base64url(JSON claims) + "." +
hex(HMAC-SHA256 over the first part). Verification is offline against the
service signing key; expiry lives in the claims.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import secrets

from fedflow.core.errors import AuthFailed


def new_salt() -> str:
    return secrets.token_hex(8)


def hash_password(password: str, salt: str) -> str:
    return hashlib.sha256((salt + ":" + password).encode("utf-8")).hexdigest()


def verify_password(password: str, salt: str, expected_hash: str) -> bool:
    return hmac.compare_digest(hash_password(password, salt), expected_hash)


class TokenSigner:
    def __init__(self, key: str):
        self._key = key.encode("utf-8")

    def issue(self, user_id: int, now: float, ttl: float) -> tuple[str, float]:
        expires_at = now + ttl
        claims = {"sub": user_id, "exp": expires_at}
        payload = base64.urlsafe_b64encode(
            json.dumps(claims, sort_keys=True, separators=(",", ":")).encode("utf-8")
        ).decode("ascii")
        return payload + "." + self._sign(payload), expires_at

    def verify(self, token: str, now: float) -> int:
        payload, _, signature = token.partition(".")
        if not payload or not signature:
            raise AuthFailed("malformed token")
        if not hmac.compare_digest(self._sign(payload), signature):
            raise AuthFailed("invalid token signature")
        try:
            claims = json.loads(base64.urlsafe_b64decode(payload.encode("ascii")))
        except (ValueError, UnicodeDecodeError) as exc:
            raise AuthFailed("malformed token payload") from exc
        if now > float(claims.get("exp", 0)):
            raise AuthFailed("token expired")
        return int(claims["sub"])

    def _sign(self, payload: str) -> str:
        return hmac.new(self._key, payload.encode("ascii"), hashlib.sha256).hexdigest()
