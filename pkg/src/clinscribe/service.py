"""Shared plumbing for the JSON-over-HTTP adapters.

Every external dependency (annotator, embedder, text-generation backend)
speaks a small POST-JSON contract. Credentials come from an environment
variable named in the endpoint descriptor, never from config values.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import requests


class ServiceError(RuntimeError):
    """Base class for adapter failures."""


class ServiceUnavailableError(ServiceError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class SchemaMismatchError(ServiceError):
    """The service answered, but not in the documented shape."""


@dataclass(frozen=True)
class ServiceEndpoint:
    url: str
    token_env: str | None = None
    timeout: float = 30.0

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.token_env:
            token = os.environ.get(self.token_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers


def post_json(
    endpoint: ServiceEndpoint,
    payload: dict,
    retries: int = 0,
    backoff: float = 0.25,
) -> dict:
    """POST a JSON payload, returning the decoded JSON object.

    Transport failures and non-2xx statuses raise ServiceUnavailableError
    (after ``retries`` additional attempts with exponential backoff);
    non-object response bodies raise SchemaMismatchError.
    """
    attempt = 0
    while True:
        try:
            response = requests.post(
                endpoint.url,
                json=payload,
                headers=endpoint.headers(),
                timeout=endpoint.timeout,
            )
        except requests.RequestException as exc:
            if attempt < retries:
                time.sleep(backoff * (2**attempt))
                attempt += 1
                continue
            raise ServiceUnavailableError(
                f"request to {endpoint.url} failed: {exc}"
            ) from exc
        if response.status_code // 100 != 2:
            if attempt < retries:
                time.sleep(backoff * (2**attempt))
                attempt += 1
                continue
            raise ServiceUnavailableError(
                f"{endpoint.url} returned HTTP {response.status_code}",
                status=response.status_code,
            )
        try:
            body = response.json()
        except ValueError as exc:
            raise SchemaMismatchError(
                f"{endpoint.url} returned a non-JSON body"
            ) from exc
        if not isinstance(body, dict):
            raise SchemaMismatchError(
                f"{endpoint.url} returned {type(body).__name__}, expected an object"
            )
        return body
