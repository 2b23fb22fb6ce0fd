"""Alert delivery and command polling over a bot-API style transport.

The transport is pluggable: `LiveTransport` talks HTTPS to the real bot API
(long polling for updates, multipart upload for photos), `MockTransport`
records everything in memory and replays scripted updates, so every test and
golden run is network-free. The bot token is environment-sourced and must
never appear in logs, exceptions or persisted artifacts.
"""

from __future__ import annotations

import json
import logging
import time
import urllib.error
import urllib.parse
import urllib.request
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .engine import Command
from .errors import ConfigError, GatewayAuthError, GatewayError

log = logging.getLogger("farmsentinel.telegram")

HELP_TEXT = "Unrecognized command. Valid commands: deter, stop"


class TransientTransportError(GatewayError):
    """Retryable delivery problem: throttling, timeouts, flaky network."""


@dataclass(frozen=True, repr=False)
class GatewayConfig:
    chat_id: int
    bot_token: str = ""
    poll_timeout: float = 30.0
    retry_backoff: tuple[float, ...] = (1.0, 2.0, 4.0)

    def __post_init__(self):
        if self.poll_timeout < 1:
            raise ConfigError(f"gateway.poll_timeout: {self.poll_timeout} < 1")

    def __repr__(self):  # token stays out of logs and tracebacks
        return (
            f"GatewayConfig(chat_id={self.chat_id}, bot_token='***', "
            f"poll_timeout={self.poll_timeout}, retry_backoff={self.retry_backoff})"
        )


@dataclass(frozen=True)
class OutboundAlert:
    text: str
    photo_path: str | None = None
    correlation_id: str = ""

    def __post_init__(self):
        if not self.text:
            raise ValueError("alert text must be nonempty")


@dataclass(frozen=True)
class DeliveryReceipt:
    message_id: int
    attempts: int
    correlation_id: str = ""


def format_alert_text(classes, confidences, timestamp: float) -> str:
    """Human alert line: class names, confidences and the detection time."""
    when = datetime.fromtimestamp(timestamp, tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )
    parts = [f"{cls.capitalize()} detected ({confidences[cls] * 100:.0f}%)"
             for cls in classes]
    return f"{'; '.join(parts)} at {when}"


class MockTransport:
    """In-memory transport recording sends and replaying scripted updates.

    Scripted updates become visible once their triggers are met: after N
    get_updates calls (``after_polls``) and/or after N photos were sent
    (``after_photos``).
    """

    def __init__(self):
        self.messages: list[dict] = []
        self.photos: list[dict] = []
        self.poll_count = 0
        self._scripted: list[dict] = []
        self._next_update_id = 1
        self._next_message_id = 1
        self._send_failures: list[Exception] = []

    # --- scripting hooks ---------------------------------------------------
    def script_update(self, text: str, chat_id: int, after_polls=0, after_photos=0):
        self._scripted.append(
            {
                "update_id": self._next_update_id,
                "text": text,
                "chat_id": chat_id,
                "after_polls": after_polls,
                "after_photos": after_photos,
            }
        )
        self._next_update_id += 1

    def fail_sends(self, *errors: Exception):
        self._send_failures.extend(errors)

    # --- transport interface -----------------------------------------------
    def _take_failure(self):
        if self._send_failures:
            raise self._send_failures.pop(0)

    def send_message(self, chat_id: int, text: str) -> dict:
        self._take_failure()
        message_id = self._next_message_id
        self._next_message_id += 1
        self.messages.append({"chat_id": chat_id, "text": text, "message_id": message_id})
        return {"message_id": message_id}

    def send_photo(self, chat_id: int, photo_path: str, caption: str) -> dict:
        self._take_failure()
        message_id = self._next_message_id
        self._next_message_id += 1
        self.photos.append(
            {
                "chat_id": chat_id,
                "photo_path": str(photo_path),
                "caption": caption,
                "message_id": message_id,
            }
        )
        return {"message_id": message_id}

    def get_updates(self, offset: int, timeout: float) -> list[dict]:
        self.poll_count += 1
        ready = []
        for item in self._scripted:
            if item["update_id"] < offset:
                continue
            if self.poll_count >= item["after_polls"] and len(self.photos) >= item["after_photos"]:
                ready.append(
                    {
                        "update_id": item["update_id"],
                        "message": {
                            "chat": {"id": item["chat_id"]},
                            "from": {"id": item["chat_id"]},
                            "text": item["text"],
                            "date": 0,
                        },
                    }
                )
        return ready


class LiveTransport:
    """Bot API over HTTPS; message-send, multipart photo-send, long-poll."""

    def __init__(self, token: str, api_base: str = "https://api.telegram.org"):
        if not token:
            raise ConfigError("gateway.bot_token: missing (set the token env var)")
        self._base = f"{api_base}/bot{token}"
        self._token = token

    def _sanitize(self, text: str) -> str:
        return text.replace(self._token, "***")

    def _post(self, method: str, payload: dict, timeout: float = 35.0) -> dict:
        data = urllib.parse.urlencode(payload).encode()
        headers = {"Content-Type": "application/x-www-form-urlencoded"}
        return self._request(method, data, headers, timeout)

    def _request(self, method: str, data: bytes, headers: dict, timeout: float) -> dict:
        request = urllib.request.Request(
            f"{self._base}/{method}", data=data, headers=headers
        )
        try:
            with urllib.request.urlopen(request, timeout=timeout) as response:
                body = json.loads(response.read().decode())
        except urllib.error.HTTPError as exc:
            if exc.code in (401, 403):
                raise GatewayAuthError("bot token rejected by the messaging service") from None
            raise TransientTransportError(
                self._sanitize(f"{method} failed: HTTP {exc.code}")
            ) from None
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise TransientTransportError(
                self._sanitize(f"{method} failed: {exc}")
            ) from None
        if not body.get("ok"):
            raise TransientTransportError(
                self._sanitize(f"{method} rejected: {body.get('description', '?')}")
            )
        return body["result"]

    def send_message(self, chat_id: int, text: str) -> dict:
        return self._post("sendMessage", {"chat_id": chat_id, "text": text})

    def send_photo(self, chat_id: int, photo_path: str, caption: str) -> dict:
        boundary = uuid.uuid4().hex
        photo = Path(photo_path)
        parts = []
        for name, value in (("chat_id", str(chat_id)), ("caption", caption)):
            parts.append(
                f"--{boundary}\r\nContent-Disposition: form-data; "
                f'name="{name}"\r\n\r\n{value}\r\n'.encode()
            )
        parts.append(
            f"--{boundary}\r\nContent-Disposition: form-data; name=\"photo\"; "
            f'filename="{photo.name}"\r\nContent-Type: application/octet-stream'
            "\r\n\r\n".encode()
            + photo.read_bytes()
            + b"\r\n"
        )
        parts.append(f"--{boundary}--\r\n".encode())
        body = b"".join(parts)
        headers = {"Content-Type": f"multipart/form-data; boundary={boundary}"}
        return self._request("sendPhoto", body, headers, timeout=60.0)

    def get_updates(self, offset: int, timeout: float) -> list[dict]:
        return self._post(
            "getUpdates",
            {"offset": offset, "timeout": int(timeout)},
            timeout=timeout + 10.0,
        )


def send_alert(
    cfg: GatewayConfig,
    alert: OutboundAlert,
    transport,
    sleep=time.sleep,
) -> DeliveryReceipt:
    """Deliver one alert, retrying transient failures per the backoff schedule.

    Photo with caption when a snapshot is attached, plain message otherwise.
    Exhausted retries surface as GatewayError; authentication problems are
    fatal and propagate as GatewayAuthError.
    """
    attempts = 0
    last_error: GatewayError | None = None
    for delay in (0.0,) + tuple(cfg.retry_backoff):
        if delay:
            sleep(delay)
        attempts += 1
        try:
            if alert.photo_path:
                result = transport.send_photo(cfg.chat_id, alert.photo_path, alert.text)
            else:
                result = transport.send_message(cfg.chat_id, alert.text)
            return DeliveryReceipt(
                message_id=result["message_id"],
                attempts=attempts,
                correlation_id=alert.correlation_id,
            )
        except TransientTransportError as exc:
            last_error = exc
            log.warning("alert delivery attempt %d failed: %s", attempts, exc)
    raise GatewayError(f"alert delivery failed after {attempts} attempts: {last_error}")


class CommandPoller:
    """Long-polls for operator commands with at-least-once delivery.

    The update offset only advances on ``commit()``, which the caller invokes
    after enqueueing the batch to the engine; a crash in between redelivers,
    and the engine's idempotent command handling absorbs duplicates.
    """

    def __init__(self, cfg: GatewayConfig, transport):
        self.cfg = cfg
        self.transport = transport
        self.fault_count = 0
        self._offset = 0
        self._pending_offset: int | None = None

    def poll(self) -> list[Command]:
        try:
            updates = self.transport.get_updates(self._offset, self.cfg.poll_timeout)
        except GatewayAuthError:
            raise
        except GatewayError as exc:
            self.fault_count += 1
            log.warning("command poll failed: %s", exc)
            return []

        commands: list[Command] = []
        highest = None
        for update in updates:
            highest = update["update_id"]
            message = update.get("message") or {}
            chat_id = (message.get("chat") or {}).get("id")
            text = (message.get("text") or "").strip()
            if chat_id != self.cfg.chat_id:
                continue  # ignore messages from unconfigured chats
            verb = text.lower()
            if verb in ("deter", "stop"):
                commands.append(
                    Command(
                        verb=verb,
                        issuer=str((message.get("from") or {}).get("id", "")),
                        time=float(message.get("date", 0)),
                    )
                )
            else:
                try:
                    self.transport.send_message(self.cfg.chat_id, HELP_TEXT)
                except GatewayError as exc:
                    log.warning("help reply failed: %s", exc)
        if highest is not None:
            if commands:
                self._pending_offset = highest + 1  # held until commit()
            else:
                self._offset = highest + 1  # nothing to enqueue; ack now
        return commands

    def commit(self):
        """Acknowledge the last polled batch; call after engine enqueue."""
        if self._pending_offset is not None:
            self._offset = self._pending_offset
            self._pending_offset = None
