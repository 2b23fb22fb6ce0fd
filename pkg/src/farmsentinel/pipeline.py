"""Live monitoring: frames -> dual inference -> fusion -> engine -> sinks.

One logical loop owns the engine; commands polled at the top of each
iteration take priority over the frame that follows. Alert delivery and
audio playback never feed back into the loop. Shutdown stops the deterrent
(recorded in the action log), then detectors, then sinks, so trailing
actions flush.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from .audio import AudioDeterrent
from .config import AppConfig, PARALLEL
from .detectors import SupervisedDetector
from .engine import (
    ActionLog,
    Command,
    DETERRING,
    SendAlert,
    SentinelState,
    StartDeterrent,
    StopDeterrent,
    handle_command,
    step,
)
from .errors import GatewayAuthError, GatewayError, SentinelError
from .fusion import fuse
from .ingestion import open_source
from .telegram import (
    CommandPoller,
    LiveTransport,
    MockTransport,
    OutboundAlert,
    format_alert_text,
    send_alert,
)

log = logging.getLogger("farmsentinel.pipeline")

EXIT_OK = 0
EXIT_RUNTIME = 4


class SimClock:
    """Deterministic clock: advances by a fixed step per loop iteration."""

    def __init__(self, start: float, step: float):
        self._now = start
        self._step = step

    def now(self) -> float:
        return self._now

    def tick(self) -> float:
        self._now += self._step
        return self._now


class RealClock:
    def now(self) -> float:
        return time.time()

    def tick(self) -> float:
        return time.time()


def make_clock(execution) -> SimClock | RealClock:
    if execution.clock == "simulated":
        return SimClock(execution.clock_start, execution.clock_step)
    return RealClock()


def build_transport(cfg: AppConfig):
    if cfg.execution.transport == "live":
        return LiveTransport(cfg.gateway.bot_token)
    transport = MockTransport()
    for entry in cfg.mock_script:
        transport.script_update(
            entry.text,
            chat_id=cfg.gateway.chat_id,
            after_polls=entry.after_polls,
            after_photos=entry.after_alerts,
        )
    return transport


class AlertDispatcher:
    """Delivers alerts without blocking the loop; synchronous in mock mode."""

    def __init__(self, gateway_cfg, transport, synchronous: bool):
        self.gateway_cfg = gateway_cfg
        self.transport = transport
        self.synchronous = synchronous
        self.delivery_failures = 0
        self.auth_failed = False
        self._queue: queue.Queue = queue.Queue()
        self._worker = None
        if not synchronous:
            self._worker = threading.Thread(target=self._run, daemon=True)
            self._worker.start()

    def submit(self, alert: OutboundAlert):
        if self.synchronous:
            self._deliver(alert)
        else:
            self._queue.put(alert)

    def _run(self):
        while True:
            alert = self._queue.get()
            if alert is None:
                return
            self._deliver(alert)

    def _deliver(self, alert: OutboundAlert):
        try:
            send_alert(self.gateway_cfg, alert, self.transport)
        except GatewayAuthError:
            self.auth_failed = True
            log.error("alert delivery failed: authentication rejected")
        except GatewayError as exc:
            self.delivery_failures += 1
            log.warning("alert dropped after retries: %s", exc)

    def notify(self, text: str):
        """Best-effort operator notice, outside the alert path."""
        try:
            self.transport.send_message(self.gateway_cfg.chat_id, text)
        except GatewayError as exc:
            log.warning("operator notice failed: %s", exc)

    def close(self):
        if self._worker is not None:
            self._queue.put(None)
            self._worker.join()


class ThreadedPoller:
    """Background long-polling for live mode; drained by the engine loop.

    Commands are enqueued to the mailbox before the poller commits its
    offset, preserving at-least-once delivery into the engine.
    """

    def __init__(self, poller: CommandPoller):
        self._poller = poller
        self._mailbox: queue.Queue = queue.Queue()
        self._running = True
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self):
        while self._running:
            try:
                commands = self._poller.poll()
            except GatewayAuthError:
                self._mailbox.put(None)  # fatal marker
                return
            for cmd in commands:
                self._mailbox.put(cmd)
            self._poller.commit()

    def drain(self) -> list[Command]:
        commands = []
        while True:
            try:
                commands.append(self._mailbox.get_nowait())
            except queue.Empty:
                return commands

    def close(self):
        self._running = False


class InlinePoller:
    """Synchronous polling for mock mode: deterministic, one poll per frame."""

    def __init__(self, poller: CommandPoller):
        self._poller = poller

    def drain(self) -> list[Command]:
        commands = self._poller.poll()
        return commands

    def commit(self):
        self._poller.commit()

    def close(self):
        pass


def run_monitor(cfg: AppConfig, transport=None, detector_sleep=time.sleep) -> int:
    """Run the monitoring loop until the source ends or shutdown is requested.

    Raises ConfigError/StartupError for problems before the loop starts;
    returns a nonzero code for fatal runtime conditions (all detectors dead,
    authentication rejected).
    """
    clock = make_clock(cfg.execution)
    audio = AudioDeterrent(cfg.deterrent)  # validates the sound file eagerly
    if transport is None:
        transport = build_transport(cfg)
    source = open_source(cfg.source, clock=clock.now)
    detectors = [
        SupervisedDetector(spec=spec, sleep=detector_sleep).start()
        for spec in cfg.detectors
    ]

    dispatcher = AlertDispatcher(
        cfg.gateway, transport, synchronous=cfg.execution.transport == "mock"
    )
    base_poller = CommandPoller(cfg.gateway, transport)
    inline = cfg.execution.transport == "mock"
    poller = InlinePoller(base_poller) if inline else ThreadedPoller(base_poller)

    action_log = ActionLog(cfg.execution.action_log)
    state = SentinelState()
    executor = (
        ThreadPoolExecutor(max_workers=len(detectors))
        if cfg.execution.inference == PARALLEL
        else None
    )
    notified_dead: set[str] = set()
    exit_code = EXIT_OK

    def execute(actions, timestamp: float):
        for action in actions:
            if isinstance(action, SendAlert):
                dispatcher.submit(
                    OutboundAlert(
                        text=format_alert_text(
                            action.classes, action.confidences, timestamp
                        ),
                        photo_path=action.snapshot_path,
                    )
                )
            elif isinstance(action, StartDeterrent):
                try:
                    audio.start()
                except SentinelError as exc:
                    dispatcher.notify(f"Deterrent failed to start: {exc}")
            elif isinstance(action, StopDeterrent):
                audio.stop()

    def infer_frame(frame):
        if executor is not None:
            futures = [
                executor.submit(d.safe_infer, frame.frame_id, frame.image_path)
                for d in detectors
            ]
            return [f.result() for f in futures]
        return [d.safe_infer(frame.frame_id, frame.image_path) for d in detectors]

    try:
        while True:
            now = clock.tick()

            commands = poller.drain()
            if None in commands:  # threaded poller hit an auth failure
                dispatcher.notify("Command polling stopped: authentication rejected")
                exit_code = EXIT_RUNTIME
                break
            for cmd in commands:
                state, actions = handle_command(state, cmd)
                action_log.append("command", cmd.verb, now, state.mode, actions)
                execute(actions, now)
            if inline:
                poller.commit()

            frame = source.next_frame()
            if frame is None:
                break

            results = infer_frame(frame)
            for detector in detectors:
                if detector.dead and detector.spec.id not in notified_dead:
                    notified_dead.add(detector.spec.id)
                    dispatcher.notify(
                        f"Detector '{detector.spec.id}' failed permanently; "
                        "running degraded"
                    )
            if all(d.dead for d in detectors):
                dispatcher.notify("All detectors failed; monitoring halted")
                exit_code = EXIT_RUNTIME
                break

            dets = [list(r.detections) if r else [] for r in results]
            second = dets[1] if len(dets) > 1 else []
            fused = fuse(dets[0], second, cfg.fusion, frame_id=frame.frame_id)
            fused = replace(
                fused,
                per_source_latency={
                    d.spec.id: r.elapsed_ms
                    for d, r in zip(detectors, results)
                    if r is not None
                },
            )

            state, actions = step(state, fused, frame, frame.timestamp, cfg.engine)
            action_log.append(
                "frame", frame.frame_id, frame.timestamp, state.mode, actions
            )
            execute(actions, frame.timestamp)
            source.release(frame.frame_id)

            if dispatcher.auth_failed:
                exit_code = EXIT_RUNTIME
                break
    except KeyboardInterrupt:
        log.info("shutdown signal received")
    finally:
        shutdown_actions = []
        if state.mode == DETERRING:
            state, shutdown_actions = handle_command(state, Command("stop"))
            execute(shutdown_actions, clock.now())
        action_log.append(
            "shutdown", "shutdown", clock.now(), state.mode, shutdown_actions
        )
        for detector in detectors:
            detector.stop()
        poller.close()
        dispatcher.close()
        audio.stop()
        source.close()
        action_log.close()
    return exit_code
