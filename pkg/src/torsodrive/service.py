"""Live drive service: one simulated session streamed over HTTP + WebSocket.

A single owner task ticks the simulation at 50 Hz; transport handlers only
exchange messages with it through bounded queues. Telemetry fans out to
subscribers decimated to at most 30 messages per second, dropping the
oldest frame for slow clients instead of blocking the loop.
"""

from __future__ import annotations

import asyncio
import json
import math
from dataclasses import dataclass, field

import numpy as np
from aiohttp import WSMsgType, web

from .calibration import CalibrationProfile
from .errors import ConfigurationError
from .harness import Intent, SyntheticUser, delta_for_intent
from .mapping import Gate, MappingParams, PipelineSession, forward_max_angle
from .sensing import PostureCategory, SensorFrame, from_conductance
from .vehicle import PathMatcher, Pose, build_figure8, integrate_unicycle

WS_PROTOCOL = "torso-drive.v1"

SESSION_KEY = web.AppKey("session", object)
CONFIG_KEY = web.AppKey("config", object)
SUBSCRIBERS_KEY = web.AppKey("subscribers", set)
INBOX_KEY = web.AppKey("inbox", asyncio.Queue)
LOOP_TASK_KEY = web.AppKey("loop_task", asyncio.Task)
COMMAND_TYPES = {"set_posture", "set_bend_angle", "start", "stop", "reset", "set_params"}
_CATEGORIES = {c.value: c for c in PostureCategory}

# fields a set_params command may override
_MUTABLE_PARAMS = {
    "theta_ft", "theta_fm_default", "theta_fst", "theta_bt", "theta_bm",
    "theta_bst", "rho", "w_v_back", "v_max", "w_max", "k_v_d", "k_w_d",
    "k_min_gain", "k_max_gain", "eps_contact", "literal_eq12",
}


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8642
    tick_rate_hz: float = 50.0
    telemetry_rate_hz: float = 30.0
    queue_cap: int = 256
    straight_len: float = 4.0
    radius: float = 1.0
    profile: CalibrationProfile = field(default_factory=CalibrationProfile.default)
    mapping: MappingParams = field(default_factory=MappingParams)


def validate_command(data) -> dict:
    """Schema-check a client command; raises ``ValueError`` when malformed."""
    if not isinstance(data, dict):
        raise ValueError("command must be a JSON object")
    if data.get("v") != 1:
        raise ValueError("missing or unsupported command version; expected v=1")
    ctype = data.get("type")
    if ctype not in COMMAND_TYPES:
        raise ValueError(f"unknown command type {ctype!r}")
    if ctype == "set_posture":
        has_lam = "lambda" in data
        has_intent = "category" in data
        if has_lam == has_intent:
            raise ValueError("set_posture needs either 'lambda' or 'category'")
        if has_lam:
            lam = data["lambda"]
            if (not isinstance(lam, list) or not lam
                    or not all(isinstance(x, (int, float)) and math.isfinite(x) and x >= 0
                               for x in lam)):
                raise ValueError("'lambda' must be a list of finite values >= 0")
        else:
            if data["category"] not in _CATEGORIES:
                raise ValueError(f"unknown posture category {data['category']!r}")
            intensity = data.get("intensity", 0.0)
            bias = data.get("bias", 0.0)
            if not (isinstance(intensity, (int, float)) and 0 <= intensity <= 1):
                raise ValueError("'intensity' must be in [0, 1]")
            if not (isinstance(bias, (int, float)) and -1 <= bias <= 1):
                raise ValueError("'bias' must be in [-1, 1]")
    elif ctype == "set_bend_angle":
        deg = data.get("deg")
        if not isinstance(deg, (int, float)) or not math.isfinite(deg):
            raise ValueError("'deg' must be a finite number")
    elif ctype == "set_params":
        overrides = data.get("mapping")
        if not isinstance(overrides, dict) or not overrides:
            raise ValueError("set_params needs a non-empty 'mapping' object")
        unknown = set(overrides) - _MUTABLE_PARAMS
        if unknown:
            raise ValueError(f"unknown mapping fields: {sorted(unknown)}")
    return data


def telemetry_encode(state: dict) -> bytes:
    """Encode a session snapshot; refuses non-finite numbers."""
    return json.dumps(state, allow_nan=False).encode("utf-8")


def telemetry_decode(payload) -> dict:
    if isinstance(payload, (bytes, bytearray)):
        payload = payload.decode("utf-8")
    return json.loads(payload)


class SimulationSession:
    """State owned by the tick loop; handlers read snapshots only."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.profile = config.profile
        self.params = config.mapping
        self.path = build_figure8(config.straight_len, config.radius)
        self.user = SyntheticUser.ideal(self.profile)
        self.pipeline = PipelineSession(self.profile, self.params, self.user.circuit)
        self.mode = "idle"
        self.t = 0.0
        self._reset_pose()
        n = self.profile.layout.n
        self.lam = [0.0] * n
        self.theta_b = 0.0
        self.last_cmd = (0.0, 0.0)
        self.last_frame = SensorFrame(t=0.0, raw=(0.0,) * n, theta_b_deg=0.0)

    def _reset_pose(self):
        sx, sy = self.path.start
        self.pose = Pose(float(sx), float(sy), math.pi / 2)
        self.matcher = PathMatcher(self.path)
        self.progress = 0.0

    # -- command application (loop thread only) ---------------------------

    def apply(self, cmd: dict):
        ctype = cmd["type"]
        if ctype == "start":
            if self.mode == "idle":
                self.mode = "running"
        elif ctype == "stop":
            if self.mode == "running":
                self.mode = "idle"
        elif ctype == "reset":
            self.mode = "idle"
            self.t = 0.0
            self._reset_pose()
            self.pipeline.reset()
            self.lam = [0.0] * self.profile.layout.n
            self.theta_b = 0.0
            self.last_cmd = (0.0, 0.0)
        elif ctype == "set_posture":
            if "lambda" in cmd:
                lam = list(cmd["lambda"])[: self.profile.layout.n]
                lam += [0.0] * (self.profile.layout.n - len(lam))
                self.lam = lam
            else:
                intent = Intent(category=_CATEGORIES[cmd["category"]],
                                intensity=float(cmd.get("intensity", 0.0)),
                                bias=float(cmd.get("bias", 0.0)))
                if intent.intensity == 0.0:
                    self.lam = [0.0] * self.profile.layout.n
                    self.theta_b = 0.0
                else:
                    delta = delta_for_intent(intent, self.profile)
                    budget = forward_max_angle(delta, self.profile, self.params)
                    pattern = (self.user.pressure_pattern(delta)
                               * max(0.25, intent.intensity))
                    self.lam = list(pattern / np.asarray(self.user.alpha_true))
                    self.theta_b = (self.params.theta_ft + intent.intensity
                                    * (budget - self.params.theta_ft))
        elif ctype == "set_bend_angle":
            self.theta_b = float(cmd["deg"])
        elif ctype == "set_params":
            merged = self.params.to_dict()
            merged.update(cmd["mapping"])
            self.params = MappingParams.from_dict(merged)  # may raise, caller guards
            self.pipeline.params = self.params

    def tick(self, dt: float) -> bool:
        """Advance one step; returns True when the mode changed."""
        mode_before = self.mode
        if self.mode == "running":
            raw = from_conductance(np.clip(np.asarray(self.lam, float), 0.0, None),
                                   self.user.circuit)
            frame = SensorFrame(t=self.t, raw=tuple(raw), theta_b_deg=self.theta_b)
            cmd = self.pipeline.tick(frame)
            self.last_frame = frame
            self.last_cmd = (cmd.v, cmd.w)
            if cmd.gate is Gate.SAFETY_STOP:
                self.mode = "safety_stopped"
                self.last_cmd = (0.0, 0.0)
            else:
                self.pose = integrate_unicycle(self.pose, cmd.v, cmd.w, dt)
                s_now, _, _ = self.matcher.match(self.pose.x, self.pose.y)
                self.progress = s_now / self.path.total_length
        else:
            self.last_cmd = (0.0, 0.0)
        self.t += dt
        return self.mode != mode_before

    def snapshot(self) -> dict:
        info = self.pipeline.last_info
        cop = None if info is None else info.cop
        category = None if (info is None or info.category is None) else info.category.value
        return {
            "t": round(self.t, 6),
            "mode": self.mode,
            "pose": {"x": self.pose.x, "y": self.pose.y, "heading": self.pose.heading},
            "cmd": {"v": self.last_cmd[0], "w": self.last_cmd[1]},
            "cop": 0.0 if cop is None else float(cop),
            "p": 0.0 if info is None else float(info.p),
            "theta_b": float(self.theta_b),
            "category": category or "none",
            "fsr": [float(v) for v in self.lam],
            "path_progress": float(self.progress),
        }


async def _loop(app: web.Application):
    session: SimulationSession = app[SESSION_KEY]
    cfg: ServiceConfig = app[CONFIG_KEY]
    dt = 1.0 / cfg.tick_rate_hz
    decimation = max(1, int(math.ceil(cfg.tick_rate_hz / cfg.telemetry_rate_hz)))
    inbox: asyncio.Queue = app[INBOX_KEY]
    n = 0
    while True:
        while not inbox.empty():
            cmd = inbox.get_nowait()
            try:
                session.apply(cmd)
            except (ValueError, ConfigurationError):
                pass  # validated upstream; stale/illegal transitions are dropped
        mode_changed = session.tick(dt)
        n += 1
        if mode_changed or n % decimation == 0:
            payload = telemetry_encode(session.snapshot())
            for q in list(app[SUBSCRIBERS_KEY]):
                if q.full():
                    try:
                        q.get_nowait()  # drop the oldest frame for slow clients
                    except asyncio.QueueEmpty:
                        pass
                q.put_nowait(payload)
        await asyncio.sleep(dt)


async def _on_startup(app):
    app[LOOP_TASK_KEY] = asyncio.create_task(_loop(app))


async def _on_cleanup(app):
    app[LOOP_TASK_KEY].cancel()
    try:
        await app[LOOP_TASK_KEY]
    except asyncio.CancelledError:
        pass


async def handle_health(request):
    return web.json_response({"status": "ok"})


async def handle_session(request):
    return web.json_response(request.app[SESSION_KEY].snapshot())


async def handle_get_params(request):
    return web.json_response({"mapping": request.app[SESSION_KEY].params.to_dict()})


async def handle_put_params(request):
    try:
        body = await request.json()
    except json.JSONDecodeError:
        return web.json_response({"error": "invalid JSON"}, status=400)
    cmd = {"v": 1, "type": "set_params", "mapping": body.get("mapping", body)}
    try:
        validate_command(cmd)
        MappingParams.from_dict({**request.app[SESSION_KEY].params.to_dict(),
                                 **cmd["mapping"]})
    except (ValueError, ConfigurationError) as exc:
        return web.json_response({"error": str(exc)}, status=400)
    try:
        request.app[INBOX_KEY].put_nowait(cmd)
    except asyncio.QueueFull:
        return web.json_response({"error": "command queue full"}, status=503)
    return web.json_response({"status": "accepted"})


async def handle_ws(request):
    offered = request.headers.get("Sec-WebSocket-Protocol", "")
    protocols = (WS_PROTOCOL,) if WS_PROTOCOL in offered else ()
    ws = web.WebSocketResponse(protocols=protocols, heartbeat=30.0)
    await ws.prepare(request)

    queue: asyncio.Queue = asyncio.Queue(maxsize=request.app[CONFIG_KEY].queue_cap)
    request.app[SUBSCRIBERS_KEY].add(queue)

    async def sender():
        while True:
            payload = await queue.get()
            await ws.send_str(payload.decode("utf-8"))

    send_task = asyncio.create_task(sender())
    session: SimulationSession = request.app[SESSION_KEY]
    try:
        async for msg in ws:
            if msg.type != WSMsgType.TEXT:
                continue
            try:
                cmd = validate_command(json.loads(msg.data))
            except (ValueError, json.JSONDecodeError) as exc:
                await ws.send_json({"v": 1, "type": "error", "error": str(exc)})
                continue
            if cmd["type"] == "start" and session.mode == "safety_stopped":
                await ws.send_json({"v": 1, "type": "error",
                                    "error": "safety stop active; reset first"})
                continue
            if cmd["type"] == "set_params":
                try:
                    MappingParams.from_dict({**session.params.to_dict(),
                                             **cmd["mapping"]})
                except (ValueError, ConfigurationError) as exc:
                    await ws.send_json({"v": 1, "type": "error", "error": str(exc)})
                    continue
            try:
                request.app[INBOX_KEY].put_nowait(cmd)
            except asyncio.QueueFull:
                await ws.send_json({"v": 1, "type": "error",
                                    "error": "command queue full"})
    finally:
        send_task.cancel()
        request.app[SUBSCRIBERS_KEY].discard(queue)
    return ws


def create_app(config: ServiceConfig | None = None) -> web.Application:
    config = config or ServiceConfig()
    app = web.Application()
    app[CONFIG_KEY] = config
    app[SESSION_KEY] = SimulationSession(config)
    app[SUBSCRIBERS_KEY] = set()
    app[INBOX_KEY] = asyncio.Queue(maxsize=config.queue_cap)
    app.router.add_get("/health", handle_health)
    app.router.add_get("/session", handle_session)
    app.router.add_get("/params", handle_get_params)
    app.router.add_put("/params", handle_put_params)
    app.router.add_get("/ws", handle_ws)
    app.on_startup.append(_on_startup)
    app.on_cleanup.append(_on_cleanup)
    return app


def serve(config: ServiceConfig | None = None) -> None:
    """Run the service until interrupted. Raises ``OSError`` when the port is busy."""
    config = config or ServiceConfig()
    web.run_app(create_app(config), host=config.host, port=config.port,
                print=None, handle_signals=True)
