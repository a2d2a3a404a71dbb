"""JSON-lines stdio server exposing the environment lifecycle to foreign
language bindings.

One request object per line; each reply carries the request id. Errors come
back as ``{"id", "ok": false, "error": {"code", "exit_code", "message"}}``
where exit_code mirrors the CLI convention (2 usage, 3 runtime).
"""

from __future__ import annotations

import json
from typing import IO

from .env import Env, EnvError, make
from .scenario import ScenarioError, list_scenarios


def _env_meta(handle: int, env: Env) -> dict:
    return {
        "env": handle,
        "learners": env.n_learners,
        "learner_ids": env.learner_ids,
        "obs_len": env.obs_len,
        "n_actions": env.n_actions,
        "episode_length": env.episode_length,
        "scenario": env.cfg.name,
    }


class BridgeSession:
    def __init__(self) -> None:
        self._envs: dict[int, Env] = {}
        self._next_handle = 0

    def _get(self, req: dict) -> Env:
        handle = req.get("env")
        if handle not in self._envs:
            raise EnvError(f"invalid env handle {handle!r}")
        return self._envs[handle]

    def handle(self, req: dict) -> dict:
        op = req.get("op")
        if op == "scenarios":
            return {"result": list_scenarios()}
        if op == "make":
            env = make(str(req["scenario"]), req.get("overrides") or {})
            handle = self._next_handle
            self._next_handle += 1
            self._envs[handle] = env
            return {"result": _env_meta(handle, env)}
        if op == "reset":
            env = self._get(req)
            obs = env.reset(req.get("seed"))
            return {"result": {"obs": [o.tolist() for o in obs]}}
        if op == "step":
            env = self._get(req)
            actions = req.get("actions")
            if not isinstance(actions, list):
                raise EnvError("step needs an actions list")
            obs, rewards, dones, info = env.step([int(a) for a in actions])
            return {
                "result": {
                    "obs": [o.tolist() for o in obs],
                    "rewards": {
                        "r_total": {str(k): v for k, v in rewards.r_total.items()},
                        "r_travel": {str(k): v for k, v in rewards.r_travel.items()},
                        "r_col": {str(k): v for k, v in rewards.r_col.items()},
                        "team_reward": rewards.team_reward,
                    },
                    "dones": dones,
                    "info": {
                        "t": info["t"],
                        "status": info["status"],
                        "collisions": info["collisions"],
                        "success": {str(k): v for k, v in info["success"].items()},
                        "speeds": {str(k): v for k, v in info["speeds"].items()},
                        "replaced_robot": info["replaced_robot"],
                    },
                }
            }
        if op == "close":
            handle = req.get("env")
            if handle in self._envs:
                del self._envs[handle]
                return {"result": True}
            raise EnvError(f"invalid env handle {handle!r}")
        raise ScenarioError(f"unknown op {op!r}")


def serve(stdin: IO[str], stdout: IO[str]) -> None:
    session = BridgeSession()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        rid = None
        try:
            req = json.loads(line)
            rid = req.get("id")
            reply = session.handle(req)
            reply.update({"id": rid, "ok": True})
        except (ScenarioError, ValueError) as exc:
            reply = {"id": rid, "ok": False, "error": {"code": "usage", "exit_code": 2, "message": str(exc)}}
        except Exception as exc:
            reply = {"id": rid, "ok": False, "error": {"code": "runtime", "exit_code": 3, "message": str(exc)}}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
