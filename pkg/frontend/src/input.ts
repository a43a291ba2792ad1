// Operator inputs (sliders, keyboard, gamepad) -> posture intents.
//
// Default mode maps forward/lateral axes to (category, intensity, bias);
// expert mode sends a raw pressure pattern plus an explicit bend angle.

import type { ClientCommand } from "./protocol";

export interface InputState {
  forward: number;          // 0..1 intended speed fraction
  bias: number;             // -1..1, negative steers left
  bendDeg: number | null;   // explicit bending-angle override, degrees
  expert: boolean;
  lambda: number[];         // raw pattern for expert mode
}

export function neutralInput(): InputState {
  return { forward: 0, bias: 0, bendDeg: null, expert: false, lambda: [0, 0, 0, 0, 0] };
}

const clamp = (x: number, lo: number, hi: number) => Math.min(Math.max(x, lo), hi);

/**
 * Posture category for a lateral bias, matching the default boundary
 * geometry on the backend: zero bias cruises forward, nonzero bias spans
 * the turn bands.
 */
export function biasToCategory(bias: number): string {
  if (bias === 0) return "bend_forward";
  return bias > 0 ? "turn_right" : "turn_left";
}

const NEUTRAL_EPS = 0.01;

/** Commands for the current inputs; neutral input is an explicit zero intent. */
export function toCommands(state: InputState): ClientCommand[] {
  if (state.expert) {
    const cmds: ClientCommand[] = [
      { type: "set_posture", lambda: state.lambda.map((v) => Math.max(v, 0)) },
    ];
    cmds.push({ type: "set_bend_angle", deg: state.bendDeg ?? 0 });
    return cmds;
  }
  const forward = clamp(state.forward, 0, 1);
  const bias = clamp(state.bias, -1, 1);
  if (forward <= NEUTRAL_EPS && Math.abs(bias) <= NEUTRAL_EPS && state.bendDeg === null) {
    return [{ type: "set_posture", category: "bend_forward", intensity: 0, bias: 0 }];
  }
  const cmds: ClientCommand[] = [
    { type: "set_posture", category: biasToCategory(bias), intensity: forward, bias },
  ];
  if (state.bendDeg !== null) {
    cmds.push({ type: "set_bend_angle", deg: state.bendDeg });
  }
  return cmds;
}

/** WASD / arrow keys: hold W to go, A/D to steer, S to back up. */
export function keysToInput(pressed: Set<string>): Pick<InputState, "forward" | "bias" | "bendDeg"> {
  const fwd = pressed.has("KeyW") || pressed.has("ArrowUp");
  const back = pressed.has("KeyS") || pressed.has("ArrowDown");
  let bias = 0;
  if (pressed.has("KeyA") || pressed.has("ArrowLeft")) bias -= 1;
  if (pressed.has("KeyD") || pressed.has("ArrowRight")) bias += 1;
  return {
    forward: fwd ? 1 : 0,
    bias,
    bendDeg: back && !fwd ? -9 : null, // mid-ramp backward bend
  };
}

const DEADZONE = 0.08;

/** Left stick: y axis forward (stick up is negative), x axis lateral. */
export function gamepadToInput(axes: readonly number[]): Pick<InputState, "forward" | "bias"> {
  const raw = axes.length >= 2 ? [axes[0], axes[1]] : [0, 0];
  const lx = Math.abs(raw[0]) > DEADZONE ? raw[0] : 0;
  const ly = Math.abs(raw[1]) > DEADZONE ? raw[1] : 0;
  return { forward: clamp(-ly, 0, 1), bias: clamp(lx, -1, 1) };
}
