/**
 * Session state for the strength studio: selected pair, continuous strength,
 * interpolation method, overlay choice, and compare mode.
 *
 * The strength setter clamps, so no state transition can ever hold (or emit)
 * a strength outside [0, 1].
 */

export type Method = "retinex" | "alpha" | "model";
export type Overlay = "none" | "weight" | "edgediff";

export interface PairInfo {
  id: string;
  width: number;
  height: number;
}

export interface SessionState {
  pair: string | null;
  strength: number;
  method: Method;
  overlay: Overlay;
  compare: boolean;
}

export function initialState(): SessionState {
  return { pair: null, strength: 0, method: "retinex", overlay: "none", compare: false };
}

export function clampStrength(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(1, Math.max(0, value));
}

export function withStrength(state: SessionState, value: number): SessionState {
  return { ...state, strength: clampStrength(value) };
}

export function withPair(state: SessionState, pair: string): SessionState {
  return { ...state, pair };
}

export function withMethod(state: SessionState, method: Method): SessionState {
  return { ...state, method };
}

export function toggleOverlay(state: SessionState, overlay: Overlay): SessionState {
  // selecting the active overlay again switches it off
  return { ...state, overlay: state.overlay === overlay ? "none" : overlay };
}

export function withCompare(state: SessionState, compare: boolean): SessionState {
  return { ...state, compare };
}
