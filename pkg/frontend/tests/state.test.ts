import { describe, expect, it } from "vitest";

import {
  clampStrength,
  initialState,
  toggleOverlay,
  withMethod,
  withPair,
  withStrength,
} from "../src/state.js";

describe("clampStrength", () => {
  it("passes in-range values through", () => {
    expect(clampStrength(0)).toBe(0);
    expect(clampStrength(0.37)).toBeCloseTo(0.37, 12);
    expect(clampStrength(1)).toBe(1);
  });

  it("clamps out-of-range values", () => {
    expect(clampStrength(1.5)).toBe(1);
    expect(clampStrength(-0.2)).toBe(0);
    expect(clampStrength(Infinity)).toBe(1);
  });

  it("maps NaN to zero", () => {
    expect(clampStrength(Number.NaN)).toBe(0);
  });
});

describe("state transitions", () => {
  it("never stores out-of-range strength", () => {
    let state = initialState();
    for (const raw of [-3, 0.5, 2, 1e9, Number.NaN]) {
      state = withStrength(state, raw);
      expect(state.strength).toBeGreaterThanOrEqual(0);
      expect(state.strength).toBeLessThanOrEqual(1);
    }
  });

  it("toggling the active overlay switches it off", () => {
    let state = initialState();
    state = toggleOverlay(state, "weight");
    expect(state.overlay).toBe("weight");
    state = toggleOverlay(state, "weight");
    expect(state.overlay).toBe("none");
    state = toggleOverlay(state, "weight");
    state = toggleOverlay(state, "edgediff");
    expect(state.overlay).toBe("edgediff");
  });

  it("updates are immutable", () => {
    const state = initialState();
    const next = withPair(withMethod(state, "alpha"), "p1");
    expect(state.method).toBe("retinex");
    expect(state.pair).toBeNull();
    expect(next.method).toBe("alpha");
    expect(next.pair).toBe("p1");
  });
});
