/**
 * DOM wiring for the strength studio. Logic lives in state.ts / api.ts /
 * scheduler.ts; this file only connects controls to the scheduler and
 * paints frames.
 */

import { edgediffUrl, enhanceUrl, fetchImageBlob, fetchPairs, weightmapUrl } from "./api.js";
import { createScheduler } from "./scheduler.js";
import {
  initialState,
  toggleOverlay,
  withCompare,
  withMethod,
  withPair,
  withStrength,
  type Method,
  type Overlay,
  type SessionState,
} from "./state.js";
import { drawFrame, type Frame } from "./view.js";

const BASE = "";

interface FrameParams {
  pair: string;
  strength: number;
  method: Method;
  overlay: Overlay;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function loadBitmap(url: string): Promise<ImageBitmap> {
  return createImageBitmap(await fetchImageBlob(url));
}

async function fetchFrame(params: FrameParams): Promise<Frame> {
  const image = await loadBitmap(
    enhanceUrl(BASE, params.pair, params.strength, params.method),
  );
  let overlay: ImageBitmap | null = null;
  if (params.overlay === "weight") {
    overlay = await loadBitmap(weightmapUrl(BASE, params.pair, params.strength));
  } else if (params.overlay === "edgediff") {
    overlay = await loadBitmap(edgediffUrl(BASE, params.pair, params.strength));
  }
  return { image, overlay };
}

function main(): void {
  let state: SessionState = initialState();

  const pairSelect = el<HTMLSelectElement>("pair");
  const slider = el<HTMLInputElement>("strength");
  const strengthLabel = el<HTMLSpanElement>("strength-value");
  const methodSelect = el<HTMLSelectElement>("method");
  const overlayWeight = el<HTMLButtonElement>("overlay-weight");
  const overlayEdge = el<HTMLButtonElement>("overlay-edgediff");
  const compareToggle = el<HTMLInputElement>("compare");
  const banner = el<HTMLDivElement>("error-banner");
  const view = el<HTMLCanvasElement>("view");
  const reference = el<HTMLCanvasElement>("reference");

  const scheduler = createScheduler<FrameParams, Frame>(
    fetchFrame,
    (frame) => {
      banner.hidden = true;
      drawFrame(view, frame);
    },
    (error) => {
      banner.textContent = `service error: ${String(error)}`;
      banner.hidden = false;
    },
  );

  const refScheduler = createScheduler<FrameParams, Frame>(
    fetchFrame,
    (frame) => drawFrame(reference, frame),
    () => {},
  );

  function refresh(): void {
    if (!state.pair) return;
    strengthLabel.textContent = state.strength.toFixed(2);
    scheduler.request({
      pair: state.pair,
      strength: state.strength,
      method: state.method,
      overlay: state.overlay,
    });
    reference.parentElement!.hidden = !state.compare;
    if (state.compare) {
      refScheduler.request({
        pair: state.pair,
        strength: 0,
        method: state.method,
        overlay: "none",
      });
    }
  }

  pairSelect.addEventListener("change", () => {
    state = withPair(state, pairSelect.value);
    refresh();
  });
  slider.addEventListener("input", () => {
    state = withStrength(state, Number(slider.value));
    refresh();
  });
  methodSelect.addEventListener("change", () => {
    state = withMethod(state, methodSelect.value as Method);
    refresh();
  });
  overlayWeight.addEventListener("click", () => {
    state = toggleOverlay(state, "weight");
    refresh();
  });
  overlayEdge.addEventListener("click", () => {
    state = toggleOverlay(state, "edgediff");
    refresh();
  });
  compareToggle.addEventListener("change", () => {
    state = withCompare(state, compareToggle.checked);
    refresh();
  });

  fetchPairs(BASE)
    .then((pairs) => {
      for (const pair of pairs) {
        const option = document.createElement("option");
        option.value = pair.id;
        option.textContent = `${pair.id} (${pair.width}x${pair.height})`;
        pairSelect.appendChild(option);
      }
      if (pairs.length > 0) {
        state = withPair(state, pairs[0].id);
        pairSelect.value = pairs[0].id;
        refresh();
      }
    })
    .catch((error) => {
      banner.textContent = `cannot reach service: ${String(error)}`;
      banner.hidden = false;
    });
}

main();
