/**
 * Thin client for the enhancement service API. URL building is kept pure so
 * it can be tested without a network.
 */

import type { Method, PairInfo } from "./state.js";

export function pairsUrl(base: string): string {
  return `${base}/api/pairs`;
}

export function enhanceUrl(base: string, pair: string, s: number, method: Method): string {
  const q = new URLSearchParams({ pair, s: s.toString(), method });
  return `${base}/api/enhance?${q}`;
}

export function weightmapUrl(base: string, pair: string, s: number): string {
  const q = new URLSearchParams({ pair, s: s.toString() });
  return `${base}/api/weightmap?${q}`;
}

export function edgediffUrl(base: string, pair: string, s: number): string {
  const q = new URLSearchParams({ pair, s: s.toString() });
  return `${base}/api/edgediff?${q}`;
}

export async function fetchPairs(base: string): Promise<PairInfo[]> {
  const res = await fetch(pairsUrl(base));
  if (!res.ok) throw new Error(`pairs request failed: ${res.status}`);
  return (await res.json()) as PairInfo[];
}

export async function fetchImageBlob(url: string): Promise<Blob> {
  const res = await fetch(url);
  if (!res.ok) throw new Error(`image request failed: ${res.status} ${url}`);
  return await res.blob();
}
