/**
 * Coalescing frame fetcher: at most one request per minInterval (10/s while
 * the slider drags), only the latest requested parameters are ever issued,
 * and a response that has been superseded by a newer issue is discarded on
 * arrival. On failure the error handler fires and the last good frame stays.
 */

export interface FrameScheduler<P, F> {
  request(params: P): void;
  settled(): boolean;
}

export function createScheduler<P, F>(
  fetchFrame: (params: P) => Promise<F>,
  applyFrame: (frame: F, params: P) => void,
  onError: (error: unknown) => void = () => {},
  minIntervalMs = 100,
): FrameScheduler<P, F> {
  let pending: P | null = null;
  let timer: ReturnType<typeof setTimeout> | null = null;
  let lastIssue = -Infinity;
  let issued = 0;
  let inFlight = 0;

  function schedule(): void {
    if (timer !== null) return;
    const wait = Math.max(0, lastIssue + minIntervalMs - Date.now());
    timer = setTimeout(issue, wait);
  }

  function issue(): void {
    timer = null;
    if (pending === null) return;
    const params = pending;
    pending = null;
    lastIssue = Date.now();
    const id = ++issued;
    inFlight += 1;
    fetchFrame(params).then(
      (frame) => {
        inFlight -= 1;
        if (id === issued) applyFrame(frame, params);
        if (pending !== null) schedule();
      },
      (error) => {
        inFlight -= 1;
        onError(error);
        if (pending !== null) schedule();
      },
    );
  }

  return {
    request(params: P): void {
      pending = params;
      schedule();
    },
    settled(): boolean {
      return pending === null && timer === null && inFlight === 0;
    },
  };
}
