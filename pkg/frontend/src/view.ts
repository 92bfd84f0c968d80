/**
 * Canvas rendering: base frame plus optional 50%-opacity grayscale overlay.
 * Kept independent of fetching so overlay toggles never mutate the frame.
 */

export interface Frame {
  image: ImageBitmap;
  overlay: ImageBitmap | null;
}

export function drawFrame(canvas: HTMLCanvasElement, frame: Frame): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  canvas.width = frame.image.width;
  canvas.height = frame.image.height;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.globalAlpha = 1.0;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(frame.image, 0, 0, canvas.width, canvas.height);
  if (frame.overlay) {
    ctx.globalAlpha = 0.5;
    ctx.drawImage(frame.overlay, 0, 0, canvas.width, canvas.height);
    ctx.globalAlpha = 1.0;
  }
}
