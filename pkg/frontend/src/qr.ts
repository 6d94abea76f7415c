/** Decorative QR-style card for an enrollment URL.
 *
 * The scannable payload in this playground is the URL string itself (it
 * rides on the drag event); the block pattern is a deterministic visual
 * derived from the URL so repeated issuances look distinct.
 */

function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i += 1) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

const SIZE = 21;
const FINDER = [
  [0, 0],
  [SIZE - 7, 0],
  [0, SIZE - 7],
];

function inFinder(x: number, y: number): boolean {
  return FINDER.some(([fx, fy]) => x >= fx && x < fx + 7 && y >= fy && y < fy + 7);
}

function finderDark(x: number, y: number): boolean {
  for (const [fx, fy] of FINDER) {
    if (x >= fx && x < fx + 7 && y >= fy && y < fy + 7) {
      const dx = x - fx;
      const dy = y - fy;
      const ring = Math.max(Math.abs(dx - 3), Math.abs(dy - 3));
      return ring !== 2;
    }
  }
  return false;
}

export function renderQrCard(url: string): HTMLElement {
  const card = document.createElement("div");
  card.className = "qr-card";
  card.draggable = true;
  card.title = "drag onto a device pane to scan";
  card.addEventListener("dragstart", (event) => {
    event.dataTransfer?.setData("application/x-da2fa-url", url);
    event.dataTransfer?.setData("text/plain", url);
  });

  const canvas = document.createElement("canvas");
  const scale = 6;
  canvas.width = SIZE * scale;
  canvas.height = SIZE * scale;
  const ctx = canvas.getContext("2d")!;
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#1a1a1a";
  let state = fnv1a(url);
  for (let y = 0; y < SIZE; y += 1) {
    for (let x = 0; x < SIZE; x += 1) {
      let dark: boolean;
      if (inFinder(x, y)) {
        dark = finderDark(x, y);
      } else {
        state = (Math.imul(state, 1103515245) + 12345) >>> 0;
        dark = (state & 0x40000) !== 0;
      }
      if (dark) ctx.fillRect(x * scale, y * scale, scale, scale);
    }
  }
  card.appendChild(canvas);

  const label = document.createElement("code");
  label.textContent = url;
  card.appendChild(label);
  return card;
}
