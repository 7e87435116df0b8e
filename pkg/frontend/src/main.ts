import { AnchorMode } from "./pose.js";
import { Viewer } from "./viewer.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("scene");
const viewer = new Viewer(canvas, el("stats-overlay"), el("status"));

function resize(): void {
  canvas.width = window.innerWidth;
  canvas.height = window.innerHeight;
}
window.addEventListener("resize", resize);
resize();

for (const mode of ["head", "world", "body"] as AnchorMode[]) {
  el<HTMLButtonElement>(`mode-${mode}`).addEventListener("click", () => {
    viewer.setMode(mode);
    document.querySelectorAll(".mode").forEach((b) => b.classList.remove("active"));
    el(`mode-${mode}`).classList.add("active");
  });
}
el("mode-world").classList.add("active");
el<HTMLButtonElement>("pin-here").addEventListener("click", () => viewer.pinHere());

viewer.start();
