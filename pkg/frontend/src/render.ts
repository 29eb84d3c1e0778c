// Canvas renderer: arena geometry, robot bodies with LED ring and heading,
// ToF rays (only when they hit something), and the two line-sensor dots.

import { HelloBody } from "./protocol.js";
import { RenderPose, ViewModel } from "./viewmodel.js";

const TOF_SENTINEL_MM = 2000;
const BODY_RADIUS_M = 0.075;

interface Mapping {
  scale: number;
  offsetX: number;
  offsetY: number;
}

function fitArena(hello: HelloBody | null, width: number, height: number): Mapping {
  const bounds = hello?.world.bounds ?? [-2, -2, 2, 2];
  const [xmin, ymin, xmax, ymax] = bounds;
  const margin = 20;
  const scale = Math.min(
    (width - 2 * margin) / (xmax - xmin),
    (height - 2 * margin) / (ymax - ymin),
  );
  return {
    scale,
    offsetX: margin - xmin * scale,
    offsetY: height - margin + ymin * scale,
  };
}

export function draw(ctx: CanvasRenderingContext2D, vm: ViewModel, nowMs: number): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = "#15181d";
  ctx.fillRect(0, 0, width, height);
  const m = fitArena(vm.hello, width, height);
  const X = (x: number) => m.offsetX + x * m.scale;
  const Y = (y: number) => m.offsetY - y * m.scale;

  if (vm.hello) {
    const w = vm.hello.world;
    if (w.bounds) {
      ctx.strokeStyle = "#3a4150";
      ctx.lineWidth = 1.5;
      ctx.strokeRect(X(w.bounds[0]), Y(w.bounds[3]),
                     (w.bounds[2] - w.bounds[0]) * m.scale,
                     (w.bounds[3] - w.bounds[1]) * m.scale);
    }
    ctx.strokeStyle = "#8892a6";
    ctx.lineWidth = 2;
    for (const [x1, y1, x2, y2] of w.segments) {
      ctx.beginPath();
      ctx.moveTo(X(x1), Y(y1));
      ctx.lineTo(X(x2), Y(y2));
      ctx.stroke();
    }
    ctx.fillStyle = "#566077";
    for (const [cx, cy, r] of w.circles) {
      ctx.beginPath();
      ctx.arc(X(cx), Y(cy), r * m.scale, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  for (const pose of vm.poses(nowMs)) {
    drawRobot(ctx, pose, m, X, Y, pose.name === vm.teleopTarget);
  }
}

function drawRobot(
  ctx: CanvasRenderingContext2D,
  pose: RenderPose,
  m: Mapping,
  X: (x: number) => number,
  Y: (y: number) => number,
  selected: boolean,
): void {
  const r = BODY_RADIUS_M * m.scale;
  const px = X(pose.x);
  const py = Y(pose.y);

  // ToF rays, clockwise from the heading; misses carry the sentinel and are
  // not drawn.
  ctx.lineWidth = 1;
  ctx.strokeStyle = "rgba(255, 120, 80, 0.6)";
  pose.tof.forEach((mm, k) => {
    if (mm >= TOF_SENTINEL_MM) {
      return;
    }
    const bearing = pose.theta - (k * Math.PI) / 4;
    const sx = px + Math.cos(bearing) * r;
    const sy = py - Math.sin(bearing) * r;
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(sx + Math.cos(bearing) * (mm / 1000) * m.scale,
               sy - Math.sin(bearing) * (mm / 1000) * m.scale);
    ctx.stroke();
  });

  // LED ring, then body.
  const [lr, lg, lb] = pose.led;
  ctx.beginPath();
  ctx.arc(px, py, r + 3, 0, 2 * Math.PI);
  ctx.strokeStyle = `rgb(${lr}, ${lg}, ${lb})`;
  ctx.lineWidth = 3;
  ctx.stroke();

  ctx.beginPath();
  ctx.arc(px, py, r, 0, 2 * Math.PI);
  ctx.fillStyle = selected ? "#d8dee9" : "#aab2c0";
  ctx.fill();

  // Heading tick.
  ctx.beginPath();
  ctx.moveTo(px, py);
  ctx.lineTo(px + Math.cos(pose.theta) * r, py - Math.sin(pose.theta) * r);
  ctx.strokeStyle = "#15181d";
  ctx.lineWidth = 2;
  ctx.stroke();

  // Line sensors: dark dot when the ADC reads below mid-scale.
  const offsets: Array<[number, number]> = [[0.05, 0.02], [0.05, -0.02]];
  offsets.forEach(([fx, fy], i) => {
    const wx = pose.x + fx * Math.cos(pose.theta) - fy * Math.sin(pose.theta);
    const wy = pose.y + fx * Math.sin(pose.theta) + fy * Math.cos(pose.theta);
    ctx.beginPath();
    ctx.arc(X(wx), Y(wy), 2.5, 0, 2 * Math.PI);
    ctx.fillStyle = pose.line[i] < 512 ? "#111" : "#f5f0dc";
    ctx.fill();
  });

  ctx.fillStyle = "#cfd6e4";
  ctx.font = "11px sans-serif";
  ctx.fillText(pose.name, px + r + 5, py - r - 2);
}
