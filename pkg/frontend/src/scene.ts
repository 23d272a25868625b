/**
 * three.js viewport: shaded mesh (or point cloud), optional control-grid
 * wireframe overlay, optional per-vertex coloring of the displacement from
 * the base mesh, and a small built-in orbit control.
 */

import * as THREE from "three";
import type { GridPayload, MeshPayload } from "./api.js";

export interface ViewOptions {
  wireframe: boolean;
  deviation: boolean;
}

const BASE_COLOR = new THREE.Color(0x8899bb);
const COLD = new THREE.Color(0x3366cc);
const HOT = new THREE.Color(0xcc3322);

export class Viewport {
  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private meshGroup = new THREE.Group();
  private gridGroup = new THREE.Group();
  private theta = Math.PI / 4;
  private phi = Math.PI / 3;
  private distance = 2.2;

  constructor(private readonly container: HTMLElement) {
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setClearColor(0x14161a);
    container.appendChild(this.renderer.domElement);
    this.camera = new THREE.PerspectiveCamera(45, 1, 0.01, 50);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.45));
    const key = new THREE.DirectionalLight(0xffffff, 1.4);
    key.position.set(2, 3, 2);
    this.scene.add(key);
    const fill = new THREE.DirectionalLight(0xffffff, 0.5);
    fill.position.set(-2, -1, -2);
    this.scene.add(fill);
    this.scene.add(this.meshGroup);
    this.scene.add(this.gridGroup);
    this.attachOrbit();
    this.resize();
    window.addEventListener("resize", () => this.resize());
    this.animate();
  }

  private attachOrbit(): void {
    const el = this.renderer.domElement;
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    el.addEventListener("pointerdown", (e) => {
      dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
      el.setPointerCapture(e.pointerId);
    });
    el.addEventListener("pointermove", (e) => {
      if (!dragging) return;
      this.theta -= (e.clientX - lastX) * 0.01;
      this.phi = Math.min(Math.PI - 0.05, Math.max(0.05, this.phi - (e.clientY - lastY) * 0.01));
      lastX = e.clientX;
      lastY = e.clientY;
    });
    el.addEventListener("pointerup", () => (dragging = false));
    el.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.distance = Math.min(8, Math.max(0.3, this.distance * (1 + e.deltaY * 0.001)));
    });
  }

  private resize(): void {
    const w = this.container.clientWidth || 600;
    const h = this.container.clientHeight || 450;
    this.renderer.setSize(w, h);
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
  }

  private animate = (): void => {
    requestAnimationFrame(this.animate);
    const center = new THREE.Vector3(0.5, 0.5, 0.5);
    this.camera.position.set(
      center.x + this.distance * Math.sin(this.phi) * Math.cos(this.theta),
      center.y + this.distance * Math.cos(this.phi),
      center.z + this.distance * Math.sin(this.phi) * Math.sin(this.theta),
    );
    this.camera.lookAt(center);
    this.renderer.render(this.scene, this.camera);
  };

  /** Replace the displayed mesh; base provides the deviation reference. */
  showMesh(mesh: MeshPayload, base: MeshPayload | null, options: ViewOptions): void {
    this.meshGroup.clear();
    const positions = new Float32Array(mesh.vertices);
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    const colored = options.deviation && base !== null && base.vertices.length === mesh.vertices.length;
    if (colored) {
      geometry.setAttribute(
        "color",
        new THREE.BufferAttribute(deviationColors(mesh.vertices, base!.vertices), 3),
      );
    }
    if (mesh.faces.length > 0) {
      geometry.setIndex(Array.from(mesh.faces));
      geometry.computeVertexNormals();
      const material = new THREE.MeshStandardMaterial({
        color: colored ? 0xffffff : BASE_COLOR,
        vertexColors: colored,
        flatShading: false,
        side: THREE.DoubleSide,
      });
      this.meshGroup.add(new THREE.Mesh(geometry, material));
    } else {
      const material = new THREE.PointsMaterial({
        size: 0.012,
        color: colored ? 0xffffff : BASE_COLOR,
        vertexColors: colored,
      });
      this.meshGroup.add(new THREE.Points(geometry, material));
    }
  }

  /** Draw (or hide) the 6-connectivity lattice of a control grid. */
  showGrid(grid: GridPayload | null): void {
    this.gridGroup.clear();
    if (grid === null) return;
    const n = grid.resolution + 1;
    const idx = (i: number, j: number, k: number) => ((i * n + j) * n + k) * 3;
    const segments: number[] = [];
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < n; j++) {
        for (let k = 0; k < n; k++) {
          const a = idx(i, j, k);
          for (const b of [
            i + 1 < n ? idx(i + 1, j, k) : -1,
            j + 1 < n ? idx(i, j + 1, k) : -1,
            k + 1 < n ? idx(i, j, k + 1) : -1,
          ]) {
            if (b < 0) continue;
            segments.push(
              grid.points[a], grid.points[a + 1], grid.points[a + 2],
              grid.points[b], grid.points[b + 1], grid.points[b + 2],
            );
          }
        }
      }
    }
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(new Float32Array(segments), 3));
    this.gridGroup.add(
      new THREE.LineSegments(
        geometry,
        new THREE.LineBasicMaterial({ color: 0xddaa33, transparent: true, opacity: 0.6 }),
      ),
    );
  }
}

/** Blue-to-red gradient over per-vertex displacement magnitude. */
export function deviationColors(vertices: number[], base: number[]): Float32Array {
  const count = vertices.length / 3;
  const mags = new Float64Array(count);
  let max = 0;
  for (let v = 0; v < count; v++) {
    const dx = vertices[3 * v] - base[3 * v];
    const dy = vertices[3 * v + 1] - base[3 * v + 1];
    const dz = vertices[3 * v + 2] - base[3 * v + 2];
    mags[v] = Math.sqrt(dx * dx + dy * dy + dz * dz);
    if (mags[v] > max) max = mags[v];
  }
  const colors = new Float32Array(count * 3);
  const c = new THREE.Color();
  for (let v = 0; v < count; v++) {
    const t = max > 0 ? mags[v] / max : 0;
    c.copy(COLD).lerp(HOT, t);
    colors[3 * v] = c.r;
    colors[3 * v + 1] = c.g;
    colors[3 * v + 2] = c.b;
  }
  return colors;
}
