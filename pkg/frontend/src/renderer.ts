import { OrbitCamera } from "./camera.js";
import { MeshData } from "./mesh.js";
import { Vec3, cross, normalize, sub } from "./math.js";

const VERTEX_SHADER = `
attribute vec3 aPosition;
attribute vec3 aNormal;
attribute vec3 aColor;
uniform mat4 uViewProj;
varying vec3 vColor;
varying vec3 vNormal;
void main() {
  gl_Position = uViewProj * vec4(aPosition, 1.0);
  vColor = aColor;
  vNormal = aNormal;
}
`;

const FRAGMENT_SHADER = `
precision mediump float;
varying vec3 vColor;
varying vec3 vNormal;
void main() {
  vec3 light = normalize(vec3(0.4, 0.8, 0.6));
  float shade = 0.55 + 0.45 * abs(dot(normalize(vNormal), light));
  gl_FragColor = vec4(vColor * shade, 1.0);
}
`;

const POINT_SHADER_VS = `
attribute vec3 aPosition;
attribute vec3 aColor;
uniform mat4 uViewProj;
uniform float uPointSize;
varying vec3 vColor;
void main() {
  gl_Position = uViewProj * vec4(aPosition, 1.0);
  gl_PointSize = uPointSize;
  vColor = aColor;
}
`;

const POINT_SHADER_FS = `
precision mediump float;
varying vec3 vColor;
void main() { gl_FragColor = vec4(vColor, 1.0); }
`;

function compile(gl: WebGLRenderingContext, kind: number, src: string): WebGLShader {
  const shader = gl.createShader(kind)!;
  gl.shaderSource(shader, src);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(gl.getShaderInfoLog(shader) ?? "shader compile failed");
  }
  return shader;
}

function link(gl: WebGLRenderingContext, vs: string, fs: string): WebGLProgram {
  const program = gl.createProgram()!;
  gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, vs));
  gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, fs));
  gl.linkProgram(program);
  if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
    throw new Error(gl.getProgramInfoLog(program) ?? "program link failed");
  }
  return program;
}

/** Flat-shaded mesh viewport with optional colored overlay points. */
export class MeshViewport {
  private gl: WebGLRenderingContext;
  private meshProgram: WebGLProgram;
  private pointProgram: WebGLProgram;
  private triCount = 0;
  private meshBuffers: { position: WebGLBuffer; normal: WebGLBuffer; color: WebGLBuffer };
  private pointBuffer: WebGLBuffer;
  private pointColorBuffer: WebGLBuffer;
  private pointCount = 0;
  private baseColors: Float32Array = new Float32Array(0);

  constructor(public canvas: HTMLCanvasElement, public camera: OrbitCamera,
              private mesh: MeshData, baseColor: Vec3) {
    const gl = canvas.getContext("webgl");
    if (!gl) throw new Error("WebGL unavailable");
    this.gl = gl;
    this.meshProgram = link(gl, VERTEX_SHADER, FRAGMENT_SHADER);
    this.pointProgram = link(gl, POINT_SHADER_VS, POINT_SHADER_FS);
    this.meshBuffers = {
      position: gl.createBuffer()!,
      normal: gl.createBuffer()!,
      color: gl.createBuffer()!,
    };
    this.pointBuffer = gl.createBuffer()!;
    this.pointColorBuffer = gl.createBuffer()!;
    this.uploadMesh(baseColor);
    gl.enable(gl.DEPTH_TEST);
  }

  private uploadMesh(baseColor: Vec3): void {
    const faces = this.mesh.faces;
    const verts = this.mesh.vertices;
    const positions = new Float32Array(faces.length * 9);
    const normals = new Float32Array(faces.length * 9);
    const colors = new Float32Array(faces.length * 9);
    for (let f = 0; f < faces.length; f++) {
      const [ia, ib, ic] = faces[f];
      const a = verts[ia] as unknown as Vec3;
      const b = verts[ib] as unknown as Vec3;
      const c = verts[ic] as unknown as Vec3;
      const n = normalize(cross(sub(b, a), sub(c, a)));
      for (let k = 0; k < 3; k++) {
        const v = [a, b, c][k];
        const o = f * 9 + k * 3;
        positions.set(v, o);
        normals.set(n, o);
        colors.set(baseColor, o);
      }
    }
    this.baseColors = colors.slice();
    this.triCount = faces.length;
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.meshBuffers.position);
    gl.bufferData(gl.ARRAY_BUFFER, positions, gl.STATIC_DRAW);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.meshBuffers.normal);
    gl.bufferData(gl.ARRAY_BUFFER, normals, gl.STATIC_DRAW);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.meshBuffers.color);
    gl.bufferData(gl.ARRAY_BUFFER, colors, gl.DYNAMIC_DRAW);
  }

  /** Color whole vertices (e.g. contact patches); resets to base first. */
  colorVertices(groups: { vertices: number[]; color: Vec3 }[]): void {
    const colors = this.baseColors.slice();
    const byVertex = new Map<number, Vec3>();
    for (const group of groups) {
      for (const v of group.vertices) byVertex.set(v, group.color);
    }
    const faces = this.mesh.faces;
    for (let f = 0; f < faces.length; f++) {
      for (let k = 0; k < 3; k++) {
        const color = byVertex.get(faces[f][k]);
        if (color) colors.set(color, f * 9 + k * 3);
      }
    }
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.meshBuffers.color);
    gl.bufferData(gl.ARRAY_BUFFER, colors, gl.DYNAMIC_DRAW);
  }

  /** Overlay points (axis waypoints, transferred contacts, click markers). */
  setPoints(points: { position: Vec3; color: Vec3 }[]): void {
    const pos = new Float32Array(points.length * 3);
    const col = new Float32Array(points.length * 3);
    points.forEach((p, i) => {
      pos.set(p.position, i * 3);
      col.set(p.color, i * 3);
    });
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.pointBuffer);
    gl.bufferData(gl.ARRAY_BUFFER, pos, gl.DYNAMIC_DRAW);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.pointColorBuffer);
    gl.bufferData(gl.ARRAY_BUFFER, col, gl.DYNAMIC_DRAW);
    this.pointCount = points.length;
  }

  draw(): void {
    const gl = this.gl;
    const { width, height } = this.canvas;
    gl.viewport(0, 0, width, height);
    gl.clearColor(0.13, 0.14, 0.17, 1.0);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    const vp = this.camera.viewProjection(width, height);

    gl.useProgram(this.meshProgram);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.meshProgram, "uViewProj"), false, vp);
    this.bindAttrib(this.meshProgram, "aPosition", this.meshBuffers.position);
    this.bindAttrib(this.meshProgram, "aNormal", this.meshBuffers.normal);
    this.bindAttrib(this.meshProgram, "aColor", this.meshBuffers.color);
    gl.drawArrays(gl.TRIANGLES, 0, this.triCount * 3);

    if (this.pointCount > 0) {
      gl.useProgram(this.pointProgram);
      gl.uniformMatrix4fv(gl.getUniformLocation(this.pointProgram, "uViewProj"), false, vp);
      gl.uniform1f(gl.getUniformLocation(this.pointProgram, "uPointSize"), 7.0);
      this.bindAttrib(this.pointProgram, "aPosition", this.pointBuffer);
      this.bindAttrib(this.pointProgram, "aColor", this.pointColorBuffer);
      gl.drawArrays(gl.POINTS, 0, this.pointCount);
    }
  }

  private bindAttrib(program: WebGLProgram, name: string, buffer: WebGLBuffer): void {
    const gl = this.gl;
    const loc = gl.getAttribLocation(program, name);
    if (loc < 0) return;
    gl.bindBuffer(gl.ARRAY_BUFFER, buffer);
    gl.enableVertexAttribArray(loc);
    gl.vertexAttribPointer(loc, 3, gl.FLOAT, false, 0, 0);
  }
}
