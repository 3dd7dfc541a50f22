/**
 * WebGL2 mesh renderer. The whole mesh draws translucent with the alpha
 * carried in the wire colors, so highlighted areas come out more
 * transparent without any shading logic here.
 */

import { Mat4, Vec3, mat4FromPose, mat4LookAt, mat4Multiply, mat4Perspective, vadd, vscale, vsub } from "./math";
import { Bounds, Pose } from "./manipulate";
import { MeshMessage } from "./protocol";

const VERTEX_SRC = `#version 300 es
layout(location = 0) in vec3 a_position;
layout(location = 1) in vec4 a_color;
uniform mat4 u_mvp;
out vec4 v_color;
void main() {
  v_color = a_color;
  gl_Position = u_mvp * vec4(a_position, 1.0);
  gl_PointSize = 6.0;
}
`;

const FRAGMENT_SRC = `#version 300 es
precision mediump float;
in vec4 v_color;
out vec4 outColor;
void main() {
  outColor = v_color;
}
`;

function compile(gl: WebGL2RenderingContext, type: number, src: string): WebGLShader {
  const shader = gl.createShader(type);
  if (!shader) throw new Error("shader allocation failed");
  gl.shaderSource(shader, src);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(gl.getShaderInfoLog(shader) ?? "shader compile failed");
  }
  return shader;
}

export class MeshRenderer {
  private gl: WebGL2RenderingContext;
  private program: WebGLProgram;
  private mvpLoc: WebGLUniformLocation;
  private vao: WebGLVertexArrayObject;
  private positionBuf: WebGLBuffer;
  private colorBuf: WebGLBuffer;
  private indexBuf: WebGLBuffer;
  private indexCount = 0;
  private vertexCount = 0;

  /** Bounds of the last mesh in its own coordinates, null before any mesh. */
  bounds: Bounds | null = null;
  center: Vec3 = [0, 0, 0];
  radius = 1;

  constructor(private canvas: HTMLCanvasElement) {
    const gl = canvas.getContext("webgl2", { antialias: true, alpha: false });
    if (!gl) throw new Error("WebGL2 unavailable");
    this.gl = gl;

    const program = gl.createProgram();
    if (!program) throw new Error("program allocation failed");
    gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, VERTEX_SRC));
    gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, FRAGMENT_SRC));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(gl.getProgramInfoLog(program) ?? "program link failed");
    }
    this.program = program;
    const mvpLoc = gl.getUniformLocation(program, "u_mvp");
    if (!mvpLoc) throw new Error("u_mvp not found");
    this.mvpLoc = mvpLoc;

    this.vao = gl.createVertexArray()!;
    this.positionBuf = gl.createBuffer()!;
    this.colorBuf = gl.createBuffer()!;
    this.indexBuf = gl.createBuffer()!;

    gl.bindVertexArray(this.vao);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.positionBuf);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 0, 0);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.colorBuf);
    gl.enableVertexAttribArray(1);
    gl.vertexAttribPointer(1, 4, gl.UNSIGNED_BYTE, true, 0, 0);
    gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.indexBuf);
    gl.bindVertexArray(null);

    gl.enable(gl.BLEND);
    gl.blendFunc(gl.SRC_ALPHA, gl.ONE_MINUS_SRC_ALPHA);
    gl.enable(gl.DEPTH_TEST);
    gl.clearColor(0.08, 0.09, 0.11, 1);
  }

  setMesh(msg: MeshMessage): void {
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.positionBuf);
    gl.bufferData(gl.ARRAY_BUFFER, msg.positions, gl.DYNAMIC_DRAW);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.colorBuf);
    gl.bufferData(gl.ARRAY_BUFFER, msg.colors, gl.DYNAMIC_DRAW);
    gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.indexBuf);
    gl.bufferData(gl.ELEMENT_ARRAY_BUFFER, msg.triangles, gl.DYNAMIC_DRAW);
    this.indexCount = msg.triangles.length;
    this.vertexCount = msg.vertexCount;

    if (msg.vertexCount > 0) {
      const min: Vec3 = [Infinity, Infinity, Infinity];
      const max: Vec3 = [-Infinity, -Infinity, -Infinity];
      for (let i = 0; i < msg.positions.length; i += 3) {
        for (let a = 0; a < 3; a++) {
          const v = msg.positions[i + a];
          if (v < min[a]) min[a] = v;
          if (v > max[a]) max[a] = v;
        }
      }
      this.bounds = { min, max };
      this.center = vscale(vadd(min, max), 0.5);
      const ext = vsub(max, min);
      this.radius = Math.max(0.5 * Math.hypot(ext[0], ext[1], ext[2]), 1e-3);
    } else {
      this.bounds = null;
      this.center = [0, 0, 0];
      this.radius = 1;
    }
  }

  /** World-space bounds of the mesh under a pose/scale, for grab testing. */
  worldBounds(pose: Pose, scale: number): Bounds | null {
    if (!this.bounds) return null;
    const model = mat4FromPose(pose.position, pose.orientation, scale, this.center);
    const min: Vec3 = [Infinity, Infinity, Infinity];
    const max: Vec3 = [-Infinity, -Infinity, -Infinity];
    for (let corner = 0; corner < 8; corner++) {
      const p: Vec3 = [
        corner & 1 ? this.bounds.max[0] : this.bounds.min[0],
        corner & 2 ? this.bounds.max[1] : this.bounds.min[1],
        corner & 4 ? this.bounds.max[2] : this.bounds.min[2],
      ];
      for (let a = 0; a < 3; a++) {
        const w = model[a] * p[0] + model[4 + a] * p[1] + model[8 + a] * p[2] + model[12 + a];
        if (w < min[a]) min[a] = w;
        if (w > max[a]) max[a] = w;
      }
    }
    return { min, max };
  }

  /** Camera distance to the object center; the pointer's interaction depth. */
  viewDistance(): number {
    return this.radius * 2.8;
  }

  viewMatrix(): Mat4 {
    const eye: Vec3 = [0, -this.viewDistance(), this.radius * 0.9];
    return mat4LookAt(eye, [0, 0, 0], [0, 0, 1]);
  }

  draw(pose: Pose, scale: number): void {
    const gl = this.gl;
    const w = this.canvas.clientWidth || this.canvas.width;
    const h = this.canvas.clientHeight || this.canvas.height;
    const pixelW = Math.max(1, Math.floor(w * devicePixelRatio));
    const pixelH = Math.max(1, Math.floor(h * devicePixelRatio));
    if (this.canvas.width !== pixelW || this.canvas.height !== pixelH) {
      this.canvas.width = pixelW;
      this.canvas.height = pixelH;
    }
    gl.viewport(0, 0, pixelW, pixelH);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    if (this.vertexCount === 0) return;

    const proj = mat4Perspective(Math.PI / 4, pixelW / pixelH, this.radius * 0.01, this.radius * 40);
    const model = mat4FromPose(pose.position, pose.orientation, scale, this.center);
    const mvp = mat4Multiply(proj, mat4Multiply(this.viewMatrix(), model));

    gl.useProgram(this.program);
    gl.uniformMatrix4fv(this.mvpLoc, false, mvp);
    gl.bindVertexArray(this.vao);
    // translucent surfaces: keep depth reads but do not occlude each other
    gl.depthMask(false);
    if (this.indexCount > 0) {
      gl.drawElements(gl.TRIANGLES, this.indexCount, gl.UNSIGNED_INT, 0);
    } else {
      gl.drawArrays(gl.POINTS, 0, this.vertexCount);
    }
    gl.depthMask(true);
    gl.bindVertexArray(null);
  }
}
