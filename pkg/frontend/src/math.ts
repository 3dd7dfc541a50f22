/** Minimal vector/quaternion/matrix kit; quaternions are (w, x, y, z). */

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export const QUAT_IDENTITY: Quat = [1, 0, 0, 0];

export function vadd(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function vsub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function vscale(v: Vec3, s: number): Vec3 {
  return [v[0] * s, v[1] * s, v[2] * s];
}

export function vdot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function vcross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function vlength(v: Vec3): number {
  return Math.hypot(v[0], v[1], v[2]);
}

export function vnormalize(v: Vec3): Vec3 {
  const n = vlength(v);
  return n === 0 ? [0, 0, 0] : vscale(v, 1 / n);
}

/** Hamilton product a * b. */
export function qmul(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

/** Conjugate; equals the inverse for unit quaternions. */
export function qconj(q: Quat): Quat {
  return [q[0], -q[1], -q[2], -q[3]];
}

export function qnorm(q: Quat): number {
  return Math.hypot(q[0], q[1], q[2], q[3]);
}

export function qnormalize(q: Quat): Quat {
  const n = qnorm(q);
  if (n === 0) return [1, 0, 0, 0];
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function qfromAxisAngle(axis: Vec3, angle: number): Quat {
  const [x, y, z] = vnormalize(axis);
  const s = Math.sin(angle / 2);
  return [Math.cos(angle / 2), x * s, y * s, z * s];
}

/** Rotate a vector by a unit quaternion (q v q*). */
export function qrotate(q: Quat, v: Vec3): Vec3 {
  const [w, x, y, z] = q;
  // t = 2 q_vec x v, v' = v + w t + q_vec x t
  const tx = 2 * (y * v[2] - z * v[1]);
  const ty = 2 * (z * v[0] - x * v[2]);
  const tz = 2 * (x * v[1] - y * v[0]);
  return [
    v[0] + w * tx + y * tz - z * ty,
    v[1] + w * ty + z * tx - x * tz,
    v[2] + w * tz + x * ty - y * tx,
  ];
}

/** Column-major 4x4, WebGL layout. */
export type Mat4 = Float32Array;

export function mat4Identity(): Mat4 {
  const m = new Float32Array(16);
  m[0] = m[5] = m[10] = m[15] = 1;
  return m;
}

export function mat4Multiply(a: Mat4, b: Mat4): Mat4 {
  const out = new Float32Array(16);
  for (let c = 0; c < 4; c++) {
    for (let r = 0; r < 4; r++) {
      let s = 0;
      for (let k = 0; k < 4; k++) s += a[k * 4 + r] * b[c * 4 + k];
      out[c * 4 + r] = s;
    }
  }
  return out;
}

export function mat4Perspective(fovy: number, aspect: number, near: number, far: number): Mat4 {
  const f = 1 / Math.tan(fovy / 2);
  const m = new Float32Array(16);
  m[0] = f / aspect;
  m[5] = f;
  m[10] = (far + near) / (near - far);
  m[11] = -1;
  m[14] = (2 * far * near) / (near - far);
  return m;
}

export function mat4LookAt(eye: Vec3, center: Vec3, up: Vec3): Mat4 {
  const zAxis = vnormalize(vsub(eye, center));
  const xAxis = vnormalize(vcross(up, zAxis));
  const yAxis = vcross(zAxis, xAxis);
  const m = new Float32Array(16);
  m[0] = xAxis[0]; m[1] = yAxis[0]; m[2] = zAxis[0];
  m[4] = xAxis[1]; m[5] = yAxis[1]; m[6] = zAxis[1];
  m[8] = xAxis[2]; m[9] = yAxis[2]; m[10] = zAxis[2];
  m[12] = -vdot(xAxis, eye);
  m[13] = -vdot(yAxis, eye);
  m[14] = -vdot(zAxis, eye);
  m[15] = 1;
  return m;
}

/** T(position) * R(orientation) * S(scale) * T(-pivot). */
export function mat4FromPose(position: Vec3, orientation: Quat, scale: number, pivot: Vec3): Mat4 {
  const [w, x, y, z] = orientation;
  const m = new Float32Array(16);
  m[0] = (1 - 2 * (y * y + z * z)) * scale;
  m[1] = 2 * (x * y + w * z) * scale;
  m[2] = 2 * (x * z - w * y) * scale;
  m[4] = 2 * (x * y - w * z) * scale;
  m[5] = (1 - 2 * (x * x + z * z)) * scale;
  m[6] = 2 * (y * z + w * x) * scale;
  m[8] = 2 * (x * z + w * y) * scale;
  m[9] = 2 * (y * z - w * x) * scale;
  m[10] = (1 - 2 * (x * x + y * y)) * scale;
  m[12] = position[0] - (m[0] * pivot[0] + m[4] * pivot[1] + m[8] * pivot[2]);
  m[13] = position[1] - (m[1] * pivot[0] + m[5] * pivot[1] + m[9] * pivot[2]);
  m[14] = position[2] - (m[2] * pivot[0] + m[6] * pivot[1] + m[10] * pivot[2]);
  m[15] = 1;
  return m;
}
