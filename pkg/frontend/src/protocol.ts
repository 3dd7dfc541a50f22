/**
 * Decoder for the binary mesh snapshot the server sends per WebSocket frame.
 *
 * Layout, all little-endian:
 *
 *   u16 version        currently 1
 *   u16 flags          bit 0: per-vertex densities appended
 *   u32 vertex_count
 *   u32 triangle_count
 *   f32 x3 per vertex  positions
 *   u8  x4 per vertex  RGBA colors
 *   u32 x3 per triangle vertex indices
 *   f32 per vertex     densities, only when flag bit 0 is set
 *
 * Anything that deviates raises ProtocolError; the caller drops the frame.
 */

export const WIRE_VERSION = 1;
export const FLAG_DENSITIES = 0x0001;

const HEADER_BYTES = 12;

export class ProtocolError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

export interface MeshMessage {
  version: number;
  flags: number;
  vertexCount: number;
  triangleCount: number;
  positions: Float32Array; // 3 per vertex
  colors: Uint8Array; // 4 per vertex, RGBA
  triangles: Uint32Array; // 3 per triangle
  densities: Float32Array | null; // 1 per vertex when present
}

const HOST_IS_LE = new Uint8Array(new Uint16Array([1]).buffer)[0] === 1;

function f32Slice(bytes: Uint8Array, offset: number, count: number): Float32Array {
  if (HOST_IS_LE) {
    return new Float32Array(bytes.slice(offset, offset + count * 4).buffer);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset + offset);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = view.getFloat32(i * 4, true);
  return out;
}

function u32Slice(bytes: Uint8Array, offset: number, count: number): Uint32Array {
  if (HOST_IS_LE) {
    return new Uint32Array(bytes.slice(offset, offset + count * 4).buffer);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset + offset);
  const out = new Uint32Array(count);
  for (let i = 0; i < count; i++) out[i] = view.getUint32(i * 4, true);
  return out;
}

export function decodeMesh(payload: ArrayBuffer | Uint8Array): MeshMessage {
  const bytes = payload instanceof Uint8Array ? payload : new Uint8Array(payload);
  if (bytes.length < HEADER_BYTES) {
    throw new ProtocolError(`message truncated: ${bytes.length} bytes, header needs ${HEADER_BYTES}`);
  }
  const head = new DataView(bytes.buffer, bytes.byteOffset, HEADER_BYTES);
  const version = head.getUint16(0, true);
  const flags = head.getUint16(2, true);
  const vertexCount = head.getUint32(4, true);
  const triangleCount = head.getUint32(8, true);

  if (version !== WIRE_VERSION) {
    throw new ProtocolError(`unsupported version ${version}, expected ${WIRE_VERSION}`);
  }
  if ((flags & ~FLAG_DENSITIES) !== 0) {
    throw new ProtocolError(`unknown flag bits 0x${(flags & ~FLAG_DENSITIES).toString(16)}`);
  }
  const hasDensities = (flags & FLAG_DENSITIES) !== 0;
  const expected =
    HEADER_BYTES + vertexCount * 12 + vertexCount * 4 + triangleCount * 12 + (hasDensities ? vertexCount * 4 : 0);
  if (bytes.length < expected) {
    throw new ProtocolError(`message truncated: ${bytes.length} bytes, layout needs ${expected}`);
  }
  if (bytes.length > expected) {
    throw new ProtocolError(`${bytes.length - expected} trailing bytes after message`);
  }

  let offset = HEADER_BYTES;
  const positions = f32Slice(bytes, offset, vertexCount * 3);
  offset += vertexCount * 12;
  const colors = bytes.slice(offset, offset + vertexCount * 4);
  offset += vertexCount * 4;
  const triangles = u32Slice(bytes, offset, triangleCount * 3);
  offset += triangleCount * 12;
  const densities = hasDensities ? f32Slice(bytes, offset, vertexCount) : null;

  for (let i = 0; i < triangles.length; i++) {
    if (triangles[i] >= vertexCount) {
      throw new ProtocolError(`triangle index ${triangles[i]} out of range for ${vertexCount} vertices`);
    }
  }
  return { version, flags, vertexCount, triangleCount, positions, colors, triangles, densities };
}
