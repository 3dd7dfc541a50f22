/**
 * Grab/translate/rotate manipulation.
 *
 * The viewer has no hand tracking; the pointer ray at a fixed interaction
 * depth stands in for the hand position and an arcball quaternion for the
 * hand orientation. The update rules below are applied verbatim to the
 * substituted samples.
 */

import { Quat, Vec3, qconj, qmul, qnormalize, vadd, vsub } from "./math";

export const DEFAULT_GRAB_RADIUS = 0.1; // meters

export interface Pose {
  position: Vec3;
  orientation: Quat; // unit
}

export interface HandSample {
  position: Vec3;
  orientation: Quat; // unit
  grabbing: boolean;
}

export interface GrabState {
  active: boolean;
  handStart: HandSample;
  objectStart: Pose;
}

/** Axis-aligned bounds; a point when min equals max. */
export interface Bounds {
  min: Vec3;
  max: Vec3;
}

/**
 * True when the hand is within grabRadius of the closest point of the
 * bounds (closed comparison: exactly at the radius still grabs).
 */
export function grabTest(bounds: Bounds, handPosition: Vec3, grabRadius = DEFAULT_GRAB_RADIUS): boolean {
  let d2 = 0;
  for (let i = 0; i < 3; i++) {
    const lo = bounds.min[i];
    const hi = bounds.max[i];
    const p = handPosition[i];
    const nearest = p < lo ? lo : p > hi ? hi : p;
    d2 += (p - nearest) * (p - nearest);
  }
  return Math.sqrt(d2) <= grabRadius;
}

/** New object position: start position plus the hand's movement since grab. */
export function applyTranslation(state: GrabState, handCurrent: HandSample): Vec3 {
  return vadd(state.objectStart.position, vsub(handCurrent.position, state.handStart.position));
}

/**
 * New object orientation: the hand's rotation since grab composed onto the
 * start orientation, Q_hand_current * Q_hand_start^-1 * Q_object_start,
 * renormalized. An unmoved hand leaves the orientation unchanged.
 */
export function applyRotation(state: GrabState, handCurrent: HandSample): Quat {
  const delta = qmul(handCurrent.orientation, qconj(state.handStart.orientation));
  return qnormalize(qmul(delta, state.objectStart.orientation));
}

export function beginGrab(hand: HandSample, object: Pose): GrabState {
  return {
    active: true,
    handStart: { ...hand, grabbing: true },
    objectStart: { position: [...object.position], orientation: [...object.orientation] },
  };
}
