// Client-side mirrors of the server's prescribing gates. The server stays
// authoritative; these only decide what the console enables.

import type { Alert, Prescription, UserType } from "./types.js";

export function blockingAlerts(alerts: Alert[]): Alert[] {
  return alerts.filter((a) => a.severity === "Blocking");
}

export function pendingInterruptive(alerts: Alert[]): Alert[] {
  return alerts.filter((a) => a.severity === "Interruptive" && a.override === null);
}

/** True iff nothing blocks and every interruption carries an override. */
export function isTransmittable(alerts: Alert[]): boolean {
  return blockingAlerts(alerts).length === 0 && pendingInterruptive(alerts).length === 0;
}

/** The transmit control enables only for a draft the server already marked
 * Validated — the one state it will accept a transmit for. */
export function canTransmit(rx: Prescription | null): boolean {
  return rx !== null && rx.state === "Validated" && isTransmittable(rx.alerts);
}

export function transmitBlockedReason(rx: Prescription | null): string {
  if (rx === null) return "Run the safety check first.";
  if (rx.state === "Transmitted" || rx.state === "Dispensed") return "Already transmitted.";
  const blocking = blockingAlerts(rx.alerts);
  if (blocking.length > 0) return blocking[0].message;
  const pending = pendingInterruptive(rx.alerts);
  if (pending.length > 0) {
    return `${pending.length} alert(s) need an override reason before transmission.`;
  }
  return rx.state === "Validated" ? "" : `Prescription is ${rx.state}.`;
}

export function routeForRole(role: UserType): "physician" | "pharmacy" {
  return role === "Pharmacist" ? "pharmacy" : "physician";
}
