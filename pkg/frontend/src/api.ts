// Typed client for the rxledger HTTP API. Session token lives in memory
// only; nothing is ever written to browser storage.

import type {
  CaseSuggestion,
  DraftItemInput,
  Drug,
  FrequentEntry,
  HistoryEntry,
  LoginResponse,
  MedicationItem,
  Patient,
  PatientSummary,
  Pharmacy,
  Prescription,
  PrintableDocument,
  VerifyResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
    public readonly details?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  token: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  clearSession(): void {
    this.token = null;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["X-Session-Token"] = this.token;
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError("NETWORK", `server unreachable: ${String(err)}`, 0);
    }
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      // non-JSON body; fall through with null payload
    }
    if (!response.ok) {
      const err = (payload ?? {}) as { code?: string; message?: string; details?: unknown };
      throw new ApiError(
        err.code ?? "INTERNAL",
        err.message ?? `request failed with ${response.status}`,
        response.status,
        err.details,
      );
    }
    return payload as T;
  }

  // --- auth ---

  async login(userId: string, password: string, fingerprintB64: string): Promise<LoginResponse> {
    const result = await this.request<LoginResponse>("POST", "/auth/login", {
      user_id: userId,
      password,
      fingerprint_b64: fingerprintB64,
    });
    this.token = result.session.token;
    return result;
  }

  // --- patients ---

  searchPatients(prefix: string): Promise<PatientSummary[]> {
    return this.request("GET", `/patients?prefix=${encodeURIComponent(prefix)}`);
  }

  getPatient(patId: string): Promise<Patient> {
    return this.request("GET", `/patients/${encodeURIComponent(patId)}`);
  }

  recordConsultation(patId: string, nature: string, description: string) {
    return this.request<{ note_id: string }>(
      "POST", `/patients/${encodeURIComponent(patId)}/consultations`, { nature, description });
  }

  getHistory(patId: string): Promise<HistoryEntry[]> {
    return this.request("GET", `/patients/${encodeURIComponent(patId)}/history`);
  }

  getPatterns(patId: string): Promise<MedicationItem[]> {
    return this.request("GET", `/patients/${encodeURIComponent(patId)}/patterns`);
  }

  // --- knowledge / suggestions ---

  getDrug(drugId: string): Promise<Drug> {
    return this.request("GET", `/drugs/${encodeURIComponent(drugId)}`);
  }

  listPharmacies(): Promise<Pharmacy[]> {
    return this.request("GET", "/pharmacies");
  }

  retrieveSuggestions(patId: string, text: string): Promise<{ results: CaseSuggestion[] }> {
    return this.request("POST", "/cbr/retrieve", { pat_id: patId, text });
  }

  frequent(limit = 10): Promise<FrequentEntry[]> {
    return this.request("GET", `/prescriptions/frequent?limit=${limit}`);
  }

  // --- prescriptions ---

  createDraft(patId: string, items: DraftItemInput[]): Promise<Prescription> {
    const body = {
      pat_id: patId,
      items: items.map((item) => ({
        drug_id: item.drug_id,
        num: item.num,
        refill: item.refill,
        substitute: item.substitute,
        dosage: item.dosage,
        freq: item.freq,
        route: item.route,
        sig: item.sig,
        note: item.note,
      })),
    };
    return this.request("POST", "/prescriptions", body);
  }

  overrideAlert(rxId: string, alertId: string, reason: string) {
    return this.request<{ alert: unknown; prescription: Prescription }>(
      "POST", `/prescriptions/${encodeURIComponent(rxId)}/overrides`,
      { alert_id: alertId, reason });
  }

  transmit(rxId: string, pharmacyId?: string | null): Promise<Prescription> {
    return this.request("POST", `/prescriptions/${encodeURIComponent(rxId)}/transmit`,
      { pharmacy_id: pharmacyId ?? null });
  }

  printable(rxId: string): Promise<PrintableDocument> {
    return this.request("GET", `/prescriptions/${encodeURIComponent(rxId)}/print`);
  }

  // --- pharmacy ---

  inbox(pharmId: string): Promise<Prescription[]> {
    return this.request("GET", `/pharmacy/${encodeURIComponent(pharmId)}/inbox`);
  }

  lookupByFingerprint(fingerprintB64: string): Promise<Prescription[]> {
    return this.request("POST", "/pharmacy/lookup", { fingerprint_b64: fingerprintB64 });
  }

  dispense(rxId: string): Promise<Prescription> {
    return this.request("POST", `/prescriptions/${encodeURIComponent(rxId)}/dispense`);
  }

  verifyPrescriber(prescriberNo: string): Promise<VerifyResponse> {
    return this.request("GET", `/prescribers/${encodeURIComponent(prescriberNo)}/verify`);
  }
}

export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  for (const b of bytes) binary += String.fromCharCode(b);
  return btoa(binary);
}
