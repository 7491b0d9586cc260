// Wire types for the rxledger HTTP API.

export type UserType = "Administrator" | "Physician" | "Pharmacist";
export type RxStateName = "Draft" | "Validated" | "Transmitted" | "Dispensed" | "Rejected";
export type SeverityName = "Blocking" | "Interruptive" | "Informational";

export interface SessionInfo {
  token: string;
  user_id: string;
  role: UserType;
  issued_at: string;
  expires_at: string;
}

export interface UserInfo {
  user_id: string;
  fullname: string;
  user_type: UserType;
  phone_no: string;
  prescriber_no: string | null;
  pharmacy_id: string | null;
  active: boolean;
}

export interface LoginResponse {
  session: SessionInfo;
  user: UserInfo;
}

export interface PatientSummary {
  pat_id: string;
  fullname: string;
}

export interface Patient {
  pat_id: string;
  registered_by: string;
  fullname: string;
  phone: string;
  dob: string;
  address: string;
  drug_allergy: string[];
  occupation: string;
  default_pharmacy: string | null;
  has_fingerprint: boolean;
}

export interface Pharmacy {
  pharm_id: string;
  name: string;
  address: string;
  phone: string;
  email: string | null;
}

export interface Drug {
  drug_id: string;
  name: string;
  legal_class: string | null;
  manufacturer: string | null;
  pharmacological_class: string | null;
  general_description: string | null;
  indications: string | null;
  adult_usage: string | null;
  children_usage: string | null;
  contraindications: string | null;
  precautions: string | null;
  interactions: string | null;
  adverse_reactions: string | null;
  how_supplied: string | null;
}

export interface ConsultationNote {
  note_id: string;
  pat_id: string;
  author: string;
  nature: string;
  description: string;
  recorded_at: string;
}

export interface MedicationItem {
  med_id: string | null;
  rx_id: string | null;
  pat_id: string;
  drug_id: string;
  pat_name: string;
  med_name: string;
  num: number | null;
  refill: number;
  substitute: boolean;
  dosage: string;
  freq: string;
  route: string;
  sig: string;
  note: string;
  start_d: string | null;
  refill_d: string | null;
  renew_d: string | null;
  date: string | null;
  pharmacist: string | null;
}

export interface AlertOverride {
  reason: string;
  user_id: string;
  at: string;
}

export interface Alert {
  alert_id: string;
  rule_id: string;
  severity: SeverityName;
  message: string;
  override: AlertOverride | null;
}

export interface Prescription {
  rx_id: string;
  pat_id: string;
  prescriber_user: string;
  prescriber_no: string | null;
  pharmacy: string | null;
  state: RxStateName;
  note_id: string;
  created_at: string;
  transmitted_at: string | null;
  dispensed_at: string | null;
  reject_reason: string | null;
  items: MedicationItem[];
  alerts: Alert[];
}

export interface HistoryEntry {
  kind: "consultation" | "medication";
  at: string;
  note?: ConsultationNote;
  item?: MedicationItem;
}

export interface CaseSuggestion {
  case: {
    case_id: string;
    diagnosis_terms: string[];
    age_band: string;
    allergy_set: string[];
    drug_id: string;
    sig_bundle: {
      dosage: string;
      freq: string;
      route: string;
      num: number;
      refill: number;
      substitute: boolean;
      sig: string;
    };
    created_at: string;
  };
  score: number;
  draft: MedicationItem;
}

export interface FrequentEntry {
  drug_id: string;
  med_name: string;
  dosage: string;
  freq: string;
  route: string;
  num: number | null;
  refill: number;
  substitute: boolean;
  sig: string;
  count: number;
}

export interface PrintableDocument {
  text: string;
  html: string;
}

export interface VerifyResponse {
  prescriber_no: string;
  result: "Valid" | "Unknown";
}

// Editable draft line before it is submitted for validation.
export interface DraftItemInput {
  drug_id: string;
  med_name?: string;
  num: number | null;
  refill: number;
  substitute: boolean;
  dosage: string;
  freq: string;
  route: string;
  sig: string;
  note: string;
}
