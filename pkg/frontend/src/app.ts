// The console: a login screen that routes physicians to the prescribing
// workspace and pharmacists to the dispensing workspace. All state lives in
// memory; logout drops every credential and re-renders the login screen.

import { ApiClient, ApiError, bytesToBase64 } from "./api.js";
import { canTransmit, routeForRole, transmitBlockedReason } from "./gates.js";
import type {
  Alert,
  CaseSuggestion,
  DraftItemInput,
  FrequentEntry,
  HistoryEntry,
  MedicationItem,
  Patient,
  PatientSummary,
  Pharmacy,
  Prescription,
  UserInfo,
} from "./types.js";

type Attrs = Record<string, string | boolean | ((event: Event) => void)>;

function el(tag: string, attrs: Attrs = {}, children: (Node | string)[] = []): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key, value);
    } else if (typeof value === "boolean") {
      if (value) node.setAttribute(key, "");
      (node as unknown as Record<string, unknown>)[key] = value;
    } else if (key === "value") {
      (node as HTMLInputElement).value = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

function clear(node: HTMLElement): HTMLElement {
  node.textContent = "";
  return node;
}

async function fingerprintFromForm(fileInput: HTMLInputElement, b64Input: HTMLInputElement): Promise<string> {
  const file = fileInput.files && fileInput.files[0];
  if (file) {
    const buffer = await file.arrayBuffer();
    return bytesToBase64(new Uint8Array(buffer));
  }
  return b64Input.value.trim();
}

export class App {
  user: UserInfo | null = null;
  patient: Patient | null = null;
  draftItems: DraftItemInput[] = [];
  rx: Prescription | null = null;
  selectedPharmacy: string | null = null;
  pharmacies: Pharmacy[] = [];
  consultText = { nature: "", description: "" };

  constructor(private readonly root: HTMLElement, readonly client: ApiClient) {}

  start(): void {
    this.renderLogin();
  }

  logout(): void {
    this.client.clearSession();
    this.user = null;
    this.patient = null;
    this.draftItems = [];
    this.rx = null;
    this.selectedPharmacy = null;
    this.renderLogin();
  }

  private banner(target: HTMLElement, message: string, kind: "error" | "ok" = "error"): void {
    clear(target).append(el("div", { class: `banner ${kind}`, "data-testid": "banner" }, [message]));
  }

  // ------------------------------------------------------------------ login

  renderLogin(): void {
    const errorBox = el("div", { "data-testid": "login-error" });
    const userInput = el("input", { "data-testid": "login-user", placeholder: "user id" }) as HTMLInputElement;
    const passInput = el("input", {
      "data-testid": "login-password", type: "password", placeholder: "password",
    }) as HTMLInputElement;
    const fileInput = el("input", { "data-testid": "login-fp-file", type: "file" }) as HTMLInputElement;
    const b64Input = el("input", {
      "data-testid": "login-fp-b64", placeholder: "or paste template as base64",
    }) as HTMLInputElement;

    const submit = async () => {
      try {
        const fingerprint = await fingerprintFromForm(fileInput, b64Input);
        const result = await this.client.login(userInput.value.trim(), passInput.value, fingerprint);
        this.user = result.user;
        if (routeForRole(result.user.user_type) === "pharmacy") {
          await this.renderPharmacy();
        } else {
          await this.renderPhysician();
        }
      } catch (err) {
        // single generic failure: never says which factor missed
        const message = err instanceof ApiError && err.code === "AUTH_FAILED"
          ? "Sign-in failed. Check your credentials and fingerprint."
          : `Sign-in failed: ${err instanceof Error ? err.message : String(err)}`;
        this.banner(errorBox, message);
      }
    };

    clear(this.root).append(
      el("div", { class: "login card", "data-testid": "login-view" }, [
        el("h1", {}, ["rxledger console"]),
        errorBox,
        el("label", {}, ["User ID", userInput]),
        el("label", {}, ["Password", passInput]),
        el("label", {}, ["Fingerprint template", fileInput, b64Input]),
        el("button", { "data-testid": "login-submit", click: () => void submit() }, ["Sign in"]),
      ]),
    );
  }

  private header(title: string): HTMLElement {
    return el("header", {}, [
      el("strong", {}, [title]),
      el("span", { "data-testid": "whoami" }, [
        `${this.user?.fullname ?? ""} (${this.user?.user_type ?? ""})`,
      ]),
      el("button", { "data-testid": "logout", click: () => this.logout() }, ["Log out"]),
    ]);
  }

  // ------------------------------------------------- physician workspace

  async renderPhysician(): Promise<void> {
    this.pharmacies = await this.client.listPharmacies();
    const search = el("input", {
      "data-testid": "patient-search",
      placeholder: "search patients by name",
      input: (event) => void this.onSearch((event.target as HTMLInputElement).value),
    });
    clear(this.root).append(
      el("div", { class: "physician", "data-testid": "physician-view" }, [
        this.header("Prescribing console"),
        el("div", { class: "columns" }, [
          el("section", { class: "card" }, [
            el("h2", {}, ["Patient"]),
            search,
            el("ul", { "data-testid": "search-results" }),
            el("div", { "data-testid": "patient-card" }),
            el("div", { "data-testid": "consult-panel" }),
            el("div", { "data-testid": "history-panel" }),
          ]),
          el("section", { class: "card" }, [
            el("h2", {}, ["Suggestions"]),
            el("div", { "data-testid": "suggestion-panels" }),
            el("h2", {}, ["Draft"]),
            el("div", { "data-testid": "draft-panel" }),
            el("div", { "data-testid": "alert-panel" }),
            el("div", { "data-testid": "transmit-panel" }),
            el("div", { "data-testid": "print-panel" }),
          ]),
        ]),
        el("div", { "data-testid": "modal-host" }),
      ]),
    );
    this.updateDraftPanel();
  }

  private q(testId: string): HTMLElement {
    const node = this.root.querySelector(`[data-testid="${testId}"]`);
    if (!node) throw new Error(`missing panel ${testId}`);
    return node as HTMLElement;
  }

  private liveResultsList(fallback: HTMLElement): HTMLElement {
    const current = this.root.querySelector('[data-testid="cbr-results"]');
    const target = (current as HTMLElement) ?? fallback;
    clear(target);
    return target;
  }

  private async onSearch(prefix: string): Promise<void> {
    const list = clear(this.q("search-results"));
    if (!prefix) return;
    // autocomplete fires from the first typed character
    const matches = await this.client.searchPatients(prefix);
    for (const match of matches) {
      list.append(el("li", {}, [
        el("button", {
          "data-testid": `patient-option-${match.pat_id}`,
          click: () => void this.selectPatient(match),
        }, [match.fullname]),
      ]));
    }
  }

  async selectPatient(summary: PatientSummary): Promise<void> {
    this.patient = await this.client.getPatient(summary.pat_id);
    this.draftItems = [];
    this.rx = null;
    this.selectedPharmacy = this.patient.default_pharmacy;
    this.updatePatientCard();
    this.updateConsultPanel();
    await this.updateHistory();
    await this.updateSuggestions();
    this.updateDraftPanel();
    clear(this.q("print-panel"));
  }

  private updatePatientCard(): void {
    const patient = this.patient;
    if (!patient) return;
    clear(this.q("patient-card")).append(
      el("div", { class: "bio" }, [
        el("h3", { "data-testid": "patient-name" }, [patient.fullname]),
        el("p", {}, [`ID ${patient.pat_id} · born ${patient.dob} · ${patient.occupation}`]),
        el("p", {}, [`Address: ${patient.address} · Phone: ${patient.phone}`]),
        el("p", { "data-testid": "patient-allergies" }, [
          patient.drug_allergy.length
            ? `Allergies: ${patient.drug_allergy.join(", ")}`
            : "No recorded allergies",
        ]),
      ]),
    );
  }

  private updateConsultPanel(): void {
    const patient = this.patient;
    if (!patient) return;
    const nature = el("input", {
      "data-testid": "consult-nature", placeholder: "nature of disease/infection",
      input: (e) => { this.consultText.nature = (e.target as HTMLInputElement).value; },
    });
    const description = el("textarea", {
      "data-testid": "consult-description", placeholder: "description",
      input: (e) => { this.consultText.description = (e.target as HTMLTextAreaElement).value; },
    });
    const status = el("span", { "data-testid": "consult-status" });
    clear(this.q("consult-panel")).append(
      el("h3", {}, ["Consultation"]),
      nature, description,
      el("button", {
        "data-testid": "consult-submit",
        click: () => void (async () => {
          await this.client.recordConsultation(
            patient.pat_id, this.consultText.nature, this.consultText.description);
          status.textContent = "Recorded to medical history.";
          await this.updateHistory();
          await this.updateSuggestions();
        })(),
      }, ["Record consultation"]),
      status,
    );
  }

  private async updateHistory(): Promise<void> {
    const patient = this.patient;
    if (!patient) return;
    const entries = await this.client.getHistory(patient.pat_id);
    if (this.patient?.pat_id !== patient.pat_id) return;
    const list = el("ul", {}, entries.map((entry: HistoryEntry) => el("li", {}, [
      entry.kind === "consultation"
        ? `${entry.at}: consult — ${entry.note?.nature ?? ""}`
        : `${entry.at}: medication — ${entry.item?.med_name ?? ""} ${entry.item?.dosage ?? ""}`,
    ])));
    clear(this.q("history-panel")).append(el("h3", {}, ["History"]), list);
  }

  private suggestionsEpoch = 0;

  private async updateSuggestions(): Promise<void> {
    const patient = this.patient;
    if (!patient) return;
    // fetch first, render last: a rebuild that lost the race must not
    // overwrite a newer panel
    const epoch = ++this.suggestionsEpoch;
    const [patterns, frequent] = await Promise.all([
      this.client.getPatterns(patient.pat_id),
      this.client.frequent(8),
    ]);
    if (epoch !== this.suggestionsEpoch) return;
    // a rebuild must not discard what the user typed or already retrieved:
    // the query box value and the results node carry over
    const previousQuery = (this.root.querySelector('[data-testid="cbr-query"]') as
      HTMLInputElement | null)?.value;
    const previousResults = this.root.querySelector('[data-testid="cbr-results"]') as
      HTMLElement | null;
    const container = clear(this.q("suggestion-panels"));

    container.append(el("h3", {}, ["Patient patterns"]));
    const patternList = el("ul", { "data-testid": "patterns-list" });
    for (const item of patterns) {
      patternList.append(el("li", {}, [
        `${item.med_name} — ${item.dosage}, ${item.freq}, ${item.route} `,
        el("button", { click: () => this.addItem(itemToInput(item)) }, ["Re-prescribe"]),
      ]));
    }
    container.append(patternList);

    container.append(el("h3", {}, ["Frequently prescribed"]));
    const frequentList = el("ul", { "data-testid": "frequent-list" });
    for (const entry of frequent) {
      frequentList.append(el("li", {}, [
        `${entry.med_name} ×${entry.count} — ${entry.dosage}, ${entry.freq} `,
        el("button", { click: () => this.addItem(frequentToInput(entry)) }, ["Use"]),
      ]));
    }
    container.append(frequentList);

    container.append(el("h3", {}, ["Similar past cases"]));
    const queryBox = el("input", {
      "data-testid": "cbr-query",
      placeholder: "diagnosis terms",
      value: previousQuery || `${this.consultText.nature} ${this.consultText.description}`.trim(),
    }) as HTMLInputElement;
    const results = previousResults ?? el("ul", { "data-testid": "cbr-results" });
    container.append(
      queryBox,
      el("button", {
        "data-testid": "cbr-search",
        click: () => void (async () => {
          const query = queryBox.value;
          let suggestions: CaseSuggestion[];
          try {
            suggestions = (await this.client.retrieveSuggestions(patient.pat_id, query)).results;
          } catch (err) {
            const target = this.liveResultsList(results);
            target.append(el("li", { class: "banner error", "data-testid": "cbr-error" },
              [err instanceof Error ? err.message : String(err)]));
            return;
          }
          // re-resolve the list: a concurrent panel rebuild may have replaced it
          const target = this.liveResultsList(results);
          suggestions.forEach((suggestion: CaseSuggestion, index: number) => {
            target.append(el("li", {}, [
              `${suggestion.draft.med_name} (score ${suggestion.score.toFixed(2)}) — `
              + `${suggestion.draft.dosage}, ${suggestion.draft.freq} `,
              el("button", {
                "data-testid": `cbr-accept-${index}`,
                click: () => this.addItem(itemToInput(suggestion.draft)),
              }, ["Accept"]),
            ]));
          });
          if (!suggestions.length) target.append(el("li", {}, ["No similar cases."]));
        })(),
      }, ["Suggest from past cases"]),
      results,
    );
  }

  addItem(item: DraftItemInput): void {
    this.draftItems.push(item);
    this.rx = null; // edits invalidate any previous safety check
    this.updateDraftPanel();
  }

  private updateDraftPanel(): void {
    const panel = clear(this.q("draft-panel"));
    if (!this.patient) {
      panel.append(el("p", {}, ["Select a patient to begin."]));
      this.updateRxPanels();
      return;
    }
    this.draftItems.forEach((item, index) => {
      const bind = (field: keyof DraftItemInput, input: HTMLInputElement) => {
        input.addEventListener("input", () => {
          if (field === "num") {
            item.num = input.value === "" ? null : Number(input.value);
          } else if (field === "refill") {
            item.refill = Number(input.value || 0);
          } else if (field === "substitute") {
            item.substitute = input.checked;
          } else {
            (item as unknown as Record<string, string>)[field] = input.value;
          }
          this.rx = null;
          this.updateRxPanels();
        });
        return input;
      };
      const row = el("div", { class: "item-row", "data-testid": `draft-item-${index}` }, [
        el("strong", {}, [item.med_name || item.drug_id]),
        el("button", {
          "data-testid": `drug-info-${index}`,
          click: () => void this.showDrugInfo(item.drug_id),
        }, ["info"]),
        bind("dosage", el("input", { "data-testid": `item-dosage-${index}`, placeholder: "dosage", value: item.dosage }) as HTMLInputElement),
        bind("freq", el("input", { "data-testid": `item-freq-${index}`, placeholder: "freq", value: item.freq }) as HTMLInputElement),
        bind("route", el("input", { "data-testid": `item-route-${index}`, placeholder: "route", value: item.route }) as HTMLInputElement),
        bind("num", el("input", { "data-testid": `item-num-${index}`, placeholder: "quantity", value: item.num === null ? "" : String(item.num) }) as HTMLInputElement),
        bind("refill", el("input", { placeholder: "refills", value: String(item.refill) }) as HTMLInputElement),
        bind("sig", el("input", { "data-testid": `item-sig-${index}`, placeholder: "sig", value: item.sig }) as HTMLInputElement),
        el("button", {
          click: () => { this.draftItems.splice(index, 1); this.rx = null; this.updateDraftPanel(); },
        }, ["remove"]),
      ]);
      panel.append(row);
    });
    const manualId = el("input", { "data-testid": "manual-drug-id", placeholder: "drug id" }) as HTMLInputElement;
    panel.append(
      el("div", {}, [
        manualId,
        el("button", {
          "data-testid": "manual-add",
          click: () => void (async () => {
            if (!manualId.value.trim()) return;
            const drug = await this.client.getDrug(manualId.value.trim());
            this.addItem({
              drug_id: drug.drug_id, med_name: drug.name, num: null, refill: 0,
              substitute: false, dosage: "", freq: "", route: "", sig: "", note: "",
            });
          })(),
        }, ["Add by drug id"]),
      ]),
      el("button", {
        "data-testid": "run-safety-check",
        disabled: this.draftItems.length === 0,
        click: () => void this.runSafetyCheck(),
      }, ["Run safety check"]),
    );
    this.updateRxPanels();
  }

  private async showDrugInfo(drugId: string): Promise<void> {
    const drug = await this.client.getDrug(drugId);
    const host = clear(this.q("modal-host"));
    host.append(el("div", { class: "modal", "data-testid": "drug-info-modal" }, [
      el("h3", {}, [drug.name]),
      el("p", {}, [`Class: ${drug.pharmacological_class ?? "-"}`]),
      el("p", {}, [`Usage: ${drug.adult_usage ?? "-"} / children: ${drug.children_usage || "none on file"}`]),
      el("p", {}, [`Contraindications: ${drug.contraindications ?? "-"}`]),
      el("p", {}, [`Precautions: ${drug.precautions ?? "-"}`]),
      el("p", {}, [`Adverse reactions: ${drug.adverse_reactions ?? "-"}`]),
      el("button", { "data-testid": "modal-close", click: () => clear(host) }, ["Close"]),
    ]));
  }

  async runSafetyCheck(): Promise<void> {
    if (!this.patient) return;
    try {
      this.rx = await this.client.createDraft(this.patient.pat_id, this.draftItems);
    } catch (err) {
      this.rx = null;
      this.banner(this.q("alert-panel"),
        err instanceof ApiError ? `${err.code}: ${err.message}` : String(err));
      return;
    }
    this.updateRxPanels();
  }

  private updateRxPanels(): void {
    this.updateAlertPanel();
    this.updateTransmitPanel();
  }

  private updateAlertPanel(): void {
    const panel = clear(this.q("alert-panel"));
    if (!this.rx) return;
    panel.append(el("p", { "data-testid": "rx-state" }, [`Prescription ${this.rx.rx_id}: ${this.rx.state}`]));
    const list = el("ul", { "data-testid": "alert-list" });
    for (const alert of this.rx.alerts) {
      list.append(this.alertRow(alert));
    }
    if (!this.rx.alerts.length) list.append(el("li", {}, ["No alerts — clean draft."]));
    panel.append(list);
  }

  private alertRow(alert: Alert): HTMLElement {
    const row = el("li", { class: `alert ${alert.severity.toLowerCase()}`, "data-testid": `alert-${alert.alert_id}` }, [
      el("span", { class: "chip" }, [alert.severity]),
      ` ${alert.rule_id}: ${alert.message} `,
    ]);
    if (alert.override) {
      row.append(el("em", {}, [`overridden: ${alert.override.reason}`]));
    } else if (alert.severity === "Interruptive") {
      row.append(el("button", {
        "data-testid": `override-open-${alert.alert_id}`,
        click: () => this.openOverrideModal(alert),
      }, ["Override"]));
    }
    return row;
  }

  private openOverrideModal(alert: Alert): void {
    const host = clear(this.q("modal-host"));
    const reason = el("textarea", { "data-testid": "override-reason", placeholder: "reason for override" }) as HTMLTextAreaElement;
    const errorBox = el("div", {});
    host.append(el("div", { class: "modal", "data-testid": "override-modal" }, [
      el("h3", {}, ["Override alert"]),
      el("p", {}, [alert.message]),
      reason,
      errorBox,
      el("button", {
        "data-testid": "override-confirm",
        click: () => void (async () => {
          if (!this.rx) return;
          try {
            const result = await this.client.overrideAlert(this.rx.rx_id, alert.alert_id, reason.value);
            this.rx = result.prescription;
            clear(host);
            this.updateRxPanels();
          } catch (err) {
            this.banner(errorBox, err instanceof ApiError ? `${err.code}: ${err.message}` : String(err));
          }
        })(),
      }, ["Confirm override"]),
      el("button", { click: () => clear(host) }, ["Cancel"]),
    ]));
  }

  private updateTransmitPanel(): void {
    const panel = clear(this.q("transmit-panel"));
    if (!this.patient) return;
    const select = el("select", { "data-testid": "pharmacy-select" }) as HTMLSelectElement;
    for (const pharmacy of this.pharmacies) {
      const option = el("option", { value: pharmacy.pharm_id }, [pharmacy.name]) as HTMLOptionElement;
      if (pharmacy.pharm_id === this.selectedPharmacy) option.selected = true;
      select.append(option);
    }
    select.addEventListener("change", () => { this.selectedPharmacy = select.value; });
    if (!this.selectedPharmacy && this.pharmacies.length) {
      this.selectedPharmacy = this.pharmacies[0].pharm_id;
    }

    const allowed = canTransmit(this.rx);
    const reason = transmitBlockedReason(this.rx);
    panel.append(
      el("h3", {}, ["Pharmacy & transmission"]),
      el("p", {}, [this.patient.default_pharmacy
        ? `Default pharmacy: ${this.patient.default_pharmacy}`
        : "No default pharmacy yet — this choice becomes the default."]),
      select,
      el("button", {
        "data-testid": "transmit",
        disabled: !allowed,
        click: () => { if (allowed) void this.transmit(); },
      }, ["Sign & transmit"]),
      el("span", { "data-testid": "transmit-blocked-reason" }, [allowed ? "" : reason]),
    );
  }

  async transmit(): Promise<void> {
    // the gate re-checks right before the request: the console never sends a
    // transmit the server would refuse
    if (!this.rx || !canTransmit(this.rx)) return;
    const sent = await this.client.transmit(this.rx.rx_id, this.selectedPharmacy);
    this.rx = sent;
    this.updateAlertPanel();
    this.updateTransmitPanelAfterSend(sent);
    const doc = await this.client.printable(sent.rx_id);
    clear(this.q("print-panel")).append(
      el("h3", {}, ["Print preview"]),
      el("pre", { "data-testid": "print-preview" }, [doc.text]),
    );
  }

  private updateTransmitPanelAfterSend(rx: Prescription): void {
    clear(this.q("transmit-panel")).append(
      el("p", { "data-testid": "transmit-result" }, [
        `Transmitted to ${rx.pharmacy} — prescriber ${rx.prescriber_no}`,
      ]),
    );
  }

  // ------------------------------------------------- pharmacy workspace

  async renderPharmacy(): Promise<void> {
    clear(this.root).append(
      el("div", { class: "pharmacy", "data-testid": "pharmacy-view" }, [
        this.header("Dispensing console"),
        el("div", { "data-testid": "reject-banner-host" }),
        el("section", { class: "card" }, [
          el("h2", {}, ["Inbox"]),
          el("div", { "data-testid": "inbox-panel" }),
        ]),
        el("section", { class: "card" }, [
          el("h2", {}, ["Patient fingerprint lookup"]),
          el("div", { "data-testid": "lookup-panel" }),
        ]),
      ]),
    );
    this.renderLookupPanel();
    await this.refreshInbox();
  }

  async refreshInbox(): Promise<void> {
    const pharmId = this.user?.pharmacy_id;
    const panel = clear(this.q("inbox-panel"));
    if (!pharmId) {
      panel.append(el("p", {}, ["No pharmacy bound to this account."]));
      return;
    }
    const prescriptions = await this.client.inbox(pharmId);
    if (!prescriptions.length) {
      panel.append(el("p", { "data-testid": "inbox-empty" }, ["Inbox is empty."]));
      return;
    }
    for (const rx of prescriptions) {
      panel.append(await this.inboxRow(rx));
    }
  }

  private async inboxRow(rx: Prescription): Promise<HTMLElement> {
    // each row re-verifies the prescriber number before dispense enables
    const verdict = rx.prescriber_no
      ? (await this.client.verifyPrescriber(rx.prescriber_no)).result
      : "Unknown";
    const badge = el("span", {
      class: `badge ${verdict.toLowerCase()}`,
      "data-testid": `verify-badge-${rx.rx_id}`,
    }, [verdict]);
    const meds = rx.items.map((i: MedicationItem) => i.med_name).join(", ");
    return el("div", { class: "inbox-row", "data-testid": `inbox-row-${rx.rx_id}` }, [
      el("strong", {}, [rx.rx_id]),
      ` ${rx.items[0]?.pat_name ?? ""} — ${meds} · prescriber ${rx.prescriber_no ?? "?"} `,
      badge,
      el("button", {
        "data-testid": `dispense-${rx.rx_id}`,
        disabled: verdict !== "Valid",
        click: () => void this.dispense(rx.rx_id),
      }, ["Dispense"]),
    ]);
  }

  async dispense(rxId: string): Promise<void> {
    const host = clear(this.q("reject-banner-host"));
    try {
      await this.client.dispense(rxId);
    } catch (err) {
      if (err instanceof ApiError && err.code === "PRESCRIBER_VERIFICATION_FAILED") {
        this.banner(host, `Prescription ${rxId} rejected: ${err.message}`);
      } else {
        this.banner(host, err instanceof Error ? err.message : String(err));
      }
    }
    await this.refreshInbox();
  }

  private renderLookupPanel(): void {
    const panel = clear(this.q("lookup-panel"));
    const fileInput = el("input", { "data-testid": "lookup-fp-file", type: "file" }) as HTMLInputElement;
    const b64Input = el("input", { "data-testid": "lookup-fp-b64", placeholder: "or paste template as base64" }) as HTMLInputElement;
    const results = el("div", { "data-testid": "lookup-results" });
    panel.append(
      fileInput, b64Input,
      el("button", {
        "data-testid": "lookup-submit",
        click: () => void (async () => {
          clear(results);
          try {
            const scan = await fingerprintFromForm(fileInput, b64Input);
            const prescriptions = await this.client.lookupByFingerprint(scan);
            for (const rx of prescriptions) {
              results.append(await this.inboxRow(rx));
            }
          } catch (err) {
            if (err instanceof ApiError && err.code === "NO_MATCH") {
              results.append(el("p", { "data-testid": "lookup-no-match" }, ["No enrolled patient matches that scan."]));
            } else if (err instanceof ApiError && err.code === "AMBIGUOUS_MATCH") {
              results.append(el("p", {}, ["Scan matches more than one patient; use the inbox instead."]));
            } else {
              results.append(el("p", {}, [err instanceof Error ? err.message : String(err)]));
            }
          }
        })(),
      }, ["Find active prescriptions"]),
      results,
    );
  }
}

function itemToInput(item: MedicationItem): DraftItemInput {
  return {
    drug_id: item.drug_id,
    med_name: item.med_name,
    num: item.num,
    refill: item.refill,
    substitute: item.substitute,
    dosage: item.dosage,
    freq: item.freq,
    route: item.route,
    sig: item.sig,
    note: item.note,
  };
}

function frequentToInput(entry: FrequentEntry): DraftItemInput {
  return {
    drug_id: entry.drug_id,
    med_name: entry.med_name,
    num: entry.num,
    refill: entry.refill,
    substitute: entry.substitute,
    dosage: entry.dosage,
    freq: entry.freq,
    route: entry.route,
    sig: entry.sig,
    note: "",
  };
}
