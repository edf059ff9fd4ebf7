import {
  ApiError,
  Associations,
  MessageBody,
  PinKind,
  PreferenceSpace,
  StateView,
  TranscriptEntry,
  TurnResultView,
} from "./types";

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, {
    headers: init?.body ? { "content-type": "application/json" } : undefined,
    ...init,
  });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class CouncilApi {
  constructor(public base: string) {}

  async createSession(): Promise<string> {
    const body = await request<{ session_id: string }>(this.base, "/sessions", {
      method: "POST",
    });
    return body.session_id;
  }

  getState(sessionId: string): Promise<StateView> {
    return request(this.base, `/sessions/${sessionId}`);
  }

  sendMessage(sessionId: string, body: MessageBody): Promise<TurnResultView> {
    return request(this.base, `/sessions/${sessionId}/messages`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  async getTranscript(sessionId: string, audit = false): Promise<TranscriptEntry[]> {
    const body = await request<{ transcript: TranscriptEntry[] }>(
      this.base,
      `/sessions/${sessionId}/transcript${audit ? "?audit=true" : ""}`,
    );
    return body.transcript;
  }

  pin(sessionId: string, kind: PinKind, key: string): Promise<{ preference_space: PreferenceSpace }> {
    return request(this.base, `/sessions/${sessionId}/pins`, {
      method: "POST",
      body: JSON.stringify({ kind, key }),
    });
  }

  unpin(sessionId: string, kind: PinKind, key: string): Promise<{ preference_space: PreferenceSpace }> {
    return request(
      this.base,
      `/sessions/${sessionId}/pins/${kind}/${encodeURIComponent(key)}`,
      { method: "DELETE" },
    );
  }

  setVisibility(sessionId: string, key: string, hidden: boolean): Promise<unknown> {
    return request(this.base, `/sessions/${sessionId}/visibility`, {
      method: "POST",
      body: JSON.stringify({ key, hidden }),
    });
  }

  associations(sessionId: string, key: string): Promise<Associations> {
    return request(this.base, `/sessions/${sessionId}/associations/${encodeURIComponent(key)}`);
  }
}
