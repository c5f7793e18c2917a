// Thin fetch client for the session API.  Error bodies carry a `detail`
// message; a 409 means the clicked option went stale and the caller
// should refresh.

import type { SessionState } from "./types";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const text = await response.text();
  if (!response.ok) {
    let detail = text;
    try {
      detail = JSON.parse(text).detail ?? text;
    } catch {
      /* plain-text error */
    }
    throw new ApiError(response.status, detail);
  }
  return JSON.parse(text) as T;
}

export class SessionApi {
  constructor(private base = "") {}

  async create(pipelineSource: string): Promise<{ id: string; state: SessionState }> {
    const doc = await request<{ session_id: string; state: SessionState }>(
      `${this.base}/sessions`,
      { method: "POST", body: JSON.stringify({ pipeline_source: pipelineSource }) },
    );
    return { id: doc.session_id, state: doc.state };
  }

  get(id: string): Promise<SessionState> {
    return request(`${this.base}/sessions/${id}`);
  }

  choose(id: string, optionId: string): Promise<SessionState> {
    return request(`${this.base}/sessions/${id}/choose`, {
      method: "POST",
      body: JSON.stringify({ option_id: optionId }),
    });
  }

  tile(id: string, rangeX: number, rangeY: number): Promise<SessionState> {
    return request(`${this.base}/sessions/${id}/tile`, {
      method: "POST",
      body: JSON.stringify({ range_x: rangeX, range_y: rangeY }),
    });
  }

  undo(id: string): Promise<SessionState> {
    return request(`${this.base}/sessions/${id}/undo`, { method: "POST" });
  }
}
