import {
  ApiError,
  BiclusterInfo,
  DocumentsResponse,
  FullPathResponse,
  SchemaResponse,
  SessionInfo,
  StepwiseResponse,
} from "./types.js";

/** The slice of the session API the view consumes. */
export interface ApiClient {
  createSession(body: Record<string, unknown>): Promise<SessionInfo>;
  session(id: string): Promise<SessionInfo>;
  schema(id: string): Promise<SchemaResponse>;
  biclusters(id: string): Promise<BiclusterInfo[]>;
  fullPath(id: string, seed: string): Promise<FullPathResponse>;
  stepwise(id: string, seed: string): Promise<StepwiseResponse>;
  markKnown(id: string, patterns: string[]): Promise<SessionInfo>;
  documents(id: string, bicluster: string): Promise<DocumentsResponse>;
}

const POLL_MS = 400;

export class HttpApiClient implements ApiClient {
  constructor(private readonly base: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await res.json();
    if (!res.ok) {
      throw new ApiError(res.status, body.category ?? "error", body.detail ?? res.statusText);
    }
    // global-score evaluations answer 202 with a pollable task id
    if (res.status === 202 && body.task_id) {
      return this.poll<T>(path, body.task_id);
    }
    return body as T;
  }

  private async poll<T>(evaluatePath: string, taskId: string): Promise<T> {
    const sessionPath = evaluatePath.split("/evaluate/")[0];
    for (;;) {
      await new Promise((r) => setTimeout(r, POLL_MS));
      const task = await this.request<{ status: string; result: T; error: string }>(
        `${sessionPath}/tasks/${taskId}`,
      );
      if (task.status === "done") return task.result;
      if (task.status === "failed") throw new ApiError(500, "evaluation-failed", task.error);
    }
  }

  createSession(body: Record<string, unknown>) {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  session(id: string) {
    return this.request<SessionInfo>(`/sessions/${id}`);
  }

  schema(id: string) {
    return this.request<SchemaResponse>(`/sessions/${id}/schema`);
  }

  async biclusters(id: string) {
    const res = await this.request<{ biclusters: BiclusterInfo[] }>(
      `/sessions/${id}/biclusters`,
    );
    return res.biclusters;
  }

  fullPath(id: string, seed: string) {
    return this.request<FullPathResponse>(`/sessions/${id}/evaluate/full-path`, {
      method: "POST",
      body: JSON.stringify({ seed }),
    });
  }

  stepwise(id: string, seed: string) {
    return this.request<StepwiseResponse>(`/sessions/${id}/evaluate/stepwise`, {
      method: "POST",
      body: JSON.stringify({ seed }),
    });
  }

  markKnown(id: string, patterns: string[]) {
    return this.request<SessionInfo>(`/sessions/${id}/mark-known`, {
      method: "POST",
      body: JSON.stringify({ patterns }),
    });
  }

  documents(id: string, bicluster: string) {
    return this.request<DocumentsResponse>(
      `/sessions/${id}/biclusters/${bicluster}/documents`,
    );
  }
}
