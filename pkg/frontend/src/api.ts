import type {
  AnnotationRecord,
  ExportPayload,
  NextResponse,
  PredictionReport,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the service's JSON API. */
export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(readonly base: string, fetchFn?: FetchLike) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `network failure: ${String(err)}`);
    }
    const text = await resp.text();
    if (!resp.ok) {
      let detail = text;
      try {
        const body = JSON.parse(text);
        if (typeof body.detail === "string") detail = body.detail;
      } catch {
        /* plain-text error body */
      }
      throw new ApiError(resp.status, detail);
    }
    return JSON.parse(text) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  predict(
    tokens: string[],
    compoundIndex: number,
    heatmapLayer: number | null = null,
    heatmapHead = 0,
  ): Promise<PredictionReport> {
    return this.post("/predict", {
      tokens,
      compound_index: compoundIndex,
      heatmap_layer: heatmapLayer,
      heatmap_head: heatmapHead,
    });
  }

  next(annotator: string): Promise<NextResponse> {
    return this.request(`/annotation/next?annotator=${encodeURIComponent(annotator)}`);
  }

  submit(
    uid: string,
    body: { annotator_id: string; choice: string; comment?: string; idempotency_key?: string },
  ): Promise<AnnotationRecord> {
    return this.post(`/annotation/${encodeURIComponent(uid)}`, body);
  }

  exportAnnotations(): Promise<ExportPayload> {
    return this.request("/annotation/export");
  }

  labels(): Promise<string[]> {
    return this.request<{ labels: string[] }>("/admin/labels").then((b) => b.labels);
  }

  setLabels(labels: string[]): Promise<string[]> {
    return this.post<{ labels: string[] }>("/admin/labels", { labels }).then((b) => b.labels);
  }
}
