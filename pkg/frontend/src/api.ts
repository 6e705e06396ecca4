/** Thin typed client over the service endpoints.
 *
 * The client never computes assessment numbers itself; every value shown in
 * the UI comes straight out of one of these responses. Report downloads pass
 * the body through untouched so the saved bytes equal the API's.
 */

import type { ReportFormat, SessionEnvelope, Taxonomy } from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private baseUrl = '',
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let code = `http-${response.status}`;
      let detail = response.statusText;
      try {
        const body = await response.json();
        code = body.error ?? code;
        detail = body.detail ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, detail);
    }
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  createAssessment(title: string, description: string): Promise<SessionEnvelope> {
    return this.json('/assessments', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ title, description }),
    });
  }

  getAssessment(sessionId: string): Promise<SessionEnvelope> {
    return this.json(`/assessments/${sessionId}`);
  }

  submitAnswers(
    sessionId: string,
    answers: Record<string, string | string[]>,
  ): Promise<SessionEnvelope> {
    return this.json(`/assessments/${sessionId}/answers`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ answers }),
    });
  }

  runAssessment(sessionId: string, force = false): Promise<SessionEnvelope> {
    const query = force ? '?force=true' : '';
    return this.json(`/assessments/${sessionId}/run${query}`, { method: 'POST' });
  }

  getTaxonomy(): Promise<Taxonomy> {
    return this.json('/taxonomy');
  }

  /** Raw report body, byte-for-byte as the API returned it. */
  async downloadReport(sessionId: string, format: ReportFormat): Promise<string> {
    const response = await this.request(
      `/assessments/${sessionId}/report?format=${format}`,
    );
    return response.text();
  }
}

/** Poll the session until it leaves the running state. */
export async function pollUntilSettled(
  client: ApiClient,
  sessionId: string,
  options: { intervalMs?: number; maxAttempts?: number; onTick?: (e: SessionEnvelope) => void } = {},
): Promise<SessionEnvelope> {
  const intervalMs = options.intervalMs ?? 1000;
  const maxAttempts = options.maxAttempts ?? 600;
  for (let attempt = 0; attempt < maxAttempts; attempt += 1) {
    const envelope = await client.getAssessment(sessionId);
    options.onTick?.(envelope);
    if (envelope.session.state !== 'running') {
      return envelope;
    }
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
  throw new Error('assessment did not settle in time');
}
