/** Loaders for the recorded API fixtures and a route-based fake fetch. */

import { readFileSync } from 'node:fs';

import type { FetchLike } from '../src/api.js';
import type { Report, SessionEnvelope, Taxonomy } from '../src/types.js';

export function fixtureText(name: string): string {
  return readFileSync(new URL(`./fixtures/${name}`, import.meta.url), 'utf-8');
}

export function fixtureJson<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

export const intakeReady = (): SessionEnvelope =>
  fixtureJson<SessionEnvelope>('session_intake_ready.json');
export const partial = (): SessionEnvelope =>
  fixtureJson<SessionEnvelope>('session_partial.json');
export const answered = (): SessionEnvelope =>
  fixtureJson<SessionEnvelope>('session_answered.json');
export const complete = (): SessionEnvelope =>
  fixtureJson<SessionEnvelope>('session_complete.json');
export const report = (): Report => fixtureJson<Report>('report.json');
export const taxonomy = (): Taxonomy => fixtureJson<Taxonomy>('taxonomy.json');

export interface Route {
  method?: string;
  body?: string;
  status?: number;
  contentType?: string;
  onRequest?: (init?: RequestInit) => void;
}

/** fetch double that serves canned bodies keyed by "METHOD path". */
export function fakeFetch(routes: Record<string, Route>): FetchLike {
  return async (url, init) => {
    const method = init?.method ?? 'GET';
    const key = `${method} ${url}`;
    const route = routes[key];
    if (!route) {
      return new Response(JSON.stringify({ error: 'not-found', detail: key }), {
        status: 404,
        headers: { 'content-type': 'application/json' },
      });
    }
    route.onRequest?.(init);
    return new Response(route.body ?? '', {
      status: route.status ?? 200,
      headers: { 'content-type': route.contentType ?? 'application/json' },
    });
  };
}
