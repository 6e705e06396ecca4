import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { renderWizard } from '../src/render.js';
import type { SessionEnvelope } from '../src/types.js';
import { buildWizardState, dimensionsCovered } from '../src/wizard.js';
import { answered, fakeFetch, intakeReady, partial } from './fixtures.js';

const ALL_DIMENSIONS = [
  'data_sources',
  'model_specifications',
  'user_demographics',
  'use_case_objectives',
  'llm_characteristics',
  'embedding_methods',
  'prompt_engineering',
  'fine_tuning',
  'monitoring_moderation',
  'deployment_model',
  'feedback_mechanisms',
];

describe('intake wizard state', () => {
  it('covers all eleven dimensions from the recorded session', () => {
    const state = buildWizardState(intakeReady());
    expect(new Set(dimensionsCovered(state))).toEqual(new Set(ALL_DIMENSIONS));
  });

  it('mirrors the server questionnaire exactly', () => {
    const envelope = intakeReady();
    const state = buildWizardState(envelope);
    const shown = state.pages.flatMap((page) => page.questions.map((q) => q.question.id));
    const served = envelope.session.profile.questionnaire.map((q) => q.id);
    expect(shown.sort()).toEqual(served.sort());
  });

  it('disables run below the threshold and shows the force toggle', () => {
    const envelope = partial();
    expect(envelope.completeness).toBeLessThan(envelope.min_completeness);
    const state = buildWizardState(envelope);
    expect(state.runEnabled).toBe(false);
    expect(state.forceVisible).toBe(true);
    const html = renderWizard(state);
    expect(html).toContain('id="run-assessment" class="primary" disabled');
    expect(html).toContain('id="force-run"');
  });

  it('enables run at full completeness and hides the toggle', () => {
    const envelope = answered();
    expect(envelope.completeness).toBe(1.0);
    const state = buildWizardState(envelope);
    expect(state.runEnabled).toBe(true);
    expect(state.forceVisible).toBe(false);
    const html = renderWizard(state);
    expect(html).not.toContain('id="force-run"');
  });

  it('shows stored answer values, never invented ones', () => {
    const envelope = answered();
    const state = buildWizardState(envelope);
    for (const page of state.pages) {
      for (const status of page.questions) {
        const server = envelope.session.profile.answers[status.question.id];
        expect(status.answered).toBe(server !== undefined);
        if (server) {
          expect(status.value).toBe(server.value);
        }
      }
    }
  });

  it('rehydrates from GET session after a restart', async () => {
    const envelope = answered();
    const sid = envelope.session.session_id;
    const client = new ApiClient(
      '',
      fakeFetch({
        [`GET /assessments/${sid}`]: { body: JSON.stringify(envelope) },
      }),
    );
    const fetched = await client.getAssessment(sid);
    expect(buildWizardState(fetched)).toEqual(buildWizardState(envelope));
  });
});

describe('answer round-trip', () => {
  it('submit then refetch shows identical values', async () => {
    // stateful double: POST stores answers, GET serves the updated session
    const base = intakeReady();
    const sid = base.session.session_id;
    let stored: SessionEnvelope = base;

    const client = new ApiClient('', async (url, init) => {
      const method = init?.method ?? 'GET';
      if (method === 'POST' && url === `/assessments/${sid}/answers`) {
        const body = JSON.parse(String(init?.body)) as {
          answers: Record<string, string>;
        };
        const session = structuredClone(stored.session);
        for (const [questionId, value] of Object.entries(body.answers)) {
          session.profile.answers[questionId] = {
            question_id: questionId,
            value,
            answered_at: '2024-01-01T00:00:00+00:00',
          };
        }
        const total = session.profile.questionnaire.length;
        const unanswered = session.profile.questionnaire
          .map((q) => q.id)
          .filter((id) => !(id in session.profile.answers));
        stored = {
          ...stored,
          session,
          completeness: (total - unanswered.length) / total,
          unanswered,
        };
        return new Response(JSON.stringify(stored), {
          status: 200,
          headers: { 'content-type': 'application/json' },
        });
      }
      if (method === 'GET' && url === `/assessments/${sid}`) {
        return new Response(JSON.stringify(stored), {
          status: 200,
          headers: { 'content-type': 'application/json' },
        });
      }
      throw new Error(`unexpected ${method} ${url}`);
    });

    const firstQuestion = base.session.profile.questionnaire[0].id;
    await client.submitAnswers(sid, { [firstQuestion]: 'the EHR feed' });
    const refetched = await client.getAssessment(sid);
    expect(refetched.session.profile.answers[firstQuestion].value).toBe('the EHR feed');
    const state = buildWizardState(refetched);
    const shown = state.pages
      .flatMap((page) => page.questions)
      .find((q) => q.question.id === firstQuestion);
    expect(shown?.value).toBe('the EHR feed');
  });
});
