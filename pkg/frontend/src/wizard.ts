/** Intake wizard state, derived entirely from the server session.
 *
 * The wizard mirrors the server questionnaire exactly: pages are the
 * dimensions present in the session, in their server order, and no question
 * is ever shown that the session does not carry.
 */

import type { IntakeQuestion, SessionEnvelope } from './types.js';

export interface QuestionStatus {
  question: IntakeQuestion;
  answered: boolean;
  value: string;
}

export interface DimensionPage {
  dimension: string;
  questions: QuestionStatus[];
}

export interface WizardState {
  sessionId: string;
  state: string;
  pages: DimensionPage[];
  currentPage: number;
  completeness: number;
  minCompleteness: number;
  runEnabled: boolean;
  forceVisible: boolean;
  unanswered: string[];
}

function answerText(envelope: SessionEnvelope, questionId: string): string {
  const answer = envelope.session.profile.answers[questionId];
  if (!answer) return '';
  return Array.isArray(answer.value) ? answer.value.join(', ') : answer.value;
}

export function buildWizardState(
  envelope: SessionEnvelope,
  currentPage = 0,
): WizardState {
  const pages: DimensionPage[] = [];
  const byDimension = new Map<string, DimensionPage>();
  for (const question of envelope.session.profile.questionnaire) {
    let page = byDimension.get(question.dimension);
    if (!page) {
      page = { dimension: question.dimension, questions: [] };
      byDimension.set(question.dimension, page);
      pages.push(page);
    }
    page.questions.push({
      question,
      answered: question.id in envelope.session.profile.answers,
      value: answerText(envelope, question.id),
    });
  }
  const runEnabled = envelope.completeness >= envelope.min_completeness;
  return {
    sessionId: envelope.session.session_id,
    state: envelope.session.state,
    pages,
    currentPage: Math.min(Math.max(currentPage, 0), Math.max(pages.length - 1, 0)),
    completeness: envelope.completeness,
    minCompleteness: envelope.min_completeness,
    runEnabled,
    forceVisible: !runEnabled,
    unanswered: envelope.unanswered,
  };
}

export function dimensionsCovered(state: WizardState): string[] {
  return state.pages.map((page) => page.dimension);
}

export function pageCompletion(page: DimensionPage): { answered: number; total: number } {
  return {
    answered: page.questions.filter((q) => q.answered).length,
    total: page.questions.length,
  };
}
