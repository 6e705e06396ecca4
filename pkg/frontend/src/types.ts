/** Wire types mirroring the assessment service's JSON bodies. */

export type SessionState =
  | 'created'
  | 'intake_ready'
  | 'running'
  | 'complete'
  | 'failed';

export interface IntakeQuestion {
  id: string;
  dimension: string;
  prompt: string;
  answer_kind: 'free_text' | 'choice' | 'multi_choice';
  choices: string[];
}

export interface IntakeAnswer {
  question_id: string;
  value: string | string[];
  answered_at: string;
}

export interface Profile {
  brief: { title: string; description: string };
  questionnaire: IntakeQuestion[];
  answers: Record<string, IntakeAnswer>;
  dependencies: Array<{ name: string; kind: string }>;
}

export type BandName = 'negligible' | 'low' | 'medium' | 'high' | 'critical';

export interface RiskRecord {
  record_id: string;
  source: 'static_agent' | 'dynamic_agent';
  subject_id: string;
  subject_label: string;
  severity: number;
  likelihood: number;
  score: number;
  band: BandName;
  rationale: string;
  degraded: boolean;
  source_urls: string[];
}

export interface RiskRegister {
  records: RiskRecord[];
  ranking_basis: string;
  taxonomy_version: string;
  created_at: string;
}

export interface Session {
  session_id: string;
  state: SessionState;
  profile: Profile;
  risk_register: RiskRegister | null;
  report_id: string | null;
  error: string | null;
  intake_degraded: boolean;
  created_at: string;
  updated_at: string;
}

/** Every session endpoint wraps the session with completeness bookkeeping. */
export interface SessionEnvelope {
  session: Session;
  completeness: number;
  unanswered: string[];
  min_completeness: number;
}

export interface MitigationAdvice {
  record_id: string;
  measures: string[];
  residual_note: string | null;
  degraded: boolean;
}

export interface Report {
  schema_version: string;
  report_id: string;
  generated_at: string;
  profile_summary: {
    title: string;
    description: string;
    answered_dimensions: string[];
    completeness: number;
    dependencies: string[];
    forced_run: boolean;
  };
  risk_register: RiskRegister;
  mitigations: MitigationAdvice[];
  eliminated: RiskRecord[];
  methodology: {
    taxonomy_version: string;
    band_boundaries: number[];
    eliminated_bands: string[];
    decoding: Record<string, unknown>;
    note: string;
    degradations: Array<{ stage: string; detail: string }>;
  };
  transcript_digests: string[];
  search_queries: string[];
}

export interface Taxonomy {
  version: string;
  categories: Array<{ id: string; name: string; ordinal: number }>;
  broad_risks: Array<{
    id: string;
    category_id: string;
    name: string;
    description: string;
    dimensions: Array<{ axis: string; value: string }>;
  }>;
}

export type ReportFormat = 'structured' | 'markdown' | 'html';
