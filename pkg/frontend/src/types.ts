// Payload shapes of the listing-service HTTP API.

export interface StageRecord {
  stage: string;
  duration_ms: number;
  outcome: string;
  fallback_taken: boolean;
}

export interface PipelineTrace {
  variant: string;
  instruction: string;
  stages: StageRecord[];
}

export interface Trailer {
  status: string;
  draft_id: string;
  reason?: string | null;
  chunk_count?: number;
  trace?: PipelineTrace;
  error?: string;
}

export interface GenerateOptions {
  k?: number;
  tau_identical?: number;
  tau_similar?: number;
  max_chars?: number;
  template?: string[];
}

export interface GenerateRequest {
  request_id?: string;
  user_id?: string;
  image_ref: string;
  image_embedding: number[];
  options?: GenerateOptions;
}

export interface PublishResult {
  draft_id: string;
  published: boolean;
  retained_ratio: number | null;
  quality_score: number | null;
}

export interface FixtureEntry {
  name: string;
  image_ref: string;
  embedding: number[];
}

export interface HealthInfo {
  status: string;
  products: number;
  index_size: number;
}
