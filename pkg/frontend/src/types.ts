/** Wire types mirroring the service's JSON payloads (docs/http_api.md). */

export interface PredictionReport {
  tokens: string[];
  compound_index: number;
  label: string;
  types: string[];
  confidence: Record<string, number>;
  pair_votes: string[];
  pair_label_distributions: number[][];
  pair_weights: number[];
  morph_tags: string[] | null;
  dep_heads: number[] | null;
  dep_rels: string[] | null;
  heatmaps: Record<string, number[][]>;
}

export interface QueueInstance {
  uid: string;
  tokens: string[];
  compound_index: number;
  language: string;
}

export interface NextResponse {
  instance: QueueInstance | null;
  done: number;
  total: number;
  labels: string[];
}

export interface AnnotationRecord {
  instance_id: string;
  annotator_id: string;
  choice: string;
  comment: string;
  timestamp: number;
  record_id: number | null;
}

export interface ExportSummary {
  labels: Record<string, string>;
  dropped: string[];
  kappa: Record<string, number>;
}

export interface ExportPayload {
  records: AnnotationRecord[];
  summary: ExportSummary;
}

export const NOT_SURE = "NOT_SURE";
