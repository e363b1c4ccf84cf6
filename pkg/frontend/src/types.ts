/** Payload shapes of the session API. */

export interface SessionInfo {
  id: string;
  dataset: string;
  mode: string;
  score_kind: string;
  jaccard: number;
  min_support: number;
  status: string;
  n_biclusters: number;
  known_patterns: number;
}

export interface EntityInfo {
  id: number;
  label: string;
  frequency: number;
}

export interface DomainInfo {
  id: string;
  name: string;
  entities: EntityInfo[];
}

export interface RelationInfo {
  id: string;
  left_domain: string;
  right_domain: string;
  n_pairs: number;
}

export interface SchemaResponse {
  domains: DomainInfo[];
  relations: RelationInfo[];
}

export interface BiclusterInfo {
  id: string;
  relation: string;
  left: number[];
  right: number[];
  left_labels: string[];
  right_labels: string[];
}

export interface ChainInfo {
  id: string;
  members: string[];
  shared_domains: string[];
  score: number;
}

export interface FullPathResponse {
  seed: string;
  chains: ChainInfo[];
  warnings: string[];
}

export interface NeighborInfo {
  bicluster: string;
  score: number;
  opacity: number;
}

export interface StepwiseResponse {
  seed: string;
  neighbors: NeighborInfo[];
  warnings: string[];
}

export interface DocumentInfo {
  doc_id: string;
  content: string;
  entities: string[];
}

export interface DocumentsResponse {
  bicluster: string;
  documents: DocumentInfo[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly category: string,
    detail: string,
  ) {
    super(detail);
  }
}
