/** Payload shapes of the review API. */

export type VerdictValue = "accept" | "reject";

export interface CandidateSummary {
  id: string;
  centroid: [number, number];
  area_m2: number;
  median_p: number;
  status: string;
}

export interface HorseshoeLocal {
  p0: [number, number];
  p1: [number, number];
  width: number;
}

export interface CandidateDetail {
  id: string;
  status: string;
  area_m2: number;
  elev_var: number;
  median_p: number;
  /** row 0 is the southern edge; rendering must flip vertically */
  dem: number[][];
  prob: number[][];
  polygon: [number, number][];
  horseshoe: HorseshoeLocal | null;
  world_origin: [number, number];
  cell_size: number;
}

export interface Stats {
  counts: Record<string, number>;
  reviewers: Record<string, number>;
  verdicts: number;
}
