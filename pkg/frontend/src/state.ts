/** Session state: which dataset and fit are active and how the analyst has
 * configured the next fit. Guards the UI-level invariants (K >= 1, the
 * dendrogram cut stays inside [1, m]). */

import type { FitRequestConfig } from "./api.js";

export type PenaltyKind = "difference" | "second_derivative";
export type LambdaMode = "auto" | "fixed" | "aic_grid";

export class SessionState {
  datasetId: string | null = null;
  datasetM: number | null = null;
  datasetN: number | null = null;
  jobId: string | null = null;

  chosenK = 3;
  basisSize = 40;
  penaltyKind: PenaltyKind = "difference";
  penaltyOrder = 2;
  lambdaMode: LambdaMode = "auto";
  lambdaValue = 1.0;
  truncate: number | null = null;
  cutK = 1;

  setDataset(id: string, n: number, m: number): void {
    this.datasetId = id;
    this.datasetN = n;
    this.datasetM = m;
    this.jobId = null;
    this.cutK = 1;
  }

  chooseK(k: number): void {
    if (!Number.isInteger(k) || k < 1) {
      throw new Error(`K must be a positive integer, got ${k}`);
    }
    this.chosenK = k;
  }

  setCutK(k: number): void {
    const m = this.datasetM ?? 1;
    if (!Number.isInteger(k) || k < 1 || k > m) {
      throw new Error(`cut k must be in [1, ${m}], got ${k}`);
    }
    this.cutK = k;
  }

  setPenalty(kind: PenaltyKind, order: number): void {
    if (order < 1) throw new Error("penalty order must be at least 1");
    this.penaltyKind = kind;
    this.penaltyOrder = order;
  }

  setLambda(mode: LambdaMode, value = 1.0): void {
    if (mode !== "fixed" && value <= 0) {
      throw new Error("starting lambda must be positive");
    }
    this.lambdaMode = mode;
    this.lambdaValue = value;
  }

  fitConfig(): FitRequestConfig {
    return {
      K: this.chosenK,
      L: this.basisSize,
      lambda_mode: this.lambdaMode,
      lambda_value: this.lambdaValue,
      penalty: { kind: this.penaltyKind, a: this.penaltyOrder },
      ...(this.truncate != null ? { truncate: this.truncate } : {}),
    };
  }
}
