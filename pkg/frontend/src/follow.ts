/**
 * Launch-and-follow: upload assets, queue the job, poll until terminal.
 *
 * Polling runs at a 1 s cadence by default (matching the snapshot
 * cadence; no push channel needed at desk scale). Each completed or
 * cancelled run stays on the board as its own card so a curator can
 * compare settings side by side after editing the mask and relaunching.
 */

import { Job, OfflineError, StudioClient } from "./api.js";

export interface LaunchInputs {
  label: string;
  contentPng: Uint8Array;
  stylePng: Uint8Array;
  maskPng?: Uint8Array;
  weightsPath: string;
  size: number;
  loss: {
    alpha: number;
    beta: number;
    tv_weight: number;
    content_taps: string[];
    style_taps: Record<string, number>;
  };
  optimizer: { kind: string; lr: number; steps: number; snapshot_every: number };
  init: string;
  seed: number;
}

export interface RunCard {
  label: string;
  jobId: string | null;
  state: "uploading" | Job["state"];
  offline: boolean; // true while polls fail; the UI shows a retry banner
  iteration: number;
  lossHistory: number[]; // total loss per observed poll, for the sparkline
  snapshotCount: number;
  latestSnapshotUrl: string | null;
  error: { code: string; message: string } | null;
  config: LaunchInputs;
}

const TERMINAL: ReadonlySet<string> = new Set(["done", "failed", "cancelled"]);

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export function buildJobConfig(
  inputs: LaunchInputs,
  assetIds: { content: string; style: string; mask?: string },
): Record<string, unknown> {
  const config: Record<string, unknown> = {
    content_asset: assetIds.content,
    style_asset: assetIds.style,
    weights_path: inputs.weightsPath,
    size: inputs.size,
    loss: inputs.loss,
    optimizer: inputs.optimizer,
    init: inputs.init,
    seed: inputs.seed,
  };
  if (assetIds.mask) {
    config.mask_asset = assetIds.mask;
  }
  return config;
}

/**
 * Run one job to its terminal state, reporting every observed change via
 * ``onUpdate``. Transient network failures flip the card's offline flag
 * and keep retrying at the same cadence.
 */
export async function launchAndFollow(
  client: StudioClient,
  inputs: LaunchInputs,
  onUpdate: (card: RunCard) => void = () => {},
  pollMs = 1000,
): Promise<RunCard> {
  const card: RunCard = {
    label: inputs.label,
    jobId: null,
    state: "uploading",
    offline: false,
    iteration: 0,
    lossHistory: [],
    snapshotCount: 0,
    latestSnapshotUrl: null,
    error: null,
    config: inputs,
  };
  onUpdate(card);

  const content = await client.uploadAsset(inputs.contentPng);
  const style = await client.uploadAsset(inputs.stylePng);
  const mask = inputs.maskPng ? await client.uploadAsset(inputs.maskPng) : undefined;
  card.jobId = await client.createJob(
    buildJobConfig(inputs, { content, style, mask }),
  );
  card.state = "queued";
  onUpdate(card);

  for (;;) {
    let job: Job;
    try {
      job = await client.getJob(card.jobId);
    } catch (err) {
      if (err instanceof OfflineError) {
        card.offline = true;
        onUpdate(card);
        await sleep(pollMs);
        continue;
      }
      throw err;
    }
    card.offline = false;
    card.state = job.state;
    card.iteration = job.progress.iteration;
    if (job.progress.losses) {
      card.lossHistory.push(job.progress.losses.total);
    }
    card.snapshotCount = job.snapshots.length;
    card.latestSnapshotUrl =
      job.snapshots.length > 0
        ? client.snapshotUrl(card.jobId, job.snapshots.length - 1)
        : null;
    card.error = job.error;
    onUpdate(card);
    if (TERMINAL.has(job.state)) {
      return card;
    }
    await sleep(pollMs);
  }
}

/** The dashboard model: every launched run keeps its card. */
export class RunBoard {
  cards: RunCard[] = [];

  constructor(private client: StudioClient) {}

  async launch(
    inputs: LaunchInputs,
    onUpdate: (card: RunCard) => void = () => {},
    pollMs = 1000,
  ): Promise<RunCard> {
    const pending = launchAndFollow(
      this.client,
      inputs,
      (card) => {
        if (!this.cards.includes(card)) {
          this.cards.push(card);
        }
        onUpdate(card);
      },
      pollMs,
    );
    return pending;
  }
}
