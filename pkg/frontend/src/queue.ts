/**
 * Triage queue state machine, kept pure so it is unit-testable.
 *
 * Decisions emit verdict posts; skip only advances; undo re-opens the last
 * decided candidate WITHOUT posting anything -- the user's next decision is
 * the correction verdict and the server's last-write-wins rule applies.
 * Failed posts are kept for retry and the candidate is re-queued.
 */

import { CandidateSummary, VerdictValue } from "./types.js";

export interface PendingPost {
  id: string;
  verdict: VerdictValue;
}

export interface QueueState {
  queue: CandidateSummary[];
  position: number;
  decided: { id: string; verdict: VerdictValue }[];
  outbox: PendingPost[];
  offline: boolean;
}

export function initQueue(pending: CandidateSummary[]): QueueState {
  return { queue: [...pending], position: 0, decided: [], outbox: [], offline: false };
}

export function current(state: QueueState): CandidateSummary | null {
  return state.position < state.queue.length ? state.queue[state.position] : null;
}

export function remaining(state: QueueState): number {
  return Math.max(0, state.queue.length - state.position);
}

/** A decision keystroke: records the verdict and queues exactly one post. */
export function decide(state: QueueState, verdict: VerdictValue): QueueState {
  const cand = current(state);
  if (!cand) return state;
  return {
    ...state,
    position: state.position + 1,
    decided: [...state.decided, { id: cand.id, verdict }],
    outbox: [...state.outbox, { id: cand.id, verdict }],
  };
}

export function skip(state: QueueState): QueueState {
  if (!current(state)) return state;
  return { ...state, position: state.position + 1 };
}

/** Re-open the last decided candidate as current; posts nothing. */
export function undo(state: QueueState): QueueState {
  if (state.decided.length === 0) return state;
  const last = state.decided[state.decided.length - 1];
  const queue = [...state.queue];
  const idx = queue.findIndex((c) => c.id === last.id);
  if (idx >= 0) {
    const [cand] = queue.splice(idx, 1);
    const pos = Math.max(0, state.position - 1);
    queue.splice(pos, 0, cand);
    return {
      ...state,
      queue,
      position: pos,
      decided: state.decided.slice(0, -1),
    };
  }
  return state;
}

/** Pop the next post to submit, if any. */
export function nextPost(state: QueueState): [PendingPost | null, QueueState] {
  if (state.outbox.length === 0) return [null, state];
  const [head, ...rest] = state.outbox;
  return [head, { ...state, outbox: rest }];
}

/** A post failed: put it back at the head and flag the connection. */
export function postFailed(state: QueueState, post: PendingPost): QueueState {
  return { ...state, outbox: [post, ...state.outbox], offline: true };
}

export function postSucceeded(state: QueueState): QueueState {
  return { ...state, offline: false };
}

/** Rebuilding from the server fold reproduces the same pending list. */
export function reconcile(state: QueueState,
                          serverPending: CandidateSummary[]): QueueState {
  const locallyDecided = new Set(state.decided.map((d) => d.id));
  const queue = serverPending.filter((c) => !locallyDecided.has(c.id));
  return { ...state, queue, position: Math.min(state.position, queue.length) };
}
