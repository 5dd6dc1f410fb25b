/**
 * Latest-value mailbox decoupling socket ingestion from rendering.
 *
 * Ingestion overwrites unconditionally (frames may be coalesced, never
 * reordered); the renderer takes the newest value if one arrived since
 * its last take. Ingestion therefore never blocks on a slow redraw.
 */
export class Mailbox<T> {
  private value: T | null = null;
  private fresh = false;

  put(v: T): void {
    this.value = v;
    this.fresh = true;
  }

  /** Newest value if unseen since the last take, else null. */
  take(): T | null {
    if (!this.fresh) return null;
    this.fresh = false;
    return this.value;
  }

  /** Newest value ever received, whether or not already taken. */
  peek(): T | null {
    return this.value;
  }
}
