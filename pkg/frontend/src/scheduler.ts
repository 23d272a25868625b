/**
 * Debounced latest-wins dispatcher for slider-driven deform requests.
 *
 * Guarantees: at most one request in flight; a new request issued within
 * the debounce window supersedes the pending one; responses that are not
 * for the latest issued request are discarded by sequence number, so the
 * final rendered frame always corresponds to the final slider position.
 */

export interface SchedulerHooks<T> {
  send: (coeffs: number[]) => Promise<T>;
  onResult: (result: T, coeffs: number[]) => void;
  onError: (error: unknown) => void;
}

export class DeformScheduler<T> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private queued: number[] | null = null;
  private inFlight = false;
  private seq = 0; // last issued sequence number
  private appliedSeq = 0;

  constructor(
    private readonly hooks: SchedulerHooks<T>,
    private readonly debounceMs = 60,
  ) {}

  /** Schedule a deform for the given absolute coefficients. */
  request(coeffs: number[]): void {
    this.queued = coeffs.slice();
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.flush();
    }, this.debounceMs);
  }

  /** True while a request is on the wire. */
  get busy(): boolean {
    return this.inFlight;
  }

  private flush(): void {
    if (this.inFlight || this.queued === null) return;
    const coeffs = this.queued;
    this.queued = null;
    const mySeq = ++this.seq;
    this.inFlight = true;
    this.hooks
      .send(coeffs)
      .then((result) => {
        this.inFlight = false;
        if (mySeq === this.seq && mySeq > this.appliedSeq) {
          this.appliedSeq = mySeq;
          this.hooks.onResult(result, coeffs);
        }
        this.flush(); // fire anything queued while we were in flight
      })
      .catch((error) => {
        this.inFlight = false;
        if (mySeq === this.seq) this.hooks.onError(error);
        this.flush();
      });
  }
}
