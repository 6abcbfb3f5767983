/**
 * Job polling with idle backoff.
 *
 * Polls every second while responses keep changing; after IDLE_AFTER
 * consecutive identical responses the interval stretches to five seconds.
 * Any change snaps it back to one second.
 */

export const ACTIVE_INTERVAL_MS = 1000;
export const IDLE_INTERVAL_MS = 5000;
export const IDLE_AFTER = 5;

export interface PollerOptions<T> {
  fetchValue: () => Promise<T>;
  onUpdate: (value: T) => void;
  onError?: (error: unknown) => void;
  fingerprint?: (value: T) => string;
  activeMs?: number;
  idleMs?: number;
  idleAfter?: number;
}

export class Poller<T> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private lastFingerprint: string | null = null;
  private unchanged = 0;
  private running = false;

  constructor(private readonly options: PollerOptions<T>) {}

  get intervalMs(): number {
    const idleAfter = this.options.idleAfter ?? IDLE_AFTER;
    if (this.unchanged >= idleAfter) return this.options.idleMs ?? IDLE_INTERVAL_MS;
    return this.options.activeMs ?? ACTIVE_INTERVAL_MS;
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    void this.tick();
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  private async tick(): Promise<void> {
    if (!this.running) return;
    try {
      const value = await this.options.fetchValue();
      const print = (this.options.fingerprint ?? JSON.stringify)(value);
      if (print !== this.lastFingerprint) {
        this.lastFingerprint = print;
        this.unchanged = 0;
        this.options.onUpdate(value);
      } else {
        this.unchanged += 1;
      }
    } catch (error) {
      this.options.onError?.(error);
    }
    if (this.running) {
      this.timer = setTimeout(() => void this.tick(), this.intervalMs);
    }
  }
}
