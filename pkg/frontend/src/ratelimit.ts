// Sliding-window rate limiter for outgoing commands.

export class RateLimiter {
  private stamps: number[] = [];

  constructor(private maxPerSecond: number,
              private now: () => number = () => Date.now()) {}

  tryAcquire(): boolean {
    const t = this.now();
    while (this.stamps.length && this.stamps[0] <= t - 1000) {
      this.stamps.shift();
    }
    if (this.stamps.length >= this.maxPerSecond) return false;
    this.stamps.push(t);
    return true;
  }
}
