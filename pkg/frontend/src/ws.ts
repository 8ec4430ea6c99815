// One WebSocket to the service, revived with exponential backoff when it
// drops. Messages sent while down are discarded, never queued: a stale
// switch press delivered seconds later would select the wrong key.

export type SocketLike = {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
};

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionEvents = {
  onMessage: (raw: string) => void;
  onStatus: (connected: boolean) => void;
};

const OPEN = 1; // WebSocket.OPEN

export const BACKOFF_BASE_MS = 500;
export const BACKOFF_CAP_MS = 10_000;

export function backoffDelay(attempt: number): number {
  return Math.min(BACKOFF_BASE_MS * 2 ** attempt, BACKOFF_CAP_MS);
}

export class Connection {
  private socket: SocketLike | null = null;
  private attempt = 0;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private events: ConnectionEvents,
    private factory: SocketFactory = (u) => new WebSocket(u) as SocketLike,
  ) {}

  open(): void {
    if (this.stopped) return;
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempt = 0;
      this.events.onStatus(true);
    };
    socket.onmessage = (ev) => this.events.onMessage(String(ev.data));
    socket.onclose = () => {
      this.socket = null;
      this.events.onStatus(false);
      this.scheduleRetry();
    };
    socket.onerror = () => {
      // some runtimes fire error without close; closing makes them converge
      try {
        socket.close();
      } catch {
        /* already gone */
      }
    };
  }

  // true if the message actually left; false means it was dropped
  send(payload: unknown): boolean {
    if (!this.socket || this.socket.readyState !== OPEN) return false;
    this.socket.send(JSON.stringify(payload));
    return true;
  }

  close(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.socket?.close();
  }

  private scheduleRetry(): void {
    if (this.stopped || this.timer !== null) return;
    const delay = backoffDelay(this.attempt);
    this.attempt += 1;
    this.timer = setTimeout(() => {
      this.timer = null;
      this.open();
    }, delay);
  }
}
