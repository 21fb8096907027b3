/**
 * Typed client for the session service.
 *
 * The schedule payload served to the browser must not contain answer
 * information; `assertNoAnswerFields` enforces that contract defensively.
 * Network failures retry with exponential backoff; server refusals
 * (4xx/409) are surfaced verbatim and never retried blindly.
 */

export interface Dot {
  x: number;
  y: number;
  radius: number;
}

export interface DotArray {
  dots: Dot[];
  canvas_width: number;
  canvas_height: number;
}

export interface UiTrial {
  trial_id: string;
  pair: {
    left_count: number;
    right_count: number;
    nominal_ratio: number;
    computed_ratio: number;
  };
  left_array: DotArray;
  right_array: DotArray;
  display_ms: number;
  difficulty_rank: number;
}

export interface UiSchedule {
  session_id: string;
  condition: string;
  n_trials: number;
  trials: UiTrial[];
}

export interface SessionInfo {
  session_id: string;
  participant_id: string;
  condition: string;
  state: string;
  n_trials: number;
  n_responses: number;
}

export interface ResponseAck {
  accepted: boolean;
  /** null when the ack was lost and the response confirmed via session poll */
  correct: boolean | null;
  completed: boolean;
  n_responses: number;
}

export interface ParticipantFields {
  participant_id: string;
  age_days: number;
  gender: string;
}

export class ServerRefusal extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`server refused (${status}): ${detail}`);
  }
}

const ANSWER_FIELDS = ["greater_side", "area_congruent", "cumulative_area"];

export function assertNoAnswerFields(schedule: UiSchedule): void {
  for (const trial of schedule.trials) {
    const record = trial as unknown as Record<string, unknown>;
    for (const field of ANSWER_FIELDS) {
      if (field in record) {
        throw new Error(`schedule payload leaks answer field '${field}'`);
      }
      const left = trial.left_array as unknown as Record<string, unknown>;
      const right = trial.right_array as unknown as Record<string, unknown>;
      if (field in left || field in right) {
        throw new Error(`dot array payload leaks answer field '${field}'`);
      }
    }
  }
}

export interface RetryOptions {
  retries: number;
  backoffMs: number;
  sleep: (ms: number) => Promise<void>;
}

const defaultRetry: RetryOptions = {
  retries: 4,
  backoffMs: 400,
  sleep: (ms) => new Promise((resolve) => setTimeout(resolve, ms)),
};

export class SessionClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
    private readonly retry: RetryOptions = defaultRetry,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let attempt = 0;
    for (;;) {
      try {
        return await this.fetchFn(`${this.baseUrl}${path}`, init);
      } catch (err) {
        // only network-level failures reach here; server answers return
        if (attempt >= this.retry.retries) throw err;
        await this.retry.sleep(this.retry.backoffMs * 2 ** attempt);
        attempt += 1;
      }
    }
  }

  private async json<T>(response: Response): Promise<T> {
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ServerRefusal(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async createSession(
    participant: ParticipantFields,
    condition?: string,
  ): Promise<SessionInfo> {
    const response = await this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ participant, condition: condition ?? null }),
    });
    return this.json<SessionInfo>(response);
  }

  async getSession(sessionId: string): Promise<SessionInfo> {
    const response = await this.request(`/sessions/${sessionId}`);
    return this.json<SessionInfo>(response);
  }

  async fetchSchedule(sessionId: string): Promise<UiSchedule> {
    const response = await this.request(`/sessions/${sessionId}/schedule`);
    const schedule = await this.json<UiSchedule>(response);
    assertNoAnswerFields(schedule);
    return schedule;
  }

  /**
   * Post one response; `trialIndex` is the 0-based position in the schedule.
   *
   * If a retry lands after the original POST was actually applied, the server
   * answers 409; the session is polled and the response treated as accepted
   * with an unknown verdict instead of failing the trial.
   */
  async postResponse(
    sessionId: string,
    trialIndex: number,
    body: { trial_id: string; chosen_side: string; latency_ms: number },
  ): Promise<ResponseAck> {
    const response = await this.request(`/sessions/${sessionId}/responses`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (response.status === 409) {
      const session = await this.getSession(sessionId);
      if (session.n_responses > trialIndex) {
        return {
          accepted: true,
          correct: null,
          completed: session.state === "complete",
          n_responses: session.n_responses,
        };
      }
    }
    return this.json<ResponseAck>(response);
  }
}
