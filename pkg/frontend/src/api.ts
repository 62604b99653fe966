// Typed client for the inkpass authentication service (JSON over HTTP).

export interface TracePoint {
  x: number;
  y: number;
  t: number;
}

export interface Drawing {
  digit: number;
  points: TracePoint[];
}

export interface Health {
  status: string;
  scorer: string;
  threshold: number;
}

export interface EnrollResult {
  user: string;
  digit: number;
  count: number;
}

export interface PasswordResult {
  kind: string;
  digits: number[];
  candidates: number;
}

export interface Decision {
  stage1_ok: boolean;
  stage2_score: number;
  accepted: boolean;
  threshold_used: number;
}

export interface VerifyResult {
  user: string;
  decisions: Decision[];
}

export interface UserInfo {
  user: string;
  created_at: string;
  threshold_override: number | null;
  digits: number[];
  enrolment_counts: Record<string, number>;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`${status}: ${detail}`);
    this.name = 'ApiError';
  }
}

async function readDetail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (typeof body?.detail === 'string') return body.detail;
    return JSON.stringify(body?.detail ?? body);
  } catch {
    return res.statusText || 'request failed';
  }
}

export class InkpassClient {
  constructor(
    private baseUrl = '',
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, init);
    if (!res.ok) throw new ApiError(res.status, await readDetail(res));
    return res.json() as Promise<T>;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<Health> {
    return this.request<Health>('/health');
  }

  /** One drawing per call; the server caps each digit at four samples. */
  enroll(
    user: string,
    digit: number,
    points: TracePoint[],
    replace = false,
  ): Promise<EnrollResult> {
    return this.post<EnrollResult>('/enroll', { user, digit, points, replace });
  }

  /** Ask the server to issue a password, or validate a user-chosen PIN. */
  requestPassword(
    kind: 'pin' | 'otp',
    opts: { user?: string; digits?: number[]; seed?: number } = {},
  ): Promise<PasswordResult> {
    return this.post<PasswordResult>('/password', { kind, ...opts });
  }

  verify(
    user: string,
    expected: number[],
    attempts: Drawing[][],
  ): Promise<VerifyResult> {
    return this.post<VerifyResult>('/verify', { user, expected, attempts });
  }

  userInfo(user: string): Promise<UserInfo> {
    return this.request<UserInfo>(`/users/${encodeURIComponent(user)}`);
  }
}
