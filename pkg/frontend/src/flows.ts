import type {
  Decision,
  Drawing,
  EnrollResult,
  InkpassClient,
  TracePoint,
} from './api.js';

export const REPS_PER_DIGIT = 3;
export const ALL_DIGITS: readonly number[] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

export interface EnrolmentStep {
  digit: number;
  repetition: number; // 1-based, for display
}

/** Digit-major order: three 0s, then three 1s, ... thirty drawings total. */
export function enrolmentPlan(): EnrolmentStep[] {
  const plan: EnrolmentStep[] = [];
  for (const digit of ALL_DIGITS) {
    for (let rep = 1; rep <= REPS_PER_DIGIT; rep++) {
      plan.push({ digit, repetition: rep });
    }
  }
  return plan;
}

/**
 * Walks the enrolment plan; every submitted drawing is exactly one
 * /enroll call, so a complete run makes plan.length (30) calls.
 */
export class EnrolmentFlow {
  private plan = enrolmentPlan();
  private step = 0;
  private calls = 0;

  constructor(
    private client: InkpassClient,
    readonly user: string,
  ) {}

  get current(): EnrolmentStep | null {
    return this.step < this.plan.length ? this.plan[this.step] : null;
  }

  get done(): boolean {
    return this.step >= this.plan.length;
  }

  get callCount(): number {
    return this.calls;
  }

  get progress(): { done: number; total: number } {
    return { done: this.step, total: this.plan.length };
  }

  async submit(points: TracePoint[]): Promise<EnrollResult> {
    const step = this.current;
    if (!step) throw new Error('enrolment already complete');
    const result = await this.client.enroll(this.user, step.digit, points);
    this.calls += 1;
    this.step += 1;
    return result;
  }
}

/**
 * Collects one verification attempt: the user draws the expected digits in
 * order, then a single /verify call carries the whole attempt.
 */
export class VerificationFlow {
  private drawings: Drawing[] = [];

  constructor(
    private client: InkpassClient,
    readonly user: string,
    readonly expected: number[],
  ) {
    if (expected.length === 0) throw new Error('expected password is empty');
  }

  get position(): number {
    return this.drawings.length;
  }

  get currentDigit(): number | null {
    return this.position < this.expected.length
      ? this.expected[this.position]
      : null;
  }

  get complete(): boolean {
    return this.drawings.length === this.expected.length;
  }

  add(points: TracePoint[]): void {
    const digit = this.currentDigit;
    if (digit === null) throw new Error('attempt already has every digit');
    this.drawings.push({ digit, points });
  }

  async submit(): Promise<Decision> {
    if (!this.complete) {
      throw new Error(
        `attempt has ${this.drawings.length} of ${this.expected.length} digits`,
      );
    }
    const result = await this.client.verify(this.user, this.expected, [
      this.drawings,
    ]);
    return result.decisions[0];
  }

  restart(): void {
    this.drawings = [];
  }
}
