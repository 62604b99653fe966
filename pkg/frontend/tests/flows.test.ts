import { describe, expect, it } from 'vitest';

import { InkpassClient } from '../src/api.js';
import {
  ALL_DIGITS,
  EnrolmentFlow,
  REPS_PER_DIGIT,
  VerificationFlow,
  enrolmentPlan,
} from '../src/flows.js';
import { fakeTransport, tracePoints } from './fake.js';

describe('enrolmentPlan', () => {
  it('covers ten digits, three repetitions each, digit-major', () => {
    const plan = enrolmentPlan();
    expect(plan).toHaveLength(30);
    for (const digit of ALL_DIGITS) {
      const steps = plan.filter((s) => s.digit === digit);
      expect(steps.map((s) => s.repetition)).toEqual([1, 2, 3]);
    }
    expect(plan.slice(0, 4).map((s) => s.digit)).toEqual([0, 0, 0, 1]);
  });
});

describe('EnrolmentFlow', () => {
  it('makes exactly 30 enrolment calls for a full run', async () => {
    const counts = new Map<number, number>();
    const { fetch, calls } = fakeTransport((call) => {
      const body = call.body as { user: string; digit: number };
      const next = (counts.get(body.digit) ?? 0) + 1;
      counts.set(body.digit, next);
      return { user: body.user, digit: body.digit, count: next };
    });
    const flow = new EnrolmentFlow(new InkpassClient('', fetch), 'alice');

    while (!flow.done) {
      const step = flow.current!;
      const result = await flow.submit(tracePoints(8));
      expect(result.digit).toBe(step.digit);
      expect(result.count).toBe(step.repetition);
    }

    expect(flow.callCount).toBe(30);
    expect(calls).toHaveLength(30);
    expect(calls.every((c) => c.path === '/enroll' && c.method === 'POST')).toBe(true);
    for (const digit of ALL_DIGITS) {
      expect(counts.get(digit)).toBe(REPS_PER_DIGIT);
    }
    await expect(flow.submit(tracePoints(8))).rejects.toThrow('complete');
  });

  it('reports progress as the plan advances', async () => {
    const { fetch } = fakeTransport((call) => {
      const body = call.body as { user: string; digit: number };
      return { user: body.user, digit: body.digit, count: 1 };
    });
    const flow = new EnrolmentFlow(new InkpassClient('', fetch), 'bob');
    expect(flow.progress).toEqual({ done: 0, total: 30 });
    expect(flow.current).toEqual({ digit: 0, repetition: 1 });
    await flow.submit(tracePoints(8));
    expect(flow.progress).toEqual({ done: 1, total: 30 });
    expect(flow.current).toEqual({ digit: 0, repetition: 2 });
  });
});

describe('VerificationFlow', () => {
  it('labels drawings with the expected digits in order', () => {
    const { fetch } = fakeTransport(() => ({ user: 'x', decisions: [] }));
    const flow = new VerificationFlow(new InkpassClient('', fetch), 'x', [5, 9, 0]);
    expect(flow.currentDigit).toBe(5);
    flow.add(tracePoints(6));
    expect(flow.currentDigit).toBe(9);
    flow.add(tracePoints(6));
    flow.add(tracePoints(6));
    expect(flow.complete).toBe(true);
    expect(flow.currentDigit).toBeNull();
    expect(() => flow.add(tracePoints(6))).toThrow('every digit');
  });

  it('submits one attempt and returns its decision', async () => {
    const decision = {
      stage1_ok: true,
      stage2_score: 0.83,
      accepted: true,
      threshold_used: 0.6,
    };
    const { fetch, calls } = fakeTransport(() => ({ user: 'x', decisions: [decision] }));
    const flow = new VerificationFlow(new InkpassClient('', fetch), 'x', [4, 2]);
    const a = tracePoints(6);
    const b = tracePoints(7);
    flow.add(a);
    flow.add(b);
    const result = await flow.submit();
    expect(result).toEqual(decision);
    expect(calls).toHaveLength(1);
    expect(calls[0].body).toEqual({
      user: 'x',
      expected: [4, 2],
      attempts: [
        [
          { digit: 4, points: a },
          { digit: 2, points: b },
        ],
      ],
    });
  });

  it('refuses to submit a partial attempt', async () => {
    const { fetch } = fakeTransport(() => ({ user: 'x', decisions: [] }));
    const flow = new VerificationFlow(new InkpassClient('', fetch), 'x', [1, 2]);
    flow.add(tracePoints(6));
    await expect(flow.submit()).rejects.toThrow('1 of 2');
    flow.restart();
    expect(flow.position).toBe(0);
  });

  it('rejects an empty expected password', () => {
    const { fetch } = fakeTransport(() => ({}));
    expect(() => new VerificationFlow(new InkpassClient('', fetch), 'x', [])).toThrow(
      'empty',
    );
  });
});
