import { ApiError, InkpassClient } from './api.js';
import { EmptyDrawing, StrokeRecorder } from './capture.js';
import { EnrolmentFlow, VerificationFlow } from './flows.js';
import { DigitPad } from './pad.js';

const client = new InkpassClient('/api');

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const status = el<HTMLDivElement>('status');
const prompt = el<HTMLDivElement>('prompt');
const userInput = el<HTMLInputElement>('user');
const expectedInput = el<HTMLInputElement>('expected');

const recorder = new StrokeRecorder();
const pad = new DigitPad(el<HTMLCanvasElement>('pad'), recorder);

let enrolment: EnrolmentFlow | null = null;
let verification: VerificationFlow | null = null;

function say(text: string, tone: 'info' | 'ok' | 'error' = 'info'): void {
  status.textContent = text;
  status.dataset.tone = tone;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof EmptyDrawing) return 'too short, draw the whole digit';
  return err instanceof Error ? err.message : String(err);
}

function showStep(): void {
  if (enrolment) {
    const step = enrolment.current;
    const { done, total } = enrolment.progress;
    prompt.textContent = step
      ? `Draw digit ${step.digit} (${step.repetition}/3, drawing ${done + 1} of ${total})`
      : 'Enrolment complete';
  } else if (verification) {
    const digit = verification.currentDigit;
    prompt.textContent =
      digit === null
        ? 'Attempt ready, press Accept to send'
        : `Draw digit ${digit} (${verification.position + 1} of ${verification.expected.length})`;
  } else {
    prompt.textContent = 'Pick Enrol or Verify';
  }
}

function requireUser(): string {
  const user = userInput.value.trim();
  if (!user) throw new Error('enter a user id first');
  return user;
}

el<HTMLButtonElement>('start-enrol').addEventListener('click', () => {
  try {
    enrolment = new EnrolmentFlow(client, requireUser());
    verification = null;
    pad.clear();
    say('Enrolment started: 10 digits, 3 drawings each');
    showStep();
  } catch (err) {
    say(describe(err), 'error');
  }
});

el<HTMLButtonElement>('start-verify').addEventListener('click', () => {
  try {
    const digits = expectedInput.value.trim();
    if (!/^[0-9]+$/.test(digits)) throw new Error('expected digits must be 0-9');
    verification = new VerificationFlow(
      client,
      requireUser(),
      [...digits].map(Number),
    );
    enrolment = null;
    pad.clear();
    say(`Verification: draw ${digits.length} digits in order`);
    showStep();
  } catch (err) {
    say(describe(err), 'error');
  }
});

async function issuePassword(kind: 'pin' | 'otp'): Promise<void> {
  try {
    const result = await client.requestPassword(kind);
    expectedInput.value = result.digits.join('');
    say(
      `Issued ${kind} ${expectedInput.value} ` +
        `(${result.candidates} candidates under the policy)`,
    );
  } catch (err) {
    say(describe(err), 'error');
  }
}

el<HTMLButtonElement>('issue-pin').addEventListener('click', () => issuePassword('pin'));
el<HTMLButtonElement>('issue-otp').addEventListener('click', () => issuePassword('otp'));

el<HTMLButtonElement>('accept').addEventListener('click', async () => {
  try {
    if (enrolment) {
      const result = await enrolment.submit(recorder.finish());
      pad.clear();
      say(`Stored digit ${result.digit}, sample ${result.count} of 4`, 'ok');
      if (enrolment.done) {
        say(`Enrolment complete: ${enrolment.callCount} drawings stored`, 'ok');
        enrolment = null;
      }
    } else if (verification) {
      if (!verification.complete) {
        verification.add(recorder.finish());
        pad.clear();
      }
      if (verification.complete) {
        const d = await verification.submit();
        say(
          d.accepted
            ? `Accepted (score ${d.stage2_score.toFixed(3)} >= ${d.threshold_used.toFixed(3)})`
            : d.stage1_ok
              ? `Rejected: score ${d.stage2_score.toFixed(3)} below ${d.threshold_used.toFixed(3)}`
              : 'Rejected: wrong digits',
          d.accepted ? 'ok' : 'error',
        );
        verification = null;
      }
    } else {
      say('start a flow first', 'error');
    }
    showStep();
  } catch (err) {
    say(describe(err), 'error');
  }
});

el<HTMLButtonElement>('clear').addEventListener('click', () => pad.clear());

client
  .health()
  .then((h) => say(`Service up: ${h.scorer}, threshold ${h.threshold.toFixed(3)}`))
  .catch((err) => say(describe(err), 'error'));

showStep();
