import type { ActiveQuestion, ResultItem, SessionMode, Statement } from './types';

export type Phase = 'idle' | 'submitting' | 'refreshed';

export class DuplicateStatementError extends Error {}

/**
 * Client-side session state. The client never computes rankings; it only
 * tracks what the server sent, the staged feedback basket, and a phase
 * flag that enforces one in-flight feedback request at a time.
 */
export class UiSession {
    phase: Phase = 'idle';
    page: ResultItem[] = [];
    question: ActiveQuestion | null = null;
    basket: Statement[] = [];
    relevant = new Set<number>();
    irrelevant = new Set<number>();
    iteration = 0;
    entropyHistory: number[] = [];

    constructor(
        public readonly sessionId: string,
        public readonly mode: SessionMode,
        public readonly dataset: string,
    ) {}

    get exhausted(): boolean {
        return this.mode === 'active' && this.question === null && this.iteration > 0;
    }

    /** Stage one statement; duplicate (reference, attribute) pairs are blocked. */
    stage(statement: Statement): void {
        if (this.mode === 'active') {
            throw new Error('active sessions answer posed questions instead');
        }
        const duplicate = this.basket.some(
            (s) => s.ref_id === statement.ref_id && s.attribute === statement.attribute,
        );
        if (duplicate) {
            throw new DuplicateStatementError(
                `already staged a statement about image ${statement.ref_id} on that attribute`,
            );
        }
        this.basket.push(statement);
    }

    unstage(index: number): void {
        this.basket.splice(index, 1);
    }

    markRelevant(id: number): void {
        this.irrelevant.delete(id);
        this.relevant.add(id);
    }

    markIrrelevant(id: number): void {
        this.relevant.delete(id);
        this.irrelevant.add(id);
    }

    /** Transition into the submitting phase; rejects concurrent submits. */
    beginSubmit(): void {
        if (this.phase === 'submitting') {
            throw new Error('a feedback request is already in flight');
        }
        this.phase = 'submitting';
    }

    completeSubmit(page: ResultItem[], question: ActiveQuestion | null, entropy: number, iteration: number): void {
        this.page = page;
        this.question = question;
        this.entropyHistory.push(entropy);
        this.iteration = iteration;
        this.basket = [];
        this.relevant.clear();
        this.irrelevant.clear();
        this.phase = 'refreshed';
    }

    failSubmit(): void {
        this.phase = 'idle';
    }
}

/** Map the confidence wording of the controls onto the wire values. */
export function confidenceValue(label: 'somewhat' | 'moderately' | 'a lot'): number {
    return { somewhat: 1, moderately: 2, 'a lot': 3 }[label];
}
