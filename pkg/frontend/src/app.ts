import { ApiClient, ApiError } from './api';
import { gridOrder, renderResultsGrid } from './grid';
import { attributeExtremes, renderLegend } from './legend';
import { renderEntropySparkline, renderQuestionPanel } from './question';
import { DuplicateStatementError, UiSession } from './state';
import type { ComparisonResponse, ResultItem, SessionMode } from './types';

export interface AppElements {
    datasetSelect: HTMLSelectElement;
    modeSelect: HTMLSelectElement;
    startButton: HTMLButtonElement;
    status: HTMLElement;
    legend: HTMLElement;
    question: HTMLElement;
    sparkline: HTMLElement;
    basket: HTMLElement;
    grid: HTMLElement;
}

const PAGE_SIZE = 40;

/**
 * Wires the page together. All ranking and relevance math happens on the
 * server; this client renders server responses and forwards user input.
 */
export class App {
    session: UiSession | null = null;
    private attributeNames: string[] = [];
    private currentPage = 0;

    constructor(private api: ApiClient, private el: AppElements) {
        this.el.startButton.addEventListener('click', () => void this.startSession());
    }

    async loadDatasets(): Promise<void> {
        const { datasets } = await this.api.listDatasets();
        this.el.datasetSelect.textContent = '';
        for (const info of datasets) {
            const option = document.createElement('option');
            option.value = info.name;
            option.textContent = `${info.name} (${info.N} images, ${info.M} attributes)`;
            this.el.datasetSelect.appendChild(option);
        }
    }

    private setStatus(text: string, isError = false): void {
        this.el.status.textContent = text;
        this.el.status.className = isError ? 'status error' : 'status';
    }

    async startSession(): Promise<void> {
        const dataset = this.el.datasetSelect.value;
        const mode = this.el.modeSelect.value as SessionMode;
        try {
            const created = await this.api.createSession(dataset, mode, { page_size: PAGE_SIZE });
            this.session = new UiSession(created.session_id, mode, dataset);
            this.session.page = created.page;
            this.session.question = created.question;
            this.currentPage = 0;
            this.setStatus(`session ${created.session_id.slice(0, 8)} started in ${mode} mode`);
            renderLegend(this.el.legend, attributeExtremes(created.page), {
                api: this.api,
                dataset,
            });
            this.render();
        } catch (err) {
            this.setStatus(`could not start session: ${(err as Error).message}`, true);
        }
    }

    render(): void {
        const session = this.session;
        if (!session) return;
        if (session.mode === 'active') {
            renderQuestionPanel(this.el.question, session.question, {
                api: this.api,
                dataset: session.dataset,
                busy: session.phase === 'submitting',
                callbacks: { onAnswer: (r, c) => void this.answer(r, c) },
            });
            renderEntropySparkline(this.el.sparkline, session.entropyHistory);
        } else {
            this.el.question.textContent = '';
            this.el.sparkline.textContent = '';
        }
        renderResultsGrid(this.el.grid, session.page, {
            api: this.api,
            dataset: session.dataset,
            page: this.currentPage,
            pageSize: PAGE_SIZE,
            showCompareControls: session.mode !== 'active',
            showBinaryControls: session.mode === 'hybrid',
            callbacks: {
                onCompare: (item) => this.promptComparison(item),
                onRelevant: (item) => {
                    session.markRelevant(item.id);
                    this.renderBasket();
                },
                onIrrelevant: (item) => {
                    session.markIrrelevant(item.id);
                    this.renderBasket();
                },
                onPage: (page) => void this.goToPage(page),
            },
        });
        this.renderBasket();
    }

    /** Minimal comparison composer driven by window.prompt-free controls. */
    promptComparison(item: ResultItem): void {
        const session = this.session;
        if (!session) return;
        const names = Object.keys(item.attribute_values);
        this.attributeNames = names;
        const composer = document.createElement('div');
        composer.className = 'composer';
        composer.dataset.refId = String(item.id);
        const attribute = document.createElement('select');
        attribute.className = 'composer-attribute';
        names.forEach((name, index) => {
            const option = document.createElement('option');
            option.value = String(index);
            option.textContent = name;
            attribute.appendChild(option);
        });
        const response = document.createElement('select');
        response.className = 'composer-response';
        for (const value of ['more', 'less', 'equal']) {
            const option = document.createElement('option');
            option.value = value;
            option.textContent = value === 'equal' ? 'equally' : value;
            response.appendChild(option);
        }
        const confidence = document.createElement('select');
        confidence.className = 'composer-confidence';
        for (const [label, value] of [['somewhat', 1], ['moderately', 2], ['a lot', 3]] as const) {
            const option = document.createElement('option');
            option.value = String(value);
            option.textContent = label;
            if (value === 2) option.selected = true;
            confidence.appendChild(option);
        }
        const add = document.createElement('button');
        add.className = 'composer-add';
        add.textContent = `my target is ... than #${item.id}`;
        add.addEventListener('click', () => {
            this.stageStatement(
                item.id,
                Number(attribute.value),
                response.value as ComparisonResponse,
                Number(confidence.value),
            );
            composer.remove();
        });
        composer.append(response, attribute, confidence, add);
        this.el.basket.prepend(composer);
    }

    stageStatement(
        refId: number,
        attribute: number,
        response: ComparisonResponse,
        confidence: number,
    ): void {
        const session = this.session;
        if (!session) return;
        try {
            session.stage({ ref_id: refId, attribute, response, confidence });
            this.renderBasket();
        } catch (err) {
            if (err instanceof DuplicateStatementError) {
                this.setStatus(`${err.message}; adjust the existing statement instead`, true);
            } else {
                throw err;
            }
        }
    }

    renderBasket(): void {
        const session = this.session;
        if (!session || session.mode === 'active') {
            this.el.basket.textContent = '';
            return;
        }
        const existing = this.el.basket.querySelectorAll('.staged, .basket-submit, .binary-marks');
        existing.forEach((node) => node.remove());
        for (const [index, statement] of session.basket.entries()) {
            const row = document.createElement('div');
            row.className = 'staged';
            const name = this.attributeNames[statement.attribute] ?? `attribute ${statement.attribute}`;
            row.textContent = `target is ${statement.response === 'equal' ? 'equally' : statement.response} "${name}" vs #${statement.ref_id} `;
            const remove = document.createElement('button');
            remove.textContent = 'x';
            remove.addEventListener('click', () => {
                session.unstage(index);
                this.renderBasket();
            });
            row.appendChild(remove);
            this.el.basket.appendChild(row);
        }
        if (session.mode === 'hybrid' && (session.relevant.size || session.irrelevant.size)) {
            const marks = document.createElement('div');
            marks.className = 'binary-marks';
            marks.textContent = `relevant: {${[...session.relevant].join(', ')}}  irrelevant: {${[...session.irrelevant].join(', ')}}`;
            this.el.basket.appendChild(marks);
        }
        const hasContent =
            session.basket.length > 0 || session.relevant.size > 0 || session.irrelevant.size > 0;
        if (hasContent) {
            const submit = document.createElement('button');
            submit.className = 'basket-submit';
            submit.textContent = `submit ${session.basket.length} statement(s)`;
            submit.disabled = session.phase === 'submitting';
            submit.addEventListener('click', () => void this.submitBasket());
            this.el.basket.appendChild(submit);
        }
    }

    async submitBasket(): Promise<void> {
        const session = this.session;
        if (!session) return;
        session.beginSubmit();
        this.renderBasket();
        try {
            const reply = await this.api.submitStatements(session.sessionId, session.basket, {
                relevant: [...session.relevant],
                irrelevant: [...session.irrelevant],
            });
            session.completeSubmit(reply.page, reply.question, reply.entropy, reply.iteration);
            this.currentPage = 0;
            this.setStatus(`iteration ${reply.iteration}: ranking refreshed`);
            this.render();
        } catch (err) {
            session.failSubmit();
            this.setStatus(`submit failed, feedback preserved: ${(err as Error).message}`, true);
            this.renderBasket();
        }
    }

    async answer(response: ComparisonResponse, confidence: number): Promise<void> {
        const session = this.session;
        if (!session || !session.question) return;
        session.beginSubmit();
        this.render();
        try {
            const reply = await this.api.answerQuestion(
                session.sessionId,
                session.question.question_token,
                response,
                confidence,
            );
            session.completeSubmit(reply.page, reply.question, reply.entropy, reply.iteration);
            this.currentPage = 0;
            this.setStatus(
                reply.question
                    ? `iteration ${reply.iteration}: entropy ${reply.entropy.toFixed(2)} bits`
                    : 'search exhausted: showing final ranking',
            );
            this.render();
        } catch (err) {
            session.failSubmit();
            if (err instanceof ApiError && err.status === 409) {
                this.setStatus('that question was already answered; showing current state', true);
            } else {
                this.setStatus(`answer failed: ${(err as Error).message}`, true);
            }
            this.render();
        }
    }

    async goToPage(page: number): Promise<void> {
        const session = this.session;
        if (!session) return;
        try {
            const results = await this.api.getResults(session.sessionId, page, PAGE_SIZE);
            session.page = results.items;
            this.currentPage = page;
            this.render();
        } catch (err) {
            this.setStatus(`could not load page ${page + 1}: ${(err as Error).message}`, true);
        }
    }

    /** Displayed order, used by tests to compare against the API. */
    displayedOrder(): number[] {
        return gridOrder(this.el.grid);
    }
}
