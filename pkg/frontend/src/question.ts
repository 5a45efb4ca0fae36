import type { ApiClient } from './api';
import type { ActiveQuestion, ComparisonResponse } from './types';

export interface QuestionCallbacks {
    onAnswer: (response: ComparisonResponse, confidence: number) => void;
}

const CONFIDENCE_OPTIONS: Array<[string, number]> = [
    ['somewhat', 1],
    ['moderately', 2],
    ['a lot', 3],
];

/**
 * Render the actively posed comparison question: the pivot image and the
 * three-way more / less / equally control plus a confidence selector.
 */
export function renderQuestionPanel(
    container: HTMLElement,
    question: ActiveQuestion | null,
    options: { api?: ApiClient; dataset?: string; callbacks?: QuestionCallbacks; busy?: boolean } = {},
): void {
    container.textContent = '';
    if (question === null) {
        const done = document.createElement('p');
        done.className = 'exhausted-notice';
        done.textContent =
            'Every attribute has been narrowed down as far as it goes. Final results below.';
        container.appendChild(done);
        return;
    }
    const panel = document.createElement('div');
    panel.className = 'question-panel';
    panel.dataset.token = question.question_token;

    const prompt = document.createElement('p');
    prompt.className = 'prompt';
    prompt.textContent = `Is the image you are looking for more, less, or equally "${question.attribute_name}" compared to this image?`;
    panel.appendChild(prompt);

    if (options.api && options.dataset) {
        const img = document.createElement('img');
        img.className = 'pivot';
        img.src = options.api.imageUrl(options.dataset, question.pivot_image);
        img.alt = `pivot image ${question.pivot_image}`;
        panel.appendChild(img);
    } else {
        const placeholder = document.createElement('div');
        placeholder.className = 'placeholder pivot';
        placeholder.textContent = `#${question.pivot_image}`;
        panel.appendChild(placeholder);
    }

    const confidence = document.createElement('select');
    confidence.className = 'confidence';
    for (const [label, value] of CONFIDENCE_OPTIONS) {
        const option = document.createElement('option');
        option.value = String(value);
        option.textContent = label;
        if (value === 2) option.selected = true;
        confidence.appendChild(option);
    }

    const buttons = document.createElement('div');
    buttons.className = 'answers';
    for (const response of ['more', 'less', 'equal'] as const) {
        const button = document.createElement('button');
        button.className = `answer-${response}`;
        button.textContent = response === 'equal' ? 'equally' : response;
        button.disabled = Boolean(options.busy);
        button.addEventListener('click', () =>
            options.callbacks?.onAnswer(response, Number(confidence.value)),
        );
        buttons.appendChild(button);
    }
    panel.appendChild(buttons);
    panel.appendChild(confidence);
    container.appendChild(panel);
}

/** Tiny inline sparkline of the entropy trajectory. */
export function renderEntropySparkline(container: HTMLElement, history: number[]): void {
    container.textContent = '';
    if (history.length === 0) return;
    const width = 120;
    const height = 24;
    const max = Math.max(...history, 1e-9);
    const step = history.length > 1 ? width / (history.length - 1) : 0;
    const points = history
        .map((h, i) => `${(i * step).toFixed(1)},${(height - (h / max) * height).toFixed(1)}`)
        .join(' ');
    const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
    svg.setAttribute('width', String(width));
    svg.setAttribute('height', String(height));
    svg.setAttribute('class', 'entropy-sparkline');
    const line = document.createElementNS('http://www.w3.org/2000/svg', 'polyline');
    line.setAttribute('points', points);
    line.setAttribute('fill', 'none');
    line.setAttribute('stroke', 'currentColor');
    svg.appendChild(line);
    container.appendChild(svg);
}
