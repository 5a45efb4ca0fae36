import type { ApiClient } from './api';
import type { ResultItem } from './types';

export interface GridCallbacks {
    onCompare?: (item: ResultItem) => void;
    onRelevant?: (item: ResultItem) => void;
    onIrrelevant?: (item: ResultItem) => void;
    onPage?: (page: number) => void;
}

function badge(name: string, value: number): HTMLElement {
    const el = document.createElement('span');
    el.className = 'badge';
    el.title = name;
    el.textContent = `${name.slice(0, 12)}: ${value.toFixed(2)}`;
    return el;
}

/**
 * Render one page of ranked results. Card order is exactly the order the
 * API returned; the grid never reorders or rescores anything.
 */
export function renderResultsGrid(
    container: HTMLElement,
    items: ResultItem[],
    options: {
        api?: ApiClient;
        dataset?: string;
        page?: number;
        total?: number;
        pageSize?: number;
        showBinaryControls?: boolean;
        showCompareControls?: boolean;
        callbacks?: GridCallbacks;
    } = {},
): void {
    container.textContent = '';
    if (items.length === 0) {
        const empty = document.createElement('p');
        empty.className = 'empty-state';
        empty.textContent = 'No results to show.';
        container.appendChild(empty);
        return;
    }
    const grid = document.createElement('div');
    grid.className = 'results-grid';
    for (const item of items) {
        const card = document.createElement('figure');
        card.className = 'result-card';
        card.dataset.imageId = String(item.id);

        if (item.asset_path && options.api && options.dataset) {
            const img = document.createElement('img');
            img.src = options.api.imageUrl(options.dataset, item.id);
            img.alt = `image ${item.id}`;
            card.appendChild(img);
        } else {
            const placeholder = document.createElement('div');
            placeholder.className = 'placeholder';
            placeholder.textContent = `#${item.id}`;
            card.appendChild(placeholder);
        }

        const caption = document.createElement('figcaption');
        const score = document.createElement('div');
        score.className = 'score';
        score.textContent = `score ${item.score.toPrecision(3)} | satisfies ${item.satisfied_count}`;
        caption.appendChild(score);
        const badges = document.createElement('div');
        badges.className = 'badges';
        for (const [name, value] of Object.entries(item.attribute_values)) {
            badges.appendChild(badge(name, value));
        }
        caption.appendChild(badges);

        if (options.showCompareControls && options.callbacks?.onCompare) {
            const compare = document.createElement('button');
            compare.className = 'compare';
            compare.textContent = 'compare...';
            compare.addEventListener('click', () => options.callbacks?.onCompare?.(item));
            caption.appendChild(compare);
        }
        if (options.showBinaryControls) {
            for (const [label, handler] of [
                ['relevant', options.callbacks?.onRelevant],
                ['irrelevant', options.callbacks?.onIrrelevant],
            ] as const) {
                const button = document.createElement('button');
                button.className = label;
                button.textContent = label;
                button.addEventListener('click', () => handler?.(item));
                caption.appendChild(button);
            }
        }
        card.appendChild(caption);
        grid.appendChild(card);
    }
    container.appendChild(grid);

    if (options.total !== undefined && options.pageSize) {
        const pages = Math.ceil(options.total / options.pageSize);
        const nav = document.createElement('nav');
        nav.className = 'pagination';
        for (let p = 0; p < pages; p += 1) {
            const button = document.createElement('button');
            button.textContent = String(p + 1);
            if (p === options.page) {
                button.disabled = true;
                button.className = 'current';
            }
            button.addEventListener('click', () => options.callbacks?.onPage?.(p));
            nav.appendChild(button);
        }
        container.appendChild(nav);
    }
}

/** Ids in display order, for verifying the grid against the API. */
export function gridOrder(container: HTMLElement): number[] {
    return Array.from(container.querySelectorAll<HTMLElement>('.result-card')).map((card) =>
        Number(card.dataset.imageId),
    );
}
