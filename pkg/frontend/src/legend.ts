import type { ApiClient } from './api';
import type { ResultItem } from './types';

export interface AttributeExtremes {
    name: string;
    most: number[];
    least: number[];
}

/**
 * For each attribute, the ids of the images predicted to show it the most
 * and the least; rendered as a visual legend so users can calibrate what
 * an attribute name means before comparing against it.
 */
export function attributeExtremes(items: ResultItem[], perSide = 3): AttributeExtremes[] {
    if (items.length === 0) return [];
    const names = Object.keys(items[0].attribute_values);
    return names.map((name) => {
        const sorted = [...items].sort(
            (a, b) => b.attribute_values[name] - a.attribute_values[name],
        );
        return {
            name,
            most: sorted.slice(0, perSide).map((i) => i.id),
            least: sorted.slice(-perSide).map((i) => i.id).reverse(),
        };
    });
}

export function renderLegend(
    container: HTMLElement,
    extremes: AttributeExtremes[],
    options: { api?: ApiClient; dataset?: string } = {},
): void {
    container.textContent = '';
    const list = document.createElement('dl');
    list.className = 'attribute-legend';
    for (const entry of extremes) {
        const term = document.createElement('dt');
        term.textContent = entry.name;
        list.appendChild(term);
        const detail = document.createElement('dd');
        for (const [label, ids] of [
            ['most', entry.most],
            ['least', entry.least],
        ] as const) {
            const group = document.createElement('span');
            group.className = `extreme-${label}`;
            group.textContent = `${label}: `;
            for (const id of ids) {
                if (options.api && options.dataset) {
                    const img = document.createElement('img');
                    img.src = options.api.imageUrl(options.dataset, id);
                    img.alt = `image ${id}`;
                    img.className = 'legend-thumb';
                    group.appendChild(img);
                } else {
                    const chip = document.createElement('code');
                    chip.textContent = `#${id} `;
                    group.appendChild(chip);
                }
            }
            detail.appendChild(group);
        }
        list.appendChild(detail);
    }
    container.appendChild(list);
}
