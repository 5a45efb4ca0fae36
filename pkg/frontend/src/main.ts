import { ApiClient } from './api';
import { App, AppElements } from './app';

function requireElement<T extends HTMLElement>(id: string): T {
    const el = document.getElementById(id);
    if (!el) throw new Error(`missing #${id} in the page shell`);
    return el as T;
}

export function mount(baseUrl = ''): App {
    const elements: AppElements = {
        datasetSelect: requireElement('dataset-select'),
        modeSelect: requireElement('mode-select'),
        startButton: requireElement('start-button'),
        status: requireElement('status'),
        legend: requireElement('legend'),
        question: requireElement('question'),
        sparkline: requireElement('sparkline'),
        basket: requireElement('basket'),
        grid: requireElement('grid'),
    };
    const app = new App(new ApiClient(baseUrl), elements);
    void app.loadDatasets();
    return app;
}

if (typeof window !== 'undefined' && document.readyState !== 'loading') {
    mount();
} else if (typeof window !== 'undefined') {
    document.addEventListener('DOMContentLoaded', () => mount());
}
