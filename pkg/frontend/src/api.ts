import type {
    DatasetInfo,
    FeedbackReply,
    ResultsPage,
    SessionCreated,
    SessionMode,
    Statement,
} from './types';

export class ApiError extends Error {
    constructor(public status: number, message: string) {
        super(message);
    }
}

type FetchLike = typeof fetch;

/**
 * Thin typed client for the v1 search API. The fetch implementation is
 * injectable so tests can run against a mock or a live server.
 */
export class ApiClient {
    constructor(
        private baseUrl: string = '',
        private fetchImpl: FetchLike = fetch.bind(globalThis),
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
        const body = await response.json().catch(() => ({}));
        if (!response.ok) {
            const detail = (body as { error?: string }).error ?? response.statusText;
            throw new ApiError(response.status, detail);
        }
        return body as T;
    }

    listDatasets(): Promise<{ datasets: DatasetInfo[] }> {
        return this.request('/v1/datasets');
    }

    createSession(
        dataset: string,
        mode: SessionMode,
        options: { seed?: number; page_size?: number } = {},
    ): Promise<SessionCreated> {
        return this.request('/v1/sessions', {
            method: 'POST',
            headers: { 'content-type': 'application/json' },
            body: JSON.stringify({ dataset, mode, ...options }),
        });
    }

    submitStatements(
        sessionId: string,
        statements: Statement[],
        binary: { relevant?: number[]; irrelevant?: number[] } = {},
    ): Promise<FeedbackReply> {
        return this.request(`/v1/sessions/${sessionId}/feedback`, {
            method: 'POST',
            headers: { 'content-type': 'application/json' },
            body: JSON.stringify({ statements, ...binary }),
        });
    }

    answerQuestion(
        sessionId: string,
        questionToken: string,
        response: 'more' | 'less' | 'equal',
        confidence: number,
    ): Promise<FeedbackReply> {
        return this.request(`/v1/sessions/${sessionId}/feedback`, {
            method: 'POST',
            headers: { 'content-type': 'application/json' },
            body: JSON.stringify({ question_token: questionToken, response, confidence }),
        });
    }

    getResults(sessionId: string, page: number, pageSize: number): Promise<ResultsPage> {
        return this.request(
            `/v1/sessions/${sessionId}/results?page=${page}&page_size=${pageSize}`,
        );
    }

    imageUrl(dataset: string, id: number): string {
        return `${this.baseUrl}/v1/images/${dataset}/${id}`;
    }
}
