export type SessionMode = 'free' | 'active' | 'hybrid';
export type ComparisonResponse = 'more' | 'less' | 'equal';

export interface ResultItem {
    id: number;
    asset_path: string | null;
    score: number;
    satisfied_count: number;
    attribute_values: Record<string, number>;
}

export interface ActiveQuestion {
    question_token: string;
    pivot_image: number;
    attribute: number;
    attribute_name: string;
    expected_entropy: number;
}

export interface SessionCreated {
    session_id: string;
    page: ResultItem[];
    question: ActiveQuestion | null;
}

export interface FeedbackReply {
    page: ResultItem[];
    question: ActiveQuestion | null;
    entropy: number;
    iteration: number;
}

export interface ResultsPage {
    items: ResultItem[];
    page: number;
    page_size: number;
    total: number;
}

export interface DatasetInfo {
    name: string;
    N: number;
    M: number;
    attribute_names: string[];
}

export interface Statement {
    ref_id: number;
    attribute: number;
    response: ComparisonResponse;
    confidence: number;
}
