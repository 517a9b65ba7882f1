// Typed client for the labeling service. Every value the UI renders comes
// from these responses; the UI never fabricates state of its own.

export type Histogram = {
    counts: number[][]  // one row per class, bins over [0, 1]
    edges: number[]
}

export type QueueItem = {
    sample_id: number
    payload: number[]
    mu: number[]
    sigma: number[]
    scalar_uncertainty: number
    histogram: Histogram
    enqueue_iteration: number
    status: string
    label: number | null
    annotator_id: string | null
}

export type LoopStatus = {
    iteration: number
    labelled_fraction: number
    validation_accuracy: number | null
    run_state: string
    stop_reason: string | null
    queue: { pending: number, labelled: number, expired: number }
}

export type SubmitResult =
    | { kind: 'ok', pendingRemaining: number }
    | { kind: 'conflict', message: string }
    | { kind: 'not_found', message: string }
    | { kind: 'error', message: string }

export class ApiClient {
    constructor(private base: string = '') { }

    async fetchQueue(limit?: number): Promise<QueueItem[]> {
        const query = limit === undefined ? '' : `?limit=${limit}`
        const res = await fetch(`${this.base}/queue${query}`)
        if (!res.ok) throw new Error(`queue request failed: ${res.status}`)
        return await res.json() as QueueItem[]
    }

    async fetchStatus(): Promise<LoopStatus> {
        const res = await fetch(`${this.base}/status`)
        if (!res.ok) throw new Error(`status request failed: ${res.status}`)
        return await res.json() as LoopStatus
    }

    async submitLabel(sampleId: number, label: number,
        annotatorId: string): Promise<SubmitResult> {
        const res = await fetch(`${this.base}/labels`, {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify({
                sample_id: sampleId, label, annotator_id: annotatorId,
            }),
        })
        if (res.ok) {
            const body = await res.json()
            return { kind: 'ok', pendingRemaining: body.pending_remaining }
        }
        const body = await res.json().catch(() => ({ error: `${res.status}` }))
        if (res.status === 409) return { kind: 'conflict', message: body.error }
        if (res.status === 404) return { kind: 'not_found', message: body.error }
        return { kind: 'error', message: body.error ?? `${res.status}` }
    }
}
